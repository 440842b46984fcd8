import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_energy
from wulffcell.errors import InputError
from wulffcell.lattice import (Box, FunctionField, PeriodicGraph, PointSet, SpinField,
                               TransformedField, cell_region, coarea_decompose, energy,
                               half_space_indicator, load_graph, save_graph,
                               translate_energy_check)
from wulffcell.presets import nearest_neighbour, random_graph

TWO_SITE = dict(dim=2, period=2, sites=[[0.0, 0.0], [1.0, 0.0]],
                edges=[(0, 1, (0, 0), 1.0), (1, 0, (1, 0), 0.3), (0, 0, (0, 1), 0.7),
                       (1, 1, (0, -1), 0.2)])


def two_site():
    return PeriodicGraph.from_edges(**TWO_SITE)


def test_edges_and_displacements():
    g = two_site()
    assert g.n_sites == 2 and g.n_edges == 4
    np.testing.assert_allclose(g.displacements, [[1, 0], [1, 0], [0, 2], [0, -2]])
    assert g.edges[1] == (1, 0, (1, 0), 0.3)


def test_arrays_are_read_only():
    g = two_site()
    with pytest.raises(ValueError):
        g.weights[0] = 5.0


def test_zero_weights_dropped():
    edges = TWO_SITE["edges"] + [(0, 1, (0, 1), 0.0)]
    g = PeriodicGraph.from_edges(2, 2, TWO_SITE["sites"], edges)
    assert g.n_edges == 4


@pytest.mark.parametrize("edges,code", [
    ([(0, 0, (1, 0), -1.0), (0, 0, (0, 1), 1.0)], "negative-weight"),
    ([(0, 0, (1, 0), float("nan")), (0, 0, (0, 1), 1.0)], "nan-weight"),
    ([(0, 3, (1, 0), 1.0)], "unknown-site"),
    ([(0, 0, (1, 0), 1.0)], "disconnected"),
    ([(0, 0, (2, 0), 1.0), (0, 0, (0, 1), 1.0)], "disconnected"),
])
def test_invalid_graphs(edges, code):
    with pytest.raises(InputError) as exc:
        PeriodicGraph.from_edges(2, 1, [[0.0, 0.0]], edges)
    assert exc.value.code == code


def test_sites_outside_cell_rejected():
    with pytest.raises(InputError):
        PeriodicGraph.from_edges(2, 1, [[1.5, 0.0]], [(0, 0, (1, 0), 1.0), (0, 0, (0, 1), 1.0)])


def test_coincident_sites_rejected():
    with pytest.raises(InputError) as exc:
        PeriodicGraph.from_edges(2, 2, [[0.0, 0.0], [0.0, 0.0]],
                                 [(0, 1, (1, 0), 1.0), (1, 0, (0, 1), 1.0)])
    assert exc.value.code == "not-discrete"


def test_json_roundtrip(tmp_path):
    g = two_site()
    path = tmp_path / "g.json"
    save_graph(g, path)
    h = load_graph(path)
    assert h.to_dict() == g.to_dict()
    json.loads(path.read_text())


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\"dim\": 2}")
    with pytest.raises(InputError):
        load_graph(path)


def test_energy_against_pointwise_sum():
    g = two_site()
    u = lambda x: np.sin(x[..., 0]) + 0.3 * x[..., 1] ** 2  # noqa: E731
    box = Box([-2, -1], [3, 4])
    ours = energy(g, FunctionField(u), box)
    ref = brute_energy(TWO_SITE["sites"], 2, TWO_SITE["edges"], lambda p: u(np.asarray(p)),
                       [-2, -1], [3, 4])
    assert ours == pytest.approx(ref, rel=1e-12)


def test_nearest_neighbour_energy_of_half_plane():
    g = nearest_neighbour()
    u = half_space_indicator((1.0, 0.0))
    # a 4x4 box crossing the interface: one cut bond per row
    assert energy(g, u, Box([-2, -2], [2, 2])) == pytest.approx(4.0)


def test_spin_field_affine_part():
    g = two_site()
    f = SpinField([0.5, -0.5], slope=[1.0, 2.0])
    assert f.evaluate(g, np.array([1]), np.array([[1, 1]]))[0] == pytest.approx(-0.5 + 3 + 4)


@given(st.integers(0, 10_000))
def test_coarea_identity(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, max_edges=12)
    vals = rng.integers(-3, 4, size=g.n_sites).astype(float)
    slope = rng.integers(-1, 2, size=g.dim).astype(float)
    u = SpinField(vals, slope=slope)
    region = Box([-1.0] * g.dim, [g.period + 1.0] * g.dim)
    parts = coarea_decompose(g, u, region)
    total = sum(w * e for _, w, e in parts)
    assert total == pytest.approx(energy(g, u, region), abs=1e-9)


@given(st.integers(0, 10_000), st.floats(0.0, 5.0))
def test_energy_monotone_homogeneous_and_translation_invariant(seed, lam):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, max_edges=12)
    u = SpinField(rng.standard_normal(g.n_sites), slope=rng.standard_normal(g.dim))
    region = Box([0.0] * g.dim, [2.0 * g.period] * g.dim)
    e = energy(g, u, region)
    assert energy(g, TransformedField(u, scale=lam), region) == pytest.approx(lam * e, abs=1e-9)
    assert energy(g, TransformedField(u, offset=3.0), region) == pytest.approx(e, abs=1e-9)
    bigger = Box([-1.0] * g.dim, [2.0 * g.period + 1] * g.dim)
    assert energy(g, u, bigger) >= e - 1e-12
    shift = rng.integers(-2, 3, size=g.dim)
    a, b = translate_energy_check(g, u, region, shift)
    assert a == pytest.approx(b, abs=1e-9)


@given(st.integers(0, 10_000))
def test_energy_additive_over_disjoint_regions(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, max_edges=12)
    u = SpinField(rng.standard_normal(g.n_sites), slope=rng.standard_normal(g.dim))
    T = g.period
    lo, mid, hi = [0.0] * g.dim, [T] + [2.0 * T] * (g.dim - 1), [2.0 * T] * g.dim
    left = Box(lo, mid)
    right = Box([T] + [0.0] * (g.dim - 1), hi)
    assert energy(g, u, Box(lo, hi)) == pytest.approx(energy(g, u, left) + energy(g, u, right))


def test_cell_region_and_pointset_validation():
    g = two_site()
    assert len(cell_region(g).lattice_points(g)[0]) == 2
    with pytest.raises(InputError):
        PointSet([5], [[0, 0]]).lattice_points(g)


def test_tile_preserves_energy_density():
    g = two_site()
    gk = g.tile(2)
    assert gk.period == 4 and gk.n_sites == 8 and gk.n_edges == 16
    u = SpinField(np.zeros(2), slope=[0.3, -0.8])
    uk = SpinField(np.zeros(8), slope=[0.3, -0.8])
    e1 = energy(g, u, cell_region(g)) / g.period ** 2
    e2 = energy(gk, uk, cell_region(gk)) / gk.period ** 2
    assert e1 == pytest.approx(e2)
