import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wulffcell.errors import InputError, IterativeFailure
from wulffcell.imaging import (FixedBoundary, GridImage, Quadratic, TVProblem, box_mask,
                               fit_orientation, gaussian_noise, halfplane_image,
                               inpaint_halfplane, interface_points, orientation_error, read_csv,
                               read_pgm, rof_denoise, rof_objective, step_image, threshold,
                               tv_energy, tv_fixed_boundary, write_csv, write_pgm)
from wulffcell.saddle import WeightField2D

UNIT = TVProblem(WeightField2D.uniform(1))


def _brute_tv(c, u):
    """Pixel-by-pixel weighted TV with periodic weights."""
    T = c.shape[1]
    W, H = u.shape
    total = 0.0
    for i in range(W):
        for j in range(H):
            xp, xm, yp, ym = c[:, i % T, j % T]
            if i + 1 < W:
                d = u[i + 1, j] - u[i, j]
                total += xp * max(d, 0) + xm * max(-d, 0)
            if j + 1 < H:
                d = u[i, j + 1] - u[i, j]
                total += yp * max(d, 0) + ym * max(-d, 0)
    return total


def test_step_image_has_tv_equal_to_height():
    u = step_image((10, 7))
    assert tv_energy(UNIT, u) == pytest.approx(7.0)
    assert tv_energy(UNIT, np.full((5, 5), 0.3)) == 0.0


@given(st.integers(0, 100_000))
def test_tv_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.1, 1.0, size=(4, 2, 2))
    u = rng.standard_normal((5, 6))
    p = TVProblem(WeightField2D.from_array(c))
    assert tv_energy(p, u) == pytest.approx(_brute_tv(c, u), rel=1e-12)


@given(st.integers(0, 100_000), st.floats(0.1, 5.0), st.floats(-3, 3))
def test_tv_homogeneous_and_translation_invariant(seed, lam, shift):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((6, 6))
    p = TVProblem(WeightField2D.from_array(rng.uniform(0.1, 1.0, size=(4, 2, 2))))
    assert tv_energy(p, lam * u) == pytest.approx(lam * tv_energy(p, u), rel=1e-12)
    assert tv_energy(p, u + shift) == pytest.approx(tv_energy(p, u), rel=1e-12)


def test_rof_constant_data_is_fixed_point():
    f = np.full((8, 8), 0.4)
    u, rep = rof_denoise(TVProblem(WeightField2D.uniform(1), Quadratic(f, 2.0)))
    np.testing.assert_allclose(u.values, f, atol=1e-12)
    assert rep.gap <= 1e-6


def test_rof_large_mu_returns_data(rng):
    f = rng.uniform(size=(8, 8))
    u, _ = rof_denoise(TVProblem(WeightField2D.uniform(1), Quadratic(f, 1e6)), tol=1e-8)
    np.testing.assert_allclose(u.values, f, atol=1e-5)


def test_rof_certified_gap_and_monotone_history(rng):
    f = gaussian_noise(step_image((24, 24)), 0.2, seed=1)
    p = TVProblem(WeightField2D.from_array(rng.uniform(0.1, 0.4, size=(4, 2, 2))),
                  Quadratic(f, 8.0))
    u, rep = rof_denoise(p, tol=1e-6)
    assert rep.gap <= 1e-6
    objs = [h[1] for h in rep.history]
    assert np.all(np.diff(objs) <= 0)
    assert rof_objective(p, u) == pytest.approx(objs[-1])
    # optimality against random perturbations
    for _ in range(5):
        assert rof_objective(p, u.values + 1e-3 * rng.standard_normal(f.shape)) >= objs[-1] - 1e-6


def test_rof_comparison_principle(rng):
    f = rng.uniform(size=(12, 12))
    g = f + rng.uniform(0.0, 0.5, size=f.shape)
    w = WeightField2D.from_array(rng.uniform(0.1, 0.4, size=(4, 2, 2)))
    uf, _ = rof_denoise(TVProblem(w, Quadratic(f, 4.0)), tol=1e-9)
    ug, _ = rof_denoise(TVProblem(w, Quadratic(g, 4.0)), tol=1e-9)
    assert np.all(uf.values <= ug.values + 1e-4)


def test_rof_reports_failure_when_budget_too_small(rng):
    f = rng.uniform(size=(16, 16))
    with pytest.raises(IterativeFailure) as exc:
        rof_denoise(TVProblem(WeightField2D.uniform(1), Quadratic(f, 1.0)), tol=1e-12, max_iter=20)
    assert exc.value.iterations == 20
    with pytest.raises(InputError):
        rof_denoise(TVProblem(WeightField2D.uniform(1), Quadratic(f, 0.0)))


def test_fixed_boundary_without_free_pixels_returns_data():
    g = halfplane_image((8, 8), (1.0, 0.0))
    u, rep = tv_fixed_boundary(TVProblem(WeightField2D.uniform(1),
                                         FixedBoundary(np.zeros((8, 8), bool), g)))
    np.testing.assert_array_equal(u, g)
    assert rep.gap == 0.0


def test_axis_halfplane_is_reconstructed_exactly():
    res = inpaint_halfplane(WeightField2D.uniform(1), (1.0, 0.0), (8, 8, 24, 24), size=(32, 32))
    np.testing.assert_array_equal(res.binary.values, halfplane_image((32, 32), (1.0, 0.0)))


def test_inpainting_keeps_boundary_and_range():
    res = inpaint_halfplane(WeightField2D.uniform(1), (1.0, 2.0), (6, 6, 26, 26), size=(32, 32))
    g = halfplane_image((32, 32), res.nu)
    fixed = ~res.relaxed.mask
    np.testing.assert_array_equal(res.relaxed.values[fixed], g[fixed])
    assert res.relaxed.values.min() >= 0 and res.relaxed.values.max() <= 1
    assert set(np.unique(res.binary.values)) <= {0.0, 1.0}
    assert res.report.gap <= 1e-4 * max(1.0, tv_energy(UNIT, res.relaxed.values))


def test_box_and_direction_validation():
    with pytest.raises(InputError):
        box_mask((16, 16), (0, 4, 8, 8))
    with pytest.raises(InputError):
        box_mask((16, 16), (4, 4, 16, 8))
    with pytest.raises(InputError):
        inpaint_halfplane(WeightField2D.uniform(1), (0.0, 0.0), (4, 4, 8, 8), size=(16, 16))


def test_threshold_ties_go_up():
    np.testing.assert_array_equal(threshold([0.49, 0.5, 0.51]), [0.0, 1.0, 1.0])


def test_orientation_fit_recovers_lines():
    for deg in (0.0, 17.0, 45.0, 100.0):
        t = math.radians(deg)
        nu = (math.cos(t), math.sin(t))
        b = halfplane_image((64, 64), nu)
        normal, _ = fit_orientation(interface_points(b))
        assert orientation_error(normal, nu) < 1.0
    assert orientation_error((1, 0), (-1, 0)) == 0.0
    assert orientation_error((1, 0), (0, 1)) == pytest.approx(90.0)
    with pytest.raises(InputError):
        fit_orientation([(0.0, 0.0)])


def test_pgm_and_csv_roundtrip(tmp_path, rng):
    u = rng.integers(0, 256, size=(5, 3)) / 255.0
    write_pgm(tmp_path / "a.pgm", u)
    np.testing.assert_allclose(read_pgm(tmp_path / "a.pgm").values, u, atol=1e-12)
    text = (tmp_path / "a.pgm").read_text().split()
    assert text[:4] == ["P2", "5", "3", "255"]
    # the first stored row is the top of the image
    assert int(text[4]) == round(u[0, 2] * 255)
    write_csv(tmp_path / "a.csv", u)
    np.testing.assert_array_equal(read_csv(tmp_path / "a.csv").values, u)


def test_pgm_rejects_other_formats(tmp_path):
    (tmp_path / "b.pgm").write_text("P5\n1 1\n255\n0\n")
    with pytest.raises(InputError):
        read_pgm(tmp_path / "b.pgm")
    (tmp_path / "c.pgm").write_text("P2\n2 2\n255\n0 0 0\n")
    with pytest.raises(InputError):
        read_pgm(tmp_path / "c.pgm")


def test_grid_image_validation():
    with pytest.raises(InputError):
        GridImage(np.zeros(4))
    with pytest.raises(InputError):
        GridImage(np.array([[np.nan]]))
    with pytest.raises(InputError):
        GridImage(np.zeros((2, 2)), mask=np.zeros((3, 3)))
