import csv

import numpy as np
import pytest

from oracles import central_difference
from wulffcell.aniso_opt import (OptimizeConfig, evaluate_anisotropy, loss_and_grad, optimize)
from wulffcell.errors import InputError
from wulffcell.saddle import WeightField2D, optimal_t2_weights


def test_optimal_t2_weights_have_tiny_loss():
    loss, _ = loss_and_grad(optimal_t2_weights(), OptimizeConfig(period=2, k=8, eps=1e-6))
    assert loss <= 1e-6


def test_uniform_weights_have_large_loss():
    # unit-sum uniform field: phi = |nu|_1 scaled, far from a circle
    loss, _ = loss_and_grad(WeightField2D.uniform(2, 0.25), OptimizeConfig(period=2, k=8))
    assert loss > 0.1


def test_loss_gradient_matches_finite_differences(rng):
    cfg = OptimizeConfig(period=2, k=8, eps=1e-2)
    c = rng.uniform(0.1, 0.4, size=(4, 2, 2))
    _, grad = loss_and_grad(WeightField2D.from_array(c), cfg)
    ref = central_difference(lambda x: loss_and_grad(WeightField2D.from_array(x), cfg)[0], c, 1e-6)
    np.testing.assert_allclose(grad, ref, atol=1e-6)


def _small_cfg(**kw):
    base = dict(period=2, k=8, max_iter=40, restarts=2, seed=3, k_eval=36)
    base.update(kw)
    return OptimizeConfig(**base)


def test_loss_monotone_within_each_stage_and_box_respected():
    cfg = _small_cfg()
    wf, trace = optimize(cfg)
    for rec in trace.restarts:
        for stage in rec.stage_losses():
            assert np.all(np.diff(stage) <= 1e-15)
        c = rec.weights.as_array() / cfg.unit
        assert np.all(c >= cfg.c_lo - 1e-15) and np.all(c <= cfg.c_hi + 1e-15)
    assert trace.best.anisotropy == min(r.anisotropy for r in trace.restarts)
    assert wf is trace.best.weights


def test_optimizer_is_deterministic():
    a = optimize(_small_cfg(restarts=1))[1].best
    b = optimize(_small_cfg(restarts=1))[1].best
    assert a.loss == b.loss
    np.testing.assert_array_equal(a.weights.as_array(), b.weights.as_array())


def test_optimizer_improves_on_start():
    cfg = _small_cfg(restarts=1, max_iter=200)
    rec = optimize(cfg)[1].best
    assert rec.loss[-1] < rec.loss[0]
    assert rec.anisotropy < 0.2


def test_symmetrized_optimizer_keeps_diagonal_symmetry():
    cfg = _small_cfg(restarts=1, symmetrize=True)
    c = optimize(cfg)[0].as_array()
    swapped = np.stack([c[2].T, c[3].T, c[0].T, c[1].T])
    np.testing.assert_allclose(c, swapped, atol=1e-12)


def test_init_and_trace_csv(tmp_path):
    cfg = _small_cfg(restarts=1, max_iter=5)
    wf, trace = optimize(cfg, init=optimal_t2_weights())
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    rows = list(csv.DictReader(path.open()))
    assert set(rows[0]) == {"restart", "iteration", "eps", "loss", "step"}
    start, _ = loss_and_grad(optimal_t2_weights(), _small_cfg(eps=cfg.eps_start))
    assert float(rows[0]["loss"]) == pytest.approx(start, rel=1e-12)
    assert trace.summary()["best_restart"] == 0
    with pytest.raises(InputError):
        optimize(cfg, init=WeightField2D.uniform(3))


def test_config_validation():
    with pytest.raises(InputError):
        OptimizeConfig(k=2).validate()
    with pytest.raises(InputError):
        OptimizeConfig(eps=0.0).validate()
    with pytest.raises(InputError):
        OptimizeConfig(c_lo=0.5, c_hi=0.1).validate()
    stages = OptimizeConfig(eps=1e-4, eps_start=1e-2).eps_stages()
    np.testing.assert_allclose(stages, [1e-2, 1e-3, 1e-4])


def test_evaluate_anisotropy_of_octagon():
    assert evaluate_anisotropy(optimal_t2_weights(), 8) == pytest.approx(0.0, abs=1e-12)
