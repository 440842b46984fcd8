"""Learning grid weights that make the surface energy density isotropic.

The loss ``L(c) = sum_l (phi_eps(nu_l)[c] - 1)^2`` over ``k`` equally spaced
directions is minimized by projected gradient descent on the box
``[c_lo, c_hi]`` with an Armijo backtracking line search.  Every restart is
scored by the unregularized anisotropy error on a finer direction set.

The cell value is an unnormalized sum over ``T^2`` sites, so weights that
make it close to 1 scale like ``4 / T^2``.  The descent runs on
``theta = c T^2 / 4``; the box, the initial range and the step size are
expressed in these units and therefore mean the same thing for every
period (for ``T = 2`` they are the weights themselves).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InputError
from .saddle import WeightField2D, phi_grid_batch
from .wulff import anisotropy_error, frank_diagram


@dataclass
class OptimizeConfig:
    period: int = 2
    k: int = 8
    eps: float = 1e-4
    eps_start: float = 1e-2  # continuation: smoothing is reduced tenfold per stage down to eps
    step: float = 0.05
    backtrack: float = 0.5
    c1: float = 1e-4
    min_step: float = 1e-12
    max_iter: int = 500
    restarts: int = 5
    seed: int = 7
    c_lo: float = 0.01
    c_hi: float = 1.0
    init_lo: float = 0.1
    init_hi: float = 0.4
    symmetrize: bool = False
    k_eval: int = 180
    tol: float = 1e-14  # stop when a projected step changes the loss by less than this
    bb: bool = True  # Barzilai-Borwein trial steps (still backtracked)

    def validate(self) -> "OptimizeConfig":
        if self.period < 1:
            raise InputError("period must be >= 1")
        if self.k < 8 or self.k_eval < 8:
            raise InputError("k and k_eval must be at least 8")
        if not self.eps > 0:
            raise InputError("eps must be positive")
        if self.eps_start < self.eps:
            raise InputError("eps_start must be >= eps")
        if not 0 <= self.c_lo < self.c_hi:
            raise InputError("need 0 <= c_lo < c_hi")
        if not 0 < self.backtrack < 1:
            raise InputError("backtracking factor must lie in (0, 1)")
        if self.step <= 0 or self.min_step <= 0:
            raise InputError("steps must be positive")
        if self.max_iter < 0 or self.restarts < 1:
            raise InputError("max_iter must be >= 0 and restarts >= 1")
        return self

    def eps_stages(self) -> list:
        stages = []
        e = self.eps_start
        while e > self.eps * (1 + 1e-9):
            stages.append(e)
            e /= 10.0
        return stages + [self.eps]

    @property
    def unit(self) -> float:
        return 4.0 / self.period ** 2

    def directions(self) -> np.ndarray:
        ang = 2 * np.pi * np.arange(1, self.k + 1) / self.k
        return np.column_stack([np.cos(ang), np.sin(ang)])


@dataclass
class RestartRecord:
    loss: list = field(default_factory=list)
    step: list = field(default_factory=list)
    stages: list = field(default_factory=list)  # index in ``loss`` where each stage starts
    stage_eps: list = field(default_factory=list)
    anisotropy: float = math.nan
    anisotropy_train: float = math.nan
    converged: bool = False
    weights: WeightField2D | None = None

    def eps_per_entry(self) -> list:
        bounds = self.stages[1:] + [len(self.loss)]
        out = []
        for start, stop, eps in zip(self.stages, bounds, self.stage_eps):
            out.extend([eps] * (stop - start))
        return out

    def stage_losses(self) -> list:
        """The loss sequence of each smoothing stage."""
        bounds = self.stages[1:] + [len(self.loss)]
        return [self.loss[a:b] for a, b in zip(self.stages, bounds)]


@dataclass
class OptimizeTrace:
    restarts: list = field(default_factory=list)
    best_restart: int = -1
    warning: bool = False

    @property
    def best(self) -> RestartRecord:
        return self.restarts[self.best_restart]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["restart", "iteration", "eps", "loss", "step"])
            for r, rec in enumerate(self.restarts):
                for it, (eps, loss, step) in enumerate(zip(rec.eps_per_entry(), rec.loss, rec.step)):
                    w.writerow([r, it, repr(eps), repr(loss), repr(step)])

    def summary(self) -> dict:
        return {
            "best_restart": self.best_restart,
            "warning": self.warning,
            "restarts": [
                {"iterations": len(r.loss) - 1, "final_loss": r.loss[-1],
                 "anisotropy_eval": r.anisotropy, "anisotropy_train": r.anisotropy_train,
                 "converged": r.converged}
                for r in self.restarts
            ],
        }


def _swap_axes(c: np.ndarray) -> np.ndarray:
    # reflection across the diagonal exchanges the x and y classes
    return np.stack([c[2].T, c[3].T, c[0].T, c[1].T])


def _symmetric(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + _swap_axes(c))


def _evaluate(theta, cfg, warm=None, eps=None):
    wf = WeightField2D.from_array(theta * cfg.unit)
    eps = cfg.eps if eps is None else eps
    vals, grads, V = phi_grid_batch(wf, cfg.directions(), eps, warm)
    r = vals - 1.0
    loss = float(np.sum(r * r))
    grad = np.tensordot(2 * r, grads, axes=1) * cfg.unit
    if cfg.symmetrize:
        grad = _symmetric(grad)
    return loss, grad, V


def loss_and_grad(wf: WeightField2D, cfg: OptimizeConfig):
    """``(L, dL/dc)`` with the gradient shaped ``(4, T, T)``."""
    cfg.validate()
    loss, grad, _ = _evaluate(wf.as_array() / cfg.unit, cfg)
    return loss, grad / cfg.unit


def _descend(c, cfg: OptimizeConfig) -> RestartRecord:
    """Projected descent, once per smoothing stage; each stage warm-starts the next.

    The recorded losses restart at every stage since the objective changes.
    """
    rec = RestartRecord()
    for eps in cfg.eps_stages():
        c = _descend_stage(c, cfg, eps, rec)
    rec.weights = WeightField2D.from_array(c * cfg.unit)
    return rec


def _descend_stage(c, cfg, eps, rec):
    rec.stages.append(len(rec.loss))
    rec.stage_eps.append(eps)
    rec.converged = False
    loss, grad, V = _evaluate(c, cfg, eps=eps)
    rec.loss.append(loss)
    rec.step.append(0.0)
    t = cfg.step
    for _ in range(cfg.max_iter):
        accepted = False
        while t >= cfg.min_step:
            c_new = np.clip(c - t * grad, cfg.c_lo, cfg.c_hi)
            if cfg.symmetrize:
                c_new = np.clip(_symmetric(c_new), cfg.c_lo, cfg.c_hi)
            d = c_new - c
            if not np.any(d):
                rec.converged = True
                break
            loss_new, grad_new, V_new = _evaluate(c_new, cfg, V, eps)
            if loss_new <= loss + cfg.c1 * float(np.sum(grad * d)):
                accepted = True
                break
            t *= cfg.backtrack
        if not accepted:
            # a failed line search at a stationary point is convergence
            rec.converged = rec.converged or loss <= cfg.tol
            break
        decrease = loss - loss_new
        s_k, y_k = c_new - c, grad_new - grad
        c, loss, grad, V = c_new, loss_new, grad_new, V_new
        rec.loss.append(loss)
        rec.step.append(t)
        if decrease <= cfg.tol * max(1.0, loss) or loss <= cfg.tol:
            rec.converged = True
            break
        sy = float(np.sum(s_k * y_k))
        if cfg.bb and sy > 0:
            t = float(np.sum(s_k * s_k)) / sy
        else:
            t = t / cfg.backtrack
        t = min(max(t, cfg.min_step), 1e3 * cfg.step)
    else:
        rec.converged = True  # budget exhausted with every step accepted
    return c


def evaluate_anisotropy(wf: WeightField2D, k: int) -> float:
    """Unregularized anisotropy error on ``k`` equally spaced directions."""
    return anisotropy_error(frank_diagram(wf, k))


def optimize(cfg: OptimizeConfig, init: WeightField2D | None = None):
    """Best weight field over all restarts and the full trace.

    With ``init`` the first restart starts from that field; the remaining
    starting points are drawn uniformly from ``[init_lo, init_hi]``.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    T = cfg.period
    starts = [rng.uniform(cfg.init_lo, cfg.init_hi, size=(4, T, T)) for _ in range(cfg.restarts)]
    if init is not None:
        if init.period != T:
            raise InputError("initial weights have the wrong period")
        starts[0] = init.as_array() / cfg.unit
    trace = OptimizeTrace()
    for c0 in starts:
        if cfg.symmetrize:
            c0 = _symmetric(c0)
        rec = _descend(np.clip(c0, cfg.c_lo, cfg.c_hi), cfg)
        rec.anisotropy = evaluate_anisotropy(rec.weights, cfg.k_eval)
        train = frank_diagram(rec.weights, cfg.k)
        rec.anisotropy_train = anisotropy_error(train)
        trace.restarts.append(rec)
    scores = [r.anisotropy for r in trace.restarts]
    trace.best_restart = int(np.argmin(scores))
    trace.warning = not any(r.converged for r in trace.restarts)
    if trace.warning:
        warnings.warn("every restart stopped on a failed line search; returning the best field",
                      RuntimeWarning, stacklevel=2)
    return trace.best.weights, trace


def config_dict(cfg: OptimizeConfig) -> dict:
    return asdict(cfg)
