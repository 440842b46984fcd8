"""Cell problem for periodic nearest-neighbour grid weights.

Weights live on the four oriented edge classes of a ``T x T`` periodic
cell, indexed ``[i, j]`` with ``i`` horizontal:

* ``xp[i, j]`` multiplies ``(u[i+1, j] - u[i, j])^+``
* ``xm[i, j]`` multiplies ``(u[i, j] - u[i+1, j])^+``
* ``yp[i, j]`` multiplies ``(u[i, j+1] - u[i, j])^+``
* ``ym[i, j]`` multiplies ``(u[i, j] - u[i, j+1])^+``

The grid value is the energy of one cell (no division by ``T^2``), which
is the normalization under which well-tuned weights give ``phi ~ 1``.

With ``v`` periodic and ``a = K v + b`` the vector of signed, weighted
edge slopes, the regularized problem reads::

    min_v max_{0 <= w <= 1}  <w, K v + b> - eps/2 |w|^2 + eps/2 |v|^2
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError, IterativeFailure
from .lattice import PeriodicGraph

CLASSES = ("xp", "xm", "yp", "ym")
_SIGN = np.array([1.0, -1.0, 1.0, -1.0])


@dataclass(eq=False)
class WeightField2D:
    period: int
    xp: np.ndarray
    xm: np.ndarray
    yp: np.ndarray
    ym: np.ndarray

    def __post_init__(self):
        T = int(self.period)
        if T < 1:
            raise InputError("period must be >= 1", "schema")
        self.period = T
        for name in CLASSES:
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != (T, T):
                raise InputError(f"weight array {name} must have shape ({T}, {T})", "schema")
            if not np.all(np.isfinite(a)):
                raise InputError(f"weight array {name} has non-finite entries", "nan-weight")
            if np.any(a < 0):
                raise InputError(f"weight array {name} has negative entries", "negative-weight")
            setattr(self, name, a)

    @classmethod
    def from_array(cls, arr) -> "WeightField2D":
        arr = np.asarray(arr, dtype=float)
        return cls(arr.shape[1], *arr)

    @classmethod
    def uniform(cls, T, value=1.0) -> "WeightField2D":
        return cls.from_array(np.full((4, T, T), float(value)))

    def as_array(self) -> np.ndarray:
        return np.stack([self.xp, self.xm, self.yp, self.ym])

    def to_graph(self, cell_normalized=True) -> PeriodicGraph:
        """Equivalent :class:`PeriodicGraph` on the sites ``(i, j)``.

        With ``cell_normalized`` the weights are multiplied by ``T**2`` so
        that the graph's cell formula (which divides by the cell volume)
        returns the same value as :func:`phi_grid`.
        """
        T = self.period
        scale = T * T if cell_normalized else 1.0
        sites = [[i, j] for i in range(T) for j in range(T)]
        edges = []

        def add(si, sj, di, dj, c):
            # interaction c * (u(source) - u(source + (di, dj)))^+
            ti, tj = si + di, sj + dj
            edges.append((
                (si % T) * T + sj % T,
                (ti % T) * T + tj % T,
                ((ti // T) - (si // T), (tj // T) - (sj // T)),
                scale * c,
            ))

        for i in range(T):
            for j in range(T):
                add(i + 1, j, -1, 0, self.xp[i, j])
                add(i, j, 1, 0, self.xm[i, j])
                add(i, j + 1, 0, -1, self.yp[i, j])
                add(i, j, 0, 1, self.ym[i, j])
        return PeriodicGraph.from_edges(2, T, sites, edges)

    def validate(self) -> "WeightField2D":
        """Raise :class:`InputError` unless the periodic grid graph is connected."""
        self.to_graph()
        return self

    def to_dict(self) -> dict:
        out = {"period": self.period}
        for name in CLASSES:
            out[name] = getattr(self, name).tolist()
        return out

    @classmethod
    def from_dict(cls, data) -> "WeightField2D":
        try:
            return cls(int(data["period"]), *[np.asarray(data[n], dtype=float) for n in CLASSES])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed weight field: {exc}", "schema") from exc

    def tiled(self, width, height) -> np.ndarray:
        """Weights extended periodically over a ``width x height`` grid, shape (4, W, H)."""
        T = self.period
        reps = (1, -(-width // T), -(-height // T))
        return np.tile(self.as_array(), reps)[:, :width, :height]


def load_weights(path) -> WeightField2D:
    with open(path) as fh:
        try:
            return WeightField2D.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON ({exc})", "schema") from exc


def save_weights(wf: WeightField2D, path) -> None:
    with open(path, "w") as fh:
        json.dump(wf.to_dict(), fh, indent=1)


def optimal_t2_weights() -> WeightField2D:
    """The explicit two-valued T=2 weights with octagonal effective anisotropy.

    ``alpha = 1/(4 sqrt 2)``, ``beta = (2 sqrt 2 - 1) alpha``, arranged in
    the alternating pattern where each oriented edge class takes ``beta`` on
    one parity of ``i + j`` and ``alpha`` on the other.
    """
    alpha = 1.0 / (4.0 * np.sqrt(2.0))
    beta = (2.0 * np.sqrt(2.0) - 1.0) * alpha
    i, j = np.meshgrid(np.arange(2), np.arange(2), indexing="ij")
    even = (i + j) % 2 == 0
    fwd = np.where(even, beta, alpha)
    bwd = np.where(even, alpha, beta)
    return WeightField2D(2, fwd, bwd, fwd.copy(), bwd.copy())


# ----------------------------------------------------------------------
# periodic difference operator


def _dx(v):
    return np.roll(v, -1, axis=-2) - v


def _dy(v):
    return np.roll(v, -1, axis=-1) - v


def _dxT(q):
    return np.roll(q, 1, axis=-2) - q


def _dyT(q):
    return np.roll(q, 1, axis=-1) - q


class GridOperator:
    """``v -> K v + b`` for fixed weights and direction (arrays of shape (4, T, T))."""

    def __init__(self, weights: np.ndarray, nu):
        self.c = np.asarray(weights, dtype=float)
        self.sc = self.c * _SIGN[:, None, None]
        nu = np.asarray(nu, dtype=float)
        self.nu = nu
        self.b = self.sc * np.array([nu[0], nu[0], nu[1], nu[1]])[:, None, None]

    @property
    def T(self):
        return self.c.shape[1]

    def apply(self, v):
        gx, gy = _dx(v), _dy(v)
        return self.sc * np.stack([gx, gx, gy, gy])

    def adjoint(self, y):
        y = self.sc * y
        return _dxT(y[0] + y[1]) + _dyT(y[2] + y[3])

    def slopes(self, v):
        """``(D v + nu)`` per class, unweighted."""
        gx, gy = _dx(v) + self.nu[0], _dy(v) + self.nu[1]
        return np.stack([gx, gx, gy, gy])

    def matrix(self):
        T = self.T
        n = T * T
        M = np.zeros((4 * n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            M[:, k] = self.apply(e.reshape(T, T)).reshape(-1)
        return M

    def norm(self, iterations=30, seed=0):
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((self.T, self.T))
        s = 0.0
        for _ in range(iterations):
            v = self.adjoint(self.apply(v))
            s = np.linalg.norm(v)
            if s == 0:
                return 0.0
            v /= s
        return float(np.sqrt(s))


def _huber(a, eps):
    if eps == 0:
        return np.maximum(a, 0.0)
    return np.where(a <= 0, 0.0, np.where(a < eps, a * a / (2 * eps), a - eps / 2))


@dataclass
class SaddleState:
    v: np.ndarray
    w: np.ndarray
    tau: float
    sigma: float
    iterations: int
    gap: float
    eps: float
    nu: np.ndarray
    weights: np.ndarray
    newton_steps: int = 0


def primal_value(op: GridOperator, v, eps) -> float:
    a = op.apply(v) + op.b
    return float(np.sum(_huber(a, eps)) + 0.5 * eps * np.sum(v * v))


def dual_value(op: GridOperator, w, eps, v=None) -> float:
    """Dual objective; for ``eps = 0`` a lower bound using the oscillation of ``v``."""
    kt = op.adjoint(w)
    base = float(np.sum(w * op.b))
    if eps > 0:
        return base - 0.5 * eps * float(np.sum(w * w)) - float(np.sum(kt * kt)) / (2 * eps)
    osc = 0.0 if v is None else float(v.max() - v.min())
    return base - 0.5 * osc * float(np.abs(kt).sum())


def _newton(M, B, eps, V, max_iter=200):
    """Semismooth Newton on the strongly convex primal, batched over rows of B.

    ``M`` is the (P, n) matrix of K, ``B`` (k, P) the offsets and ``V``
    (k, n) starting points.  Returns the minimizers, the step count and the
    largest final gradient norm.
    """
    k, n = V.shape
    eye = np.eye(n)
    MT = M.T

    def objective(V):
        A = V @ MT + B
        return np.sum(_huber(A, eps), axis=1) + 0.5 * eps * np.sum(V * V, axis=1)

    F = objective(V)
    scale = 1.0 + np.abs(B).sum(axis=1)
    gnorm = np.full(k, np.inf)
    steps = 0
    for steps in range(1, max_iter + 1):
        A = V @ MT + B
        W = np.clip(A / eps, 0.0, 1.0)
        G = W @ M + eps * V
        gnorm = np.linalg.norm(G, axis=1)
        done = gnorm <= 1e-13 * scale
        if np.all(done):
            break
        active = ((A > 0) & (A < eps)) / eps
        H = np.matmul(MT[None] * active[:, None, :], M) + eps * eye
        D = -np.linalg.solve(H, G[..., None])[..., 0]
        t = np.where(done, 0.0, 1.0)
        slope = np.sum(G * D, axis=1)
        for _ in range(60):
            Fn = objective(V + t[:, None] * D)
            bad = (Fn > F + 1e-4 * t * slope + 1e-15 * np.abs(F)) & (t > 0)
            if not bad.any():
                break
            t[bad] *= 0.5
        V = V + t[:, None] * D
        Fn = objective(V)
        stalled = np.abs(F - Fn) <= 1e-16 * (1 + np.abs(F))
        F = Fn
        if np.all(done | (stalled & (gnorm <= 1e-9 * scale))):
            break
    return V, steps, float(np.max(gnorm / scale))


def _newton_homotopy(M, B, eps, V=None):
    """Newton solve; a cold start walks down ``eps = 1, 0.1, ...`` first.

    For small ``eps`` the curvature along inactive edges is tiny and a
    Newton step from far away overshoots badly; each coarser solution is a
    start point from which the next finer one converges in a few steps.
    """
    steps = 0
    if V is None:
        V = np.zeros((B.shape[0], M.shape[1]))
        e = 1.0
        while e > eps * (1 + 1e-9):
            V, s, _ = _newton(M, B, e, V)
            steps += s
            e /= 10.0
    V, s, res = _newton(M, B, eps, V)
    if res > 1e-9:
        raise IterativeFailure("Newton iterations did not converge", res, steps + s)
    return V, steps + s


def phi_grid(wf: WeightField2D, nu, eps=0.0, tol=1e-8, max_iter=200_000, polish=True,
             check_every=50, warm: SaddleState | None = None):
    """Value of the grid cell problem by primal-dual iterations.

    ``eps = 0`` gives the exact cell formula; ``eps > 0`` the regularized
    value whose saddle point is unique.  With ``polish`` the ``eps > 0``
    saddle point is refined by semismooth Newton steps on the primal,
    which reaches it to machine precision.  Raises :class:`IterativeFailure`
    when the gap does not fall below ``tol`` within ``max_iter`` iterations.
    """
    from .cell import CellSolution
    from .lattice import SpinField

    if eps < 0:
        raise InputError("eps must be nonnegative")
    if tol <= 0:
        raise InputError("tol must be positive")
    nu = np.asarray(nu, dtype=float).reshape(2)
    T = wf.period
    op = GridOperator(wf.as_array(), nu)
    L = op.norm() * 1.01
    if L == 0:
        L = 1.0
    tau = sigma = 1.0 / L

    if warm is not None:
        v, w = warm.v.copy(), warm.w.copy()
    else:
        v, w = np.zeros((T, T)), np.zeros((4, T, T))
    vbar = v.copy()
    v_sum, w_sum = np.zeros_like(v), np.zeros_like(w)
    gap = np.inf
    it = 0
    best = (np.inf, v, w)

    def measure(v, w):
        P = primal_value(op, v, eps)
        Dv = dual_value(op, w, eps, v)
        return P - Dv

    gap = measure(v, w)
    best = (gap, v.copy(), w.copy())
    while gap > tol and it < max_iter:
        for _ in range(check_every):
            w = np.clip((w + sigma * (op.apply(vbar) + op.b)) / (1 + sigma * eps), 0.0, 1.0)
            v_new = (v - tau * op.adjoint(w)) / (1 + tau * eps)
            vbar = 2 * v_new - v
            v = v_new
            v_sum += v
            w_sum += w
        it += check_every
        for cand_v, cand_w in ((v, w), (v_sum / it, w_sum / it)):
            g = measure(cand_v, cand_w)
            if g < best[0]:
                best = (g, cand_v.copy(), cand_w.copy())
        gap = best[0]
        if eps > 0 and polish and gap < max(1e-3, tol):
            break
    gap, v, w = best

    newton_steps = 0
    if eps > 0 and polish:
        M = op.matrix()
        V, newton_steps = _newton_homotopy(M, op.b.reshape(1, -1), eps, v.reshape(1, -1))
        v = V[0].reshape(T, T)
        w = np.clip((op.apply(v) + op.b) / eps, 0.0, 1.0)
        gap = measure(v, w)
    if gap > tol:
        raise IterativeFailure("primal-dual iterations did not reach the tolerance", gap, it)

    value = primal_value(op, v, eps)
    state = SaddleState(v=v, w=w, tau=tau, sigma=sigma, iterations=it, gap=float(gap), eps=eps,
                        nu=nu, weights=wf.as_array(), newton_steps=newton_steps)
    corr = SpinField(v.reshape(-1), slope=nu)
    return CellSolution(direction=nu, value=value, corrector=corr, dual_flow=None, gauge=0,
                        state=state)


def phi_grid_gradient(state: SaddleState, wf: WeightField2D = None, nu=None) -> np.ndarray:
    """Derivative of the regularized value with respect to every weight.

    Returned with shape ``(4, T, T)`` in the class order ``xp, xm, yp, ym``:
    ``d phi / d c_k = s_k * w_k * (D v + nu)_k`` with ``s = (+1, -1, +1, -1)``.
    """
    if state.eps <= 0:
        raise InputError("the gradient needs a solve with eps > 0", "contract")
    weights = state.weights if wf is None else wf.as_array()
    nu = state.nu if nu is None else np.asarray(nu, dtype=float)
    op = GridOperator(weights, nu)
    return _SIGN[:, None, None] * state.w * op.slopes(state.v)


def phi_grid_batch(wf: WeightField2D, directions, eps, warm=None):
    """Regularized values and gradients for many directions at once (Newton only).

    Returns ``(values (k,), gradients (k, 4, T, T), correctors (k, T*T))``.
    """
    if eps <= 0:
        raise InputError("batched solves need eps > 0")
    directions = np.asarray(directions, dtype=float)
    T = wf.period
    c = wf.as_array()
    op0 = GridOperator(c, (0.0, 0.0))
    M = op0.matrix()
    B = np.stack([GridOperator(c, nu).b.reshape(-1) for nu in directions])
    V, _ = _newton_homotopy(M, B, eps, warm)
    A = V @ M.T + B
    W = np.clip(A / eps, 0.0, 1.0)
    values = np.sum(_huber(A, eps), axis=1) + 0.5 * eps * np.sum(V * V, axis=1)
    grads = np.empty((len(directions), 4, T, T))
    for k, nu in enumerate(directions):
        op = GridOperator(c, nu)
        grads[k] = _SIGN[:, None, None] * W[k].reshape(4, T, T) * op.slopes(V[k].reshape(T, T))
    return values, grads, V
