"""Weighted graph total variation on images: ROF denoising and half-plane inpainting.

Pixels are indexed ``[i, j]`` with ``i`` horizontal (left to right) and
``j`` vertical (bottom to top).  A weight field of period ``T`` is repeated
over the image; only differences between two pixels of the image enter::

    J(u) = sum xp (u[i+1,j] - u[i,j])^+ + xm (u[i,j] - u[i+1,j])^+
         + yp (u[i,j+1] - u[i,j])^+ + ym (u[i,j] - u[i,j+1])^+

Each pair of terms is ``max_{-c^- <= q <= c^+} q d`` for the difference
``d``, which gives the box-constrained dual used by the primal-dual solvers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, IterativeFailure
from .saddle import WeightField2D


@dataclass
class GridImage:
    values: np.ndarray  # shape (W, H)
    mask: np.ndarray | None = None  # True where the pixel is free

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InputError("image values must be a 2D array", "shape")
        if not np.all(np.isfinite(self.values)):
            raise InputError("image has non-finite values", "nan-value")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise InputError("mask and image shapes differ", "shape")

    @property
    def width(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]


@dataclass
class Quadratic:
    f: np.ndarray
    mu: float


@dataclass
class FixedBoundary:
    free: np.ndarray  # boolean, True where u is unknown
    values: np.ndarray  # prescribed values (used where ``free`` is False)


@dataclass
class TVProblem:
    weights: WeightField2D
    data: object = None  # None, Quadratic or FixedBoundary

    def tiled(self, shape) -> np.ndarray:
        return self.weights.tiled(*shape)


# ----------------------------------------------------------------------
# difference operator with edges inside the grid only


def _grad(u):
    return u[1:, :] - u[:-1, :], u[:, 1:] - u[:, :-1]


def _grad_T(qx, qy):
    out = np.zeros((qx.shape[0] + 1, qx.shape[1]))
    out[1:, :] += qx
    out[:-1, :] -= qx
    out[:, 1:] += qy
    out[:, :-1] -= qy
    return out


def _boxes(c):
    """Dual boxes ``[lo, hi]`` for the horizontal and vertical differences."""
    xp, xm, yp, ym = c
    return (-xm[:-1, :], xp[:-1, :]), (-ym[:, :-1], yp[:, :-1])


def _tv(c, u) -> float:
    dx, dy = _grad(u)
    xp, xm, yp, ym = c
    return float(np.sum(xp[:-1, :] * np.maximum(dx, 0) + xm[:-1, :] * np.maximum(-dx, 0))
                 + np.sum(yp[:, :-1] * np.maximum(dy, 0) + ym[:, :-1] * np.maximum(-dy, 0)))


def _values(u):
    return u.values if isinstance(u, GridImage) else np.asarray(u, dtype=float)


def tv_energy(p: TVProblem, u) -> float:
    """Exact weighted total variation of ``u``."""
    u = _values(u)
    if u.ndim != 2:
        raise InputError("image must be 2D", "shape")
    return _tv(p.tiled(u.shape), u)


def rof_objective(p: TVProblem, u) -> float:
    if not isinstance(p.data, Quadratic):
        raise InputError("the problem has no quadratic data term")
    u = _values(u)
    return tv_energy(p, u) + 0.5 * p.data.mu * float(np.sum((u - p.data.f) ** 2))


def default_mu(f) -> float:
    """Demo fidelity weight ``8 / range^2``."""
    f = np.asarray(f, dtype=float)
    rng = float(f.max() - f.min())
    return 8.0 / (rng * rng) if rng > 0 else 8.0


# ----------------------------------------------------------------------
# ROF


@dataclass
class SolveReport:
    iterations: int = 0
    gap: float = math.inf
    history: list = field(default_factory=list)  # (iteration, objective, gap)


def rof_denoise(p: TVProblem, tol=1e-6, max_iter=100_000, check_every=10):
    """Minimize ``J(u) + mu/2 |u - f|^2``.

    Accelerated projected gradient on the dual box problem
    ``max_q <D^T q, f> - |D^T q|^2 / (2 mu)`` with momentum restarts; the
    primal point is ``u = f - D^T q / mu``.  The returned field is the best
    primal candidate seen, so the objectives in ``report.history`` never
    increase, and the reported gap is between that field and the best dual
    value.
    """
    if not isinstance(p.data, Quadratic):
        raise InputError("rof_denoise needs a quadratic data term")
    f = np.asarray(p.data.f, dtype=float)
    mu = float(p.data.mu)
    if not mu > 0:
        raise InputError("mu must be positive")
    c = p.tiled(f.shape)
    (lx, hx), (ly, hy) = _boxes(c)
    lip = 8.0 / mu  # |D|^2 <= 8

    def primal(u):
        return _tv(c, u) + 0.5 * mu * float(np.sum((u - f) ** 2))

    def dual(qx, qy):
        s = _grad_T(qx, qy)
        return float(np.sum(s * f) - np.sum(s * s) / (2 * mu))

    qx = np.zeros_like(lx)
    qy = np.zeros_like(ly)
    px, py = qx.copy(), qy.copy()
    t = 1.0
    best_u, best_p = f.copy(), primal(f)
    best_d = dual(qx, qy)
    rep = SolveReport(history=[(0, best_p, best_p - best_d)])
    it = 0
    while it < max_iter:
        for _ in range(check_every):
            gx, gy = _grad(f - _grad_T(px, py) / mu)
            nx = np.clip(px + gx / lip, lx, hx)
            ny = np.clip(py + gy / lip, ly, hy)
            if np.sum((px - nx) * (nx - qx)) + np.sum((py - ny) * (ny - qy)) > 0:
                t = 1.0  # momentum points uphill: restart
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            px, py = nx + beta * (nx - qx), ny + beta * (ny - qy)
            qx, qy, t = nx, ny, t_new
        it += check_every
        u = f - _grad_T(qx, qy) / mu
        pv = primal(u)
        if pv < best_p:
            best_u, best_p = u, pv
        best_d = max(best_d, dual(qx, qy))
        gap = best_p - best_d
        rep.history.append((it, best_p, gap))
        if gap <= tol:
            break
    rep.iterations = it
    rep.gap = best_p - best_d
    if rep.gap > tol:
        raise IterativeFailure("ROF iterations did not reach the tolerance", rep.gap, it)
    return GridImage(best_u), rep


def gaussian_noise(f, sigma_fraction=0.1, seed=0):
    """``f`` plus Gaussian noise with standard deviation a fraction of its range."""
    f = np.asarray(f, dtype=float)
    rng = np.random.default_rng(seed)
    return f + sigma_fraction * float(f.max() - f.min()) * rng.standard_normal(f.shape)


# ----------------------------------------------------------------------
# inpainting


def halfplane_image(shape, nu, center=None) -> np.ndarray:
    """Indicator of ``<nu, x - center> >= 0`` on the pixel grid."""
    W, H = shape
    if center is None:
        center = ((W - 1) / 2.0, (H - 1) / 2.0)
    x, y = np.meshgrid(np.arange(W, dtype=float), np.arange(H, dtype=float), indexing="ij")
    s = nu[0] * (x - center[0]) + nu[1] * (y - center[1])
    return (s >= 0).astype(float)


def box_mask(shape, box) -> np.ndarray:
    """Free pixels ``x0 <= i < x1``, ``y0 <= j < y1``."""
    x0, y0, x1, y1 = box
    W, H = shape
    if not (0 < x0 <= x1 < W and 0 < y0 <= y1 < H):
        raise InputError(f"box {box} must lie strictly inside the {W}x{H} image", "box")
    free = np.zeros(shape, dtype=bool)
    free[x0:x1, y0:y1] = True
    return free


def tv_fixed_boundary(p: TVProblem, tol=1e-4, max_iter=200_000, check_every=50):
    """Minimize ``J`` over the free pixels with the others held fixed.

    The fixed values are assumed to lie in ``[0, 1]``; by truncation the
    free values can then be restricted to ``[0, 1]`` as well, which makes
    the dual function finite and gives a computable gap.  Stops when the
    gap is below ``tol * max(1, J)``.
    """
    if not isinstance(p.data, FixedBoundary):
        raise InputError("needs a fixed-boundary data term")
    free = np.asarray(p.data.free, dtype=bool)
    g = np.asarray(p.data.values, dtype=float)
    shape = g.shape
    rep = SolveReport()
    if not free.any():
        rep.gap = 0.0
        return g.copy(), rep
    fixed_vals = np.where(free, 0.0, g)
    c = p.tiled(shape)
    (lx, hx), (ly, hy) = _boxes(c)
    tau = sigma = 1.0 / math.sqrt(8.0) / 1.01

    u = np.where(free, 0.5, g)
    ubar = u.copy()
    qx = np.zeros_like(lx)
    qy = np.zeros_like(ly)
    u_sum = np.zeros_like(u)
    qx_sum, qy_sum = np.zeros_like(qx), np.zeros_like(qy)

    def dual(qx, qy):
        s = _grad_T(qx, qy)
        # min over free u in [0,1] of <s, u> plus the fixed contribution
        return float(np.sum(s * fixed_vals) + np.sum(np.minimum(s[free], 0.0)))

    best_p, best_u = _tv(c, u), u.copy()
    best_d = -math.inf
    it = 0
    gap = math.inf
    while it < max_iter:
        for _ in range(check_every):
            dx, dy = _grad(ubar)
            qx = np.clip(qx + sigma * dx, lx, hx)
            qy = np.clip(qy + sigma * dy, ly, hy)
            u_new = np.where(free, np.clip(u - tau * _grad_T(qx, qy), 0.0, 1.0), g)
            ubar = 2 * u_new - u
            u = u_new
            u_sum += u
            qx_sum += qx
            qy_sum += qy
        it += check_every
        for cand in (u, u_sum / it):
            pv = _tv(c, cand)
            if pv < best_p:
                best_p, best_u = pv, cand.copy()
        best_d = max(best_d, dual(qx, qy), dual(qx_sum / it, qy_sum / it))
        gap = best_p - best_d
        rep.history.append((it, best_p, gap))
        if gap <= tol * max(1.0, best_p):
            break
    rep.iterations = it
    rep.gap = gap
    if gap > tol * max(1.0, best_p):
        raise IterativeFailure("fixed-boundary TV iterations did not reach the tolerance", gap, it)
    return best_u, rep


def threshold(u, level=0.5) -> np.ndarray:
    """Binary image; values exactly at ``level`` map to 1."""
    return (np.asarray(u) >= level).astype(float)


@dataclass
class InpaintResult:
    relaxed: GridImage
    binary: GridImage
    report: SolveReport
    nu: np.ndarray
    box: tuple


def inpaint_halfplane(weights: WeightField2D, nu, box, size=(256, 256), tol=1e-4,
                      max_iter=200_000) -> InpaintResult:
    """Minimal ``J`` completion of the half-plane indicator inside ``box``."""
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (2,) or not np.all(np.isfinite(nu)) or not np.any(nu):
        raise InputError("nu must be a finite nonzero 2-vector")
    nu = nu / np.linalg.norm(nu)
    shape = tuple(int(s) for s in size)
    g = halfplane_image(shape, nu)
    free = box_mask(shape, box)
    p = TVProblem(weights, FixedBoundary(free, g))
    u, rep = tv_fixed_boundary(p, tol=tol, max_iter=max_iter)
    return InpaintResult(GridImage(u, free), GridImage(threshold(u), free), rep, nu, tuple(box))


def interface_points(b, region=None) -> np.ndarray:
    """Midpoints between neighbouring pixels with different binary values."""
    b = np.asarray(b)
    pts = []
    dx = b[1:, :] != b[:-1, :]
    dy = b[:, 1:] != b[:, :-1]
    if region is not None:
        dx &= region[1:, :] & region[:-1, :]
        dy &= region[:, 1:] & region[:, :-1]
    i, j = np.nonzero(dx)
    pts.append(np.column_stack([i + 0.5, j]))
    i, j = np.nonzero(dy)
    pts.append(np.column_stack([i, j + 0.5]))
    return np.concatenate(pts).astype(float)


def fit_orientation(points):
    """Least-squares line through ``points``: returns (unit normal, angle of the normal in degrees)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        raise InputError("need at least two interface points")
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    return normal, math.degrees(math.atan2(normal[1], normal[0]))


def orientation_error(normal, nu) -> float:
    """Angle in degrees between two lines given by their normals."""
    normal = np.asarray(normal, dtype=float) / np.linalg.norm(normal)
    nu = np.asarray(nu, dtype=float) / np.linalg.norm(nu)
    cosang = min(1.0, abs(float(normal @ nu)))
    return math.degrees(math.acos(cosang))


# ----------------------------------------------------------------------
# file formats


def read_pgm(path) -> GridImage:
    """Plain (P2) PGM; values are scaled to ``[0, 1]``."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise InputError(f"{path}: only plain P2 PGM files are supported", "format")
    try:
        W, H, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        data = np.array([int(t) for t in tokens[4:4 + W * H]], dtype=float)
    except (IndexError, ValueError) as exc:
        raise InputError(f"{path}: malformed PGM header or data", "format") from exc
    if data.size != W * H or maxval <= 0:
        raise InputError(f"{path}: expected {W * H} samples", "format")
    rows = data.reshape(H, W)  # first row is the top of the image
    return GridImage(rows[::-1].T / maxval)


def write_pgm(path, u, maxval=255) -> None:
    """Plain PGM of ``u`` (clipped to ``[0, 1]``), top row first."""
    u = np.clip(_values(u), 0.0, 1.0)
    rows = np.rint(u.T[::-1] * maxval).astype(int)
    H, W = rows.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{W} {H}\n{maxval}\n")
        for r in rows:
            fh.write(" ".join(str(v) for v in r) + "\n")


def write_csv(path, u) -> None:
    u = _values(u)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in u.T[::-1]:
            w.writerow([repr(float(v)) for v in r])


def read_csv(path) -> GridImage:
    with open(path) as fh:
        rows = [[float(x) for x in r] for r in csv.reader(fh) if r]
    arr = np.array(rows, dtype=float)
    return GridImage(arr[::-1].T)


def step_image(shape, low=0.0, high=1.0) -> np.ndarray:
    """Left half ``low``, right half ``high``."""
    W, H = shape
    u = np.full(shape, low, dtype=float)
    u[W // 2:, :] = high
    return u
