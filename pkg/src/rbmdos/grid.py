"""Quadrature grids, weight fields and the banded Gaussian kernel.

Also hosts the Gaussian model operator and its Hermite-type basis, which
serve as a closed-form test oracle for the discretised kernel operators.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from . import landscape as ls

KERNEL_RADIUS = 7.0  # in units of 1/W
KERNEL_TAIL = 3e-11  # e^{-7^2/2} (2 pi)^{-1/2} * 7 bounds the dropped mass
DEFAULT_REFINE = 6.0
DEFAULT_CUTOFF = 36.0
QUICK_REFINE = 4.0
QUICK_CUTOFF = 30.0
DEFAULT_NODE_BUDGET = 20000
MARGIN = 2.0


class GridBudgetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Axis:
    nodes: np.ndarray
    weights: np.ndarray
    h_max: float
    order: int

    @property
    def size(self):
        return self.nodes.size

    @property
    def lo(self):
        return float(self.nodes[0])

    @property
    def hi(self):
        return float(self.nodes[-1])

    def integrate(self, values, axis=-1):
        return np.tensordot(values, self.weights, axes=([axis], [0]))


def _panel_gap_ratio(order):
    t, _ = np.polynomial.legendre.leggauss(order)
    inner = np.max(np.diff(t)) if order > 1 else 0.0
    edge = 2 * (1 - t[-1])
    return max(inner, edge) / 2


def gl_axis(lo, hi, h, order=8):
    """Composite Gauss-Legendre rule on [lo, hi] with max node gap <= h."""
    if not hi > lo:
        raise ValueError("empty interval")
    panel = h / _panel_gap_ratio(order)
    npan = max(1, int(math.ceil((hi - lo) / panel)))
    panel = (hi - lo) / npan
    t, w = np.polynomial.legendre.leggauss(order)
    start = lo + panel * np.arange(npan)[:, None]
    nodes = (start + panel * (t + 1) / 2).ravel()
    weights = np.tile(w * panel / 2, npan)
    gaps = np.diff(nodes)
    return Axis(nodes=nodes, weights=weights, h_max=float(gaps.max()) if gaps.size else 0.0,
                order=order)


def _level_crossings(fun, center, level):
    """Outermost points left/right of ``center`` where ``fun`` reaches ``level``."""
    out = []
    for sign in (-1.0, 1.0):
        step = 1.0
        x = center + sign * step
        while fun(x) < level:
            step *= 2
            x = center + sign * step
        out.append(brentq(lambda y: fun(y) - level, center + sign * step / 2 if step > 1 else center, x))
    return min(out), max(out)


def axis_range(kind, E, cutoff):
    """Interval holding every real x with Re f(x) <= cutoff, plus the margin."""
    if kind == "a":
        fun = lambda x: float(np.real(ls.eval_fa(x, E)))  # noqa: E731
    else:
        fun = lambda x: float(np.real(ls.eval_fb(x, E)))  # noqa: E731
    lo, hi = _level_crossings(fun, 0.0, cutoff)
    return lo - MARGIN, hi + MARGIN


def blur_matrix(axis, W):
    """Sparse banded matrix of the quadrature-weighted Gaussian kernel.

    ``(M @ u)[i] = sum_j w_j B(x_i, x_j) u_j`` with
    ``B(x, y) = W (2 pi)^{-1/2} exp(-W^2 (x - y)^2 / 2)`` cut at
    ``|x - y| <= 7 / W``.
    """
    x, w = axis.nodes, axis.weights
    r = KERNEL_RADIUS / W
    left = np.searchsorted(x, x - r, side="left")
    right = np.searchsorted(x, x + r, side="right")
    counts = right - left
    rows = np.repeat(np.arange(x.size), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    cols = np.repeat(left, counts) + offs
    vals = W / np.sqrt(2 * np.pi) * np.exp(-0.5 * (W * (x[rows] - x[cols])) ** 2) * w[cols]
    return sp.csr_matrix((vals, (rows, cols)), shape=(x.size, x.size))


def blur(field_values, axis, W, matrix=None):
    M = blur_matrix(axis, W) if matrix is None else matrix
    return M @ np.asarray(field_values)


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Product quadrature grid over (a, b) with the weight fields of the transfer operator."""

    E: float
    W: float
    refine: float
    cutoff: float
    axis_a: Axis
    axis_b: Axis
    F0: np.ndarray
    F1: np.ndarray
    g_a: np.ndarray
    h_b: np.ndarray
    dfield: np.ndarray
    blur_a: sp.csr_matrix = field(repr=False)
    blur_b: sp.csr_matrix = field(repr=False)
    A_a: sp.csr_matrix = field(repr=False)
    A_b: sp.csr_matrix = field(repr=False)
    fingerprint: str = ""

    @property
    def shape(self):
        return self.axis_a.size, self.axis_b.size

    @property
    def F(self):
        return np.outer(self.F0, self.F1)

    @property
    def Lfield(self):
        return 1.0 - np.outer(self.g_a, self.h_b)

    @property
    def weights(self):
        return np.outer(self.axis_a.weights, self.axis_b.weights)

    def describe(self):
        return {"Na": self.axis_a.size, "Nb": self.axis_b.size,
                "a_range": [self.axis_a.lo, self.axis_a.hi],
                "b_range": [self.axis_b.lo, self.axis_b.hi],
                "h_a": self.axis_a.h_max, "h_b": self.axis_b.h_max,
                "order": self.axis_a.order, "nu": self.refine, "phi": self.cutoff,
                "fingerprint": self.fingerprint}


def _fingerprint(*arrays, extra=""):
    h = hashlib.sha256(extra.encode())
    for arr in arrays:
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def weighted_kernel_operator(M, weight):
    """diag(weight) @ M @ diag(weight) as a sparse matrix."""
    D = sp.diags(weight)
    return (D @ M @ D).tocsr()


def build_grid(E, W, refine=DEFAULT_REFINE, cutoff=DEFAULT_CUTOFF, order=8,
               node_budget=DEFAULT_NODE_BUDGET):
    """Build the (a, b) quadrature grid for energy ``E`` and band width ``W``.

    Each axis covers the sublevel set ``Re f <= cutoff`` plus a margin of 2
    and uses composite Gauss-Legendre panels whose largest node gap is at
    most ``min(0.05, 1 / (refine * W))``.
    """
    E = ls._check_energy(E)
    if refine < 4:
        raise ValueError("refine must be >= 4")
    if cutoff < 30:
        raise ValueError("cutoff must be >= 30")
    h = min(0.05, 1.0 / (refine * W))
    ranges = {k: axis_range(k, E, cutoff) for k in ("a", "b")}
    panel = h / _panel_gap_ratio(order)
    sizes = {k: order * int(math.ceil((hi - lo) / panel)) for k, (lo, hi) in ranges.items()}
    if max(sizes.values()) > node_budget:
        raise GridBudgetError(
            f"grid needs {sizes['a']} x {sizes['b']} nodes (h={h:.3g}), over the "
            f"per-axis budget {node_budget}")
    ax_a = gl_axis(*ranges["a"], h, order)
    ax_b = gl_axis(*ranges["b"], h, order)
    F0 = np.exp(-ls.eval_fa(ax_a.nodes, E) / 2)
    F1 = np.exp(-ls.eval_fb(ax_b.nodes, E) / 2)
    blur_a = blur_matrix(ax_a, W)
    blur_b = blur_matrix(ax_b, W)
    fp = _fingerprint(ax_a.nodes, ax_a.weights, ax_b.nodes, ax_b.weights,
                      extra=f"{E!r}|{W!r}|{refine!r}|{cutoff!r}|{order}")
    return Grid2D(
        E=E, W=float(W), refine=float(refine), cutoff=float(cutoff),
        axis_a=ax_a, axis_b=ax_b, F0=F0, F1=F1,
        g_a=ls.g_factor(ax_a.nodes, E), h_b=ls.h_factor(ax_b.nodes, E),
        dfield=ax_b.nodes + 0.5j * np.sqrt(4 - E * E),
        blur_a=blur_a, blur_b=blur_b,
        A_a=(sp.diags(F0) @ blur_a @ sp.diags(F0)).tocsr(),
        A_b=(sp.diags(F1) @ blur_b @ sp.diags(F1)).tocsr(),
        fingerprint=fp,
    )


def quick_grid(E, W, **kw):
    return build_grid(E, W, refine=QUICK_REFINE, cutoff=QUICK_CUTOFF, **kw)


# -- Gaussian model operator --------------------------------------------------

def model_alpha(c_star, W):
    return np.sqrt(c_star / 2) * np.sqrt(1 + c_star / (2 * W * W))


def model_lambda0(c_star, W):
    return (1 + 2 * model_alpha(c_star, W) / W + c_star / W**2) ** -0.5


def model_basis(k, c_star, W, x):
    """Hermite-type function psi_k at points ``x``.

    ``psi_k = h_k^{-1/2} beta^{k/2} H_k(sqrt(beta) x) exp(-alpha W x^2)`` with
    ``beta = 2 Re(alpha) W`` and ``h_k = k! (2 beta)^{k - 1/2} sqrt(2 pi)``;
    orthonormal under the Hermitian product for every ``c_star``.
    """
    if not np.real(c_star) > 0:
        raise ValueError("need Re c_star > 0")
    alpha = complex(model_alpha(c_star, W))
    beta = 2 * alpha.real * W
    x = np.asarray(x, dtype=float)
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    Hk = np.polynomial.hermite.hermval(np.sqrt(beta) * x, coef)
    log_norm = -0.5 * (math.lgamma(k + 1) + (k - 0.5) * math.log(2 * beta)
                       + 0.5 * math.log(2 * math.pi)) + 0.5 * k * math.log(beta)
    return math.exp(log_norm) * Hk * np.exp(-alpha * W * x * x)


def model_axis(c_star, W, m):
    alpha1 = float(np.real(model_alpha(c_star, W)))
    R = (math.sqrt(2 * m + 1) + 10.0) / math.sqrt(2 * alpha1 * W) + KERNEL_RADIUS / W
    return gl_axis(-R, R, 1.0 / (8 * W), order=8)


def apply_model_operator(u, c_star, W, axis, matrix=None):
    """Discretised A_* u with kernel exp(-c x^2/2) B(x, y) exp(-c y^2/2)."""
    Fs = np.exp(-c_star * axis.nodes**2 / 2)
    M = blur_matrix(axis, W) if matrix is None else matrix
    return Fs * (M @ (Fs * u))


def model_operator_sparse(c_star, W, axis):
    """Nystrom matrix of A_* on ``axis`` (quadrature weights in the columns)."""
    Fs = sp.diags(np.exp(-c_star * axis.nodes**2 / 2))
    return (Fs @ blur_matrix(axis, W) @ Fs).tocsr()


@dataclass(frozen=True, eq=False)
class ModelOpMatrix:
    entries: np.ndarray
    c_star: complex
    W: float
    m: int


def model_operator_matrix(c_star, W, m, axis=None):
    """Matrix (A_* psi_k, psi_j) for j, k <= m, Hermitian pairing in the second slot."""
    if m > 12:
        raise ValueError("model basis is limited to m <= 12")
    if not np.real(c_star) > 0:
        raise ValueError("need Re c_star > 0")
    axis = model_axis(c_star, W, m) if axis is None else axis
    M = blur_matrix(axis, W)
    psi = np.array([model_basis(k, c_star, W, axis.nodes) for k in range(m + 1)])
    Apsi = np.array([apply_model_operator(p, c_star, W, axis, M) for p in psi])
    entries = (np.conj(psi) * axis.weights) @ Apsi.T
    return ModelOpMatrix(entries=entries, c_star=complex(c_star), W=float(W), m=m)
