"""Transfer-operator evaluation of the averaged Stieltjes transform.

The operator acts on two-component fields over the (a, b) grid as
``T = K S``: a pointwise 2x2 mixing ``S`` built from ``L(a, b)`` followed by
the separable kernel operator ``K = A ⊗ A1`` on each component. With the
bilinear quadrature pairing ``<u, v> = sum_c sum_ij w_i w_j u_c v_c``:

    Z   = -(W / 2 pi) <T^{n-1} s0, ell>
    g_n = -(W / 2 pi n) sum_j <T^j D T^{n-1-j} s0, ell>

where ``s0 = F e2``, ``ell = F (1, -L/W)`` and ``D`` multiplies by
``b + i sqrt(4 - E^2)/2``. Z equals one identically in the continuum.

States are stored in separable factored form (see :mod:`rbmdos.factored`),
which keeps every operator application at O(N r) cost.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .factored import LowRankField, combine
from .landscape import semicircle

# Sign of the final pairing. Fixed once against the n = 1 field integral,
# which must equal +1; asserted by ``check_sign_calibration``.
ELL_SIGN = -1.0
RANK_TOL = 1e-14


class MemoryBudgetError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TransferState:
    """Two-component field ``exp(log_scale) * (comp1, comp2)`` on a grid."""

    comp1: LowRankField
    comp2: LowRankField
    grid: object = field(repr=False)
    log_scale: float = 0.0

    @property
    def components(self):
        return (self.comp1, self.comp2)

    @property
    def rank(self):
        return max(self.comp1.rank, self.comp2.rank)

    @property
    def nbytes(self):
        return self.comp1.nbytes + self.comp2.nbytes

    def to_dense(self):
        s = math.exp(self.log_scale)
        na, nb = self.grid.shape
        out = np.zeros((2, na, nb), complex)
        for c, f in enumerate(self.components):
            if f.rank:
                out[c] = s * f.dense()
        return out

    @classmethod
    def from_dense(cls, grid, fields, tol=0.0):
        wa, wb = grid.axis_a.weights, grid.axis_b.weights
        return cls(LowRankField.from_dense(fields[0], wa, wb, tol),
                   LowRankField.from_dense(fields[1], wa, wb, tol), grid)

    def scaled(self, c):
        return TransferState(self.comp1.scaled(c), self.comp2.scaled(c), self.grid,
                             self.log_scale)

    def finite(self):
        return all(np.all(np.isfinite(f.P)) and np.all(np.isfinite(f.Q)) for f in self.components)


def _sqrt_weights(grid):
    return np.sqrt(grid.axis_a.weights), np.sqrt(grid.axis_b.weights)


def _zero(grid):
    return LowRankField.zeros(*grid.shape)


def _or_zero(f, grid):
    return _zero(grid) if f is None else f


def compress(s, rank_tol=RANK_TOL):
    """Recompress both components at a threshold relative to the larger one."""
    sa, sb = _sqrt_weights(s.grid)
    parts = [f.svd_parts(sa, sb) if f.rank else None for f in s.components]
    smax = max([p[1][0] for p in parts if p is not None and p[1].size] or [0.0])
    if smax == 0.0:
        return s
    out = [f if p is None else LowRankField.from_svd(p, sa, sb, rank_tol * smax)
           for f, p in zip(s.components, parts)]
    return TransferState(out[0], out[1], s.grid, s.log_scale)


def apply_S(s, sign=1, rank_tol=RANK_TOL):
    """Pointwise 2x2 mixing by S (``sign=+1``) or by its transpose (``sign=-1``).

    ``S = [[1, -L/W], [-1/W, 1 + L/W^2]]`` with ``L = 1 - g(a) h(b)``
    evaluated at every grid point.
    """
    g = s.grid
    W = g.W
    u1, u2 = s.comp1, s.comp2
    if sign == 1:
        # c1 = u1 - L u2 / W,  c2 = -u1 / W + (1 + L/W^2) u2
        gh2 = u2.mul_a(g.g_a).mul_b(g.h_b)
        c1 = combine([(1.0, u1), (-1.0 / W, u2), (1.0 / W, gh2)])
        c2 = combine([(-1.0 / W, u1), (1.0 + 1.0 / W**2, u2), (-1.0 / W**2, gh2)])
    elif sign == -1:
        # c1 = u1 - u2 / W,  c2 = -L u1 / W + (1 + L/W^2) u2
        gh1 = u1.mul_a(g.g_a).mul_b(g.h_b)
        gh2 = u2.mul_a(g.g_a).mul_b(g.h_b)
        c1 = combine([(1.0, u1), (-1.0 / W, u2)])
        c2 = combine([(-1.0 / W, u1), (1.0 / W, gh1), (1.0 + 1.0 / W**2, u2),
                      (-1.0 / W**2, gh2)])
    else:
        raise ValueError("sign must be +1 or -1")
    out = TransferState(_or_zero(c1, g), _or_zero(c2, g), g, s.log_scale)
    return compress(out, rank_tol) if rank_tol is not None else out


def apply_K(s):
    """Separable kernel operator ``F B F`` along a, then along b, on each component."""
    g = s.grid
    return TransferState(s.comp1.apply(g.A_a, g.A_b), s.comp2.apply(g.A_a, g.A_b), g,
                         s.log_scale)


def apply_transfer(s, rank_tol=RANK_TOL):
    return apply_K(apply_S(s, 1, rank_tol))


def apply_transfer_T(s, rank_tol=RANK_TOL):
    return apply_S(apply_K(s), -1, rank_tol)


def pairing(s, t):
    """Bilinear quadrature pairing of two states, scales included."""
    g = s.grid
    wa, wb = g.axis_a.weights, g.axis_b.weights
    raw = s.comp1.pair(t.comp1, wa, wb) + s.comp2.pair(t.comp2, wa, wb)
    return raw * math.exp(s.log_scale + t.log_scale)


def state_norm(s):
    wa, wb = s.grid.axis_a.weights, s.grid.axis_b.weights
    return math.hypot(s.comp1.norm(wa, wb), s.comp2.norm(wa, wb))


def renormalize(s):
    nrm = state_norm(s)
    if nrm == 0.0:
        return s
    return TransferState(s.comp1.scaled(1 / nrm), s.comp2.scaled(1 / nrm), s.grid,
                         s.log_scale + math.log(nrm))


def initial_state(grid):
    """``s0 = F e2``."""
    return TransferState(_zero(grid), LowRankField.outer(grid.F0, grid.F1), grid)


def ell_state(grid):
    """``F e_L = F (1, -L/W)`` with L taken pointwise."""
    W = grid.W
    F = LowRankField.outer(grid.F0, grid.F1)
    FL = combine([(1.0, F), (-1.0, F.mul_a(grid.g_a).mul_b(grid.h_b))])
    return TransferState(F, FL.scaled(-1.0 / W), grid)


def D_state(s, centered=True):
    """Multiply both components by ``b - E/2`` (centred) or ``b + i sqrt(4-E^2)/2``."""
    g = s.grid
    d = g.dfield - semicircle(g.E) if centered else g.dfield
    return TransferState(s.comp1.mul_b(d), s.comp2.mul_b(d), g, s.log_scale)


def prefactor(W, ell_sign=ELL_SIGN):
    return ell_sign * W / (2 * math.pi)


def _check_grid(p, grid):
    if grid.E != float(p.E) or grid.W != float(p.W):
        raise ValueError(f"grid built for (E={grid.E}, W={grid.W}) used with "
                         f"(E={p.E}, W={p.W})")


def normalization_curve(grid, ns, renorm=True, ell_sign=ELL_SIGN, rank_tol=RANK_TOL):
    """Z(n) for each n in ``ns`` from one forward sweep."""
    assert_calibrated()
    return _z_curve(grid, ns, renorm, ell_sign, rank_tol)


def _z_curve(grid, ns, renorm=True, ell_sign=ELL_SIGN, rank_tol=RANK_TOL):
    ns = sorted(set(int(n) for n in ns))
    if ns[0] < 1:
        raise ValueError("n must be >= 1")
    ell = ell_state(grid)
    s = initial_state(grid)
    c = prefactor(grid.W, ell_sign)
    out = {}
    for k in range(ns[-1]):
        if k + 1 in ns:
            out[k + 1] = c * pairing(s, ell)
        if k + 1 < ns[-1]:
            s = apply_transfer(s, rank_tol)
            if renorm:
                s = renormalize(s)
    return out


def normalization(p, grid, ell_sign=ELL_SIGN, renorm=True):
    """Z = -(W/2 pi) <T^{n-1} s0, ell>; equals 1 up to quadrature error."""
    _check_grid(p, grid)
    return normalization_curve(grid, [p.n], renorm, ell_sign)[p.n]


def check_sign_calibration(grid, tol=1e-6, ell_sign=ELL_SIGN):
    """Assert the pairing sign gives Z(n=1) = +1 against the direct field integral."""
    from .oracle import field_integral

    z_oracle = field_integral(1, grid, grid.E, grid.W).value_Z
    z_transfer = _z_curve(grid, [1], ell_sign=ell_sign)[1]
    if abs(z_oracle - 1) > tol or abs(z_transfer - z_oracle) > tol:
        raise AssertionError(f"sign calibration failed: oracle {z_oracle}, transfer {z_transfer}")
    return z_transfer


@functools.lru_cache(maxsize=1)
def assert_calibrated():
    """One-time check of ``ELL_SIGN`` on a small reference grid."""
    from .grid import quick_grid

    return check_sign_calibration(quick_grid(1.0, 4.0))


@dataclass(frozen=True)
class DosResult:
    E: float
    W: float
    n: int
    g_n: complex
    Z: complex
    g_n_normalized: complex
    g_centered: complex
    g_sc: complex
    grid: dict
    max_rank: int = 0
    checkpoints: int = 0

    @property
    def abs_err(self):
        return abs(self.g_n_normalized - self.g_sc)


def state_bytes_estimate(grid, rank):
    na, nb = grid.shape
    return 2 * rank * (na + nb) * 16


def dos(p, grid, mem_budget=1 << 30, renorm=True, ell_sign=ELL_SIGN, rank_tol=RANK_TOL,
        stride=None):
    """Averaged Stieltjes transform by a checkpointed two-sweep evaluation.

    Forward states ``T^k s0`` are kept every ``stride = ceil(sqrt(n))``
    steps; during the transposed sweep each block is recomputed from its
    checkpoint and consumed in reverse.
    """
    _check_grid(p, grid)
    assert_calibrated()
    n = p.n
    stride = stride or max(1, math.isqrt(n - 1) + 1) if n > 1 else 1
    c = prefactor(grid.W, ell_sign)
    g_sc = semicircle(grid.E)

    checkpoints = {}
    s = initial_state(grid)
    max_rank = s.rank
    for k in range(n):
        if k % stride == 0:
            checkpoints[k] = s
        if k < n - 1:
            s = apply_transfer(s, rank_tol)
            if renorm:
                s = renormalize(s)
            max_rank = max(max_rank, s.rank)
    last = s
    stored = sum(x.nbytes for x in checkpoints.values())
    required = stored + (stride + 2) * state_bytes_estimate(grid, max(max_rank, 1))
    if required > mem_budget:
        raise MemoryBudgetError(f"checkpointed sweep needs about {required} bytes; "
                                f"budget is {mem_budget}")

    back = ell_state(grid)
    Z = c * pairing(last, back)
    g_raw = 0j
    g_cen = 0j
    j = 0
    for k0 in sorted(checkpoints, reverse=True):
        block = [checkpoints[k0]]
        for _ in range(k0 + 1, min(k0 + stride, n)):
            nxt = apply_transfer(block[-1], rank_tol)
            block.append(renormalize(nxt) if renorm else nxt)
        for f in reversed(block):
            g_raw += pairing(D_state(f, centered=False), back)
            g_cen += pairing(D_state(f, centered=True), back)
            j += 1
            if j < n:
                back = apply_transfer_T(back, rank_tol)
                if renorm:
                    back = renormalize(back)
    g_raw *= c / n
    g_cen *= c / n
    return DosResult(E=grid.E, W=grid.W, n=n, g_n=g_raw, Z=Z, g_n_normalized=g_cen / Z + g_sc,
                     g_centered=g_cen, g_sc=g_sc, grid=grid.describe(), max_rank=max_rank,
                     checkpoints=len(checkpoints))
