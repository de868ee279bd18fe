"""Brute-force field integrals for n = 1 and n = 2 sites.

The anticommuting sector of the integrand is reduced to the determinant
``det(W^2 L_N + diag L(a_j, b_j))``. For two sites the Gaussian coupling
``exp(-W^2/2 [(a1-a2)^2 + (b1-b2)^2])`` is separable, so the four-fold sum
is a nested contraction with dense kernel matrices built here from the
grid nodes (truncated at the same radius as the production kernel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import landscape as ls
from .grid import KERNEL_RADIUS


def neumann_graph_laplacian(n):
    Lap = np.zeros((n, n))
    for j in range(n - 1):
        Lap[j, j] += 1
        Lap[j + 1, j + 1] += 1
        Lap[j, j + 1] = Lap[j + 1, j] = -1
    return Lap


def grassmann_det(a, b, E, W):
    """Determinant of ``W^2 L_N + diag(L(a_j, b_j))`` for one configuration."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be vectors of equal length")
    n = a.size
    if n not in (1, 2):
        raise ValueError("oracle supports n in {1, 2}")
    M = W * W * neumann_graph_laplacian(n) + np.diag(ls.eval_L(a, b, E))
    return complex(np.linalg.det(M))


@dataclass(frozen=True)
class FieldIntegralResult:
    value_g: complex
    value_Z: complex
    n: int
    E: float
    W: float
    fingerprint: str


def coupling_matrix(x, W):
    """Dense ``exp(-W^2 (x_i - x_j)^2 / 2)`` cut at ``|x_i - x_j| <= 7/W``."""
    D = x[:, None] - x[None, :]
    K = np.exp(-0.5 * (W * D) ** 2)
    K[np.abs(D) > KERNEL_RADIUS / W] = 0.0
    return K


def field_integral(n, grid, E, W):
    """Evaluate the n-site integrals for Z and g on the tensor grid.

    ``Z = (2 pi)^{-n} sum w exp(-coupling) exp(-sum f_a - sum f_b) det``
    and ``g`` carries the extra factor ``n^{-1} sum_j d(b_j)``.
    """
    if n not in (1, 2):
        raise ValueError("oracle supports n in {1, 2}")
    if float(E) != grid.E or float(W) != grid.W:
        raise ValueError(f"grid built for (E={grid.E}, W={grid.W}) but oracle called with "
                         f"(E={E}, W={W})")
    E, W = float(E), float(W)
    xa, xb = grid.axis_a.nodes, grid.axis_b.nodes
    # quadrature weight times exp(-f_a - f_b) at every tensor point
    w = np.outer(grid.axis_a.weights * np.exp(-ls.eval_fa(xa, E)),
                 grid.axis_b.weights * np.exp(-ls.eval_fb(xb, E)))
    Lf = ls.eval_L(xa[:, None], xb[None, :], E)
    d = (xb + 0.5j * math.sqrt(4 - E * E))[None, :]

    if n == 1:
        Z = np.sum(w * Lf) / (2 * math.pi)
        g = np.sum(w * Lf * d) / (2 * math.pi)
        return FieldIntegralResult(complex(g), complex(Z), 1, E, W, grid.fingerprint)

    Ka = coupling_matrix(xa, W)
    Kb = coupling_matrix(xb, W)

    def pair(P, Q):
        # sum_{x, y} P(x) Ka(a1, a2) Kb(b1, b2) Q(y)
        return complex(np.sum(P * (Ka @ Q @ Kb.T)))

    one = np.ones_like(Lf)
    # det = W^2 (L1 + L2) + L1 L2, one term per (site-1 factor, site-2 factor)
    terms = [(W * W, Lf, one), (W * W, one, Lf), (1.0, Lf, Lf)]
    Z = g = 0j
    for c, X, Y in terms:
        Z += c * pair(w * X, w * Y)
        g += c * 0.5 * (pair(w * X * d, w * Y) + pair(w * X, w * Y * d))
    norm = (2 * math.pi) ** -2
    return FieldIntegralResult(complex(g * norm), complex(Z * norm), 2, E, W, grid.fingerprint)


def transfer_deviation(n, grid):
    """Relative deviation of the transfer values from the field integral on one grid."""
    from .ensemble import ModelParams
    from .transfer import dos

    ref = field_integral(n, grid, grid.E, grid.W)
    p = ModelParams(grid.E, grid.W, n)
    r = dos(p, grid, renorm=False)
    return {
        "g": abs(r.g_n - ref.value_g) / abs(ref.value_g),
        "Z": abs(r.Z - ref.value_Z) / abs(ref.value_Z),
        "transfer_g": r.g_n,
        "transfer_Z": r.Z,
    }
