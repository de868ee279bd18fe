"""Separable low-rank storage for complex fields on a product grid.

A field ``X[i, j] = sum_r P[i, r] Q[j, r]`` is kept as its two factors.
Recompression is done in quadrature-weighted coordinates so the dropped
part is small in the weighted L2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class LowRankField:
    P: np.ndarray
    Q: np.ndarray

    @property
    def rank(self):
        return self.P.shape[1]

    @property
    def shape(self):
        return self.P.shape[0], self.Q.shape[0]

    @property
    def nbytes(self):
        return self.P.nbytes + self.Q.nbytes

    @classmethod
    def zeros(cls, na, nb):
        return cls(np.zeros((na, 0), complex), np.zeros((nb, 0), complex))

    @classmethod
    def outer(cls, u, v):
        return cls(np.asarray(u, complex)[:, None], np.asarray(v, complex)[:, None])

    @classmethod
    def from_dense(cls, X, wa, wb, tol=0.0):
        sa, sb = np.sqrt(wa), np.sqrt(wb)
        U, s, Vh = np.linalg.svd(sa[:, None] * X * sb[None, :], full_matrices=False)
        keep = s > tol * s[0] if s.size and s[0] > 0 else np.zeros(s.size, bool)
        return cls((U[:, keep] * s[keep]) / sa[:, None], Vh[keep].T / sb[:, None])

    def dense(self):
        return self.P @ self.Q.T

    def scaled(self, c):
        return LowRankField(self.P * c, self.Q)

    def mul_a(self, v):
        return LowRankField(self.P * v[:, None], self.Q)

    def mul_b(self, v):
        return LowRankField(self.P, self.Q * v[:, None])

    def apply(self, Ma, Mb):
        """(Ma ⊗ Mb) applied factor-wise."""
        return LowRankField(np.asarray(Ma @ self.P), np.asarray(Mb @ self.Q))

    def gram(self, other, wa, wb):
        return ((self.P.T * wa) @ other.P) * ((self.Q.T * wb) @ other.Q)

    def pair(self, other, wa, wb):
        """Weighted bilinear pairing sum_ij wa_i wb_j X_ij Y_ij (no conjugation)."""
        if self.rank == 0 or other.rank == 0:
            return 0j
        return complex(self.gram(other, wa, wb).sum())

    def norm(self, wa, wb):
        if self.rank == 0:
            return 0.0
        G = ((self.P.conj().T * wa) @ self.P) * ((self.Q.conj().T * wb) @ self.Q)
        return float(np.sqrt(max(G.sum().real, 0.0)))

    def weighted_core(self, sa, sb):
        """Orthonormal factors and core of the weighted field."""
        Qp, Rp = np.linalg.qr(sa[:, None] * self.P)
        Qq, Rq = np.linalg.qr(sb[:, None] * self.Q)
        return Qp, Rp @ Rq.T, Qq

    def svd_parts(self, sa, sb):
        """Weighted-coordinate SVD ``(Qp U, s, Qq Vh^T)`` of the field."""
        Qp, C, Qq = self.weighted_core(sa, sb)
        U, s, Vh = np.linalg.svd(C)
        return Qp @ U, s, Qq @ Vh.T

    @classmethod
    def from_svd(cls, parts, sa, sb, abs_tol):
        """Rebuild from ``svd_parts`` keeping singular values above ``abs_tol``."""
        Uw, s, Vw = parts
        keep = s > abs_tol
        return cls((Uw[:, keep] * s[keep]) / sa[:, None], Vw[:, keep] / sb[:, None])

    def compress(self, sa, sb, abs_tol):
        """Truncated SVD in weighted coordinates; drops singular values <= abs_tol."""
        if self.rank == 0:
            return self
        return LowRankField.from_svd(self.svd_parts(sa, sb), sa, sb, abs_tol)

    def singular_values(self, sa, sb):
        if self.rank == 0:
            return np.zeros(0)
        _, C, _ = self.weighted_core(sa, sb)
        return np.linalg.svd(C, compute_uv=False)


def combine(terms):
    """Sum of (coefficient, field) pairs as one factored field."""
    terms = [(c, f) for c, f in terms if f.rank and c != 0]
    if not terms:
        return None
    P = np.concatenate([f.P * c for c, f in terms], axis=1)
    Q = np.concatenate([f.Q for _, f in terms], axis=1)
    return LowRankField(P, Q)
