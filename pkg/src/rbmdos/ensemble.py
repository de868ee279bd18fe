"""Gaussian band-matrix ensemble with covariance J = (-W^2 Laplacian + 1)^{-1}.

Monte-Carlo estimates of the averaged Stieltjes transform
``n^{-1} E Tr (E - i eps - H)^{-1}`` and of the eigenvalue histogram.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .landscape import E_MAX, E_MIN, rho_sc, semicircle_cdf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of one run.

    ``check_window=False`` skips the energy window test; the Monte-Carlo
    routines accept any real energy.
    """

    E: float
    W: float
    n: int
    eps: float = 0.0
    check_window: bool = True

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not (np.isfinite(self.W) and self.W >= 2):
            raise ValueError(f"W must be finite and >= 2, got {self.W!r}")
        if not (np.isfinite(self.eps) and self.eps >= 0):
            raise ValueError(f"eps must be finite and >= 0, got {self.eps!r}")
        if not np.isfinite(self.E):
            raise ValueError("E must be finite")
        if self.check_window and not (E_MIN <= abs(self.E) <= E_MAX):
            raise ValueError(f"|E|={abs(self.E)} outside window [{E_MIN}, {E_MAX:.6f}]")


def default_n(W):
    """Smallest n of the form ceil(4 W ln W)."""
    return int(math.ceil(4 * W * math.log(W)))


@dataclass(frozen=True)
class Covariance:
    J: np.ndarray
    W: float

    @property
    def n(self):
        return self.J.shape[0]


def neumann_laplacian_banded(n):
    """-Laplacian with Neumann rows, in upper banded storage for ``solveh_banded``."""
    ab = np.zeros((2, n))
    if n == 1:
        return ab
    ab[1, :] = 2.0
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1:] = -1.0
    return ab


def build_covariance(n, W):
    """Covariance matrix J = (-W^2 Laplacian + 1)^{-1} with Neumann boundary rows.

    Solved column-block-wise through a banded Cholesky factorisation of the
    tridiagonal matrix.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not np.isfinite(W) or W < 0:
        raise ValueError(f"W must be finite and non-negative, got {W!r}")
    if n == 1:
        return Covariance(J=np.ones((1, 1)), W=float(W))
    ab = W * W * neumann_laplacian_banded(n)
    ab[1, :] += 1.0
    J = solveh_banded(ab, np.eye(n))
    J = 0.5 * (J + J.T)
    return Covariance(J=J, W=float(W))


def apply_precision(cov, X):
    """(-W^2 Laplacian + 1) @ X, used for residual checks."""
    X = np.asarray(X)
    n = cov.n
    out = X.copy()
    if n > 1:
        lap = np.zeros_like(X)
        lap[0] = X[0] - X[1]
        lap[-1] = X[-1] - X[-2]
        lap[1:-1] = 2 * X[1:-1] - X[:-2] - X[2:]
        out = out + cov.W**2 * lap
    return out


def sample_rng(seed, stream=0):
    """Generator for sample ``stream`` of the run seeded by ``seed``."""
    return np.random.default_rng([int(seed), int(stream)])


def sample_matrix(cov, seed, stream=0):
    """Draw one Hermitian matrix with E|H_ij|^2 = J_ij.

    Diagonal entries are real N(0, J_ii); above the diagonal the real and
    imaginary parts are independent N(0, J_ij / 2).
    """
    J = cov.J
    n = J.shape[0]
    rng = sample_rng(seed, stream)
    diag = rng.standard_normal(n) * np.sqrt(np.diag(J))
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    re = rng.standard_normal(m)
    im = rng.standard_normal(m)
    U = np.zeros((n, n), dtype=complex)
    U[iu] = np.sqrt(J[iu] / 2) * (re + 1j * im)
    H = U + U.conj().T
    H[np.diag_indices(n)] = diag
    return H


@dataclass(frozen=True)
class SampleStats:
    E: float
    eps: float
    W: float
    n: int
    g_mean: complex
    g_stderr: float
    samples: int
    seed: int
    dropped: int = 0

    def csv_row(self):
        return [self.E, self.eps, self.W, self.n, self.samples,
                self.g_mean.real, self.g_mean.imag, self.g_stderr, self.seed]


MC_CSV_HEADER = ["E", "eps", "W", "n", "samples", "re_g", "im_g", "stderr", "seed"]
HIST_CSV_HEADER = ["bin_lo", "bin_hi", "mass"]


def _eigvals(cov, seed, k):
    try:
        return np.linalg.eigvalsh(sample_matrix(cov, seed, k))
    except np.linalg.LinAlgError as exc:
        log.warning("sample %d: eigendecomposition failed (%s); dropped", k, exc)
        return None


def sample_spectra(cov, samples, seed, workers=1):
    """Eigenvalues of ``samples`` independent draws, in sample-index order."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if workers <= 1:
        return [_eigvals(cov, seed, k) for k in range(samples)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda k: _eigvals(cov, seed, k), range(samples)))


def _stats(values):
    m = len(values)
    mean = complex(np.mean(values)) if m else complex("nan")
    if m < 2:
        return mean, math.inf
    se_re = np.std(values.real, ddof=1) / np.sqrt(m)
    se_im = np.std(values.imag, ddof=1) / np.sqrt(m)
    return mean, float(max(se_re, se_im))


def stieltjes_mc_sweep(n, W, energies, eps, samples, seed, workers=1):
    """Monte-Carlo Stieltjes transform at several (E, eps) pairs.

    Each matrix is diagonalised once and reused for every pair.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    eps = np.broadcast_to(np.asarray(eps, dtype=float), energies.shape)
    if np.any(eps <= 0):
        raise ValueError("Monte-Carlo estimates need eps > 0")
    cov = build_covariance(n, W)
    spectra = sample_spectra(cov, samples, seed, workers)
    z = energies - 1j * eps
    rows = []
    kept = [lam for lam in spectra if lam is not None]
    dropped = samples - len(kept)
    for i in range(len(z)):
        vals = np.array([np.mean(1.0 / (z[i] - lam)) for lam in kept])
        mean, se = _stats(vals)
        rows.append(SampleStats(E=float(energies[i]), eps=float(eps[i]), W=float(W), n=int(n),
                                g_mean=mean, g_stderr=se, samples=len(kept), seed=int(seed),
                                dropped=dropped))
    return rows


def stieltjes_mc(p, samples, seed, workers=1):
    if p.eps <= 0:
        raise ValueError("stieltjes_mc needs eps > 0")
    return stieltjes_mc_sweep(p.n, p.W, [p.E], [p.eps], samples, seed, workers)[0]


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    mass: np.ndarray
    outside: float
    samples: int

    @property
    def density(self):
        return self.mass / np.diff(self.edges)

    def csv_rows(self):
        return [[lo, hi, m] for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.mass)]


def empirical_dos(p, samples, bins, seed, lo=-3.0, hi=3.0, workers=1):
    """Normalised eigenvalue histogram on ``[lo, hi]`` with uniform bins.

    ``outside`` records the fraction of eigenvalues that fell outside the
    range; the returned masses sum to one over the bins.
    """
    if bins < 10:
        raise ValueError("need at least 10 bins")
    cov = build_covariance(p.n, p.W)
    lam = np.concatenate([x for x in sample_spectra(cov, samples, seed, workers) if x is not None])
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(lam, bins=edges)
    inside = counts.sum()
    return Histogram(edges=edges, mass=counts / inside, outside=1.0 - inside / lam.size,
                     samples=samples)


def semicircle_bin_mass(edges):
    return np.diff(semicircle_cdf(edges))


def sup_density_distance(hist):
    """Max over bins of |histogram density - bin average of rho_sc|."""
    ref = semicircle_bin_mass(hist.edges) / np.diff(hist.edges)
    return float(np.max(np.abs(hist.density - ref)))


def tail_mass(hist, cut=2.5):
    """Fraction of all eigenvalues beyond ``|x| > cut``, counting those outside the bins."""
    centers = 0.5 * (hist.edges[1:] + hist.edges[:-1])
    return float(hist.mass[np.abs(centers) > cut].sum() * (1 - hist.outside) + hist.outside)


__all__ = [
    "ModelParams", "Covariance", "SampleStats", "Histogram", "build_covariance",
    "sample_matrix", "stieltjes_mc", "stieltjes_mc_sweep", "empirical_dos",
    "sup_density_distance", "tail_mass", "default_n", "rho_sc",
]
