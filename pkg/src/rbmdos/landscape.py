"""Closed-form scalar layer: the potentials f_a, f_b, the coupling L and saddle constants.

All functions are vectorised over their real arguments. Energies are in the
units where the semicircle is supported on [-2, 2].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

E_MAX = 4.0 * np.sqrt(2.0) / 3.0
E_MIN = 0.2


def _check_energy(E, lower=E_MIN):
    E = float(E)
    if not np.isfinite(E) or abs(E) > E_MAX or abs(E) < lower:
        raise ValueError(f"energy E={E} outside window {lower} <= |E| <= {E_MAX:.6f}")
    return E


def _root(E):
    return np.sqrt(4.0 - E * E)


def c_star_const(E):
    z = E / 2 + 0.5j * _root(E)
    return z * z / 2 + np.log(-E / 2 + 0.5j * _root(E))


def _log_ia(a, E):
    # log(i a - E/2) continued along the real a-line; principal branch at a_+.
    # i a - E/2 = i (a + i E/2) and a + iE/2 never meets the cut when E != 0.
    return 0.5j * np.pi + np.log(np.asarray(a, dtype=float) + 0.5j * E)


def eval_fa(a, E):
    """Potential for the bosonic field, vanishing at ``a_plus``."""
    E = _check_energy(E)
    a = np.asarray(a, dtype=float)
    return (a - 0.5j * E) ** 2 / 2 - _log_ia(a, E) + c_star_const(E)


def eval_fb(b, E):
    """Potential for the second field, vanishing at ``b_s = E/2``."""
    E = _check_energy(E)
    b = np.asarray(b, dtype=float)
    s = 0.5j * _root(E)
    arg = b - E + s
    # Im(arg) = sqrt(4 - E^2)/2 > 0: the principal log never crosses its cut.
    assert np.all(arg.imag > 0)
    return (b + s) ** 2 / 2 + np.log(arg) - c_star_const(E)


def fa_second(a, E):
    """Analytic second derivative of ``eval_fa``."""
    return 1.0 - (1j * np.asarray(a, dtype=float) - E / 2) ** -2


def fb_second(b, E):
    return 1.0 - (np.asarray(b, dtype=float) - E + 0.5j * _root(E)) ** -2


def g_factor(a, E):
    """a-part of the rank-2 split ``L(a, b) = 1 - g(a) h(b)``."""
    return 1.0 / (1j * np.asarray(a, dtype=float) - E / 2)


def h_factor(b, E):
    return 1.0 / (np.asarray(b, dtype=float) - E + 0.5j * _root(E))


def eval_L(a, b, E):
    E = _check_energy(E, lower=0.0)
    return 1.0 - g_factor(a, E) * h_factor(b, E)


def L_bound(E):
    """Upper bound L0(E) on |L(a, b)| over the real plane."""
    E = float(E)
    return 1.0 + 1.0 / (abs(E) / 2 * _root(E) / 2)


def semicircle(E, eps=0.0):
    """Stieltjes transform of the semicircle at ``E - i eps``.

    The branch decays at infinity and has positive imaginary part for
    ``eps > 0``. At ``eps = 0`` the boundary value from below the real axis
    is returned.
    """
    E = float(E)
    eps = float(eps)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0.0:
        if abs(E) < 2.0:
            return complex(E / 2, _root(E) / 2)
        return complex((E - np.sign(E) * np.sqrt(E * E - 4.0)) / 2, 0.0)
    z = complex(E, -eps)
    return (z - np.sqrt(z - 2) * np.sqrt(z + 2)) / 2


def rho_sc(E):
    E = np.asarray(E, dtype=float)
    return np.where(np.abs(E) < 2, np.sqrt(np.clip(4 - E * E, 0, None)) / (2 * np.pi), 0.0)


def semicircle_cdf(x):
    x = np.clip(np.asarray(x, dtype=float) / 2, -1, 1)
    return 0.5 + (x * np.sqrt(1 - x * x) + np.arcsin(x)) / np.pi


@dataclass(frozen=True)
class SaddleData:
    E: float
    W: float
    a_plus: float
    a_minus: float
    b_s: float
    c_plus: complex
    c_minus: complex
    L_plus: complex
    L_minus: complex
    alpha_plus: complex
    lambda_0_plus: complex
    lambda1_S: complex
    lambda2_S: complex
    V: np.ndarray
    g_sc: complex
    rho_sc: float

    def as_dict(self):
        out = {}
        for name in self.__dataclass_fields__:
            val = getattr(self, name)
            out[name] = val
        return out


def _unit_columns(V):
    V = V / np.linalg.norm(V, axis=0)
    for k in range(V.shape[1]):
        col = V[:, k]
        lead = col[np.flatnonzero(np.abs(col) > 0)[0]]
        V[:, k] = col * np.exp(-1j * np.angle(lead))
    return V


def saddle_data(E, W):
    """All closed-form constants attached to the saddle points at energy ``E``.

    ``E = 0`` is accepted here because none of these constants involve the
    logarithms of the potentials.
    """
    E = _check_energy(E, lower=0.0)
    W = float(W)
    if not W > 0:
        raise ValueError("W must be positive")
    r = _root(E)
    a_p, a_m, b_s = r / 2, -r / 2, E / 2
    c_p = complex(fa_second(a_p, E) / 2)
    c_m = complex(fa_second(a_m, E) / 2)
    L_p = complex(eval_L(a_p, b_s, E))
    L_m = complex(eval_L(a_m, b_s, E))
    alpha = np.sqrt(c_p / 2) * np.sqrt(1 + c_p / (2 * W * W))
    lam0 = (1 + 2 * alpha / W + c_p / W**2) ** -0.5
    root = np.sqrt(L_p / W**2 + L_p**2 / (4 * W**4))
    lam1 = 1 + L_p / (2 * W * W) + root
    lam2 = 1 + L_p / (2 * W * W) - root
    # eigenvectors of S+ = [[1, -L/W], [-1/W, 1 + L/W^2]] from its second row
    V = np.array([[W * (1 + L_p / W**2 - lam1), W * (1 + L_p / W**2 - lam2)],
                  [1.0, 1.0]], dtype=complex)
    return SaddleData(
        E=E, W=W, a_plus=a_p, a_minus=a_m, b_s=b_s,
        c_plus=c_p, c_minus=c_m, L_plus=L_p, L_minus=L_m,
        alpha_plus=complex(alpha), lambda_0_plus=complex(lam0),
        lambda1_S=complex(lam1), lambda2_S=complex(lam2),
        V=_unit_columns(V), g_sc=semicircle(E), rho_sc=float(rho_sc(E)),
    )


def S_matrix(L, W):
    return np.array([[1.0, -L / W], [-1.0 / W, 1.0 + L / W**2]], dtype=complex)
