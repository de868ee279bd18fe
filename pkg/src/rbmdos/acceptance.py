"""Acceptance checks shared by ``rbm verify`` and the test suite.

Each check returns a :class:`CriterionResult`. Expensive intermediate
results (grids, spectra, DOS sweeps) are memoised per profile so a full run
computes each of them once.

The ``quick`` profile uses the coarse grid and multiplies every absolute
tolerance by 10; ratio brackets are left unchanged.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field

import numpy as np

from . import ensemble as ens
from . import grid as gr
from . import landscape as ls
from . import oracle, spectral, transfer


@dataclass(frozen=True)
class Profile:
    name: str
    refine: float
    cutoff: float
    tol_mult: float


DEFAULT = Profile("default", gr.DEFAULT_REFINE, gr.DEFAULT_CUTOFF, 1.0)
QUICK = Profile("quick", gr.QUICK_REFINE, gr.QUICK_CUTOFF, 10.0)
PROFILES = {"default": DEFAULT, "quick": QUICK}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number}. {self.name}: {self.summary} ({self.seconds:.1f}s)"


# -- memoised building blocks ---------------------------------------------------

@functools.lru_cache(maxsize=None)
def get_grid(E, W, profile=DEFAULT):
    return gr.build_grid(E, W, refine=profile.refine, cutoff=profile.cutoff)


@functools.lru_cache(maxsize=None)
def get_spectrum(E, W, profile=DEFAULT):
    g = get_grid(E, W, profile)
    return spectral.transfer_spectrum(ens.ModelParams(E, W, 1), g, top=2)


@functools.lru_cache(maxsize=None)
def get_dos(E, W, profile=DEFAULT):
    g = get_grid(E, W, profile)
    return transfer.dos(ens.ModelParams(E, W, ens.default_n(W)), g)


def clear_caches():
    for f in (get_grid, get_spectrum, get_dos):
        f.cache_clear()


# -- criteria ---------------------------------------------------------------------

def check_normalization(profile=DEFAULT, ell_sign=transfer.ELL_SIGN):
    tol = 1e-4 * profile.tol_mult
    worst = 0.0
    table = {}
    for E in (0.5, 1.0, 1.5):
        for W in (8, 16):
            zs = transfer.normalization_curve(get_grid(E, W, profile), [16, 64, 256],
                                              ell_sign=ell_sign)
            for n, z in zs.items():
                table[f"E={E},W={W},n={n}"] = abs(z - 1)
                worst = max(worst, abs(z - 1))
    return worst <= tol, f"max |Z-1| = {worst:.3g} (tol {tol:g})", table


def check_oracle(profile=DEFAULT):
    tol = 1e-10 * profile.tol_mult
    g = get_grid(1.0, 4, profile)
    devs = {}
    for n in (1, 2):
        d = oracle.transfer_deviation(n, g)
        devs[f"g,n={n}"] = d["g"]
        devs[f"Z,n={n}"] = d["Z"]
    worst = max(devs.values())
    return worst <= tol, f"max relative deviation = {worst:.3g} (tol {tol:g})", devs


def check_leading_eigenvalue(profile=DEFAULT):
    tol, rtol = 1e-3 * profile.tol_mult, 1e-8 * profile.tol_mult
    rows = {}
    ok = True
    for W in (8, 16, 32):
        r = get_spectrum(1.0, W, profile)
        rows[f"W={W}"] = {"lambda0": r.lambda0, "residual": r.residual0}
        ok &= abs(r.lambda0 - 1) <= tol and r.residual0 <= rtol
    worst = max(abs(v["lambda0"] - 1) for v in rows.values())
    res = max(v["residual"] for v in rows.values())
    return ok, f"max |lambda0-1| = {worst:.3g}, max residual = {res:.2g}", rows


def check_gap_scaling(profile=DEFAULT):
    vals = {f"W={W}": get_spectrum(1.0, W, profile).gap * W for W in (8, 16, 32)}
    ratio = max(vals.values()) / min(vals.values())
    ok = min(vals.values()) > 0 and ratio <= 3
    txt = ", ".join(f"{k}: {v:.3f}" for k, v in vals.items())
    return ok, f"gap*W {txt}; max/min = {ratio:.3f} (<= 3)", vals


def check_dos_scaling(profile=DEFAULT):
    errs = {}
    ratios = {}
    for E in (0.5, 1.0, 1.5):
        for W in (8, 16, 32):
            errs[(E, W)] = get_dos(E, W, profile).abs_err
        for W in (8, 16):
            ratios[f"E={E},W={W}->{2 * W}"] = errs[(E, 2 * W)] / errs[(E, W)]
    ok = all(0.35 <= r <= 0.72 for r in ratios.values())
    lo, hi = min(ratios.values()), max(ratios.values())
    measured = {"ratios": ratios, "errors": {f"E={E},W={W}": v for (E, W), v in errs.items()}}
    return ok, f"err(2W)/err(W) in [{lo:.3f}, {hi:.3f}] (target [0.35, 0.72])", measured


def check_kernel_headline(profile=DEFAULT):
    vals = {}
    for W in (8, 16, 32):
        k = spectral.kernel_top(get_grid(1.0, W, profile))
        vals[f"W={W}"] = k.deviation * W**1.5
    worst = max(vals.values())
    return worst <= 5, f"max ||lambda0(K)| - |lambda0+|^2| W^1.5 = {worst:.3g} (<= 5)", vals


def check_model_operator(profile=DEFAULT):
    tol, ptol = 1e-6 * profile.tol_mult, 1e-8 * profile.tol_mult
    c = 1.0
    out = {}
    ok = True
    for W in (10, 20):
        lam0 = gr.model_lambda0(c, W)
        axis = gr.model_axis(c, W, 6)
        top = spectral.top_eigs(gr.model_operator_sparse(c, W, axis), 1)[0]
        M = gr.model_operator_matrix(c, W, 6, axis).entries
        diag = max(abs(M[k, k] - lam0 ** (2 * k + 1)) for k in range(7))
        scale = np.abs(M).max()
        j, k = np.indices(M.shape)
        lower = np.abs(M[j > k]).max() / scale
        parity = np.abs(M[(j - k) % 2 == 1]).max() / scale
        out[f"W={W}"] = {"lambda0": abs(top.value - lam0), "diag": diag, "lower": lower,
                         "parity": parity}
        ok &= abs(top.value - lam0) <= tol and diag <= tol and lower <= ptol and parity <= ptol
    worst = {key: max(v[key] for v in out.values()) for key in ("lambda0", "diag", "lower", "parity")}
    txt = ", ".join(f"{k_} {v:.2g}" for k_, v in worst.items())
    return ok, txt, out


def check_monte_carlo(profile=DEFAULT, seed=20240601):
    p = ens.ModelParams(1.0, 32, 1024, eps=0.1)
    st = ens.stieltjes_mc(p, 50, seed)
    ref = ls.semicircle(1.0, 0.1)
    dev = abs(st.g_mean - ref)
    bound = max(0.05 * profile.tol_mult, 4 * st.g_stderr)
    h = ens.empirical_dos(ens.ModelParams(1.0, 64, 1024), 20, 60, seed)
    sup = ens.sup_density_distance(h)
    ok = dev <= bound and sup <= 0.05 * profile.tol_mult
    return ok, (f"|g_mc - g_sc| = {dev:.3g} (<= {bound:.3g}), sup density distance "
                f"= {sup:.3g} (<= {0.05 * profile.tol_mult:g})"), {
        "g_mean": st.g_mean, "stderr": st.g_stderr, "dev": dev, "sup": sup}


def _fd(fun, x, h=1e-5):
    return (fun(x + h) - fun(x - h)) / (2 * h)


def check_closed_form(profile=DEFAULT):
    t = profile.tol_mult
    worst = {"f_zero": 0.0, "f_grad": 0.0, "L_minus": 0.0, "L_plus": 0.0, "lam0_S": 0.0,
             "det_S": 0.0, "J_rows": 0.0}
    for E in (0.2, 0.5, 1.0, 1.5, 1.88):
        for sE in (E, -E):
            for W in (4, 8, 16, 32):
                sd = ls.saddle_data(sE, W)
                worst["L_minus"] = max(worst["L_minus"], abs(sd.L_minus))
                worst["L_plus"] = max(worst["L_plus"], abs(sd.L_plus - 2 * sd.c_plus))
                worst["lam0_S"] = max(worst["lam0_S"], abs(sd.lambda_0_plus**2 * sd.lambda1_S - 1))
                worst["det_S"] = max(worst["det_S"], abs(np.linalg.det(ls.S_matrix(sd.L_plus, W)) - 1),
                                     abs(sd.lambda1_S * sd.lambda2_S - 1))
            worst["f_zero"] = max(worst["f_zero"], abs(ls.eval_fa(sd.a_plus, sE)),
                                  abs(ls.eval_fb(sd.b_s, sE)))
            grads = [_fd(lambda x: ls.eval_fa(x, sE), sd.a_plus),
                     _fd(lambda x: ls.eval_fa(x, sE), sd.a_minus),
                     _fd(lambda x: ls.eval_fb(x, sE), sd.b_s)]
            worst["f_grad"] = max(worst["f_grad"], max(abs(g) for g in grads))
    for n in (1, 2, 5, 64, 300):
        for W in (2, 3, 8, 32):
            J = ens.build_covariance(n, W).J
            worst["J_rows"] = max(worst["J_rows"], float(np.abs(J.sum(axis=1) - 1).max()))
    limits = {"f_zero": 1e-12, "f_grad": 1e-8, "L_minus": 1e-12, "L_plus": 1e-12,
              "lam0_S": 1e-12, "det_S": 1e-12, "J_rows": 1e-12}
    ok = all(worst[k] <= limits[k] * t for k in worst)
    txt = ", ".join(f"{k} {v:.1g}" for k, v in worst.items())
    return ok, txt, worst


CRITERIA = {
    1: ("normalization identity", check_normalization),
    2: ("oracle equivalence", check_oracle),
    3: ("leading eigenvalue", check_leading_eigenvalue),
    4: ("spectral gap scaling", check_gap_scaling),
    5: ("DOS correction scaling", check_dos_scaling),
    6: ("kernel eigenvalue headline", check_kernel_headline),
    7: ("model operator", check_model_operator),
    8: ("Monte-Carlo cross-validation", check_monte_carlo),
    9: ("closed-form identities", check_closed_form),
}


def run_criterion(number, profile=DEFAULT, **kw):
    name, fun = CRITERIA[number]
    t0 = time.perf_counter()
    passed, summary, measured = fun(profile, **kw)
    return CriterionResult(number, name, bool(passed), summary, measured,
                           time.perf_counter() - t0)


def run_all(profile=DEFAULT, only=None, ell_sign=transfer.ELL_SIGN, stream=None):
    results = []
    for number in sorted(only or CRITERIA):
        kw = {"ell_sign": ell_sign} if number == 1 else {}
        r = run_criterion(number, profile, **kw)
        results.append(r)
        if stream is not None:
            print(r.line(), file=stream, flush=True)
    return results

