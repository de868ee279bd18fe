"""Command-line front end ``rbm``.

Parameter precedence is command-line flag, then the flat JSON ``--config``
file, then built-in defaults. Results go to ``--out`` (written atomically)
or to stdout. Exit codes: 0 success, 1 failed acceptance checks, 2 invalid
input or budget violation, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import acceptance
from . import ensemble as ens
from . import grid as gr
from . import landscape as ls
from . import oracle, spectral, transfer

SCHEMA_VERSION = 1
SIG_DIGITS = 15

DEFAULTS = {
    "E": "1.0", "W": "8", "n": None, "eps": 0.1, "samples": 50, "seed": 0,
    "nu": gr.DEFAULT_REFINE, "phi": gr.DEFAULT_CUTOFF, "node_budget": gr.DEFAULT_NODE_BUDGET,
    "mem_budget": 1 << 30, "format": None, "quick": False, "top": 2,
    "krylov": spectral.DEFAULT_KRYLOV, "bins": 60, "workers": 1, "hist": False,
}

log = logging.getLogger("rbmdos")


class UsageError(ValueError):
    pass


# -- serialisation ----------------------------------------------------------------

def _round(x):
    return float(f"{x:.{SIG_DIGITS}g}") if math.isfinite(x) else x


def to_jsonable(obj):
    """Convert results to plain JSON types; complex numbers become ``[re, im]``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_round(float(obj.real)), _round(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    return obj


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{SIG_DIGITS}g}"
    return str(x)


def csv_text(header, rows, meta=None):
    buf = io.StringIO()
    if meta is not None:
        meta = dict(meta, config=_embed(meta.get("config", {})))
        buf.write("# " + json.dumps(to_jsonable(meta), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _embed(config):
    # the output path is not part of what makes a run reproducible
    return {k: v for k, v in config.items() if k != "out"}


def json_text(command, config, result):
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "config": _embed(config),
           "result": result}
    return json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rbm-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(cfg, text):
    if cfg.get("out"):
        write_atomic(cfg["out"], text)
    else:
        sys.stdout.write(text)


# -- configuration ----------------------------------------------------------------

def load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise UsageError(f"config {path} must be a flat JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(args):
    """Merge command-line values over the config file over the defaults."""
    file_cfg = load_config(args.config)
    cfg = {}
    for key, default in DEFAULTS.items():
        if not hasattr(args, key):
            continue
        val = getattr(args, key)
        cfg[key] = val if val is not None else file_cfg.get(key, default)
    cfg["out"] = args.out if args.out is not None else file_cfg.get("out")
    if cfg.get("quick"):
        # the quick grid replaces the grid defaults, never explicit values
        for key, q in (("nu", gr.QUICK_REFINE), ("phi", gr.QUICK_CUTOFF)):
            if getattr(args, key, None) is None and key not in file_cfg:
                cfg[key] = q
    return cfg


def _floats(value):
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    if isinstance(value, (int, float)):
        return [float(value)]
    try:
        return [float(v) for v in str(value).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse number list {value!r}") from exc


def _single(value, name):
    vals = _floats(value)
    if len(vals) != 1:
        raise UsageError(f"--{name} takes a single value here")
    return vals[0]


def _n_for(cfg, W):
    return int(cfg["n"]) if cfg.get("n") is not None else ens.default_n(W)


def _grid(cfg, E, W):
    return gr.build_grid(E, W, refine=float(cfg["nu"]), cutoff=float(cfg["phi"]),
                         node_budget=int(cfg["node_budget"]))


# -- commands ---------------------------------------------------------------------

def cmd_constants(cfg):
    E, W = _single(cfg["E"], "E"), _single(cfg["W"], "W")
    sd = ls.saddle_data(E, W)
    result = sd.as_dict()
    result["L_bound"] = ls.L_bound(E) if E != 0 else math.inf
    emit(cfg, json_text("constants", cfg, result))
    return 0


def _dos_record(r):
    return {"E": r.E, "W": r.W, "n": r.n,
            "re_g": r.g_n_normalized.real, "im_g": r.g_n_normalized.imag,
            "re_Z": r.Z.real, "im_Z": r.Z.imag,
            "re_gsc": r.g_sc.real, "im_gsc": r.g_sc.imag, "abs_err": r.abs_err,
            "g_raw": r.g_n, "max_rank": r.max_rank, "grid": r.grid}


def _run_dos(cfg, E, W):
    n = _n_for(cfg, W)
    p = ens.ModelParams(E, W, n)
    return transfer.dos(p, _grid(cfg, E, W), mem_budget=int(cfg["mem_budget"]))


DOS_CSV_HEADER = ["E", "W", "n", "re_g", "im_g", "abs_err"]


def _dos_rows(results):
    return [[r.E, r.W, r.n, r.g_n_normalized.real, r.g_n_normalized.imag, r.abs_err]
            for r in results]


def _dos_meta(cfg, results):
    return {"schema_version": SCHEMA_VERSION, "config": cfg,
            "grid_fingerprints": {f"E={r.E},W={r.W}": r.grid["fingerprint"] for r in results}}


def cmd_dos(cfg):
    r = _run_dos(cfg, _single(cfg["E"], "E"), _single(cfg["W"], "W"))
    if cfg["format"] == "csv":
        emit(cfg, csv_text(DOS_CSV_HEADER, _dos_rows([r]), _dos_meta(cfg, [r])))
    else:
        emit(cfg, json_text("dos", cfg, _dos_record(r)))
    return 0


def cmd_sweep(cfg):
    results = []
    for E in _floats(cfg["E"]):
        for W in _floats(cfg["W"]):
            log.info("sweep point E=%g W=%g", E, W)
            results.append(_run_dos(cfg, E, W))
    if cfg["format"] == "json":
        emit(cfg, json_text("sweep", cfg, [_dos_record(r) for r in results]))
    else:
        emit(cfg, csv_text(DOS_CSV_HEADER, _dos_rows(results), _dos_meta(cfg, results)))
    return 0


def cmd_mc(cfg):
    energies = _floats(cfg["E"])
    W = _single(cfg["W"], "W")
    n = _n_for(cfg, W)
    seed, samples, workers = int(cfg["seed"]), int(cfg["samples"]), int(cfg["workers"])
    meta = {"schema_version": SCHEMA_VERSION, "config": cfg}
    if cfg["hist"]:
        p = ens.ModelParams(energies[0], W, n, check_window=False)
        h = ens.empirical_dos(p, samples, int(cfg["bins"]), seed, workers=workers)
        if cfg["format"] == "json":
            emit(cfg, json_text("mc", cfg, {"edges": h.edges, "mass": h.mass,
                                            "outside": h.outside, "samples": h.samples,
                                            "sup_distance": ens.sup_density_distance(h)}))
        else:
            emit(cfg, csv_text(ens.HIST_CSV_HEADER, h.csv_rows(), meta))
        return 0
    eps = float(cfg["eps"])
    if not eps > 0:
        raise UsageError("mc needs --eps > 0")
    ens.ModelParams(energies[0], W, n, eps, check_window=False)
    rows = ens.stieltjes_mc_sweep(n, W, energies, eps, samples, seed, workers)
    if cfg["format"] == "json":
        emit(cfg, json_text("mc", cfg, [dict(zip(ens.MC_CSV_HEADER, r.csv_row()),
                                             dropped=r.dropped) for r in rows]))
    else:
        emit(cfg, csv_text(ens.MC_CSV_HEADER, [r.csv_row() for r in rows], meta))
    return 0


def cmd_spectrum(cfg):
    E, W = _single(cfg["E"], "E"), _single(cfg["W"], "W")
    g = _grid(cfg, E, W)
    rep = spectral.transfer_spectrum(ens.ModelParams(E, W, 1), g, top=int(cfg["top"]),
                                     krylov_dim=int(cfg["krylov"]), seed=int(cfg["seed"]))
    k = spectral.kernel_top(g, seed=int(cfg["seed"]))
    result = {"E": E, "W": W, "lambda0": rep.lambda0, "lambda1": rep.lambda1,
              "gap": rep.gap, "residual0": rep.residual0, "residual1": rep.residual1,
              "others": list(rep.others), "krylov_dim": rep.krylov_dim,
              "window": list(rep.window), "fingerprint": rep.fingerprint,
              "kernel": {"lambda0_K": k.lambda0_K, "abs_lambda0_plus_sq": k.predicted,
                         "deviation": k.deviation}}
    emit(cfg, json_text("spectrum", cfg, result))
    return 0


def cmd_oracle(cfg):
    E, W = _single(cfg["E"], "E"), _single(cfg["W"], "W")
    n = int(cfg["n"]) if cfg.get("n") is not None else 1
    if n not in (1, 2):
        raise UsageError("oracle supports --n 1 or --n 2")
    g = _grid(cfg, E, W)
    res = oracle.field_integral(n, g, E, W)
    dev = oracle.transfer_deviation(n, g)
    result = {"n": n, "E": E, "W": W, "value_g": res.value_g, "value_Z": res.value_Z,
              "fingerprint": res.fingerprint, "transfer_g": dev["transfer_g"],
              "transfer_Z": dev["transfer_Z"], "rel_dev_g": dev["g"], "rel_dev_Z": dev["Z"]}
    emit(cfg, json_text("oracle", cfg, result))
    return 0


def cmd_verify(cfg, only=None, flip_sign=False):
    profile = acceptance.QUICK if cfg.get("quick") else acceptance.DEFAULT
    sign = -transfer.ELL_SIGN if flip_sign else transfer.ELL_SIGN
    print(f"acceptance suite, profile {profile.name}", file=sys.stderr)
    results = acceptance.run_all(profile, only, ell_sign=sign, stream=sys.stderr)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed", file=sys.stderr)
    if cfg.get("out"):
        doc = [{"number": r.number, "name": r.name, "passed": r.passed, "summary": r.summary,
                "seconds": r.seconds} for r in results]
        write_atomic(cfg["out"], json_text("verify", cfg, doc))
    return 0 if passed == len(results) else 1


# -- argument parsing -------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON file of default parameters")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    phys = argparse.ArgumentParser(add_help=False)
    phys.add_argument("--E", help="energy (comma list for sweep and mc)")
    phys.add_argument("--W", help="band width (comma list for sweep)")
    phys.add_argument("--n", type=int, help="matrix size (default ceil(4 W ln W))")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--nu", type=float, help="points per 1/W, at least 4")
    grid.add_argument("--phi", type=float, help="cutoff level of Re f, at least 30")
    grid.add_argument("--node-budget", dest="node_budget", type=int)
    grid.add_argument("--quick", action="store_const", const=True,
                      help="coarse grid (nu=4, phi=30); lower accuracy")

    parser = argparse.ArgumentParser(prog="rbm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("constants", parents=[common, phys], help="saddle-point constants")

    p = sub.add_parser("dos", parents=[common, phys, grid], help="transfer-operator DOS")
    p.add_argument("--mem-budget", dest="mem_budget", type=int, help="bytes")

    p = sub.add_parser("sweep", parents=[common, phys, grid], help="DOS over E and W lists")
    p.add_argument("--mem-budget", dest="mem_budget", type=int)

    p = sub.add_parser("mc", parents=[common, phys], help="Monte-Carlo Stieltjes transform")
    p.add_argument("--eps", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--hist", action="store_const", const=True,
                   help="emit the eigenvalue histogram instead")
    p.add_argument("--bins", type=int)

    p = sub.add_parser("spectrum", parents=[common, phys, grid], help="top eigenvalues")
    p.add_argument("--top", type=int)
    p.add_argument("--krylov", type=int)

    sub.add_parser("oracle", parents=[common, phys, grid], help="n=1,2 field integrals")

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--quick", action="store_const", const=True)
    p.add_argument("--only", help="comma list of criterion numbers")
    p.add_argument("--flip-ell-sign", action="store_true",
                   help="mutation test: use the wrong pairing sign")
    return parser


COMMANDS = {"constants": cmd_constants, "dos": cmd_dos, "sweep": cmd_sweep, "mc": cmd_mc,
            "spectrum": cmd_spectrum, "oracle": cmd_oracle}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        if args.command == "verify":
            only = [int(x) for x in args.only.split(",")] if args.only else None
            return cmd_verify(cfg, only, args.flip_ell_sign)
        return COMMANDS[args.command](cfg)
    except spectral.SpectralConvergenceError as exc:
        print(f"rbm: non-convergence: {exc}", file=sys.stderr)
        return 3
    except (ValueError, transfer.MemoryBudgetError, OSError) as exc:
        print(f"rbm: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
