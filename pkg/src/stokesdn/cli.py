"""Command line interface.

    stokesdn dn apply   --eta F --psi F --K N [--d D] --out F
    stokesdn dn verify  --eta F [--seed S] [--tol T]
    stokesdn dn oracle  --phi F --eta F --K N --out-psi F --out-g F
    stokesdn stokes branch --k K --g G --eps-max E --eps-step H --K N --out-json F --out-csv F
    stokesdn stokes verify --branch F

Every subcommand accepts ``--config FILE`` (JSON object of option values);
explicit flags override the file, which overrides the defaults. Reports are
JSON on stdout (or ``--report FILE``) carrying ``schema_version``.

Exit codes: 0 success, 1 I/O or parse error, 2 surface guard violated,
3 Neumann series did not contract, 4 partial Stokes branch, 5 a check failed.
"""
import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import __version__
from . import analytic_spaces as asp
from .analytic_spaces import PeriodicFunction, grid_size
from .dirichlet_neumann import DNConfig, apply_dn, dn_oracle_manufactured, verify_suite
from .errors import GuardViolation, NoContraction, StokesDNError
from .stokes import (
    StokesBranch,
    StokesConfig,
    continue_branch,
    f_map,
    residual_norm,
)

SCHEMA_VERSION = "1"

EXIT_OK, EXIT_IO, EXIT_GUARD, EXIT_CONTRACTION, EXIT_PARTIAL, EXIT_CHECK = 0, 1, 2, 3, 4, 5

DEFAULTS = {
    "dn apply": {"d": 1, "neumann_tol": 1e-12, "neumann_max_iter": 200, "prune_tol": 1e-14},
    "dn verify": {"seed": 0, "tol": 1e-10, "K": None, "theta_index": None, "m": 0.7},
    "dn oracle": {"K": None},
    "stokes branch": {"k": 1, "g": 1.0, "K": 64, "eps_max": 0.05, "eps_step": 0.005},
    "stokes verify": {"tol": 1e-13},
}


class CLIError(Exception):
    def __init__(self, message, code=EXIT_IO):
        super().__init__(message)
        self.code = code


def dumps(obj):
    """Deterministic JSON; Python's float repr round-trips every double exactly."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"malformed JSON in {path}: {exc}") from exc


def write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise CLIError(f"cannot write {path}: {exc}") from exc


def read_function(path, K=None):
    data = read_json(path)
    try:
        u = PeriodicFunction.from_json_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise CLIError(f"invalid coefficient file {path}: {exc}") from exc
    return u if K is None else u.resize(K)


def resolve(args, command):
    """Merge defaults < config file < explicit flags into a dict."""
    opts = dict(DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        cfg = read_json(args.config)
        if not isinstance(cfg, dict):
            raise CLIError(f"config {args.config} must be a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in cfg.items()})
    for key, val in vars(args).items():
        if key in ("config", "func", "command") or val is None:
            continue
        opts[key] = val
    return opts


def emit(report, opts):
    report = {"schema_version": SCHEMA_VERSION, **report}
    text = dumps(report)
    if opts.get("report"):
        write_text(opts["report"], text)
    else:
        sys.stdout.write(text)


def _dn_config(opts, K, d):
    fields = DNConfig.__dataclass_fields__
    kw = {k: opts[k] for k in fields if k in opts and opts[k] is not None}
    kw.update(K=K, d=d)
    return DNConfig(**kw)


def cmd_dn_apply(args):
    opts = resolve(args, "dn apply")
    for key in ("eta", "psi", "K", "out"):
        if opts.get(key) is None:
            raise CLIError(f"missing --{key}")
    K, d = int(opts["K"]), int(opts["d"])
    eta, psi = read_function(opts["eta"], K), read_function(opts["psi"], K)
    if eta.d != d or psi.d != d:
        raise CLIError(f"input dimension does not match --d {d}")
    cfg = _dn_config(opts, K, d)
    G, rep = apply_dn(eta, psi, cfg, return_report=True)
    write_text(opts["out"], dumps(G.to_json_dict()))
    emit(
        {
            "command": "dn apply",
            "iterations": rep.iterations,
            "contraction_ratios": rep.ratios,
            "residual": rep.residual,
            "guard": rep.guard,
            "guard_margin": cfg.eta_smallness_guard - rep.guard,
            "series_terms": rep.series_terms,
        },
        opts,
    )
    return EXIT_OK


def _random_psi(rng, K, d, n_modes=4):
    modes = {}
    for _ in range(n_modes):
        k = tuple(int(v) for v in rng.integers(-min(K, 4), min(K, 4) + 1, size=d))
        if any(k):
            if not asp._lex_nonneg(k):
                k = tuple(-v for v in k)
            modes[k] = complex(rng.normal(), rng.normal())
    return PeriodicFunction.from_modes(modes, d, K)


def cmd_dn_verify(args):
    opts = resolve(args, "dn verify")
    if opts.get("eta") is None:
        raise CLIError("missing --eta")
    eta = read_function(opts["eta"])
    K = int(opts["K"]) if opts.get("K") else max(eta.K, 16)
    eta = eta.resize(K)
    cfg = _dn_config(opts, K, eta.d)
    rng = np.random.default_rng(int(opts["seed"]))
    psi1 = _random_psi(rng, K, eta.d)
    psi2 = _random_psi(rng, K, eta.d)
    N = grid_size(K)
    j = int(opts["theta_index"]) if opts.get("theta_index") is not None else int(rng.integers(1, N))
    theta = 2 * np.pi * j / N
    disc = verify_suite(eta, psi1, psi2, theta, float(opts["m"]), cfg)
    tol = float(opts["tol"])
    checks = {name: {"value": val, "pass": bool(abs(val) <= tol)} for name, val in disc.items()}
    ok = all(c["pass"] for c in checks.values())
    for name, c in checks.items():
        sys.stderr.write(f"{name:16s} {c['value']: .3e}  {'pass' if c['pass'] else 'FAIL'}\n")
    emit({"command": "dn verify", "seed": int(opts["seed"]), "theta": theta, "tol": tol,
          "checks": checks, "all_pass": ok}, opts)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_dn_oracle(args):
    opts = resolve(args, "dn oracle")
    for key in ("phi", "eta", "out_psi", "out_g"):
        if opts.get(key) is None:
            raise CLIError(f"missing --{key.replace('_', '-')}")
    phi, eta = read_function(opts["phi"]), read_function(opts["eta"])
    K = int(opts["K"]) if opts.get("K") else max(phi.K, eta.K)
    psi, g = dn_oracle_manufactured(phi.resize(K), eta.resize(K))
    write_text(opts["out_psi"], dumps(psi.to_json_dict()))
    write_text(opts["out_g"], dumps(g.to_json_dict()))
    emit({"command": "dn oracle", "K": K}, opts)
    return EXIT_OK


def _stokes_config(opts):
    fields = StokesConfig.__dataclass_fields__
    kw = {k: opts[k] for k in fields if k in opts and opts[k] is not None and k != "dn"}
    return StokesConfig(**kw)


def write_profiles_csv(path, branch, n=512):
    """``x,eta,psi`` of the largest-amplitude solution on an ``n``-point grid."""
    x, profiles = branch.profiles(n)
    eta, psi = profiles[-1] if profiles else (np.zeros(n), np.zeros(n))
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "eta", "psi"])
            for row in zip(x, eta, psi):
                w.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise CLIError(f"cannot write {path}: {exc}") from exc


def cmd_stokes_branch(args):
    opts = resolve(args, "stokes branch")
    for key in ("out_json", "out_csv"):
        if opts.get(key) is None:
            raise CLIError(f"missing --{key.replace('_', '-')}")
    cfg = _stokes_config(opts)
    k, g = int(opts["k"]), float(opts["g"])
    branch = continue_branch(float(opts["eps_max"]), float(opts["eps_step"]), k, g, cfg)
    write_text(opts["out_json"], dumps({"schema_version": SCHEMA_VERSION, **branch.to_json_dict(cfg)}))
    write_profiles_csv(opts["out_csv"], branch)
    table = [
        {"epsilon": s.epsilon, "c": s.c, "residual_norm": s.residual_norm,
         "sigma_estimate": s.sigma_estimate}
        for s in branch.solutions
    ]
    emit({"command": "stokes branch", "complete": branch.complete, "failure": branch.failure,
          "c_extrapolated": branch.c_extrapolated(), "solutions": table}, opts)
    return EXIT_OK if branch.complete else EXIT_PARTIAL


def cmd_stokes_verify(args):
    opts = resolve(args, "stokes verify")
    if opts.get("branch") is None:
        raise CLIError("missing --branch")
    data = read_json(opts["branch"])
    try:
        branch = StokesBranch.from_json_dict(data)
        raw = dict(data.get("config", {}))
        dn = DNConfig(**raw.pop("dn")) if "dn" in raw else None
        cfg = StokesConfig(**raw, dn=dn)
    except (KeyError, TypeError, ValueError) as exc:
        raise CLIError(f"invalid branch file: {exc}") from exc
    tol = float(opts["tol"])
    rows = []
    for s in branch.solutions:
        F1, F2 = f_map(s.pair, s.c, branch.g, cfg)
        rn = residual_norm(F1, F2)
        rows.append({"epsilon": s.epsilon, "stored": s.residual_norm, "recomputed": rn,
                     "pass": bool(abs(rn - s.residual_norm) <= tol)})
    ok = all(r["pass"] for r in rows)
    emit({"command": "stokes verify", "tol": tol, "solutions": rows, "all_pass": ok}, opts)
    return EXIT_OK if ok else EXIT_CHECK


def build_parser():
    p = argparse.ArgumentParser(prog="stokesdn", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    top = p.add_subparsers(dest="group", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file of option defaults")
        sp.add_argument("--report", help="write the JSON report here instead of stdout")

    dn = top.add_parser("dn", help="Dirichlet-Neumann operator").add_subparsers(dest="command", required=True)
    a = dn.add_parser("apply", help="compute G(eta) psi")
    common(a)
    a.add_argument("--eta")
    a.add_argument("--psi")
    a.add_argument("--K", type=int)
    a.add_argument("--d", type=int)
    a.add_argument("--out")
    a.add_argument("--neumann-tol", type=float)
    a.add_argument("--neumann-max-iter", type=int)
    a.add_argument("--prune-tol", type=float)
    a.set_defaults(func=cmd_dn_apply)

    v = dn.add_parser("verify", help="check the symmetry identities of G(eta)")
    common(v)
    v.add_argument("--eta")
    v.add_argument("--seed", type=int)
    v.add_argument("--tol", type=float)
    v.add_argument("--K", type=int)
    v.add_argument("--theta-index", type=int, help="shift by 2 pi j / N")
    v.add_argument("--m", type=float, help="vertical shift")
    v.set_defaults(func=cmd_dn_verify)

    o = dn.add_parser("oracle", help="manufactured (psi, G psi) pair")
    common(o)
    o.add_argument("--phi", help="coefficients c_k of Phi = sum c_k e^{|k|y} e^{ikx}")
    o.add_argument("--eta")
    o.add_argument("--K", type=int)
    o.add_argument("--out-psi")
    o.add_argument("--out-g")
    o.set_defaults(func=cmd_dn_oracle)

    st = top.add_parser("stokes", help="Stokes wave branches").add_subparsers(dest="command", required=True)
    b = st.add_parser("branch", help="continue a branch in amplitude")
    common(b)
    b.add_argument("--k", type=int)
    b.add_argument("--g", type=float)
    b.add_argument("--eps-max", type=float)
    b.add_argument("--eps-step", type=float)
    b.add_argument("--K", type=int)
    b.add_argument("--stokes-tol", type=float)
    b.add_argument("--out-json")
    b.add_argument("--out-csv")
    b.set_defaults(func=cmd_stokes_branch)

    sv = st.add_parser("verify", help="recompute stored branch residuals")
    common(sv)
    sv.add_argument("--branch")
    sv.add_argument("--tol", type=float)
    sv.set_defaults(func=cmd_stokes_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.command = f"{args.group} {args.command}"
    del args.group, args.verbose
    try:
        return args.func(args)
    except CLIError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code
    except GuardViolation as exc:
        sys.stderr.write(f"guard violation: {exc}\n")
        return EXIT_GUARD
    except NoContraction as exc:
        sys.stderr.write(f"no contraction: {exc}\n")
        return EXIT_CONTRACTION
    except (StokesDNError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
