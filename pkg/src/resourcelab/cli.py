"""Command-line driver.

Exit codes: 0 success, 1 configuration or precondition error, 2 a
verification check failed.
"""

import argparse
import configparser
import json
import logging
import math
import os
import sys

import numpy as np

from . import arng, distillation, freesets, io, presets, rates, selftest
from .config import DEFAULT, get_profile, tolerances_from_mapping
from .errors import ResourceLabError, UnsupportedFreeSet
from .quantum import FlaggedIsotropicParams

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2

log = logging.getLogger("resourcelab")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# keys accepted per config-file section; values are the parser dest names
SECTION_KEYS = {
    "global": {"seed", "format", "out", "tol_profile"},
    "distill": {"params", "chain"},
    "measure": {"state"},
    "thm1": {"source", "target", "n_max", "rate", "chi", "eps_ceiling", "p_floor", "reversibility"},
    "selftest": {"only"},
}
BUILTIN = {"seed": 0, "format": "csv", "out": None, "tol_profile": "default", "n_max": 10, "chi": 0.3,
           "eps_ceiling": 0.05, "p_floor": 0.3, "rate": None, "reversibility": False, "chain": "[]",
           "only": None}
CASTS = {"seed": int, "n_max": int, "rate": float, "chi": float, "eps_ceiling": float, "p_floor": float,
         "reversibility": lambda s: s.strip().lower() in ("1", "true", "yes", "on")}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for randomised checks (default 0)")
    common.add_argument("--out", default=None, help="output file (or directory for thm1)")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="table format (default csv)")
    common.add_argument("--tol-profile", dest="tol_profile", default=None, help="default, strict or loose")
    common.add_argument("--config", default=None, help="INI file; command-line flags take precedence")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="resourcelab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("distill", parents=[common], help="flagged-isotropic distillation calculus")
    p.add_argument("--params", default=None, help="m,eps,delta")
    p.add_argument("--chain", default=None, help='JSON list, e.g. [{"kind":"type2","k":1}]')
    p.add_argument("--chain-file", dest="chain_file", default=None)

    p = sub.add_parser("measure", parents=[common], help="resource measures of a state")
    p.add_argument("--state", default=None, help="preset name or JSON file")

    p = sub.add_parser("thm1", parents=[common], help="probabilistic conversion pipeline and rates")
    p.add_argument("--source", default=None)
    p.add_argument("--target", default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--rate", type=float, default=None, help="fixed rate for the record table")
    p.add_argument("--chi", type=float, default=None)
    p.add_argument("--eps-ceiling", dest="eps_ceiling", type=float, default=None)
    p.add_argument("--p-floor", dest="p_floor", type=float, default=None)
    p.add_argument("--reversibility", action="store_true", default=None)

    p = sub.add_parser("selftest", parents=[common], help="run the invariant checks")
    p.add_argument("--list", action="store_true", help="print check names and exit")
    p.add_argument("--only", action="append", default=None, help="run only the named check")
    return parser


def _read_config(path):
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    sections = {}
    for name in cp.sections():
        if name != "tolerances" and name not in SECTION_KEYS:
            raise ConfigError(f"unknown config section [{name}]")
        items = {k.replace("-", "_"): v for k, v in cp.items(name)}
        allowed = SECTION_KEYS.get(name)
        if allowed is not None:
            extra = set(items) - allowed
            if extra:
                raise ConfigError(f"unknown keys {sorted(extra)} in [{name}]")
        sections[name] = items
    return sections


def resolve(args):
    """Merge flags, config file and built-in defaults (in that order)."""
    sections = _read_config(args.config) if args.config else {}
    merged = {}
    for section in ("global", args.command):
        for key in SECTION_KEYS.get(section, ()):
            flag = getattr(args, key, None)
            if flag is not None:
                merged[key] = flag
            elif key in sections.get(section, {}):
                raw = sections[section][key]
                try:
                    merged[key] = CASTS.get(key, str)(raw)
                except ValueError:
                    raise ConfigError(f"bad value {raw!r} for {key}") from None
            else:
                merged[key] = BUILTIN.get(key)
    if merged["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {merged['format']!r}")
    try:
        base = get_profile(merged["tol_profile"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    merged["tolerance_overrides"] = sections.get("tolerances", {})
    merged["base_tolerances"] = base
    return merged


def _tolerances(cfg):
    try:
        return tolerances_from_mapping(cfg["base_tolerances"], cfg["tolerance_overrides"]).validate()
    except ValueError as exc:
        raise ConfigError(f"tolerance configuration: {exc}") from None


def _emit(cfg, text):
    if cfg["out"]:
        io.write_text(cfg["out"], text)
    else:
        sys.stdout.write(text)


# -- commands ------------------------------------------------------------------


DISTILL_COLUMNS = ("step", "kind", "arg", "m", "eps", "delta", "eps_plus_delta", "invariant", "change",
                   "change_bound", "kraus_residual")


def cmd_distill(cfg, args):
    if not cfg["params"]:
        raise ConfigError("distill needs --params m,eps,delta")
    parts = cfg["params"].split(",")
    if len(parts) != 3:
        raise ConfigError("--params must be m,eps,delta")
    try:
        p0 = FlaggedIsotropicParams(int(parts[0]), float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"bad --params: {exc}") from None
    text = cfg["chain"]
    if getattr(args, "chain_file", None):
        try:
            with open(args.chain_file, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read chain file: {exc}") from None
    chain = distillation.load_chain(text)
    tol = _tolerances(cfg)
    p = p0
    for i, step in enumerate(chain, start=1):
        if step.kind == "type2" and step.k >= p.m:
            raise ConfigError(f"step {i} ({json.dumps(step.to_dict())}): k={step.k} must be below m={p.m}")
        p = distillation.distill_closed_form(p, step)
    rows = []
    failed = False
    p = p0
    for row in distillation.invariant_track(chain, p0):
        out = row.row()
        if row.index == 0:
            out.update(kind="input", arg="")
        else:
            step = chain[row.index - 1]
            out.update(kind=step.kind, arg=step.lam if step.kind == "type1" else step.k)
            if abs(row.change) > row.change_bound + 1e-15:
                failed = True
            if p.m <= 4:
                res = distillation.kraus_residual(p, step)
                out["kraus_residual"] = res
                failed = failed or res > 1e-10
            p = row.params
        rows.append(out)
    _emit(cfg, io.dumps_table(rows, DISTILL_COLUMNS, cfg["format"]))
    return EXIT_VERIFY if failed else EXIT_OK


MEASURE_COLUMNS = ("state", "family", "dmax", "dmax_lower", "gap", "robustness", "relent", "decomposition_residual",
                   "converged")


def cmd_measure(cfg, args):
    if not cfg["state"]:
        raise ConfigError("measure needs --state")
    tol = _tolerances(cfg)
    rho, F = presets.load_state(cfg["state"], tol)
    kwargs = {"seed": cfg["seed"]} if isinstance(F, freesets.IncoherentFreeSet) else {}
    res = F.dmax(rho, strict=False, tol=tol, **kwargs)
    try:
        relent = F.relent(rho)
    except UnsupportedFreeSet:
        relent = None
    if res.lam > 1.0 + tol.free_lambda:
        pi = (res.lam * res.sigma - rho) / (res.lam - 1.0)
        resid = float(np.max(np.abs(rho + (res.lam - 1.0) * pi - res.lam * res.sigma)))
    else:
        resid = 0.0
    row = {"state": cfg["state"], "family": repr(F), "dmax": res.dmax, "dmax_lower": math.log2(res.lower),
           "gap": res.gap, "robustness": res.robustness, "relent": relent, "decomposition_residual": resid,
           "converged": res.converged}
    _emit(cfg, io.dumps_table([row], MEASURE_COLUMNS, cfg["format"]))
    return EXIT_OK if res.converged else EXIT_CONFIG


def cmd_thm1(cfg, args):
    for key in ("source", "target"):
        if not cfg[key]:
            raise ConfigError(f"thm1 needs --{key}")
    tol = _tolerances(cfg)
    rho, F_in = presets.load_state(cfg["source"], tol)
    omega, F_out = presets.load_state(cfg["target"], tol)
    if not isinstance(F_in, freesets.IncoherentFreeSet) or not isinstance(F_out, freesets.IncoherentFreeSet):
        raise ConfigError("thm1 runs on incoherent-family states only")
    n_max = cfg["n_max"]
    if n_max < 1:
        raise ConfigError("--n-max must be positive")
    pipe = arng.ArngPipeline(rho, omega, chi=cfg["chi"], tol=tol)
    rate = cfg["rate"] if cfg["rate"] is not None else pipe.theory_ratio - cfg["chi"]
    if rate <= 0:
        raise ConfigError(f"rate {rate} must be positive")
    records, skipped = [], []
    for n in range(1, n_max + 1):
        k = arng.target_copies(rate, n)
        if k < 1:
            skipped.append({"n": n, "reason": "no target copies"})
            continue
        try:
            records.append(pipe.run_k(n, k))
        except ResourceLabError as exc:
            skipped.append({"n": n, "reason": f"{type(exc).__name__}: {exc}"})
    slack = tol.bound_slack
    violations = [r.n for r in records if not r.bounds_hold(slack)]
    hier = rates.hierarchy_check(records, slack)
    n0, last_mu = arng.mu_decay(records) if records else (None, None)
    summary = {
        "source": cfg["source"], "target": cfg["target"], "rate": rate, "chi": cfg["chi"], "n_max": n_max,
        "theory_ratio": pipe.theory_ratio, "relent_source": pipe.relent_in, "relent_target": pipe.relent_out,
        "bound_violations": violations, "hierarchy_ok": hier.ok, "hierarchy_min_slack": hier.min_slack,
        "mu_nonincreasing_from": n0, "last_mu": last_mu, "skipped": skipped,
    }
    est_kwargs = dict(n_max=n_max, eps_ceiling=cfg["eps_ceiling"], p_floor=cfg["p_floor"], chi=cfg["chi"], tol=tol)
    if cfg["reversibility"]:
        summary["reversibility"] = rates.reversibility_experiment(rho, omega, **est_kwargs).to_dict()
    else:
        summary["rate_estimate"] = rates.estimate_probabilistic_rate(rho, omega, pipeline=pipe, **est_kwargs).to_dict()
    rows = [r.row() for r in records]
    if cfg["out"]:
        os.makedirs(cfg["out"], exist_ok=True)
        ext = cfg["format"]
        io.write_text(os.path.join(cfg["out"], f"records.{ext}"), io.dumps_table(rows, arng.RECORD_COLUMNS, ext))
        io.write_text(os.path.join(cfg["out"], "summary.json"), io.dumps_json(summary))
    elif cfg["format"] == "json":
        sys.stdout.write(io.dumps_json({"records": rows, "summary": summary}))
    else:
        sys.stdout.write(io.dumps_csv(rows, arng.RECORD_COLUMNS))
    return EXIT_VERIFY if violations or not hier.ok else EXIT_OK


def cmd_selftest(cfg, args):
    if args.list:
        sys.stdout.write("".join(name + "\n" for name in selftest.CHECKS))
        return EXIT_OK
    names = cfg["only"]
    if isinstance(names, str):
        names = [s.strip() for s in names.split(",") if s.strip()]
    if names:
        unknown = set(names) - set(selftest.CHECKS)
        if unknown:
            raise ConfigError(f"unknown checks {sorted(unknown)}")
    try:
        tol = tolerances_from_mapping(cfg["base_tolerances"], cfg["tolerance_overrides"])
        load_error = None
    except (ValueError, TypeError) as exc:
        tol, load_error = DEFAULT, str(exc)
    if load_error:
        results = [selftest.CheckResult("config.tolerances", False, load_error)]
        results += [selftest.CheckResult(n, False, "skipped: invalid tolerances")
                    for n in selftest.CHECKS if n != "config.tolerances" and (not names or n in names)]
    else:
        results = selftest.run(tol, seed=cfg["seed"], names=names)
    rows = [{"check": r.name, "status": "PASS" if r.ok else "FAIL", "detail": r.detail} for r in results]
    if cfg["format"] == "json":
        _emit(cfg, io.dumps_table(rows, ("check", "status", "detail"), "json"))
    else:
        width = max(len(r["check"]) for r in rows)
        _emit(cfg, "".join(f"{r['status']}  {r['check']:<{width}}  {r['detail']}\n" for r in rows))
    return EXIT_OK if all(r.ok for r in results) else EXIT_VERIFY


COMMANDS = {"distill": cmd_distill, "measure": cmd_measure, "thm1": cmd_thm1, "selftest": cmd_selftest}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
