"""Command line front end: every command writes one JSON report.

Exit codes: 0 OK/Pass, 1 Fail verdict, 2 input error, 3 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
import time
from fractions import Fraction
from typing import Optional, Sequence

from . import af_intertwining as afi
from .config import ConfigError, SystemConfig, parse_config
from .dimension_system import (
    LevelOutOfRange,
    Simplicity,
    UniqueTrace,
    compose,
    is_infinite_dimensional,
    simplicity_verdict,
    trace_pullback_matrix,
    unique_trace_diagnostic,
)
from .measures import DenseCapExceeded, measure_from_dict
from .observables import Observable, indicator
from .partition_scheme import (
    canonical_partition,
    intertwiner,
    random_partition,
    random_permutations,
    validate_partition,
    verify_commutation,
)
from .poulsen_density import HorizonExceeded, Neighborhood, certify, recheck_certificate
from .rationals import fmt_mat, parse_rational, push
from .trace_tower import (
    AFTrace,
    TraceTower,
    consistency_failures,
    extend_af_trace,
    fiber_check,
    random_af_trace,
    random_measure,
)

REPORT_SCHEMA_ID = "villadsen-report/1"

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3

COMMANDS = (
    "validate",
    "compose",
    "simplicity",
    "unique-trace",
    "permute-partitions",
    "extend-trace",
    "poulsen-cert",
    "intertwine",
)


class InputError(ValueError):
    pass


def digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _read(path: str, digests: dict, key: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {key} file {path}: {exc}") from exc
    digests[key] = digest(data)
    return data


def _json(data: bytes, what: str) -> dict:
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} is not valid JSON: {exc}") from exc


def _require(flags: dict, *names: str) -> None:
    missing = [n for n in names if flags.get(n) is None]
    if missing:
        raise InputError(f"missing required flags: {', '.join('--' + m.replace('_', '-') for m in missing)}")


def _alphabet(cfg: SystemConfig) -> int:
    return cfg.seed.m if cfg.seed is not None else 2


# -- trace and observable documents ------------------------------------------------------------


def load_af(doc: dict, system) -> AFTrace:
    if "alphas" in doc:
        return AFTrace(tuple(tuple(parse_rational(x) for x in a) for a in doc["alphas"]), int(doc.get("start", 1)))
    if "top" in doc:
        return AFTrace.from_top(system, [parse_rational(x) for x in doc["top"]], int(doc["top_level"]))
    raise InputError("af entry needs 'alphas' or 'top' with 'top_level'")


def load_observables(doc: dict, cfg: SystemConfig) -> list[list[Observable]]:
    """Either explicit groups of observables or the 'indicators' shorthand."""
    if "indicators" in doc:
        level = int(doc["indicators"]["level"])
        m = _alphabet(cfg)
        groups = []
        for k, nk in enumerate(cfg.system.n(level)):
            for c in range(1, nk + 1):
                for a in range(1, m + 1):
                    groups.append([indicator(level, k + 1, nk, m, c, a)])
        return groups
    return [[Observable.from_dict(o) for o in g] for g in doc["groups"]]


# -- commands -------------------------------------------------------------------------------


def cmd_validate(cfg: SystemConfig, flags: dict, rng: random.Random):
    system = cfg.system
    partitions = {
        str(i): validate_partition(p, system, i).to_dict() for i, p in sorted(cfg.partitions.items())
    }
    ok = cfg.validation.ok and all(p["ok"] for p in partitions.values())
    top = system.max_level or system.explicit_theta_count + 1
    res = {
        "system": cfg.validation.to_dict(),
        "partitions": partitions,
        "order_units": [list(system.n(i)) for i in range(1, top + 1)],
        "infinite_dimensional": is_infinite_dimensional(system),
    }
    if cfg.af_mode:
        arep = afi.validate_af(cfg.af_system())
        res["af_villadsen"] = arep.to_dict()
        ok = ok and arep.ok
    return res, ("OK" if ok else "Fail"), ok


def cmd_compose(cfg: SystemConfig, flags: dict, rng: random.Random):
    _require(flags, "from_level", "to_level")
    i, j = flags["from_level"], flags["to_level"]
    if j <= i:
        raise InputError("--to must exceed --from")
    t = j - i
    theta = compose(cfg.system, i, t)
    pull = trace_pullback_matrix(cfg.system, i, t)
    unit_ok = push(theta, cfg.system.n(i)) == cfg.system.n(j)
    res = {
        "from": i,
        "to": j,
        "theta": [list(r) for r in theta],
        "pullback_matrix": fmt_mat(pull.entries),
        "order_unit_identity": unit_ok,
        "column_stochastic": pull.is_stochastic(),
    }
    ok = unit_ok and pull.is_stochastic()
    return res, ("OK" if ok else "Fail"), ok


def cmd_simplicity(cfg: SystemConfig, flags: dict, rng: random.Random):
    _require(flags, "horizon")
    rep = simplicity_verdict(cfg.system, flags["horizon"])
    ok = rep.verdict in (Simplicity.SIMPLE, Simplicity.SIMPLE_PERIODIC)
    return rep.to_dict(), rep.verdict.value, ok


def cmd_unique_trace(cfg: SystemConfig, flags: dict, rng: random.Random):
    _require(flags, "horizon")
    tol = parse_rational(flags.get("tol") or "1/100")
    rep = unique_trace_diagnostic(cfg.system, flags["horizon"], tol)
    ok = rep.verdict in (UniqueTrace.LIKELY, UniqueTrace.PERIODIC)
    return rep.to_dict(), rep.verdict.value, ok


def cmd_permute_partitions(cfg: SystemConfig, flags: dict, rng: random.Random):
    system = cfg.system
    last = flags.get("levels") or max(system.explicit_theta_count, 1)
    trials = flags.get("trials") or 1
    rows, ok = [], True
    for i in range(1, last + 1):
        for trial in range(trials):
            p = cfg.partitions.get(i) or canonical_partition(system, i)
            q = random_partition(system, i, rng)
            sigma = random_permutations(system.n(i), rng)
            gamma = intertwiner(p, q, sigma, system, i)
            commutes = verify_commutation(p, q, sigma, gamma, system, i=i)
            ok &= commutes
            rows.append(
                {
                    "level": i,
                    "trial": trial + 1,
                    "P": p.to_lists(),
                    "Q": q.to_lists(),
                    "sigma": [list(s) for s in sigma],
                    "gamma": [list(g) for g in gamma],
                    "commutes": commutes,
                }
            )
    return {"squares": rows}, ("OK" if ok else "Fail"), ok


def cmd_extend_trace(cfg: SystemConfig, flags: dict, rng: random.Random):
    system = cfg.system
    m = _alphabet(cfg)
    if flags.get("trace_doc") is not None:
        doc = flags["trace_doc"]
        af = load_af(doc["af"], system)
        seeds = [measure_from_dict(x) for x in doc["seed_measures"]] if "seed_measures" in doc else None
        source = "file"
    else:
        depth = flags.get("depth") or (system.max_level or 4)
        af = random_af_trace(rng, system, depth)
        seeds = [random_measure(rng, nk, m, max_atoms=8) for nk in system.n(af.start)]
        source = "random"
    tower = extend_af_trace(system, af, seeds, m=m)
    bad = consistency_failures(system, tower)
    fib = fiber_check(tower, af)
    ok = not bad and fib
    res = {
        "source": source,
        "af": af.to_dict(),
        "tower": tower.to_dict(),
        "inconsistent_levels": bad,
        "fiber_check": fib,
    }
    return res, ("OK" if ok else "Fail"), ok


def cmd_poulsen_cert(cfg: SystemConfig, flags: dict, rng: random.Random):
    _require(flags, "trace_doc", "observables_doc", "epsilon", "horizon")
    system = cfg.system
    tdoc = flags["trace_doc"]
    tower = TraceTower.from_dict(tdoc["tower"])
    groups = load_observables(flags["observables_doc"], cfg)
    nbhd = Neighborhood(parse_rational(flags["epsilon"]), groups)
    base, horizon = nbhd.level, flags["horizon"]
    top = base + horizon if system.max_level is None else min(base + horizon, system.max_level)
    if "af" in tdoc:
        af = load_af(tdoc["af"], system)
    elif all(system.j(i) == 1 for i in range(1, top + 1)):
        # single-summand levels have the unique scalar tuple (1)
        af = AFTrace(tuple((Fraction(1),) for _ in range(top)), 1)
    else:
        raise InputError("trace file needs an 'af' entry reaching the certificate depth")
    cert = certify(system, tower, nbhd, horizon, af)
    data = cert.to_dict()
    reproduced = recheck_certificate(data, system, tower.level(base), nbhd)
    ok = cert.passed and reproduced
    return {"certificate": data, "recheck_reproduced": reproduced}, ("Pass" if ok else "Fail"), ok


def cmd_intertwine(cfg: SystemConfig, flags: dict, rng: random.Random):
    _require(flags, "depth")
    sys_ = cfg.af_system()
    r_cap = parse_rational(flags["r_cap"]) if flags.get("r_cap") else None
    tol = parse_rational(flags.get("tol") or "1/100")
    rep = afi.intertwining_report(
        sys_,
        flags["depth"],
        flags.get("mode") or "auto",
        r_cap=r_cap,
        tol=tol,
        allow_constant_in_cone=bool(flags.get("allow_constant_in_cone")),
    )
    ok = rep.verdicts["intertwining_bounds_verified"]
    return rep.to_dict(), ("Pass" if ok else "Fail"), ok


HANDLERS = {
    "validate": cmd_validate,
    "compose": cmd_compose,
    "simplicity": cmd_simplicity,
    "unique-trace": cmd_unique_trace,
    "permute-partitions": cmd_permute_partitions,
    "extend-trace": cmd_extend_trace,
    "poulsen-cert": cmd_poulsen_cert,
    "intertwine": cmd_intertwine,
}


def run_command(
    cfg: SystemConfig,
    command: str,
    flags: Optional[dict] = None,
    digests: Optional[dict] = None,
) -> tuple[dict, int]:
    """Run one command and return (report, exit code)."""
    if command not in HANDLERS:
        raise InputError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    flags = dict(flags or {})
    seed = flags.get("rng_seed")
    seed = cfg.rng_seed if seed is None else seed
    rng = random.Random(seed)
    start = time.perf_counter()
    echo = {k: v for k, v in sorted(flags.items()) if not k.endswith("_doc") and v is not None}
    report = {
        "schema": REPORT_SCHEMA_ID,
        "command": command,
        "flags": echo,
        "input_digests": dict(sorted((digests or {}).items())),
        "rng_seed": seed,
    }
    try:
        results, verdict, ok = HANDLERS[command](cfg, flags, rng)
        code = EXIT_OK if ok else EXIT_FAIL
    except (HorizonExceeded, afi.DepthExhausted, afi.ModeMismatch) as exc:
        results, verdict, code = {"error": f"{type(exc).__name__}: {exc}"}, "Fail", EXIT_FAIL
    except (DenseCapExceeded, afi.FunctionCapExceeded) as exc:
        results, verdict, code = {"error": f"{type(exc).__name__}: {exc}"}, "ResourceCap", EXIT_CAP
    except (InputError, LevelOutOfRange, KeyError, ValueError) as exc:
        results, verdict, code = {"error": f"{type(exc).__name__}: {exc}"}, "InputError", EXIT_INPUT
    report["results"] = results
    report["verdict"] = verdict
    report["exit_code"] = code
    report["wall_time_s"] = round(time.perf_counter() - start, 6)
    return report, code


def results_bytes(report: dict) -> bytes:
    """Canonical bytes of the deterministic part of a report."""
    return json.dumps(report["results"], sort_keys=True, separators=(",", ":")).encode()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="villadsen", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--system", required=True, help="config JSON file")
        p.add_argument("--rng-seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--out", default=None, help="write the report here instead of stdout")
        return p

    add("validate", "check structural invariants")
    p = add("compose", "composed multiplicities and trace pullback")
    p.add_argument("--from", dest="from_level", type=int, required=True)
    p.add_argument("--to", dest="to_level", type=int, required=True)
    for name in ("simplicity", "unique-trace"):
        p = add(name, f"{name} diagnostic within a horizon")
        p.add_argument("--horizon", type=int, required=True)
        if name == "unique-trace":
            p.add_argument("--tol", default="1/100")
    p = add("permute-partitions", "random permutation squares and their commutation check")
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--trials", type=int, default=1)
    p = add("extend-trace", "extend an AF trace to the full tower")
    p.add_argument("--trace", default=None, help="JSON with 'af' and optional 'seed_measures'")
    p.add_argument("--depth", type=int, default=None)
    p = add("poulsen-cert", "certify an extreme trace in a basic neighbourhood")
    p.add_argument("--trace", required=True)
    p.add_argument("--observables", required=True)
    p.add_argument("--epsilon", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p = add("intertwine", "approximate intertwining report for an AF-Villadsen system")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--mode", choices=("auto", "constant", "cone"), default="auto")
    p.add_argument("--r-cap", default=None)
    p.add_argument("--tol", default="1/100")
    p.add_argument("--allow-constant-in-cone", action="store_true")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "system", "out", "trace", "observables")}
    digests: dict = {}
    try:
        cfg = parse_config(_read(args.system, digests, "system"))
        if getattr(args, "trace", None):
            flags["trace_doc"] = _json(_read(args.trace, digests, "trace"), "trace file")
            flags["trace"] = args.trace
        if getattr(args, "observables", None):
            flags["observables_doc"] = _json(_read(args.observables, digests, "observables"), "observables file")
            flags["observables"] = args.observables
    except (ConfigError, InputError) as exc:
        errors = exc.errors if isinstance(exc, ConfigError) else [("$", str(exc))]
        report = {
            "schema": REPORT_SCHEMA_ID,
            "command": args.command,
            "input_digests": digests,
            "results": {"errors": [{"path": p, "message": m} for p, m in errors]},
            "verdict": "InputError",
            "exit_code": EXIT_INPUT,
        }
        code = EXIT_INPUT
    else:
        report, code = run_command(cfg, args.command, flags, digests)
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
