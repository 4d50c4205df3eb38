"""JSON configuration for systems, traces and observables.

A config document looks like::

    {"schema": "villadsen-config/1",
     "seed_algebra": {"block_dims": [2, 3]},
     "levels": [{"n": [1], "theta": [[2]]}, {"theta": [[4]]}, {}],
     "tail_rule": {"thetas": [[[2]]], "eval_counts": [[[1]]]},
     "partitions": {"1": [[[[1], [2]]]]},
     "eval_counts": [[[1]], [[1]]],
     "X_size": 2,
     "rng_seed": 0}

Only ``levels`` is required. ``n`` may be omitted after the first level, in
which case unitality fills it in; when given it is checked. Multiplicities
are JSON integers; rationals in trace and observable files are ``"p/q"``
strings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import jsonschema

from .af_intertwining import AFVilladsenSystem, validate_af
from .dimension_system import DimensionSystem, LevelSpec, TailRule, ValidationReport, validate
from .partition_scheme import PartitionScheme, validate_partition
from .rationals import as_matrix, push
from .trace_tower import SeedAlgebra

CONFIG_SCHEMA_ID = "villadsen-config/1"

_matrix = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["levels"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": CONFIG_SCHEMA_ID},
        "seed_algebra": {
            "type": "object",
            "required": ["block_dims"],
            "additionalProperties": False,
            "properties": {"block_dims": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}}},
        },
        "levels": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "n": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
                    "theta": _matrix,
                },
            },
        },
        "tail_rule": {
            "type": "object",
            "required": ["thetas"],
            "additionalProperties": False,
            "properties": {
                "thetas": {"type": "array", "minItems": 1, "items": _matrix},
                "eval_counts": {"type": "array", "minItems": 1, "items": _matrix},
            },
        },
        "partitions": {
            "type": "object",
            "patternProperties": {"^[1-9][0-9]*$": {"type": "array"}},
            "additionalProperties": False,
        },
        "eval_counts": {"type": "array", "items": _matrix},
        "eval_points": {
            "type": "object",
            "patternProperties": {"^[1-9][0-9]*$": {"type": "array"}},
            "additionalProperties": False,
        },
        "X_size": {"type": "integer", "minimum": 2},
        "rng_seed": {"type": "integer"},
    },
}


class ConfigError(ValueError):
    """Schema or consistency errors, each as (path, message)."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{p}: {m}" for p, m in errors))


@dataclass
class SystemConfig:
    system: DimensionSystem
    seed: Optional[SeedAlgebra] = None
    partitions: dict[int, PartitionScheme] = field(default_factory=dict)
    eval_counts: tuple = ()
    eval_points: Optional[dict] = None
    x_size: Optional[int] = None
    rng_seed: int = 0
    validation: ValidationReport = field(default_factory=ValidationReport)

    @property
    def af_mode(self) -> bool:
        tail = self.system.tail_rule
        return bool(self.eval_counts) or self.x_size is not None or (tail is not None and tail.eval_counts is not None)

    def af_system(self) -> AFVilladsenSystem:
        return AFVilladsenSystem(self.system, tuple(self.eval_counts), self.x_size or 2, self.eval_points)

    def to_dict(self) -> dict:
        """Normal form: every level lists n, the last explicit level has no theta."""
        out: dict[str, Any] = {"schema": CONFIG_SCHEMA_ID}
        if self.seed is not None:
            out["seed_algebra"] = {"block_dims": list(self.seed.block_dims)}
        levels = []
        for lv in self.system.levels:
            entry: dict[str, Any] = {"n": list(lv.n)}
            if lv.theta is not None:
                entry["theta"] = [list(r) for r in lv.theta]
            levels.append(entry)
        out["levels"] = levels
        tail = self.system.tail_rule
        if tail is not None:
            out["tail_rule"] = {"thetas": [[list(r) for r in th] for th in tail.thetas]}
            if tail.eval_counts is not None:
                out["tail_rule"]["eval_counts"] = [[list(r) for r in e] for e in tail.eval_counts]
        if self.partitions:
            out["partitions"] = {str(i): p.to_lists() for i, p in sorted(self.partitions.items())}
        if self.eval_counts:
            out["eval_counts"] = [[list(r) for r in e] for e in self.eval_counts]
        if self.eval_points:
            out["eval_points"] = {
                str(i): [[[list(w) for w in ws] for ws in row] for row in pts]
                for i, pts in sorted(self.eval_points.items())
            }
        if self.x_size is not None:
            out["X_size"] = self.x_size
        out["rng_seed"] = self.rng_seed
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def _build_system(doc: dict, errors: list[tuple[str, str]]) -> Optional[DimensionSystem]:
    raw = doc["levels"]
    if "n" not in raw[0]:
        errors.append(("$.levels[0].n", "the first level must give its order unit n"))
        return None
    levels = []
    n = tuple(raw[0]["n"])
    for idx, lv in enumerate(raw):
        if "n" in lv:
            n = tuple(lv["n"])
        theta = as_matrix(lv["theta"]) if "theta" in lv else None
        if theta is None and idx < len(raw) - 1:
            errors.append((f"$.levels[{idx}].theta", "only the last level may omit theta"))
            return None
        levels.append(LevelSpec(n, theta))
        if theta is not None:
            if len(theta) != len(n):
                # shape problems are reported by validate; keep the declared n going
                n = tuple(1 for _ in theta[0])
            else:
                n = push(theta, n)
    if levels[-1].theta is not None:
        levels.append(LevelSpec(n, None))
    tail = None
    if "tail_rule" in doc:
        tr = doc["tail_rule"]
        tail = TailRule(
            tuple(as_matrix(t) for t in tr["thetas"]),
            tuple(as_matrix(e) for e in tr["eval_counts"]) if "eval_counts" in tr else None,
        )
    return DimensionSystem(tuple(levels), tail)


def parse_config(document: str | bytes | dict) -> SystemConfig:
    """Parse and fully validate a config; raise ConfigError with paths on failure."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError([("$", f"not valid JSON: {exc}")]) from exc
    else:
        doc = document
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = [(_path(e), e.message) for e in sorted(validator.iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])]
    if errors:
        raise ConfigError(errors)
    system = _build_system(doc, errors)
    if system is None:
        raise ConfigError(errors)
    report = validate(system)
    for v in report.violations:
        if v.kind == "tail" or (v.coords and v.coords[0] > len(system.levels)):
            where = "$.tail_rule"
        elif v.coords:
            where = f"$.levels[{v.coords[0] - 1}]"
        else:
            where = "$.levels"
        errors.append((where, f"{v.kind}: {v.message}"))
    if errors:
        raise ConfigError(errors)

    partitions = {}
    for key, data in doc.get("partitions", {}).items():
        i = int(key)
        try:
            scheme = PartitionScheme.from_lists(i, data)
        except (TypeError, ValueError) as exc:
            errors.append((f"$.partitions.{key}", f"malformed blocks: {exc}"))
            continue
        if not system.has_level(i + 1):
            errors.append((f"$.partitions.{key}", f"level {i} has no connecting map"))
            continue
        prep = validate_partition(scheme, system, i)
        errors.extend((f"$.partitions.{key}", f"{v.kind}: {v.message}") for v in prep.violations)
        partitions[i] = scheme

    eval_points = None
    if "eval_points" in doc:
        eval_points = {
            int(k): [[[tuple(w) for w in ws] for ws in row] for row in pts] for k, pts in doc["eval_points"].items()
        }
    cfg = SystemConfig(
        system=system,
        seed=SeedAlgebra(tuple(doc["seed_algebra"]["block_dims"])) if "seed_algebra" in doc else None,
        partitions=partitions,
        eval_counts=tuple(as_matrix(e) for e in doc.get("eval_counts", [])),
        eval_points=eval_points,
        x_size=doc.get("X_size"),
        rng_seed=doc.get("rng_seed", 0),
        validation=report,
    )
    if cfg.af_mode:
        arep = validate_af(cfg.af_system())
        errors.extend((f"$.{v.kind}{list(v.coords)}", v.message) for v in arep.violations)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path: str) -> SystemConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
