"""Dimension-group data of a Bratteli diagram.

A system is a list of levels; level ``i`` (1-based) carries the order unit
``n_i`` (the matrix sizes of its summands) and the multiplicity matrix
``theta_i`` to level ``i + 1``. Matrices are oriented ``theta[k][l]`` with
``k`` the source summand and ``l`` the target summand. Levels past the
explicit list are generated from an optional periodic tail, with sizes fixed
by unitality ``n_{i+1,l} = sum_k theta_{i;k,l} n_{i,k}``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from .rationals import Matrix, QMatrix, as_matrix, identity, l1, matmul, pull, push


class LevelOutOfRange(IndexError):
    """Requested level is neither explicit nor generated by a tail rule."""


@dataclass(frozen=True)
class LevelSpec:
    n: tuple[int, ...]
    theta: Optional[Matrix] = None

    @property
    def j(self) -> int:
        return len(self.n)


@dataclass(frozen=True)
class TailRule:
    """Periodic continuation: the pattern of multiplicity matrices repeats forever.

    ``eval_counts`` is only read by the AF-Villadsen layer; when present it has
    the same period and shapes as ``thetas``.
    """

    thetas: tuple[Matrix, ...]
    eval_counts: Optional[tuple[Matrix, ...]] = None

    @property
    def period(self) -> int:
        return len(self.thetas)


@dataclass(frozen=True)
class Violation:
    kind: str
    coords: tuple[int, ...]
    message: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coords": list(self.coords), "message": self.message}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, coords: tuple[int, ...], message: str) -> None:
        self.violations.append(Violation(kind, tuple(coords), message))

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


@dataclass(frozen=True)
class DimensionSystem:
    levels: tuple[LevelSpec, ...]
    tail_rule: Optional[TailRule] = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @classmethod
    def from_thetas(
        cls,
        n1: Sequence[int],
        thetas: Sequence[Sequence[Sequence[int]]],
        tail_rule: Optional[TailRule] = None,
    ) -> "DimensionSystem":
        """Build the levels from the first order unit by unitality."""
        n = tuple(int(x) for x in n1)
        levels = []
        for th in thetas:
            th = as_matrix(th)
            levels.append(LevelSpec(n, th))
            n = push(th, n)
        levels.append(LevelSpec(n, None))
        return cls(tuple(levels), tail_rule)

    # -- level access ---------------------------------------------------------

    @property
    def explicit_theta_count(self) -> int:
        count = 0
        for lv in self.levels:
            if lv.theta is None:
                break
            count += 1
        return count

    @property
    def max_level(self) -> Optional[int]:
        """Deepest available level, or None when a tail rule makes it unbounded."""
        if self.tail_rule is not None:
            return None
        return max(len(self.levels), self.explicit_theta_count + 1)

    def has_level(self, i: int) -> bool:
        return i >= 1 and (self.max_level is None or i <= self.max_level)

    def theta(self, i: int) -> Matrix:
        if i < 1:
            raise LevelOutOfRange(f"level {i} < 1")
        q = self.explicit_theta_count
        if i <= q:
            return self.levels[i - 1].theta
        if self.tail_rule is None:
            raise LevelOutOfRange(f"no multiplicity matrix out of level {i} (no tail rule)")
        return self.tail_rule.thetas[(i - q - 1) % self.tail_rule.period]

    def tail_index(self, i: int) -> Optional[int]:
        """Position in the tail pattern used by theta(i), or None if explicit."""
        q = self.explicit_theta_count
        if i <= q or self.tail_rule is None:
            return None
        return (i - q - 1) % self.tail_rule.period

    def n(self, i: int) -> tuple[int, ...]:
        if i < 1:
            raise LevelOutOfRange(f"level {i} < 1")
        if i <= len(self.levels):
            return self.levels[i - 1].n
        key = ("n", i)
        if key not in self._cache:
            if not self.has_level(i):
                raise LevelOutOfRange(f"level {i} beyond the truncation")
            self._cache[key] = push(self.theta(i - 1), self.n(i - 1))
        return self._cache[key]

    def j(self, i: int) -> int:
        return len(self.n(i))

    # -- composition ----------------------------------------------------------

    def compose(self, i: int, t: int) -> Matrix:
        return compose(self, i, t)


def compose(system: DimensionSystem, i: int, t: int) -> Matrix:
    """Multiplicity matrix of the composed map from level i to level i + t."""
    if t < 1:
        raise ValueError("span t must be >= 1")
    key = ("compose", i, t)
    cache = system._cache
    if key not in cache:
        if t == 1:
            cache[key] = system.theta(i)
        else:
            cache[key] = matmul(compose(system, i, t - 1), system.theta(i + t - 1))
    return cache[key]


@dataclass(frozen=True)
class StochasticMatrix:
    """Pullback of scalar tuples from level i + t to level i.

    ``entries[k][l] = n_{i,k} theta_{i,i+t-1;k,l} / n_{i+t,l}``; every column
    (fixed ``l``) is a probability vector.
    """

    entries: QMatrix

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0]) if self.entries else 0

    def column(self, l: int) -> tuple[Fraction, ...]:
        return tuple(row[l] for row in self.entries)

    def columns(self) -> list[tuple[Fraction, ...]]:
        return [self.column(l) for l in range(self.shape[1])]

    def apply(self, target: Sequence) -> tuple[Fraction, ...]:
        return pull(self.entries, [Fraction(x) for x in target])

    def is_stochastic(self) -> bool:
        return all(0 <= x <= 1 for row in self.entries for x in row) and all(
            sum(c) == 1 for c in self.columns()
        )

    def __matmul__(self, other: "StochasticMatrix") -> "StochasticMatrix":
        return StochasticMatrix(matmul(self.entries, other.entries))


def trace_pullback_matrix(system: DimensionSystem, i: int, t: int) -> StochasticMatrix:
    theta = compose(system, i, t)
    n_src, n_tgt = system.n(i), system.n(i + t)
    return StochasticMatrix(
        tuple(
            tuple(Fraction(n_src[k] * theta[k][l], n_tgt[l]) for l in range(len(n_tgt)))
            for k in range(len(n_src))
        )
    )


# -- validation ---------------------------------------------------------------


def _check_theta(report: ValidationReport, i: int, theta, j_src: int, j_tgt: Optional[int]) -> bool:
    if len(theta) != j_src or any(len(row) != len(theta[0]) for row in theta):
        report.add("shape", (i,), f"theta_{i} is not a {j_src} x j' matrix")
        return False
    if j_tgt is not None and len(theta[0]) != j_tgt:
        report.add("shape", (i,), f"theta_{i} has {len(theta[0])} columns, level {i + 1} has {j_tgt} summands")
        return False
    good = True
    for k, row in enumerate(theta):
        for l, x in enumerate(row):
            if not isinstance(x, int) or x < 0:
                report.add("negative", (i, k + 1, l + 1), f"theta_{i}[{k + 1},{l + 1}] = {x} is not a nonnegative integer")
                good = False
        if all(x == 0 for x in row):
            report.add("injectivity", (i, k + 1), f"zero row {k + 1} of theta_{i}")
    for l in range(len(theta[0])):
        if all(theta[k][l] == 0 for k in range(len(theta))):
            report.add("zero_column", (i, l + 1), f"zero column {l + 1} of theta_{i}")
    return good


def validate(system: DimensionSystem) -> ValidationReport:
    """Collect every violated structural invariant; never raises."""
    report = ValidationReport()
    if not system.levels:
        report.add("empty", (), "system has no levels")
        return report
    for i, lv in enumerate(system.levels, start=1):
        for k, x in enumerate(lv.n):
            if not isinstance(x, int) or x <= 0:
                report.add("order_unit", (i, k + 1), f"n_{i},{k + 1} = {x} is not a positive integer")
        if not lv.n:
            report.add("order_unit", (i,), f"level {i} has no summands")
    seen_gap = False
    for i, lv in enumerate(system.levels, start=1):
        if lv.theta is None:
            seen_gap = True
            continue
        if seen_gap:
            report.add("theta_gap", (i,), f"theta_{i} given after a level without theta")
            continue
        nxt = system.levels[i].n if i < len(system.levels) else None
        shape_ok = _check_theta(report, i, lv.theta, lv.j, len(nxt) if nxt is not None else None)
        if shape_ok and nxt is not None:
            image = push(lv.theta, lv.n)
            for l, (got, want) in enumerate(zip(image, nxt)):
                if got != want:
                    report.add(
                        "unitality",
                        (i, l + 1),
                        f"unitality at ({i},{l + 1}): sum_k theta*n = {got} != n_{i + 1},{l + 1} = {want}",
                    )
    q = system.explicit_theta_count
    if q < len(system.levels) - 1:
        report.add("theta_gap", (q + 1,), f"level {q + 1} has no theta but deeper levels are listed")
    tail = system.tail_rule
    if tail is not None and report.ok:
        if not tail.thetas:
            report.add("tail", (), "tail rule has an empty pattern")
            return report
        if q < len(system.levels) - 1:
            return report
        j_start = system.levels[q].j if q < len(system.levels) else len(system.levels[-1].theta[0])
        j = j_start
        for p, th in enumerate(tail.thetas):
            # tail pattern p first acts out of level q + 1 + p
            if not _check_theta(report, q + 1 + p, th, j, None):
                break
            j = len(th[0])
        if j != j_start:
            report.add("tail", (), "tail pattern does not return to the summand count it started from")
        if tail.eval_counts is not None:
            if len(tail.eval_counts) != tail.period:
                report.add("tail", (), "tail eval_counts period differs from thetas period")
            else:
                for p, (e, th) in enumerate(zip(tail.eval_counts, tail.thetas)):
                    if len(e) != len(th) or any(len(a) != len(b) for a, b in zip(e, th)):
                        report.add("tail", (p + 1,), "tail eval_counts shape differs from theta shape")
                    elif any(x < 0 for row in e for x in row):
                        report.add("tail", (p + 1,), "negative tail eval count")
    return report


# -- simplicity and unique trace ----------------------------------------------


class Simplicity(str, Enum):
    SIMPLE = "Simple"
    NOT_YET_WITNESSED = "NotYetWitnessed"
    SIMPLE_PERIODIC = "SimplePeriodic"
    NOT_SIMPLE_PERIODIC = "NotSimplePeriodic"


class UniqueTrace(str, Enum):
    LIKELY = "UniqueTraceLikely"
    NOT_YET_WITNESSED = "NotYetWitnessed"
    PERIODIC = "UniqueTracePeriodic"
    INCONCLUSIVE_PERIODIC = "InconclusivePeriodic"


def _positive_pattern(a) -> tuple[tuple[bool, ...], ...]:
    return tuple(tuple(x > 0 for x in row) for row in a)


def _bool_matmul(a, b):
    return tuple(
        tuple(any(a[k][m] and b[m][l] for m in range(len(b))) for l in range(len(b[0])))
        for k in range(len(a))
    )


def period_matrix(system: DimensionSystem) -> Matrix:
    """Product of one full period of the tail pattern."""
    tail = system.tail_rule
    if tail is None:
        raise ValueError("system has no tail rule")
    out = tail.thetas[0]
    for th in tail.thetas[1:]:
        out = matmul(out, th)
    return out


def primitivity_exponent(matrix: Matrix) -> Optional[int]:
    """Smallest q with matrix**q strictly positive, or None if not primitive.

    Wielandt's bound ``(j-1)**2 + 1`` caps the search.
    """
    j = len(matrix)
    pattern = _positive_pattern(matrix)
    power = pattern
    for q in range(1, (j - 1) ** 2 + 2):
        if all(all(row) for row in power):
            return q
        power = _bool_matmul(power, pattern)
    return None


@dataclass
class SimplicityReport:
    verdict: Simplicity
    horizon: int
    witnesses: dict[tuple[int, int], Optional[int]]
    periodic_exponent: Optional[int] = None
    truncation: bool = True

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "horizon": self.horizon,
            "truncation_verdict": self.truncation,
            "periodic_primitivity_exponent": self.periodic_exponent,
            "witnesses": [
                {"level": i, "summand": k, "t": t} for (i, k), t in sorted(self.witnesses.items())
            ],
        }


def simplicity_verdict(system: DimensionSystem, horizon: int) -> SimplicityReport:
    """Witness, for every vertex below the horizon, a span after which it reaches every vertex."""
    if not system.has_level(horizon):
        raise LevelOutOfRange(f"horizon {horizon} beyond available levels")
    witnesses: dict[tuple[int, int], Optional[int]] = {}
    for i in range(1, horizon):
        for k in range(system.j(i)):
            witnesses[(i, k + 1)] = None
            for t in range(1, horizon - i + 1):
                if all(x > 0 for x in compose(system, i, t)[k]):
                    witnesses[(i, k + 1)] = t
                    break
    if system.tail_rule is not None:
        q = primitivity_exponent(period_matrix(system))
        verdict = Simplicity.SIMPLE_PERIODIC if q is not None else Simplicity.NOT_SIMPLE_PERIODIC
        return SimplicityReport(verdict, horizon, witnesses, q, truncation=False)
    ok = all(t is not None for t in witnesses.values())
    return SimplicityReport(Simplicity.SIMPLE if ok else Simplicity.NOT_YET_WITNESSED, horizon, witnesses)


@dataclass
class DiameterReport:
    verdict: UniqueTrace
    tol: Fraction
    diameters: list[tuple[int, Fraction]]
    contraction: Optional[Fraction] = None
    truncation: bool = True

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "tol": str(self.tol),
            "truncation_verdict": self.truncation,
            "periodic_contraction_coefficient": None if self.contraction is None else str(self.contraction),
            "diameters": [{"t": t, "l1_diameter": str(d)} for t, d in self.diameters],
        }


def column_diameter(p: StochasticMatrix) -> Fraction:
    cols = p.columns()
    return max((l1(a, b) for a in cols for b in cols), default=Fraction(0))


def unique_trace_diagnostic(system: DimensionSystem, horizon: int, tol) -> DiameterReport:
    """l1-diameter of the image of the level-(1+t) trace simplex in level 1 scalars."""
    tol = Fraction(tol)
    diameters = []
    for t in range(1, horizon):
        diameters.append((t, column_diameter(trace_pullback_matrix(system, 1, t))))
    if system.tail_rule is not None:
        q = primitivity_exponent(period_matrix(system))
        if q is None:
            return DiameterReport(UniqueTrace.INCONCLUSIVE_PERIODIC, tol, diameters, None, truncation=False)
        start = system.explicit_theta_count + 1
        window = trace_pullback_matrix(system, start, q * system.tail_rule.period)
        # Dobrushin coefficient: half the largest l1 distance between columns
        delta = column_diameter(window) / 2
        return DiameterReport(UniqueTrace.PERIODIC, tol, diameters, delta, truncation=False)
    likely = any(d < tol for _, d in diameters) or system.j(1) == 1
    return DiameterReport(UniqueTrace.LIKELY if likely else UniqueTrace.NOT_YET_WITNESSED, tol, diameters)


def is_infinite_dimensional(system: DimensionSystem, horizon: Optional[int] = None) -> bool:
    """Heuristic: total algebra dimension sum_k n_{i,k}^2 strictly grows somewhere.

    With a tail rule the answer is read off the period product: a period that is a
    permutation matrix never grows the algebra.
    """
    if system.tail_rule is not None:
        m = period_matrix(system)
        return not (all(sum(row) == 1 for row in m) and all(sum(col) == 1 for col in zip(*m)))
    top = horizon or system.max_level
    dims = [sum(x * x for x in system.n(i)) for i in range(1, top + 1)]
    return any(b > a for a, b in zip(dims, dims[1:]))


# -- random systems -------------------------------------------------------------


def random_system(
    rng: random.Random,
    levels: int = 5,
    max_j: int = 3,
    max_n: int = 4,
    max_theta: int = 3,
) -> DimensionSystem:
    """Random valid system: no zero rows or columns; sizes fixed by unitality."""
    js = [rng.randint(1, max_j) for _ in range(levels)]
    n1 = [rng.randint(1, max_n) for _ in range(js[0])]
    thetas = []
    for a, b in zip(js, js[1:]):
        while True:
            th = [[rng.randint(0, max_theta) for _ in range(b)] for _ in range(a)]
            if all(any(row) for row in th) and all(any(th[k][l] for k in range(a)) for l in range(b)):
                break
        thetas.append(th)
    return DimensionSystem.from_thetas(n1, thetas)


def identity_system(j: int, levels: int, n1: Optional[Sequence[int]] = None) -> DimensionSystem:
    return DimensionSystem.from_thetas(n1 or [1] * j, [identity(j)] * (levels - 1))
