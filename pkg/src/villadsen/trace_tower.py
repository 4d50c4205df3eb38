"""Traces on the finite stages and their pullbacks.

A level trace is ``sum_k lambda_k tau_k`` with ``tau_k`` a probability
measure on words of length ``n_{i,k}`` (the seed is a multi-matrix algebra,
so traces on its tensor powers are exactly such measures). Pullbacks use the
layout of composed canonical connecting maps; by the partition-independence
of the construction no generality is lost.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .dimension_system import DimensionSystem, trace_pullback_matrix
from .measures import (
    Measure,
    all_words,
    from_weights,
    marginal_block,
    measure_from_dict,
    measure_to_dict,
    measures_equal,
    mixture,
    product,
    uniform,
)
from .observables import Observable
from .partition_scheme import composed_blocks
from .rationals import fmt_vec, parse_rational


class InconsistentAFTrace(ValueError):
    pass


class FiberMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SeedAlgebra:
    block_dims: tuple[int, ...]

    def __post_init__(self):
        if not self.block_dims or any(d < 1 for d in self.block_dims):
            raise ValueError("seed needs at least one positive block dimension")

    @property
    def m(self) -> int:
        return len(self.block_dims)

    @property
    def noncommutative(self) -> bool:
        return any(d >= 2 for d in self.block_dims)

    @property
    def multi_trace(self) -> bool:
        return self.m >= 2


@dataclass(frozen=True)
class LevelTrace:
    level: int
    lam: tuple[Fraction, ...]
    mu: tuple[Measure, ...]
    flagged: frozenset[int] = frozenset()

    def __post_init__(self):
        lam = tuple(Fraction(x) for x in self.lam)
        object.__setattr__(self, "lam", lam)
        if any(x < 0 for x in lam) or sum(lam) != 1:
            raise ValueError(f"lambda {lam} is not a probability vector")
        if len(lam) != len(self.mu):
            raise ValueError("one measure per summand required")

    def check_shape(self, system: DimensionSystem) -> None:
        n = system.n(self.level)
        if len(n) != len(self.lam):
            raise ValueError(f"level {self.level} has {len(n)} summands, trace has {len(self.lam)}")
        for k, (nk, mu) in enumerate(zip(n, self.mu)):
            if mu.n != nk:
                raise ValueError(f"summand {k + 1} measure has word length {mu.n}, n = {nk}")

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "lambda": fmt_vec(self.lam),
            "measures": [measure_to_dict(mu) for mu in self.mu],
            "flagged": sorted(k + 1 for k in self.flagged),
        }

    @classmethod
    def from_dict(cls, data) -> "LevelTrace":
        return cls(
            int(data["level"]),
            tuple(parse_rational(x) for x in data["lambda"]),
            tuple(measure_from_dict(m) for m in data["measures"]),
            frozenset(int(k) - 1 for k in data.get("flagged", [])),
        )


@dataclass(frozen=True)
class AFTrace:
    """Scalar tuples alpha^{(i)} of a trace on the canonical AF subalgebra."""

    alphas: tuple[tuple[Fraction, ...], ...]
    start: int = 1

    @property
    def depth(self) -> int:
        return self.start + len(self.alphas) - 1

    def at(self, i: int) -> tuple[Fraction, ...]:
        return self.alphas[i - self.start]

    def has(self, i: int) -> bool:
        return self.start <= i <= self.depth

    def inconsistencies(self, system: DimensionSystem) -> list[int]:
        bad = []
        for i in range(self.start, self.depth):
            if trace_pullback_matrix(system, i, 1).apply(self.at(i + 1)) != self.at(i):
                bad.append(i)
        return bad

    @classmethod
    def from_top(cls, system: DimensionSystem, top: Sequence, top_level: int, start: int = 1) -> "AFTrace":
        vec = tuple(Fraction(x) for x in top)
        if any(x < 0 for x in vec) or sum(vec) != 1:
            raise ValueError("top tuple is not a probability vector")
        out = [vec]
        for i in range(top_level - 1, start - 1, -1):
            vec = trace_pullback_matrix(system, i, 1).apply(vec)
            out.append(vec)
        return cls(tuple(reversed(out)), start)

    def to_dict(self) -> dict:
        return {"start": self.start, "alphas": [fmt_vec(a) for a in self.alphas]}


@dataclass(frozen=True)
class TraceTower:
    levels: tuple[LevelTrace, ...]

    def __post_init__(self):
        idx = [lt.level for lt in self.levels]
        if idx != list(range(idx[0], idx[0] + len(idx))):
            raise ValueError(f"tower levels {idx} are not consecutive")

    @property
    def start(self) -> int:
        return self.levels[0].level

    @property
    def depth(self) -> int:
        return self.levels[-1].level

    def level(self, i: int) -> LevelTrace:
        if not self.start <= i <= self.depth:
            raise IndexError(f"tower covers levels {self.start}..{self.depth}, not {i}")
        return self.levels[i - self.start]

    def af(self) -> AFTrace:
        return AFTrace(tuple(lt.lam for lt in self.levels), self.start)

    def to_dict(self) -> dict:
        return {"levels": [lt.to_dict() for lt in self.levels]}

    @classmethod
    def from_dict(cls, data) -> "TraceTower":
        if "levels" not in data:
            return cls((LevelTrace.from_dict(data),))
        return cls(tuple(LevelTrace.from_dict(x) for x in data["levels"]))


def level_traces_equal(a: LevelTrace, b: LevelTrace) -> bool:
    """Equal as functionals: summands with zero weight carry no information."""
    if a.level != b.level or a.lam != b.lam:
        return False
    return all(lam == 0 or measures_equal(x, y) for lam, x, y in zip(a.lam, a.mu, b.mu))


def pullback(system: DimensionSystem, target: LevelTrace, t: int = 1) -> LevelTrace:
    """Image of a level-(i+t) trace under the dual of the composed connecting map."""
    i = target.level - t
    if i < 1:
        raise ValueError("cannot pull back below level 1")
    target.check_shape(system)
    n_src, n_tgt = system.n(i), system.n(i + t)
    blocks = composed_blocks(system, i, t)
    lam = trace_pullback_matrix(system, i, t).apply(target.lam)
    m = target.mu[0].m
    mus, flagged = [], set()
    for k in range(len(n_src)):
        if lam[k] == 0:
            mus.append(uniform(n_src[k], m))
            flagged.add(k)
            continue
        weights, parts = [], []
        for l in range(len(n_tgt)):
            if target.lam[l] == 0:
                continue
            w = target.lam[l] * Fraction(n_src[k], n_tgt[l]) / lam[k]
            for block in blocks[k][l]:
                weights.append(w)
                parts.append(marginal_block(target.mu[l], block))
        mus.append(mixture(weights, parts))
    return LevelTrace(i, lam, tuple(mus), frozenset(flagged))


def extend_level(system: DimensionSystem, lower: LevelTrace, lam_next: Sequence) -> LevelTrace:
    """tau_l^{(i+1)} = (x)_k tau_k^{(i)} ^ (x) theta_{i;k,l}, in canonical block order."""
    i = lower.level
    theta = system.theta(i)
    mus = []
    for l in range(len(theta[0])):
        mus.append(product(lower.mu[k] for k in range(len(theta)) for _ in range(theta[k][l])))
    return LevelTrace(i + 1, tuple(lam_next), tuple(mus))


def extend_af_trace(
    system: DimensionSystem,
    af: AFTrace,
    seed_level_measures: Optional[Sequence[Measure]] = None,
    m: Optional[int] = None,
) -> TraceTower:
    """Extend an AF trace to the whole tower by the product recursion.

    Without explicit seed measures the uniform measure on each first-level
    summand is used (``m`` must then be given).
    """
    bad = af.inconsistencies(system)
    if bad:
        raise InconsistentAFTrace(f"alpha tuples inconsistent between levels {bad} and their successors")
    n1 = system.n(af.start)
    if seed_level_measures is None:
        if m is None:
            raise ValueError("give seed measures or the seed alphabet size m")
        seed_level_measures = [uniform(nk, m) for nk in n1]
    first = LevelTrace(af.start, af.at(af.start), tuple(seed_level_measures))
    first.check_shape(system)
    levels = [first]
    for i in range(af.start + 1, af.depth + 1):
        levels.append(extend_level(system, levels[-1], af.at(i)))
    return TraceTower(tuple(levels))


def consistency_failures(system: DimensionSystem, tower: TraceTower) -> list[int]:
    """Levels i where the pullback of level i+1 differs from level i."""
    bad = []
    for i in range(tower.start, tower.depth):
        if not level_traces_equal(pullback(system, tower.level(i + 1), 1), tower.level(i)):
            bad.append(i)
    return bad


def fiber_check(tower: TraceTower, af: AFTrace) -> bool:
    return all(af.has(lt.level) and lt.lam == af.at(lt.level) for lt in tower.levels)


def convex_combine(towers: Sequence[TraceTower], weights: Sequence) -> TraceTower:
    weights = [Fraction(w) for w in weights]
    if any(w < 0 for w in weights) or sum(weights) != 1 or len(weights) != len(towers):
        raise ValueError("weights must be a probability vector, one per tower")
    first = towers[0]
    for tw in towers[1:]:
        if (tw.start, tw.depth) != (first.start, first.depth) or any(
            a.lam != b.lam for a, b in zip(tw.levels, first.levels)
        ):
            raise FiberMismatch("towers do not share their scalar tuples")
    levels = []
    for idx, lt in enumerate(first.levels):
        mus = tuple(
            mixture(weights, [tw.levels[idx].mu[k] for tw in towers]) for k in range(len(lt.mu))
        )
        levels.append(LevelTrace(lt.level, lt.lam, mus))
    return TraceTower(tuple(levels))


def is_extreme_truncation(tower: TraceTower, from_level: int) -> bool:
    """Every summand measure from ``from_level`` on is a Dirac measure."""
    if tower.depth < from_level:
        raise ValueError("tower is shallower than from_level")
    return all(mu.is_dirac() for lt in tower.levels if lt.level >= from_level for mu in lt.mu)


def evaluate(level_trace: LevelTrace, observable: Observable) -> Fraction:
    """lambda_k times the expectation of the observable under tau_k."""
    if observable.level != level_trace.level:
        raise ValueError(f"observable lives at level {observable.level}, trace at {level_trace.level}")
    k = observable.summand - 1
    if not 0 <= k < len(level_trace.mu):
        raise ValueError(f"summand {observable.summand} out of range")
    lam = level_trace.lam[k]
    if lam == 0:
        return Fraction(0)
    return lam * observable.expectation(level_trace.mu[k])


# -- random data ----------------------------------------------------------------


def random_probability(rng: random.Random, size: int, max_weight: int = 6) -> tuple[Fraction, ...]:
    while True:
        w = [rng.randint(0, max_weight) for _ in range(size)]
        if sum(w):
            return tuple(Fraction(x, sum(w)) for x in w)


def random_measure(rng: random.Random, n: int, m: int, max_atoms: Optional[int] = None) -> Measure:
    words = list(all_words(m, n)) if m**n <= 4096 else None
    if words is None or (max_atoms is not None and len(words) > max_atoms):
        size = max_atoms or 8
        chosen = {tuple(rng.randint(1, m) for _ in range(n)) for _ in range(size)}
        words = sorted(chosen)
    probs = random_probability(rng, len(words))
    return from_weights(m, n, dict(zip(words, probs)))


def random_af_trace(rng: random.Random, system: DimensionSystem, depth: int) -> AFTrace:
    return AFTrace.from_top(system, random_probability(rng, system.j(depth)), depth)
