"""Extreme traces approximating a given trace in its fiber.

Given a trace ``tau`` and a finite family of observables at a base level, the
certifier quantizes each summand measure of ``tau`` into Dirac selections,
pushes the selections deep enough that every composed multiplicity exceeds
the quantizer threshold, assembles the all-Dirac trace ``eta`` with the same
scalar tuples, and evaluates ``|tau(b) - eta(b)|`` exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .dimension_system import DimensionSystem, compose
from .measures import Measure, Word, dirac
from .observables import Observable
from .partition_scheme import composed_blocks
from .rationals import fmt, fmt_vec
from .trace_tower import (
    AFTrace,
    LevelTrace,
    TraceTower,
    evaluate,
    extend_level,
    fiber_check,
    is_extreme_truncation,
    pullback,
)


class HorizonExceeded(RuntimeError):
    """No depth within the horizon makes every composed multiplicity large enough."""


# -- quantizer ----------------------------------------------------------------------


@dataclass(frozen=True)
class Quantization:
    n: int
    counts: tuple[tuple[Word, int], ...]

    def words(self) -> list[Word]:
        """The n Dirac points, in atom order."""
        return [w for w, c in self.counts for _ in range(c)]

    def diracs(self, m: int) -> list[Measure]:
        return [dirac(w, m) for w in self.words()]

    def max_error(self, p: Mapping[Word, Fraction]) -> Fraction:
        got = dict(self.counts)
        return max(abs(q - Fraction(got.get(w, 0), self.n)) for w, q in p.items())


def quantize_measure(p: Measure, count: int) -> Quantization:
    """Largest-remainder apportionment of ``count`` Dirac points to the atoms of p.

    Ties in the fractional part go to the lowest atom (lexicographic word order).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    atoms = sorted(p.dense().atoms.items())
    floors = [(w, math.floor(q * count), q * count - math.floor(q * count)) for w, q in atoms]
    left = count - sum(f for _, f, _ in floors)
    bonus = sorted(range(len(floors)), key=lambda x: (-floors[x][2], x))[:left]
    counts = [f + (x in bonus) for x, (_, f, _) in enumerate(floors)]
    # the rest of the mass lives on atoms with nonzero remainders, so left <= len(atoms)
    assert sum(counts) == count
    return Quantization(count, tuple((w, c) for (w, _, _), c in zip(floors, counts) if c))


def average_expectation(quant: Quantization, observable: Observable) -> Fraction:
    total = sum((c * observable.value(w) for w, c in quant.counts), Fraction(0))
    return total / quant.n


# -- depth ----------------------------------------------------------------------------


def choose_depth(system: DimensionSystem, base: int, thresholds: Sequence[int], horizon: int) -> int:
    """Smallest t' <= horizon with theta_{base, base+t'-1; k, l} > N_k for all k, l."""
    for t in range(1, horizon + 1):
        if not system.has_level(base + t):
            break
        theta = compose(system, base, t)
        if all(x > thresholds[k] for k, row in enumerate(theta) for x in row):
            return t
    raise HorizonExceeded(
        f"no t' <= {horizon} with every composed multiplicity above thresholds {list(thresholds)}"
    )


# -- eta ------------------------------------------------------------------------------


def build_eta(
    system: DimensionSystem,
    base: int,
    depth: int,
    selections: Sequence[Sequence[Sequence[Measure]]],
    af: AFTrace,
    extra_levels: int = 1,
) -> TraceTower:
    """All-Dirac trace whose level-(base+depth) words carry the selected Diracs.

    ``selections[k][l]`` lists theta_{base,base+depth-1;k,l} Dirac measures on
    words of length n_{base,k}; selection m is written into composed block m of
    (k, l). Deeper levels follow the product recursion.
    """
    top = base + depth
    n_src, n_tgt = system.n(base), system.n(top)
    theta = compose(system, base, depth)
    blocks = composed_blocks(system, base, depth)
    mus = []
    m_alpha = None
    for l in range(len(n_tgt)):
        word = [0] * n_tgt[l]
        for k in range(len(n_src)):
            sel = selections[k][l]
            if len(sel) != theta[k][l]:
                raise ValueError(f"need {theta[k][l]} selections for ({k + 1},{l + 1}), got {len(sel)}")
            for block, mu in zip(blocks[k][l], sel):
                if not mu.is_dirac():
                    raise ValueError(f"selection for ({k + 1},{l + 1}) is not a Dirac measure")
                if mu.n != n_src[k]:
                    raise ValueError(f"selection word length {mu.n}, expected {n_src[k]}")
                (w,) = mu.dense().atoms
                m_alpha = mu.m
                for s, letter in zip(block, w):
                    word[s - 1] = letter
        mus.append(dirac(word, m_alpha))
    levels = [LevelTrace(top, af.at(top), tuple(mus))]
    for i in range(top + 1, top + extra_levels + 1):
        if not (af.has(i) and system.has_level(i)):
            break
        levels.append(extend_level(system, levels[-1], af.at(i)))
    return TraceTower(tuple(levels))


# -- certificate ------------------------------------------------------------------------


@dataclass
class Neighborhood:
    """Basic neighbourhood: each group is one element b, split by summand."""

    epsilon: Fraction
    groups: list[list[Observable]]

    def __post_init__(self):
        self.epsilon = Fraction(self.epsilon)
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        levels = {o.level for g in self.groups for o in g}
        if len(levels) > 1:
            raise ValueError(f"observables live on several levels {sorted(levels)}")

    @property
    def level(self) -> int:
        return next(o.level for g in self.groups for o in g)


@dataclass
class PoulsenCertificate:
    base: int
    depth: int
    epsilon: Fraction
    alpha_base: tuple[Fraction, ...]
    alpha_top: tuple[Fraction, ...]
    thresholds: list[int]
    composed: tuple[tuple[int, ...], ...]
    selections: list[list[list[Word]]]
    tau_values: list[Fraction]
    eta_values: list[Fraction]
    deviations: list[Fraction]
    triple_sums: list[Fraction]
    triangle_bounds: list[Fraction]
    per_block_errors: list[list[list[Fraction]]]
    quantizer_bounds: list[list[Fraction]]
    weights: list[list[Fraction]]
    flagged_summands: list[int]
    empty_summands: list[list[int]]
    extreme: bool
    in_fiber: bool
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(d < self.epsilon for d in self.deviations) and self.extreme and self.in_fiber

    @property
    def verdict(self) -> str:
        return "Pass" if self.passed else "Fail"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "base_level": self.base,
            "depth": self.depth,
            "epsilon": fmt(self.epsilon),
            "alpha_base": fmt_vec(self.alpha_base),
            "alpha_top": fmt_vec(self.alpha_top),
            "thresholds": self.thresholds,
            "composed_multiplicities": [list(r) for r in self.composed],
            "selections": [[[list(w) for w in sel] for sel in row] for row in self.selections],
            "tau_values": fmt_vec(self.tau_values),
            "eta_values": fmt_vec(self.eta_values),
            "deviations": fmt_vec(self.deviations),
            "chain": {
                "triple_sums": fmt_vec(self.triple_sums),
                "triangle_bounds": fmt_vec(self.triangle_bounds),
                "per_block_errors": [[fmt_vec(e) for e in row] for row in self.per_block_errors],
                "quantizer_bounds": [fmt_vec(r) for r in self.quantizer_bounds],
                "weights": [fmt_vec(r) for r in self.weights],
            },
            "flagged_summands": self.flagged_summands,
            "empty_summands": self.empty_summands,
            "eta_extreme": self.extreme,
            "eta_in_fiber": self.in_fiber,
            "notes": self.notes,
        }


def _group_by_summand(group: Sequence[Observable], j: int) -> list[Optional[Observable]]:
    out: list[Optional[Observable]] = [None] * j
    for obs in group:
        if out[obs.summand - 1] is not None:
            raise ValueError(f"two observables for summand {obs.summand} in one group")
        out[obs.summand - 1] = obs
    return out


def deviations_from_selections(
    system: DimensionSystem,
    tau_base: LevelTrace,
    nbhd: Neighborhood,
    depth: int,
    selections: Sequence[Sequence[Sequence[Word]]],
    alpha_top: Sequence[Fraction],
) -> tuple[list[Fraction], list[Fraction], list[Fraction]]:
    """Recompute tau(b), eta(b) and |tau(b) - eta(b)| from serialised selections."""
    base = tau_base.level
    m = tau_base.mu[0].m
    af_top = AFTrace((tuple(alpha_top),), base + depth)
    sel = [[[dirac(w, m) for w in s] for s in row] for row in selections]
    eta = build_eta(system, base, depth, sel, af_top, extra_levels=0)
    eta_base = pullback(system, eta.level(base + depth), depth)
    j = len(tau_base.lam)
    tau_vals, eta_vals, devs = [], [], []
    for group in nbhd.groups:
        parts = _group_by_summand(group, j)
        tv = sum((evaluate(tau_base, o) for o in parts if o is not None), Fraction(0))
        ev = sum((evaluate(eta_base, o) for o in parts if o is not None), Fraction(0))
        tau_vals.append(tv)
        eta_vals.append(ev)
        devs.append(abs(tv - ev))
    return tau_vals, eta_vals, devs


def certify(
    system: DimensionSystem,
    tau: TraceTower,
    nbhd: Neighborhood,
    horizon: int,
    af: Optional[AFTrace] = None,
) -> PoulsenCertificate:
    base = nbhd.level
    tau_base = tau.level(base)
    af = af or tau.af()
    if af.at(base) != tau_base.lam:
        raise ValueError("tau is not in the fiber of the given AF trace at the base level")
    eps = nbhd.epsilon
    j = system.j(base)
    n_src = system.n(base)
    groups = [_group_by_summand(g, j) for g in nbhd.groups]
    notes = []
    flagged = [k + 1 for k in range(j) if tau_base.lam[k] == 0]
    if flagged:
        notes.append(f"summands {flagged} carry zero weight; their selections are unconstrained")
    empty = [[k + 1 for k in range(j) if g[k] is None] for g in groups]
    if any(empty):
        notes.append("missing observables are treated as zero functions")

    supports = [tau_base.mu[k].dense().atoms for k in range(j)]
    bmax = [max((g[k].sup_bound for g in groups if g[k] is not None), default=Fraction(0)) for k in range(j)]
    # a Dirac summand is quantized exactly by any count, so it needs no threshold
    thresholds = [0 if len(supports[k]) == 1 else math.ceil(len(supports[k]) * bmax[k] / eps) for k in range(j)]
    depth = choose_depth(system, base, thresholds, horizon)
    top = base + depth
    theta = compose(system, base, depth)
    n_tgt = system.n(top)
    if not af.has(top):
        raise ValueError(f"scalar tuples known only up to level {af.depth}; the chosen depth needs level {top}")
    alpha_top = af.at(top)

    selections: list[list[list[Word]]] = []
    for k in range(j):
        row = []
        for l in range(len(n_tgt)):
            row.append(quantize_measure(tau_base.mu[k], theta[k][l]).words())
        selections.append(row)

    weights = [
        [alpha_top[l] * n_src[k] * theta[k][l] / n_tgt[l] for l in range(len(n_tgt))] for k in range(j)
    ]
    quant_bounds = [
        [bmax[k] * len(supports[k]) / theta[k][l] for l in range(len(n_tgt))] for k in range(j)
    ]
    tau_vals, eta_vals, devs = deviations_from_selections(system, tau_base, nbhd, depth, selections, alpha_top)

    triple, triangle, per_block = [], [], []
    for g in groups:
        s = Fraction(0)
        tri = Fraction(0)
        errs = []
        for k in range(j):
            row = []
            for l in range(len(n_tgt)):
                if g[k] is None or tau_base.lam[k] == 0:
                    row.append(Fraction(0))
                    continue
                tk = g[k].expectation(tau_base.mu[k])
                avg = sum((g[k].value(w) for w in selections[k][l]), Fraction(0)) / theta[k][l]
                s += weights[k][l] * (tk - avg)
                tri += weights[k][l] * abs(tk - avg)
                row.append(abs(tk - avg))
            errs.append(row)
        triple.append(abs(s))
        triangle.append(tri)
        per_block.append(errs)

    eta = build_eta(
        system, base, depth, [[[dirac(w, tau_base.mu[0].m) for w in s] for s in row] for row in selections], af
    )
    return PoulsenCertificate(
        base=base,
        depth=depth,
        epsilon=eps,
        alpha_base=tau_base.lam,
        alpha_top=alpha_top,
        thresholds=thresholds,
        composed=theta,
        selections=selections,
        tau_values=tau_vals,
        eta_values=eta_vals,
        deviations=devs,
        triple_sums=triple,
        triangle_bounds=triangle,
        per_block_errors=per_block,
        quantizer_bounds=quant_bounds,
        weights=weights,
        flagged_summands=flagged,
        empty_summands=empty,
        extreme=is_extreme_truncation(eta, top),
        in_fiber=fiber_check(eta, af),
        notes=notes,
    )


def recheck_certificate(
    cert: Mapping,
    system: DimensionSystem,
    tau_base: LevelTrace,
    nbhd: Neighborhood,
) -> bool:
    """Recompute deviations from a serialised certificate; compare the strings exactly."""
    depth = int(cert["depth"])
    selections = [[[tuple(w) for w in sel] for sel in row] for row in cert["selections"]]
    alpha_top = [Fraction(x) for x in cert["alpha_top"]]
    _, _, devs = deviations_from_selections(system, tau_base, nbhd, depth, selections, alpha_top)
    return fmt_vec(devs) == list(cert["deviations"])
