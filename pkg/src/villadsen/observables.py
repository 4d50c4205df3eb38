"""Test elements modelled by their values on extreme traces of one summand.

An observable on summand ``k`` of level ``i`` is a finite sum of local terms.
Each term reads a few coordinates of the index word and looks its value up in
a table (missing keys take the default). Pairing with a measure only needs
the marginal on those coordinates, so observables on long words stay cheap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .measures import Measure, Word, all_words
from .rationals import fmt, parse_rational


@dataclass(frozen=True)
class LocalTerm:
    coords: tuple[int, ...]
    table: Mapping[Word, Fraction]
    default: Fraction = Fraction(0)
    coef: Fraction = Fraction(1)

    def value(self, word: Word) -> Fraction:
        key = tuple(word[c - 1] for c in self.coords)
        return self.coef * self.table.get(key, self.default)

    def sup(self, m: int) -> Fraction:
        vals = [abs(v) for v in self.table.values()]
        if len(self.table) < m ** len(self.coords):
            vals.append(abs(self.default))
        return abs(self.coef) * max(vals, default=abs(self.default))

    def expectation(self, mu: Measure) -> Fraction:
        marg = mu.marginal(self.coords) if self.coords else None
        if marg is None:
            return self.coef * self.table.get((), self.default)
        total = Fraction(0)
        for w, p in marg.dense().atoms.items():
            total += p * self.table.get(w, self.default)
        return self.coef * total


@dataclass(frozen=True)
class Observable:
    level: int
    summand: int  # 1-based
    n: int
    m: int
    terms: tuple[LocalTerm, ...]
    sup_bound: Optional[Fraction] = field(default=None)

    def __post_init__(self):
        for term in self.terms:
            if any(not 1 <= c <= self.n for c in term.coords):
                raise ValueError(f"term coordinates {term.coords} outside 1..{self.n}")
        derived = sum((t.sup(self.m) for t in self.terms), Fraction(0))
        if self.sup_bound is None:
            object.__setattr__(self, "sup_bound", derived)
        elif Fraction(self.sup_bound) < derived:
            # the declared bound must dominate |value|; check exactly on small words
            bound = Fraction(self.sup_bound)
            if self.m**self.n <= 4096 and all(abs(self.value(w)) <= bound for w in all_words(self.m, self.n)):
                object.__setattr__(self, "sup_bound", bound)
            else:
                raise ValueError(f"declared sup bound {bound} below certified bound {derived}")
        else:
            object.__setattr__(self, "sup_bound", Fraction(self.sup_bound))

    def value(self, word: Word) -> Fraction:
        return sum((t.value(word) for t in self.terms), Fraction(0))

    def expectation(self, mu: Measure) -> Fraction:
        if mu.n != self.n:
            raise ValueError(f"observable word length {self.n} vs measure word length {mu.n}")
        return sum((t.expectation(mu) for t in self.terms), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "summand": self.summand,
            "n": self.n,
            "m": self.m,
            "sup_bound": fmt(self.sup_bound),
            "terms": [
                {
                    "coords": list(t.coords),
                    "table": [[list(w), fmt(v)] for w, v in sorted(t.table.items())],
                    "default": fmt(t.default),
                    "coef": fmt(t.coef),
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Observable":
        terms = tuple(
            LocalTerm(
                tuple(int(c) for c in t["coords"]),
                {tuple(int(x) for x in w): parse_rational(v) for w, v in t.get("table", [])},
                parse_rational(t.get("default", "0")),
                parse_rational(t.get("coef", "1")),
            )
            for t in data["terms"]
        )
        bound = data.get("sup_bound")
        return cls(
            int(data["level"]),
            int(data["summand"]),
            int(data["n"]),
            int(data["m"]),
            terms,
            None if bound is None else parse_rational(bound),
        )


def indicator(level: int, summand: int, n: int, m: int, coord: int, letter: int) -> Observable:
    """1 when the word has ``letter`` at ``coord``; sup bound 1."""
    return Observable(level, summand, n, m, (LocalTerm((coord,), {(letter,): Fraction(1)}),))


def constant(level: int, summand: int, n: int, m: int, value=1) -> Observable:
    return Observable(level, summand, n, m, (LocalTerm((), {(): Fraction(value)}),))


def table_observable(level: int, summand: int, m: int, values: Mapping[Word, Fraction]) -> Observable:
    n = len(next(iter(values)))
    return Observable(level, summand, n, m, (LocalTerm(tuple(range(1, n + 1)), dict(values)),))


def pushforward(obs: Observable, blocks_for_target: Sequence[Sequence[Sequence[int]]], n_src: int, n_tgt: Sequence[int], level_tgt: int) -> list[Observable]:
    """Image of a summand-k observable under the composed connecting map.

    ``blocks_for_target[l]`` lists the blocks of summand k inside target l; the
    normalised trace of the diagonal image weights each block by n_src / n_tgt[l].
    """
    out = []
    for l, blocks in enumerate(blocks_for_target):
        w = Fraction(n_src, n_tgt[l])
        terms = []
        for block in blocks:
            for t in obs.terms:
                terms.append(LocalTerm(tuple(block[c - 1] for c in t.coords), t.table, t.default, t.coef * w))
        if not terms:
            terms.append(LocalTerm((), {(): Fraction(0)}))
        out.append(Observable(level_tgt, l + 1, n_tgt[l], obs.m, tuple(terms)))
    return out
