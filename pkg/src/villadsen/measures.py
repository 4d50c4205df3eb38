"""Exact probability measures on words over ``{1..m}``.

A trace on a tensor power ``C0^{(x)n}`` of a multi-matrix seed with ``m``
summands is a probability measure on ``{1..m}^n``; Dirac measures are its
extreme points. Two representations are used: a sparse dense table and a
product of factors. Products are kept flat, so equality and marginals can be
decided block by block without ever building ``m**n`` atoms.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct
from typing import Iterable, Mapping, Sequence

Word = tuple[int, ...]

MAX_DENSE_ATOMS = 2**20


class DenseCapExceeded(RuntimeError):
    """An operation would materialise more than MAX_DENSE_ATOMS atoms."""


class CoordinateError(ValueError):
    pass


class Measure:
    m: int
    n: int

    def leaves(self) -> tuple["DenseMeasure", ...]:
        raise NotImplementedError

    def support_size(self) -> int:
        size = 1
        for leaf in self.leaves():
            size *= len(leaf.atoms)
        return size

    def is_dirac(self) -> bool:
        return all(len(leaf.atoms) == 1 for leaf in self.leaves())

    def dense(self, cap: int = MAX_DENSE_ATOMS) -> "DenseMeasure":
        return _densify(self.leaves(), cap)

    def dense_atoms(self, cap: int = MAX_DENSE_ATOMS) -> dict[Word, Fraction]:
        return dict(self.dense(cap).atoms)

    def mass(self) -> Fraction:
        out = Fraction(1)
        for leaf in self.leaves():
            out *= sum(leaf.atoms.values(), Fraction(0))
        return out

    def marginal(self, coords: Sequence[int]) -> "Measure":
        return marginal_block(self, coords)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Measure):
            return NotImplemented
        return measures_equal(self, other)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DenseMeasure(Measure):
    m: int
    n: int
    atoms_: Mapping[Word, Fraction]

    def __post_init__(self):
        clean = {}
        for w, p in self.atoms_.items():
            w = tuple(int(x) for x in w)
            p = Fraction(p)
            if len(w) != self.n:
                raise ValueError(f"word {w} has length {len(w)}, expected {self.n}")
            if any(not 1 <= x <= self.m for x in w):
                raise ValueError(f"word {w} uses a letter outside 1..{self.m}")
            if p < 0:
                raise ValueError(f"negative mass {p} at {w}")
            if p:
                clean[w] = clean.get(w, Fraction(0)) + p
        object.__setattr__(self, "atoms_", dict(sorted(clean.items())))

    @property
    def atoms(self) -> Mapping[Word, Fraction]:  # type: ignore[override]
        return self.atoms_

    def leaves(self):
        return (self,)

    def __repr__(self) -> str:
        body = ", ".join(f"{w}: {p}" for w, p in list(self.atoms_.items())[:6])
        more = ", ..." if len(self.atoms_) > 6 else ""
        return f"Dense(n={self.n}, {{{body}{more}}})"


@dataclass(frozen=True, eq=False)
class ProductMeasure(Measure):
    factors: tuple[DenseMeasure, ...]

    def __post_init__(self):
        flat = []
        for f in self.factors:
            flat.extend(f.leaves())
        if not flat:
            raise ValueError("empty product")
        if len({f.m for f in flat}) != 1:
            raise ValueError("factors over different alphabets")
        object.__setattr__(self, "factors", tuple(flat))

    @property
    def m(self) -> int:  # type: ignore[override]
        return self.factors[0].m

    @property
    def n(self) -> int:  # type: ignore[override]
        return sum(f.n for f in self.factors)

    def leaves(self):
        return self.factors

    def __repr__(self) -> str:
        return f"Product({len(self.factors)} factors, n={self.n})"


def product(factors: Iterable[Measure]) -> Measure:
    leaves = [leaf for f in factors for leaf in f.leaves()]
    if len(leaves) == 1:
        return leaves[0]
    return ProductMeasure(tuple(leaves))


def dirac(word: Sequence[int], m: int) -> DenseMeasure:
    return DenseMeasure(m, len(word), {tuple(word): Fraction(1)})


def uniform(n: int, m: int) -> Measure:
    letter = DenseMeasure(m, 1, {(a,): Fraction(1, m) for a in range(1, m + 1)})
    return product([letter] * n) if n > 1 else letter


def from_weights(m: int, n: int, weights: Mapping[Word, int | Fraction]) -> DenseMeasure:
    """Normalise nonnegative weights into a probability measure."""
    total = sum(Fraction(v) for v in weights.values())
    if total <= 0:
        raise ValueError("weights sum to zero")
    return DenseMeasure(m, n, {w: Fraction(v) / total for w, v in weights.items()})


def _densify(leaves: Sequence[DenseMeasure], cap: int) -> DenseMeasure:
    size = 1
    for leaf in leaves:
        size *= max(len(leaf.atoms), 1)
        if size > cap:
            raise DenseCapExceeded(f"densifying would create {size}+ atoms (cap {cap})")
    if len(leaves) == 1:
        return leaves[0]
    atoms: dict[Word, Fraction] = {(): Fraction(1)}
    for leaf in leaves:
        atoms = {w + v: p * q for w, p in atoms.items() for v, q in leaf.atoms.items()}
    return DenseMeasure(leaves[0].m, sum(leaf.n for leaf in leaves), atoms)


def _dense_marginal(d: DenseMeasure, coords: Sequence[int]) -> DenseMeasure:
    if list(coords) == list(range(1, d.n + 1)):
        return d
    out: dict[Word, Fraction] = {}
    for w, p in d.atoms.items():
        key = tuple(w[c - 1] for c in coords)
        out[key] = out.get(key, Fraction(0)) + p
    return DenseMeasure(d.m, len(coords), out)


def marginal_block(measure: Measure, coords: Sequence[int]) -> Measure:
    """Pushforward under the coordinate projection onto ``coords`` (in that order)."""
    coords = tuple(int(c) for c in coords)
    if len(set(coords)) != len(coords):
        raise CoordinateError(f"repeated coordinate in {coords}")
    for c in coords:
        if not 1 <= c <= measure.n:
            raise CoordinateError(f"coordinate {c} outside 1..{measure.n}")
    leaves = measure.leaves()
    if len(leaves) == 1:
        return _dense_marginal(leaves[0], coords)
    starts, pos = [], 0
    for leaf in leaves:
        starts.append(pos)
        pos += leaf.n
    owner = []
    for c in coords:
        f = bisect_right(starts, c - 1) - 1
        owner.append((f, c - starts[f]))
    runs: list[tuple[int, list[int]]] = []
    for f, local in owner:
        if runs and runs[-1][0] == f:
            runs[-1][1].append(local)
        else:
            runs.append((f, [local]))
    if len({f for f, _ in runs}) == len(runs):
        return product(_dense_marginal(leaves[f], local) for f, local in runs)
    # a factor is visited twice: marginalise factor-wise on sorted coords, then reorder
    order = sorted(range(len(coords)), key=lambda x: coords[x])
    sorted_coords = [coords[x] for x in order]
    base = marginal_block(measure, sorted_coords).dense()
    where = {c: x for x, c in enumerate(sorted_coords)}
    out: dict[Word, Fraction] = {}
    for w, p in base.atoms.items():
        key = tuple(w[where[c]] for c in coords)
        out[key] = out.get(key, Fraction(0)) + p
    return DenseMeasure(measure.m, len(coords), out)


def _cuts(leaves: Sequence[DenseMeasure]) -> list[int]:
    out, pos = [0], 0
    for leaf in leaves:
        pos += leaf.n
        out.append(pos)
    return out


def _segment(leaves: Sequence[DenseMeasure], cuts: list[int], a: int, b: int) -> list[DenseMeasure]:
    return [leaf for leaf, start in zip(leaves, cuts) if a <= start < b]


def measures_equal(a: Measure, b: Measure, cap: int = MAX_DENSE_ATOMS) -> bool:
    """Exact equality, block by block over the common refinement of factor cuts."""
    if a is b:
        return True
    if a.n != b.n:
        return False
    la, lb = a.leaves(), b.leaves()
    ca, cb = _cuts(la), _cuts(lb)
    common = sorted(set(ca) & set(cb))
    for lo, hi in zip(common, common[1:]):
        sa, sb = _segment(la, ca, lo, hi), _segment(lb, cb, lo, hi)
        if len(sa) == len(sb) and all(x.atoms == y.atoms for x, y in zip(sa, sb)):
            continue
        if _densify(sa, cap).atoms != _densify(sb, cap).atoms:
            return False
    return True


def mixture(weights: Sequence, measures: Sequence[Measure], cap: int = MAX_DENSE_ATOMS) -> Measure:
    """Convex combination; stays structural when every component is the same measure."""
    pairs = [(Fraction(w), mu) for w, mu in zip(weights, measures) if w]
    if not pairs:
        raise ValueError("mixture with no positive weight")
    total = sum(w for w, _ in pairs)
    first = pairs[0][1]
    if all(measures_equal(mu, first, cap) for _, mu in pairs[1:]) and total == 1:
        return first
    n = first.n
    if any(mu.n != n for _, mu in pairs):
        raise ValueError("mixture of measures on different word lengths")
    out: dict[Word, Fraction] = {}
    for w, mu in pairs:
        for word, p in mu.dense(cap).atoms.items():
            out[word] = out.get(word, Fraction(0)) + w * p
    return DenseMeasure(first.m, n, out)


def all_words(m: int, n: int) -> Iterable[Word]:
    return iproduct(range(1, m + 1), repeat=n)


# -- serialisation ---------------------------------------------------------------


def measure_to_dict(mu: Measure) -> dict:
    leaves = mu.leaves()
    if len(leaves) > 1:
        return {"type": "product", "factors": [measure_to_dict(f) for f in leaves]}
    d = leaves[0]
    if len(d.atoms) == 1:
        (w,) = d.atoms
        return {"type": "dirac", "m": d.m, "n": d.n, "word": list(w)}
    return {"type": "dense", "m": d.m, "n": d.n, "atoms": [[list(w), str(p)] for w, p in d.atoms.items()]}


def measure_from_dict(data: Mapping) -> Measure:
    from .rationals import parse_rational

    kind = data.get("type")
    if kind == "dirac":
        return dirac(data["word"], int(data["m"]))
    if kind == "dense":
        atoms = {tuple(w): parse_rational(p) for w, p in data["atoms"]}
        mu = DenseMeasure(int(data["m"]), int(data["n"]), atoms)
        if mu.mass() != 1:
            raise ValueError(f"dense measure has mass {mu.mass()}, expected 1")
        return mu
    if kind == "product":
        return product(measure_from_dict(f) for f in data["factors"])
    if kind == "uniform":
        return uniform(int(data["n"]), int(data["m"]))
    raise ValueError(f"unknown measure type {kind!r}")
