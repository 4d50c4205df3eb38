"""Partitions defining connecting-map seeds, evaluated symbolically.

A scheme for level ``i`` stores, for every source summand ``k``, target
summand ``l`` and copy ``m``, the enumerated block
``(p^{(m,1)}, ..., p^{(m,n_{i,k})})`` of positions in ``{1..n_{i+1,l}}``.
Blocks are indexed ``blocks[k][l][m]`` (0-based lists, 1-based positions).

Elementary tensors are words of symbols; the seed of the connecting map
places the word of summand ``k`` into block ``(k, m)`` and pads with units.
Commutation of the permutation square is checked by comparing symbol lists.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Hashable, Sequence

from .dimension_system import DimensionSystem, ValidationReport, compose

Block = tuple[int, ...]
LevelBlocks = tuple[tuple[tuple[Block, ...], ...], ...]

UNIT = "1"


@dataclass(frozen=True)
class Gen:
    """Generator symbol c_t^(k): carries its source summand and tensor slot."""

    k: int
    t: int

    def __repr__(self) -> str:
        return f"c{self.t}^({self.k})"


@dataclass(frozen=True)
class ElementaryTensorLabel:
    summand: int
    word: tuple[Hashable, ...]

    def permuted(self, perm: Sequence[int]) -> "ElementaryTensorLabel":
        # new slot s carries the old symbol at perm(s)
        return ElementaryTensorLabel(self.summand, tuple(self.word[p - 1] for p in perm))


@dataclass(frozen=True)
class PartitionScheme:
    """Partition data for one level of a system."""

    level: int
    blocks: LevelBlocks

    def to_lists(self) -> list:
        return [[[list(b) for b in bl] for bl in row] for row in self.blocks]

    @classmethod
    def from_lists(cls, level: int, data) -> "PartitionScheme":
        return cls(level, tuple(tuple(tuple(tuple(int(x) for x in b) for b in bl) for bl in row) for row in data))


LevelPermutationFamily = tuple[tuple[int, ...], ...]


def validate_partition(scheme: PartitionScheme, system: DimensionSystem, i: int | None = None) -> ValidationReport:
    i = scheme.level if i is None else i
    report = ValidationReport()
    n_src, n_tgt = system.n(i), system.n(i + 1)
    theta = system.theta(i)
    if len(scheme.blocks) != len(n_src) or any(len(row) != len(n_tgt) for row in scheme.blocks):
        report.add("shape", (i,), f"scheme is not indexed by {len(n_src)} x {len(n_tgt)} summand pairs")
        return report
    for l in range(len(n_tgt)):
        owner: dict[int, tuple[int, int]] = {}
        for k in range(len(n_src)):
            copies = scheme.blocks[k][l]
            if len(copies) != theta[k][l]:
                report.add("block_count", (i, k + 1, l + 1), f"{len(copies)} blocks for ({k + 1},{l + 1}), theta = {theta[k][l]}")
            for m, block in enumerate(copies):
                if len(block) != n_src[k]:
                    report.add("cardinality", (i, k + 1, l + 1, m + 1), f"block has {len(block)} entries, n_{i},{k + 1} = {n_src[k]}")
                if len(set(block)) != len(block):
                    report.add("enumeration", (i, k + 1, l + 1, m + 1), "repeated entry inside one block")
                for s in block:
                    if not 1 <= s <= n_tgt[l]:
                        report.add("range", (i, k + 1, l + 1, m + 1), f"position {s} outside 1..{n_tgt[l]}")
                    elif s in owner and owner[s] != (k, m):
                        report.add("disjointness", (i, l + 1), f"disjointness at ({i},{l + 1}): position {s} used twice")
                    owner.setdefault(s, (k, m))
        missing = [s for s in range(1, n_tgt[l] + 1) if s not in owner]
        if missing:
            report.add("coverage", (i, l + 1), f"positions {missing} of summand {l + 1} uncovered")
    return report


def canonical_partition(system: DimensionSystem, i: int) -> PartitionScheme:
    """Consecutive runs: all copies of summand 1, then summand 2, ..."""
    n_src, n_tgt = system.n(i), system.n(i + 1)
    theta = system.theta(i)
    blocks = [[[] for _ in n_tgt] for _ in n_src]
    for l in range(len(n_tgt)):
        pos = 1
        for k in range(len(n_src)):
            for _ in range(theta[k][l]):
                blocks[k][l].append(tuple(range(pos, pos + n_src[k])))
                pos += n_src[k]
    return PartitionScheme(i, tuple(tuple(tuple(bl) for bl in row) for row in blocks))


def random_partition(system: DimensionSystem, i: int, rng: random.Random) -> PartitionScheme:
    """Seeded shuffle of the canonical scheme; reaches every valid scheme."""
    canon = canonical_partition(system, i)
    perms = []
    for n in system.n(i + 1):
        p = list(range(1, n + 1))
        rng.shuffle(p)
        perms.append(p)
    blocks = tuple(
        tuple(tuple(tuple(perms[l][s - 1] for s in b) for b in copies) for l, copies in enumerate(row))
        for row in canon.blocks
    )
    return PartitionScheme(i, blocks)


def random_permutations(sizes: Sequence[int], rng: random.Random) -> LevelPermutationFamily:
    out = []
    for n in sizes:
        p = list(range(1, n + 1))
        rng.shuffle(p)
        out.append(tuple(p))
    return tuple(out)


def identity_permutations(sizes: Sequence[int]) -> LevelPermutationFamily:
    return tuple(tuple(range(1, n + 1)) for n in sizes)


def seed_image(
    scheme: PartitionScheme,
    system: DimensionSystem,
    inputs: Sequence[ElementaryTensorLabel],
    i: int | None = None,
) -> list[list[ElementaryTensorLabel]]:
    """Diagonal blocks of the seed applied to one elementary tensor per summand."""
    i = scheme.level if i is None else i
    n_src, n_tgt = system.n(i), system.n(i + 1)
    if len(inputs) != len(n_src):
        raise ValueError(f"expected {len(n_src)} summand inputs, got {len(inputs)}")
    for k, lab in enumerate(inputs):
        if len(lab.word) != n_src[k]:
            raise ValueError(f"input word for summand {k + 1} has length {len(lab.word)}, expected {n_src[k]}")
    out = []
    for l in range(len(n_tgt)):
        diag = []
        for k in range(len(n_src)):
            for block in scheme.blocks[k][l]:
                word = [UNIT] * n_tgt[l]
                for t, s in enumerate(block):
                    word[s - 1] = inputs[k].word[t]
                diag.append(ElementaryTensorLabel(l + 1, tuple(word)))
        out.append(diag)
    return out


def intertwiner(
    scheme_p: PartitionScheme,
    scheme_q: PartitionScheme,
    sigma: LevelPermutationFamily,
    system: DimensionSystem,
    i: int | None = None,
) -> LevelPermutationFamily:
    """gamma_l(q^{(m,t)}) = p^{(m, sigma_k(t))}; total because blocks cover."""
    i = scheme_p.level if i is None else i
    n_src, n_tgt = system.n(i), system.n(i + 1)
    if len(sigma) != len(n_src) or any(sorted(s) != list(range(1, n + 1)) for s, n in zip(sigma, n_src)):
        raise ValueError("sigma is not a family of permutations of the level's index sets")
    gamma = []
    for l in range(len(n_tgt)):
        g: dict[int, int] = {}
        for k in range(len(n_src)):
            bp, bq = scheme_p.blocks[k][l], scheme_q.blocks[k][l]
            if len(bp) != len(bq):
                raise ValueError(f"block counts differ at ({k + 1},{l + 1}): {len(bp)} vs {len(bq)}")
            for pblk, qblk in zip(bp, bq):
                if len(pblk) != len(qblk):
                    raise ValueError(f"block sizes differ at ({k + 1},{l + 1})")
                for t, q in enumerate(qblk):
                    g[q] = pblk[sigma[k][t] - 1]
        if sorted(g) != list(range(1, n_tgt[l] + 1)) or sorted(g.values()) != list(range(1, n_tgt[l] + 1)):
            raise ValueError(f"blocks do not cover summand {l + 1}; gamma would not be a bijection")
        gamma.append(tuple(g[s] for s in range(1, n_tgt[l] + 1)))
    return tuple(gamma)


def single_generator_samples(system: DimensionSystem, i: int) -> list[list[ElementaryTensorLabel]]:
    """One generator in one slot, units everywhere else; plus the all-generator tensor."""
    n = system.n(i)
    units = [ElementaryTensorLabel(k + 1, (UNIT,) * nk) for k, nk in enumerate(n)]
    samples = []
    for k, nk in enumerate(n):
        for t in range(nk):
            word = [UNIT] * nk
            word[t] = Gen(k + 1, t + 1)
            s = list(units)
            s[k] = ElementaryTensorLabel(k + 1, tuple(word))
            samples.append(s)
    samples.append([ElementaryTensorLabel(k + 1, tuple(Gen(k + 1, t + 1) for t in range(nk))) for k, nk in enumerate(n)])
    return samples


def verify_commutation(
    scheme_p: PartitionScheme,
    scheme_q: PartitionScheme,
    sigma: LevelPermutationFamily,
    gamma: LevelPermutationFamily,
    system: DimensionSystem,
    samples: Sequence[Sequence[ElementaryTensorLabel]] | None = None,
    i: int | None = None,
) -> bool:
    """gamma after the P-seed equals the Q-seed after sigma, on every sample."""
    i = scheme_p.level if i is None else i
    if samples is None:
        samples = single_generator_samples(system, i)
    for sample in samples:
        left = [[lab.permuted(gamma[l]) for lab in diag] for l, diag in enumerate(seed_image(scheme_p, system, sample, i))]
        moved = [lab.permuted(sigma[k]) for k, lab in enumerate(sample)]
        right = seed_image(scheme_q, system, moved, i)
        if left != right:
            return False
    return True


def composed_blocks(system: DimensionSystem, i: int, t: int) -> list[list[list[Block]]]:
    """Blocks of the composition of t canonical one-step maps, indexed [k][l][m].

    The block list for (k, l) has theta_{i,i+t-1;k,l} entries; each block is a
    run of positions in the level-(i+t) word of summand l.
    """
    key = ("composed_blocks", i, t)
    if key in system._cache:
        return system._cache[key]
    step = canonical_partition(system, i + t - 1).blocks
    if t == 1:
        out = [[list(bl) for bl in row] for row in step]
    else:
        inner = composed_blocks(system, i, t - 1)
        j_src, j_mid, j_tgt = system.j(i), system.j(i + t - 1), system.j(i + t)
        out = [[[] for _ in range(j_tgt)] for _ in range(j_src)]
        for l in range(j_tgt):
            for kk in range(j_mid):
                for outer in step[kk][l]:
                    for k in range(j_src):
                        for b in inner[k][kk]:
                            out[k][l].append(tuple(outer[u - 1] for u in b))
    theta = compose(system, i, t)
    assert all(len(out[k][l]) == theta[k][l] for k in range(len(out)) for l in range(len(out[0])))
    system._cache[key] = out
    return out
