"""Seeded randomized sweep over random systems; prints failure counts per property.

Larger than the test suite; useful before tagging a result.
"""
import argparse
import random

from villadsen.dimension_system import compose, random_system, trace_pullback_matrix
from villadsen.partition_scheme import intertwiner, random_partition, random_permutations, verify_commutation
from villadsen.rationals import matmul
from villadsen.trace_tower import consistency_failures, extend_af_trace, fiber_check, random_af_trace, random_measure


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--systems", type=int, default=1000)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    fails = {"functoriality": 0, "commutation": 0, "tower": 0}
    for _ in range(args.systems):
        sys_ = random_system(rng, levels=4, max_n=3)
        top = sys_.max_level
        for i in range(1, top - 1):
            if compose(sys_, i, 2) != matmul(sys_.theta(i), sys_.theta(i + 1)):
                fails["functoriality"] += 1
            if trace_pullback_matrix(sys_, i, 2).entries != (trace_pullback_matrix(sys_, i, 1) @ trace_pullback_matrix(sys_, i + 1, 1)).entries:
                fails["functoriality"] += 1
        p, q = random_partition(sys_, 1, rng), random_partition(sys_, 1, rng)
        sigma = random_permutations(sys_.n(1), rng)
        fails["commutation"] += not verify_commutation(p, q, sigma, intertwiner(p, q, sigma, sys_), sys_)
        af = random_af_trace(rng, sys_, top)
        tower = extend_af_trace(sys_, af, [random_measure(rng, nk, 2, max_atoms=4) for nk in sys_.n(1)])
        fails["tower"] += bool(consistency_failures(sys_, tower)) or not fiber_check(tower, af)
    for k, v in fails.items():
        print(f"{k:14s} failures: {v} / {args.systems}")


if __name__ == "__main__":
    main()
