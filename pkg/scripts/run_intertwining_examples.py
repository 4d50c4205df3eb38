"""r-sequences, defect bounds and subsequences for the convergent and divergent examples."""
import argparse

from villadsen.af_intertwining import (
    AFVilladsenSystem,
    DepthExhausted,
    ModeMismatch,
    defect_bound,
    fundamental_value,
    r_sequence,
    select_subsequence,
)
from villadsen.dimension_system import DimensionSystem


def j1(thetas, evals):
    base = DimensionSystem.from_thetas((1,), [((t,),) for t in thetas])
    return AFVilladsenSystem(base, tuple(((e,),) for e in evals))


def show(name, sys_, depth):
    rep = r_sequence(sys_, depth)
    print(f"== {name}: verdict {rep.verdict.value}, limit {rep.limit_type.value}")
    print("   i   r_i                      float(r_i)   sum_t fundamental(i, 3)")
    for i, v in enumerate(rep.r, start=1):
        fv = fundamental_value(sys_, i, 3)[0] if i + 3 <= depth else None
        print(f"  {i:2d}   {str(v[0]):24s} {float(v[0]):10.6f}   {'' if fv is None else float(fv)}")
    for mode in ("constant", "cone"):
        try:
            res = select_subsequence(sys_, depth, mode)
        except (ModeMismatch, DepthExhausted) as exc:
            print(f"   {mode}: {type(exc).__name__}: {exc}")
            continue
        print(f"   {mode}: s = {res.s}")
        for c in res.checks:
            a, b = c["span"]
            bound = defect_bound(sys_, a, b - a).doubled_sum[0]
            print(f"     i={c['i']} span {a}->{b}  doubled sum {float(bound):.3e} < 2^-{c['i']}: {c['ok']}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=12)
    args = ap.parse_args()
    d = args.depth
    show("theta_i = 2^i, |E_i| = 1", j1([2**i for i in range(1, d + 1)], [1] * d), d)
    show("theta_i = 2, |E_i| = 1", j1([2] * d, [1] * d), d)


if __name__ == "__main__":
    main()
