"""Certify that the uniform trace on the 2,4,8,16 chain is close to an extreme trace.

Prints the chosen depth, thresholds and exact deviations for a few epsilons.
"""
import argparse
from fractions import Fraction

from villadsen.dimension_system import DimensionSystem
from villadsen.measures import uniform
from villadsen.observables import indicator
from villadsen.poulsen_density import HorizonExceeded, Neighborhood, certify, recheck_certificate
from villadsen.trace_tower import AFTrace, LevelTrace, TraceTower


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", nargs="*", default=["1/10", "1/100", "1/1000"])
    ap.add_argument("--horizon", type=int, default=3)
    args = ap.parse_args()

    sys_ = DimensionSystem.from_thetas((1,), [((2,),), ((4,),), ((8,),), ((16,),)])
    tau = TraceTower((LevelTrace(2, (1,), (uniform(2, 2),)),))
    groups = [[indicator(2, 1, 2, 2, c, a)] for c in (1, 2) for a in (1, 2)]
    af = AFTrace(((Fraction(1),),) * 5)
    print(f"{'eps':>8} {'N':>6} {'depth':>5} {'max deviation':>14} recheck verdict")
    for e in args.eps:
        nbhd = Neighborhood(Fraction(e), groups)
        try:
            cert = certify(sys_, tau, nbhd, args.horizon, af)
        except HorizonExceeded as exc:
            print(f"{e:>8} {'-':>6} {'-':>5} {'-':>14} {'-':>7} HorizonExceeded ({exc})")
            continue
        ok = recheck_certificate(cert.to_dict(), sys_, tau.level(2), nbhd)
        print(f"{e:>8} {cert.thresholds[0]:>6} {cert.depth:>5} {str(max(cert.deviations)):>14} {str(ok):>7} {cert.verdict}")


if __name__ == "__main__":
    main()
