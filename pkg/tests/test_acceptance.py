"""Acceptance criteria 1 to 9, each at its stated size and exact tolerance.

Every test carries an ``acceptance`` marker; the terminal summary prints one
PASS/FAIL line per criterion.
"""
import json
import random
from fractions import Fraction
from itertools import product as iproduct

import pytest

from villadsen.af_intertwining import (
    AFVilladsenSystem,
    Convergence,
    ModeMismatch,
    defect_bound,
    fundamental_limit_table,
    g_double_sequence,
    phi_psi_function_maps,
    r_sequence,
    select_subsequence,
    telescoped,
)
from villadsen.dimension_system import DimensionSystem, compose, random_system, trace_pullback_matrix
from villadsen.measures import dirac, from_weights, uniform
from villadsen.observables import LocalTerm, Observable, indicator
from villadsen.partition_scheme import intertwiner, random_partition, random_permutations, verify_commutation
from villadsen.poulsen_density import (
    Neighborhood,
    average_expectation,
    build_eta,
    certify,
    quantize_measure,
    recheck_certificate,
)
from villadsen.trace_tower import (
    AFTrace,
    LevelTrace,
    TraceTower,
    consistency_failures,
    extend_af_trace,
    fiber_check,
    is_extreme_truncation,
    random_af_trace,
    random_measure,
)


def naive_matmul(a, b):
    return tuple(tuple(sum(a[r][x] * b[x][c] for x in range(len(b))) for c in range(len(b[0]))) for r in range(len(a)))


def j1(thetas, evals):
    base = DimensionSystem.from_thetas((1,), [((t,),) for t in thetas])
    return AFVilladsenSystem(base, tuple(((e,),) for e in evals))


@pytest.mark.acceptance(1, "unitality and functoriality on 200 random systems")
def test_criterion_1():
    rng = random.Random(1)
    failures = 0
    for _ in range(200):
        sys_ = random_system(rng, levels=rng.randint(2, 5), max_j=3, max_n=4, max_theta=3)
        top = sys_.max_level
        for i in range(1, top):
            for t in range(1, top - i + 1):
                th = compose(sys_, i, t)
                n_src, n_tgt = sys_.n(i), sys_.n(i + t)
                if any(sum(n_src[k] * th[k][l] for k in range(len(n_src))) != n_tgt[l] for l in range(len(n_tgt))):
                    failures += 1
                pull = trace_pullback_matrix(sys_, i, t)
                if not pull.is_stochastic():
                    failures += 1
                for s in range(1, top - i - t + 1):
                    if compose(sys_, i, t + s) != naive_matmul(th, compose(sys_, i + t, s)):
                        failures += 1
                    if trace_pullback_matrix(sys_, i, t + s).entries != naive_matmul(pull.entries, trace_pullback_matrix(sys_, i + t, s).entries):
                        failures += 1
    assert failures == 0


@pytest.mark.acceptance(2, "100 random permutation squares commute")
def test_criterion_2():
    rng = random.Random(2)
    failures = 0
    for _ in range(100):
        sys_ = random_system(rng, levels=2)
        p, q = random_partition(sys_, 1, rng), random_partition(sys_, 1, rng)
        sigma = random_permutations(sys_.n(1), rng)
        gamma = intertwiner(p, q, sigma, sys_)
        failures += not verify_commutation(p, q, sigma, gamma, sys_)
    assert failures == 0


@pytest.mark.acceptance(3, "50 extended towers are consistent and in their fiber")
def test_criterion_3():
    rng = random.Random(3)
    failures = 0
    for _ in range(50):
        sys_ = random_system(rng, levels=4, max_n=3, max_theta=3)
        af = random_af_trace(rng, sys_, 4)
        seeds_ = [random_measure(rng, nk, 2, max_atoms=6) for nk in sys_.n(1)]
        tower = extend_af_trace(sys_, af, seeds_)
        failures += bool(consistency_failures(sys_, tower)) + (not fiber_check(tower, af))
    assert failures == 0


@pytest.mark.acceptance(4, "certificate on the 2,4,8,16 chain with bit-for-bit recheck")
@pytest.mark.parametrize("eps", [Fraction(1, 10), Fraction(1, 100)])
def test_criterion_4(eps):
    sys_ = DimensionSystem.from_thetas((1,), [((2,),), ((4,),), ((8,),), ((16,),)])
    m = 2  # seed dims [2, 3]: two minimal central projections
    tau = TraceTower((LevelTrace(2, (1,), (uniform(2, m),)),))
    groups = [[indicator(2, 1, 2, m, c, a)] for c in (1, 2) for a in (1, 2)]
    nbhd = Neighborhood(eps, groups)
    af = AFTrace(((Fraction(1),),) * 5)
    cert = certify(sys_, tau, nbhd, 3, af)
    assert cert.passed and all(d < eps for d in cert.deviations)
    # tau(b) by explicit enumeration of the uniform measure on {1,2}^2
    for (g,), tv in zip(groups, cert.tau_values):
        assert tv == sum(Fraction(1, 4) * g.value(w) for w in iproduct((1, 2), repeat=2)) == Fraction(1, 2)
    eta = build_eta(sys_, 2, cert.depth, [[[dirac(w, m) for w in s] for s in row] for row in cert.selections], af)
    assert is_extreme_truncation(eta, 2 + cert.depth) and fiber_check(eta, af)
    data = json.loads(json.dumps(cert.to_dict()))
    assert recheck_certificate(data, sys_, tau.level(2), nbhd)


@pytest.mark.acceptance(5, "largest-remainder quantizer on 500 measures")
def test_criterion_5():
    rng = random.Random(5)
    failures = 0
    for _ in range(500):
        m, length = rng.randint(2, 3), rng.randint(1, 3)
        words = sorted({tuple(rng.randint(1, m) for _ in range(length)) for _ in range(rng.randint(1, 16))})
        mu = from_weights(m, length, {w: rng.randint(1, 20) for w in words})
        n = rng.randint(1, 64)
        q = quantize_measure(mu, n)
        got = dict(q.counts)
        if sum(got.values()) != n or any(abs(p - Fraction(got.get(w, 0), n)) >= Fraction(1, n) for w, p in mu.atoms.items()):
            failures += 1
        for _ in range(20):
            coords = tuple(sorted(rng.sample(range(1, length + 1), rng.randint(1, length))))
            table = {w: Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for w in iproduct(range(1, m + 1), repeat=len(coords))}
            obs = Observable(1, 1, length, m, (LocalTerm(coords, table),))
            err = abs(average_expectation(q, obs) - obs.expectation(mu))
            if err > obs.sup_bound * len(mu.atoms) / n:
                failures += 1
    assert failures == 0


@pytest.mark.acceptance(6, "convergent example: r, limit table, constant-mode subsequence")
def test_criterion_6():
    sys_ = j1([2**i for i in range(1, 13)], [1] * 12)
    rep = r_sequence(sys_, 12)
    r = [v[0] for v in rep.r]
    assert r[:4] == [1, Fraction(3, 2), Fraction(15, 8), Fraction(135, 64)]
    assert rep.verdict is Convergence.CONVERGENT
    for i in range(1, 12):
        for (_, t), v in fundamental_limit_table(sys_, [i], range(1, 13 - i)).items():
            assert v[0] == r[i + t - 1] / r[i - 1] - 1
    res = select_subsequence(sys_, 12, "constant")
    for i in range(1, 5):
        a, b = res.s[i - 1], res.s[i + 1]
        assert b <= 12
        assert all(x < Fraction(1, 2**i) for x in defect_bound(sys_, a, b - a).doubled_sum)


@pytest.mark.acceptance(7, "divergent control and cone-mode mismatch")
def test_criterion_7():
    sys_ = j1([2] * 12, [1] * 12)
    rep = r_sequence(sys_, 12)
    assert [v[0] for v in rep.r] == [Fraction(3, 2) ** (i - 1) for i in range(1, 13)]
    assert rep.verdict is Convergence.DIVERGENT
    with pytest.raises(ModeMismatch):
        select_subsequence(sys_, 12, "cone")


@pytest.mark.acceptance(8, "function-level oracle on X = 2, n <= 4")
def test_criterion_8():
    rng = random.Random(8)
    cases = [j1([2], [1]), AFVilladsenSystem(DimensionSystem.from_thetas((2,), [((2,),)]), (((1,),),))]
    while len(cases) < 25:
        base = random_system(rng, levels=2, max_j=2, max_n=2, max_theta=2)
        if max(base.n(2)) > 4:
            continue
        e = tuple(tuple(rng.randint(0, 2) for _ in row) for row in base.theta(1))
        cases.append(AFVilladsenSystem(base, (e,)))
    for sys_ in cases:
        fm = phi_psi_function_maps(sys_, 1, 1)
        assert fm.unital()
        tri = defect_bound(sys_, 1, 1).triangle
        assert fm.brute_force_defect() <= max(tri)
        assert all(a <= b for a, b in zip(fm.defect_norm_per_target(), tri))


@pytest.mark.acceptance(9, "g-sequence ordering and telescoping on 20 systems")
def test_criterion_9():
    rng = random.Random(9)
    for _ in range(20):
        j = rng.randint(1, 2)
        n1 = [rng.randint(1, 2) for _ in range(j)]
        thetas, evals = [], []
        for i in range(1, 6):
            thetas.append([[rng.randint(1, 2**i) for _ in range(j)] for _ in range(j)])
            evals.append(tuple(tuple(rng.randint(0, 1) for _ in range(j)) for _ in range(j)))
        sys_ = AFVilladsenSystem(DimensionSystem.from_thetas(n1, thetas), tuple(evals))
        g1 = g_double_sequence(sys_, 1, 6)
        for s in range(1, 7):
            gs = g_double_sequence(sys_, s, 6)
            assert all(a <= b for u, v in zip(gs, g1) for a, b in zip(u, v))
            assert telescoped(sys_, s, 6) == [tuple(x - 1 for x in v) for v in gs]
