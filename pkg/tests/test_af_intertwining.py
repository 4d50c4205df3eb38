import random
from fractions import Fraction

import pytest
from hypothesis import given

from conftest import seeds
from villadsen.af_intertwining import (
    AFVilladsenSystem,
    Convergence,
    DepthExhausted,
    FunctionCapExceeded,
    LimitType,
    ModeMismatch,
    composed_eval_count,
    composed_points,
    composed_total,
    defect_bound,
    delta_maps,
    fundamental_limit_table,
    fundamental_value,
    g_double_sequence,
    g_gap_identity,
    intertwining_report,
    n_tilde,
    phi_psi_function_maps,
    r_sequence,
    select_subsequence,
    telescoped,
    theta_maps,
    validate_af,
)
from villadsen.dimension_system import DimensionSystem, TailRule, compose, random_system


def j1(thetas, evals, n1=1, x=2):
    base = DimensionSystem.from_thetas((n1,), [((t,),) for t in thetas])
    return AFVilladsenSystem(base, tuple(((e,),) for e in evals), x)


def random_af(rng, levels=6, max_e=2, max_j=2, max_n=2):
    base = random_system(rng, levels=levels, max_j=max_j, max_n=max_n, max_theta=3)
    evals = []
    for i in range(1, levels):
        th = base.theta(i)
        evals.append(tuple(tuple(rng.randint(0, max_e) for _ in row) for row in th))
    return AFVilladsenSystem(base, tuple(evals))


CONVERGENT = j1([2**i for i in range(1, 13)], [1] * 12)
DIVERGENT = j1([2] * 12, [1] * 12)


def test_n_tilde_examples():
    zero = j1([2, 3, 4], [0, 0, 0])
    assert n_tilde(zero, 4) == [zero.base.n(i) for i in range(1, 5)]
    assert [x[0] for x in n_tilde(CONVERGENT, 4)] == [1, 3, 15, 135]


def test_n_tilde_two_summands_matrix_oracle():
    base = DimensionSystem.from_thetas((1, 2), [((1, 1), (2, 0)), ((1, 2), (1, 1))])
    evals = (((1, 0), (0, 2)), ((0, 1), (3, 0)))
    sys_ = AFVilladsenSystem(base, evals)
    vec = [1, 2]
    expect = [tuple(vec)]
    for th, e in zip([((1, 1), (2, 0)), ((1, 2), (1, 1))], evals):
        vec = [sum((th[k][l] + e[k][l]) * vec[k] for k in range(2)) for l in range(2)]
        expect.append(tuple(vec))
    assert n_tilde(sys_, 3) == expect


def test_theta_maps_zero_eval():
    zero = j1([2, 3, 4], [0, 0, 0])
    tm = theta_maps(zero, 1, 3)
    assert tm.big_theta == tm.theta_star
    assert tm.eval_count == ((0,),)


def test_composed_counts():
    tm = theta_maps(CONVERGENT, 1, 2)
    assert tm.total == ((15,),) and compose(CONVERGENT.base, 1, 2) == ((8,),) and tm.eval_count == ((7,),)


@given(seeds)
def test_composed_identities(seed):
    sys_ = random_af(random.Random(seed), levels=5)
    for i in range(1, 5):
        for t in range(1, 6 - i):
            tot = composed_total(sys_, i, t)
            th = compose(sys_.base, i, t)
            e = composed_eval_count(sys_, i, t)
            assert all(x >= 0 for row in e for x in row)
            assert all(a == b + c for ra, rb, rc in zip(tot, th, e) for a, b, c in zip(ra, rb, rc))
            tm = theta_maps(sys_, i, t)
            # Theta as a product of one-step maps equals the n-scaled composed total
            n_src, n_tgt = sys_.base.n(i), sys_.base.n(i + t)
            assert tm.big_theta == tuple(
                tuple(Fraction(n_src[k] * tot[k][l], n_tgt[l]) for l in range(len(n_tgt))) for k in range(len(n_src))
            )
            pts = composed_points(sys_, i, t)
            assert [[len(x) for x in row] for row in pts] == [list(r) for r in e]


def test_r_sequence_examples():
    zero = j1([2, 3, 4], [0, 0, 0])
    assert all(v == (1,) for v in r_sequence(zero, 4).r)
    rep = r_sequence(CONVERGENT, 12)
    assert [v[0] for v in rep.r[:4]] == [1, Fraction(3, 2), Fraction(15, 8), Fraction(135, 64)]
    # closed form: r_i is the product of (1 + 2^-m) for m < i
    prod = Fraction(1)
    for i, v in enumerate(rep.r, start=1):
        assert v[0] == prod
        prod *= 1 + Fraction(1, 2**i)
    assert rep.verdict is Convergence.CONVERGENT and rep.limit_type is LimitType.CONSTANT
    div = r_sequence(DIVERGENT, 12)
    assert [v[0] for v in div.r] == [Fraction(3, 2) ** (i - 1) for i in range(1, 13)]
    assert div.verdict is Convergence.DIVERGENT


def test_periodic_verdicts():
    conv = AFVilladsenSystem(DimensionSystem.from_thetas((1,), [((2,),)], TailRule((((2,),),))), (((1,),),))
    assert r_sequence(conv, 6).verdict is Convergence.CONVERGENT and r_sequence(conv, 6).exact
    div = AFVilladsenSystem(DimensionSystem.from_thetas((1,), [], TailRule((((2,),),), (((1,),),))))
    rep = r_sequence(div, 6)
    assert rep.verdict is Convergence.DIVERGENT and rep.exact


@given(seeds)
def test_r_invariants(seed):
    sys_ = random_af(random.Random(seed))
    nt = n_tilde(sys_, 6)
    rep = r_sequence(sys_, 6)
    for i in range(1, 7):
        n = sys_.base.n(i)
        assert all(a >= b for a, b in zip(nt[i - 1], n))
        assert rep.r[i - 1] == tuple(Fraction(a, b) for a, b in zip(nt[i - 1], n))
    assert rep.increasing and all(x >= 0 for inc in rep.increments for x in inc)


def test_g_sequence_examples():
    assert g_double_sequence(CONVERGENT, 1, 6) == r_sequence(CONVERGENT, 6).r
    assert all(v == (1,) for v in g_double_sequence(CONVERGENT, 6, 6))


@given(seeds)
def test_g_sequence_identities(seed):
    sys_ = random_af(random.Random(seed))
    g1 = g_double_sequence(sys_, 1, 6)
    for s in range(1, 7):
        gs = g_double_sequence(sys_, s, 6)
        assert all(a <= b for u, v in zip(gs, g1) for a, b in zip(u, v))
        tele = telescoped(sys_, s, 6)
        for d in range(6):
            assert tele[d] == tuple(x - 1 for x in gs[d])
        for i in range(s, 7):
            lhs, rhs = g_gap_identity(sys_, s, i)
            assert lhs == rhs


def test_fundamental_table():
    zero = j1([2, 3, 4], [0, 0, 0])
    assert all(v == (0,) for v in fundamental_limit_table(zero, [1, 2], [1, 2]).values())
    assert fundamental_value(CONVERGENT, 1, 3) == (Fraction(71, 64),)
    r = r_sequence(CONVERGENT, 12).r
    table = fundamental_limit_table(CONVERGENT, range(1, 6), range(1, 6))
    for (i, t), v in table.items():
        assert v[0] == r[i + t - 1][0] / r[i - 1][0] - 1
    # fixed long span: the values decrease with i
    assert all(table[(i, 5)] > table[(i + 1, 5)] for i in range(1, 5))


def test_defect_bound_examples():
    zero = j1([2, 3, 4], [0, 0, 0])
    db = defect_bound(zero, 1, 3)
    assert db.triangle == (0,) and db.doubled_sum == (0,)
    assert defect_bound(j1([2, 4, 8], [1, 1, 1]), 1, 3).doubled_sum == (Fraction(71, 32),)
    vals = [defect_bound(CONVERGENT, i, 3).certified[0] for i in range(1, 9)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_function_maps_single_step():
    sys_ = j1([2], [1], n1=2)
    fm = phi_psi_function_maps(sys_, 1, 1)
    assert fm.unital() and fm.positive()
    assert fm.brute_force_defect() == fm.defect_norm() <= defect_bound(sys_, 1, 1).triangle[0]
    # phi of the indicator of x_1 = 1 is the average of its pullbacks along the two blocks
    h = [1 if w[0] == 1 else 0 for _, w in fm.source]
    img = fm.apply("phi", h)[0]
    for y, v in zip(fm.targets[0], img):
        assert v == Fraction((y[0] == 1) + (y[2] == 1), 2)
    consts = fm.apply("psi", [5] * len(fm.source))
    assert all(v == 5 for v in consts[0])


def test_function_cap():
    with pytest.raises(FunctionCapExceeded):
        phi_psi_function_maps(j1([2, 2], [1, 1], n1=8), 1, 2)


@given(seeds)
def test_function_maps_random(seed):
    rng = random.Random(seed)
    base = random_system(rng, levels=2, max_j=2, max_n=2, max_theta=2)
    if any(x > 4 for x in base.n(2)):
        base = DimensionSystem.from_thetas((1, 1), [((1, 1), (0, 1))])
    e = tuple(tuple(rng.randint(0, 2) for _ in row) for row in base.theta(1))
    sys_ = AFVilladsenSystem(base, (e,))
    fm = phi_psi_function_maps(sys_, 1, 1)
    assert fm.unital() and fm.positive()
    tri = defect_bound(sys_, 1, 1).triangle
    assert all(a <= b for a, b in zip(fm.defect_norm_per_target(), tri))
    assert fm.brute_force_defect() == fm.defect_norm()


def test_select_subsequence_examples():
    zero = j1([2] * 6, [0] * 6)
    assert select_subsequence(zero, 6, "constant").s == [1, 2, 3, 4, 5, 6]
    res = select_subsequence(CONVERGENT, 12, "constant")
    assert len(res.checks) >= 4 and all(c["ok"] for c in res.checks)
    with pytest.raises(ModeMismatch):
        select_subsequence(DIVERGENT, 12, "cone")
    with pytest.raises(ModeMismatch):
        select_subsequence(CONVERGENT, 12, "cone")
    with pytest.raises(DepthExhausted):
        select_subsequence(CONVERGENT, 12, "constant", count=20)


def nonconstant_example():
    base = DimensionSystem.from_thetas((1, 1), [((2, 0), (0, 2))] * 10)
    evals = tuple(((1 if i < 3 else 0, 0), (0, 0)) for i in range(10))
    return AFVilladsenSystem(base, evals)


def test_cone_mode_and_delta_maps():
    sys_ = nonconstant_example()
    res = select_subsequence(sys_, 10, "cone")
    assert res.truncation_conditional
    steps = delta_maps(sys_, res.s, res.r_norm)
    assert steps and all(st.forward_ok and st.backward_ok and st.r_below_norm for st in steps)
    capped = select_subsequence(sys_, 10, "cone", r_cap=Fraction(4))
    assert not capped.truncation_conditional
    # a constant limit may still run in cone mode when the user asks for it
    assert select_subsequence(CONVERGENT, 12, "cone", allow_constant_in_cone=True).s


def test_delta_maps_identity_when_r_is_one():
    zero = j1([2] * 5, [0] * 5)
    for st in delta_maps(zero, [1, 2, 3, 4]):
        assert st.scale == (1,) and all(f == (0, 0) for f in st.forward)


def test_report_and_validation():
    rep = intertwining_report(CONVERGENT, 12)
    assert rep.verdicts["intertwining_bounds_verified"] and rep.verdicts["mode"] == "constant"
    bad = AFVilladsenSystem(CONVERGENT.base, (((-1,),),))
    assert "eval_counts" in validate_af(bad).kinds()
    assert "cone" == intertwining_report(nonconstant_example(), 10).verdicts["mode"]
