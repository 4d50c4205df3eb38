from fractions import Fraction

import pytest
from hypothesis import given

from conftest import systems
from villadsen.dimension_system import (
    DimensionSystem,
    LevelOutOfRange,
    LevelSpec,
    Simplicity,
    TailRule,
    UniqueTrace,
    column_diameter,
    compose,
    identity_system,
    is_infinite_dimensional,
    period_matrix,
    primitivity_exponent,
    simplicity_verdict,
    trace_pullback_matrix,
    unique_trace_diagnostic,
    validate,
)
from villadsen.rationals import matmul


def count_paths(system, i, t, k, l):
    """Oracle: number of paths in the Bratteli diagram from (i, k) to (i + t, l)."""
    if t == 0:
        return int(k == l)
    th = system.theta(i)
    return sum(th[k][m] * count_paths(system, i + 1, t - 1, m, l) for m in range(len(th[0])))


def test_valid_chain():
    sys_ = DimensionSystem((LevelSpec((1,), ((2,),)), LevelSpec((2,), ((2,),)), LevelSpec((4,))))
    assert validate(sys_).ok


def test_two_summand_valid():
    sys_ = DimensionSystem((LevelSpec((1, 1), ((1, 1), (1, 1))), LevelSpec((2, 2))))
    assert validate(sys_).ok


def test_unitality_violation_message():
    rep = validate(DimensionSystem((LevelSpec((1,), ((2,),)), LevelSpec((3,)))))
    assert not rep.ok
    assert rep.kinds() == {"unitality"}
    assert "unitality at (1,1)" in rep.violations[0].message


@pytest.mark.parametrize(
    "theta,kind",
    [
        (((1, 0), (0, 0)), "injectivity"),
        (((1, 0), (1, 0)), "zero_column"),
        (((1, -1), (0, 1)), "negative"),
        (((1, 1, 1),), "shape"),
    ],
)
def test_structural_violations(theta, kind):
    sys_ = DimensionSystem((LevelSpec((1, 1), theta), LevelSpec((1, 1))))
    assert kind in validate(sys_).kinds()


def test_theta_gap_and_bad_tail():
    gap = DimensionSystem((LevelSpec((1,), None), LevelSpec((1,), ((1,),)), LevelSpec((1,))))
    assert "theta_gap" in validate(gap).kinds()
    tail = DimensionSystem.from_thetas((1,), [((1,),)], TailRule((((1, 1),),)))
    assert "tail" in validate(tail).kinds()


def test_compose_single_step_and_example():
    sys_ = DimensionSystem.from_thetas((1, 1), [((1, 1), (1, 1)), ((2, 1), (1, 2))])
    assert compose(sys_, 1, 1) == ((1, 1), (1, 1))
    assert compose(sys_, 1, 2) == ((3, 3), (3, 3))
    assert sys_.n(3) == (6, 6)
    p = trace_pullback_matrix(sys_, 1, 2)
    assert all(x == Fraction(1, 2) for row in p.entries for x in row)


def test_identity_compose_and_chain_pullback():
    sys_ = identity_system(3, 4, (1, 2, 3))
    assert compose(sys_, 1, 3) == ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    chain = DimensionSystem.from_thetas((1,), [((2,),), ((3,),)])
    assert trace_pullback_matrix(chain, 1, 2).entries == ((Fraction(1),),)


def test_level_out_of_range():
    sys_ = DimensionSystem.from_thetas((1,), [((2,),)])
    with pytest.raises(LevelOutOfRange):
        sys_.theta(2)
    with pytest.raises(LevelOutOfRange):
        sys_.n(3)


def test_tail_rule_generates_levels():
    sys_ = DimensionSystem.from_thetas((1,), [((2,),)], TailRule((((3,),), ((5,),))))
    assert [sys_.n(i) for i in range(1, 6)] == [(1,), (2,), (6,), (30,), (90,)]
    assert sys_.max_level is None and sys_.has_level(1000)


@given(systems(levels=5))
def test_compose_matches_path_count(sys_):
    top = sys_.max_level
    for i in range(1, top):
        for t in range(1, top - i + 1):
            th = compose(sys_, i, t)
            assert th == tuple(
                tuple(count_paths(sys_, i, t, k, l) for l in range(sys_.j(i + t))) for k in range(sys_.j(i))
            )


@given(systems(levels=5))
def test_order_unit_and_functoriality(sys_):
    top = sys_.max_level
    for i in range(1, top):
        for t in range(1, top - i + 1):
            th = compose(sys_, i, t)
            n_src, n_tgt = sys_.n(i), sys_.n(i + t)
            for l in range(len(n_tgt)):
                assert sum(n_src[k] * th[k][l] for k in range(len(n_src))) == n_tgt[l]
            p = trace_pullback_matrix(sys_, i, t)
            assert p.is_stochastic()
            for s in range(1, top - i - t + 1):
                assert compose(sys_, i, t + s) == matmul(th, compose(sys_, i + t, s))
                assert trace_pullback_matrix(sys_, i, t + s).entries == (p @ trace_pullback_matrix(sys_, i + t, s)).entries


def test_simplicity_examples():
    pos = DimensionSystem.from_thetas((1, 1), [((1, 2), (1, 1))] * 3)
    rep = simplicity_verdict(pos, 4)
    assert rep.verdict is Simplicity.SIMPLE
    assert set(rep.witnesses.values()) == {1}

    blocky = DimensionSystem.from_thetas((1, 1), [], TailRule((((1, 0), (0, 1)),)))
    assert simplicity_verdict(blocky, 4).verdict is Simplicity.NOT_SIMPLE_PERIODIC

    fib = DimensionSystem.from_thetas((1, 1), [], TailRule((((1, 1), (1, 0)),)))
    rep = simplicity_verdict(fib, 4)
    assert rep.verdict is Simplicity.SIMPLE_PERIODIC
    # oracle: integer powers of [[1,1],[1,0]] are positive from the second power on
    m = ((1, 1), (1, 0))
    assert any(x == 0 for row in m for x in row)
    assert all(x > 0 for row in matmul(m, m) for x in row)
    assert rep.periodic_exponent == 2


def test_not_yet_witnessed_truncation():
    sys_ = identity_system(2, 4)
    assert simplicity_verdict(sys_, 4).verdict is Simplicity.NOT_YET_WITNESSED


@pytest.mark.parametrize(
    "matrix,expected",
    [(((1, 1), (1, 0)), 2), (((0, 1), (1, 0)), None), (((2,),), 1), (((0, 1, 0), (0, 0, 1), (1, 1, 0)), 5)],
)
def test_primitivity_exponent(matrix, expected):
    assert primitivity_exponent(matrix) == expected
    if expected is not None:
        power = matrix
        for _ in range(expected - 1):
            power = matmul(power, matrix)
        assert all(x > 0 for row in power for x in row)


def test_unique_trace_chain_and_rank_one():
    chain = DimensionSystem.from_thetas((1,), [((2,),)] * 3)
    rep = unique_trace_diagnostic(chain, 4, Fraction(1, 100))
    assert all(d == 0 for _, d in rep.diameters)
    assert rep.verdict is UniqueTrace.LIKELY
    flat = DimensionSystem.from_thetas((1, 1), [((1, 1), (1, 1))] * 2)
    rep = unique_trace_diagnostic(flat, 3, Fraction(1, 100))
    assert dict(rep.diameters)[2] == 0


def test_unique_trace_periodic_closed_form():
    sys_ = DimensionSystem.from_thetas((1, 1), [], TailRule((((2, 1), (1, 2)),)))
    rep = unique_trace_diagnostic(sys_, 6, Fraction(1, 100))
    diams = [d for _, d in rep.diameters]
    # columns of P(1,t) are ((3^t+1)/2, (3^t-1)/2)/3^t and its swap
    assert diams == [Fraction(2, 3**t) for t in range(1, 6)]
    assert all(a > b for a, b in zip(diams, diams[1:]))
    assert rep.verdict is UniqueTrace.PERIODIC and rep.contraction < 1


def test_column_diameter_of_identity():
    sys_ = identity_system(2, 2)
    assert column_diameter(trace_pullback_matrix(sys_, 1, 1)) == 2


def test_period_matrix_and_infinite_dimensional():
    sys_ = DimensionSystem.from_thetas((1,), [((2,),)], TailRule((((2,),), ((3,),))))
    assert period_matrix(sys_) == ((6,),)
    assert is_infinite_dimensional(sys_)
    assert not is_infinite_dimensional(identity_system(2, 4))
