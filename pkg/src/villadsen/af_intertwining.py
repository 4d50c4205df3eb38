"""Approximate intertwining between an AF-Villadsen system and its evaluation-free twin.

``D`` adds ``|E_{i;k,l}|`` point evaluations to each partial map of ``B``;
matrix sizes grow by ``n~_{i+1,l} = sum_k (theta + |E|)_{i;k,l} n~_{i,k}``.
Everything is computed on the affine-function side, where level ``i`` is
``R^{j_i}`` (scalar part) or functions on a finite seed space ``X^{n_{i,k}}``.
Composed evaluation counts are ``composed_total - composed theta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import product as iproduct
from typing import Optional, Sequence

from .dimension_system import (
    DimensionSystem,
    ValidationReport,
    compose,
    period_matrix,
    primitivity_exponent,
    validate,
)
from .measures import Word
from .partition_scheme import composed_blocks
from .rationals import Matrix, QMatrix, fmt, fmt_mat, fmt_vec, matmul, push, sup_norm

DENSE_FUNCTION_CAP = 2**20


class ModeMismatch(ValueError):
    """The r-sequence diagnosis does not support the requested intertwining mode."""


class DepthExhausted(RuntimeError):
    """No admissible subsequence exists within the available depth."""


class FunctionCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class AFVilladsenSystem:
    base: DimensionSystem
    eval_counts: tuple[Matrix, ...] = ()
    x_size: int = 2
    eval_points: Optional[dict] = None  # level -> [k][l] -> list of words over 1..x_size

    def E(self, i: int) -> Matrix:
        if i <= len(self.eval_counts):
            return self.eval_counts[i - 1]
        tail = self.base.tail_rule
        p = self.base.tail_index(i)
        if p is not None and tail is not None and tail.eval_counts is not None:
            return tail.eval_counts[p]
        if p is not None or self.base.has_level(i + 1):
            th = self.base.theta(i)
            return tuple(tuple(0 for _ in row) for row in th)
        raise IndexError(f"no evaluation counts out of level {i}")

    def total(self, i: int) -> Matrix:
        th, e = self.base.theta(i), self.E(i)
        return tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(th, e))

    def points(self, i: int) -> list[list[list[Word]]]:
        """Explicit evaluation points of one step; defaults to the first |E| words."""
        if self.eval_points is not None and i in self.eval_points:
            return self.eval_points[i]
        e = self.E(i)
        n = self.base.n(i)
        out = []
        for k, row in enumerate(e):
            words = iproduct(range(1, self.x_size + 1), repeat=n[k])
            pool = []
            need = max(row) if row else 0
            for w in words:
                if len(pool) >= need:
                    break
                pool.append(w)
            if len(pool) < need:
                raise ValueError(f"X^{n[k]} has fewer than {need} points")
            out.append([pool[:c] for c in row])
        return out


def validate_af(sys: AFVilladsenSystem) -> ValidationReport:
    report = validate(sys.base)
    if sys.x_size < 2:
        report.add("x_size", (), "seed space needs at least two points")
    for i, e in enumerate(sys.eval_counts, start=1):
        try:
            th = sys.base.theta(i)
        except IndexError:
            report.add("eval_counts", (i,), f"eval counts given out of level {i} but no theta")
            continue
        if len(e) != len(th) or any(len(a) != len(b) for a, b in zip(e, th)):
            report.add("eval_counts", (i,), f"eval counts of level {i} do not match theta shape")
            continue
        for k, row in enumerate(e):
            for l, x in enumerate(row):
                if not isinstance(x, int) or x < 0:
                    report.add("eval_counts", (i, k + 1, l + 1), f"|E| = {x} is not a nonnegative integer")
    if sys.eval_points:
        for i, pts in sys.eval_points.items():
            e, n = sys.E(i), sys.base.n(i)
            for k, row in enumerate(pts):
                for l, words in enumerate(row):
                    if len(words) != e[k][l]:
                        report.add("eval_points", (i, k + 1, l + 1), f"{len(words)} points for |E| = {e[k][l]}")
                    for w in words:
                        if len(w) != n[k] or any(not 1 <= x <= sys.x_size for x in w):
                            report.add("eval_points", (i, k + 1, l + 1), f"point {w} not in X^{n[k]}")
    return report


# -- n~ and the scalar maps --------------------------------------------------------------


def n_tilde(sys: AFVilladsenSystem, depth: int) -> list[tuple[int, ...]]:
    """n~_1 = n_1 and n~_{i+1} = (theta_i + E_i)^T n~_i, for levels 1..depth."""
    out = [sys.base.n(1)]
    for i in range(1, depth):
        out.append(push(sys.total(i), out[-1]))
    return out


def composed_total(sys: AFVilladsenSystem, i: int, t: int) -> Matrix:
    out = sys.total(i)
    for s in range(i + 1, i + t):
        out = matmul(out, sys.total(s))
    return out


def composed_eval_count(sys: AFVilladsenSystem, i: int, t: int) -> Matrix:
    tot, th = composed_total(sys, i, t), compose(sys.base, i, t)
    return tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(tot, th))


def _scaled(sys: AFVilladsenSystem, mat: Matrix, i: int, t: int) -> QMatrix:
    n_src, n_tgt = sys.base.n(i), sys.base.n(i + t)
    return tuple(
        tuple(Fraction(n_src[k] * mat[k][l], n_tgt[l]) for l in range(len(n_tgt))) for k in range(len(n_src))
    )


def big_theta_step(sys: AFVilladsenSystem, i: int) -> QMatrix:
    """Theta_i = [n_{i,k} (theta + |E|)_{i;k,l} / n_{i+1,l}]."""
    return _scaled(sys, sys.total(i), i, 1)


@dataclass(frozen=True)
class ThetaMaps:
    theta_star: QMatrix
    big_theta: QMatrix
    total: Matrix
    eval_count: Matrix

    def difference(self) -> QMatrix:
        return tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self.big_theta, self.theta_star))

    def to_dict(self) -> dict:
        return {
            "theta_star": fmt_mat(self.theta_star),
            "Theta": fmt_mat(self.big_theta),
            "composed_total": [list(r) for r in self.total],
            "composed_eval_count": [list(r) for r in self.eval_count],
        }


def theta_maps(sys: AFVilladsenSystem, i: int, t: int) -> ThetaMaps:
    """Composed theta**, Theta (as a product of one-step maps), totals and eval counts."""
    theta_star = _scaled(sys, compose(sys.base, i, t), i, t)
    big = big_theta_step(sys, i)
    for s in range(i + 1, i + t):
        big = matmul(big, big_theta_step(sys, s))
    return ThetaMaps(theta_star, big, composed_total(sys, i, t), composed_eval_count(sys, i, t))


# -- r and g ------------------------------------------------------------------------------


class Convergence(str, Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"
    UNDECIDED = "undecided"


class LimitType(str, Enum):
    CONSTANT = "constant"
    NONCONSTANT = "nonconstant"
    DIVERGENT = "divergent"
    UNKNOWN = "unknown"


@dataclass
class RReport:
    r: list[tuple[Fraction, ...]]
    increments: list[tuple[Fraction, ...]]
    increment_norms: list[Fraction]
    tail_sums: list[Fraction]
    increasing: bool
    verdict: Convergence
    limit_type: LimitType
    tail_estimate: Optional[Fraction]
    ratio_bound: Optional[Fraction]
    exact: bool
    tol: Fraction

    @property
    def norm(self) -> Fraction:
        return sup_norm(self.r[-1])

    def to_dict(self) -> dict:
        return {
            "r": [fmt_vec(v) for v in self.r],
            "increments": [fmt_vec(v) for v in self.increments],
            "increment_norms": fmt_vec(self.increment_norms),
            "tail_sums": fmt_vec(self.tail_sums),
            "increasing": self.increasing,
            "verdict": self.verdict.value,
            "limit_type": self.limit_type.value,
            "tail_estimate": None if self.tail_estimate is None else fmt(self.tail_estimate),
            "ratio_bound": None if self.ratio_bound is None else fmt(self.ratio_bound),
            "exact_verdict": self.exact,
            "truncation_sup_norm": fmt(self.norm),
            "tol": fmt(self.tol),
        }


def r_sequence(sys: AFVilladsenSystem, depth: int, tol=Fraction(1, 100), window: int = 3) -> RReport:
    """r_i = n~_i / n_i, its increments (Theta_i - theta**_i)(r_i) and a convergence diagnosis."""
    tol = Fraction(tol)
    nt = n_tilde(sys, depth)
    r = [tuple(Fraction(a, b) for a, b in zip(nt[i - 1], sys.base.n(i))) for i in range(1, depth + 1)]
    incs, norms = [], []
    increasing = True
    for i in range(1, depth):
        star = _scaled(sys, sys.base.theta(i), i, 1)
        d = tuple(a - b for a, b in zip(r[i], push(star, r[i - 1])))
        # the same increment computed as (Theta_i - theta**_i)(r_i)
        big = big_theta_step(sys, i)
        diff = tuple(tuple(a - b for a, b in zip(x, y)) for x, y in zip(big, star))
        assert push(diff, r[i - 1]) == d
        increasing &= all(x >= 0 for x in d)
        incs.append(d)
        norms.append(sup_norm(d))
    tails = [sum(norms[s:], Fraction(0)) for s in range(len(norms))]

    verdict, exact = Convergence.UNDECIDED, False
    tail_est = ratio = None
    base = sys.base
    if base.tail_rule is not None:
        exact = True
        tail = base.tail_rule
        zero_tail = tail.eval_counts is None or all(x == 0 for e in tail.eval_counts for row in e for x in row)
        if zero_tail:
            verdict = Convergence.CONVERGENT
        elif primitivity_exponent(period_matrix(base)) is not None:
            verdict = Convergence.DIVERGENT
        else:
            exact = False
    if not exact:
        nz = [x for x in norms]
        if all(x == 0 for x in nz[-window:] or [Fraction(0)]):
            verdict, tail_est = Convergence.CONVERGENT, Fraction(0)
        elif len(nz) >= 2:
            last = nz[-(window + 1):]
            ratios = [b / a if a else None for a, b in zip(last, last[1:])]
            if all(q is not None for q in ratios):
                ratio = max(ratios)
                if ratio < 1:
                    tail_est = nz[-1] * ratio / (1 - ratio)
                    if tail_est < tol:
                        verdict = Convergence.CONVERGENT
                elif min(ratios) >= 1:
                    verdict = Convergence.DIVERGENT
    if verdict is Convergence.CONVERGENT:
        last = r[-1]
        if len(last) == 1 or max(last) - min(last) < tol:
            limit = LimitType.CONSTANT
        else:
            limit = LimitType.NONCONSTANT
    elif verdict is Convergence.DIVERGENT:
        limit = LimitType.DIVERGENT
    else:
        limit = LimitType.UNKNOWN
    return RReport(r, incs, norms, tails, increasing, verdict, limit, tail_est, ratio, exact, tol)


def g_double_sequence(sys: AFVilladsenSystem, s: int, depth: int) -> list[tuple[Fraction, ...]]:
    """Replace the first s terms of (r_i) by order units, then continue with Theta."""
    g = [tuple(Fraction(1) for _ in sys.base.n(1))]
    for i in range(2, depth + 1):
        if i <= s:
            step = _scaled(sys, sys.base.theta(i - 1), i - 1, 1)
        else:
            step = big_theta_step(sys, i - 1)
        g.append(push(step, g[-1]))
    return g


def g_gap_identity(sys: AFVilladsenSystem, s: int, i: int) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """Both sides of g_i^(1) - g_i^(s) = Theta_{s,i-1}((Theta_{1,s-1} - theta**_{1,s-1})(r_1)), i >= s."""
    g1 = g_double_sequence(sys, 1, i)[-1]
    gs = g_double_sequence(sys, s, i)[-1]
    lhs = tuple(a - b for a, b in zip(g1, gs))
    ones = tuple(Fraction(1) for _ in sys.base.n(1))
    if s == 1:
        inner = tuple(Fraction(0) for _ in ones)
    else:
        tm = theta_maps(sys, 1, s - 1)
        inner = push(tm.difference(), ones)
    rhs = push(theta_maps(sys, s, i - s).big_theta, inner) if i > s else inner
    return lhs, rhs


def telescoped(sys: AFVilladsenSystem, s: int, depth: int) -> list[tuple[Fraction, ...]]:
    """Partial sums of the transported increments of g^(s), in level-D coordinates.

    Entry D - 1 is sum_{i<D} theta**_{i+1,D-1}(g_{i+1} - theta**_i g_i), which
    telescopes to g_D^(s) - 1.
    """
    g = g_double_sequence(sys, s, depth)
    out = []
    for D in range(1, depth + 1):
        total = tuple(Fraction(0) for _ in sys.base.n(D))
        for i in range(1, D):
            star = _scaled(sys, sys.base.theta(i), i, 1)
            inc = tuple(a - b for a, b in zip(g[i], push(star, g[i - 1])))
            if i + 1 < D:
                inc = push(_scaled(sys, compose(sys.base, i + 1, D - i - 1), i + 1, D - i - 1), inc)
            total = tuple(a + b for a, b in zip(total, inc))
        out.append(total)
    return out


# -- fundamental limit and defects ------------------------------------------------------


def fundamental_value(sys: AFVilladsenSystem, i: int, t: int) -> tuple[Fraction, ...]:
    """Per target l: sum_k (n_{i,k}/n_{i+t,l}) |E_{i,i+t-1;k,l}|."""
    e = composed_eval_count(sys, i, t)
    n_src, n_tgt = sys.base.n(i), sys.base.n(i + t)
    return tuple(
        sum((Fraction(n_src[k] * e[k][l], n_tgt[l]) for k in range(len(n_src))), Fraction(0))
        for l in range(len(n_tgt))
    )


def fundamental_limit_table(
    sys: AFVilladsenSystem, i_range: Sequence[int], t_range: Sequence[int]
) -> dict[tuple[int, int], tuple[Fraction, ...]]:
    return {(i, t): fundamental_value(sys, i, t) for i in i_range for t in t_range}


@dataclass
class DefectBound:
    i: int
    t: int
    triangle: tuple[Fraction, ...]
    via_r: tuple[Fraction, ...]
    doubled_sum: tuple[Fraction, ...]
    r_condition: bool

    @property
    def certified(self) -> tuple[Fraction, ...]:
        """Doubled sum when r_{i,k} <= r_{i+t,l} holds, else the triangle form."""
        return self.doubled_sum if self.r_condition else self.triangle

    def to_dict(self) -> dict:
        return {
            "i": self.i,
            "t": self.t,
            "triangle_form": fmt_vec(self.triangle),
            "r_weighted_form": fmt_vec(self.via_r),
            "doubled_sum": fmt_vec(self.doubled_sum),
            "r_condition": self.r_condition,
            "certified": fmt_vec(self.certified),
            "flagged": not self.r_condition,
        }


def defect_bound(sys: AFVilladsenSystem, i: int, t: int) -> DefectBound:
    """Upper bounds on sup_{|h|<=1} |(psi** - phi**)(h)_l| for the span i -> i+t."""
    nt = n_tilde(sys, i + t)
    n_src, n_tgt = sys.base.n(i), sys.base.n(i + t)
    ts, tt = nt[i - 1], nt[i + t - 1]
    th = compose(sys.base, i, t)
    e = composed_eval_count(sys, i, t)
    r_src = [Fraction(a, b) for a, b in zip(ts, n_src)]
    r_tgt = [Fraction(a, b) for a, b in zip(tt, n_tgt)]
    r_ok = all(a <= b for a in r_src for b in r_tgt)
    tri, via, doubled = [], [], []
    for l in range(len(n_tgt)):
        a = b = c = Fraction(0)
        for k in range(len(n_src)):
            ratio_t = Fraction(ts[k], tt[l])
            ratio_n = Fraction(n_src[k], n_tgt[l])
            a += abs(ratio_t - ratio_n) * th[k][l] + ratio_t * e[k][l]
            b += 2 * r_src[k] / r_tgt[l] * ratio_n * e[k][l]
            c += 2 * ratio_n * e[k][l]
        tri.append(a)
        via.append(b)
        doubled.append(c)
    return DefectBound(i, t, tuple(tri), tuple(via), tuple(doubled), r_ok)


# -- explicit function maps ---------------------------------------------------------------


def composed_points(sys: AFVilladsenSystem, i: int, t: int) -> list[list[list[Word]]]:
    """Multiset of evaluation points of the composed map, indexed [k][l]."""
    step_pts = sys.points(i + t - 1)
    if t == 1:
        return [[list(ws) for ws in row] for row in step_pts]
    inner = composed_points(sys, i, t - 1)
    blocks = composed_blocks(sys.base, i, t - 1)
    tot = sys.total(i + t - 1)
    j_src, j_mid, j_tgt = sys.base.j(i), sys.base.j(i + t - 1), sys.base.j(i + t)
    out = [[[] for _ in range(j_tgt)] for _ in range(j_src)]
    for k in range(j_src):
        for l in range(j_tgt):
            for mm in range(j_mid):
                for x in inner[k][mm]:
                    out[k][l].extend([x] * tot[mm][l])
                for y in step_pts[mm][l]:
                    for b in blocks[k][mm]:
                        out[k][l].append(tuple(y[u - 1] for u in b))
    return out


@dataclass
class FunctionMaps:
    x_size: int
    source: list[tuple[int, Word]]
    targets: list[list[Word]]
    phi: list[list[dict[int, Fraction]]]
    psi: list[list[dict[int, Fraction]]]

    def apply(self, which: str, h: Sequence) -> list[list[Fraction]]:
        rows = self.phi if which == "phi" else self.psi
        return [[sum((c * h[col] for col, c in row.items()), Fraction(0)) for row in rl] for rl in rows]

    def unital(self) -> bool:
        ones = [Fraction(1)] * len(self.source)
        return all(x == 1 for which in ("phi", "psi") for rl in self.apply(which, ones) for x in rl)

    def positive(self) -> bool:
        return all(c >= 0 for rows in (self.phi, self.psi) for rl in rows for row in rl for c in row.values())

    def difference_rows(self) -> list[dict[int, Fraction]]:
        out = []
        for pl, sl in zip(self.phi, self.psi):
            for prow, srow in zip(pl, sl):
                d = dict(srow)
                for col, c in prow.items():
                    d[col] = d.get(col, Fraction(0)) - c
                out.append(d)
        return out

    def defect_norm(self) -> Fraction:
        """Exact sup over |h| <= 1: the largest l1 row norm of psi - phi."""
        return max(sum((abs(c) for c in row.values()), Fraction(0)) for row in self.difference_rows())

    def defect_norm_per_target(self) -> list[Fraction]:
        out = []
        for pl, sl in zip(self.phi, self.psi):
            best = Fraction(0)
            for prow, srow in zip(pl, sl):
                d = dict(srow)
                for col, c in prow.items():
                    d[col] = d.get(col, Fraction(0)) - c
                best = max(best, sum((abs(c) for c in d.values()), Fraction(0)))
            out.append(best)
        return out

    def brute_force_defect(self, max_cols: int = 16) -> Fraction:
        """sup over all +-1 source functions, by exhaustive enumeration."""
        cols = len(self.source)
        if cols > max_cols:
            raise FunctionCapExceeded(f"{cols} source coordinates exceed the enumeration cap {max_cols}")
        rows = self.difference_rows()
        best = Fraction(0)
        for signs in iproduct((1, -1), repeat=cols):
            for row in rows:
                v = abs(sum((c * signs[col] for col, c in row.items()), Fraction(0)))
                if v > best:
                    best = v
        return best


def phi_psi_function_maps(sys: AFVilladsenSystem, i: int, t: int) -> FunctionMaps:
    """phi** and psi** of the span i -> i+t as sparse matrices on value vectors."""
    x = sys.x_size
    n_src, n_tgt = sys.base.n(i), sys.base.n(i + t)
    for nl in n_tgt:
        if x**nl > DENSE_FUNCTION_CAP:
            raise FunctionCapExceeded(
                f"X^{nl} has {x**nl} points (cap {DENSE_FUNCTION_CAP}); use defect_bound instead"
            )
    nt = n_tilde(sys, i + t)
    ts, tt = nt[i - 1], nt[i + t - 1]
    source = [(k, w) for k in range(len(n_src)) for w in iproduct(range(1, x + 1), repeat=n_src[k])]
    col = {key: c for c, key in enumerate(source)}
    blocks = composed_blocks(sys.base, i, t)
    pts = composed_points(sys, i, t)
    targets, phi, psi = [], [], []
    for l in range(len(n_tgt)):
        words = list(iproduct(range(1, x + 1), repeat=n_tgt[l]))
        targets.append(words)
        prow_list, srow_list = [], []
        for y in words:
            prow: dict[int, Fraction] = {}
            srow: dict[int, Fraction] = {}
            for k in range(len(n_src)):
                wp = Fraction(n_src[k], n_tgt[l])
                ws = Fraction(ts[k], tt[l])
                for b in blocks[k][l]:
                    c = col[(k, tuple(y[u - 1] for u in b))]
                    prow[c] = prow.get(c, Fraction(0)) + wp
                    srow[c] = srow.get(c, Fraction(0)) + ws
                for p in pts[k][l]:
                    c = col[(k, tuple(p))]
                    srow[c] = srow.get(c, Fraction(0)) + ws
            prow_list.append(prow)
            srow_list.append(srow)
        phi.append(prow_list)
        psi.append(srow_list)
    return FunctionMaps(x, source, targets, phi, psi)


# -- subsequences and Delta maps -------------------------------------------------------------


class Mode(str, Enum):
    CONSTANT = "constant"
    CONE = "cone"


@dataclass
class SubsequenceResult:
    mode: Mode
    s: list[int]
    checks: list[dict]
    r_norm: Fraction
    r_norm_source: str

    @property
    def truncation_conditional(self) -> bool:
        return self.mode is Mode.CONE and self.r_norm_source != "r_cap"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "s": self.s,
            "r_norm": fmt(self.r_norm),
            "r_norm_source": self.r_norm_source,
            "truncation_conditional": self.truncation_conditional,
            "checks": self.checks,
        }


def _check_mode(report: RReport, mode: Mode, allow_constant_in_cone: bool) -> None:
    if report.verdict is not Convergence.CONVERGENT:
        raise ModeMismatch(f"{mode.value} mode needs a convergent r-sequence; diagnosis is {report.verdict.value}")
    if mode is Mode.CONSTANT and report.limit_type is not LimitType.CONSTANT:
        raise ModeMismatch(f"constant mode needs a constant limit; detected {report.limit_type.value}")
    if mode is Mode.CONE and report.limit_type is LimitType.CONSTANT and not allow_constant_in_cone:
        raise ModeMismatch("cone mode on a constant limit requires allow_constant_in_cone")


def _search(depth: int, gap: int, length: int, ok) -> Optional[list[int]]:
    """Lexicographically smallest s_1 < ... < s_length <= depth with ok(i, s_i, s_{i+gap})."""
    dead: set = set()

    def extend(prefix: list[int]) -> Optional[list[int]]:
        if len(prefix) == length:
            return prefix
        key = (len(prefix), tuple(prefix[-gap:]))
        if key in dead:
            return None
        start = prefix[-1] + 1 if prefix else 1
        for c in range(start, depth + 1):
            if len(prefix) >= gap:
                i = len(prefix) - gap + 1
                if not ok(i, prefix[i - 1], c):
                    continue
            found = extend(prefix + [c])
            if found is not None:
                return found
        dead.add(key)
        return None

    return extend([])


def select_subsequence(
    sys: AFVilladsenSystem,
    depth: int,
    mode: str | Mode = Mode.CONSTANT,
    count: Optional[int] = None,
    r_cap=None,
    allow_constant_in_cone: bool = False,
    tol=Fraction(1, 100),
) -> SubsequenceResult:
    """Earliest subsequence whose defect bounds beat 2^-i.

    constant: certified defect of the span s_i -> s_{i+2} below 2^-i.
    cone:     sum_k (n/n)|E| over s_i -> s_{i+1} below 2^-i / |r|.
    ``count`` fixes the number of checked steps; by default as many as fit.
    """
    mode = Mode(mode)
    report = r_sequence(sys, depth, tol)
    _check_mode(report, mode, allow_constant_in_cone)
    if r_cap is not None:
        r_norm, source = Fraction(r_cap), "r_cap"
        if r_norm < report.norm:
            raise ValueError(f"r_cap {r_norm} is below the computed |r_depth| = {report.norm}")
    else:
        r_norm, source = report.norm, "truncation"
    gap = 2 if mode is Mode.CONSTANT else 1

    def bound(i: int, a: int, b: int) -> tuple[Fraction, ...]:
        if mode is Mode.CONSTANT:
            return defect_bound(sys, a, b - a).certified
        return fundamental_value(sys, a, b - a)

    def threshold(i: int) -> Fraction:
        return Fraction(1, 2**i) if mode is Mode.CONSTANT else Fraction(1, 2**i) / r_norm

    memo: dict = {}

    def ok(i: int, a: int, b: int) -> bool:
        key = (i, a, b)
        if key not in memo:
            memo[key] = all(x < threshold(i) for x in bound(i, a, b))
        return memo[key]

    def attempt(k: int) -> Optional[list[int]]:
        return _search(depth, gap, k + gap, ok)

    if count is not None:
        s = attempt(count)
        if s is None:
            raise DepthExhausted(f"no {mode.value}-mode subsequence with {count} steps within depth {depth}")
    else:
        s, k = None, 1
        while True:
            found = attempt(k)
            if found is None:
                break
            s, k = found, k + 1
        if s is None:
            raise DepthExhausted(f"no admissible {mode.value}-mode subsequence within depth {depth}")
    checks = []
    for i in range(1, len(s) - gap + 1):
        a, b = s[i - 1], s[i - 1 + gap]
        entry = {"i": i, "span": [a, b], "threshold": fmt(threshold(i))}
        if mode is Mode.CONSTANT:
            db = defect_bound(sys, a, b - a)
            entry["defect"] = db.to_dict()
            entry["doubled_sum"] = fmt_vec(db.doubled_sum)
            entry["ok"] = all(x < threshold(i) for x in db.certified)
        else:
            v = fundamental_value(sys, a, b - a)
            entry["bound"] = fmt_vec(v)
            entry["ok"] = all(x < threshold(i) for x in v)
        checks.append(entry)
    return SubsequenceResult(mode, s, checks, r_norm, source)


@dataclass
class DeltaStep:
    i: int
    span: tuple[int, int]
    scale: tuple[Fraction, ...]
    inverse_scale: tuple[Fraction, ...]
    forward: list[tuple[Fraction, Fraction]]  # per l: (exact n/n~ form, n/n form)
    backward: list[tuple[Fraction, Fraction, Fraction]]  # per l: (n~/n form, r-weighted, |r| * n/n form)
    threshold: Fraction
    forward_ok: bool
    backward_ok: bool
    r_below_norm: bool

    def to_dict(self) -> dict:
        return {
            "i": self.i,
            "span": list(self.span),
            "scale": fmt_vec(self.scale),
            "inverse_scale": fmt_vec(self.inverse_scale),
            "forward_chain": [fmt_vec(x) for x in self.forward],
            "backward_chain": [fmt_vec(x) for x in self.backward],
            "forward_threshold": fmt(self.threshold),
            "forward_ok": self.forward_ok,
            "backward_ok": self.backward_ok,
            "r_below_norm": self.r_below_norm,
        }


def delta_maps(sys: AFVilladsenSystem, s_list: Sequence[int], r_norm=None) -> list[DeltaStep]:
    """Scaling isomorphisms 1/r_{s_i} and both displayed bound chains along s."""
    depth = max(s_list)
    nt = n_tilde(sys, depth)
    r = [tuple(Fraction(a, b) for a, b in zip(nt[i - 1], sys.base.n(i))) for i in range(1, depth + 1)]
    norm = Fraction(r_norm) if r_norm is not None else sup_norm(r[-1])
    steps = []
    for i, (a, b) in enumerate(zip(s_list, s_list[1:]), start=1):
        ra = r[a - 1]
        e = composed_eval_count(sys, a, b - a)
        n_a, n_b = sys.base.n(a), sys.base.n(b)
        na_t, nb_t = nt[a - 1], nt[b - 1]
        thr = Fraction(1, 2**i) / norm
        fwd, bwd = [], []
        f_ok = b_ok = True
        for l in range(len(n_b)):
            f1 = sum((Fraction(n_a[k] * e[k][l], nb_t[l]) for k in range(len(n_a))), Fraction(0))
            f2 = sum((Fraction(n_a[k] * e[k][l], n_b[l]) for k in range(len(n_a))), Fraction(0))
            w1 = sum((Fraction(na_t[k] * e[k][l], n_b[l]) for k in range(len(n_a))), Fraction(0))
            w2 = sum((ra[k] * Fraction(n_a[k] * e[k][l], n_b[l]) for k in range(len(n_a))), Fraction(0))
            w3 = norm * f2
            fwd.append((f1, f2))
            bwd.append((w1, w2, w3))
            f_ok &= f1 <= f2 < thr <= Fraction(1, 2**i)
            b_ok &= w1 == w2 <= w3 < Fraction(1, 2**i)
        steps.append(
            DeltaStep(
                i,
                (a, b),
                tuple(1 / x for x in ra),
                ra,
                fwd,
                bwd,
                thr,
                f_ok,
                b_ok,
                all(x <= norm for x in ra),
            )
        )
    return steps


# -- full report ------------------------------------------------------------------------------


@dataclass
class IntertwiningReport:
    r: RReport
    fundamental: dict
    subsequence: Optional[SubsequenceResult]
    deltas: list[DeltaStep]
    verdicts: dict
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "r_sequence": self.r.to_dict(),
            "fundamental_limit_table": [
                {"i": i, "t": t, "values": fmt_vec(v)} for (i, t), v in sorted(self.fundamental.items())
            ],
            "subsequence": None if self.subsequence is None else self.subsequence.to_dict(),
            "delta_maps": [d.to_dict() for d in self.deltas],
            "verdicts": self.verdicts,
            "errors": self.errors,
            "remark": "classification invariants such as r_infinity^(0) are not computed",
        }


def intertwining_report(
    sys: AFVilladsenSystem,
    depth: int,
    mode: str = "auto",
    r_cap=None,
    tol=Fraction(1, 100),
    allow_constant_in_cone: bool = False,
) -> IntertwiningReport:
    rep = r_sequence(sys, depth, tol)
    table = {(i, t): fundamental_value(sys, i, t) for i in range(1, depth) for t in range(1, depth - i + 1)}
    if mode == "auto":
        if rep.limit_type is LimitType.CONSTANT:
            mode = "constant"
        elif rep.limit_type is LimitType.NONCONSTANT:
            mode = "cone"
        else:
            mode = "constant"
    errors = []
    sub = None
    deltas: list[DeltaStep] = []
    try:
        sub = select_subsequence(sys, depth, mode, r_cap=r_cap, tol=tol, allow_constant_in_cone=allow_constant_in_cone)
        if sub.mode is Mode.CONE:
            deltas = delta_maps(sys, sub.s, sub.r_norm)
    except (ModeMismatch, DepthExhausted) as exc:
        errors.append(f"{type(exc).__name__}: {exc}")
    ok = sub is not None and all(c["ok"] for c in sub.checks) and all(d.forward_ok and d.backward_ok for d in deltas)
    verdicts = {
        "mode": mode,
        "r_convergence": rep.verdict.value,
        "r_limit": rep.limit_type.value,
        "r_increasing": rep.increasing,
        "intertwining_bounds_verified": ok,
        "trace_simplices_isomorphic": ok and mode == "constant",
        "tracial_cones_isomorphic": ok,
        "truncation_conditional": (not rep.exact) or (sub is not None and sub.truncation_conditional),
    }
    return IntertwiningReport(rep, table, sub, deltas, verdicts, errors)
