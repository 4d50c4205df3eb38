"""Exact rational helpers shared by every module.

Rationals travel through configs and reports as ``"p/q"`` strings (integers
may be written without a denominator). Floats are never accepted.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

Matrix = tuple[tuple[int, ...], ...]
QMatrix = tuple[tuple[Fraction, ...], ...]


def parse_rational(value) -> Fraction:
    """Parse ``"p/q"``, ``"p"`` or an int into a Fraction; floats are refused."""
    if isinstance(value, bool) or isinstance(value, float):
        raise ValueError(f"refusing non-exact rational {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if not isinstance(value, str):
        raise ValueError(f"not a rational: {value!r}")
    text = value.strip()
    if "." in text or "e" in text.lower():
        raise ValueError(f"decimal notation not allowed for exact rational {value!r}")
    try:
        return Fraction(text)
    except ZeroDivisionError:
        raise ValueError(f"zero denominator in rational {value!r}") from None
    except ValueError:
        raise ValueError(f"cannot parse rational {value!r}") from None


def fmt(q) -> str:
    return str(Fraction(q))


def fmt_vec(v: Iterable) -> list[str]:
    return [fmt(x) for x in v]


def fmt_mat(m: Iterable[Iterable]) -> list[list[str]]:
    return [fmt_vec(row) for row in m]


def as_matrix(rows: Sequence[Sequence[int]]) -> Matrix:
    return tuple(tuple(int(x) for x in row) for row in rows)


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> tuple:
    """Plain product ``a @ b``; works for ints and Fractions alike."""
    if not a:
        return ()
    inner = len(b)
    if any(len(row) != inner for row in a):
        raise ValueError("matrix shapes do not compose")
    cols = len(b[0]) if b else 0
    return tuple(
        tuple(sum(row[m] * b[m][l] for m in range(inner)) for l in range(cols))
        for row in a
    )


def identity(j: int) -> Matrix:
    return tuple(tuple(int(k == l) for l in range(j)) for k in range(j))


def transpose(a: Sequence[Sequence]) -> tuple:
    if not a:
        return ()
    return tuple(tuple(row[l] for row in a) for l in range(len(a[0])))


def push(a: Sequence[Sequence], v: Sequence) -> tuple:
    """Apply the map with (source k, target l) matrix ``a`` to a source vector."""
    return tuple(sum(a[k][l] * v[k] for k in range(len(a))) for l in range(len(a[0])))


def pull(a: Sequence[Sequence], v: Sequence) -> tuple:
    """Apply the adjoint: target vector (index l) back to a source vector (index k)."""
    return tuple(sum(row[l] * v[l] for l in range(len(row))) for row in a)


def sup_norm(v: Iterable) -> Fraction:
    return max((abs(Fraction(x)) for x in v), default=Fraction(0))


def l1(u: Sequence, v: Sequence) -> Fraction:
    return sum((abs(Fraction(x) - Fraction(y)) for x, y in zip(u, v)), Fraction(0))
