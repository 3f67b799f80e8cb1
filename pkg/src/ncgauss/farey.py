"""Exact Stern-Brocot / Farey combinatorics on [0, 1].

Node labels are :class:`fractions.Fraction` values.  Whole levels are kept as
int64 numerator/denominator arrays with explicit overflow checks, so deep
levels stay cheap and never wrap silently.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from numbers import Rational
from typing import Sequence, Union

import numpy as np

INT64_MAX = 2**63 - 1
LN2 = math.log(2.0)

Real = Union[float, Fraction]


def _check64(*values: int) -> None:
    for v in values:
        if abs(v) > INT64_MAX:
            raise OverflowError(f"integer {v} exceeds the 64-bit range")


def as_fraction(x) -> Fraction:
    """Coerce ``x`` to a reduced fraction in [0, 1]."""
    if isinstance(x, Fraction):
        f = x
    elif isinstance(x, (int, Rational)):
        f = Fraction(x)
    elif isinstance(x, tuple) and len(x) == 2:
        f = Fraction(int(x[0]), int(x[1]))
    else:
        raise TypeError(f"cannot interpret {x!r} as an exact fraction")
    if not 0 <= f <= 1:
        raise ValueError(f"{f} lies outside [0, 1]")
    _check64(f.numerator, f.denominator)
    return f


def mediant(a: Fraction, b: Fraction) -> Fraction:
    a, b = as_fraction(a), as_fraction(b)
    if not a < b:
        raise ValueError(f"mediant needs a < b, got {a} and {b}")
    p = a.numerator + b.numerator
    q = a.denominator + b.denominator
    _check64(p, q)
    return Fraction(p, q)


@dataclass(frozen=True)
class FareyLevel:
    """The 2**n + 1 labels r(n, k) = p[k]/q[k] of row ``n``."""

    n: int
    p: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.p)

    def __getitem__(self, k: int) -> Fraction:
        return Fraction(int(self.p[k]), int(self.q[k]))

    def __iter__(self):
        return iter(self.nodes)

    @cached_property
    def nodes(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(int(a), int(b)) for a, b in zip(self.p, self.q))

    @cached_property
    def values(self) -> np.ndarray:
        return self.p / self.q

    @cached_property
    def index(self) -> dict[Fraction, int]:
        return {r: k for k, r in enumerate(self.nodes)}


@lru_cache(maxsize=32)
def farey_level(n: int) -> FareyLevel:
    """Row ``n`` of the Farey diagram, built by inserting mediants."""
    if n < 0:
        raise ValueError("level must be nonnegative")
    if n == 0:
        p = np.array([0, 1], dtype=np.int64)
        q = np.array([1, 1], dtype=np.int64)
    else:
        prev = farey_level(n - 1)
        if prev.q.max() > INT64_MAX // 2:
            raise OverflowError(f"level {n} denominators exceed the 64-bit range")
        p = np.empty(2 * len(prev) - 1, dtype=np.int64)
        q = np.empty_like(p)
        p[0::2], q[0::2] = prev.p, prev.q
        p[1::2] = prev.p[:-1] + prev.p[1:]
        q[1::2] = prev.q[:-1] + prev.q[1:]
    p.setflags(write=False)
    q.setflags(write=False)
    return FareyLevel(n, p, q)


def locate(x) -> tuple[int, int]:
    """First appearance (n0, k0) of ``x`` as a node label, by mediant bisection."""
    x = as_fraction(x)
    if x == 0:
        return 0, 0
    if x == 1:
        return 0, 1
    lo_p, lo_q, hi_p, hi_q = 0, 1, 1, 1
    n, k = 0, 0
    while True:
        mp, mq = lo_p + hi_p, lo_q + hi_q
        _check64(mp, mq)
        n += 1
        # compare x with the mediant mp/mq without building a Fraction
        c = x.numerator * mq - mp * x.denominator
        if c == 0:
            return n, 2 * k + 1
        if c < 0:
            hi_p, hi_q = mp, mq
            k = 2 * k
        else:
            lo_p, lo_q = mp, mq
            k = 2 * k + 1


def cf_expand(x) -> list[int]:
    """Continued fraction digits [a1, ..., am] of ``x`` in (0, 1]; last digit >= 2 when m > 1."""
    x = as_fraction(x)
    if x == 0:
        raise ValueError("0 has no continued fraction digits")
    digits = []
    while x:
        inv = 1 / x
        a = math.floor(inv)
        digits.append(a)
        x = inv - a
    return digits


def cf_value(digits: Sequence[int]) -> Fraction:
    x = Fraction(0)
    for a in reversed(digits):
        x = 1 / (a + x)
    return x


def gauss_map(x):
    """G(0) = 0, G(x) = 1/x - floor(1/x).  Exact on fractions, elementwise on floats/arrays."""
    if isinstance(x, (Fraction, int)):
        x = as_fraction(x)
        if x == 0:
            return Fraction(0)
        inv = 1 / x
        return inv - math.floor(inv)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        inv = np.where(x > 0, 1.0 / np.where(x > 0, x, 1.0), 0.0)
    out = inv - np.floor(inv)
    return out if out.ndim else float(out)


def branch_map(s: int, theta):
    """g_s(theta) = 1/(theta + s), a homeomorphism of [0, 1] onto [1/(s+1), 1/s]."""
    if s < 1:
        raise ValueError("branch index must be >= 1")
    if isinstance(theta, (Fraction, int)):
        t = as_fraction(theta)
        # q/(p + s q) is already reduced
        return Fraction(t.denominator, t.numerator + s * t.denominator)
    return 1.0 / (np.asarray(theta, dtype=float) + s) if np.ndim(theta) else 1.0 / (float(theta) + s)


def branch_inverse(s: int, theta):
    """Inverse of :func:`branch_map`: theta -> 1/theta - s on the window of branch ``s``."""
    if s < 1:
        raise ValueError("branch index must be >= 1")
    if isinstance(theta, (Fraction, int)):
        t = as_fraction(theta)
        if not Fraction(1, s + 1) <= t <= Fraction(1, s):
            raise ValueError(f"{t} is outside the window [1/{s + 1}, 1/{s}]")
        return 1 / t - s
    t = np.asarray(theta, dtype=float)
    lo, hi = 1.0 / (s + 1), 1.0 / s
    if np.any((t < lo - 1e-15) | (t > hi + 1e-15)):
        raise ValueError(f"values outside the window [1/{s + 1}, 1/{s}]")
    out = np.clip(1.0 / t - s, 0.0, 1.0)
    return out if out.ndim else float(out)


def window(s: int) -> tuple[Fraction, Fraction]:
    return Fraction(1, s + 1), Fraction(1, s)


@dataclass(frozen=True)
class PiecewiseAffineFn:
    """Continuous function, affine between exact rational breakpoints.

    ``values`` may be complex (trace fields of non-selfadjoint elements).
    The domain is [breakpoints[0], breakpoints[-1]], usually [0, 1].
    """

    breakpoints: tuple[Fraction, ...]
    values: np.ndarray

    def __post_init__(self):
        bps = tuple(as_fraction(b) for b in self.breakpoints)
        if len(bps) < 2 or any(a >= b for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing with at least two entries")
        vals = np.asarray(self.values)
        if vals.shape != (len(bps),):
            raise ValueError("need exactly one value per breakpoint")
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, f, breakpoints: Sequence[Fraction]) -> "PiecewiseAffineFn":
        return cls(tuple(breakpoints), np.array([f(float(b)) for b in breakpoints]))

    @cached_property
    def knots(self) -> np.ndarray:
        return np.array([float(b) for b in self.breakpoints])

    @property
    def domain(self) -> tuple[Fraction, Fraction]:
        return self.breakpoints[0], self.breakpoints[-1]

    def __call__(self, theta):
        if isinstance(theta, Fraction):
            i = bisect.bisect_left(self.breakpoints, theta)
            if i < len(self.breakpoints) and self.breakpoints[i] == theta:
                return self.values[i]
        t = np.asarray(theta, dtype=float)
        lo, hi = self.knots[0], self.knots[-1]
        if np.any((t < lo - 1e-14) | (t > hi + 1e-14)):
            raise ValueError("evaluation point outside the domain")
        if np.iscomplexobj(self.values):
            out = np.interp(t, self.knots, self.values.real) + 1j * np.interp(t, self.knots, self.values.imag)
        else:
            out = np.interp(t, self.knots, self.values)
        return out if np.ndim(out) else out[()]

    def pieces(self):
        """Yield (a, b, value_at_a, slope) for each affine piece."""
        x, v = self.knots, self.values
        for i in range(len(x) - 1):
            a, b = x[i], x[i + 1]
            yield a, b, v[i], (v[i + 1] - v[i]) / (b - a)

    def __add__(self, other: "PiecewiseAffineFn") -> "PiecewiseAffineFn":
        if self.breakpoints != other.breakpoints:
            raise ValueError("breakpoints differ")
        return PiecewiseAffineFn(self.breakpoints, self.values + other.values)

    def __mul__(self, c) -> "PiecewiseAffineFn":
        return PiecewiseAffineFn(self.breakpoints, c * self.values)

    __rmul__ = __mul__


def gauss_integral(fn: PiecewiseAffineFn, branch: int | None = None):
    """Closed-form integral of ``fn`` against Gauss measure dtheta/(ln2 (1+theta)).

    With ``branch=s`` the measure is additionally weighted by
    f_s(theta) = (theta+1)/((theta+s)(theta+s+1)), i.e. the density becomes
    1/(ln2 (theta+s)(theta+s+1)).
    """
    total = 0.0
    for a, b, va, slope in fn.pieces():
        # v(theta) = va + slope (theta - a);  integrate v/(theta + c) in closed form
        def _against(c):
            return slope * (b - a) + (va - slope * (a + c)) * math.log1p((b - a) / (a + c))

        if branch is None:
            total = total + _against(1.0)
        else:
            s = branch
            # the slope*(b-a) parts cancel between the two partial fractions
            total = total + (va - slope * (a + s)) * math.log1p((b - a) / (a + s)) - (
                va - slope * (a + s + 1)
            ) * math.log1p((b - a) / (a + s + 1))
    return total / LN2


def gauss_measure(a: float, b: float) -> float:
    """mu([a, b]) = log2((1+b)/(1+a))."""
    return math.log1p((b - a) / (1.0 + a)) / LN2
