"""The group Z^d with standard generators and its rotation actions on the circle."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "GroupElement",
    "RotationAction",
    "THETA_PRESETS",
    "word_length",
    "spherical_growth",
    "ball_size",
    "enumerate_sphere",
    "sphere_array",
    "ball_array",
    "orbit_point",
    "orbit_points",
    "smooth_growth",
    "smooth_growth_sequence",
    "parse_theta",
    "generators",
]

THETA_PRESETS = {
    "golden": (math.sqrt(5.0) - 1.0) / 2.0,
    "sqrt2m1": math.sqrt(2.0) - 1.0,
    "sqrt3m1": math.sqrt(3.0) - 1.0,
}


@dataclass(frozen=True)
class GroupElement:
    exponents: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))

    @property
    def d(self) -> int:
        return len(self.exponents)

    @property
    def norm(self) -> int:
        return word_length(self)

    def __add__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __neg__(self) -> "GroupElement":
        return GroupElement(tuple(-a for a in self.exponents))

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return self + (-other)

    @classmethod
    def zero(cls, d: int) -> "GroupElement":
        return cls((0,) * d)


def generators(d: int) -> list[GroupElement]:
    """Standard generators e_1..e_d (inverses are their negatives)."""
    return [GroupElement(tuple(1 if j == i else 0 for j in range(d))) for i in range(d)]


def word_length(g) -> int:
    ex = g.exponents if isinstance(g, GroupElement) else g
    return int(sum(abs(int(e)) for e in ex))


@lru_cache(maxsize=None)
def spherical_growth(d: int, n: int) -> int:
    """Number of points of Z^d with L1 norm exactly n."""
    if d < 1 or n < 0:
        raise ValueError("need d >= 1 and n >= 0")
    if n == 0:
        return 1
    return sum(2 ** j * math.comb(d, j) * math.comb(n - 1, j - 1) for j in range(1, min(d, n) + 1))


def ball_size(d: int, n: int) -> int:
    """Number of points of Z^d with L1 norm at most n."""
    return sum(2 ** j * math.comb(d, j) * math.comb(n, j) for j in range(0, min(d, n) + 1))


def sphere_growth_array(d: int, n: np.ndarray) -> np.ndarray:
    """Vectorised sphere counts as floats (exact below 2^53)."""
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    for j in range(1, d + 1):
        # 2^j C(d,j) C(n-1, j-1) as a polynomial in n
        term = np.full_like(n, 2.0 ** j * math.comb(d, j))
        for i in range(1, j):
            term = term * (n - i) / i
        out = out + np.where(n >= j, term, 0.0)
    return np.where(n == 0, 1.0, out)


def _sphere_rows(d: int, n: int) -> np.ndarray:
    if d == 1:
        return np.array([[0]] if n == 0 else [[-n], [n]], dtype=np.int64)
    blocks = []
    for a in range(-n, n + 1):
        rest = _sphere_rows(d - 1, n - abs(a))
        blocks.append(np.column_stack([np.full(rest.shape[0], a, dtype=np.int64), rest]))
    return np.vstack(blocks)


def sphere_array(d: int, n: int) -> np.ndarray:
    """All exponent vectors with L1 norm n, lexicographically sorted, shape (sigma, d)."""
    if d == 2 and n > 0:
        a = np.arange(-n, n + 1, dtype=np.int64)
        b = n - np.abs(a)
        lo = np.column_stack([a, -b])
        hi = np.column_stack([a, b])
        both = np.stack([lo, hi], axis=1).reshape(-1, 2)
        keep = np.ones(both.shape[0], dtype=bool)
        keep[1::2] = b != 0          # b = 0 gives one point, not two
        return both[keep]
    return _sphere_rows(d, n)


def enumerate_sphere(d: int, n: int) -> Iterator[GroupElement]:
    for row in sphere_array(d, n):
        yield GroupElement(tuple(int(v) for v in row))


def ball_array(d: int, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Exponents with norm <= radius ordered by norm then lex, and their norms."""
    if d == 1:
        n = np.arange(1, radius + 1, dtype=np.int64)
        ex = np.empty(2 * radius + 1, dtype=np.int64)
        ex[0] = 0
        ex[1::2] = -n
        ex[2::2] = n
        norms = np.abs(ex)
        return ex[:, None], norms
    rows = [sphere_array(d, k) for k in range(radius + 1)]
    norms = np.concatenate([np.full(r.shape[0], k, dtype=np.int64) for k, r in enumerate(rows)])
    return np.vstack(rows), norms


def _split(a: np.ndarray):
    """Veltkamp split of float64 values into two 26-bit halves."""
    c = 134217729.0 * a  # 2^27 + 1
    hi = c - (c - a)
    return hi, a - hi


def _frac(x: np.ndarray) -> np.ndarray:
    return x - np.floor(x)


@dataclass(frozen=True)
class RotationAction:
    """Z^d acting on R/Z by the rotations x -> x + theta_i.

    ``assumed_independent`` records that (1, theta_1, ..., theta_d) is taken
    to be rationally independent; floating point cannot certify this.
    """

    theta: tuple[float, ...]
    assumed_independent: bool = True
    names: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        th = tuple(float(t) for t in self.theta)
        if not th:
            raise ValueError("theta must be non-empty")
        for t in th:
            if not 0.0 < t < 1.0:
                raise ValueError(f"rotation angle {t} not in (0, 1)")
        object.__setattr__(self, "theta", th)

    @property
    def d(self) -> int:
        return len(self.theta)

    def small_denominators(self, qmax: int = 10 ** 6, tol: float = 1e-12) -> list[tuple[int, Fraction]]:
        """Entries within ``tol`` of ``p/q`` with ``q <= qmax``.

        Every irrational has convergents with ``|theta - p/q| < 1/q^2``, so a
        hit must also beat that generic rate by a factor 1000 to count.
        """
        out = []
        for i, t in enumerate(self.theta):
            fr = _close_fraction(t, qmax, tol)
            if fr is not None:
                out.append((i, fr))
        coupled = self._integer_relation(qmax, tol)
        if coupled is not None:
            out.append((-1, coupled))
        return out

    def _integer_relation(self, qmax, tol):
        # cheap check for theta_i - theta_j rational with small denominator
        for i in range(self.d):
            for j in range(i + 1, self.d):
                fr = _close_fraction(self.theta[i] - self.theta[j], qmax, tol)
                if fr is not None:
                    return fr
        return None

    def warn_if_resonant(self) -> bool:
        bad = self.small_denominators()
        if bad:
            warnings.warn(f"rotation vector {self.theta} is within 1e-12 of a rational "
                          f"relation with denominator <= 1e6: {bad}", stacklevel=2)
        return bool(bad)

    def points(self, exponents: np.ndarray) -> np.ndarray:
        return orbit_points(self.theta, exponents)


def _close_fraction(t: float, qmax: int, tol: float) -> Fraction | None:
    fr = Fraction(t).limit_denominator(qmax)
    err = abs(t - fr.numerator / fr.denominator)
    if err <= tol and err * fr.denominator ** 2 < 1e-3:
        return fr
    return None


def orbit_points(theta: Sequence[float], exponents: np.ndarray) -> np.ndarray:
    """``<sum_i g_i theta_i>`` for each row of ``exponents``, compensated.

    Each product ``g_i * theta_i`` is split exactly into two floats (the
    exponents must be below 2^26 in absolute value); the pieces are reduced
    mod 1 and summed with Neumaier compensation.
    """
    ex = np.asarray(exponents, dtype=np.int64)
    if ex.ndim == 1:
        ex = ex[:, None]
    if np.any(np.abs(ex) >= 2 ** 26):
        raise ValueError("exponents must be below 2^26 in absolute value")
    th = np.asarray(theta, dtype=float)
    hi, lo = _split(th)
    g = ex.astype(float)
    terms = []
    for i in range(th.size):
        terms.append(_frac(g[:, i] * hi[i]))   # exact product, exact frac
        terms.append(g[:, i] * lo[i])          # exact product
    s = np.zeros(ex.shape[0])
    comp = np.zeros(ex.shape[0])
    for t in terms:
        tot = s + t
        comp += np.where(np.abs(s) >= np.abs(t), (s - tot) + t, (t - tot) + s)
        s = tot
        fl = np.floor(s)
        s = s - fl
    out = _frac(s + comp)
    return np.where(out >= 1.0, 0.0, out)


def orbit_point(act: RotationAction, g) -> float:
    ex = g.exponents if isinstance(g, GroupElement) else tuple(g)
    if len(ex) != act.d:
        raise ValueError("element dimension does not match the action")
    return float(orbit_points(act.theta, np.array([ex]))[0])


def parse_theta(spec) -> tuple[float, ...]:
    """Rotation vector from presets or decimal strings (comma list or sequence)."""
    if isinstance(spec, str):
        items = [s for s in spec.replace(" ", "").split(",") if s]
    elif isinstance(spec, (int, float)):
        items = [spec]
    else:
        items = list(spec)
    out = []
    for it in items:
        if isinstance(it, str) and it in THETA_PRESETS:
            out.append(THETA_PRESETS[it])
        else:
            out.append(float(it))
    return tuple(out)


def smooth_growth_sequence(f: Sequence[float] | Callable[[int], float], n: int | None = None) -> np.ndarray:
    """``g(m) = exp(2 G(m))``, ``G(m) = (1/m) sum_{i<=m} log f(i)``, for m = 1..n.

    ``f`` is an array ``f(1..n)`` or a callable on positive integers.  It must
    be non-decreasing with ``f >= 1``.
    """
    if callable(f):
        if n is None:
            raise ValueError("n is required when f is callable")
        vals = np.array([f(i) for i in range(1, n + 1)], dtype=float)
    else:
        vals = np.asarray(f, dtype=float)
        if n is not None:
            vals = vals[:n]
    if vals.size == 0:
        raise ValueError("empty sequence")
    if np.any(vals < 1.0):
        raise ValueError("growth sequence must satisfy f(i) >= 1")
    if np.any(np.diff(vals) < 0):
        raise ValueError("growth sequence must be non-decreasing")
    logs = np.log(vals)
    G = np.cumsum(logs) / np.arange(1, vals.size + 1)
    return np.exp(2.0 * G)


def smooth_growth(f, n: int) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    return float(smooth_growth_sequence(f, n)[n - 1])
