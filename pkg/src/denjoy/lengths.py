"""Interval-length schemes for blow-ups of Z^d orbits.

Three schemes are provided, all functions of the word length ``n = ||y||``:

* ``herman_v``:  l(n) = 1 / v(n + K),            v(x) = x^2 alpha(1/x)      (d = 1)
* ``nu``:        l(n) = scale / nu(n + k),        nu(x) = x^{d+1} alpha(1/x)^d
* ``alpha_inv``: l(n) = alpha^{-1}(scale / (n + k))

Lengths are evaluated in log space from ``w = log(n + shift)`` so that very
large radii and the tail integrals never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .modulus import Modulus
from .orbit import GroupElement, ball_size, generators, sphere_growth_array
from .quadrature import IntegrabilityReport, integrate_log_tail

__all__ = [
    "InadmissibleSchemeError",
    "LengthScheme",
    "MassReport",
    "RatioSup",
    "length",
    "total_mass",
    "fundamental_ratio",
    "sup_fundamental_ratio",
    "choose_radius",
    "admissible_herman",
    "SCHEMES",
]

SCHEMES = ("herman_v", "nu", "alpha_inv")
TAIL_SLACK = 2.0


class InadmissibleSchemeError(ValueError):
    """The total length of the scheme is infinite (or exceeds the circle)."""

    def __init__(self, message: str, report: IntegrabilityReport | None = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class LengthScheme:
    kind: str
    alpha: Modulus
    d: int = 1
    k: int = 1
    K: float | None = None
    scale: float = 1.0
    weight: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        kind = "nu" if self.kind == "nu_scheme" else self.kind
        object.__setattr__(self, "kind", kind)
        if kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {SCHEMES}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if kind == "herman_v":
            if self.d != 1:
                raise ValueError("herman_v is defined for d = 1 only")
            if self.K is None:
                object.__setattr__(self, "K", default_shift(self.alpha))
            if not self.K >= 1.0 / self.alpha.domain_cap:
                raise ValueError("herman_v shift K must satisfy 1/K <= domain_cap")
            if self.scale != 1.0:
                raise ValueError("herman_v has no scale parameter")
        else:
            if int(self.k) != self.k or self.k < 1:
                raise ValueError("blow-up index k must be a positive integer")
            if self.scale <= 0:
                raise ValueError("scale must be positive")
            if kind == "nu" and 1.0 / self.k > self.alpha.domain_cap:
                raise ValueError("nu scheme needs 1/k <= domain_cap")
            if kind == "alpha_inv" and self.scale / self.k > self.alpha.alpha_cap:
                raise ValueError("alpha_inv scheme needs scale/k <= alpha(domain_cap)")

    @property
    def shift(self) -> float:
        return float(self.K) if self.kind == "herman_v" else float(self.k)

    def with_k(self, k: int) -> "LengthScheme":
        return replace(self, k=k)

    # --- lengths as functions of the norm -----------------------------------

    def log_length_split(self, w) -> tuple[float, np.ndarray]:
        """``(kappa, rho)`` with ``log l = -kappa * w + rho(w)``, ``w = log(n + shift)``.

        ``rho`` is sublinear, so sums of several such terms can be combined
        without cancelling large multiples of ``w``.
        """
        w = np.asarray(w, dtype=float)
        a = self.alpha
        if self.kind == "herman_v":
            # -log v(x) = -2 w - log alpha(e^{-w})
            return 2.0 - a.c, -a.rem(w)
        if self.kind == "nu":
            d = self.d
            return d + 1.0 - d * a.c, math.log(self.scale) - d * a.rem(w)
        s = w - math.log(self.scale)
        L = a.log_inverse(s)
        if a.c > 0:
            # L = (s + r(L)) / c
            return 1.0 / a.c, (math.log(self.scale) - a.rem(L)) / a.c
        return 0.0, -L

    def log_length_w(self, w) -> np.ndarray:
        """``log l`` as a function of ``w = log(n + shift)``."""
        w = np.asarray(w, dtype=float)
        if self.kind == "alpha_inv":
            return -self.alpha.log_inverse(w - math.log(self.scale))
        kappa, rho = self.log_length_split(w)
        return -kappa * w + rho

    def log_length_norm(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return self.log_length_w(np.log(n + self.shift))

    def length_norm(self, n) -> np.ndarray:
        return np.exp(self.log_length_norm(n))

    def lengths(self, exponents: np.ndarray, norms: np.ndarray | None = None) -> np.ndarray:
        ex = np.asarray(exponents, dtype=np.int64)
        if ex.ndim == 1:
            ex = ex[:, None]
        if norms is None:
            norms = np.abs(ex).sum(axis=1)
        out = self.length_norm(norms)
        if self.weight is not None:
            out = out * np.asarray(self.weight(ex), dtype=float)
        return out

    def log_alpha_of_length(self, log_len) -> np.ndarray:
        return self.alpha.log_alpha(-np.asarray(log_len, dtype=float))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "alpha": self.alpha.to_dict(), "d": self.d}
        if self.kind == "herman_v":
            out["K"] = self.K
        else:
            out["k"] = int(self.k)
            out["scale"] = self.scale
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LengthScheme":
        alpha = Modulus.from_dict(data["alpha"])
        return cls(data["kind"], alpha, int(data.get("d", 1)), int(data.get("k", 1)),
                   data.get("K"), float(data.get("scale", 1.0)))


def default_shift(alpha: Modulus) -> float:
    """``K = max(2, 1/alpha(1))``."""
    a1 = alpha.eval(min(1.0, alpha.domain_cap))
    return max(2.0, 1.0 / a1)


def length(scheme: LengthScheme, g) -> float:
    ex = g.exponents if isinstance(g, GroupElement) else tuple(g)
    if len(ex) != scheme.d:
        raise ValueError("element dimension does not match the scheme")
    return float(scheme.lengths(np.array([ex]))[0])


# --- mass ------------------------------------------------------------------

@dataclass
class MassReport:
    partial_sum: float
    tail_bound: float
    radius: int
    slack: float = TAIL_SLACK
    tail_monotone: bool = True
    tail_report: dict = field(default_factory=dict)

    @property
    def total_upper(self) -> float:
        return self.partial_sum + self.tail_bound

    def to_dict(self) -> dict:
        return {"partial_sum": self.partial_sum, "tail_bound": self.tail_bound,
                "radius": self.radius, "slack": self.slack,
                "tail_monotone": self.tail_monotone, "total_upper": self.total_upper}


def _log_sigma_excess(d: int, logx: np.ndarray) -> np.ndarray:
    """``log sigma(x) - (d-1) log x`` for the polynomial sphere count, ``x >= 1``."""
    if d == 1:
        return np.full_like(logx, math.log(2.0))
    big = logx > 300.0 / (d - 1)
    lx = np.where(big, 0.0, logx)
    exact = np.log(np.maximum(sphere_growth_array(d, np.exp(lx)), 1e-300)) - (d - 1) * lx
    asym = d * math.log(2.0) - gammaln(d)
    return np.where(big, asym, exact)


def tail_integral(scheme: LengthScheme, radius: int, tol: float = 1e-14) -> IntegrabilityReport:
    """``int_radius^inf sigma(x) l(x) dx`` in the variable ``w = log(x + shift)``."""
    shift = scheme.shift
    d = scheme.d

    def log_g(w):
        lam = np.log1p(-shift * np.exp(-w))     # log x = w + lam
        kappa, rho = scheme.log_length_split(w)
        return (d - kappa) * w + (d - 1) * lam + _log_sigma_excess(d, w + lam) + rho

    w0 = math.log(radius + shift)
    bps = [b for b in scheme.alpha.breakpoints() if b > w0]
    return integrate_log_tail(log_g, w0, tol, bps)


def _partial(scheme: LengthScheme, radius: int) -> float:
    n = np.arange(radius + 1, dtype=float)
    terms = sphere_growth_array(scheme.d, n) * scheme.length_norm(n)
    return math.fsum(terms[::-1])


def total_mass(scheme: LengthScheme, radius: int) -> MassReport:
    """Partial sum over the ball of the given radius plus an integral tail bound.

    Raises :class:`InadmissibleSchemeError` when the tail integral diverges.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if scheme.weight is not None:
        raise NotImplementedError("mass bounds assume norm-only lengths")
    rep = tail_integral(scheme, radius)
    if rep.infinite:
        raise InadmissibleSchemeError(
            f"scheme {scheme.kind} inadmissible for {scheme.alpha.to_literal()}, d={scheme.d}: "
            "total length diverges", rep)
    partial = _partial(scheme, radius)
    n = np.array([radius, radius + 1], dtype=float)
    h = sphere_growth_array(scheme.d, n) * scheme.length_norm(n)
    return MassReport(partial, TAIL_SLACK * rep.value, radius, TAIL_SLACK,
                      bool(h[1] <= h[0]), rep.to_dict())


def choose_radius(scheme: LengthScheme, tail_tol: float, radius_cap: int = 10 ** 6,
                  max_elements: int = 2 * 10 ** 6) -> MassReport:
    """Smallest radius whose tail bound is at most ``tail_tol`` (within the caps).

    When the caps bind first the report carries the achieved tail bound.
    """
    d = scheme.d
    cap = radius_cap
    while cap > 1 and ball_size(d, cap) > max_elements:
        cap = int(cap * 0.9)
    cap = max(cap, 1)

    def tail(n):
        return TAIL_SLACK * tail_integral(scheme, n).value

    if not math.isfinite(tail(cap)):
        rep = tail_integral(scheme, cap)
        raise InadmissibleSchemeError(
            f"scheme {scheme.kind} inadmissible for {scheme.alpha.to_literal()}, d={d}", rep)
    if tail(cap) > tail_tol:
        return total_mass(scheme, cap)
    lo, hi = 0, 1
    while hi < cap and tail(hi) > tail_tol:
        lo, hi = hi, min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail(mid) <= tail_tol:
            hi = mid
        else:
            lo = mid
    return total_mass(scheme, max(hi, 1))


def admissible_herman(alpha: Modulus, radius: int = 10 ** 5, K: float | None = None) -> tuple[LengthScheme, MassReport]:
    """Herman scheme with K doubled until the total length is at most 1."""
    scheme = LengthScheme("herman_v", alpha, 1, K=K)
    for _ in range(60):
        rep = total_mass(scheme, radius)
        if rep.total_upper <= 1.0:
            return scheme, rep
        scheme = replace(scheme, K=2.0 * scheme.K)
    raise InadmissibleSchemeError("could not make the Herman scheme fit the circle")


# --- fundamental ratio -----------------------------------------------------

def _as_generator(s, d: int) -> tuple[int, ...]:
    if isinstance(s, GroupElement):
        s = s.exponents
    if isinstance(s, int):
        i, sign = abs(s) - 1, (1 if s > 0 else -1)
        if not 0 <= i < d:
            raise ValueError("generator index out of range")
        return tuple(sign if j == i else 0 for j in range(d))
    s = tuple(int(v) for v in s)
    if len(s) != d or sum(abs(v) for v in s) != 1:
        raise ValueError("generator must be +-e_i")
    return s


def fundamental_ratio(scheme: LengthScheme, s, g) -> float:
    """``A(s,k,y) = |1 - l_{sy} / l_y| / alpha(l_y)`` (rotation base, s' = 1).

    ``s`` is a generator given as ``+-e_i`` (tuple or GroupElement) or as a
    signed 1-based index.
    """
    ex = np.array(g.exponents if isinstance(g, GroupElement) else tuple(g), dtype=np.int64)
    sv = np.array(_as_generator(s, scheme.d), dtype=np.int64)
    return float(_ratio_rows(scheme, ex[None, :], (ex + sv)[None, :])[0])


def _ratio_rows(scheme, ey, esy):
    if scheme.weight is None:
        ny = np.abs(ey).sum(axis=1)
        nsy = np.abs(esy).sum(axis=1)
        return _ratio_norm(scheme, ny, nsy)
    ly = np.log(scheme.lengths(ey))
    lsy = np.log(scheme.lengths(esy))
    return np.abs(np.expm1(lsy - ly)) * np.exp(-scheme.log_alpha_of_length(ly))


def _ratio_norm(scheme, ny, nsy):
    ly = scheme.log_length_norm(ny)
    lsy = scheme.log_length_norm(nsy)
    return np.abs(np.expm1(lsy - ly)) * np.exp(-scheme.log_alpha_of_length(ly))


@dataclass
class RatioSup:
    value: float
    argmax: tuple[int, ...]
    generator: tuple[int, ...]
    radius: int

    def to_dict(self):
        return {"value": self.value, "argmax": list(self.argmax),
                "generator": list(self.generator), "radius": self.radius}


def sup_fundamental_ratio(scheme: LengthScheme, radius: int) -> RatioSup:
    """Max of A over all generators +-e_i and all ``||y|| <= radius``."""
    d = scheme.d
    if scheme.weight is not None:
        from .orbit import ball_array
        ex, _ = ball_array(d, radius)
        best = (-1.0, None, None)
        for gen in generators(d):
            for sign in (1, -1):
                sv = sign * np.array(gen.exponents)
                vals = _ratio_rows(scheme, ex, ex + sv)
                i = int(np.argmax(vals))
                if vals[i] > best[0]:
                    best = (float(vals[i]), tuple(int(v) for v in ex[i]), tuple(int(v) for v in sv))
        return RatioSup(best[0], best[1], best[2], radius)
    n = np.arange(radius + 1, dtype=float)
    up = _ratio_norm(scheme, n, n + 1)
    down = np.where(n >= 1, _ratio_norm(scheme, n, np.maximum(n - 1, 0)), -np.inf)
    iu, idn = int(np.argmax(up)), int(np.argmax(down))
    e1 = (1,) + (0,) * (d - 1)
    if up[iu] >= down[idn]:
        y = (iu,) + (0,) * (d - 1)
        return RatioSup(float(up[iu]), y, e1, radius)
    y = (idn,) + (0,) * (d - 1)
    return RatioSup(float(down[idn]), y, tuple(-v for v in e1), radius)
