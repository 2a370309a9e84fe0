"""Concave moduli of continuity.

Every catalog modulus is handled in the logarithmic coordinate
``L = log(1/x)`` and written as

    log alpha(L) = -c * L + r(L)

with a constant ``c >= 0`` and a sublinear remainder ``r``.  Keeping ``c``
and ``r`` apart lets the integrands ``1/alpha^d`` and ``alpha^{-1}(t)/t^{d+1}``
and the two sup-functionals be formed without the catastrophic cancellation
``d*c*L - L`` that would otherwise appear at ``L ~ 1e300``.

Logarithmic families are monotone and concave only for small ``x``.  Each one
is used on ``(0, x*]`` and continued by its tangent line above ``x*``; the
continuation is concave, has no kink, and is exact arithmetic.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .quadrature import IntegrabilityReport, integrate_log_tail

__all__ = [
    "DomainError",
    "Modulus",
    "SupReport",
    "parse_modulus",
    "eval",
    "inverse",
    "derivative",
    "integrate_one_over_alpha_d",
    "integrate_alpha_inv",
    "sup_alphay_condition",
    "sup_M",
    "FAMILIES",
]

FAMILIES = ("power", "herman_log", "dkn", "iterated_log", "inverse_log", "tabulated")


class DomainError(ValueError):
    """Argument outside the domain of a modulus operation."""


def _iter_logs(L, depth):
    """Iterated logarithms l_1 = L, l_j = log l_{j-1}, j = 1..depth."""
    out = [L]
    for _ in range(depth - 1):
        out.append(np.log(out[-1]))
    return out


class Modulus:
    """A concave modulus of continuity ``alpha`` on ``[0, domain_cap]``.

    Instances are immutable; use :func:`parse_modulus` or the class
    constructors.
    """

    __slots__ = ("family", "params", "domain_cap", "c", "L_star", "x_star",
                 "alpha_star", "slope_star", "_knots", "_vals", "_slopes", "_frozen")

    def __init__(self, family: str, params: dict | None = None, domain_cap: float = 1.0):
        params = dict(params or {})
        set_ = object.__setattr__
        set_(self, "_frozen", False)
        if family == "table":
            family = "tabulated"
        if family not in FAMILIES:
            raise ValueError(f"unknown modulus family {family!r}; expected one of {FAMILIES}")
        if not domain_cap > 0:
            raise ValueError("domain_cap must be positive")
        self.family = family
        self.domain_cap = float(domain_cap)
        self._knots = self._vals = self._slopes = None

        if family == "power":
            tau = float(params.get("tau", 0.5))
            if not 0.0 < tau <= 1.0:
                raise ValueError("power modulus needs 0 < tau <= 1")
            params = {"tau": tau}
            self.c, self.L_star = tau, -math.inf
        elif family == "herman_log":
            eps = float(params.get("eps", 0.0))
            if eps < 0:
                raise ValueError("herman_log needs eps >= 0")
            params = {"eps": eps}
            self.c, self.L_star = 1.0, 2.0 * (1.0 + eps)
        elif family == "dkn":
            d = int(params.get("d", 2))
            eps = float(params.get("eps", 0.1))
            if d < 1 or eps < 0:
                raise ValueError("dkn needs d >= 1 and eps >= 0")
            params = {"d": d, "eps": eps}
            self.c, self.L_star = 1.0 / d, 2.0 * (1.0 + d * eps)
        elif family == "iterated_log":
            depth = int(params.get("depth", 1))
            eps = float(params.get("eps", 0.0))
            if depth < 1 or eps < 0:
                raise ValueError("iterated_log needs depth >= 1 and eps >= 0")
            params = {"depth": depth, "eps": eps}
            Ls = 2.0 * (1.0 + eps)
            for _ in range(depth - 1):
                Ls = math.exp(Ls)
            self.c, self.L_star = 1.0, Ls
        elif family == "inverse_log":
            params = {}
            self.c, self.L_star = 0.0, 4.0
        else:
            self._init_table(params)
            params = {k: params[k] for k in ("path",) if k in params}
        self.params = params

        if family != "tabulated" and math.isfinite(self.L_star):
            Ls = self.L_star
            self.x_star = math.exp(-Ls)
            log_a = -self.c * Ls + float(self._rem_core(np.array(Ls)))
            self.alpha_star = math.exp(log_a)
            dlog = -self.c + float(self._drem_core(np.array(Ls)))
            self.slope_star = -(self.alpha_star / self.x_star) * dlog
        else:
            self.x_star = math.inf
            self.alpha_star = self.slope_star = math.nan
            if family == "power":
                self.L_star = -math.inf
        set_(self, "_frozen", True)

    def __setattr__(self, name, value):
        if getattr(self, "_frozen", False):
            raise AttributeError("Modulus is immutable")
        object.__setattr__(self, name, value)

    # --- construction helpers -------------------------------------------

    def _init_table(self, params):
        if "x" in params and "alpha" in params:
            xs, ys = params["x"], params["alpha"]
        elif "path" in params:
            xs, ys = _read_table(params["path"])
        else:
            raise ValueError("tabulated modulus needs path= or explicit x/alpha arrays")
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.shape != ys.shape or xs.ndim != 1:
            raise ValueError("table needs matching one-dimensional x and alpha columns")
        order = np.argsort(xs)
        xs, ys = xs[order], ys[order]
        if xs[0] != 0.0:
            xs, ys = np.concatenate([[0.0], xs]), np.concatenate([[0.0], ys])
        if ys[0] != 0.0:
            raise ValueError("table must satisfy alpha(0) = 0")
        if xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise ValueError("table knots must be distinct")
        slopes = np.diff(ys) / np.diff(xs)
        if np.any(slopes <= 0):
            raise ValueError("table is not strictly increasing")
        if np.any(np.diff(slopes) > 1e-12 * slopes[:-1]):
            raise ValueError("table is not concave (slopes must be non-increasing)")
        self._knots, self._vals, self._slopes = xs, ys, slopes
        self.c = 1.0
        self.L_star = -math.inf

    @classmethod
    def power(cls, tau: float, domain_cap: float = 1.0) -> "Modulus":
        return cls("power", {"tau": tau}, domain_cap)

    @classmethod
    def herman_log(cls, eps: float = 0.0, domain_cap: float = 1.0) -> "Modulus":
        return cls("herman_log", {"eps": eps}, domain_cap)

    @classmethod
    def dkn(cls, d: int = 2, eps: float = 0.1, domain_cap: float = 1.0) -> "Modulus":
        return cls("dkn", {"d": d, "eps": eps}, domain_cap)

    @classmethod
    def iterated_log(cls, depth: int = 1, eps: float = 0.0, domain_cap: float = 1.0) -> "Modulus":
        return cls("iterated_log", {"depth": depth, "eps": eps}, domain_cap)

    @classmethod
    def inverse_log(cls, domain_cap: float = 1.0) -> "Modulus":
        return cls("inverse_log", {}, domain_cap)

    @classmethod
    def table(cls, x, alpha, domain_cap: float | None = None) -> "Modulus":
        x = np.asarray(x, dtype=float)
        cap = float(x.max()) if domain_cap is None else domain_cap
        return cls("tabulated", {"x": x, "alpha": np.asarray(alpha, dtype=float)}, cap)

    # --- log-space core ---------------------------------------------------

    def _rem_core(self, L):
        f, p = self.family, self.params
        if f == "power":
            return np.zeros_like(L)
        if f == "herman_log":
            return (1.0 + p["eps"]) * np.log(L)
        if f == "dkn":
            return (1.0 / p["d"] + p["eps"]) * np.log(L)
        if f == "iterated_log":
            logs = _iter_logs(L, p["depth"])
            out = sum(np.log(l) for l in logs)
            return out + p["eps"] * np.log(logs[-1])
        if f == "inverse_log":
            return -np.log(L)
        raise AssertionError(f)

    def _drem_core(self, L):
        f, p = self.family, self.params
        if f == "power":
            return np.zeros_like(L)
        if f == "herman_log":
            return (1.0 + p["eps"]) / L
        if f == "dkn":
            return (1.0 / p["d"] + p["eps"]) / L
        if f == "iterated_log":
            logs = _iter_logs(L, p["depth"])
            out = np.zeros_like(L)
            prod = np.ones_like(L)
            for j, l in enumerate(logs):
                prod = prod * l
                w = 1.0 + (p["eps"] if j == len(logs) - 1 else 0.0)
                out = out + w / prod
            return out
        if f == "inverse_log":
            return -1.0 / L
        raise AssertionError(f)

    def _table_alpha(self, x):
        xs, ys, sl = self._knots, self._vals, self._slopes
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, sl.size - 1)
        return ys[i] + sl[i] * (x - xs[i])

    def rem(self, L) -> np.ndarray:
        """Remainder ``r(L) = log alpha(e^{-L}) + c L`` for any real ``L``."""
        L = np.asarray(L, dtype=float)
        if self.family == "tabulated":
            with np.errstate(over="ignore"):
                x = np.exp(-L)
            small = x < self._knots[1]
            xs = np.where(small, self._knots[1], x)
            r = np.log(self._table_alpha(xs) / xs)
            return np.where(small, math.log(self._slopes[0]), r)
        if not math.isfinite(self.L_star):
            return self._rem_core(L)
        core = L >= self.L_star
        Lc = np.where(core, L, self.L_star)
        out = self._rem_core(Lc)
        if np.all(core):
            return out
        Le = np.where(core, self.L_star, L)
        with np.errstate(over="ignore"):
            x = np.exp(-Le)
        ext = np.log(self.alpha_star + self.slope_star * (x - self.x_star)) + self.c * Le
        return np.where(core, out, ext)

    def log_alpha(self, L) -> np.ndarray:
        """``log alpha(e^{-L})``."""
        L = np.asarray(L, dtype=float)
        if self.c == 0.0:
            return self.rem(L)
        return -self.c * L + self.rem(L)

    def dlog_alpha(self, L) -> np.ndarray:
        """``d log alpha / dL`` (negative: alpha increases with x)."""
        L = np.asarray(L, dtype=float)
        if self.family == "tabulated":
            x = np.exp(-L)
            small = x < self._knots[1]
            xs = np.where(small, self._knots[1], x)
            return np.where(small, -1.0, -xs * self._table_deriv(xs) / self._table_alpha(xs))
        if not math.isfinite(self.L_star):
            return -self.c + self._drem_core(L)
        core = L >= self.L_star
        Lc = np.where(core, L, self.L_star)
        out = -self.c + self._drem_core(Lc)
        if np.all(core):
            return out
        Le = np.where(core, self.L_star, L)
        x = np.exp(-Le)
        a = self.alpha_star + self.slope_star * (x - self.x_star)
        return np.where(core, out, -self.slope_star * x / a)

    def _table_deriv(self, x):
        xs = self._knots
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        h = 0.25 * (xs[i + 1] - xs[i])
        lo = np.maximum(x - h, 0.0)
        return (self._table_alpha(x + h) - self._table_alpha(lo)) / (x + h - lo)

    def log_inverse(self, s) -> np.ndarray:
        """``L`` with ``log alpha(e^{-L}) = -s``, i.e. ``alpha^{-1}(e^{-s}) = e^{-L}``."""
        s = np.asarray(s, dtype=float)
        f = self.family
        if f == "tabulated":
            t = np.exp(-s)
            return -np.log(self._table_inverse(t))
        if f == "power":
            return s / self.c
        s_star = -(-self.c * self.L_star + float(self._rem_core(np.array(self.L_star))))
        core = s >= s_star
        out = np.empty_like(s)
        if np.any(~core):
            t = np.exp(-s[~core])
            out[~core] = -np.log(self.x_star + (t - self.alpha_star) / self.slope_star)
        if np.any(core):
            sc = s[core]
            out[core] = np.exp(sc) if f == "inverse_log" else self._newton(sc)
        return out

    def _newton(self, s):
        """Safeguarded Newton for ``-c L + r(L) = -s`` on the core region."""
        c = self.c
        lo = np.maximum(s / c, self.L_star)   # r >= 0 on the core, so F(lo) >= 0
        hi = lo.copy()
        F = lambda L: -c * L + self._rem_core(L) + s
        for _ in range(200):
            up = F(hi) > 0
            if not np.any(up):
                break
            hi = np.where(up, 2.0 * hi + 1.0, hi)
        L = lo.copy()
        for _ in range(100):
            val = F(L)
            lo = np.where(val >= 0, L, lo)
            hi = np.where(val <= 0, L, hi)
            step = val / (-c + self._drem_core(L))
            Ln = L - step
            out = (Ln <= lo) | (Ln >= hi) | ~np.isfinite(Ln)
            Ln = np.where(out, 0.5 * (lo + hi), Ln)
            done = np.abs(Ln - L) <= 4e-16 * np.abs(Ln)
            L = Ln
            if np.all(done):
                break
        return L

    def _table_inverse(self, t):
        xs, ys, sl = self._knots, self._vals, self._slopes
        i = np.clip(np.searchsorted(ys, t, side="right") - 1, 0, sl.size - 1)
        return xs[i] + (t - ys[i]) / sl[i]

    # --- public pointwise API ---------------------------------------------

    def _check_x(self, x, strict=False):
        x = np.asarray(x, dtype=float)
        bad = (x <= 0) if strict else (x < 0)
        if np.any(bad | (x > self.domain_cap) | np.isnan(x)):
            raise DomainError(f"argument outside (0, {self.domain_cap}]" if strict
                              else f"argument outside [0, {self.domain_cap}]")
        return x

    @property
    def alpha_cap(self) -> float:
        return float(self.eval(self.domain_cap))

    def eval(self, x):
        """``alpha(x)`` for ``0 <= x <= domain_cap``."""
        x = self._check_x(x)
        if self.family == "tabulated":
            out = self._table_alpha(x)
        elif self.family == "power":
            out = x ** self.c
        else:
            pos = x > 0
            with np.errstate(divide="ignore"):
                L = -np.log(np.where(pos, x, 1.0))
            out = np.where(pos, np.exp(self.log_alpha(L)), 0.0)
            lin = x > self.x_star
            out = np.where(lin, self.alpha_star + self.slope_star * (x - self.x_star), out)
        return out if out.ndim else float(out)

    __call__ = eval

    def inverse(self, t):
        """``alpha^{-1}(t)`` for ``0 <= t <= alpha(domain_cap)``."""
        t = np.asarray(t, dtype=float)
        top = self.alpha_cap
        if np.any((t < 0) | (t > top * (1 + 1e-15)) | np.isnan(t)):
            raise DomainError(f"argument outside [0, {top}]")
        pos = t > 0
        if self.family == "tabulated":
            out = self._table_inverse(t)
        elif self.family == "power":
            out = t ** (1.0 / self.c)
        else:
            with np.errstate(divide="ignore"):
                s = -np.log(np.where(pos, t, 1.0))
            out = np.exp(-self.log_inverse(np.atleast_1d(s))).reshape(s.shape)
        out = np.where(pos, np.minimum(out, self.domain_cap), 0.0)
        return out if out.ndim else float(out)

    def derivative(self, x):
        """``alpha'(x)`` for ``0 < x <= domain_cap``."""
        x = self._check_x(x, strict=True)
        if self.family == "tabulated":
            out = self._table_deriv(x)
        elif self.family == "power":
            out = self.c * x ** (self.c - 1.0)
        else:
            L = -np.log(x)
            a = np.exp(self.log_alpha(L))
            out = -(a / x) * self.dlog_alpha(L)
            out = np.where(x > self.x_star, self.slope_star, out)
        return out if out.ndim else float(out)

    def breakpoints(self) -> list[float]:
        """Kinks of ``log alpha`` in the ``L`` coordinate."""
        if self.family == "tabulated":
            return [float(-math.log(k)) for k in self._knots[1:]]
        if math.isfinite(self.L_star):
            return [self.L_star]
        return []

    # --- serialization ----------------------------------------------------

    def to_literal(self) -> str:
        f = "table" if self.family == "tabulated" else self.family
        items = [f"{k}={_fmt(v)}" for k, v in self.params.items()]
        if self.domain_cap != 1.0 and self.family != "tabulated":
            items.append(f"cap={_fmt(self.domain_cap)}")
        return f + (":" + ",".join(items) if items else "")

    def to_dict(self) -> dict:
        out = {"family": self.family, "params": dict(self.params), "domain_cap": self.domain_cap}
        if self.family == "tabulated":
            out["params"]["x"] = self._knots.tolist()
            out["params"]["alpha"] = self._vals.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Modulus":
        return cls(data["family"], data.get("params", {}), data.get("domain_cap", 1.0))

    def __eq__(self, other):
        if not isinstance(other, Modulus):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def __repr__(self):
        return f"Modulus({self.to_literal()!r})"


def _fmt(v):
    if isinstance(v, float) and v.is_integer() and abs(v) < 1e15:
        return repr(v)
    return str(v)


def _read_table(path):
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() == ".json":
        data = json.loads(text)
        if isinstance(data, dict):
            return data["x"], data["alpha"]
        arr = np.asarray(data, dtype=float)
        return arr[:, 0], arr[:, 1]
    rows = []
    for row in csv.reader(text.splitlines()):
        if not row or row[0].lstrip().startswith("#"):
            continue
        try:
            rows.append((float(row[0]), float(row[1])))
        except ValueError:
            continue  # header
    if not rows:
        raise ValueError(f"no numeric rows in {path}")
    arr = np.asarray(rows)
    return arr[:, 0], arr[:, 1]


def parse_modulus(literal: str) -> Modulus:
    """Parse ``"family:key=value,..."``, e.g. ``"dkn:d=2,eps=0.1"``."""
    literal = literal.strip()
    family, _, rest = literal.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError(f"malformed modulus parameter {item!r} in {literal!r}")
            params[key.strip()] = val.strip()
    cap = params.pop("cap", None)
    family = family.strip()
    if family in ("table", "tabulated"):
        if "path" not in params:
            raise ValueError("table modulus needs path=")
        xs, ys = _read_table(params["path"])
        cap = float(max(xs)) if cap is None else float(cap)
        return Modulus("tabulated", {"x": xs, "alpha": ys, "path": params["path"]}, cap)
    return Modulus(family, params, 1.0 if cap is None else float(cap))


# --- module-level operations ------------------------------------------------

def eval(alpha: Modulus, x):  # noqa: A001 - mirrors the operation name
    return alpha.eval(x)


def inverse(alpha: Modulus, t):
    return alpha.inverse(t)


def derivative(alpha: Modulus, x):
    return alpha.derivative(x)


def integrate_one_over_alpha_d(alpha: Modulus, d: int, tol: float = 1e-8) -> IntegrabilityReport:
    """``int_0^cap dx / alpha(x)^d`` with a convergence verdict."""
    if d < 1:
        raise ValueError("d must be >= 1")
    k = d * alpha.c - 1.0

    def log_g(L):
        return k * L - d * alpha.rem(L)

    u0 = -math.log(alpha.domain_cap)
    rep = integrate_log_tail(log_g, u0, tol, alpha.breakpoints())
    rep.details["integrand"] = f"1/alpha^{d}"
    return rep


def integrate_alpha_inv(alpha: Modulus, d: int, tol: float = 1e-8) -> IntegrabilityReport:
    """``int_0^t1 alpha^{-1}(t) / t^{d+1} dt`` with ``t1 = min(1, alpha(cap))``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    c = alpha.c
    s0 = -math.log(min(1.0, alpha.alpha_cap))

    def log_g(s):
        L = alpha.log_inverse(s)
        if c > 0:
            # d*s - L with L = (s + r(L))/c substituted
            return (d - 1.0 / c) * s - alpha.rem(L) / c
        return d * s - L

    bps = [float(-alpha.log_alpha(np.array(b))) for b in alpha.breakpoints()]
    rep = integrate_log_tail(log_g, s0, tol, bps)
    rep.details["integrand"] = f"alpha^-1(t)/t^{d + 1}"
    return rep


@dataclass(frozen=True)
class SupReport:
    value: float
    argmax: float
    log_argmax: float
    finite: bool

    def to_dict(self):
        return {"value": self.value if self.finite else None, "argmax": self.argmax,
                "log_argmax": self.log_argmax, "finite": self.finite}


_L_GRID = np.logspace(-8, 300, 6161)


def _grid_sup(log_f, extra=()) -> SupReport:
    """Supremum of ``exp(log_f(L))`` over ``L in (0, inf)`` (``x = e^{-L}`` in (0,1))."""
    with np.errstate(all="ignore"):
        vals = log_f(_L_GRID)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    lg = np.log10(_L_GRID)
    mid = (lg >= 75) & (lg < 150)
    top = lg >= 150
    m_mid, m_top = np.max(vals[mid]), np.max(vals[top])
    last = vals[lg >= 290]
    growing = np.all(np.diff(last) >= -1e-12) and last[-1] > last[0]
    if not np.isfinite(m_top) or (m_top > m_mid + math.log(1.01) and growing):
        return SupReport(math.inf, 0.0, math.inf, False)
    i = int(np.argmax(vals))
    lo = lg[max(i - 1, 0)]
    hi = lg[min(i + 1, lg.size - 1)]
    best_l, best_v = float(lg[i]), float(vals[i])
    if hi > lo:
        res = minimize_scalar(lambda q: -float(log_f(np.array(10.0 ** q))),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        if -res.fun > best_v:
            best_l, best_v = float(res.x), -float(res.fun)
    for e in extra:
        v = float(log_f(np.array(float(e))))
        if v > best_v:
            best_l, best_v = math.log10(e), v
    L = 10.0 ** best_l
    return SupReport(math.exp(best_v), math.exp(-L), float(L), True)


def sup_M(alpha: Modulus) -> SupReport:
    """``sup_{0<t<1} alpha(t) / (t alpha'(t))`` for catalog moduli."""
    if alpha.family == "tabulated":
        raise ValueError("sup_M is defined for catalog families only "
                         "(tabulated moduli have a piecewise derivative)")

    def log_m(L):
        return -np.log(-alpha.dlog_alpha(L))

    return _grid_sup(log_m, [b for b in alpha.breakpoints() if b > 0])


def sup_alphay_condition(alpha: Modulus, d: int) -> SupReport:
    """``sup_{0<y<1} alpha(y^{d+1} / alpha(y)^d) / y``."""
    if d < 2:
        raise ValueError("d must be >= 2")
    c = alpha.c
    a = d + 1.0 - d * c

    def log_phi(Ly):
        r_y = alpha.rem(Ly)
        L_arg = a * Ly + d * r_y
        return (1.0 - c * a) * Ly - c * d * r_y + alpha.rem(L_arg)

    extra = [b for b in alpha.breakpoints() if b > 0]
    return _grid_sup(log_phi, extra)
