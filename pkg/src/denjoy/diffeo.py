"""The Yoccoz kernel and the blown-up circle diffeomorphisms.

For ``a, b > 0`` and ``R > 0`` the map ``phi(a,b,R): [0,a] -> [0,b]`` is
defined by ``cot(pi phi / b) = R cot(pi t / a)``.  It is evaluated as

    phi(t) = (b/pi) atan2(sin(pi t/a), R cos(pi t/a))

which needs no cotangent and is exact at the midpoint.  With ``R = b/a`` its
derivative equals 1 at both endpoints, so gluing these maps across the
blown-up intervals of a rotation gives a C^1 diffeomorphism.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .blowup import BlowupModel
from .orbit import orbit_points

__all__ = [
    "YoccozMap",
    "DiffeoAction",
    "xi",
    "xi_integral",
    "phi",
    "phi_deriv",
    "phi_inverse",
    "EDGE",
]

EDGE = 1e-9   # relative distance to an endpoint below which endpoint values are pinned


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def xi(R: float, t):
    """``xi(R)(t) = (1+R) / (1 + R^2 cot^2(pi t))`` on (0,1), zero elsewhere."""
    t, scalar = _as_array(t)
    inside = (t > EDGE) & (t < 1.0 - EDGE)
    s = np.sin(np.pi * t)
    c = np.cos(np.pi * t)
    s2 = s * s
    val = (1.0 + R) * s2 / (s2 + R * R * c * c)
    out = np.where(inside, val, 0.0)
    return float(out) if scalar else out


def _atan_over(z):
    """atan(z)/z, with the series near 0."""
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    z2 = z * z
    return np.where(small, 1.0 - z2 / 3.0 + z2 * z2 / 5.0, np.arctan(zs) / zs)


def xi_integral(R: float, u):
    """``Xi(R)(u) = int_0^u xi(R)`` for ``u`` in [0, 1].

    Uses ``Xi = (1/pi) [w - (s c / E) atan(z)/z]`` with ``v = pi u``,
    ``w = atan2(sin v, R cos v)``, ``E = R cos^2 v + sin^2 v`` and
    ``z = (R - 1) s c / E``.  This equals ``(u - R phi(1,1,R)(u)) / (1 - R)``
    but has no removable singularity at ``R = 1``.
    """
    u, scalar = _as_array(u)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("xi_integral needs u in [0, 1]")
    v = np.pi * u
    s, c = np.sin(v), np.cos(v)
    w = np.arctan2(s, R * c)
    E = R * c * c + s * s
    sc = s * c
    z = (R - 1.0) * sc / E
    out = (w - (sc / E) * _atan_over(z)) / np.pi
    out = np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, out))
    return float(out) if scalar else out


def _check_t(t, a):
    if np.any((t < 0) | (t > a)) or np.any(np.isnan(t)):
        raise ValueError(f"phi needs t in [0, {a}]")


def phi(a: float, b: float, R: float, t):
    """``phi(a,b,R)(t)`` for ``t`` in ``[0, a]``."""
    t, scalar = _as_array(t)
    _check_t(t, a)
    v = np.pi * t / a
    out = (b / np.pi) * np.arctan2(np.sin(v), R * np.cos(v))
    r = t / a
    out = np.where(r < EDGE, r * b / R if R else 0.0, out)
    out = np.where(r <= 0, 0.0, out)
    out = np.where(r > 1.0 - EDGE, b - (1.0 - r) * b / R, out)
    out = np.where(r >= 1.0, b, out)
    return float(out) if scalar else out


def phi_deriv(a: float, b: float, R: float, t):
    """``phi(a,b,R)'(t) = (b / (a R)) (1 - (1 - R) xi(R)(t/a))``."""
    t, scalar = _as_array(t)
    _check_t(t, a)
    v = np.pi * t / a
    s, c = np.sin(v), np.cos(v)
    out = (b / a) * R / (s * s + R * R * c * c)
    r = t / a
    out = np.where((r < EDGE) | (r > 1.0 - EDGE), b / (a * R), out)
    return float(out) if scalar else out


def phi_inverse(a: float, b: float, R: float, s):
    """Inverse map, ``phi(a,b,R)^{-1} = phi(b,a,1/R)``."""
    return phi(b, a, 1.0 / R, s)


@dataclass(frozen=True)
class YoccozMap:
    a: float
    b: float
    R: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.R > 0):
            raise ValueError("YoccozMap needs a, b, R > 0")

    def __call__(self, t):
        return phi(self.a, self.b, self.R, t)

    def deriv(self, t):
        return phi_deriv(self.a, self.b, self.R, t)

    def inverse(self, s):
        return phi_inverse(self.a, self.b, self.R, s)

    def compose(self, first: "YoccozMap") -> "YoccozMap":
        """``self o first`` (requires ``first.b == self.a``)."""
        if not math.isclose(first.b, self.a, rel_tol=1e-12):
            raise ValueError("maps are not composable")
        return YoccozMap(first.a, self.b, first.R * self.R)


class _Generator:
    """Per-generator tables: target start, target length and ratio for every row."""

    def __init__(self, model: BlowupModel, s: tuple[int, ...]):
        self.s = s
        sv = np.array(s, dtype=np.int64)
        tex = model.exponents + sv
        rows = model.rows_of(tex)
        self.theta = float(np.dot(sv, np.array(model.action.theta)))
        self.shift = self.theta - math.floor(self.theta)
        tgt_a = np.empty(model.size)
        tgt_len = np.empty(model.size)
        known = rows >= 0
        tgt_a[known] = model.starts[rows[known]]
        tgt_len[known] = model.lengths[rows[known]]
        if np.any(~known):
            # boundary rows map to intervals just outside the index: place them
            # where the (smeared) measure puts the orbit point
            vex = tex[~known]
            vp = orbit_points(model.action.theta, vex)
            tgt_a[~known] = model.position(vp)
            tgt_len[~known] = model.scheme.lengths(vex)
        self.rows = rows
        self.tgt_a = tgt_a
        self.tgt_len = tgt_len
        self.R = tgt_len / model.lengths
        self.virtual = int(np.count_nonzero(~known))
        self.f0 = None
        # python lists for the scalar fast path
        self._tgt_a = tgt_a.tolist()
        self._tgt_len = tgt_len.tolist()


class DiffeoAction:
    """The blown-up action: one circle diffeomorphism per generator ``+-e_i``."""

    def __init__(self, model: BlowupModel):
        self.model = model
        self._gens: dict[tuple[int, ...], _Generator] = {}
        self._starts = model.starts.tolist()
        self._lens = model.lengths.tolist()
        self._points = model.points.tolist()
        self._prefix = [float(v) for v in model._prefix]
        self._scale = model.gap_scale

    @property
    def d(self) -> int:
        return self.model.d

    def generator(self, s) -> _Generator:
        s = self._normalize(s)
        if s not in self._gens:
            g = _Generator(self.model, s)
            self._gens[s] = g
            g.f0 = float(self.eval(s, 0.0))
        return self._gens[s]

    def _normalize(self, s) -> tuple[int, ...]:
        d = self.d
        if isinstance(s, (int, np.integer)):
            i, sign = abs(int(s)) - 1, (1 if s > 0 else -1)
            if not 0 <= i < d:
                raise ValueError("generator index out of range")
            return tuple(sign if j == i else 0 for j in range(d))
        if hasattr(s, "exponents"):
            s = s.exponents
        s = tuple(int(v) for v in s)
        if len(s) != d or sum(abs(v) for v in s) != 1:
            raise ValueError("generator must be +-e_i")
        return s

    # --- vectorised evaluation ---------------------------------------------

    def eval(self, s, x):
        """``f_s(x)`` on the circle, values in [0, 1)."""
        g = self.generator(s)
        x, scalar = _as_array(x)
        u = x - np.floor(x)
        m = self.model
        row = m.locate(u)
        inside = row >= 0
        out = np.empty_like(u)
        if np.any(inside):
            r = row[inside]
            a, b, R = m.lengths[r], g.tgt_len[r], g.R[r]
            t = np.clip(u[inside] - m.starts[r], 0.0, a)
            out[inside] = g.tgt_a[r] + _phi_rows(a, b, R, t)
        if np.any(~inside):
            h = m.H(u[~inside]) + g.shift
            out[~inside] = m.position(h - np.floor(h))
        out = out - np.floor(out)
        return float(out) if scalar else out

    def eval_deriv(self, s, x):
        """``f_s'(x)``; exactly 1 on the gap set."""
        g = self.generator(s)
        x, scalar = _as_array(x)
        u = x - np.floor(x)
        m = self.model
        row = m.locate(u)
        inside = row >= 0
        out = np.ones_like(u)
        if np.any(inside):
            r = row[inside]
            a, b, R = m.lengths[r], g.tgt_len[r], g.R[r]
            t = np.clip(u[inside] - m.starts[r], 0.0, a)
            out[inside] = _phi_deriv_rows(a, b, R, t)
        return float(out) if scalar else out

    def eval_via_xi(self, s, x):
        """Second route for f_s inside intervals: ``a_sy + t - (1-R) l_y Xi(R)(t/l_y)``."""
        g = self.generator(s)
        m = self.model
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = x - np.floor(x)
        row = m.locate(u)
        out = np.full_like(u, np.nan)
        for j in np.nonzero(row >= 0)[0]:
            r = row[j]
            a, R = m.lengths[r], g.R[r]
            t = min(max(u[j] - m.starts[r], 0.0), a)
            out[j] = g.tgt_a[r] + t - (1.0 - R) * a * xi_integral(R, t / a)
        return out

    def lift(self, s, x):
        """Lift ``F_s`` with ``F_s(0) = f_s(0)`` in [0, 1)."""
        g = self.generator(s)
        x, scalar = _as_array(x)
        whole = np.floor(x)
        y = self.eval(s, x - whole)
        out = whole + y + (y < g.f0)
        return float(out) if scalar else out

    def deriv_budget(self) -> float:
        """``max_{||y|| > N} |1 - R_y| * sup xi`` bound on f' errors over unindexed intervals."""
        sch = self.model.scheme
        n = np.arange(self.model.radius + 1, self.model.radius + 65, dtype=float)
        l0 = sch.log_length_norm(n)
        ratio = np.exp(sch.log_length_norm(n + 1) - l0)
        return float(np.max(np.abs(1.0 - ratio) * (1.0 + np.maximum(ratio, 1.0 / ratio))))

    # --- scalar fast path -------------------------------------------------

    def eval_scalar(self, g: _Generator, u: float) -> float:
        i = bisect.bisect_right(self._starts, u) - 1
        if i >= 0:
            a = self._lens[i]
            t = u - self._starts[i]
            if t <= a:
                b = g._tgt_len[i]
                R = b / a
                r = t / a
                if r < EDGE:
                    val = r * b / R
                elif r > 1.0 - EDGE:
                    val = b - (1.0 - r) * b / R
                else:
                    v = math.pi * r
                    val = (b / math.pi) * math.atan2(math.sin(v), R * math.cos(v))
                y = g._tgt_a[i] + val
                return y - math.floor(y)
        # gap: H, rotate, position
        if i >= 0:
            h = self._points[i] + (u - self._starts[i] - self._lens[i]) / self._scale
            hi = self._points[i + 1] if i + 1 < len(self._points) else 1.0
            h = min(max(h, self._points[i]), hi)
        else:
            h = min(u / self._scale, self._points[0] if self._points else 1.0)
        h += g.shift
        h -= math.floor(h)
        j = bisect.bisect_left(self._points, h)
        y = self._scale * h + self._prefix[j]
        return y - math.floor(y)

    def lift_iterate(self, s, x0: float, n: int) -> float:
        """``F_s^n(x0)``; the integer winding is accumulated exactly."""
        if n < 0:
            raise ValueError("n must be non-negative")
        g = self.generator(s)
        whole = math.floor(x0)
        u = x0 - whole
        winding = 0
        f0 = g.f0
        for _ in range(n):
            y = self.eval_scalar(g, u)
            if y < f0:
                winding += 1
            u = y
        return whole + winding + u

    def orbit(self, s, x0: float, n: int) -> np.ndarray:
        g = self.generator(s)
        out = np.empty(n + 1)
        u = x0 - math.floor(x0)
        out[0] = u
        for j in range(n):
            u = self.eval_scalar(g, u)
            out[j + 1] = u
        return out


def _phi_rows(a, b, R, t):
    r = t / a
    v = np.pi * r
    out = (b / np.pi) * np.arctan2(np.sin(v), R * np.cos(v))
    out = np.where(r < EDGE, r * b / R, out)
    out = np.where(r > 1.0 - EDGE, b - (1.0 - r) * b / R, out)
    return out


def _phi_deriv_rows(a, b, R, t):
    r = t / a
    v = np.pi * r
    s, c = np.sin(v), np.cos(v)
    out = (b / a) * R / (s * s + R * R * c * c)
    return np.where((r < EDGE) | (r > 1.0 - EDGE), b / (a * R), out)
