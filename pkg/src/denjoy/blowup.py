"""Blow-up of a rotation orbit: the measure mu, interval positions and the semi-conjugacy H.

The model indexes every orbit point ``y = <g.theta>`` with ``||g|| <= N`` and
gives it an interval of length ``l_y``.  The mass of the unindexed part of the
orbit is spread uniformly, so that

    position(y) = mu[0, y) = (1 - L_N) y + sum_{indexed w < y} l_w,   L_N = sum_{||g||<=N} l_g

has total mass exactly 1.  Compared to the infinite construction every
position is off by at most the tail mass ``sum_{||g||>N} l_g``, which is
bounded by ``mass.tail_bound``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lengths import InadmissibleSchemeError, LengthScheme, MassReport, choose_radius, total_mass
from .orbit import GroupElement, RotationAction, ball_array

__all__ = ["BlowupModel", "CorruptModelError", "MODEL_VERSION", "build_model"]

MODEL_VERSION = 1
DUP_TOL = 1e-15


class CorruptModelError(ValueError):
    """A persisted model failed validation."""


@dataclass
class BlowupModel:
    action: RotationAction
    scheme: LengthScheme
    mass: MassReport
    radius: int
    tol: float
    exponents: np.ndarray          # (m, d) int64, sorted by point
    norms: np.ndarray              # (m,)
    points: np.ndarray             # (m,) orbit points in [0, 1), increasing
    lengths: np.ndarray            # (m,)
    starts: np.ndarray             # (m,) a_y
    partial: float                 # L_N
    near_duplicates: int = 0
    meta: dict = field(default_factory=dict)

    # --- construction -----------------------------------------------------

    @classmethod
    def build(cls, action: RotationAction, scheme: LengthScheme, radius: int | None = None,
              tail_tol: float = 1e-10, tol: float = 1e-12, radius_cap: int = 10 ** 6,
              max_elements: int = 2 * 10 ** 6, require_fit: bool = True) -> "BlowupModel":
        """Index the ball of the given radius, or pick the radius from ``tail_tol``."""
        if action.d != scheme.d:
            raise ValueError(f"action has d={action.d} but scheme has d={scheme.d}")
        if radius is None:
            mass = choose_radius(scheme, tail_tol, radius_cap, max_elements)
        else:
            mass = total_mass(scheme, radius)
        if mass.partial_sum >= 1.0 or (require_fit and mass.total_upper > 1.0):
            raise InadmissibleSchemeError(
                f"total length bound {mass.total_upper:.6g} exceeds 1; increase k or K, "
                "or reduce scale")
        N = mass.radius
        ex, norms = ball_array(scheme.d, N)
        pts = action.points(ex)
        lens = scheme.lengths(ex, norms)
        order = np.argsort(pts, kind="stable")
        ex, norms, pts, lens = ex[order], norms[order], pts[order], lens[order]
        gaps = np.diff(pts)
        dups = int(np.count_nonzero(gaps <= DUP_TOL))
        if dups:
            warnings.warn(f"{dups} orbit points coincide within {DUP_TOL}; "
                          "the rotation vector may be resonant", stacklevel=2)
        partial = math.fsum(lens)
        csum = np.cumsum(lens.astype(np.longdouble))
        before = np.concatenate([[np.longdouble(0)], csum[:-1]])
        starts = ((1 - np.longdouble(partial)) * pts.astype(np.longdouble) + before).astype(float)
        model = cls(action, scheme, mass, N, tol, ex, norms, pts, lens, starts, partial, dups)
        model.meta["tail_tol"] = tail_tol
        model.meta["tail_tol_met"] = bool(mass.tail_bound <= tail_tol)
        return model

    def __post_init__(self):
        self._keys_sorted = None
        self._key_rows = None
        self._prefix = np.concatenate([[0.0], np.cumsum(self.lengths.astype(np.longdouble))]
                                      ).astype(np.longdouble)

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def d(self) -> int:
        return self.scheme.d

    @property
    def gap_scale(self) -> float:
        """Slope ``1 - L_N`` of ``position`` on the minimal set."""
        return 1.0 - self.partial

    # --- lookups ----------------------------------------------------------

    def _keys(self, ex: np.ndarray) -> np.ndarray:
        base = 2 * self.radius + 3
        ex = np.asarray(ex, dtype=np.int64)
        key = np.zeros(ex.shape[0], dtype=np.int64)
        for i in range(ex.shape[1]):
            key = key * base + (ex[:, i] + self.radius + 1)
        return key

    def rows_of(self, exponents: np.ndarray) -> np.ndarray:
        """Row index for each exponent vector, -1 when not indexed."""
        ex = np.asarray(exponents, dtype=np.int64)
        if ex.ndim == 1:
            ex = ex[:, None] if self.d == 1 else ex[None, :]
        if self._keys_sorted is None:
            keys = self._keys(self.exponents)
            order = np.argsort(keys)
            self._keys_sorted = keys[order]
            self._key_rows = order
        inside = np.abs(ex).sum(axis=1) <= self.radius
        out = np.full(ex.shape[0], -1, dtype=np.int64)
        if np.any(inside):
            k = self._keys(ex[inside])
            j = np.searchsorted(self._keys_sorted, k)
            j = np.minimum(j, self._keys_sorted.size - 1)
            ok = self._keys_sorted[j] == k
            rows = np.where(ok, self._key_rows[j], -1)
            out[inside] = rows
        return out

    def row_of(self, g) -> int:
        ex = g.exponents if isinstance(g, GroupElement) else tuple(g)
        return int(self.rows_of(np.array([ex]))[0])

    # --- measure and semi-conjugacy --------------------------------------

    def position(self, y):
        """``mu[0, y)`` for ``y`` in ``[0, 1]``; equals ``a_y`` at indexed orbit points."""
        y = np.asarray(y, dtype=float)
        idx = np.searchsorted(self.points, y, side="left")
        out = (1 - np.longdouble(self.partial)) * y.astype(np.longdouble) + self._prefix[idx]
        out = out.astype(float)
        return out if out.ndim else float(out)

    def position_after(self, y):
        """``mu[0, y]`` (includes the interval of ``y`` itself when indexed)."""
        y = np.asarray(y, dtype=float)
        idx = np.searchsorted(self.points, y, side="right")
        out = (1 - np.longdouble(self.partial)) * y.astype(np.longdouble) + self._prefix[idx]
        out = out.astype(float)
        return out if out.ndim else float(out)

    def locate(self, x):
        """Row of the indexed interval containing ``x`` (closed, left endpoint wins), else -1."""
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(self.starts, x, side="right") - 1
        ic = np.maximum(i, 0)
        inside = (i >= 0) & (x <= self.starts[ic] + self.lengths[ic])
        return np.where(inside, i, -1)

    def interval_of(self, x):
        """The indexed element whose interval contains ``x``, or ``None`` for the gap set."""
        row = int(self.locate(np.array([float(x)]))[0])
        if row < 0:
            return None
        return GroupElement(tuple(int(v) for v in self.exponents[row]))

    def H(self, x):
        """Semi-conjugacy to the rotation, lifted: ``H(x + 1) = H(x) + 1``."""
        x = np.asarray(x, dtype=float)
        whole = np.floor(x)
        u = x - whole
        i = np.searchsorted(self.starts, u, side="right") - 1
        ic = np.maximum(i, 0)
        end = self.starts[ic] + self.lengths[ic]
        inside = (i >= 0) & (u <= end)
        scale = self.gap_scale
        gap = np.where(i >= 0, self.points[ic] + (u - end) / scale, u / scale)
        nxt = np.where(ic + 1 < self.size, self.points[np.minimum(ic + 1, self.size - 1)], 1.0)
        nxt = np.where(i >= 0, nxt, self.points[0] if self.size else 1.0)
        lo = np.where(i >= 0, self.points[ic], 0.0)
        gap = np.clip(gap, lo, nxt)
        out = whole + np.where(inside, self.points[ic], gap)
        return out if out.ndim else float(out)

    def endpoint_flags(self, x, tol: float | None = None):
        """True where ``x`` lies within ``tol`` of an interval endpoint (H is ambiguous there)."""
        tol = self.tol if tol is None else tol
        u = np.asarray(x, dtype=float) % 1.0
        i = np.searchsorted(self.starts, u, side="right") - 1
        lo = np.maximum(i, 0)
        hi = np.minimum(i + 1, self.size - 1)
        d1 = np.abs(u - self.starts[lo])
        d2 = np.abs(u - (self.starts[lo] + self.lengths[lo]))
        d3 = np.abs(self.starts[hi] - u)
        return np.minimum(np.minimum(d1, d2), d3) < tol

    # --- persistence --------------------------------------------------------

    def to_dict(self, include_intervals: bool = True) -> dict:
        out = {
            "version": MODEL_VERSION,
            "theta": list(self.action.theta),
            "scheme": self.scheme.to_dict(),
            "k": int(self.scheme.k) if self.scheme.kind != "herman_v" else None,
            "K": self.scheme.K if self.scheme.kind == "herman_v" else None,
            "N": self.radius,
            "L": self.partial,
            "tol": self.tol,
            "mass": self.mass.to_dict(),
            "meta": self.meta,
        }
        if include_intervals:
            out["intervals"] = [
                {"exponents": [int(v) for v in e], "point": float(p), "a": float(a), "len": float(l)}
                for e, p, a, l in zip(self.exponents, self.points, self.starts, self.lengths)
            ]
        return out

    def save(self, path, include_intervals: bool = True) -> None:
        Path(path).write_text(json.dumps(self.to_dict(include_intervals), indent=None,
                                         separators=(",", ":")))

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"e{i + 1}" for i in range(self.d)] + ["norm", "point", "a", "len"])
            for e, n, p, a, l in zip(self.exponents, self.norms, self.points, self.starts, self.lengths):
                w.writerow([int(v) for v in e] + [int(n), repr(float(p)), repr(float(a)), repr(float(l))])

    @classmethod
    def from_dict(cls, data: dict) -> "BlowupModel":
        """Rebuild from parameters and cross-check any stored interval table."""
        try:
            if data.get("version") != MODEL_VERSION:
                raise CorruptModelError(f"unsupported model version {data.get('version')!r}")
            action = RotationAction(tuple(data["theta"]))
            scheme = LengthScheme.from_dict(data["scheme"])
            N = int(data["N"])
            tol = float(data["tol"])
            meta = data.get("meta", {})
        except CorruptModelError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptModelError(f"malformed model document: {exc}") from exc
        model = cls.build(action, scheme, radius=N, tol=tol,
                          tail_tol=meta.get("tail_tol", 1e-10), require_fit=False)
        model.meta.update(meta)
        if abs(model.partial - float(data.get("L", model.partial))) > 1e-12:
            raise CorruptModelError("stored total length does not match the rebuilt model")
        rows = data.get("intervals")
        if rows is not None:
            if len(rows) != model.size:
                raise CorruptModelError(f"model lists {len(rows)} intervals, expected {model.size}")
            try:
                ex = np.array([r["exponents"] for r in rows], dtype=np.int64).reshape(-1, model.d)
                pts = np.array([r["point"] for r in rows], dtype=float)
                a = np.array([r["a"] for r in rows], dtype=float)
                ln = np.array([r["len"] for r in rows], dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptModelError(f"malformed interval table: {exc}") from exc
            if (not np.array_equal(ex, model.exponents)
                    or np.max(np.abs(pts - model.points)) > 1e-15
                    or np.max(np.abs(a - model.starts)) > 1e-13
                    or np.max(np.abs(ln / model.lengths - 1)) > 1e-12):
                raise CorruptModelError("interval table does not match the model parameters")
        return model

    @classmethod
    def load(cls, path) -> "BlowupModel":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CorruptModelError(f"cannot read model {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise CorruptModelError("model document must be a JSON object")
        return cls.from_dict(data)


def build_model(action: RotationAction, scheme: LengthScheme, **kw) -> BlowupModel:
    return BlowupModel.build(action, scheme, **kw)
