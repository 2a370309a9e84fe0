"""Numerical checks of the regularity, dynamics and integrability claims.

Every check returns a :class:`CheckReport`.  Sup-type statements ("is
finite") cannot be decided numerically; they are checked against an explicit
bound where one is known and otherwise by stability under enlarging the
sample (the threshold used is part of the report).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .blowup import BlowupModel
from .diffeo import DiffeoAction
from .lengths import InadmissibleSchemeError, default_shift, sup_fundamental_ratio
from .modulus import Modulus, integrate_alpha_inv

__all__ = [
    "CheckReport",
    "SpectrumReport",
    "check_fundamental_estimate",
    "check_rotation_number",
    "check_alpha_lower_bound",
    "check_integral_inverse",
    "ratio_spectrum",
    "check_spectrum",
    "check_wandering",
    "check_commutator",
    "check_alpha_norm",
    "alpha_seminorm",
    "c1_distance",
    "run_suite",
    "SUITES",
    "thread_count",
]

SUITES = ("fundamental", "rotation", "alpha_lower", "integral_inverse", "spectrum",
          "wandering", "alpha_norm", "commutator")


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass
class CheckReport:
    name: str
    passed: bool
    statistic: float
    threshold: float
    samples: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean({"name": self.name, "passed": bool(self.passed),
                       "statistic": self.statistic, "threshold": self.threshold,
                       "samples": int(self.samples), "details": self.details})


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("DENJOY_THREADS", "1")))
    except ValueError:
        return 1


def _chunked(fn, x: np.ndarray, threads: int | None = None) -> np.ndarray:
    """Apply a vectorised ``fn`` over chunks of ``x``; results keep input order."""
    threads = thread_count() if threads is None else threads
    if threads <= 1 or x.size < 2048:
        return fn(x)
    parts = np.array_split(x, threads)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        out = list(ex.map(fn, parts))
    return np.concatenate(out)


def _circ(d: np.ndarray) -> np.ndarray:
    d = np.abs(d) % 1.0
    return np.minimum(d, 1.0 - d)


# --- fundamental estimate ----------------------------------------------------

def check_fundamental_estimate(act: DiffeoAction | BlowupModel, radius: int | None = None) -> CheckReport:
    model = act.model if isinstance(act, DiffeoAction) else act
    scheme = model.scheme
    radius = model.radius if radius is None else radius
    full = sup_fundamental_ratio(scheme, radius)
    tenth = sup_fundamental_ratio(scheme, max(1, radius // 10))
    half = sup_fundamental_ratio(scheme, max(1, radius // 2))
    change = abs(full.value - half.value) / max(full.value, 1e-300)
    details = {"argmax": list(full.argmax), "generator": list(full.generator),
               "sup_radius_over_10": tenth.value, "sup_radius_over_2": half.value,
               "relative_change_r2_to_r": change, "stable": change < 0.01}
    if scheme.kind == "herman_v":
        K0 = default_shift(scheme.alpha)
        threshold = 64.0 * K0
        details.update({"bound": "64K", "K_default": K0, "K_used": scheme.K})
    else:
        threshold = 2.0 * tenth.value
        details["bound"] = "2 x sup at radius/10"
    return CheckReport("fundamental", full.value <= threshold, full.value, threshold,
                       radius + 1, details)


# --- rotation number -----------------------------------------------------------

def check_rotation_number(act: DiffeoAction, s=1, n: int = 10 ** 5, x0: float = 0.0,
                          x1: float | None = None) -> CheckReport:
    if n < 1000:
        raise ValueError("rotation check needs n >= 1000")
    g = act.generator(s)
    theta = g.shift
    F = act.lift_iterate(s, x0, n)
    est = (F - x0) / n
    stat = abs(est - theta)
    threshold = 1.0 / n + 10.0 * act.model.tol
    details = {"generator": list(g.s), "theta": theta, "estimate": est, "x0": x0}
    passed = stat <= threshold
    if x1 is not None:
        est1 = (act.lift_iterate(s, x1, n) - x1) / n
        details["x1"] = x1
        details["estimate_x1"] = est1
        details["base_point_spread"] = abs(est1 - est)
        passed = passed and abs(est1 - est) <= 2.0 / n
    return CheckReport("rotation", passed, stat, threshold, n, details)


# --- lower bound i alpha(l_i) ------------------------------------------------------

def _i_alpha(scheme, i):
    return i * np.exp(scheme.log_alpha_of_length(scheme.log_length_norm(i)))


def check_alpha_lower_bound(model: BlowupModel, i_max: int = 10 ** 5) -> CheckReport:
    scheme = model.scheme
    if scheme.d != 1:
        raise ValueError("the lower-bound check is for d = 1")
    i = np.arange(1, 2 * i_max + 1, dtype=float)
    vals = _i_alpha(scheme, i)
    stat = float(np.min(vals[:i_max]))
    stat2 = float(np.min(vals))
    lo = max(1, i_max // 10)
    last = float(np.min(vals[lo - 1:i_max]))
    prev = float(np.min(vals[max(0, lo // 10 - 1):lo]))
    trend_ok = last >= 0.99 * prev
    doubling_ok = stat2 >= 0.99 * stat
    details = {"argmin": int(np.argmin(vals[:i_max])) + 1, "min_last_decade": last,
               "min_previous_decade": prev, "inf_at_2_i_max": stat2,
               "no_decay_last_decade": trend_ok, "stable_under_doubling": doubling_ok,
               "value_at_i_max": float(vals[i_max - 1])}
    passed = stat > 0 and trend_ok and doubling_ok
    return CheckReport("alpha_lower", passed, stat, 0.0, i_max, details)


# --- integrability -------------------------------------------------------------------

def check_integral_inverse(alpha: Modulus, d: int, tol: float = 1e-8) -> CheckReport:
    rep = integrate_alpha_inv(alpha, d, tol)
    details = rep.to_dict()
    details["modulus"] = alpha.to_literal()
    details["d"] = d
    return CheckReport("integral_inverse", rep.converged, rep.tail_estimate, tol,
                       rep.evaluations, details)


# --- ratio spectrum ------------------------------------------------------------------

@dataclass
class SpectrumReport:
    lengths: np.ndarray        # sorted descending
    ratios: np.ndarray         # lambda_i / lambda_{i+1}, i = 1..top_m
    tail_window: tuple[int, int]
    tail_max: float
    count: int

    def ratio_max(self, lo: int, hi: int) -> float:
        """``max lambda_i / lambda_{i+1}`` over 1-based ``i`` in ``[lo, hi]``."""
        lam = self.lengths
        hi = min(hi, lam.size - 1)
        if hi < lo:
            raise ValueError("window has too few intervals")
        return float(np.max(lam[lo - 1:hi] / lam[lo:hi + 1]))

    def to_dict(self) -> dict:
        return _clean({"count": self.count, "ratios": self.ratios.tolist(),
                       "tail_window": list(self.tail_window), "tail_max": self.tail_max})


def ratio_spectrum(model: BlowupModel, window: tuple[float, float] = (0.0, 1.0),
                   top_m: int = 100) -> SpectrumReport:
    """Indexed interval lengths inside an arc, sorted, with consecutive ratios.

    ``window = (a, b)`` in circle coordinates; ``a > b`` wraps through 0 and
    ``(0, 1)`` is the full circle.
    """
    a, b = float(window[0]), float(window[1])
    st, ln = model.starts, model.lengths
    end = st + ln
    if b - a >= 1.0 or (a == 0.0 and b == 1.0):
        mask = np.ones(st.size, dtype=bool)
    elif a <= b:
        mask = (st >= a) & (end <= b)
    else:
        mask = (st >= a) | (end <= b)
    lam = np.sort(ln[mask])[::-1]
    if lam.size < 2:
        raise ValueError("fewer than 2 intervals in the window")
    ratios = lam[:-1] / lam[1:]
    n = lam.size - 1
    top = 10 ** max(1, int(math.floor(math.log10(n))))
    lo = max(1, top // 10)
    hi = min(top, n)
    tail = float(np.max(ratios[lo - 1:hi]))
    return SpectrumReport(lam, ratios[:top_m], (lo, hi), tail, int(lam.size))


def check_spectrum(model: BlowupModel, window=(0.0, 1.0), top_m: int = 100,
                   threshold: float = 1.01) -> CheckReport:
    sp = ratio_spectrum(model, window, top_m)
    details = {"window": list(window), "tail_window": list(sp.tail_window),
               "count": sp.count, "top_ratios": sp.ratios[:10].tolist(),
               "note": "evidence table only; no claim about the open strong form"}
    return CheckReport("spectrum", sp.tail_max <= threshold, sp.tail_max, threshold,
                       sp.count, details)


# --- wandering interval ----------------------------------------------------------------

def _overlap(a0, b0, a1, b1):
    """Length of the intersection of two arcs given by lifted endpoints."""
    best = 0.0
    for shift in (-1.0, 0.0, 1.0):
        lo = max(a0, a1 + shift)
        hi = min(b0, b1 + shift)
        best = max(best, hi - lo)
    return max(best, 0.0)


def check_wandering(act: DiffeoAction, s=1, n_max: int = 100) -> CheckReport:
    model = act.model
    g = act.generator(s)
    r0 = model.row_of((0,) * model.d)
    a0, l0 = float(model.starts[r0]), float(model.lengths[r0])
    left, right = a0, a0 + l0
    tol = model.tol
    max_mis = 0.0
    max_ratio = 0.0
    max_overlap = 0.0
    table_overlap = 0.0
    ok = True
    checked = 0
    sv = np.array(g.s, dtype=np.int64)
    for n in range(1, n_max + 1):
        left = float(act.eval(g.s, left))
        right_img = float(act.eval(g.s, right % 1.0 if right >= 1.0 else right))
        right = right_img if right_img > left else right_img + 1.0
        row = model.row_of(tuple(int(v) for v in n * sv))
        if row >= 0:
            ta = float(model.starts[row])
            tb = ta + float(model.lengths[row])
            mis = max(float(_circ(np.array(left - ta))), float(_circ(np.array(right - tb))))
            max_mis = max(max_mis, mis)
            max_ratio = max(max_ratio, mis / n)
            if mis > n * tol:
                ok = False
            table_overlap = max(table_overlap, _overlap(a0, a0 + l0, ta, tb))
            checked += 1
        max_overlap = max(max_overlap, _overlap(a0, a0 + l0, left, right))
    passed = ok and max_overlap == 0.0 and table_overlap == 0.0
    details = {"generator": list(g.s), "max_mismatch": max_mis, "max_mismatch_over_n": max_ratio,
               "max_overlap": max_overlap, "table_overlap": table_overlap,
               "iterates_in_table": checked, "tol": tol}
    return CheckReport("wandering", passed, max_mis, n_max * tol, n_max, details)


# --- commutation (d >= 2) ------------------------------------------------------------------

def check_commutator(act: DiffeoAction, n_samples: int = 1000, seed: int = 0,
                     threshold: float = 1e-8) -> CheckReport:
    d = act.d
    if d < 2:
        return CheckReport("commutator", True, 0.0, threshold, 0,
                           {"note": "single generator; nothing to commute"})
    rng = np.random.default_rng(seed)
    x = rng.random(n_samples)
    worst, pair = 0.0, None
    for i in range(d):
        for j in range(i + 1, d):
            si = tuple(1 if q == i else 0 for q in range(d))
            sj = tuple(1 if q == j else 0 for q in range(d))
            st = _chunked(lambda z: act.eval(si, act.eval(sj, z)), x)
            ts = _chunked(lambda z: act.eval(sj, act.eval(si, z)), x)
            dev = float(np.max(_circ(st - ts)))
            if dev >= worst:
                worst, pair = dev, (i + 1, j + 1)
    details = {"worst_pair": list(pair), "seed": seed}
    return CheckReport("commutator", worst <= threshold, worst, threshold, n_samples, details)


# --- C^1 distance and alpha-norm --------------------------------------------------------

def c1_distance(act: DiffeoAction, s=1, n_grid: int = 10 ** 4) -> tuple[float, float]:
    """``(sup |f_s - R_theta|, sup |f_s' - 1|)`` on a uniform grid (circle distance)."""
    g = act.generator(s)
    x = (np.arange(n_grid) + 0.5) / n_grid
    f = _chunked(lambda z: act.eval(s, z), x)
    fd = _chunked(lambda z: act.eval_deriv(s, z), x)
    return float(np.max(_circ(f - x - g.shift))), float(np.max(np.abs(fd - 1.0)))


def alpha_seminorm(act: DiffeoAction, s=1, alpha: Modulus | None = None, top: int = 100,
                   levels: int = 40, bases: int = 16, cross: int = 10 ** 4, seed: int = 0) -> dict:
    """Stratified sample of ``sup |f'(x) - f'(y)| / alpha(|x - y|)``.

    Pairs at separations ``l 2^{-j}`` around each of the ``top`` largest
    intervals (base points spread over ``[a - l/2, a + 3l/2]``), plus
    ``cross`` uniformly random pairs.
    """
    model = act.model
    alpha = model.scheme.alpha if alpha is None else alpha
    order = np.argsort(model.lengths, kind="stable")[::-1][:top]
    xs, hs = [], []
    q = (np.arange(bases) + 0.5) / bases
    for r in order:
        a, l = model.starts[r], model.lengths[r]
        for j in range(1, levels + 1):
            h = l * 2.0 ** (-j)
            base = a - 0.5 * l + 2.0 * l * q
            xs.append(base)
            hs.append(np.full(bases, h))
    x = np.concatenate(xs) % 1.0
    h = np.concatenate(hs)
    y = (x + h) % 1.0
    rng = np.random.default_rng(seed)
    cx = rng.random(cross)
    cy = rng.random(cross)
    ch = _circ(cx - cy)
    keep = ch > 0
    x = np.concatenate([x, cx[keep]])
    y = np.concatenate([y, cy[keep]])
    h = np.concatenate([h, ch[keep]])
    fx = act.eval_deriv(s, x)
    fy = act.eval_deriv(s, y)
    ratio = np.abs(fx - fy) / alpha.eval(np.minimum(h, alpha.domain_cap))
    n_str = x.size - int(np.count_nonzero(keep))
    i = int(np.argmax(ratio))
    return {"value": float(ratio[i]), "stratified": float(np.max(ratio[:n_str])),
            "cross": float(np.max(ratio[n_str:])) if ratio.size > n_str else 0.0,
            "argmax_x": float(x[i]), "argmax_h": float(h[i]), "samples": int(ratio.size)}


def check_alpha_norm(act: DiffeoAction, s=1, ks=(1, 2, 4, 8), seed: int = 0,
                     build_kw: dict | None = None) -> CheckReport:
    """Uniformity of ``[f_k']_alpha`` over blow-up indices ``k``.

    For schemes with an index ``k`` the model is rebuilt for each ``k`` at the
    same radius and the statistic is ``max_k value / value(k_min)`` with
    threshold 2.  The Herman scheme has no index; its seminorm is reported
    with an infinite threshold (finite value required).
    """
    model = act.model
    scheme = model.scheme
    if scheme.kind == "herman_v":
        est = alpha_seminorm(act, s, seed=seed)
        return CheckReport("alpha_norm", math.isfinite(est["value"]), est["value"], math.inf,
                           est["samples"], {"estimate": est})
    build_kw = dict(build_kw or {})
    values, skipped = {}, []
    for k in ks:
        try:
            m = BlowupModel.build(model.action, replace(scheme, k=k), radius=model.radius,
                                  tol=model.tol, **build_kw)
        except (InadmissibleSchemeError, ValueError) as exc:
            skipped.append({"k": k, "reason": str(exc)})
            continue
        values[k] = alpha_seminorm(DiffeoAction(m), s, seed=seed)["value"]
    if not values:
        return CheckReport("alpha_norm", False, math.inf, 2.0, 0,
                           {"skipped": skipped, "note": "no admissible k"})
    k0 = min(values)
    stat = max(values.values()) / values[k0]
    details = {"values": {str(k): v for k, v in values.items()}, "k_ref": k0, "skipped": skipped}
    return CheckReport("alpha_norm", stat <= 2.0, stat, 2.0, len(values), details)


# --- suites ----------------------------------------------------------------------------

def run_suite(act: DiffeoAction, names, params: dict | None = None) -> list[CheckReport]:
    """Run named checks in a fixed order; unknown names raise ``KeyError``."""
    params = dict(params or {})
    names = list(names)
    if not names:
        raise KeyError("empty suite")
    if "all" in names:
        names = list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown check(s): {', '.join(unknown)}")
    model = act.model
    n_rot = int(params.get("n", 10 ** 5))
    seed = int(params.get("seed", 0))
    out = []
    for name in SUITES:
        if name not in names:
            continue
        if name == "fundamental":
            out.append(check_fundamental_estimate(act))
        elif name == "rotation":
            for i in range(1, act.d + 1):
                out.append(check_rotation_number(act, i, n_rot, x0=0.0, x1=0.5))
        elif name == "alpha_lower":
            if act.d == 1:
                out.append(check_alpha_lower_bound(model, int(params.get("i_max", 10 ** 5))))
            else:
                out.append(CheckReport("alpha_lower", True, 0.0, 0.0, 0,
                                       {"note": "stated for d = 1; skipped"}))
        elif name == "integral_inverse":
            out.append(check_integral_inverse(model.scheme.alpha, act.d))
        elif name == "spectrum":
            window = tuple(params.get("window", (0.0, 1.0)))
            out.append(check_spectrum(model, window, int(params.get("m", 100))))
        elif name == "wandering":
            for i in range(1, act.d + 1):
                out.append(check_wandering(act, i, int(params.get("n_max", 100))))
        elif name == "alpha_norm":
            out.append(check_alpha_norm(act, 1, seed=seed))
        elif name == "commutator":
            out.append(check_commutator(act, int(params.get("samples", 1000)), seed))
    return out
