"""Improper integrals over half-lines in logarithmic coordinates.

Integrals of the form ``int_0^c h(x) dx`` with a singularity at ``x = 0`` are
rewritten with ``x = exp(-u)`` as ``int_{u0}^inf exp(log_g(u)) du``.  The
half-line is cut into shells of width ``ln 2`` (dyadic shells in ``x``), each
shell is integrated with Gauss-Legendre rules in log-sum-exp form, and the
shell sequence is classified:

* level 1: shells in ``u``.  Geometric decay gives a closed tail bound,
  non-decaying shells signal divergence, anything else escalates.
* level 2: shells in ``v = log u``, which turns logarithmic decay in ``x``
  into power decay.
* level 3: a power-law fit ``S_j ~ v_j^{-q}`` on the level-2 shells decides
  (``q > 1`` converges) and supplies an integral tail estimate.

Quadrature cannot prove divergence; the thresholds used are returned in
``IntegrabilityReport.details`` so the verdict can be audited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = ["IntegrabilityReport", "integrate_log_tail", "shell_integrals"]

LN2 = math.log(2.0)

_NODES_LO, _WEIGHTS_LO = np.polynomial.legendre.leggauss(20)
_NODES_HI, _WEIGHTS_HI = np.polynomial.legendre.leggauss(40)

# classifier thresholds (reported verbatim)
MIN_SHELLS = 24
WINDOW = 10
FLAT_RATIO = 1.0 - 1e-12
TREND_ABS = 1e-10
TREND_REL = 1e-8
LEVEL1_SHELLS = 64
MAX_GEOMETRIC_SHELLS = 40000
V_MAX = 700.0
POWER_LAW_CUT = 1.02


@dataclass
class IntegrabilityReport:
    value: float
    converged: bool
    tail_estimate: float
    evaluations: int
    infinite: bool = False
    verdict: str = "converges"
    level: int = 1
    shells: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": None if self.infinite else self.value,
            "infinite": self.infinite,
            "converged": self.converged,
            "tail_estimate": None if not math.isfinite(self.tail_estimate) else self.tail_estimate,
            "evaluations": self.evaluations,
            "verdict": self.verdict,
            "level": self.level,
            "shells": self.shells,
            "details": self.details,
        }


def _gl_log(log_h, a, b, nodes, weights):
    """log of the Gauss-Legendre estimate of int_a^b exp(log_h) on each row."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vals = log_h(pts)
    top = np.max(vals, axis=1)
    top = np.where(np.isfinite(top), top, 0.0)
    s = np.sum(weights[None, :] * np.exp(vals - top[:, None]), axis=1)
    with np.errstate(divide="ignore"):
        return top + np.log(s * half), pts.size


def _adaptive_log(log_h, a, b, depth=0, rtol=1e-12, max_depth=30, budget=None):
    """Adaptive Gauss-Legendre (20 vs 40 nodes) on a batch of intervals.

    Refinement stops at ``max_depth`` or once the number of failing pieces
    exceeds ``budget``; a noisy integrand then gets the 40-node value.
    """
    if budget is None:
        budget = 64 + 4 * a.size
    lo, n1 = _gl_log(log_h, a, b, _NODES_LO, _WEIGHTS_LO)
    hi, n2 = _gl_log(log_h, a, b, _NODES_HI, _WEIGHTS_HI)
    evals = n1 + n2
    with np.errstate(invalid="ignore"):
        diff = np.abs(hi - lo)
    bad = ~(diff <= rtol) & np.isfinite(hi)
    nbad = int(np.count_nonzero(bad))
    if depth >= max_depth or nbad == 0 or nbad > budget:
        return hi, evals
    m = 0.5 * (a[bad] + b[bad])
    halves, e1 = _adaptive_log(log_h, np.concatenate([a[bad], m]),
                               np.concatenate([m, b[bad]]), depth + 1, rtol, max_depth, budget)
    hi = hi.copy()
    hi[bad] = np.logaddexp(halves[:nbad], halves[nbad:])
    return hi, evals + e1


def shell_integrals(log_h: Callable, edges: np.ndarray, breakpoints: Sequence[float] = ()):
    """Log-integrals of ``exp(log_h)`` over consecutive shells ``[edges[i], edges[i+1]]``.

    Shells containing a breakpoint (a kink of the integrand) are split there.
    Returns ``(log_S, evaluations)``.
    """
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    owner = np.arange(a.size)
    bps = np.asarray(sorted(breakpoints), dtype=float)
    bps = bps[(bps > edges[0]) & (bps < edges[-1])]
    if bps.size:
        cuts = np.concatenate([edges, bps])
        cuts = np.unique(cuts)
        pa, pb = cuts[:-1], cuts[1:]
        own = np.searchsorted(edges, pa, side="right") - 1
        own = np.clip(own, 0, a.size - 1)
        a, b, owner = pa, pb, own
    vals, evals = _adaptive_log(log_h, a, b)
    out = np.full(edges.size - 1, -np.inf)
    np.logaddexp.at(out, owner, vals)
    return out, evals


def _trend(log_s: np.ndarray) -> tuple[float, bool, bool]:
    """Window statistics: (max ratio, flat-or-growing, geometric) of the last shells."""
    r = np.exp(np.diff(log_s[-(WINDOW + 1):]))
    rmax = float(np.max(r))
    flat = bool(np.all(r >= FLAT_RATIO))
    geometric = bool(rmax < FLAT_RATIO and r[-1] <= r[0] + TREND_ABS + TREND_REL * r[0])
    return rmax, flat, geometric


def _sum_exp(log_s: np.ndarray) -> float:
    if log_s.size == 0:
        return 0.0
    top = float(np.max(log_s))
    if not math.isfinite(top):
        return 0.0
    return math.exp(top) * float(np.sum(np.exp(log_s - top)))


def integrate_log_tail(
    log_g: Callable[[np.ndarray], np.ndarray],
    u0: float,
    tol: float = 1e-8,
    breakpoints: Sequence[float] = (),
) -> IntegrabilityReport:
    """Integrate ``exp(log_g(u))`` over ``[u0, inf)`` and classify convergence.

    ``log_g`` must accept numpy arrays.  ``breakpoints`` lists points in ``u``
    where the integrand has a kink.
    """
    details = {
        "shell_width": LN2,
        "min_shells": MIN_SHELLS,
        "window": WINDOW,
        "divergence_ratio": FLAT_RATIO,
        "trend_abs": TREND_ABS,
        "trend_rel": TREND_REL,
        "level1_shells": LEVEL1_SHELLS,
        "v_max": V_MAX,
        "power_law_cut": POWER_LAW_CUT,
        "tol": tol,
    }
    evaluations = 0

    def diverged(level, nshell, why):
        details["reason"] = why
        return IntegrabilityReport(math.inf, False, math.inf, evaluations, True,
                                   "diverges", level, nshell, details)

    # level 1: shells in u
    log_s = np.empty(0)
    batch = LEVEL1_SHELLS
    while True:
        start = u0 + log_s.size * LN2
        edges = start + LN2 * np.arange(batch + 1)
        new, ev = shell_integrals(log_g, edges, breakpoints)
        evaluations += ev
        log_s = np.concatenate([log_s, new])
        n = log_s.size
        rmax, flat, geometric = _trend(log_s)
        if flat:
            return diverged(1, n, "level-1 shells not decaying")
        if geometric:
            tail = math.exp(log_s[-1]) * rmax / (1.0 - rmax)
            if tail <= tol or n >= MAX_GEOMETRIC_SHELLS:
                total = _sum_exp(log_s)
                details["ratio"] = rmax
                return IntegrabilityReport(total + tail, tail <= tol, tail, evaluations,
                                           False, "converges", 1, n, details)
            # jump ahead in bigger batches while decay is slow
            batch = min(4 * batch, MAX_GEOMETRIC_SHELLS - n)
            continue
        if n >= LEVEL1_SHELLS:
            break

    head = _sum_exp(log_s)
    u1 = u0 + log_s.size * LN2
    n1 = log_s.size

    # level 2: v = log u, du = e^v dv
    def log_g2(v):
        return log_g(np.exp(v)) + v

    v1 = math.log(u1)
    nv = int(math.ceil((V_MAX - v1) / LN2))
    edges = v1 + LN2 * np.arange(nv + 1)
    bps2 = [math.log(p) for p in breakpoints if p > u1]
    log_t, ev = shell_integrals(log_g2, edges, bps2)
    evaluations += ev
    finite = np.isfinite(log_t)
    if not np.all(finite):
        log_t = log_t[: np.argmin(finite)] if not finite[0] else log_t[:0]
    for m in range(MIN_SHELLS, log_t.size + 1):
        rmax, flat, geometric = _trend(log_t[:m])
        if flat:
            return diverged(2, n1 + m, "level-2 shells not decaying")
        if geometric:
            tail = math.exp(log_t[m - 1]) * rmax / (1.0 - rmax)
            if tail <= tol:
                details["ratio"] = rmax
                total = head + _sum_exp(log_t[:m])
                return IntegrabilityReport(total + tail, True, tail, evaluations,
                                           False, "converges", 2, n1 + m, details)

    # level 3: power-law fit S_j ~ v_j^{-q} on the last third of level-2 shells
    m = log_t.size
    lo = (2 * m) // 3
    centers = edges[:-1][:m] + 0.5 * LN2
    slope, _ = np.polyfit(np.log(centers[lo:]), log_t[lo:], 1)
    q = -float(slope)
    details["power_law_exponent"] = q
    if q <= POWER_LAW_CUT:
        return diverged(3, n1 + m, "power-law exponent <= cut")
    v_end = edges[m]
    tail = math.exp(log_t[m - 1]) * v_end / ((q - 1.0) * LN2)
    total = head + _sum_exp(log_t)
    ok = tail <= tol
    if not ok:
        details["reason"] = "power-law tail estimate above tol; decay too slow to decide"
    return IntegrabilityReport(total + tail, ok, tail, evaluations, False,
                               "converges" if ok else "inconclusive", 3, n1 + m, details)
