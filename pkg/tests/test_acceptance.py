"""Acceptance criteria 1 to 11, each at its stated tolerance and runtime limit.

Every test appends one ``CRITERION n: PASS|FAIL ...`` line, printed at the end
of the session, and then asserts.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from denjoy.blowup import BlowupModel
from denjoy.cli import main
from denjoy.config import Config, build_from_config
from denjoy.diffeo import DiffeoAction, phi, phi_deriv, xi, xi_integral
from denjoy.lengths import LengthScheme, admissible_herman, sup_fundamental_ratio, total_mass
from denjoy.modulus import Modulus, integrate_alpha_inv, integrate_one_over_alpha_d
from denjoy.orbit import RotationAction, smooth_growth_sequence
from denjoy.verify import (alpha_seminorm, c1_distance, check_alpha_lower_bound, check_alpha_norm,
                           check_commutator, check_rotation_number, ratio_spectrum)

from . import conftest
from .conftest import GOLDEN


def record(capsys, n, passed, text):
    line = f"CRITERION {n}: {'PASS' if passed else 'FAIL'} {text}"
    conftest.ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)
    return passed


@pytest.fixture(scope="module")
def timed():
    """Models built here so that construction time counts toward each runtime limit."""
    golden = RotationAction((GOLDEN,))
    t0 = time.perf_counter()
    herman, _ = admissible_herman(Modulus.power(0.5), 10 ** 5)
    hm = BlowupModel.build(golden, herman, radius=10 ** 5)
    t1 = time.perf_counter()
    am = BlowupModel.build(golden, LengthScheme("alpha_inv", Modulus.power(0.5), 1, k=4),
                           radius=10 ** 5)
    t2 = time.perf_counter()
    return {"herman": (hm, DiffeoAction(hm), t1 - t0), "alpha_inv": (am, t2 - t1)}


def test_criterion_01_yoccoz_identities(capsys):
    t0 = time.perf_counter()
    worst_int = 0.0
    for R in (0.1, 0.5, 1.0, 2.0, 10.0):
        q, _ = quad(lambda t: xi(R, t), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=400)
        worst_int = max(worst_int, abs(q - 1.0), abs(xi_integral(R, 1.0) - 1.0),
                        abs(xi_integral(R, 1.0 - 1e-15) - 1.0))
    rng = np.random.default_rng(1)
    worst_eq = 0.0
    for _ in range(20):
        a, b, c = rng.uniform(0.05, 2.0, 3)
        R, S = np.exp(rng.uniform(np.log(0.1), np.log(10.0), 2))
        t = rng.uniform(0.0, a, 1000)
        lhs = phi(b, c, S, phi(a, b, R, t))
        rhs = phi(a, c, R * S, t)
        worst_eq = max(worst_eq, float(np.max(np.abs(lhs - rhs))))
    dt = time.perf_counter() - t0
    ok = worst_int <= 1e-9 and worst_eq <= 1e-12 and dt < 5
    record(capsys, 1, ok, f"max |int xi - 1| = {worst_int:.2e} (tol 1e-9); "
                          f"equivariance max err = {worst_eq:.2e} (tol 1e-12); {dt:.2f}s (< 5s)")
    assert ok


def test_criterion_02_derivative_formula(capsys, timed):
    herman_model, herman_act, build_s = timed["herman"]
    t0 = time.perf_counter() - build_s
    rng = np.random.default_rng(2)
    worst_phi = 0.0
    for _ in range(10):
        a, b = rng.uniform(0.1, 2.0, 2)
        R = float(np.exp(rng.uniform(np.log(0.2), np.log(5.0))))
        t = a * rng.uniform(0.01, 0.99, 100)
        h = 1e-6 * a
        fd = (phi(a, b, R, t + h) - phi(a, b, R, t - h)) / (2 * h)
        an = phi_deriv(a, b, R, t)
        worst_phi = max(worst_phi, float(np.max(np.abs(an - fd) / an)))

    x = rng.random(20000)
    x = x[~herman_model.endpoint_flags(x, 1e-5)][:10000]
    row = herman_model.locate(x)
    ell = np.where(row >= 0, herman_model.lengths[np.maximum(row, 0)], 1.0)
    h = np.minimum(1e-7, 1e-3 * ell)
    fp = herman_act.lift(1, x + h)
    fm = herman_act.lift(1, x - h)
    fd = (fp - fm) / (2 * h)
    an = herman_act.eval_deriv(1, x)
    err_f = np.abs(an - fd) / an
    worst_f = float(np.max(err_f))
    dt = time.perf_counter() - t0
    ok = x.size == 10000 and worst_phi <= 1e-6 and worst_f <= 1e-6 and dt < 30
    record(capsys, 2, ok, f"phi' rel err {worst_phi:.2e} at 1000 pts; f' rel err {worst_f:.2e} "
                          f"at {x.size} pts (tol 1e-6); {dt:.2f}s (< 30s)")
    assert ok


def test_criterion_03_herman_construction(capsys, timed):
    herman_model, herman_act, build_s = timed["herman"]
    t0 = time.perf_counter() - build_s
    scheme = herman_model.scheme
    mass = total_mass(scheme, herman_model.radius)
    sup_used = sup_fundamental_ratio(scheme, 10 ** 5).value
    sup_k2 = sup_fundamental_ratio(LengthScheme("herman_v", scheme.alpha, 1, K=2.0), 10 ** 5).value
    rot = check_rotation_number(herman_act, 1, 10 ** 5)
    dt = time.perf_counter() - t0
    ok = (mass.total_upper <= 1.0 and herman_model.partial <= 1.0 and sup_used <= 128
          and sup_k2 <= 128 and rot.statistic <= 2e-5 and dt < 60)
    record(capsys, 3, ok, f"sum l <= {mass.total_upper:.4f} (K={scheme.K:g}); sup ratio "
                          f"{sup_used:.4f} (K={scheme.K:g}), {sup_k2:.4f} (K=2), bound 128; "
                          f"|rho - theta| = {rot.statistic:.2e} (tol 2e-5); {dt:.2f}s (< 60s)")
    assert ok


@pytest.fixture(scope="module")
def nu_family():
    act = RotationAction((GOLDEN,))
    scheme = LengthScheme("nu", Modulus.power(0.5), 1, k=1, scale=0.2)
    return act, scheme


def test_criterion_04_alpha_norm_uniformity(capsys, nu_family):
    t0 = time.perf_counter()
    act, scheme = nu_family
    model = BlowupModel.build(act, scheme, radius=20000)
    rep = check_alpha_norm(DiffeoAction(model), 1, ks=(1, 2, 4, 8))
    dt = time.perf_counter() - t0
    vals = rep.details["values"]
    ok = rep.passed and rep.statistic <= 2.0 and len(vals) == 4 and dt < 60
    shown = ", ".join(f"k={k}: {v:.3g}" for k, v in vals.items())
    record(capsys, 4, ok, f"[f'_k]_alpha {shown}; sup/k1 = {rep.statistic:.3f} (bound 2); "
                          f"{dt:.2f}s (< 60s)")
    assert ok


def test_criterion_05_c1_convergence(capsys, nu_family):
    t0 = time.perf_counter()
    act, scheme = nu_family
    d = {}
    for k in (1, 16):
        m = BlowupModel.build(act, scheme.with_k(k), radius=20000)
        d[k] = c1_distance(DiffeoAction(m), 1, 10 ** 4)
    dt = time.perf_counter() - t0
    ok = d[16][0] <= 0.5 * d[1][0] and d[16][1] <= 0.5 * d[1][1] and dt < 30
    record(capsys, 5, ok, f"C0 {d[1][0]:.3g} -> {d[16][0]:.3g}, C1 {d[1][1]:.3g} -> "
                          f"{d[16][1]:.3g} (each <= 0.5x); {dt:.2f}s (< 30s)")
    assert ok


def test_criterion_06_z2_action(capsys):
    t0 = time.perf_counter()
    cfg = Config(modulus="dkn:d=2,eps=0.1", d=2, theta=["sqrt2m1", "sqrt3m1"], scheme="nu",
                 k=1000, scale=0.02, tail_tol=1e-10, radius_cap=5000, max_elements=4 * 10 ** 5)
    model = build_from_config(cfg)
    act = DiffeoAction(model)
    com = check_commutator(act, 1000, seed=0)
    rots = [check_rotation_number(act, s, 10 ** 5) for s in (1, 2)]
    dt = time.perf_counter() - t0
    worst_rot = max(r.statistic for r in rots)
    ok = com.statistic <= 1e-8 and worst_rot <= 2e-5 and dt < 120
    record(capsys, 6, ok, f"|stx - tsx| = {com.statistic:.2e} (tol 1e-8); max |rho - theta| = "
                          f"{worst_rot:.2e} (tol 2e-5); N={model.radius}, tail bound "
                          f"{model.mass.tail_bound:.2e} (tail_tol 1e-10 met: "
                          f"{model.meta['tail_tol_met']}); {dt:.2f}s (< 120s)")
    assert ok


def test_criterion_07_integrability_table(capsys):
    t0 = time.perf_counter()
    cases = [
        ("x^0.5 d=1", integrate_one_over_alpha_d(Modulus.power(0.5), 1), True),
        ("x d=1", integrate_one_over_alpha_d(Modulus.power(1.0), 1), False),
        ("x log(1/x)", integrate_one_over_alpha_d(Modulus.herman_log(0.0), 1), False),
        ("x log(1/x)^1.5", integrate_one_over_alpha_d(Modulus.herman_log(0.5), 1), True),
        ("dkn d=2", integrate_one_over_alpha_d(Modulus.dkn(2, 0.1), 2), True),
    ]
    inv = integrate_alpha_inv(Modulus.power(0.5), 1)
    dt = time.perf_counter() - t0
    good = [rep.converged == want and rep.verdict == ("converges" if want else "diverges")
            for _, rep, want in cases]
    inv_ok = inv.converged and abs(inv.value - 1.0) <= 1e-6
    ok = all(good) and inv_ok and dt < 30
    table = "; ".join(f"{name}: {rep.verdict}" for name, rep, _ in cases)
    record(capsys, 7, ok, f"{table}; alpha^-1/t^2 = {inv.value:.9f} (1 +- 1e-6); {dt:.2f}s (< 30s)")
    assert ok


def test_criterion_08_lower_bound(capsys, timed):
    herman_model, _, hb = timed["herman"]
    alpha_inv_model, ab = timed["alpha_inv"]
    t0 = time.perf_counter() - hb - ab
    reps = {name: check_alpha_lower_bound(m, 10 ** 5)
            for name, m in (("herman_v", herman_model), ("alpha_inv", alpha_inv_model))}
    dt = time.perf_counter() - t0
    ok = all(r.passed and r.statistic > 0 and r.details["no_decay_last_decade"]
             for r in reps.values()) and dt < 30
    shown = "; ".join(f"{k}: inf {r.statistic:.4g}, last decade {r.details['min_last_decade']:.4g}"
                      f" vs previous {r.details['min_previous_decade']:.4g}"
                      for k, r in reps.items())
    record(capsys, 8, ok, f"{shown}; {dt:.2f}s (< 30s)")
    assert ok


def test_criterion_09_ratio_spectrum(capsys, timed):
    alpha_inv_model, build_s = timed["alpha_inv"]
    t0 = time.perf_counter() - build_s
    sp = ratio_spectrum(alpha_inv_model, (0.0, 1.0), 100)
    worst = sp.ratio_max(10 ** 4, 10 ** 5)
    dt = time.perf_counter() - t0
    ok = worst <= 1.01 and dt < 60
    record(capsys, 9, ok, f"max lambda_i/lambda_(i+1) over i in [1e4, 1e5] = {worst:.6f} "
                          f"(bound 1.01); {dt:.2f}s (< 60s)")
    assert ok


def test_criterion_10_growth_smoothing(capsys):
    t0 = time.perf_counter()
    n = np.arange(1, 1001, dtype=float)
    results = []
    for name, f in (("exp floor log2(n+1)", np.exp(np.floor(np.log2(n + 1)))), ("n", n)):
        g = smooth_growth_sequence(f)
        sandwich = bool(np.all(f <= g * (1 + 1e-12)) and np.all(g <= f * f * (1 + 1e-12)))
        slope = float(np.max((g[1:] / g[:-1] - 1.0) * n[:-1]))
        results.append((name, sandwich, slope))
    dt = time.perf_counter() - t0
    ok = all(s and m <= 10.0 for _, s, m in results) and dt < 5
    shown = "; ".join(f"f={name}: f<=g<=f^2 {s}, max n(g(n+1)/g(n)-1) = {m:.3f} (<= 10)"
                      for name, s, m in results)
    record(capsys, 10, ok, f"{shown}; {dt:.2f}s (< 5s)")
    assert ok


def test_criterion_11_determinism(capsys, tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(Config(radius=20000, seed=3).to_json())
    docs = []
    for i in range(2):
        model = tmp_path / f"m{i}.json"
        out = tmp_path / f"r{i}.json"
        assert main(["build", "--config", str(cfg), "--out", str(model)]) == 0
        rc = main(["verify", "--model", str(model), "--suite", "all", "--seed", "3",
                   "--out", str(out)])
        doc = json.loads(out.read_text())
        doc.pop("created")
        mdoc = json.loads(model.read_text())
        mdoc["meta"].pop("created")
        docs.append((rc, json.dumps(doc, sort_keys=True), json.dumps(mdoc, sort_keys=True)))
    capsys.readouterr()
    dt = time.perf_counter() - t0
    same = docs[0] == docs[1]
    ok = same and dt < 60
    record(capsys, 11, ok, f"reports identical: {docs[0][1] == docs[1][1]}; models identical: "
                           f"{docs[0][2] == docs[1][2]}; exit codes {docs[0][0]}, {docs[1][0]}; "
                           f"{dt:.2f}s (< 60s)")
    assert ok
