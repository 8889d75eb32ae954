"""Acceptance suite: one test (and one printed pass/fail line) per criterion.

Run with ``pytest -v -s tests/test_acceptance.py`` to see the per-criterion
lines alongside pytest's own verdicts.
"""

import time

import numpy as np
import pytest

from detcouple import cli
from detcouple import model_space as ms
from detcouple import profiles as pf
from detcouple import verify as vf
from detcouple.coupling import sphere_matrices_from_gamma
from detcouple.sde import simulate_ensemble

S2 = ms.sphere(2)
H2 = ms.hyperbolic(2)
H3 = ms.hyperbolic(3)
E2 = ms.euclidean(2)

SEED = 20240917


def report(num: int, ok: bool, desc: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] acceptance criterion {num}: {desc}")
    assert ok, f"criterion {num}: {desc}"


@pytest.fixture(scope="module")
def scan_reports():
    t0 = time.perf_counter()
    reports = vf.identity_scan_all(100_000, seed=SEED)
    return reports, time.perf_counter() - t0


@pytest.fixture(scope="module")
def sphere_marginal_ensembles():
    """Fixed-distance sphere ensembles at dt and 2 dt for the bias estimate."""
    x0, y0 = ms.canonical_start(S2, np.pi / 2)
    prof = pf.constant(np.pi / 2)
    runs = {}
    for dt in (1e-3, 2e-3):
        runs[dt] = simulate_ensemble(S2, prof, x0, y0, dt, 1.0, SEED + 1, 2000)
    return (x0, y0), runs


def test_criterion_01_algebraic_identity_suite(scan_reports):
    reports, elapsed = scan_reports
    worst = max(r.statistic for r in reports)
    ok = worst <= 1e-10 and elapsed < 30.0
    report(1, ok, f"identity residuals over 3x100k states: max {worst:.2e} "
                  f"(tol 1e-10), runtime {elapsed:.1f}s < 30s")


def test_criterion_02_drift_match_oracle(scan_reports):
    reports, _ = scan_reports
    worst_drift = max(r.details["drift"] for r in reports)
    # substituting the transverse eigenvalue 1 - (eta' + (n-1) eta)/(n-1)
    # in place of eta + eta'/(n-1) must break the drift match
    rng = np.random.default_rng(SEED + 2)
    mismatch = []
    for _ in range(200):
        X = ms.random_points(S2, 1, rng)[0]
        t = rng.standard_normal(3)
        t -= (t @ X) * X
        t /= np.linalg.norm(t)
        ang = rng.uniform(0.3, np.pi - 0.3)
        Y = np.cos(ang) * X + np.sin(ang) * t
        eta = float(X @ Y)
        etap = rng.uniform(-(eta + 1.0), 1.0 - eta)
        gamma_sub = np.clip(1.0 - (etap + eta), -1.0, 1.0)
        J, _ = sphere_matrices_from_gamma(X, Y, gamma_sub)
        U = np.eye(3) - np.outer(X, X)
        V = np.eye(3) - np.outer(Y, Y)
        mismatch.append(abs(-2.0 * eta + np.trace(U @ J.T @ V) - etap))
    substituted_fails = max(mismatch) > 1e-3
    ok = worst_drift <= 1e-8 and substituted_fails
    report(2, ok, f"drift matches requested rate to {worst_drift:.2e} (tol 1e-8); "
                  f"substituted one-minus eigenvalue mismatches by {max(mismatch):.2e}")


def test_criterion_03_fixed_distance_tracking():
    x0, y0 = ms.canonical_start(S2, np.pi / 2)
    prof = pf.constant(np.pi / 2)
    t0 = time.perf_counter()
    raw = simulate_ensemble(S2, prof, x0, y0, 1e-4, 1.0, SEED + 3, 100)
    enforced = simulate_ensemble(S2, prof, x0, y0, 1e-4, 1.0, SEED + 3, 100,
                                 enforce_distance=True)
    elapsed = time.perf_counter() - t0
    ok = raw.mean_sup_err <= 0.05 and enforced.max_sup_err <= 1e-12 and elapsed < 60.0
    report(3, ok, f"sphere fixed-distance sup error {raw.mean_sup_err:.4f} <= 0.05; "
                  f"enforced {enforced.max_sup_err:.2e} <= 1e-12; "
                  f"runtime {elapsed:.1f}s < 60s")


def test_criterion_04_extreme_profile_tracking():
    x0, y0 = ms.canonical_start(S2, np.pi / 2)
    prof = pf.sphere_contracting(S2, np.pi / 2)
    res_a = simulate_ensemble(S2, prof, x0, y0, 1e-4, 1.0, SEED + 4, 100)
    target_a = 2.0 * np.arcsin(np.exp(-res_a.times / 2.0) * np.sin(np.pi / 4))
    assert np.max(np.abs(res_a.target - target_a)) <= 1e-12

    xh, yh = ms.canonical_start(H3, 1.0)
    profh = pf.hyperbolic_lower(H3, 1.0)
    res_b = simulate_ensemble(H3, profh, xh, yh, 1e-4, 1.0, SEED + 5, 100)
    target_b = 2.0 * np.arcsinh(np.exp(res_b.times) * np.sinh(0.5))
    assert np.max(np.abs(res_b.target - target_b)) <= 1e-12

    # ensemble-mean distance tracks the closed form pointwise and stays
    # inside the reachable envelope up to the tracking tolerance
    assert np.max(np.abs(res_a.mean_d_emp - target_a)) <= 0.05
    env_lo, env_hi = pf.envelope(H3, 1.0, res_b.times)
    assert np.all(res_b.mean_d_emp >= env_lo - 0.08)
    assert np.all(res_b.mean_d_emp <= env_hi + 0.08)

    ok = res_a.mean_sup_err <= 0.05 and res_b.mean_sup_err <= 0.08
    report(4, ok, f"contracting sphere sup error {res_a.mean_sup_err:.4f} <= 0.05; "
                  f"hyperbolic lower-extreme sup error {res_b.mean_sup_err:.4f} <= 0.08")


def test_criterion_05_hyperbolic_linear_growth():
    lo, hi = pf.envelope(H3, 1.0, 30.0)
    ok = 1.9 <= lo / 30.0 <= 2.1 and 1.9 <= hi / 30.0 <= 2.1
    report(5, ok, f"envelope endpoints over t: {lo/30:.4f}, {hi/30:.4f} in [1.9, 2.1]")


def test_criterion_06_admissibility_rejections():
    rejects = []
    rejects.append(not pf.check_admissibility(H2, pf.constant(1.0), T=1.0).admissible)
    ts = np.linspace(0.0, 1.0, 101)
    rejects.append(not pf.check_admissibility(E2, pf.tabulated(ts, 2.0 - 0.5 * ts),
                                              grid=ts).admissible)
    ramp = pf.tabulated(ts, 1.0 + 0.2 * ts)
    for spec in (ms.euclidean(1), ms.sphere(1), ms.hyperbolic(1)):
        rejects.append(not pf.check_admissibility(spec, ramp, grid=ts).admissible)
    ok = all(rejects)
    report(6, ok, "rejected: constant on H2, decreasing on R2, non-constant in dim 1 "
                  "(all three spaces)")


def test_criterion_07_marginal_sanity(sphere_marginal_ensembles):
    t0 = time.perf_counter()
    (x0, y0), runs = sphere_marginal_ensembles
    res, coarse = runs[1e-3], runs[2e-3]

    def mean_norm(states):
        return float(np.linalg.norm(states.mean(axis=0)))

    # discretization-bias coefficient from the same statistic at dt and 2 dt
    bias = 2.0 * max(abs(mean_norm(res.final_X) - mean_norm(coarse.final_X)),
                     abs(mean_norm(res.final_Y) - mean_norm(coarse.final_Y)))
    checks = list(vf.mean_decay_check(res, S2, x0, y0, bias_allowance=bias))

    xh, yh = ms.canonical_start(H3, 1.0)
    profh = pf.hyperbolic_lower(H3, 1.0)
    hres = simulate_ensemble(H3, profh, xh, yh, 1e-3, 1.0, SEED + 6, 2000)
    hcoarse = simulate_ensemble(H3, profh, xh, yh, 2e-3, 1.0, SEED + 6, 2000)
    bias_h = 2.0 * abs(hres.final_X[:, 0].mean() - hcoarse.final_X[:, 0].mean())
    checks.extend(vf.mean_decay_check(hres, H3, xh, yh, bias_allowance=bias_h))
    elapsed = time.perf_counter() - t0

    ok = all(c.passed for c in checks) and elapsed < 180.0
    detail = "; ".join(f"{c.name}: {c.statistic:.3f} <= {c.tolerance:.3f}" for c in checks)
    report(7, ok, f"{detail}; runtime {elapsed:.0f}s < 180s")


def test_criterion_08_oracle_equivalence(sphere_marginal_ensembles):
    (x0, y0), runs = sphere_marginal_ensembles
    res = runs[1e-3]
    _, sup, rotX, _ = vf.rotation_ensemble(np.pi / 2, 1e-3, 1.0, SEED + 7, 2000)

    def norm_and_se(states):
        mean = states.mean(axis=0)
        nrm = np.linalg.norm(mean)
        u = mean / nrm
        cov = np.cov(states.T)
        return nrm, float(np.sqrt(u @ cov @ u / states.shape[0]))

    m_sde, se_sde = norm_and_se(res.final_X)
    m_rot, se_rot = norm_and_se(rotX)
    agree = abs(m_sde - m_rot) <= 3.0 * np.hypot(se_sde, se_rot)
    ok = sup.max() <= 1e-12 and agree
    report(8, ok, f"rotation coupling distance constant to {sup.max():.2e} <= 1e-12; "
                  f"mean-decay stats {m_sde:.4f} vs {m_rot:.4f} agree within mutual 3 SE")


def test_criterion_09_convergence():
    x0, y0 = ms.canonical_start(S2, np.pi / 2)
    rep = vf.convergence_study(S2, pf.constant(np.pi / 2),
                               [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], 100, SEED + 8,
                               x0, y0, T=1.0)
    ok = rep.passed
    report(9, ok, f"tracking errors {['%.4f' % e for e in rep.details['mean_sup_err']]} "
                  f"strictly decreasing: {rep.details['strictly_decreasing']}; "
                  f"log-log slope {rep.details['slope']:.3f} in [0.4, 1.1]")


def test_criterion_10_determinism(tmp_path, capsys, monkeypatch):
    argv = ["simulate", "--space", "sphere", "--dim", "2", "--profile", "constant",
            "--rho0", "1.5707963267948966", "--dt", "1e-3", "--T", "0.2",
            "--paths", "300", "--seed", "5"]
    outputs = []
    for threads, sub in (("1", "w1"), ("4", "w4"), ("1", "w1b")):
        monkeypatch.setenv("DETCOUPLE_THREADS", threads)
        out = tmp_path / sub
        assert cli.main(argv + ["--out", str(out)]) == 0
        outputs.append(((out / "paths.csv").read_bytes(),
                        (out / "summary.json").read_bytes()))
    ok = outputs[0] == outputs[1] == outputs[2]
    report(10, ok, "repeated runs and different DETCOUPLE_THREADS produce "
                   "byte-identical paths.csv and summary.json")
