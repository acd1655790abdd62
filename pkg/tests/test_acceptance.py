"""End-to-end acceptance runs at their full stated sizes.

Each test appends one PASS/FAIL line to the summary printed at the end of
the session, then asserts, so a failing criterion shows up as a failing test.
Deselect with ``-m "not slow"`` for a quick run.
"""
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from phaselab import battery, data_model, fourier, sgd, shallow, special, theory
from phaselab.data_model import PlantSpec

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow

H4 = special.hermite4()
LC = special.logcosh()


def _report(tag, ok, detail):
    line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_ac1_isotropic_hardness():
    N = 64
    t0 = time.time()
    cfg = sgd.SgdConfig(delta_scale=1e-3, steps=8 * N ** 3, record_steps=(N ** 2, N ** 3, 8 * N ** 3))
    traces = sgd.run_seeds(fourier.isotropic_spectrum(N), PlantSpec(1.2, 6), H4, cfg, range(40))
    summary = sgd.recovery_summary(traces)
    med = dict(zip(summary.steps.tolist(), summary.median("phase_norm")))
    early, late = med[N ** 2], med[8 * N ** 3]
    ok = early < 0.2 and late > 0.5
    _report("AC-1", ok, f"median phase norm {early:.3f} at N^2 (< 0.2), {med[N ** 3]:.3f} at N^3, "
                        f"{late:.3f} at 8N^3 (> 0.5); {time.time() - t0:.0f} s")
    assert early < 0.2
    assert late > 0.5


def test_ac2_powerlaw_speedup():
    N = 128
    t0 = time.time()
    early_budget = int(round(50 * N * math.log(N) ** 2))
    grid = sgd.SgdConfig(steps=N ** 3, points_per_decade=10).schedule()
    cfg = sgd.SgdConfig(delta_scale=0.03, steps=N ** 3,
                        record_steps=tuple(np.union1d(grid, [early_budget]).tolist()))
    traces = sgd.run_seeds(fourier.powerlaw_benchmark_spectrum(N), PlantSpec(1.2, 6), LC, cfg, range(8))
    summary = sgd.recovery_summary(traces)
    steps = summary.steps
    prin, phase = summary.median("principal_norm"), summary.median("phase_norm")
    a = float(np.max(prin[steps <= early_budget]))
    b = float(np.max(phase))
    diag = {"principal_peak_step": float(steps[int(np.argmax(prin))]), "phase_cross_step": math.inf}
    cross = np.nonzero(phase >= 0.5)[0]
    if cross.size:
        diag["phase_cross_step"] = float(steps[cross[0]])
    peak = int(np.argmax(prin))
    c = bool(cross.size and steps[peak] < steps[cross[0]] and prin[-1] < prin[peak])
    dt = time.time() - t0
    _report("AC-2a", a > 0.3, f"max median principal norm {a:.3f} within {early_budget} steps (> 0.3)")
    _report("AC-2b", b > 0.5, f"max median phase norm {b:.3f} within N^3 steps (> 0.5)")
    _report("AC-2c", c, f"principal peak {prin[peak]:.3f} at step {int(steps[peak])}, phase crosses 0.5 at "
                        f"{diag['phase_cross_step']}, final principal {prin[-1]:.3f}; {dt:.0f} s")
    assert a > 0.3
    assert b > 0.5
    assert c


def test_ac3_statistics_battery():
    t0 = time.time()
    reports = battery.run_battery(64, 1.2, 6, 1_000_000, np.random.default_rng(1))
    bad = [f"{r.title}/{c.name}" for r in reports for c in r.checks if not c.ok]
    ok = battery.battery_ok(reports)
    _report("AC-3", ok, f"{sum(len(r.checks) for r in reports)} checks, failing: {bad or 'none'}; "
                        f"{time.time() - t0:.0f} s")
    assert ok, battery.battery_text(reports)


def test_ac4_landscape():
    t0 = time.time()
    land = theory.empirical_landscape(fourier.isotropic_spectrum(64), PlantSpec(1.2, 6), H4, 41, 20_000,
                                      np.random.default_rng(3))
    cell = float(land.grid[1] - land.grid[0])
    minima = theory.landscape_minima(land)
    targets = np.arange(4) * np.pi / 2
    gaps = [float(np.min(theory.angle_gap(t, minima))) for t in targets]
    chi2, dof, p = theory.landscape_symmetry(land)
    ok_min = len(minima) == 4 and max(gaps) <= cell
    ok = ok_min and p > 0.01
    _report("AC-4", ok, f"minima {np.round(minima, 4).tolist()} rad, worst offset {max(gaps):.4f} "
                        f"(cell {cell:.3f}); quarter-turn chi2 {chi2:.0f} on {dof} dof, p = {p:.3f}; "
                        f"{time.time() - t0:.0f} s")
    assert ok_min
    assert p > 0.01


def test_ac5_theory_oracles():
    t0 = time.time()
    spec, plant = fourier.isotropic_spectrum(64), PlantSpec(1.2, 6)
    rng = np.random.default_rng(3)
    params = theory.DriftParams(1.0, np.zeros(0), special.hermite_coeff(H4, 4), special.hermite_coeff(H4, 6),
                                theory.likelihood_coeffs(1.2))
    worst = 0.0
    fd_ok = True
    for au, av in [(0.9, 0.3), (0.3, -0.8), (0.7, 0.7)]:
        st = theory.OverlapState(au, av, np.zeros(0), np.zeros(0), math.sqrt(max(0.0, 1 - au * au - av * av)))
        d = theory.population_drift(st, params)
        mean, se = theory.fd_loss_gradient(spec, plant, H4, st, 1_000_000, rng)
        for i in range(2):
            tol = max(3 * se[i], 0.25 * abs(d[i]))
            worst = max(worst, abs(mean[i] - d[i]) / tol)
            fd_ok &= abs(mean[i] - d[i]) <= tol
    c4, c6 = special.hermite_coeff(LC, 4), special.hermite_coeff(LC, 6)
    # data drift only; a positive penalty still shrinks the overlaps in this regime
    iso = theory.RescaledParams.from_eigenvalues(128, 1.0, np.ones(5), c4, c6, theory.likelihood_coeffs(1.2),
                                                 regime="near_isotropic")
    srng = np.random.default_rng(4)
    zero_ok = all(np.all(theory.rescaled_drift(theory.OverlapState.from_vector(srng.normal(size=13) * 3, 5),
                                                iso, conv) == 0.0)
                  for _ in range(100) for conv in ("derived", "alternate"))
    ext = theory.RescaledParams(1.0, np.full(2, 0.5), c4, c6, theory.likelihood_coeffs(1.2), 0.25)
    drift = theory.vector_drift(theory.rescaled_drift, ext, 2)
    m0 = np.array([0.4, 0.3, 0.5, 0.2, -0.1, 0.3, 1.0])
    _, a = theory.integrate_ode(drift, m0, 0.01, 100)
    _, b = theory.integrate_ode(drift, m0, 0.005, 200)
    halving = float(np.max(np.abs(a[-1] - b[-1])))
    ok = fd_ok and zero_ok and halving < 1e-6
    _report("AC-5", ok, f"drift vs MC finite differences worst |diff|/tol {worst:.2f} (<= 1); near-isotropic "
                        f"drift zero: {zero_ok}; RK4 halving gap {halving:.1e} (< 1e-6); {time.time() - t0:.0f} s")
    assert fd_ok
    assert zero_ok
    assert halving < 1e-6


def _coeff_report(convention):
    rep = theory.likelihood_coeff_check(fourier.isotropic_spectrum(64), PlantSpec(1.2, 6), 1_000_000,
                                        np.random.default_rng(5), convention=convention)
    vals = {c.name: c for c in rep.checks}
    return rep, vals


def test_ac6_likelihood_coefficients_as_stated():
    # the stated targets: c40 = c04 = 2 J4(4 eps), c22 = -c40 / 2
    rep, vals = _coeff_report("alternate")
    bad = [f"{c.name} z={c.z:.0f}" for c in rep.checks if not c.ok]
    est = ", ".join(f"{k}={vals[k].estimate:.4f}+-{vals[k].stderr:.4f} (target {vals[k].target:.4f})"
                    for k in ("c40", "c04", "c22"))
    _report("AC-6", rep.ok, f"stated targets: {est}; failing {bad or 'none'}")
    assert rep.ok, rep.text()


def test_ac6_likelihood_coefficients_derived_oracle():
    # same estimator against c40 = c04 = J4(4 eps), c22 = -J4(4 eps)
    rep, vals = _coeff_report("derived")
    worst = max(abs(c.z) for c in rep.checks)
    _report("AC-6 (derived oracle)", rep.ok, f"{len(rep.checks)} coefficients with i + j <= 4, worst |z| "
                                              f"{worst:.2f} (< 3)")
    assert rep.ok, rep.text()


def test_ac7_amplitude_then_phase():
    t0 = time.time()
    spec = fourier.powerlaw_spectrum(32, 2.0, 8)
    plant = PlantSpec(1.0, 2, "user", True, data_model.quarter_turn)
    rng = np.random.default_rng(7)
    X, y = shallow.phase_corpus(spec, plant, 10_000, rng)
    variants = shallow.dataset_variants(X, y, rng)
    res = shallow.amplitude_phase_signature(variants, y, range(8), epochs=30, evals_per_epoch=2)
    a = res.p_first > 0.05 and res.p_last < 0.05
    drops = {k: res.median_drop(k) for k in shallow.VARIANTS}
    b = drops["flattened"] > drops["original"] and drops["flattened"] > drops["transplanted"]
    _report("AC-7a", a, f"swapped gap first decile p = {res.p_first:.3f} (> 0.05, two-sided), last decile "
                        f"p = {res.p_last:.1e} (< 0.05, one-sided)")
    _report("AC-7b", b, "median 50% drop step " + ", ".join(f"{k} {v:g}" for k, v in drops.items())
            + f"; {time.time() - t0:.0f} s")
    assert a
    assert b


PROPERTY_SUITES = [
    "tests/test_fourier.py",
    "tests/test_special.py::test_hermite_orthogonality_mc",
    "tests/test_special.py::test_bessel_series_matches_integral",
    "tests/test_sgd.py::test_spherical_step_keeps_unit_norm",
    "tests/test_sgd.py::test_pointwise_gradient_finite_differences",
    "tests/test_sgd.py::test_penalty_gradient_finite_differences",
    "tests/test_shallow.py::test_gradients_match_finite_differences",
    "tests/test_theory.py::test_drift_is_gradient_of_loss",
]


def test_ac8_core_property_suites():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    t0 = time.time()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_SUITES],
                          cwd=root, capture_output=True, text=True)
    dt = time.time() - t0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and dt <= 300
    _report("AC-8", ok, f"{tail}; {dt:.0f} s (<= 300 s)")
    assert proc.returncode == 0, proc.stdout[-3000:]
    assert dt <= 300
