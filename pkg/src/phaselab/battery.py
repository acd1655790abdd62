"""The Monte-Carlo validation battery for the phase model.

Covariance preservation, vanishing third moments, fourth moments against the
closed form, the corrector ablation, phase uniformity, Rayleigh amplitudes and
the likelihood-ratio coefficients. Each part is a ``stats.Report``; some checks
are meant to fail and are marked so.
"""
import math
from dataclasses import replace

import numpy as np

from . import data_model, fourier, theory
from .stats import Check, Report


def _ks_check(name, res, expect_pass=True):
    # KS statistic in units of 1/sqrt(n); the threshold is the critical value on that scale
    n = res["n"]
    scale = 1.0 / math.sqrt(n)
    return Check(name, res["statistic"], scale, 0.0, res["critical"] / scale, res["passed"], expect_pass,
                 f"p={res['pvalue']:.3g}")


def uniformity_report(spec, plant, n_samples, rng, modes=None, strong_epsilon=2.5, alpha=0.01):
    """Unmodified modes look uniform; mode k0 at a strong perturbation must not."""
    N = spec.N
    if modes is None:
        modes = [k for k in (1, plant.k0 - 1, plant.k0 + 1, N // 4) if 1 <= k < N // 2 and k != plant.k0]
        modes = sorted(set(modes))
    report = Report("phase uniformity")
    ph = data_model.mode_phases(spec, plant, n_samples, rng, modes)
    for i, k in enumerate(modes):
        report.add(_ks_check(f"KS uniform, mode {k}, eps={plant.epsilon:g}", data_model.ks_uniform(ph[:, i], alpha)))
    strong = replace(plant, epsilon=strong_epsilon)
    ph0 = data_model.mode_phases(spec, strong, n_samples, rng, [plant.k0])
    report.add(_ks_check(f"KS uniform, mode k0={plant.k0}, eps={strong_epsilon:g}",
                         data_model.ks_uniform(ph0[:, 0], alpha), expect_pass=strong_epsilon == 0))
    return report


def corrector_report(spec, plant, n_samples, rng):
    report = data_model.corrector_ablation_check(spec, plant, n_samples, rng)
    if plant.f_kind == "sin" and plant.epsilon == 0:
        # nothing is planted, so even without the corrector the signal is absent
        first = report.checks[0]
        report.checks[0] = replace(first, expect_pass=False)
    return report


def run_battery(N=64, epsilon=1.2, k0=6, n_samples=1_000_000, rng=None, spectrum=None,
                strong_epsilon=2.5, rayleigh_modes=None):
    """All reports of the battery, in a fixed order and from one random stream."""
    rng = np.random.default_rng(rng)
    spec = fourier.isotropic_spectrum(N) if spectrum is None else spectrum
    plant = data_model.PlantSpec(epsilon, k0)
    plant.validate(N)
    if rayleigh_modes is None:
        rayleigh_modes = [1, k0]
    return [
        data_model.covariance_check(spec, plant, n_samples, rng),
        data_model.third_moment_check(spec, plant, n_samples, rng),
        data_model.fourth_moment_check(spec, plant, n_samples, rng),
        corrector_report(spec, plant, n_samples, rng),
        uniformity_report(spec, plant, n_samples, rng, strong_epsilon=strong_epsilon),
        data_model.rayleigh_check(spec, rng, n_samples, rayleigh_modes),
        theory.likelihood_coeff_check(spec, plant, n_samples, rng),
    ]


def battery_ok(reports):
    return all(r.ok for r in reports)


def battery_text(reports):
    body = "\n\n".join(r.text() for r in reports)
    return body + f"\n\nbattery: {'OK' if battery_ok(reports) else 'NOT OK'}\n"


def battery_rows(reports):
    """Flat rows (report, check, estimate, stderr, target, threshold, passed, expected)."""
    for r in reports:
        for c in r.checks:
            yield (r.title, c.name, c.estimate, c.stderr, c.target, c.threshold, c.passed, c.expect_pass)
