import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phaselab import _backend, fourier, sgd, special
from phaselab.data_model import PlantSpec
from phaselab.errors import ZeroNorm

H4 = special.hermite4()
LC = special.logcosh()

unit_seeds = st.integers(0, 2 ** 31 - 1)


def _unit(rng, n):
    w = rng.standard_normal(n)
    return w / np.linalg.norm(w)


@settings(max_examples=50, deadline=None)
@given(unit_seeds, st.floats(1e-6, 0.5))
def test_spherical_step_keeps_unit_norm(seed, delta):
    rng = np.random.default_rng(seed)
    w = _unit(rng, 24)
    new = sgd.spherical_step(w, (rng.standard_normal(24), 1), H4, delta)
    assert abs(np.linalg.norm(new) - 1) < 1e-8


@settings(max_examples=50, deadline=None)
@given(unit_seeds)
def test_tangent_projection_is_orthogonal(seed):
    rng = np.random.default_rng(seed)
    w = _unit(rng, 24)
    g = rng.standard_normal(24) * 10
    assert abs(sgd.tangent_projection(w, g) @ w) < 1e-12 * max(1.0, np.linalg.norm(g))


def test_spherical_step_special_cases():
    rng = np.random.default_rng(0)
    w = _unit(rng, 16)
    x = rng.standard_normal(16)
    assert np.array_equal(sgd.spherical_step(w, (x, 1), H4, 0.0), w / np.linalg.norm(w))
    # an input along w gives a gradient along w, which the projector removes
    assert np.allclose(sgd.spherical_step(w, (3.0 * w, -1), H4, 0.1), w, atol=1e-14)


def test_spherical_step_zero_norm():
    w = np.zeros(8)
    w[0] = 1.0
    with pytest.raises(ZeroNorm):
        sgd.spherical_step(w * 1e-14, (np.ones(8), 1), H4, 0.0)


@settings(max_examples=40, deadline=None)
@given(unit_seeds, st.sampled_from([-1, 1]))
def test_pointwise_gradient_finite_differences(seed, y):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(12) * 0.4
    x = rng.standard_normal(12)
    g = sgd.pointwise_gradient(w, x, y, LC)
    h = 1e-6
    num = np.array([(sgd.pointwise_loss(w + h * e, x, y, LC) - sgd.pointwise_loss(w - h * e, x, y, LC)) / (2 * h)
                    for e in np.eye(12)])
    assert np.allclose(g, num, rtol=1e-6, atol=1e-8)


def test_penalty_gradient_finite_differences():
    rng = np.random.default_rng(1)
    w = rng.standard_normal(10)
    beta = 0.7
    f = lambda v: beta * np.dot(v, v) ** 2
    h = 1e-6
    num = np.array([(f(w + h * e) - f(w - h * e)) / (2 * h) for e in np.eye(10)])
    g = sgd.penalty_gradient(w, beta)
    assert np.max(np.abs(g - num)) / np.max(np.abs(g)) < 1e-8


def test_penalized_step_cases():
    rng = np.random.default_rng(2)
    w = rng.standard_normal(10)
    x = rng.standard_normal(10)
    plain = w - 0.1 * sgd.pointwise_gradient(w, x, 1, LC)
    assert np.allclose(sgd.penalized_step(w, (x, 1), LC, 0.1, 0.0), plain)
    shrunk = sgd.penalized_step(w, (np.zeros(10), 1), LC, 0.01, 0.5)
    assert np.linalg.norm(shrunk) < np.linalg.norm(w)
    # ascent flips the data term only
    up = sgd.penalized_step(w, (x, 1), LC, 0.1, 0.5, ascent=True)
    down = sgd.penalized_step(w, (x, 1), LC, 0.1, 0.5)
    assert np.allclose(up + down, 2 * (w - 0.1 * sgd.penalty_gradient(w, 0.5)))


def test_config_validation_and_schedule():
    with pytest.raises(ValueError):
        sgd.SgdConfig(variant="adam")
    with pytest.raises(ValueError):
        sgd.SgdConfig(steps=-1)
    with pytest.raises(ValueError):
        sgd.SgdConfig(beta=-1)
    sch = sgd.SgdConfig(steps=12345).schedule()
    assert sch[0] == 0 and sch[-1] == 12345 and np.all(np.diff(sch) > 0)
    assert list(sgd.SgdConfig(steps=10, record_every=5).schedule()) == [0, 5, 10]
    assert sgd.SgdConfig(delta_scale=0.5).learning_rate(50) == pytest.approx(0.01)


def test_zero_steps_trace_is_initialisation():
    N = 64
    spec = fourier.isotropic_spectrum(N)
    traces = [sgd.run_online(spec, PlantSpec(), H4, sgd.SgdConfig(steps=0), s) for s in range(200)]
    for t in traces:
        assert list(t.steps) == [0]
        assert t.sq_norm[0] == pytest.approx(1.0)
    au = np.array([t.alpha_u[0] for t in traces])
    # uniform on the sphere: alpha_u has variance 1/N
    assert np.mean(au ** 2) * N == pytest.approx(1.0, abs=0.3)


def test_run_is_deterministic():
    spec = fourier.powerlaw_benchmark_spectrum(64, companions=((15, 1.2),))
    cfg = sgd.SgdConfig(steps=5000, delta_scale=0.03, record_every=500)
    a = sgd.run_online(spec, PlantSpec(), LC, cfg, 5)
    b = sgd.run_online(spec, PlantSpec(), LC, cfg, 5)
    assert np.array_equal(a.projections, b.projections)
    assert np.array_equal(a.loss_window, b.loss_window, equal_nan=True)
    assert a.M == 1


@pytest.mark.skipif(not _backend.CYTHON_AVAILABLE, reason="compiled kernels not built")
@pytest.mark.parametrize("variant,act", [("spherical", H4), ("penalized", LC), ("spherical", LC)])
def test_backends_agree(variant, act):
    spec = fourier.powerlaw_benchmark_spectrum(32, k0=3, companions=((5, 1.2), (9, 0.9)))
    # h4 runs amplify last-bit rounding differences exponentially at large steps
    cfg = sgd.SgdConfig(variant=variant, steps=3000, delta_scale=0.002, beta=0.25, record_every=300,
                        loss_window=500)
    a = sgd.run_online(spec, PlantSpec(1.2, 3), act, cfg, 9, backend="cython")
    b = sgd.run_online(spec, PlantSpec(1.2, 3), act, cfg, 9, backend="python")
    assert np.allclose(a.projections, b.projections, rtol=1e-10, atol=1e-12)
    assert np.allclose(a.loss_window, b.loss_window, rtol=1e-10, equal_nan=True)


def test_custom_activation_uses_python_loop():
    act = special.user_activation(lambda s: np.cos(s), lambda s: -np.sin(s))
    cfg = sgd.SgdConfig(steps=200, record_every=100)
    t = sgd.run_online(fourier.isotropic_spectrum(16), PlantSpec(1.2, 3), act, cfg, 0)
    assert np.allclose(t.sq_norm, 1.0)


def test_spherical_snapshots_on_sphere():
    cfg = sgd.SgdConfig(steps=20_000, delta_scale=0.5, record_every=1000)
    t = sgd.run_online(fourier.isotropic_spectrum(32), PlantSpec(1.2, 4), H4, cfg, 3)
    assert np.max(np.abs(t.sq_norm - 1)) < 1e-8


def test_unused_modes_stay_neutral():
    N = 32
    cfg = sgd.SgdConfig(steps=N * N, record_steps=(N * N,))
    traces = sgd.run_seeds(fourier.isotropic_spectrum(N), PlantSpec(0.0, 5), H4, cfg, range(30))
    med = np.median([t.phase_norm[-1] for t in traces])
    assert med < 3 / math.sqrt(N)


def test_descent_on_average_in_recovering_runs():
    N = 16
    cfg = sgd.SgdConfig(delta_scale=0.002, steps=1_000_000, record_every=10_000, loss_window=10_000)
    traces = sgd.run_seeds(fourier.isotropic_spectrum(N), PlantSpec(1.2, 3), H4, cfg, range(4))
    # one window mean of 1 - y h4 has standard error about sqrt(24 / 1e4)
    se = math.sqrt(24 / 1e4)
    checked = 0
    for t in traces:
        if t.phase_norm[-1] < 0.8:
            continue
        checked += 1
        hit = int(np.nonzero(t.phase_norm >= 0.8)[0][0])
        loss = t.loss_window[1:]
        before = loss[: max(hit, 1)]
        after = loss[hit:]
        assert np.mean(after) <= np.mean(before[:5]) + 2 * se
    assert checked >= 2


def test_recovery_summary():
    tr = sgd.run_online(fourier.isotropic_spectrum(16), PlantSpec(1.2, 3), H4,
                        sgd.SgdConfig(steps=100, record_every=50), 0)
    s = sgd.recovery_summary([tr])
    assert np.allclose(s.median("phase_norm"), tr.phase_norm)
    zero = sgd.RunTrace(tr.steps, np.zeros_like(tr.projections), tr.sq_norm, tr.loss_window, 0, 0)
    s0 = sgd.recovery_summary([zero, zero])
    assert np.all(s0.median("phase_norm") == 0) and np.all(s0.frac_recovered == 0)
    with pytest.raises(ValueError):
        sgd.recovery_summary([])


def test_parallel_seeds_match_serial():
    cfg = sgd.SgdConfig(steps=2000, record_every=1000)
    spec = fourier.isotropic_spectrum(16)
    a = sgd.run_seeds(spec, PlantSpec(1.2, 3), H4, cfg, [1, 2], jobs=1)
    b = sgd.run_seeds(spec, PlantSpec(1.2, 3), H4, cfg, [1, 2], jobs=2)
    for x, y in zip(a, b):
        assert np.array_equal(x.projections, y.projections)


def test_trace_csv(tmp_path):
    tr = sgd.run_online(fourier.isotropic_spectrum(16), PlantSpec(1.2, 3), H4,
                        sgd.SgdConfig(steps=10, record_every=5), 4, seed=4)
    path = tmp_path / "t.csv"
    sgd.write_traces_csv(path, [tr])
    lines = path.read_text().splitlines()
    assert lines[0] == sgd.TRACE_HEADER
    assert len(lines) == 4
    assert "np." not in path.read_text()
    assert lines[1].startswith("0,4,")
