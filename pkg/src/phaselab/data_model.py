"""Baseline Gaussian inputs and the planted phase model, plus their statistics checks.

A baseline input is a centred Gaussian with circulant covariance. A planted
input starts from a baseline draw and changes only the phase of mode k0:

    psi = phi + epsilon * f(phi) + U,   U uniform on {0, pi/2, pi, 3pi/2},

leaving the amplitude untouched, so both classes share their covariance.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import stats as sps

from . import fourier
from .special import bessel_j, hermite_poly
from .stats import Report, RunningMoments, exceed_check, z_check

QUARTER_TURNS = np.array([0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi])


def make_rng(seed):
    """Seeded generator (PCG64). Equal seeds give equal streams."""
    return np.random.default_rng(seed)


def spawn_rngs(seed, n):
    """Independent child generators, one per worker or seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def quarter_turn(phi):
    """Shift that snaps a phase onto the nearest multiple of pi/2 (use with epsilon = 1)."""
    phi = np.asarray(phi, dtype=float)
    return np.round(phi / (0.5 * np.pi)) * (0.5 * np.pi) - phi


@dataclass(frozen=True)
class PlantSpec:
    """Phase perturbation of mode ``k0``.

    ``f_kind`` is "sin" (the analysed case) or "user", in which case ``f`` must
    be a 2pi-periodic callable.
    """

    epsilon: float = 1.2
    k0: int = 6
    f_kind: str = "sin"
    use_corrector: bool = True
    f: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.f_kind not in ("sin", "user"):
            raise ValueError(f"unknown f_kind {self.f_kind!r}")
        if self.f_kind == "user" and self.f is None:
            raise ValueError("f_kind='user' needs a callable f")

    def validate(self, N):
        if not 1 <= self.k0 <= (N - 1) // 2:
            raise ValueError(f"k0={self.k0} must lie in 1..{(N - 1) // 2} for N={N}")

    def shift(self, phi):
        """epsilon * f(phi), the deterministic part of the phase change."""
        if self.f_kind == "sin":
            return self.epsilon * np.sin(phi)
        return self.epsilon * np.asarray(self.f(phi), dtype=float)

    def phase_factor(self, m=4, grid=4096):
        """E[exp(i m (phi + epsilon f(phi)))] for phi uniform on the circle.

        For f = sin this is J_m(m epsilon); other f are integrated with the
        trapezoid rule, which is spectrally accurate for periodic integrands.
        """
        if self.f_kind == "sin":
            return complex(bessel_j(m, m * self.epsilon))
        phi = np.linspace(-np.pi, np.pi, grid, endpoint=False)
        return complex(np.mean(np.exp(1j * m * (phi + self.shift(phi)))))


@dataclass
class LabeledSample:
    x: np.ndarray
    y: int
    latent: Optional[dict] = None


@dataclass
class SampleBatch:
    x: np.ndarray  # (n, N)
    y: np.ndarray  # (n,) in {-1, +1}
    latent: Optional[dict] = None
    seed: Optional[int] = None

    def __len__(self):
        return self.x.shape[0]

    def to_csv(self, path):
        N = self.x.shape[1]
        header = "sample_id,label," + ",".join(f"x_{i}" for i in range(N))
        with open(path, "w") as fh:
            fh.write(f"# seed={self.seed}\n{header}\n")
            for i, (row, lab) in enumerate(zip(self.x, self.y)):
                fh.write(f"{i},{int(lab)}," + ",".join(repr(float(v)) for v in row) + "\n")


def read_batch_csv(path):
    seed = None
    with open(path) as fh:
        first = fh.readline()
        if first.startswith("#") and "seed=" in first:
            raw = first.split("seed=", 1)[1].strip()
            seed = None if raw == "None" else int(raw)
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
    return SampleBatch(x=data[:, 2:], y=data[:, 1].astype(int), seed=seed)


def _fourier_noise(spec, g):
    """Map standard normals g (n, N) to DFT coefficients of N(0, Sigma) draws."""
    N = spec.N
    lam = spec.eigenvalues
    h = (N - 1) // 2
    Z = np.zeros(g.shape, dtype=complex)
    Z[:, 0] = np.sqrt(N * lam[0]) * g[:, 0]
    ks = np.arange(1, h + 1)
    scale = np.sqrt(N * lam[ks] / 2.0)
    Z[:, ks] = scale * (g[:, 1 : h + 1] + 1j * g[:, h + 1 : 2 * h + 1])
    Z[:, N - ks] = np.conj(Z[:, ks])
    if N % 2 == 0:
        Z[:, N // 2] = np.sqrt(N * lam[N // 2]) * g[:, N - 1]
    return Z


def sample_fourier(spec, rng, size):
    return _fourier_noise(spec, rng.standard_normal((size, spec.N)))


def sample_baseline(spec, rng, size=None):
    """Draw(s) from N(0, Sigma), generated mode by mode in the Fourier domain."""
    n = 1 if size is None else size
    x = np.fft.ifft(sample_fourier(spec, rng, n), axis=-1).real
    return x[0] if size is None else x


def _draw_offsets(plant, rng, n):
    if plant.use_corrector:
        return QUARTER_TURNS[rng.integers(0, 4, size=n)]
    return np.zeros(n)


def _plant_fourier(Z, plant, U):
    """Rotate mode k0 in place; returns (rho, phi) of the original coefficient."""
    N = Z.shape[-1]
    k0 = plant.k0
    Zk = Z[:, k0]
    rho = np.abs(Zk)
    phi = np.angle(Zk)
    # multiplying by a unit phasor keeps eps = 0, U = 0 bit-identical to the baseline
    Xk = Zk * np.exp(1j * (plant.shift(phi) + U))
    Z[:, k0] = Xk
    Z[:, N - k0] = np.conj(Xk)
    return rho, phi


def sample_planted(spec, plant, rng, size=None, keep_latent=True):
    """Planted draw(s): the baseline draw with the phase of mode k0 changed.

    Consumes the same normals as ``sample_baseline`` followed by the corrector
    offsets, so with epsilon = 0 and no corrector the output equals the
    baseline draw of the same stream.
    """
    plant.validate(spec.N)
    n = 1 if size is None else size
    Z = sample_fourier(spec, rng, n)
    U = _draw_offsets(plant, rng, n)
    rho, phi = _plant_fourier(Z, plant, U)
    x = fourier.idft(Z)
    latent = {"rho": rho, "phi": phi, "U": U} if keep_latent else None
    if size is None:
        if latent is not None:
            latent = {k: float(v[0]) for k, v in latent.items()}
        return LabeledSample(x[0], 1, latent)
    return LabeledSample(x, 1, latent)


def sample_labeled_batch(spec, plant, n, rng, keep_latent=False, seed=None):
    """Balanced stream: each row is planted with probability 1/2 (label +1)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    plant.validate(spec.N)
    y = np.where(rng.random(n) < 0.5, 1, -1)
    Z = sample_fourier(spec, rng, n)
    U = _draw_offsets(plant, rng, n)
    pos = y > 0
    Zp = Z[pos]
    rho, phi = _plant_fourier(Zp, plant, U[pos])
    Z[pos] = Zp
    x = np.fft.ifft(Z, axis=-1).real
    latent = None
    if keep_latent:
        latent = {"rho": rho, "phi": phi, "U": U[pos], "planted_rows": np.nonzero(pos)[0]}
    return SampleBatch(x, y, latent, seed)


def pixel_space_plant(z, plant, rho, phi, U):
    """Closed-form planted signal from a baseline signal z and its mode-k0 polar data.

    Removes the original k0 cosine and adds the rotated one:
    x_n = z_n + (2 rho / N) [cos(2 pi n k0 / N + psi) - cos(2 pi n k0 / N + phi)].
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    N = z.shape[-1]
    rho = np.atleast_1d(rho)[:, None]
    phi = np.atleast_1d(phi)[:, None]
    U = np.atleast_1d(U)[:, None]
    n = np.arange(N)
    base = 2 * np.pi * n * plant.k0 / N
    psi = phi + plant.shift(phi) + U
    return z + (2.0 * rho / N) * (np.cos(base + psi) - np.cos(base + phi))


def rotate_plant(z, u, v, plant, U):
    """Planted version of baseline rows z using only their (u, v) projections.

    The mode-k0 coefficient is sqrt(N/2) (a - i b) with a = u.z, b = v.z, so a
    phase change is a rotation of (a, b) inside span(u, v). Cost O(N) per row.
    """
    z = np.asarray(z, dtype=float)
    a = z @ u
    b = z @ v
    phi = np.arctan2(-b, a)
    theta = plant.shift(phi) + U
    c, s = np.cos(theta), np.sin(theta)
    da = a * c + b * s - a
    db = b * c - a * s - b
    return z + np.multiply.outer(da, u) + np.multiply.outer(db, v)


def fourth_moment_oracle(spec, plant, w):
    """Analytic E[(w.x)^4] under the planted model for a unit vector w.

    Gaussian part 3 (w^T Sigma w)^2 plus the excess carried by mode k0:
    (2 / N^2) E[rho^4] Re(conj(w_k0)^4 kappa), with E[rho^4] = 2 (lambda N)^2,
    w_k0 the orthonormal-DFT projection and kappa = E[exp(4i(phi + eps f(phi)))]
    (= J_4(4 eps) for f = sin; then the term is kappa Re(w_k0^4)).
    """
    w = np.asarray(w, dtype=float)
    if abs(np.linalg.norm(w) - 1.0) > 1e-8:
        raise ValueError("w must be a unit vector")
    N = spec.N
    lam = spec.eigenvalues[plant.k0]
    q = fourier.quadratic_form(spec, w)
    rho4 = 2.0 * (lam * N) ** 2
    wk = fourier.mode_projection(w, plant.k0)
    kappa = plant.phase_factor(4)
    if not plant.use_corrector:
        # without U the second-order terms also change; this formula no longer applies
        raise ValueError("the fourth-moment formula assumes the corrector is enabled")
    return float(3.0 * q ** 2 + (2.0 / N ** 2) * rho4 * (np.conj(wk) ** 4 * kappa).real)


def _chunks(total, size):
    done = 0
    while done < total:
        b = min(size, total - done)
        yield b
        done += b


def moment_mc(spec, plant, ws, power, n_samples, rng, planted=True, chunk=100_000):
    """MC mean and stderr of (w.x)^power for each row of ws."""
    ws = np.atleast_2d(ws)
    acc = RunningMoments((ws.shape[0],))
    for b in _chunks(n_samples, chunk):
        if planted:
            x = sample_planted(spec, plant, rng, b, keep_latent=False).x
        else:
            x = sample_baseline(spec, rng, b)
        acc.update((x @ ws.T) ** power)
    return acc.mean, acc.stderr


def third_moment_check(spec, plant, n_samples, rng, w_random=None, k_se=4.0):
    """E[(w.x)^3] = 0 for w in {u, v, random}, on planted and baseline draws."""
    if n_samples < 10_000:
        raise ValueError("use at least 1e4 samples")
    basis = fourier.build_basis(spec.N)
    if w_random is None:
        w_random = rng.standard_normal(spec.N)
    w_random = w_random / np.linalg.norm(w_random)
    ws = np.array([basis.u(plant.k0), basis.v(plant.k0), w_random])
    names = ["u", "v", "random"]
    report = Report("third moments vanish")
    for planted in (True, False):
        mean, se = moment_mc(spec, plant, ws, 3, n_samples, rng, planted=planted)
        tag = "planted" if planted else "baseline"
        for nm, m, s in zip(names, mean, se):
            report.add(z_check(f"E[(w.x)^3] w={nm} {tag}", m, s, 0.0, k_se))
    return report


def fourth_moment_check(spec, plant, n_samples, rng, thetas=(0.0, np.pi / 8, np.pi / 4), k_se=3.0):
    """MC fourth moments against the oracle inside span(u, v) and orthogonal to it."""
    basis = fourier.build_basis(spec.N)
    u, v = basis.u(plant.k0), basis.v(plant.k0)
    ws = [np.cos(t) * u + np.sin(t) * v for t in thetas]
    perp = rng.standard_normal(spec.N)
    perp -= (perp @ u) * u + (perp @ v) * v
    ws.append(perp / np.linalg.norm(perp))
    ws = np.array(ws)
    names = [f"theta={t:.4f}" for t in thetas] + ["perp"]
    mean, se = moment_mc(spec, plant, ws, 4, n_samples, rng)
    report = Report("fourth moments match the oracle")
    for nm, w, m, s in zip(names, ws, mean, se):
        report.add(z_check(f"E[(w.x)^4] {nm}", m, s, fourth_moment_oracle(spec, plant, w), k_se))
    return report


def mode_square_mc(spec, plant, n_samples, rng, chunk=100_000):
    """Mean and stderr of X_k0^2 / (N lambda_k0) (complex) under the planted model."""
    re = RunningMoments((2,))
    scale = spec.N * spec.eigenvalues[plant.k0]
    for b in _chunks(n_samples, chunk):
        Z = sample_fourier(spec, rng, b)
        U = _draw_offsets(plant, rng, b)
        _plant_fourier(Z, plant, U)
        sq = Z[:, plant.k0] ** 2 / scale
        re.update(np.column_stack([sq.real, sq.imag]))
    mean = complex(re.mean[0], re.mean[1])
    se = float(np.sqrt(np.sum(re.stderr ** 2)))
    return mean, se


def corrector_ablation_check(spec, plant, n_samples, rng):
    """E[X_k0^2] is visibly non-zero without the corrector and vanishes with it.

    Translation invariance needs E[X_k0 X_{N-k0}-bar] = E[X_k0^2] = 0; without
    U it equals N lambda J_2(2 eps) for f = sin.
    """
    report = Report("corrector ablation")
    off = replace(plant, use_corrector=False)
    on = replace(plant, use_corrector=True)
    m_off, se_off = mode_square_mc(spec, off, n_samples, rng)
    m_on, se_on = mode_square_mc(spec, on, n_samples, rng)
    report.add(exceed_check("|E[X_k0^2]|/(N lam) corrector off", abs(m_off), se_off, 5.0,
                            note=f"predicted {off.phase_factor(2).real:.4f}"))
    report.add(z_check("|E[X_k0^2]|/(N lam) corrector on", abs(m_on), se_on, 0.0, 3.0))
    return report


def ks_uniform(phases, alpha=0.01):
    """Kolmogorov-Smirnov distance of angles from Uniform[-pi, pi).

    Returns a dict with the statistic, its alpha-level critical value
    (asymptotic Kolmogorov distribution), the p-value and ``passed``.
    """
    phases = np.asarray(phases, dtype=float).ravel()
    n = phases.size
    res = sps.kstest(phases, sps.uniform(loc=-np.pi, scale=2 * np.pi).cdf, method="asymp")
    crit = sps.kstwobign.ppf(1 - alpha) / math.sqrt(n)
    return {
        "statistic": float(res.statistic),
        "critical": float(crit),
        "pvalue": float(res.pvalue),
        "n": n,
        "passed": bool(res.statistic < crit),
    }


def phase_uniformity_check(samples, k, alpha=0.01):
    """KS test of the mode-k phases of pixel-space samples against uniformity."""
    samples = np.atleast_2d(samples)
    return ks_uniform(np.angle(np.fft.fft(samples, axis=-1)[:, k]), alpha)


def mode_phases(spec, plant, n_samples, rng, modes, planted=True, chunk=100_000):
    """Phases of the given modes for ``n_samples`` draws, shape (n_samples, len(modes))."""
    out = []
    for b in _chunks(n_samples, chunk):
        Z = sample_fourier(spec, rng, b)
        if planted:
            _plant_fourier(Z, plant, _draw_offsets(plant, rng, b))
        out.append(np.angle(Z[:, list(modes)]))
    return np.concatenate(out)


def covariance_check(spec, plant, n_samples, rng, k_se=3.0, chunk=100_000):
    """Planted and baseline covariances agree.

    Compared statistics: the 2x2 covariance of (u.x, v.x), the only block the
    phase change can touch, and the mean per-pixel variance. The largest
    per-entry z-score of the full N x N difference is recorded as a note.
    """
    basis = fourier.build_basis(spec.N)
    u, v = basis.u(plant.k0), basis.v(plant.k0)
    N = spec.N
    iu = np.triu_indices(N)

    def accumulate(planted):
        block = RunningMoments((4,))
        full = RunningMoments((iu[0].size,))
        for b in _chunks(n_samples, chunk):
            if planted:
                x = sample_planted(spec, plant, rng, b, keep_latent=False).x
            else:
                x = sample_baseline(spec, rng, b)
            a, c = x @ u, x @ v
            block.update(np.column_stack([a * a, c * c, a * c, (x * x).mean(axis=1)]))
            full.update(x[:, iu[0]] * x[:, iu[1]])
        return block, full

    bp, fp = accumulate(True)
    b0, f0 = accumulate(False)
    report = Report("covariance preservation")
    names = ["Cov(u.x,u.x)", "Cov(v.x,v.x)", "Cov(u.x,v.x)", "mean pixel variance"]
    zfull = (fp.mean - f0.mean) / np.sqrt(fp.stderr ** 2 + f0.stderr ** 2)
    for i, nm in enumerate(names):
        diff = bp.mean[i] - b0.mean[i]
        se = math.sqrt(bp.stderr[i] ** 2 + b0.stderr[i] ** 2)
        note = f"(max entry |z| over {zfull.size} entries: {np.max(np.abs(zfull)):.2f})" if i == 3 else ""
        report.add(z_check(f"planted - baseline {nm}", diff, se, 0.0, k_se, note=note))
    return report


def rayleigh_check(spec, rng, n_samples, modes, k_se=3.0, chunk=100_000):
    """Mode amplitudes of baseline draws have Rayleigh moments with scale sqrt(N lambda / 2)."""
    from .special import rayleigh_moment

    modes = list(modes)
    powers = (1, 2, 4)
    acc = RunningMoments((len(modes) * len(powers),))
    for b in _chunks(n_samples, chunk):
        rho = np.abs(sample_fourier(spec, rng, b)[:, modes])
        acc.update(np.column_stack([rho[:, i] ** p for i in range(len(modes)) for p in powers]))
    report = Report("Rayleigh amplitudes")
    c = 0
    for k in modes:
        sig = math.sqrt(spec.N * spec.eigenvalues[k] / 2)
        for p in powers:
            report.add(z_check(f"E[rho_{k}^{p}]", acc.mean[c], acc.stderr[c], rayleigh_moment(sig, p), k_se))
            c += 1
    return report


def hermite_pair_mc(spec, plant, pairs, n_samples, rng, chunk=100_000):
    """MC of E_P[h_i(v.x / sigma_v) h_j(u.x / sigma_u)] for each (i, j) in pairs."""
    basis = fourier.build_basis(spec.N)
    u, v = basis.u(plant.k0), basis.v(plant.k0)
    sig = math.sqrt(spec.eigenvalues[plant.k0])
    acc = RunningMoments((len(pairs),))
    for b in _chunks(n_samples, chunk):
        x = sample_planted(spec, plant, rng, b, keep_latent=False).x
        zv, zu = (x @ v) / sig, (x @ u) / sig
        hv = {i: hermite_poly(i, zv) for i in {p[0] for p in pairs}}
        hu = {j: hermite_poly(j, zu) for j in {p[1] for p in pairs}}
        acc.update(np.column_stack([hv[i] * hu[j] for i, j in pairs]))
    return acc.mean, acc.stderr
