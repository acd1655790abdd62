"""Online SGD on the correlation loss 1 - y sigma(w.x), with overlap tracking.

Sign convention: steps descend the loss, w <- w - delta * grad. The update as
literally written with "+ delta grad" (ascent on the loss) is available
through ``SgdConfig.ascent`` for comparison.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend, fourier
from .errors import ZeroNorm
from .theory import OverlapState


@dataclass
class SgdConfig:
    """Run settings. The learning rate is delta_scale / N unless ``delta`` is given.

    Snapshots follow ``record_steps`` if set, otherwise every ``record_every``
    steps, otherwise a log-spaced grid with ``points_per_decade`` points.
    """

    variant: str = "spherical"
    delta_scale: float = 1e-3
    beta: float = 0.0
    steps: int = 1000
    record_every: Optional[int] = None
    eta_threshold: float = 0.25
    delta: Optional[float] = None
    ascent: bool = False
    loss_window: int = 10_000
    points_per_decade: int = 20
    record_steps: Optional[tuple] = None

    def __post_init__(self):
        if self.variant not in ("spherical", "penalized"):
            raise ValueError(f"variant must be spherical or penalized, got {self.variant!r}")
        if self.delta_scale <= 0 and self.delta is None:
            raise ValueError("delta_scale must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    def learning_rate(self, N):
        return self.delta if self.delta is not None else self.delta_scale / N

    def schedule(self):
        """Sorted unique snapshot steps, always including 0 and ``steps``."""
        if self.record_steps is not None:
            pts = np.asarray(self.record_steps, dtype=np.int64)
            pts = pts[(pts >= 0) & (pts <= self.steps)]
        elif self.record_every:
            pts = np.arange(0, self.steps + 1, self.record_every, dtype=np.int64)
        else:
            top = max(self.steps, 1)
            n = int(math.ceil(math.log10(top) * self.points_per_decade)) + 1
            pts = np.unique(np.round(np.logspace(0, math.log10(top), n)).astype(np.int64))
        pts = pts[pts <= self.steps]
        return np.unique(np.concatenate([[0], pts, [self.steps]]).astype(np.int64))


def learning_rate_window(N):
    """(lower, upper) bounds 1/(N^2 log^2 N) and 1/(N log N) for the isotropic regime."""
    L = math.log(N)
    return 1.0 / (N * N * L * L), 1.0 / (N * L)


def learning_rate_in_window(N, delta):
    lo, hi = learning_rate_window(N)
    return lo < delta < hi


@dataclass
class RunTrace:
    steps: np.ndarray
    projections: np.ndarray  # (R, 2 + 2M): u, v, u_m..., v_m...
    sq_norm: np.ndarray  # (R,) |w|^2
    loss_window: np.ndarray  # (R,)
    seed: Optional[int]
    M: int
    final_w: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def alpha_u(self):
        return self.projections[:, 0]

    @property
    def alpha_v(self):
        return self.projections[:, 1]

    @property
    def alpha_um(self):
        return self.projections[:, 2 : 2 + self.M]

    @property
    def alpha_vm(self):
        return self.projections[:, 2 + self.M : 2 + 2 * self.M]

    @property
    def phase_norm(self):
        return np.hypot(self.alpha_u, self.alpha_v)

    @property
    def principal_norm(self):
        return np.sqrt(np.sum(self.projections[:, 2:] ** 2, axis=1))

    @property
    def omega_perp(self):
        return np.sqrt(np.maximum(self.sq_norm - np.sum(self.projections ** 2, axis=1), 0.0))

    @property
    def stats(self):
        return [
            OverlapState(p[0], p[1], p[2 : 2 + self.M], p[2 + self.M :], wp)
            for p, wp in zip(self.projections, self.omega_perp)
        ]

    def at(self, step):
        """Index of the snapshot at ``step`` (must be recorded)."""
        idx = np.searchsorted(self.steps, step)
        if idx >= self.steps.shape[0] or self.steps[idx] != step:
            raise KeyError(f"step {step} was not recorded")
        return int(idx)

    def csv_rows(self):
        seed = "" if self.seed is None else self.seed
        for i, st in enumerate(self.steps):
            yield (f"{int(st)},{seed},{float(self.alpha_u[i])!r},{float(self.alpha_v[i])!r},{float(self.phase_norm[i])!r},"
                   f"{float(self.principal_norm[i])!r},{float(self.omega_perp[i])!r},{float(self.loss_window[i])!r}")


TRACE_HEADER = "step,seed,alpha_u,alpha_v,phase_norm,principal_norm,omega_perp,loss_window"


def write_traces_csv(path, traces):
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for tr in traces:
            for row in tr.csv_rows():
                fh.write(row + "\n")


def pointwise_loss(w, x, y, act):
    return 1.0 - y * act(np.dot(w, x))


def pointwise_gradient(w, x, y, act):
    """Gradient in w of 1 - y sigma(w.x), i.e. -y sigma'(w.x) x."""
    x = np.asarray(x, dtype=float)
    return -y * act.deriv(np.dot(w, x)) * x


def tangent_projection(w, g):
    """(I - w w^T) g for a unit vector w."""
    return g - np.dot(w, g) * w


def _unpack(sample):
    if hasattr(sample, "x"):
        return sample.x, sample.y
    x, y = sample
    return x, y


def spherical_step(w, sample, act, delta, ascent=False):
    """One projected step on the sphere followed by renormalisation."""
    x, y = _unpack(sample)
    g = tangent_projection(w, pointwise_gradient(w, x, y, act))
    new = w + delta * g if ascent else w - delta * g
    nrm = np.linalg.norm(new)
    if nrm < 1e-12:
        raise ZeroNorm("step produced a zero vector")
    return new / nrm


def penalty_gradient(w, beta):
    """Gradient of beta |w|^4."""
    return 4.0 * beta * np.dot(w, w) * w


def penalized_step(w, sample, act, delta, beta, ascent=False):
    """Unconstrained step on L' = L + beta |w|^4. ``ascent`` flips only the data term."""
    x, y = _unpack(sample)
    g = pointwise_gradient(w, x, y, act)
    data = delta * g if ascent else -delta * g
    return w + data - delta * penalty_gradient(w, beta)


def principal_vectors(spec, basis, k0):
    """Cosine and sine vectors of the non-unit modes other than k0 (pairs only)."""
    us, vs = [], []
    for k in spec.nonunit_modes():
        if k == k0 or k == 0 or (spec.N % 2 == 0 and k == spec.N // 2):
            continue
        us.append(basis.u(k))
        vs.append(basis.v(k))
    return us, vs


def initial_weights(N, variant, rng):
    g = rng.standard_normal(N)
    if variant == "spherical":
        return g / np.linalg.norm(g)
    return g / math.sqrt(N)


def run_online(spec, plant, act, cfg, rng, seed=None, backend="auto", w0=None):
    """Online SGD with one fresh labeled sample per step.

    ``rng`` is a numpy Generator (or an int seed). Initialisation is uniform on
    the sphere for the spherical variant and N(0, I/N) for the penalised one.
    ``backend`` picks the compiled loop, the Python loop, or the best available.
    """
    if not isinstance(rng, np.random.Generator):
        seed = rng if seed is None else seed
        rng = np.random.default_rng(rng)
    N = spec.N
    plant.validate(N)
    basis = fourier.build_basis(N)
    u, v = np.ascontiguousarray(basis.u(plant.k0)), np.ascontiguousarray(basis.v(plant.k0))
    us, vs = principal_vectors(spec, basis, plant.k0)
    proj = np.ascontiguousarray(np.array([u, v] + us + vs))
    root = fourier.sqrt_covariance(spec, basis)
    w = initial_weights(N, cfg.variant, rng) if w0 is None else np.array(w0, dtype=float)
    w = np.ascontiguousarray(w)
    steps = cfg.schedule()

    custom = act.kind not in _backend.ACT_CODES or plant.f_kind != "sin"
    kern = _backend.kernels("python" if custom else backend)
    args = (rng, w, np.ascontiguousarray(root.vectors), np.ascontiguousarray(root.coeffs), u, v,
            float(plant.epsilon), bool(plant.use_corrector), _backend.ACT_CODES.get(act.kind, -1),
            cfg.variant == "spherical", float(cfg.learning_rate(N)), float(cfg.beta),
            -1.0 if cfg.ascent else 1.0, steps, proj, int(cfg.loss_window))
    try:
        if kern is _backend._fallback and custom:
            out = kern.run_sgd(*args, act=act, shift=plant.shift)
        else:
            out = kern.run_sgd(*args)
    except FloatingPointError as exc:
        raise ZeroNorm(str(exc)) from exc
    projections, sq_norm, loss = out
    return RunTrace(steps, projections, sq_norm, loss, seed, len(us), final_w=w)


@dataclass
class RecoverySummary:
    steps: np.ndarray
    quantiles: dict  # name -> (R, 3) array of (q25, median, q75)
    frac_recovered: np.ndarray
    eta: float
    n_traces: int

    def median(self, name):
        return self.quantiles[name][:, 1]

    def to_csv(self, path):
        names = list(self.quantiles)
        cols = ["step"] + [f"{n}_{q}" for n in names for q in ("q25", "median", "q75")] + ["frac_recovered"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for i, st in enumerate(self.steps):
                vals = [repr(float(x)) for n in names for x in self.quantiles[n][i]]
                fh.write(f"{int(st)}," + ",".join(vals) + f",{float(self.frac_recovered[i])!r}\n")


def recovery_summary(traces, eta=0.25):
    """Per-snapshot quartiles of |alpha_u|, |alpha_v| and the subspace norms across seeds."""
    traces = list(traces)
    if len(traces) < 1:
        raise ValueError("need at least one trace")
    steps = traces[0].steps
    for tr in traces[1:]:
        if not np.array_equal(tr.steps, steps):
            raise ValueError("traces must share their snapshot steps")
    series = {
        "abs_alpha_u": np.array([np.abs(t.alpha_u) for t in traces]),
        "abs_alpha_v": np.array([np.abs(t.alpha_v) for t in traces]),
        "phase_norm": np.array([t.phase_norm for t in traces]),
        "principal_norm": np.array([t.principal_norm for t in traces]),
    }
    quant = {k: np.quantile(a, [0.25, 0.5, 0.75], axis=0).T for k, a in series.items()}
    frac = np.mean(series["phase_norm"] >= eta, axis=0)
    return RecoverySummary(steps, quant, frac, eta, len(traces))


def _run_seed(job):
    spec, plant, act, cfg, seed, backend = job
    return run_online(spec, plant, act, cfg, seed, seed=seed, backend=backend)


def run_seeds(spec, plant, act, cfg, seeds, jobs=1, backend="auto"):
    """Independent runs, one per seed, optionally in worker processes."""
    work = [(spec, plant, act, cfg, int(s), backend) for s in seeds]
    if jobs <= 1 or len(work) == 1:
        return [_run_seed(j) for j in work]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_seed, work))
