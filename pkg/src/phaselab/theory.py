"""Analytic predictions: likelihood-ratio coefficients, loss expansion, drifts, ODEs.

Conventions
-----------
Overlaps are alpha_u = w.u, alpha_v = w.v for the phase vectors of mode k0,
alpha_um / alpha_vm for the cosine/sine vectors of the other non-unit modes
and omega_perp for the remaining norm. The likelihood-ratio coefficients are
c_ij = E_P[h_i(v.x / s) h_j(u.x / s)] with s^2 = lambda_k0, and the quartic
form entering the loss is

    Q(alpha) = sum_{i+j=4} c_ij / (i! j!) alpha_v^i alpha_u^j.

Two conventions are offered. ``"derived"`` (default) uses the coefficients and
prefactors that the Monte-Carlo checks in this package confirm. ``"alternate"``
keeps a second set of prefactors (c40 = 2 J4, no 1/2 in front of the loss,
4 beta R^2 penalty gradient, additive principal-to-phase coupling in the
rescaled drift) so the two can be compared side by side.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Blowup
from .special import bessel_j

CONVENTIONS = ("derived", "alternate")


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


@dataclass(frozen=True)
class LikelihoodCoeffs:
    c40: float
    c04: float
    c22: float
    c31: float = 0.0
    c13: float = 0.0
    c00: float = 1.0

    def get(self, i, j):
        """c_ij for any i, j; everything with 1 <= i + j <= 3 vanishes, as does order > 4."""
        if (i, j) == (0, 0):
            return self.c00
        table = {(4, 0): self.c40, (0, 4): self.c04, (2, 2): self.c22, (3, 1): self.c31, (1, 3): self.c13}
        return table.get((i, j), 0.0)


def likelihood_coeffs(epsilon, lambda_k0=1.0, N=None, convention="derived"):
    """Order-four Hermite coefficients of the likelihood ratio of the phase model.

    With E[rho^4] = 2 (lambda N)^2 the result does not depend on lambda or N.
    Derived values: c40 = c04 = J4(4 eps), c22 = -J4(4 eps). The alternate ones
    double c40 and keep c22 = -c40 / 2.
    """
    _check_convention(convention)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    j4 = bessel_j(4, 4 * epsilon)
    if convention == "derived":
        return LikelihoodCoeffs(c40=j4, c04=j4, c22=-j4)
    c40 = 2 * j4
    return LikelihoodCoeffs(c40=c40, c04=c40, c22=-c40 / 2)


@dataclass
class OverlapState:
    alpha_u: float
    alpha_v: float
    alpha_um: np.ndarray = field(default_factory=lambda: np.zeros(0))
    alpha_vm: np.ndarray = field(default_factory=lambda: np.zeros(0))
    omega_perp: float = 0.0

    def __post_init__(self):
        self.alpha_um = np.atleast_1d(np.asarray(self.alpha_um, dtype=float))
        self.alpha_vm = np.atleast_1d(np.asarray(self.alpha_vm, dtype=float))
        if self.alpha_um.shape != self.alpha_vm.shape:
            raise ValueError("alpha_um and alpha_vm must have the same length")

    @property
    def M(self):
        return self.alpha_um.shape[0]

    @property
    def R(self):
        """Squared norm of w, the sum of all squared overlaps."""
        return float(self.alpha_u ** 2 + self.alpha_v ** 2 + np.sum(self.alpha_um ** 2)
                     + np.sum(self.alpha_vm ** 2) + self.omega_perp ** 2)

    @property
    def phase_norm(self):
        return math.hypot(self.alpha_u, self.alpha_v)

    @property
    def principal_norm(self):
        return float(np.sqrt(np.sum(self.alpha_um ** 2) + np.sum(self.alpha_vm ** 2)))

    def to_vector(self):
        return np.concatenate([[self.alpha_u, self.alpha_v], self.alpha_um, self.alpha_vm, [self.omega_perp]])

    @classmethod
    def from_vector(cls, vec, M=None):
        vec = np.asarray(vec, dtype=float)
        M = (vec.shape[0] - 3) // 2 if M is None else M
        return cls(vec[0], vec[1], vec[2 : 2 + M], vec[2 + M : 2 + 2 * M], vec[2 + 2 * M])


@dataclass(frozen=True)
class DriftParams:
    lambda_k0: float
    lambda_m: np.ndarray
    c4: float
    c6: float
    like: LikelihoodCoeffs
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lambda_m", np.atleast_1d(np.asarray(self.lambda_m, dtype=float)))
        if self.lambda_k0 < 0 or np.any(self.lambda_m < 0):
            raise ValueError("eigenvalues must be non-negative")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")


def _quartic(like, au, av):
    """Q and its partial derivatives (dQ/dau, dQ/dav)."""
    q = dq_u = dq_v = 0.0
    for i in range(5):
        j = 4 - i
        c = like.get(i, j) / (math.factorial(i) * math.factorial(j))
        if c == 0.0:
            continue
        q += c * av ** i * au ** j
        if j:
            dq_u += c * j * av ** i * au ** (j - 1)
        if i:
            dq_v += c * i * av ** (i - 1) * au ** j
    return q, dq_u, dq_v


def _loss_prefactor(convention):
    # balanced labels: L = 1 - (E_P sigma - E_P0 sigma) / 2
    return 0.5 if convention == "derived" else 1.0


def _variance_excess(state, params):
    """sigma_Sigma^2 - 1 restricted to the non-unit modes."""
    return ((params.lambda_k0 - 1) * (state.alpha_u ** 2 + state.alpha_v ** 2)
            + float(np.sum((params.lambda_m - 1) * (state.alpha_um ** 2 + state.alpha_vm ** 2))))


def population_loss_leading(state, params, convention="derived", penalty=False):
    """Leading expansion of the population correlation loss.

    L = 1 - s lambda_k0^2 Q(alpha) [c4 + c6 (sigma_Sigma^2 - 1) / 2], with
    s = 1/2 for ``"derived"`` (balanced classes) and s = 1 for ``"alternate"``. With
    ``penalty=True`` the term beta R^2 of the penalised loss is added.
    """
    _check_convention(convention)
    _check_sizes(state, params)
    q, _, _ = _quartic(params.like, state.alpha_u, state.alpha_v)
    bracket = params.c4 + params.c6 * _variance_excess(state, params) / 2
    loss = 1.0 - _loss_prefactor(convention) * params.lambda_k0 ** 2 * q * bracket
    if penalty:
        loss += params.beta * state.R ** 2
    return loss


def _check_sizes(state, params):
    if state.M != params.lambda_m.shape[0]:
        raise ValueError(f"state has {state.M} principal modes, params has {params.lambda_m.shape[0]}")


def population_drift(state, params, convention="derived"):
    """Drift A = grad of the penalised population loss over all overlaps.

    Returned in the order of ``OverlapState.to_vector``. The descent ODE is
    d alpha / dt = -A. In the derived convention the penalty gradient is
    4 beta R alpha (R = |w|^2), the exact gradient of beta |w|^4; the alternate
    form uses 4 beta R^2 alpha. The two agree on the unit sphere.
    """
    _check_convention(convention)
    _check_sizes(state, params)
    lam0 = params.lambda_k0
    s = _loss_prefactor(convention)
    q, dq_u, dq_v = _quartic(params.like, state.alpha_u, state.alpha_v)
    bracket = params.c4 + params.c6 * _variance_excess(state, params) / 2
    R = state.R
    pen = 4 * params.beta * (R if convention == "derived" else R ** 2)
    a_u = -s * lam0 ** 2 * (dq_u * bracket + q * params.c6 * (lam0 - 1) * state.alpha_u) + pen * state.alpha_u
    a_v = -s * lam0 ** 2 * (dq_v * bracket + q * params.c6 * (lam0 - 1) * state.alpha_v) + pen * state.alpha_v
    coupling = -s * lam0 ** 2 * q * params.c6 * (params.lambda_m - 1)
    a_um = coupling * state.alpha_um + pen * state.alpha_um
    a_vm = coupling * state.alpha_vm + pen * state.alpha_vm
    a_w = pen * state.omega_perp
    return np.concatenate([[a_u, a_v], a_um, a_vm, [a_w]])


@dataclass(frozen=True)
class RescaledParams:
    """Extensive regime: lambda_k0 = ell0 sqrt(N), lambda_m = ell_m N.

    Near-isotropic spectra (O(1) eigenvalues) correspond to ell0 = ell_m = 0
    in the large-N limit.
    """

    ell0: float
    ell_m: np.ndarray
    c4: float
    c6: float
    like: LikelihoodCoeffs
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ell_m", np.atleast_1d(np.asarray(self.ell_m, dtype=float)))

    @classmethod
    def from_eigenvalues(cls, N, lambda_k0, lambda_m, c4, c6, like, beta=0.0, regime="extensive"):
        """Scaled eigenvalues for a given regime.

        ``"extensive"`` divides by sqrt(N) and N. ``"near_isotropic"`` takes the
        limit of O(1) eigenvalues, where both scaled values vanish.
        """
        lambda_m = np.atleast_1d(np.asarray(lambda_m, dtype=float))
        if regime == "extensive":
            return cls(lambda_k0 / math.sqrt(N), lambda_m / N, c4, c6, like, beta)
        if regime == "near_isotropic":
            return cls(0.0, np.zeros_like(lambda_m), c4, c6, like, beta)
        raise ValueError(f"unknown regime {regime!r}")


def rescaled_drift(m_state, params, convention="derived"):
    """Large-N drift of m = sqrt(N) alpha (omega_perp unscaled), same order as to_vector.

    Derived form, obtained as N times the gradient of the loss in m:
      A_mu  = -1/2 ell0^2 dQ(m)/dm_u [c4 + c6/2 sum_m ell_m (m_um^2 + m_vm^2)] + 4 beta R m_u
      A_mum = -1/2 ell0^2 c6 ell_m Q(m) m_um + 4 beta R m_um
      A_w   = 4 beta R omega_perp
    The alternate form (ell0 = ell_m = 1 implied) adds the coupling as a
    separate term, + c6/4 sum (m_um^2 + m_vm^2), with positive signal signs.
    R is taken as omega_perp^2, the O(1) part of |w|^2.
    """
    _check_convention(convention)
    m = m_state
    if m.M != params.ell_m.shape[0]:
        raise ValueError("state and params disagree on the number of principal modes")
    q, dq_u, dq_v = _quartic(params.like, m.alpha_u, m.alpha_v)
    R = m.omega_perp ** 2
    principal_sq = m.alpha_um ** 2 + m.alpha_vm ** 2
    if convention == "derived":
        pen = 4 * params.beta * R
        ell2 = params.ell0 ** 2
        bracket = params.c4 + params.c6 / 2 * float(np.sum(params.ell_m * principal_sq))
        a_u = -0.5 * ell2 * dq_u * bracket + pen * m.alpha_u
        a_v = -0.5 * ell2 * dq_v * bracket + pen * m.alpha_v
        coupling = -0.5 * ell2 * params.c6 * params.ell_m * q
    else:
        pen = 4 * params.beta * R ** 2
        on = 1.0 if params.ell0 > 0 else 0.0
        extra = on * params.c6 / 4 * float(np.sum(principal_sq))
        a_u = on * 0.5 * dq_u * params.c4 + extra + pen * m.alpha_u
        a_v = on * 0.5 * dq_v * params.c4 + extra + pen * m.alpha_v
        coupling = on * params.c6 / 2 * q * (params.ell_m > 0)
    a_um = coupling * m.alpha_um + pen * m.alpha_um
    a_vm = coupling * m.alpha_vm + pen * m.alpha_vm
    return np.concatenate([[a_u, a_v], a_um, a_vm, [pen * m.omega_perp]])


def rescaled_drift_finite_n(m_state, params, N, convention="derived"):
    """Finite-N rescaled drift: sqrt(N) A_alpha(m / sqrt(N)) with extensive eigenvalues.

    Converges to ``rescaled_drift`` as N grows (gap O(1/sqrt(N))).
    """
    sq = math.sqrt(N)
    alpha = OverlapState(m_state.alpha_u / sq, m_state.alpha_v / sq, m_state.alpha_um / sq,
                         m_state.alpha_vm / sq, m_state.omega_perp)
    dp = DriftParams(params.ell0 * sq, params.ell_m * N, params.c4, params.c6, params.like, params.beta)
    a = population_drift(alpha, dp, convention)
    out = sq * a
    out[-1] = a[-1]  # omega_perp is not rescaled
    return out


def integrate_ode(drift_fn, m0, dt, steps, sign=-1.0, record_every=1, limit=1e6, on_blowup="raise"):
    """Fixed-step RK4 for dm/dt = sign * A(m). Descent is sign = -1.

    Returns (times, trajectory) sampled every ``record_every`` steps,
    including the initial point. When any component exceeds ``limit`` in
    magnitude, Blowup is raised, or with ``on_blowup="truncate"`` the
    trajectory recorded so far is returned.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    m = np.array(m0, dtype=float)

    def f(y):
        return sign * np.asarray(drift_fn(y), dtype=float)

    times, traj = [0.0], [m.copy()]
    for step in range(1, steps + 1):
        k1 = f(m)
        k2 = f(m + 0.5 * dt * k1)
        k3 = f(m + 0.5 * dt * k2)
        k4 = f(m + dt * k3)
        m = m + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(m)) or np.max(np.abs(m)) > limit:
            if on_blowup == "truncate":
                break
            raise Blowup(f"state left |m| <= {limit:g} at step {step} (t = {step * dt:g})")
        if step % record_every == 0 or step == steps:
            times.append(step * dt)
            traj.append(m.copy())
    return np.array(times), np.array(traj)


def vector_drift(fn, params, M, convention="derived"):
    """Wrap a state-level drift as a function of the flat vector, for integrate_ode."""

    def drift(vec):
        return fn(OverlapState.from_vector(vec, M), params, convention)

    return drift


def landscape_weight(alpha_u, alpha_v, u, v, w_perp):
    r2 = alpha_u ** 2 + alpha_v ** 2
    if r2 > 1 + 1e-12:
        raise ValueError("overlaps must lie in the unit disk")
    return alpha_u * u + alpha_v * v + math.sqrt(max(0.0, 1 - r2)) * w_perp


@dataclass
class Landscape:
    grid: np.ndarray  # (G,) overlap values
    loss_mean: np.ndarray  # (G, G) indexed [i_u, i_v], NaN outside the disk
    loss_stderr: np.ndarray
    n_mc: int

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("alpha_u,alpha_v,loss_mean,loss_stderr,n_mc\n")
            for i, au in enumerate(self.grid):
                for j, av in enumerate(self.grid):
                    if np.isfinite(self.loss_mean[i, j]):
                        fh.write(f"{float(au)!r},{float(av)!r},{float(self.loss_mean[i, j])!r},{float(self.loss_stderr[i, j])!r},{self.n_mc}\n")


def empirical_landscape(spec, plant, act, grid_resolution, n_mc, rng, method="projected", w_perp=None):
    """MC average of the pointwise loss 1 - y sigma(w.x) on a grid of (alpha_u, alpha_v).

    w = alpha_u u + alpha_v v + sqrt(1 - alpha_u^2 - alpha_v^2) w_perp with one
    fixed unit w_perp orthogonal to span(u, v). Each cell uses its own child
    stream of ``rng``.

    ``method="full"`` draws complete N-dimensional inputs. ``"projected"``
    draws only the three projections that w.x depends on: (u.z, v.z) are
    independent N(0, lambda_k0) and w_perp.z is N(0, w_perp^T Sigma w_perp),
    independent of them because u and v are eigenvectors. The planted rotation
    acts on (u.z, v.z) alone, so both methods sample the same distribution.
    """
    from . import fourier
    from .data_model import QUARTER_TURNS, sample_labeled_batch

    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    basis = fourier.build_basis(spec.N)
    u, v = basis.u(plant.k0), basis.v(plant.k0)
    if w_perp is None:
        w_perp = rng.standard_normal(spec.N)
    w_perp = w_perp - (w_perp @ u) * u - (w_perp @ v) * v
    w_perp = w_perp / np.linalg.norm(w_perp)
    lam = spec.eigenvalues[plant.k0]
    perp_sd = math.sqrt(fourier.quadratic_form(spec, w_perp))
    grid = np.linspace(-1.0, 1.0, grid_resolution)
    G = grid_resolution
    mean = np.full((G, G), np.nan)
    se = np.full((G, G), np.nan)
    cell_rngs = rng.spawn(G * G)
    for i, au in enumerate(grid):
        for j, av in enumerate(grid):
            r2 = au * au + av * av
            if r2 > 1 + 1e-12:
                continue
            crng = cell_rngs[i * G + j]
            gamma = math.sqrt(max(0.0, 1 - r2))
            if method == "full":
                batch = sample_labeled_batch(spec, plant, n_mc, crng)
                w = au * u + av * v + gamma * w_perp
                s = batch.x @ w
                y = batch.y
            elif method == "projected":
                y = np.where(crng.random(n_mc) < 0.5, 1, -1)
                g = crng.standard_normal((n_mc, 3))
                a = math.sqrt(lam) * g[:, 0]
                b = math.sqrt(lam) * g[:, 1]
                U = QUARTER_TURNS[crng.integers(0, 4, n_mc)] if plant.use_corrector else 0.0
                theta = np.where(y > 0, plant.shift(np.arctan2(-b, a)) + U, 0.0)
                c, sn = np.cos(theta), np.sin(theta)
                a, b = a * c + b * sn, b * c - a * sn
                s = au * a + av * b + gamma * perp_sd * g[:, 2]
            else:
                raise ValueError(f"unknown method {method!r}")
            vals = 1.0 - y * act(s)
            mean[i, j] = vals.mean()
            se[i, j] = vals.std(ddof=1) / math.sqrt(n_mc)
    return Landscape(grid, mean, se, n_mc)


def empirical_loss(spec, plant, act, w, n_mc, rng, chunk=200_000):
    """Mean and stderr of 1 - y sigma(w.x) over a balanced labeled stream."""
    from .data_model import sample_labeled_batch
    from .stats import RunningMoments

    acc = RunningMoments(())
    done = 0
    while done < n_mc:
        b = min(chunk, n_mc - done)
        batch = sample_labeled_batch(spec, plant, b, rng)
        acc.update(1.0 - batch.y * act(batch.x @ w))
        done += b
    return float(acc.mean), float(acc.stderr)


def fd_loss_gradient(spec, plant, act, state, n_mc, rng, h=1e-3, w_perp=None, chunk=200_000):
    """Central finite differences of the MC population loss in (alpha_u, alpha_v).

    w = alpha_u u + alpha_v v + omega_perp w_perp with a fixed unit w_perp
    orthogonal to span(u, v) and to the principal vectors (the state must have
    no principal overlaps). Both sides of each difference use the same draws,
    so the standard errors are those of the per-sample difference quotients.
    Returns (mean, stderr), each of length 2.
    """
    from . import fourier
    from .data_model import sample_labeled_batch
    from .stats import RunningMoments

    if state.M and (np.any(state.alpha_um) or np.any(state.alpha_vm)):
        raise ValueError("finite differences are only set up for states without principal overlaps")
    basis = fourier.build_basis(spec.N)
    u, v = basis.u(plant.k0), basis.v(plant.k0)
    if w_perp is None:
        w_perp = rng.standard_normal(spec.N)
    w_perp = w_perp - (w_perp @ u) * u - (w_perp @ v) * v
    w_perp /= np.linalg.norm(w_perp)
    w = state.alpha_u * u + state.alpha_v * v + state.omega_perp * w_perp
    acc = RunningMoments((2,))
    done = 0
    while done < n_mc:
        b = min(chunk, n_mc - done)
        batch = sample_labeled_batch(spec, plant, b, rng)
        s = batch.x @ w
        cols = []
        for e in (u, v):
            se = h * (batch.x @ e)
            cols.append(batch.y * (act(s - se) - act(s + se)) / (2 * h))
        acc.update(np.column_stack(cols))
        done += b
    return acc.mean, acc.stderr


def likelihood_coeff_check(spec, plant, n_samples, rng, convention="derived", k_se=3.0, max_order=4):
    """MC of c_ij = E_P[h_i(v.x/s) h_j(u.x/s)] for all i + j <= max_order against the oracle."""
    from .data_model import hermite_pair_mc
    from .stats import Report, z_check

    like = likelihood_coeffs(plant.epsilon, convention=convention)
    pairs = [(i, t - i) for t in range(max_order + 1) for i in range(t + 1)]
    mean, se = hermite_pair_mc(spec, plant, pairs, n_samples, rng)
    report = Report(f"likelihood coefficients ({convention} oracle)")
    for (i, j), m, s in zip(pairs, mean, se):
        report.add(z_check(f"c{i}{j}", m, s, like.get(i, j), k_se))
    return report


def ring_profile(land, r_min=0.6, max_order=8, n_angles=720):
    """Angular profile of the landscape on the unit circle.

    Cells with r_min <= r <= 1 are fitted by weighted least squares with
    a0 + r^4 sum_{k <= max_order} (a_k cos k theta + b_k sin k theta), the
    radial shape of the quartic loss. Returns (angles, fitted loss at r = 1,
    coefficients, residual chi-square per degree of freedom).
    """
    g = land.grid
    AU, AV = np.meshgrid(g, g, indexing="ij")
    r = np.hypot(AU, AV)
    sel = np.isfinite(land.loss_mean) & (r >= r_min) & (r <= 1 + 1e-12)
    th, rr, y = np.arctan2(AV[sel], AU[sel]), r[sel], land.loss_mean[sel]
    wt = 1.0 / land.loss_stderr[sel]

    def design(theta, rad):
        cols = [np.ones_like(theta)]
        for k in range(1, max_order + 1):
            cols += [rad ** 4 * np.cos(k * theta), rad ** 4 * np.sin(k * theta)]
        return np.column_stack(cols)

    X = design(th, rr)
    coef, *_ = np.linalg.lstsq(X * wt[:, None], y * wt, rcond=None)
    resid = (y - X @ coef) * wt
    dof = max(len(y) - X.shape[1], 1)
    angles = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    fitted = design(angles, np.ones_like(angles)) @ coef
    return angles, fitted, coef, float(resid @ resid / dof)


def landscape_minima(land, n_minima=4, **kw):
    """Angles in [0, 2 pi) of the ``n_minima`` deepest local minima of the ring profile."""
    angles, fitted, _, _ = ring_profile(land, **kw)
    left, right = np.roll(fitted, 1), np.roll(fitted, -1)
    idx = np.nonzero((fitted <= left) & (fitted <= right))[0]
    idx = idx[np.argsort(fitted[idx])][:n_minima]
    return np.sort(angles[idx])


def angle_gap(a, b):
    """Unsigned distance between angles on the circle."""
    d = np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2 * np.pi) - np.pi
    return np.abs(d)


def landscape_symmetry(land):
    """Chi-square test that the landscape is invariant under quarter turns.

    Cells are grouped into orbits of (a_u, a_v) -> (-a_v, a_u) (the grid must
    be symmetric about 0). Within each orbit the deviations from the
    inverse-variance weighted mean are summed in squared z units.
    Returns (chi2, dof, p-value).
    """
    from scipy import stats as sps

    L, S = land.loss_mean, land.loss_stderr
    G = L.shape[0]
    if not np.allclose(land.grid, -land.grid[::-1]):
        raise ValueError("grid must be symmetric about zero")
    seen = np.zeros((G, G), dtype=bool)
    chi2, dof = 0.0, 0
    for i in range(G):
        for j in range(G):
            if seen[i, j] or not np.isfinite(L[i, j]):
                continue
            orbit, (a, b) = [], (i, j)
            for _ in range(4):
                if (a, b) not in orbit:
                    orbit.append((a, b))
                a, b = G - 1 - b, a  # (x, y) -> (-y, x) on index level
            for a, b in orbit:
                seen[a, b] = True
            if len(orbit) < 2:
                continue
            vals = np.array([L[a, b] for a, b in orbit])
            ses = np.array([S[a, b] for a, b in orbit])
            w = 1.0 / ses ** 2
            mu = np.sum(w * vals) / np.sum(w)
            chi2 += float(np.sum(w * (vals - mu) ** 2))
            dof += len(orbit) - 1
    return chi2, dof, float(sps.chi2.sf(chi2, dof))
