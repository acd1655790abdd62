"""Real DFT conventions, the cosine/sine basis and circulant covariances.

Convention used everywhere: the forward transform carries no prefactor and the
inverse carries 1/N, i.e. ``X_k = sum_n x_n exp(-2 pi i k n / N)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import AsymmetricSpectrum, NegativeEigenvalue, SymmetryViolation

SYMMETRY_TOL = 1e-8
EIGEN_TOL = 1e-10


def _check_length(N):
    if N < 4:
        raise ValueError(f"signal length must be at least 4, got {N}")


def direct_dft(x):
    """O(N^2) transform along the last axis. Works for any N; used as an oracle."""
    x = np.asarray(x)
    N = x.shape[-1]
    n = np.arange(N)
    kernel = np.exp(-2j * np.pi * np.outer(n, n) / N)
    return x @ kernel.T


def direct_idft(X):
    X = np.asarray(X)
    N = X.shape[-1]
    n = np.arange(N)
    kernel = np.exp(2j * np.pi * np.outer(n, n) / N)
    return (X @ kernel.T) / N


def dft(x, method="fft"):
    """Forward DFT of one signal or a batch (last axis).

    ``method="direct"`` selects the quadratic-time sum, which agrees with the
    FFT path to roughly 1e-12 relative error for moderate N.
    """
    x = np.asarray(x, dtype=float)
    _check_length(x.shape[-1])
    if method == "fft":
        return np.fft.fft(x, axis=-1)
    if method == "direct":
        return direct_dft(x)
    raise ValueError(f"unknown method {method!r}")


def conjugate_asymmetry(X):
    """Largest violation of X[k] = conj(X[N-k]) relative to the array scale."""
    X = np.asarray(X)
    mirrored = np.conj(np.roll(X[..., ::-1], 1, axis=-1))
    scale = max(1.0, float(np.max(np.abs(X))) if X.size else 1.0)
    return float(np.max(np.abs(X - mirrored))) / scale


def idft(X, method="fft", tol=SYMMETRY_TOL):
    """Inverse DFT back to a real signal.

    Raises SymmetryViolation when the input cannot be the transform of a real
    signal; the small imaginary residue left by rounding is dropped.
    """
    X = np.asarray(X, dtype=complex)
    _check_length(X.shape[-1])
    gap = conjugate_asymmetry(X)
    if gap > tol:
        raise SymmetryViolation(f"conjugate symmetry broken by {gap:.3e} (tol {tol:g})")
    if method == "fft":
        out = np.fft.ifft(X, axis=-1)
    elif method == "direct":
        out = direct_idft(X)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out.real


def mode_projection(w, k):
    """Projection of w on frequency k under the orthonormal DFT, w_k = X_k / sqrt(N)."""
    w = np.asarray(w, dtype=float)
    N = w.shape[-1]
    n = np.arange(N)
    return (w @ np.exp(-2j * np.pi * k * n / N)) / np.sqrt(N)


@dataclass(frozen=True)
class DftBasis:
    """Orthonormal real basis made of cosine and sine vectors.

    ``cos[k]`` and ``sin[k]`` hold u^k and v^k for k = 1..(N-1)//2 (index 0 is
    unused). ``psi0`` is the constant vector and ``psi_nyquist`` the
    alternating one when N is even.
    """

    N: int
    cos: np.ndarray
    sin: np.ndarray
    psi0: np.ndarray
    psi_nyquist: np.ndarray | None

    @property
    def n_pairs(self):
        return (self.N - 1) // 2

    def u(self, k):
        self._check_pair(k)
        return self.cos[k]

    def v(self, k):
        self._check_pair(k)
        return self.sin[k]

    def _check_pair(self, k):
        if not 1 <= k <= self.n_pairs:
            raise ValueError(f"frequency {k} has no cosine/sine pair for N={self.N}")

    def mode_vectors(self, k):
        """Basis vectors spanning frequency k (folded into 0..N/2)."""
        k = int(k) % self.N
        if k > self.N // 2:
            k = self.N - k
        if k == 0:
            return [self.psi0]
        if self.N % 2 == 0 and k == self.N // 2:
            return [self.psi_nyquist]
        return [self.cos[k], self.sin[k]]

    def matrix(self):
        """All basis vectors as rows: psi0, u^1, v^1, u^2, v^2, ..., psi_nyquist."""
        rows = [self.psi0]
        for k in range(1, self.n_pairs + 1):
            rows += [self.cos[k], self.sin[k]]
        if self.psi_nyquist is not None:
            rows.append(self.psi_nyquist)
        return np.array(rows)


def build_basis(N):
    _check_length(N)
    n = np.arange(N)
    ks = np.arange((N - 1) // 2 + 1)[:, None]
    cos = np.sqrt(2.0 / N) * np.cos(2 * np.pi * ks * n / N)
    sin = np.sqrt(2.0 / N) * np.sin(2 * np.pi * ks * n / N)
    cos[0] = 0.0
    sin[0] = 0.0
    psi0 = np.full(N, 1.0 / np.sqrt(N))
    # unit-norm alternating vector; 1/sqrt(N) is what makes it normalised
    psi_nyq = (-1.0) ** n / np.sqrt(N) if N % 2 == 0 else None
    for a in (cos, sin, psi0):
        a.setflags(write=False)
    if psi_nyq is not None:
        psi_nyq.setflags(write=False)
    return DftBasis(N, cos, sin, psi0, psi_nyq)


@dataclass(frozen=True)
class CirculantSpectrum:
    """Symmetric circulant covariance held by its first row and its eigenvalues."""

    first_row: np.ndarray
    eigenvalues: np.ndarray
    _dense: list = field(default_factory=list, repr=False, compare=False)

    @property
    def N(self):
        return self.first_row.shape[0]

    @property
    def trace(self):
        return float(self.eigenvalues.sum())

    def dense(self):
        """The N x N matrix; cached, meant for small N and for tests."""
        if not self._dense:
            N = self.N
            idx = (np.arange(N)[None, :] - np.arange(N)[:, None]) % N
            self._dense.append(self.first_row[idx])
        return self._dense[0]

    def is_identity(self, tol=1e-12):
        return bool(np.all(np.abs(self.eigenvalues - 1.0) < tol))

    def nonunit_modes(self, tol=1e-12):
        """Frequencies 0..N/2 whose eigenvalue differs from one."""
        half = self.eigenvalues[: self.N // 2 + 1]
        return [int(k) for k in np.nonzero(np.abs(half - 1.0) > tol)[0]]


def _symmetry_gap(a):
    return float(np.max(np.abs(a[1:] - a[1:][::-1]))) if a.shape[0] > 1 else 0.0


def spectrum_from_first_row(c):
    c = np.asarray(c, dtype=float)
    _check_length(c.shape[0])
    if _symmetry_gap(c) > 1e-12 * max(1.0, float(np.max(np.abs(c)))):
        raise AsymmetricSpectrum("first row must satisfy c[t] = c[N-t]")
    lam = np.fft.fft(c).real
    if np.min(lam) < -EIGEN_TOL:
        raise NegativeEigenvalue(f"smallest eigenvalue {np.min(lam):.3e} is negative")
    lam = np.where(lam < 0, 0.0, lam)
    c = c.copy()
    c.setflags(write=False)
    lam.setflags(write=False)
    return CirculantSpectrum(c, lam)


def spectrum_from_eigenvalues(lam):
    lam = np.asarray(lam, dtype=float)
    _check_length(lam.shape[0])
    if _symmetry_gap(lam) > 1e-12 * max(1.0, float(np.max(np.abs(lam)))):
        raise AsymmetricSpectrum("eigenvalues must satisfy lambda[k] = lambda[N-k]")
    if np.min(lam) < -EIGEN_TOL:
        raise NegativeEigenvalue(f"smallest eigenvalue {np.min(lam):.3e} is negative")
    c = np.fft.ifft(lam).real
    lam = lam.copy()
    c.setflags(write=False)
    lam.setflags(write=False)
    return CirculantSpectrum(c, lam)


def spectrum_to_first_row(spec):
    return np.array(spec.first_row)


def isotropic_spectrum(N):
    return spectrum_from_eigenvalues(np.ones(N))


def spectrum_with_modes(N, modes):
    """Identity spectrum except for ``modes`` = {frequency: eigenvalue}.

    Each frequency sets both k and N-k so the result stays symmetric.
    """
    lam = np.ones(N)
    for k, value in modes.items():
        lam[int(k) % N] = value
        lam[(-int(k)) % N] = value
    return spectrum_from_eigenvalues(lam)


# frequencies and eigenvalue exponents of the power-law benchmark setup:
# k0 carries N^(1/2), the companions N^(e/2) for the listed e
POWERLAW_K0_EXPONENT = 1.0
POWERLAW_COMPANIONS = ((15, 1.2), (24, 1.1), (20, 1.3), (9, 1.4), (18, 0.9))


def powerlaw_benchmark_spectrum(N, k0=6, companions=POWERLAW_COMPANIONS, k0_exponent=POWERLAW_K0_EXPONENT):
    modes = {k0: N ** (k0_exponent / 2)}
    for k, e in companions:
        modes[k] = N ** (e / 2)
    return spectrum_with_modes(N, modes)


def powerlaw_spectrum(N, exponent, top_modes):
    """lambda_k = (top_modes / |k|)^exponent for 1 <= |k| <= top_modes, 1 elsewhere.

    |k| is the folded frequency min(k, N - k); DC stays at 1. This mimics the
    1/|k|^a decay of natural images above a flat noise floor.
    """
    _check_length(N)
    if not 1 <= top_modes <= N // 2:
        raise ValueError(f"top_modes must lie in 1..{N // 2}")
    if exponent < 0:
        raise ValueError("exponent must be non-negative")
    k = np.arange(N)
    folded = np.minimum(k, N - k)
    lam = np.ones(N)
    sel = (folded >= 1) & (folded <= top_modes)
    lam[sel] = (top_modes / folded[sel]) ** float(exponent)
    return spectrum_from_eigenvalues(lam)


def quadratic_form(spec, w):
    """w^T Sigma w evaluated in the Fourier domain (batched over leading axes)."""
    w = np.asarray(w, dtype=float)
    W = np.fft.fft(w, axis=-1)
    return (np.abs(W) ** 2 @ spec.eigenvalues) / spec.N


@dataclass(frozen=True)
class SqrtCovariance:
    """Sigma^(1/2) = I + sum_j coeff_j b_j b_j^T over basis vectors with lambda != 1.

    Applying it to a standard normal vector costs O(N * number of modes), which
    is what the SGD loop uses instead of a full FFT.
    """

    vectors: np.ndarray  # (K, N)
    coeffs: np.ndarray  # (K,) sqrt(lambda) - 1

    def apply(self, g):
        g = np.asarray(g, dtype=float)
        if self.vectors.shape[0] == 0:
            return g
        return g + ((g @ self.vectors.T) * self.coeffs) @ self.vectors


def sqrt_covariance(spec, basis=None):
    basis = basis if basis is not None else build_basis(spec.N)
    vecs, coeffs = [], []
    for k in spec.nonunit_modes():
        for b in basis.mode_vectors(k):
            vecs.append(b)
            coeffs.append(np.sqrt(spec.eigenvalues[k]) - 1.0)
    if not vecs:
        return SqrtCovariance(np.zeros((0, spec.N)), np.zeros(0))
    return SqrtCovariance(np.array(vecs), np.array(coeffs))
