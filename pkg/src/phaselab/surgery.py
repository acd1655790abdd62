"""Fourier-domain surgery on signals and image patches.

Phase swap, amplitude flattening, amplitude transplant and radially averaged
power spectra. The array functions work for any number of axes (1-D signals
or 2-D patches); ``ImagePatch`` adds a class label and normalisation record.

Order of operations for the flattened and transplanted variants: subtract the
mean, operate on the non-DC modes, then rescale to the common norm.
"""
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConstantPatch, DimensionMismatch, PairingExhausted, SymmetryViolation

SYMMETRY_TOL = 1e-8
ZERO_AMPLITUDE = 1e-12


@dataclass
class ImagePatch:
    pixels: np.ndarray
    class_label: int = 0
    mean: float = 0.0
    norm: float = float("nan")

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 2:
            raise DimensionMismatch(f"patch must be 2-D, got shape {self.pixels.shape}")
        if min(self.pixels.shape) < 4:
            raise DimensionMismatch(f"patch sides must be at least 4, got {self.pixels.shape}")

    @property
    def shape(self):
        return self.pixels.shape

    def flat(self):
        """Row-major flattening used as network input."""
        return self.pixels.reshape(-1)


@dataclass
class SpectrumProfile:
    bins: np.ndarray
    mean_sq_amplitude: np.ndarray
    count: np.ndarray

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("k_abs,mean_sq_amplitude,count\n")
            for k, m, c in zip(self.bins, self.mean_sq_amplitude, self.count):
                fh.write(f"{int(k)},{float(m)!r},{int(c)}\n")

    def loglog_slope(self, kmin=1, kmax=None):
        """Least-squares slope of log power against log |k| over [kmin, kmax]."""
        kmax = self.bins.max() if kmax is None else kmax
        sel = (self.bins >= kmin) & (self.bins <= kmax) & (self.mean_sq_amplitude > 0)
        slope, _ = np.polyfit(np.log(self.bins[sel]), np.log(self.mean_sq_amplitude[sel]), 1)
        return float(slope)


def _pixels(p):
    return p.pixels if isinstance(p, ImagePatch) else np.asarray(p, dtype=float)


def _like(template, pixels):
    if isinstance(template, ImagePatch):
        return ImagePatch(pixels, template.class_label, template.mean, template.norm)
    return pixels


def mirror(X):
    """X evaluated at the negated frequency on every axis."""
    out = np.flip(X)
    for ax in range(X.ndim):
        out = np.roll(out, 1, axis=ax)
    return out


def symmetry_gap(X):
    X = np.asarray(X)
    scale = max(1.0, float(np.max(np.abs(X))) if X.size else 1.0)
    return float(np.max(np.abs(X - np.conj(mirror(X))))) / scale


def dft2(patch):
    """Unnormalised forward transform over all axes (rows then columns for 2-D)."""
    return np.fft.fftn(_pixels(patch))


def idft2(X, tol=SYMMETRY_TOL):
    """Inverse of ``dft2``; raises SymmetryViolation for non-real spectra."""
    X = np.asarray(X, dtype=complex)
    gap = symmetry_gap(X)
    if gap > tol:
        raise SymmetryViolation(f"conjugate symmetry broken by {gap:.3e} (tol {tol:g})")
    return np.fft.ifftn(X).real


def _phase(X):
    """Unit phasors, with phase 0 where the amplitude vanishes."""
    amp = np.abs(X)
    small = amp <= ZERO_AMPLITUDE * max(float(amp.max()), 1.0)
    return np.where(small, 1.0 + 0j, X / np.where(small, 1.0, amp))


def _rebuild(amplitude, phasor):
    # tiny asymmetries from the phasor division are rounding, not structure
    return np.fft.ifftn(amplitude * phasor).real


def phase_swap(a, b):
    """Return (|A| e^{i arg B}, |B| e^{i arg A}) mapped back to real space."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise DimensionMismatch(f"shapes differ: {pa.shape} vs {pb.shape}")
    A, B = np.fft.fftn(pa), np.fft.fftn(pb)
    return _like(a, _rebuild(np.abs(A), _phase(B))), _like(b, _rebuild(np.abs(B), _phase(A)))


def _rescale(x, norm):
    n = np.linalg.norm(x)
    if n == 0:
        return x
    return x * (norm / n)


def flatten_amplitudes(patch, renormalize=True, norm=None):
    """Set every non-DC Fourier amplitude to one, keeping phases; DC is zeroed.

    With ``renormalize`` the output is rescaled to ``norm`` (default
    sqrt(size)), which makes the operation idempotent.
    """
    x = _pixels(patch)
    X = np.fft.fftn(x - x.mean())
    F = _phase(X)
    F.flat[0] = 0.0
    out = _rebuild(1.0, F)
    if renormalize:
        out = _rescale(out, np.sqrt(out.size) if norm is None else norm)
    return _like(patch, out)


def transplant_amplitudes(source_class, target, pairing, renormalize=False, norm=None):
    """Give ``target`` the non-DC amplitudes of ``source_class[pairing]``.

    Target phases are kept and DC is zeroed. Raises PairingExhausted when the
    paired source does not exist.
    """
    if pairing < 0 or pairing >= len(source_class):
        raise PairingExhausted(f"no source patch at index {pairing} (have {len(source_class)})")
    src, tgt = _pixels(source_class[pairing]), _pixels(target)
    if src.shape != tgt.shape:
        raise DimensionMismatch(f"shapes differ: {src.shape} vs {tgt.shape}")
    S = np.fft.fftn(src - src.mean())
    T = np.fft.fftn(tgt - tgt.mean())
    amp = np.abs(S)
    amp.flat[0] = 0.0
    out = _rebuild(amp, _phase(T))
    if renormalize:
        out = _rescale(out, np.sqrt(out.size) if norm is None else norm)
    return _like(target, out)


def transplant_corpus(sources, targets, rng=None, renormalize=False):
    """Transplant amplitudes sample by sample after a seeded shuffle of the sources."""
    if len(sources) < len(targets):
        raise PairingExhausted(f"{len(targets)} targets but only {len(sources)} sources")
    order = np.arange(len(sources)) if rng is None else rng.permutation(len(sources))
    shuffled = [sources[i] for i in order]
    return [transplant_amplitudes(shuffled, t, i, renormalize=renormalize) for i, t in enumerate(targets)]


def _radial_index(shape):
    grids = np.meshgrid(*[np.fft.fftfreq(n, 1.0 / n) for n in shape], indexing="ij")
    return np.rint(np.sqrt(sum(g * g for g in grids))).astype(int)


def radial_spectrum(patches):
    """Mean squared Fourier amplitude per integer-rounded |k|, averaged over the corpus."""
    arrays = [_pixels(p) for p in patches]
    if not arrays:
        raise ValueError("need at least one patch")
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise DimensionMismatch("patches must share their dimensions")
    power = np.zeros(shape)
    for a in arrays:
        power += np.abs(np.fft.fftn(a)) ** 2
    power /= len(arrays)
    idx = _radial_index(shape).ravel()
    count = np.bincount(idx)
    total = np.bincount(idx, weights=power.ravel())
    keep = count > 0
    bins = np.nonzero(keep)[0]
    return SpectrumProfile(bins, total[keep] / count[keep], count[keep])


def normalize_patch(patch, norm=None, tol=1e-12):
    x = _pixels(patch)
    mean = float(x.mean())
    c = x - mean
    n = float(np.linalg.norm(c))
    if n <= tol * max(1.0, abs(mean)) * np.sqrt(c.size):
        raise ConstantPatch("cannot normalise a constant patch")
    target = np.sqrt(c.size) if norm is None else norm
    out = c * (target / n)
    if isinstance(patch, ImagePatch):
        return ImagePatch(out, patch.class_label, mean, n)
    return out


def normalize_corpus(patches, norm=None):
    """Subtract each patch's mean and rescale to a common Euclidean norm."""
    return [normalize_patch(p, norm) for p in patches]


def to_grayscale(img):
    """Average colour channels (last axis of length 3 or 4) into one plane."""
    img = np.asarray(img, dtype=float)
    if img.ndim == 3:
        return img[..., :3].mean(axis=-1)
    return img


# PGM (binary P5) input and output. Real-valued patches are mapped affinely
# onto 16-bit integers; the (low, high) pair goes into a "<file>.scale" sidecar
# so that reading restores the original range up to quantisation.

def _read_token(fh):
    tok = b""
    while True:
        ch = fh.read(1)
        if not ch:
            break
        if ch == b"#":
            fh.readline()
            continue
        if ch.isspace():
            if tok:
                break
            continue
        tok += ch
    return tok


def read_pgm(path):
    with open(path, "rb") as fh:
        if _read_token(fh) != b"P5":
            raise ValueError(f"{path}: not a binary PGM (P5) file")
        w, h, maxval = int(_read_token(fh)), int(_read_token(fh)), int(_read_token(fh))
        dtype = ">u2" if maxval > 255 else "u1"
        data = np.frombuffer(fh.read(w * h * np.dtype(dtype).itemsize), dtype=dtype)
    if data.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    raw = data.reshape(h, w).astype(float)
    scale = str(path) + ".scale"
    if os.path.exists(scale):
        with open(scale) as fh:
            lo, hi = (float(t) for t in fh.read().split())
        return lo + (hi - lo) * raw / maxval
    return raw / maxval


def write_pgm(path, pixels, maxval=65535):
    x = np.asarray(pixels, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("PGM images must be 2-D")
    lo, hi = float(x.min()), float(x.max())
    span = hi - lo if hi > lo else 1.0
    q = np.rint((x - lo) / span * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(f"P5\n{x.shape[1]} {x.shape[0]}\n{maxval}\n".encode())
        fh.write(q.astype(dtype).tobytes())
    with open(str(path) + ".scale", "w") as fh:
        fh.write(f"{lo!r} {lo + span!r}\n")


def read_corpus(root):
    """Load ``<root>/<class>/*.pgm`` with class order taken from manifest.txt."""
    with open(os.path.join(root, "manifest.txt")) as fh:
        names = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    patches = []
    for label, name in enumerate(names):
        folder = os.path.join(root, name)
        for fname in sorted(os.listdir(folder)):
            if fname.endswith(".pgm"):
                patches.append(ImagePatch(read_pgm(os.path.join(folder, fname)), label))
    return names, patches


def write_corpus(root, names, patches):
    os.makedirs(root, exist_ok=True)
    with open(os.path.join(root, "manifest.txt"), "w") as fh:
        fh.write("\n".join(names) + "\n")
    counters = [0] * len(names)
    for p in patches:
        folder = os.path.join(root, names[p.class_label])
        os.makedirs(folder, exist_ok=True)
        write_pgm(os.path.join(folder, f"{counters[p.class_label]:05d}.pgm"), p.pixels)
        counters[p.class_label] += 1
