import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phaselab import surgery
from phaselab.errors import ConstantPatch, DimensionMismatch, PairingExhausted, SymmetryViolation
from phaselab.surgery import ImagePatch

shapes = st.sampled_from([(8, 8), (6, 10), (16, 12), (9, 7)])


def _patch(seed, shape=(16, 16)):
    return np.random.default_rng(seed).standard_normal(shape)


def _nonzero_modes(X):
    m = np.abs(X) > 1e-8 * np.abs(X).max()
    m.flat[0] = False
    return m


def test_image_patch_validation():
    with pytest.raises(DimensionMismatch):
        ImagePatch(np.zeros(16))
    with pytest.raises(DimensionMismatch):
        ImagePatch(np.zeros((3, 8)))
    p = ImagePatch(np.arange(32.0).reshape(4, 8), 1)
    assert p.flat()[:9].tolist() == list(range(9))


def test_idft2_round_trip_and_symmetry():
    x = _patch(0, (8, 12))
    X = surgery.dft2(x)
    assert surgery.symmetry_gap(X) < 1e-12
    assert np.allclose(surgery.idft2(X), x)
    X[1, 2] += 1j
    with pytest.raises(SymmetryViolation):
        surgery.idft2(X)


@settings(max_examples=30, deadline=None)
@given(shapes, st.integers(0, 2 ** 31 - 1))
def test_phase_swap_is_an_involution(shape, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(shape), rng.standard_normal(shape)
    a2, b2 = surgery.phase_swap(*surgery.phase_swap(a, b))
    assert np.allclose(a2, a, atol=1e-9) and np.allclose(b2, b, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(shapes, st.integers(0, 2 ** 31 - 1))
def test_phase_swap_moves_amplitudes_and_phases(shape, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(shape), rng.standard_normal(shape)
    sa, _ = surgery.phase_swap(a, b)
    A, B, S = (np.fft.fftn(v) for v in (a, b, sa))
    assert np.allclose(np.abs(S), np.abs(A), atol=1e-9)
    m = _nonzero_modes(A) & _nonzero_modes(B)
    assert np.allclose(np.exp(1j * (np.angle(S[m]) - np.angle(B[m]))), 1.0, atol=1e-8)
    assert surgery.symmetry_gap(S) < 1e-8


def test_phase_swap_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        surgery.phase_swap(np.zeros((4, 4)), np.zeros((4, 5)))


@settings(max_examples=30, deadline=None)
@given(shapes, st.integers(0, 2 ** 31 - 1))
def test_flatten(shape, seed):
    x = np.random.default_rng(seed).standard_normal(shape) + 3.0
    raw = surgery.flatten_amplitudes(x, renormalize=False)
    F = np.fft.fftn(raw)
    amp = np.abs(F)
    assert abs(F.flat[0]) < 1e-9
    amp.flat[0] = 1.0
    assert np.max(np.abs(amp - 1.0)) < 1e-9
    X = np.fft.fftn(x - x.mean())
    m = _nonzero_modes(X)
    assert np.allclose(np.exp(1j * (np.angle(F[m]) - np.angle(X[m]))), 1.0, atol=1e-8)
    out = surgery.flatten_amplitudes(x)
    assert np.linalg.norm(out) == pytest.approx(np.sqrt(x.size))
    assert np.allclose(surgery.flatten_amplitudes(out), out, atol=1e-10)


def test_flatten_zero_amplitude_modes_get_phase_zero():
    x = np.zeros((8, 8))
    x[0, :] = np.cos(2 * np.pi * np.arange(8) / 8)
    out = surgery.flatten_amplitudes(x, renormalize=False)
    F = np.fft.fftn(out)
    # modes absent from the input come back with amplitude one and phase zero
    assert F[3, 3] == pytest.approx(1.0 + 0j)


@settings(max_examples=30, deadline=None)
@given(shapes, st.integers(0, 2 ** 31 - 1))
def test_transplant(shape, seed):
    rng = np.random.default_rng(seed)
    src, tgt = rng.standard_normal(shape), rng.standard_normal(shape)
    out = surgery.transplant_amplitudes([src], tgt, 0)
    S, T, O = (np.fft.fftn(v - v.mean()) for v in (src, tgt, out))
    assert np.allclose(np.abs(O), np.abs(S), atol=1e-9)
    m = _nonzero_modes(T) & _nonzero_modes(S)
    assert np.allclose(np.exp(1j * (np.angle(O[m]) - np.angle(T[m]))), 1.0, atol=1e-8)
    same = surgery.transplant_amplitudes([tgt], tgt, 0)
    assert np.allclose(same, tgt - tgt.mean(), atol=1e-10)


def test_transplant_errors():
    with pytest.raises(PairingExhausted):
        surgery.transplant_amplitudes([np.zeros((4, 4))], np.zeros((4, 4)), 1)
    with pytest.raises(PairingExhausted):
        surgery.transplant_corpus([np.zeros((4, 4))], [np.zeros((4, 4))] * 2)
    with pytest.raises(DimensionMismatch):
        surgery.transplant_amplitudes([np.zeros((4, 4))], np.zeros((4, 6)), 0)


def test_transplant_matches_class_spectra():
    rng = np.random.default_rng(3)
    k = np.hypot(*np.meshgrid(np.fft.fftfreq(16, 1 / 16), np.fft.fftfreq(16, 1 / 16), indexing="ij"))
    shaped = lambda: np.fft.ifftn(np.fft.fftn(rng.standard_normal((16, 16))) / np.maximum(k, 1)).real
    sources = [shaped() for _ in range(600)]
    targets = [rng.standard_normal((16, 16)) for _ in range(600)]
    moved = surgery.transplant_corpus(sources, targets, rng)
    centred = [s - s.mean() for s in sources]
    ps = surgery.radial_spectrum(centred)
    pt = surgery.radial_spectrum(moved)
    assert np.allclose(pt.mean_sq_amplitude, ps.mean_sq_amplitude, rtol=1e-9, atol=1e-9)
    # pixel covariances of the two classes now estimate the same matrix
    cs = np.cov(np.array([s.ravel() for s in centred]).T)
    ct = np.cov(np.array([m.ravel() for m in moved]).T)
    c0 = np.cov(np.array([t.ravel() for t in targets]).T)
    assert np.linalg.norm(ct - cs) < 0.5 * np.linalg.norm(c0 - cs)


def test_radial_spectrum_of_pure_mode():
    n = np.arange(16)
    x = np.cos(2 * np.pi * (3 * n[:, None] + 4 * n[None, :]) / 16)
    prof = surgery.radial_spectrum([x])
    nz = prof.bins[prof.mean_sq_amplitude > 1e-9]
    assert list(nz) == [5]


def test_radial_spectrum_of_white_noise_is_flat():
    rng = np.random.default_rng(4)
    prof = surgery.radial_spectrum([rng.standard_normal((32, 32)) for _ in range(200)])
    sel = (prof.bins >= 1) & (prof.bins <= 15)
    vals = prof.mean_sq_amplitude[sel]
    # each bin estimates 32*32 with relative error about 1/sqrt(200 * count)
    rel = 4 / np.sqrt(200 * prof.count[sel])
    assert np.all(np.abs(vals / 1024 - 1) < rel)


def test_radial_spectrum_slope_of_inverse_k_field():
    rng = np.random.default_rng(5)
    G = 64
    f = np.fft.fftfreq(G, 1 / G)
    k = np.hypot(*np.meshgrid(f, f, indexing="ij"))
    patches = []
    for _ in range(30):
        amp = np.where(k > 0, 1 / np.maximum(k, 1e-9), 0.0)
        patches.append(np.fft.ifftn(amp * np.fft.fftn(rng.standard_normal((G, G)))).real)
    slope = surgery.radial_spectrum(patches).loglog_slope(2, 24)
    assert abs(slope + 2) < 0.2


def test_spectrum_csv(tmp_path):
    prof = surgery.radial_spectrum([_patch(1, (8, 8))])
    path = tmp_path / "s.csv"
    prof.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k_abs,mean_sq_amplitude,count"
    assert len(lines) == len(prof.bins) + 1


def test_normalize_corpus():
    rng = np.random.default_rng(6)
    corpus = [ImagePatch(rng.standard_normal((8, 8)) * s + m, 0) for s, m in [(1, 0), (5, 3), (0.1, -2)]]
    out = surgery.normalize_corpus(corpus)
    for o in out:
        assert abs(o.pixels.mean()) < 1e-10
        assert np.linalg.norm(o.pixels) == pytest.approx(8.0, abs=1e-10)
    again = surgery.normalize_corpus(out)
    for a, b in zip(out, again):
        assert np.allclose(a.pixels, b.pixels, atol=1e-12)
    with pytest.raises(ConstantPatch):
        surgery.normalize_patch(np.full((4, 4), 2.0))


def test_grayscale():
    rgb = np.stack([np.full((4, 4), v) for v in (0.0, 0.3, 0.9)], axis=-1)
    assert np.allclose(surgery.to_grayscale(rgb), 0.4)
    assert surgery.to_grayscale(np.ones((4, 4))).shape == (4, 4)


def test_pgm_round_trip(tmp_path):
    x = _patch(7, (12, 9))
    path = tmp_path / "a.pgm"
    surgery.write_pgm(path, x)
    back = surgery.read_pgm(path)
    assert back.shape == x.shape
    assert np.max(np.abs(back - x)) <= (x.max() - x.min()) / 65535
    assert path.read_bytes().startswith(b"P5\n9 12\n65535\n")


def test_pgm_8bit_without_sidecar(tmp_path):
    path = tmp_path / "b.pgm"
    path.write_bytes(b"P5\n# comment\n4 4\n255\n" + bytes(range(16)))
    assert np.allclose(surgery.read_pgm(path).ravel(), np.arange(16) / 255)
    bad = tmp_path / "c.pgm"
    bad.write_bytes(b"P2\n4 4\n255\n")
    with pytest.raises(ValueError):
        surgery.read_pgm(bad)


def test_corpus_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    patches = [ImagePatch(rng.standard_normal((8, 8)), i % 2) for i in range(6)]
    surgery.write_corpus(tmp_path / "c", ["lace", "cotton"], patches)
    names, back = surgery.read_corpus(tmp_path / "c")
    assert names == ["lace", "cotton"]
    assert [p.class_label for p in back] == [0, 0, 0, 1, 1, 1]
    assert np.allclose(back[0].pixels, patches[0].pixels, atol=1e-3)
