import numpy as np
import pytest

from csmri import signal
from csmri.signal import (
    ComplexImage,
    DimensionError,
    HeaderError,
    KSpace,
    TruncatedPayloadError,
    dft2,
    fft2c,
    idft2,
    ifft2c,
    image_to_stacked,
    read_image,
    read_kspace,
    read_mask_array,
    stacked_to_image,
    write_image,
    write_kspace,
    write_mask_array,
)


def _rand_image(rng, h=8, w=8):
    return ComplexImage(rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w)))


def test_image_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    for i in range(5):
        img = _rand_image(rng, 4 + i, 6)
        path = tmp_path / f"img{i}.img"
        write_image(img, path)
        back = read_image(path)
        np.testing.assert_array_equal(back.data, img.data)


def test_kspace_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    ksp = KSpace(rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5)))
    path = tmp_path / "k.ksp"
    write_kspace(ksp, path)
    back = read_kspace(path)
    np.testing.assert_array_equal(back.data, ksp.data)
    assert back.data.shape == (3, 4, 5)


def test_mask_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    kept = rng.random((6, 7)) < 0.4
    path = tmp_path / "m.msk"
    write_mask_array(kept, path)
    np.testing.assert_array_equal(read_mask_array(path), kept)


def test_image_files_are_deterministic(tmp_path):
    img = _rand_image(np.random.default_rng(3))
    a, b = tmp_path / "a.img", tmp_path / "b.img"
    write_image(img, a)
    write_image(img, b)
    assert a.read_bytes() == b.read_bytes()


def test_wrong_magic_rejected(tmp_path):
    img = _rand_image(np.random.default_rng(4))
    path = tmp_path / "x.img"
    write_image(img, path)
    with pytest.raises(HeaderError):
        read_kspace(path)


def test_truncated_payload_rejected(tmp_path):
    img = _rand_image(np.random.default_rng(5))
    path = tmp_path / "x.img"
    write_image(img, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(TruncatedPayloadError):
        read_image(path)


def test_short_header_rejected(tmp_path):
    path = tmp_path / "x.img"
    path.write_bytes(b"LCSIMG01" + b"\x00" * 10)
    with pytest.raises(HeaderError):
        read_image(path)


def test_trailing_bytes_rejected(tmp_path):
    img = _rand_image(np.random.default_rng(6))
    path = tmp_path / "x.img"
    write_image(img, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(HeaderError):
        read_image(path)


def test_zero_dimension_rejected(tmp_path):
    path = tmp_path / "x.img"
    header = signal.HEADER_STRUCT.pack(signal.MAGIC_IMAGE, 1, 0, 4, 0)
    path.write_bytes(header)
    with pytest.raises(HeaderError):
        read_image(path)


def test_nonfinite_rejected():
    data = np.ones((2, 2), dtype=complex)
    data[0, 0] = np.nan
    with pytest.raises(ValueError):
        ComplexImage(data)


def test_images_are_immutable():
    img = _rand_image(np.random.default_rng(7))
    with pytest.raises(ValueError):
        img.data[0, 0] = 0.0


def test_fft_unitary_and_adjoint():
    rng = np.random.default_rng(8)
    for _ in range(10):
        x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        k = fft2c(x)
        assert np.linalg.norm(k) == pytest.approx(np.linalg.norm(x), rel=1e-12)
        np.testing.assert_allclose(ifft2c(k), x, atol=1e-12)
        # <Fx, y> == <x, F^H y>
        y = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        lhs = np.vdot(y, fft2c(x))
        rhs = np.vdot(ifft2c(y), x)
        assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(x) * np.linalg.norm(y)


def test_dft_matches_explicit_sum():
    # Small explicit centered DFT: X[k] = sum_n x[n] exp(-2 pi i <k,n>) / sqrt(N)
    # with both k and n indexed symmetrically around the center.
    rng = np.random.default_rng(9)
    h, w = 4, 6
    x = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
    freqs_r = np.arange(h) - h // 2
    freqs_c = np.arange(w) - w // 2
    expected = np.zeros((h, w), dtype=complex)
    for a, kr in enumerate(freqs_r):
        for b, kc in enumerate(freqs_c):
            phase = np.exp(
                -2j
                * np.pi
                * (
                    kr * freqs_r[:, None] / h
                    + kc * freqs_c[None, :] / w
                )
            )
            expected[a, b] = np.sum(x * phase) / np.sqrt(h * w)
    np.testing.assert_allclose(fft2c(x), expected, atol=1e-10)


def test_dft2_idft2_roundtrip():
    rng = np.random.default_rng(10)
    img = _rand_image(rng, 6, 4)
    back = idft2(dft2(img))
    np.testing.assert_allclose(back.data, img.data, atol=1e-12)


def test_fft_batch_matches_per_plane():
    rng = np.random.default_rng(11)
    stack = rng.standard_normal((3, 8, 8)) + 1j * rng.standard_normal((3, 8, 8))
    batched = fft2c(stack)
    for i in range(3):
        np.testing.assert_allclose(batched[i], fft2c(stack[i]), atol=1e-13)


def test_stacked_roundtrip():
    rng = np.random.default_rng(12)
    img = _rand_image(rng, 5, 3)
    vec = image_to_stacked(img)
    assert vec.shape == (2 * 5 * 3,)
    assert vec.dtype == np.float64
    back = stacked_to_image(vec, 5, 3)
    np.testing.assert_array_equal(back.data, img.data)


def test_stacked_wrong_length():
    with pytest.raises(ValueError):
        stacked_to_image(np.zeros(7), 2, 2)


def test_kspace_requires_3d():
    with pytest.raises(ValueError):
        KSpace(np.zeros((4, 4), dtype=complex))


def test_image_requires_2d():
    with pytest.raises(ValueError):
        ComplexImage(np.zeros((2, 4, 4), dtype=complex))
