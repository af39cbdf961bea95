"""Frame values, cropping, grayscale and the two on-disk formats."""

import numpy as np
import pytest

from vidrom import (
    BoundsError,
    DecodeError,
    Frame,
    FrameSequence,
    InputError,
    Region,
    ShapeError,
    crop,
    decode_netpbm,
    encode_netpbm,
    load_frame_sequence,
    save_frame_directory,
    save_raw_sequence,
    to_grayscale,
    write_netpbm,
)


def ramp_frame(h=4, w=4):
    vals = np.arange(h * w, dtype=float).reshape(h, w) / (h * w - 1.0)
    return Frame(vals)


def quantized_random_frame(rng, h, w, c):
    return Frame(rng.integers(0, 256, size=(h, w, c)).astype(float) / 255.0)


def test_frame_validation():
    with pytest.raises(ShapeError):
        Frame(np.zeros((4, 4, 2)))
    with pytest.raises(InputError):
        Frame(np.full((2, 2), 1.5))
    with pytest.raises(InputError):
        Frame(np.full((2, 2), -0.5))
    with pytest.raises(ShapeError):
        Frame(np.zeros((3, 3)), mask=np.ones((2, 3), bool))
    f = Frame(np.zeros((2, 3)))
    assert f.intensities.shape == (2, 3, 1)
    assert f.mask.shape == (2, 3) and f.mask.all()


def test_frame_is_immutable():
    f = ramp_frame()
    with pytest.raises(ValueError):
        f.intensities[0, 0, 0] = 0.5
    with pytest.raises(ValueError):
        f.mask[0, 0] = False


def test_to_grayscale():
    gray = ramp_frame()
    assert to_grayscale(gray) is gray
    flat = Frame(np.full((2, 2, 3), 0.4))
    out = to_grayscale(flat)
    assert out.channels == 1
    assert np.allclose(out.intensities, 0.4, atol=1e-12)
    red = np.zeros((1, 1, 3))
    red[..., 0] = 1.0
    assert np.isclose(to_grayscale(Frame(red)).intensities[0, 0, 0], 0.299)
    # idempotent on the already-gray result
    again = to_grayscale(out)
    assert again is out


def test_crop_identity_and_corner():
    f = ramp_frame(4, 4)
    whole = crop(f, Region(0, 0, 4, 4))
    assert np.array_equal(whole.intensities, f.intensities)
    corner = crop(f, Region(2, 2, 2, 2))
    expected = np.array([[10.0, 11.0], [14.0, 15.0]]) / 15.0
    assert np.array_equal(corner.intensities[:, :, 0], expected)


def test_crop_bounds_and_composition():
    f = ramp_frame(6, 6)
    with pytest.raises(BoundsError):
        crop(f, Region(3, 0, 4, 2))
    outer = crop(f, Region(1, 2, 4, 3))
    inner = crop(outer, Region(2, 1, 2, 2))
    direct = crop(f, Region(3, 3, 2, 2))
    assert np.array_equal(inner.intensities, direct.intensities)


def test_region_validation():
    with pytest.raises(InputError):
        Region(0, 0, 0, 3)
    with pytest.raises(InputError):
        Region(0.5, 0, 2, 2)
    r = Region(2, 3, 4, 5)
    assert (r.x1, r.y1, r.area) == (6, 8, 20)
    assert r.center == (3.5, 5.0)


def test_netpbm_round_trip_gray_and_rgb():
    rng = np.random.default_rng(11)
    for c in (1, 3):
        f = quantized_random_frame(rng, 7, 5, c)
        back = decode_netpbm(encode_netpbm(f))
        assert back.channels == c
        assert np.array_equal(back.intensities, f.intensities)
    # non-quantized values survive to within one gray level
    smooth = Frame(np.linspace(0.0, 1.0, 12).reshape(3, 4))
    back = decode_netpbm(encode_netpbm(smooth))
    assert np.abs(back.intensities - smooth.intensities).max() <= 1.0 / 255.0


def test_netpbm_header_handling():
    ones = decode_netpbm(b"P6\n# comment line\n2 2\n255\n" + b"\xff" * 12)
    assert np.array_equal(ones.intensities, np.ones((2, 2, 3)))
    with pytest.raises(DecodeError):
        decode_netpbm(b"P4\n2 2\n1\n\x00")
    with pytest.raises(DecodeError):
        decode_netpbm(b"P5\n2 2\n127\n" + b"\x00" * 4)
    with pytest.raises(DecodeError):
        decode_netpbm(b"P5\n2 2\n255\n\x00\x00")  # truncated payload


def test_frame_directory_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    seq = FrameSequence(
        tuple(quantized_random_frame(rng, 4, 6, 1) for _ in range(3)), 30.0
    )
    save_frame_directory(seq, tmp_path / "vid")
    names = sorted(p.name for p in (tmp_path / "vid").iterdir())
    assert names == ["frame_000000.pgm", "frame_000001.pgm", "frame_000002.pgm"]
    back = load_frame_sequence(tmp_path / "vid", fps=30.0)
    assert len(back) == 3 and back.frame_rate == 30.0
    for a, b in zip(seq.frames, back.frames):
        assert np.array_equal(a.intensities, b.intensities)
    with pytest.raises(InputError):
        load_frame_sequence(tmp_path / "vid")  # fps required for directories


def test_frame_directory_errors(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DecodeError):
        load_frame_sequence(empty, fps=10.0)
    bad = tmp_path / "bad"
    bad.mkdir()
    write_netpbm(ramp_frame(4, 4), bad / "frame_000000.pgm")
    (bad / "frame_000001.pgm").write_bytes(b"P5\n4 4\n255\nxx")
    with pytest.raises(DecodeError, match="frame 1"):
        load_frame_sequence(bad, fps=10.0)
    mixed = tmp_path / "mixed"
    mixed.mkdir()
    write_netpbm(ramp_frame(4, 4), mixed / "frame_000000.pgm")
    write_netpbm(ramp_frame(5, 4), mixed / "frame_000001.pgm")
    with pytest.raises(ShapeError):
        load_frame_sequence(mixed, fps=10.0)


def test_raw_container_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    seq = FrameSequence(
        tuple(quantized_random_frame(rng, 3, 4, 3) for _ in range(4)), 240.0
    )
    path = tmp_path / "clip.raw"
    save_raw_sequence(seq, path)
    back = load_frame_sequence(path)
    assert len(back) == 4 and back.frame_rate == 240.0
    for a, b in zip(seq.frames, back.frames):
        assert np.array_equal(a.intensities, b.intensities)
    # explicit fps overrides the header value
    assert load_frame_sequence(path, fps=60.0).frame_rate == 60.0


def test_raw_container_errors(tmp_path):
    path = tmp_path / "clip.raw"
    path.write_bytes(b"\x00" * 8)
    with pytest.raises(DecodeError, match="sidecar"):
        load_frame_sequence(path)
    hdr = tmp_path / "clip.raw.hdr"
    hdr.write_text("width = 2\nheight = 2\nchannels = 1\nfps = 10\ncount = 3\n")
    with pytest.raises(DecodeError, match="payload"):
        load_frame_sequence(path)  # 8 bytes != 2*2*1*3
    hdr.write_text("width = 2\nheight = 2\nfps = 10\ncount = 2\n")
    with pytest.raises(DecodeError, match="channels"):
        load_frame_sequence(path)
    with pytest.raises(DecodeError):
        load_frame_sequence(tmp_path / "nothere.raw")


def test_sequence_shape_consistency():
    with pytest.raises(ShapeError):
        FrameSequence((ramp_frame(4, 4), ramp_frame(4, 5)), 10.0)
    with pytest.raises(InputError):
        FrameSequence((), 10.0)
    seq = FrameSequence((ramp_frame(),), 25.0)
    assert seq.dt == 0.04
