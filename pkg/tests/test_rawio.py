import numpy as np
import pytest

from sglc.rawio import MAGIC, decode_raw, encode_raw, load_image, read_raw, save_image, write_raw


def test_raw_round_trip_bit_exact(tmp_path, rng):
    img = rng.random((17, 23, 3)).astype(np.float32)
    p = tmp_path / "a.raw"
    write_raw(p, img)
    back = read_raw(p)
    assert back.dtype == np.float32 and np.array_equal(back, img)
    assert load_image(p).tobytes() == img.tobytes()


def test_raw_header_layout(rng):
    img = rng.random((2, 3, 1)).astype(np.float32)
    blob = encode_raw(img)
    assert blob[:8] == MAGIC
    assert np.frombuffer(blob[8:20], "<u4").tolist() == [2, 3, 1]
    assert len(blob) == 20 + 4 * 6


def test_raw_rejects_corruption(rng):
    blob = encode_raw(rng.random((4, 4, 3)).astype(np.float32))
    with pytest.raises(ValueError):
        decode_raw(b"NOTRAW!!" + blob[8:])
    with pytest.raises(ValueError):
        decode_raw(blob[:-4])
    with pytest.raises(ValueError):
        decode_raw(blob + b"\0\0\0\0")


def test_png16_round_trip(tmp_path, rng):
    img = rng.random((19, 21, 3)).astype(np.float32)
    p = tmp_path / "a.png"
    save_image(p, img, bits=16)
    back = load_image(p)
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 1 / 65535 + 1e-7


def test_png8_gray(tmp_path):
    img = np.linspace(0, 1, 64, dtype=np.float32).reshape(8, 8, 1)
    p = tmp_path / "g.png"
    save_image(p, img, bits=8)
    back = load_image(p)
    assert back.shape == (8, 8, 1)
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-6


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.raw")
