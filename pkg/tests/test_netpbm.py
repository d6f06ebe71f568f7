import numpy as np
import pytest

from tamperloc.netpbm import NetpbmError, read_pgm, read_ppm, write_pgm, write_ppm


def test_round_trip_is_bit_exact(tmp_path):
    rgb = np.random.default_rng(0).integers(0, 256, (7, 5, 3), dtype=np.uint8)
    gray = np.random.default_rng(1).integers(0, 256, (3, 9), dtype=np.uint8)
    write_ppm(tmp_path / "a.ppm", rgb)
    write_pgm(tmp_path / "a.pgm", gray)
    np.testing.assert_array_equal(read_ppm(tmp_path / "a.ppm"), rgb)
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), gray)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n9 3\n255\n")


def test_header_comments_are_skipped(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 # width\n1\n255\n\x07\xff")
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[7, 255]])


@pytest.mark.parametrize("raw", [
    b"P2\n1 1\n255\n0",
    b"P5\n2 2\n65535\n" + b"\0" * 8,
    b"P5\n2 2\n255\n\0",
    b"P5\n2",
    b"P5\nx 2\n255\n\0\0",
])
def test_malformed_files_raise(tmp_path, raw):
    (tmp_path / "bad.pgm").write_bytes(raw)
    with pytest.raises(NetpbmError):
        read_pgm(tmp_path / "bad.pgm")


def test_kind_mismatch_and_bad_arrays(tmp_path):
    write_pgm(tmp_path / "g.pgm", np.zeros((2, 2), np.uint8))
    with pytest.raises(NetpbmError):
        read_ppm(tmp_path / "g.pgm")
    with pytest.raises(NetpbmError):
        write_ppm(tmp_path / "x.ppm", np.zeros((2, 2, 3), np.float64))
    with pytest.raises(NetpbmError):
        write_pgm(tmp_path / "x.pgm", np.zeros((2, 2, 3), np.uint8))
