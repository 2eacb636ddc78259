import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from plenogt.extraction import Correspondence
from plenogt.io import (
    CSV_HEADER,
    FormatError,
    read_correspondences,
    read_image,
    read_pfm,
    read_plane_points,
    sidecar_path,
    write_correspondences,
    write_image,
    write_pfm,
)
from plenogt.optics import HexIndex
from plenogt.render import FloatImage, Tag

float32s = st.floats(width=32, allow_nan=True, allow_infinity=True)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6),
                                        st.sampled_from([1, 3])), elements=float32s))
def test_pfm_round_trip_is_bit_exact(tmp_path_factory, data):
    path = tmp_path_factory.mktemp("pfm") / "x.pfm"
    write_pfm(path, data)
    back = read_pfm(path)
    assert back.dtype == np.float32 and back.shape == data.shape
    assert back.tobytes() == data.tobytes()


def test_one_pixel_payload_is_twelve_bytes(tmp_path):
    path = tmp_path / "one.pfm"
    write_pfm(path, np.array([[[1.0, 2.0, 3.0]]], dtype=np.float32))
    raw = path.read_bytes()
    header = b"PF\n1 1\n-1.0\n"
    assert raw.startswith(header)
    assert len(raw) - len(header) == 12
    assert raw[len(header):] == np.array([1, 2, 3], dtype="<f4").tobytes()


def test_rows_are_stored_bottom_to_top(tmp_path):
    path = tmp_path / "rows.pfm"
    data = np.array([[1.0], [2.0]], dtype=np.float32)
    write_pfm(path, data)
    raw = path.read_bytes()
    assert raw.startswith(b"Pf\n1 2\n-1.0\n")
    assert np.frombuffer(raw[-8:], "<f4").tolist() == [2.0, 1.0]


def test_big_endian_files_are_read(tmp_path):
    path = tmp_path / "be.pfm"
    data = np.arange(6, dtype=np.float32).reshape(2, 1, 3)
    path.write_bytes(b"PF\n1 2\n1.0\n" + data[::-1].astype(">f4").tobytes())
    np.testing.assert_array_equal(read_pfm(path), data)


@pytest.mark.parametrize("blob", [
    b"P6\n1 1\n-1.0\n" + bytes(12),
    b"PF\n1\n",
    b"PF\nx 1\n-1.0\n" + bytes(12),
    b"PF\n1 1\n0.0\n" + bytes(12),
    b"PF\n2 2\n-1.0\n" + bytes(47),
    b"",
])
def test_malformed_pfm_raises(tmp_path, blob):
    path = tmp_path / "bad.pfm"
    path.write_bytes(blob)
    with pytest.raises(FormatError):
        read_pfm(path)


def test_image_sidecar_round_trip(tmp_path):
    path = tmp_path / "J.pfm"
    meta = {"seed": 3, "samples": 16, "K": 2, "rig": "abc", "normalized": True}
    img = FloatImage(np.random.default_rng(0).random((3, 4, 3)), Tag.UV_POSITIONAL, meta)
    write_image(path, img)
    assert sidecar_path(path).name == "J.meta.json"
    back = read_image(path)
    assert back.tag == Tag.UV_POSITIONAL and back.meta == meta
    assert back.data.tobytes() == img.data.tobytes()


def test_plane_image_fixed_value_reattached(tmp_path):
    path = tmp_path / "near.pfm"
    data = np.array([[[1.0, 2.0, 0.5], [np.nan, np.nan, 0.0]]], dtype=np.float32)
    img = FloatImage(data, Tag.PLANE_POSITIONAL,
                     {"fixed_axis": "y", "fixed_value": -7.5, "normalized": True})
    write_image(path, img)
    pts = read_plane_points(path)
    np.testing.assert_array_equal(pts[0, 0], [1.0, -7.5, 2.0])
    assert np.isnan(pts[0, 1]).all()


def _corr(k, lens=None, flag=True):
    return Correspondence(k=k, lens=lens, pixel=(1.0 / 3.0, 12345.678901234),
                          world=np.array([0.1, -2.0, -1000.123456789]),
                          board_uv=np.array([2.5, 5.0]), method="direct", filter_passed=flag)


def test_empty_list_writes_header_only(tmp_path):
    path = tmp_path / "gt.csv"
    write_correspondences(path, [])
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"
    assert read_correspondences(path) == []


def test_conventional_rows_have_empty_lens_fields(tmp_path):
    path = tmp_path / "gt.csv"
    write_correspondences(path, [_corr(0, flag=None)])
    row = path.read_text().splitlines()[1].split(",")
    assert row[1:4] == ["", "", ""]
    assert row[4:6] == ["0.333333333", "12345.6789"]
    assert row[-1] == ""


def test_correspondence_round_trip_and_sorting(tmp_path):
    path = tmp_path / "gt.csv"
    corrs = [_corr(5, HexIndex(2, 1)), _corr(1, HexIndex(2, 1), False), _corr(3, HexIndex(-1, 4)),
             _corr(0)]
    write_correspondences(path, corrs)
    back = read_correspondences(path)
    assert [(c.lens, c.k) for c in back] == [(None, 0), (HexIndex(-1, 4), 3), (HexIndex(2, 1), 1),
                                              (HexIndex(2, 1), 5)]
    for c in back:
        # 9 significant digits: half a unit in the last place is at most 5e-9 relative
        assert c.pixel == pytest.approx((1.0 / 3.0, 12345.678901234), rel=5e-9)
        np.testing.assert_allclose(c.world, [0.1, -2.0, -1000.123456789], rtol=5e-9)
    assert back[2].filter_passed is False and back[3].filter_passed is True
    lines = path.read_text().splitlines()
    assert lines[2].split(",")[3] == str(back[1].lens_type)
    # writing the read-back list reproduces the file byte for byte
    again = tmp_path / "again.csv"
    write_correspondences(again, back)
    assert again.read_bytes() == path.read_bytes()


def test_wrong_csv_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(FormatError):
        read_correspondences(path)
