import math
from random import Random

import pytest
from hypothesis import given, strategies as st

import support
from littermap.config import PipelineConfig
from littermap.errors import (
    BadTiffHeader,
    ExifError,
    MissingDimensions,
    NoExifSegment,
    NoGeotag,
    NoHeading,
    NotJpeg,
    Truncated,
    ZeroDenominator,
)
from littermap.exif import (
    RawExif,
    dms_to_degrees,
    extract_camera_fix,
    hfov_from_focal35,
    normalize_heading,
    parse_jpeg_exif,
)


def test_little_endian_fixture_decodes():
    raw = parse_jpeg_exif(support.camera_jpeg(byte_order="little"))
    assert raw.byte_order == "little"
    assert raw.has_gps_ifd
    assert raw.entries[("gps", 0x0002)] == ((38, 1), (33, 1), (4020, 100))


def test_endianness_round_trip_identical_entries():
    little = parse_jpeg_exif(support.camera_jpeg(byte_order="little"))
    big = parse_jpeg_exif(support.camera_jpeg(byte_order="big"))
    assert big.byte_order == "big"
    assert little.entries == big.entries


def test_no_app1_segment():
    with pytest.raises(NoExifSegment):
        parse_jpeg_exif(support.minimal_jpeg(tiff=None, sof_size=(10, 10)))


def test_not_jpeg():
    with pytest.raises(NotJpeg):
        parse_jpeg_exif(b"GIF89a totally not a jpeg")
    with pytest.raises(NotJpeg):
        parse_jpeg_exif(b"")


def test_bad_tiff_header():
    jpeg = support.minimal_jpeg(tiff=b"XX\x2a\x00\x08\x00\x00\x00")
    with pytest.raises(BadTiffHeader):
        parse_jpeg_exif(jpeg)
    jpeg = support.minimal_jpeg(tiff=b"II\x2b\x00\x08\x00\x00\x00")  # check value 43
    with pytest.raises(BadTiffHeader):
        parse_jpeg_exif(jpeg)


def test_truncated_mid_ifd():
    full = support.camera_jpeg()
    # cut inside the APP1 payload: the declared segment length now overruns
    with pytest.raises(Truncated):
        parse_jpeg_exif(full[:40])


def test_truncated_ifd_offset_beyond_blob():
    tiff = support.build_tiff(gps_ifd=support.gps_entries(
        support.DEFAULT_LAT_DMS, "N", support.DEFAULT_LON_DMS, "W"))
    # corrupt IFD0 offset to point far past the end
    bad = tiff[:4] + (2 ** 24).to_bytes(4, "little") + tiff[8:]
    with pytest.raises(Truncated):
        parse_jpeg_exif(support.minimal_jpeg(tiff=bad))


def test_extract_north_latitude(cfg):
    raw = parse_jpeg_exif(support.camera_jpeg(lat_ref="N"))
    fix = extract_camera_fix(raw, cfg)
    assert fix.position.lat_deg == pytest.approx(38.5611667, abs=1e-7)
    assert fix.position.lon_deg == pytest.approx(-121.4244, abs=1e-7)


def test_extract_south_latitude_sign_symmetry(cfg):
    north = extract_camera_fix(parse_jpeg_exif(support.camera_jpeg(lat_ref="N")), cfg)
    south = extract_camera_fix(parse_jpeg_exif(support.camera_jpeg(lat_ref="S")), cfg)
    assert south.position.lat_deg == -north.position.lat_deg


def test_east_west_sign(cfg):
    east = extract_camera_fix(parse_jpeg_exif(support.camera_jpeg(lon_ref="E")), cfg)
    assert east.position.lon_deg == pytest.approx(121.4244, abs=1e-7)


def test_hfov_from_focal_length(cfg):
    fix = extract_camera_fix(parse_jpeg_exif(support.camera_jpeg(f35=26)), cfg)
    assert fix.hfov_deg == pytest.approx(69.39, abs=0.01)
    assert hfov_from_focal35(26) == pytest.approx(math.degrees(2 * math.atan(36 / 52)), abs=1e-12)


def test_hfov_default_when_no_focal(cfg):
    fix = extract_camera_fix(parse_jpeg_exif(support.camera_jpeg(f35=None)), cfg)
    assert fix.hfov_deg == cfg.hfov_deg


def test_no_gps_ifd(cfg):
    raw = parse_jpeg_exif(support.camera_jpeg(include_gps=False))
    with pytest.raises(NoGeotag):
        extract_camera_fix(raw, cfg)


def test_zero_denominator(cfg):
    raw = parse_jpeg_exif(support.camera_jpeg(lat_dms=((38, 1), (33, 0), (4020, 100))))
    with pytest.raises(ZeroDenominator):
        extract_camera_fix(raw, cfg)


def test_heading_normalized_from_raw(cfg):
    raw = parse_jpeg_exif(support.camera_jpeg(heading=((7235, 10),)))  # 723.5 degrees
    fix = extract_camera_fix(raw, cfg)
    assert fix.heading_deg == pytest.approx(3.5, abs=1e-9)


def test_heading_source_flags(cfg):
    true_north = extract_camera_fix(parse_jpeg_exif(support.camera_jpeg(heading_ref="T")), cfg)
    magnetic = extract_camera_fix(parse_jpeg_exif(support.camera_jpeg(heading_ref="M")), cfg)
    missing_ref = extract_camera_fix(parse_jpeg_exif(support.camera_jpeg(heading_ref=None)), cfg)
    assert true_north.heading_source == "true-north"
    assert magnetic.heading_source == "magnetic"
    assert missing_ref.heading_source == "magnetic"


def test_heading_assumed_and_required(cfg):
    raw = parse_jpeg_exif(support.camera_jpeg(heading=None))
    fix = extract_camera_fix(raw, cfg)
    assert fix.heading_source == "assumed"
    assert fix.heading_deg == cfg.heading_deg
    with pytest.raises(NoHeading):
        extract_camera_fix(raw, cfg.updated(require_heading=True))


def test_sof_dimension_fallback(cfg):
    raw = parse_jpeg_exif(support.camera_jpeg(pixel_dims=None, size=(320, 240)))
    fix = extract_camera_fix(raw, cfg)
    assert (fix.image_w_px, fix.image_h_px) == (320, 240)


def test_missing_dimensions(cfg):
    tiff = support.build_tiff(gps_ifd=support.gps_entries(
        support.DEFAULT_LAT_DMS, "N", support.DEFAULT_LON_DMS, "W"))
    raw = parse_jpeg_exif(support.minimal_jpeg(tiff=tiff))  # no SOF, no pixel tags
    with pytest.raises(MissingDimensions):
        extract_camera_fix(raw, cfg)


def test_captured_at_parsed(cfg):
    fix = extract_camera_fix(
        parse_jpeg_exif(support.camera_jpeg(captured="2026:08:01 10:30:00")), cfg)
    assert fix.captured_at is not None
    assert (fix.captured_at.year, fix.captured_at.hour) == (2026, 10)


def test_pil_agrees_with_parser(cfg):
    for byte_order in ("little", "big"):
        for lat_ref, lon_ref in (("N", "W"), ("S", "E")):
            jpeg = support.camera_jpeg(lat_ref=lat_ref, lon_ref=lon_ref, byte_order=byte_order)
            fix = extract_camera_fix(parse_jpeg_exif(jpeg), cfg)
            ref_lat, ref_lon = support.pil_reference_gps(jpeg)
            assert fix.position.lat_deg == pytest.approx(ref_lat, abs=1e-7)
            assert fix.position.lon_deg == pytest.approx(ref_lon, abs=1e-7)


# --- properties ---

@given(
    d=st.integers(0, 89),
    m=st.integers(0, 59),
    s_num=st.integers(0, 5999),
)
def test_dms_bounded_in_conventional_ranges(d, m, s_num):
    value = dms_to_degrees(d, m, s_num / 100.0)
    assert 0.0 <= value < 90.0


@given(
    d1=st.integers(0, 88), d2=st.integers(0, 88),
    m=st.integers(0, 59), s=st.floats(0, 59.99),
)
def test_dms_monotone_in_degrees(d1, d2, m, s):
    lo, hi = sorted((d1, d2))
    assert dms_to_degrees(lo, m, s) <= dms_to_degrees(hi, m, s)


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_heading_always_normalized(deg):
    h = normalize_heading(deg)
    assert 0.0 <= h < 360.0


@given(st.binary(max_size=300))
def test_parser_total_over_arbitrary_bytes(data):
    try:
        result = parse_jpeg_exif(data)
        assert isinstance(result, RawExif)
    except ExifError:
        pass


def test_fuzz_mutations_of_valid_jpeg():
    # deeper-path fuzz: truncations and byte flips of a real fixture; the
    # extraction step must also stay total over whatever still parses
    rng = Random(20260808)
    base = support.camera_jpeg()
    defaults = PipelineConfig()
    for _ in range(2000):
        blob = bytearray(base)
        for _ in range(rng.randrange(1, 6)):
            blob[rng.randrange(len(blob))] = rng.randrange(256)
        cut = rng.randrange(len(blob) + 1)
        try:
            raw = parse_jpeg_exif(bytes(blob[:cut]))
            extract_camera_fix(raw, defaults)
        except ExifError:
            pass
