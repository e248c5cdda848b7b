"""
Tests for the separation baseline (tables.py, baseline.py)

This module contains tests for:
- Capacity arithmetic and the capacity bound
- RD lookups and the mean-image fallback
- Digital schemes and their envelope
- Variable-length separation bandwidth
- RD and FER table ingestion
"""

import math

import numpy as np
import pandas as pd
import pytest

from JSCCF.channel.channel import ChannelConfig
from JSCCF.errors import ConfigurationError, IngestionError, ShapeError
from JSCCF.separation.baseline import (
    attach_fallbacks,
    average_separation_bandwidth_ratio,
    baseline_table,
    capacity_bits,
    capacity_bound_records,
    capacity_bound_psnr,
    digital_max_rate,
    digital_scheme_psnr,
    envelope,
    fading_capacity_bound_psnr,
    fallback_psnr,
    mean_image_reconstruction,
    psnr_at_rate,
    separation_bandwidth_table,
    varlen_separation_bandwidth,
)
from JSCCF.separation.tables import DigitalConfig, RdCurve, load_fer_table, load_rd_curves


@pytest.fixture
def curve():
    return RdCurve(rates=(0.1, 0.5, 1.0), psnrs=(20.0, 25.0, 30.0), codec="bpg", image_id=0, fallback_psnr_db=12.0)


@pytest.fixture
def rd_csv(tmp_path):
    path = tmp_path / "bpg.csv"
    path.write_text(
        "image_id,rate_bpp,psnr_db\n"
        "0,1.0,30\n"
        "0,0.1,20\n"
        "0,0.5,25\n"
        "1,0.2,22\n"
        "1,2.0,35\n"
        "*,0.1,19\n"
        "*,1.0,29\n"
    )
    return path


@pytest.fixture
def fer_csv(tmp_path):
    path = tmp_path / "fer.csv"
    path.write_text(
        "code_rate,bits_per_symbol,snr_db,fer\n"
        "0.5,2,0,0.5\n"
        "0.5,2,10,0.0\n"
        "0.75,4,0,1.0\n"
        "0.75,4,10,0.01\n"
    )
    return path


# Test capacity
def test_capacity_bits_examples():
    assert capacity_bits(0.0, 512) == pytest.approx(512.0)
    assert capacity_bits(10.0, 307) == pytest.approx(307 * math.log2(11.0))
    assert abs(capacity_bits(0.0, 307) / 3072 - 0.1) < 0.0005


def test_capacity_bits_with_gains():
    bits = capacity_bits(0.0, 10, np.array([0.0, 1.0, 3.0]))
    np.testing.assert_allclose(bits, [0.0, 10.0, 20.0])
    with pytest.raises(ValueError):
        capacity_bits(0.0, -1)


def test_capacity_bound_monotone_in_snr(curve):
    values = [capacity_bound_psnr(s, 512, 3072, curve) for s in range(-5, 25, 5)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_capacity_bound_uses_fallback_below_curve(curve):
    assert capacity_bound_psnr(-20.0, 16, 3072, curve) == 12.0


# Test RD lookup and fallback
def test_psnr_at_rate_knots(curve):
    assert psnr_at_rate(curve, 0.5) == 25.0
    assert psnr_at_rate(curve, 0.7) == 25.0
    assert psnr_at_rate(curve, 5.0) == 30.0
    assert psnr_at_rate(curve, 0.05) is None


def test_psnr_at_rate_empty_curve():
    with pytest.raises(ValueError):
        psnr_at_rate(RdCurve(rates=(), psnrs=()), 1.0)


def test_fallback_checkerboard():
    image = np.zeros((4, 4, 1))
    image[::2, ::2] = 255.0
    image[1::2, 1::2] = 255.0
    assert fallback_psnr(image) == pytest.approx(20 * math.log10(2), abs=1e-4)


def test_fallback_uniform_image_is_perfect():
    assert fallback_psnr(np.full((4, 4, 3), 77.0)) == float("inf")


def test_mean_image_reconstruction_per_channel():
    rng = np.random.default_rng(0)
    images = rng.uniform(0, 255, size=(2, 4, 6, 3))
    recon = mean_image_reconstruction(images)
    for n in range(2):
        for c in range(3):
            np.testing.assert_allclose(recon[n, :, :, c], images[n, :, :, c].mean())
    with pytest.raises(ShapeError):
        mean_image_reconstruction(np.zeros((4, 4)))


def test_attach_fallbacks(rd_csv):
    images = np.zeros((2, 4, 4, 1))
    images[1, ::2, ::2] = 1.0
    images[1, 1::2, 1::2] = 1.0
    curves = attach_fallbacks(load_rd_curves(rd_csv), images)
    assert curves[0].fallback_psnr_db == float("inf")
    assert curves[1].fallback_psnr_db == pytest.approx(20 * math.log10(2), abs=1e-4)
    assert curves["*"].fallback_psnr_db == pytest.approx(curves[1].fallback_psnr_db)


def test_missing_fallback_raises():
    bare = RdCurve(rates=(1.0,), psnrs=(30.0,))
    with pytest.raises(ConfigurationError, match="fallback"):
        capacity_bound_psnr(-10.0, 1, 3072, bare)


# Test digital schemes
def test_digital_max_rate():
    assert digital_max_rate(DigitalConfig(1 / 3, 2), 512, 3072) == pytest.approx(1 / 9)


def test_digital_error_free_and_always_failing(curve):
    perfect = DigitalConfig(0.5, 2, fer={5.0: 0.0})
    broken = DigitalConfig(0.5, 2, fer={5.0: 1.0})
    k, n = 1536, 3072  # R_max = 0.5 bpp
    assert digital_scheme_psnr(perfect, 5.0, k, n, curve) == 25.0
    assert digital_scheme_psnr(broken, 5.0, k, n, curve) == 12.0


def test_digital_expected_psnr(curve):
    half = DigitalConfig(0.5, 2, fer={5.0: 0.25})
    assert digital_scheme_psnr(half, 5.0, 1536, 3072, curve) == pytest.approx(0.75 * 25.0 + 0.25 * 12.0)


def test_digital_missing_fer(curve):
    with pytest.raises(ConfigurationError, match="no frame error rate"):
        digital_scheme_psnr(DigitalConfig(0.5, 2, fer={}), 5.0, 1536, 3072, curve)


@pytest.mark.parametrize("kwargs", [
    dict(code_rate=0.0, bits_per_symbol=2), dict(code_rate=0.5, bits_per_symbol=0),
    dict(code_rate=0.5, bits_per_symbol=2, fer={0.0: 1.5}),
])
def test_digital_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        DigitalConfig(**kwargs)


def test_envelope_dominates_and_breaks_ties():
    result = envelope({"a": [1.0, 5.0, 3.0], "b": [2.0, 4.0, 3.0]})
    np.testing.assert_array_equal(result.psnr_db, [2.0, 5.0, 3.0])
    assert result.best == ["b", "a", "a"]


# Test variable-length separation
def test_varlen_separation_at_zero_db(curve):
    result = varlen_separation_bandwidth(24.0, 0.0, curve, 3072)
    assert result.reachable
    assert result.bits == pytest.approx(0.5 * 3072)
    assert result.channel_uses == pytest.approx(result.bits)


def test_varlen_separation_unreachable(curve):
    result = varlen_separation_bandwidth(40.0, 0.0, curve, 3072)
    assert not result.reachable
    assert math.isnan(result.channel_uses)


def test_average_separation_bandwidth_counts_unreachable(curve):
    low = RdCurve(rates=(0.1,), psnrs=(15.0,), image_id=1)
    ratio, unreachable = average_separation_bandwidth_ratio(20.0, 0.0, [curve, low], 3072)
    assert unreachable == 1
    assert ratio == pytest.approx(0.1)


def test_separation_bandwidth_table(curve):
    table = separation_bandwidth_table([0.0, 10.0], [24.0, 40.0], {0: curve}, 3072)
    assert list(table.columns) == ["snr_db", "target_db", "mean_bandwidth_ratio", "unreachable"]
    assert table[["snr_db", "target_db"]].values.tolist() == [[0.0, 24.0], [0.0, 40.0], [10.0, 24.0], [10.0, 40.0]]
    assert table["mean_bandwidth_ratio"].iloc[0] == pytest.approx(0.5)
    assert table["mean_bandwidth_ratio"].iloc[2] == pytest.approx(0.5 / math.log2(11.0))
    assert table["unreachable"].tolist() == [0, 1, 0, 1]
    assert table["mean_bandwidth_ratio"].isna().tolist() == [False, True, False, True]


# Test fading bound
def test_fading_bound_is_seeded(rd_csv):
    curves = attach_fallbacks(load_rd_curves(rd_csv), np.full((2, 4, 4, 1), 0.5))
    channel = ChannelConfig(forward_kind="rayleigh_slow", seed=3)
    first = fading_capacity_bound_psnr(5.0, 256, 3072, curves, channel, [0, 1, 2])
    second = fading_capacity_bound_psnr(5.0, 256, 3072, curves, channel, [0, 1, 2])
    assert first == second


def test_capacity_bound_records_on_awgn(curve):
    frame = capacity_bound_records(0.0, 1536, 3072, {0: curve}, [0], realizations=3)
    assert frame[["image_id", "realization"]].values.tolist() == [[0, 0]]
    assert frame["psnr_db"].iloc[0] == pytest.approx(capacity_bound_psnr(0.0, 1536, 3072, curve))


def test_capacity_bound_records_follow_fading_gains(rd_csv):
    images = np.random.default_rng(0).uniform(0.0, 1.0, size=(3, 4, 4, 1))
    curves = attach_fallbacks(load_rd_curves(rd_csv), images)
    channel = ChannelConfig(forward_kind="rayleigh_slow", seed=3)
    frame = capacity_bound_records(5.0, 256, 3072, curves, [0, 1, 2], channel=channel, realizations=2)
    assert len(frame) == 6
    for r in (0, 1):
        rows = frame[frame["realization"] == r]
        expected = fading_capacity_bound_psnr(5.0, 256, 3072, curves, channel, [0, 1, 2], realization=r)
        assert rows["psnr_db"].mean() == pytest.approx(expected)


# Test table ingestion
def test_load_rd_curves_sorts_and_keys(rd_csv):
    curves = load_rd_curves(rd_csv)
    assert list(curves) == [0, 1, "*"]
    assert curves[0].rates == (0.1, 0.5, 1.0)
    assert curves[0].codec == "bpg"


def test_load_rd_curves_rejects_non_monotone(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("image_id,rate_bpp,psnr_db\n0,0.1,30\n0,0.2,20\n")
    with pytest.raises(IngestionError, match="must not decrease"):
        load_rd_curves(path)


def test_load_rd_curves_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("image_id,rate\n0,0.1\n")
    with pytest.raises(IngestionError, match="missing columns"):
        load_rd_curves(path)


def test_load_rd_curves_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_rd_curves(tmp_path / "absent.csv")


def test_load_fer_table(fer_csv):
    configs = load_fer_table(fer_csv)
    assert [c.name for c in configs] == ["r0.5:m2", "r0.75:m4"]
    assert configs[1].fer_at(0.0) == 1.0


# Test baseline_table
def test_baseline_table_schemes(rd_csv, fer_csv):
    images = np.random.default_rng(0).uniform(0.0, 1.0, size=(2, 4, 4, 1))
    curves = attach_fallbacks(load_rd_curves(rd_csv), images)
    channel = ChannelConfig(forward_kind="rayleigh_slow")
    frame = baseline_table([0.0, 10.0], 512, 3072, curves, load_fer_table(fer_csv), channel=channel, image_ids=[0, 1])
    assert list(frame.columns) == ["snr_db", "scheme", "mean_psnr_db"]
    assert set(frame["scheme"]) == {
        "capacity:bpg", "digital:bpg:r0.5:m2", "digital:bpg:r0.75:m4", "envelope:bpg", "fading_capacity:bpg",
    }
    pivot = frame.pivot(index="snr_db", columns="scheme", values="mean_psnr_db")
    digital = pivot[["digital:bpg:r0.5:m2", "digital:bpg:r0.75:m4"]].max(axis=1)
    pd.testing.assert_series_equal(pivot["envelope:bpg"], digital, check_names=False)
    assert (pivot["capacity:bpg"] >= pivot["envelope:bpg"]).all()
