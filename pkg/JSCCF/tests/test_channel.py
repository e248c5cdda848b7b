"""
Tests for the channel simulators (channel.py)

This module contains tests for:
- SNR conversion and complex packing
- Power normalization
- Noise and fading statistics
- Feedback bypass and stream independence
"""

import numpy as np
import pytest
from scipy import stats

from JSCCF.autodiff.tensor import Tensor
from JSCCF.channel.channel import (
    ChannelConfig,
    ChannelDraw,
    ChannelSession,
    ChannelStreams,
    ComplexSignal,
    awgn_transmit,
    draw_fading,
    feedback_transmit,
    pack_complex,
    power_normalize,
    rayleigh_transmit,
    snr_to_sigma2,
    unpack_complex,
)
from JSCCF.channel.config.config import LINK_FEEDBACK, LINK_FORWARD
from JSCCF.errors import ConfigurationError, DegenerateSignalError, ShapeError


@pytest.fixture
def unit_signal():
    """A batch of 4 rows of 256 unit-power symbols."""
    rng = np.random.default_rng(5)
    return power_normalize(pack_complex(rng.standard_normal((4, 512))))


# Test snr_to_sigma2
@pytest.mark.parametrize("snr_db,expected", [(0.0, 1.0), (10.0, 0.1), (20.0, 0.01), (float("inf"), 0.0)])
def test_snr_to_sigma2(snr_db, expected):
    assert snr_to_sigma2(snr_db) == pytest.approx(expected, rel=1e-12)


# Test pack_complex / unpack_complex
def test_pack_pairs_consecutive_reals():
    signal = pack_complex([1.0, 2.0, 3.0, 4.0])
    assert signal.k == 2
    np.testing.assert_array_equal(signal.symbols, [1 + 2j, 3 + 4j])


def test_unpack_is_exact_inverse():
    values = np.random.default_rng(0).standard_normal((3, 10))
    np.testing.assert_array_equal(unpack_complex(pack_complex(values)).data, values)


def test_pack_odd_length():
    with pytest.raises(ShapeError, match="odd"):
        pack_complex([1.0, 2.0, 3.0])


def test_from_symbols_round_trip():
    signal = ComplexSignal.from_symbols(np.array([[1 - 1j, 0.5j]]))
    np.testing.assert_array_equal(signal.pairs.data, [[1.0, -1.0, 0.0, 0.5]])


# Test power_normalize
def test_power_normalize_single_symbol():
    out = power_normalize(pack_complex([1.0, 1.0]))
    np.testing.assert_allclose(out.symbols, [(1 + 1j) / np.sqrt(2)])


def test_power_normalize_meets_constraint(unit_signal):
    np.testing.assert_allclose(unit_signal.average_power, np.ones(4), atol=1e-12)


def test_power_normalize_zero_row():
    with pytest.raises(DegenerateSignalError):
        power_normalize(pack_complex(np.zeros((2, 4))))


# Test noise statistics
def test_awgn_noise_statistics():
    rows, k = 1, 1_000_000
    y = ComplexSignal.from_symbols(np.zeros((rows, k), dtype=complex))
    sigma2 = snr_to_sigma2(3.0)
    z = awgn_transmit(y, 3.0, np.random.default_rng(1)).symbols.ravel()
    assert np.var(z) == pytest.approx(sigma2, rel=0.01)
    assert abs(np.mean(z.real)) < 4 * np.sqrt(sigma2 / 2 / k)
    assert abs(np.mean(z.imag)) < 4 * np.sqrt(sigma2 / 2 / k)
    # circular symmetry: each real component carries half the variance
    assert np.var(z.real) == pytest.approx(sigma2 / 2, rel=0.01)


def test_awgn_noiseless_sentinel(unit_signal):
    out = awgn_transmit(unit_signal, float("inf"), np.random.default_rng(0))
    assert out is unit_signal


def test_rayleigh_magnitude_distribution():
    h = draw_fading(200_000, 1.0, np.random.default_rng(2))
    result = stats.kstest(np.abs(h), stats.rayleigh(scale=np.sqrt(0.5)).cdf)
    assert result.statistic < 0.01
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, rel=0.02)


def test_rayleigh_transmit_noiseless_is_gain():
    y = ComplexSignal.from_symbols(np.array([[1.0 + 0j, 1j]]))
    draw = ChannelDraw(h=np.array([2.0 - 1j]))
    z = rayleigh_transmit(y, draw, float("inf"), np.random.default_rng(0))
    np.testing.assert_allclose(z.symbols, [[2.0 - 1j, 1.0 + 2j]])


# Test feedback_transmit
def test_noiseless_feedback_is_bypass(unit_signal):
    assert feedback_transmit(unit_signal, None, None) is unit_signal
    assert feedback_transmit(unit_signal, float("inf"), None) is unit_signal


def test_feedback_noise_variance():
    z = ComplexSignal.from_symbols(np.zeros((1, 500_000), dtype=complex))
    w = feedback_transmit(z, 0.0, np.random.default_rng(3)).symbols
    assert np.var(w) == pytest.approx(1.0, rel=0.01)


# Test ChannelConfig
def test_config_rejects_unknown_kind():
    with pytest.raises(ConfigurationError, match="forward_kind"):
        ChannelConfig(forward_kind="rician")


def test_config_rejects_nonpositive_fading_variance():
    with pytest.raises(ConfigurationError):
        ChannelConfig(fading_variance=0.0)


def test_config_at_switches_feedback_kind():
    base = ChannelConfig(forward_snr_db=1.0)
    noisy = base.at(forward_snr_db=4.0, feedback_snr_db=10.0)
    assert noisy.forward_snr_db == 4.0
    assert noisy.feedback_kind == "awgn"
    assert not noisy.feedback_noiseless
    assert noisy.at(feedback_snr_db=float("inf")).feedback_noiseless


# Test ChannelStreams / ChannelSession
def test_streams_are_keyed_and_reproducible():
    streams = ChannelStreams(seed=3, image_indices=(0, 1))
    a = [g.standard_normal(4) for g in streams.rng(1, LINK_FORWARD)]
    b = [g.standard_normal(4) for g in streams.rng(1, LINK_FORWARD)]
    np.testing.assert_array_equal(a[0], b[0])
    assert not np.array_equal(a[0], a[1])


def test_forward_and_feedback_noise_uncorrelated():
    streams = ChannelStreams(seed=0, image_indices=(7,))
    forward = streams.rng(1, LINK_FORWARD)[0].standard_normal(200_000)
    feedback = streams.rng(1, LINK_FEEDBACK)[0].standard_normal(200_000)
    assert abs(np.corrcoef(forward, feedback)[0, 1]) < 0.01


def test_streams_per_image_independent_of_batch():
    alone = ChannelStreams(seed=1, image_indices=(5,)).rng(2, LINK_FORWARD)[0].standard_normal(3)
    batched = ChannelStreams(seed=1, image_indices=(4, 5)).rng(2, LINK_FORWARD)[1].standard_normal(3)
    np.testing.assert_array_equal(alone, batched)


def test_session_fading_shared_across_layers():
    config = ChannelConfig(forward_kind="rayleigh_slow", forward_snr_db=float("inf"))
    session = ChannelSession(config, ChannelStreams(seed=0, image_indices=(0,)), rows=1)
    y = ComplexSignal.from_symbols(np.ones((1, 3), dtype=complex))
    first = session.forward(y, 1).symbols
    second = session.forward(y, 2).symbols
    np.testing.assert_array_equal(first, second)
    np.testing.assert_allclose(first, np.full((1, 3), session.draw.h[0]))


def test_session_records_noise_and_bypasses_feedback():
    config = ChannelConfig(forward_snr_db=0.0)
    session = ChannelSession(config, ChannelStreams(seed=0, image_indices=(0, 1)), rows=2)
    y = ComplexSignal(Tensor(np.zeros((2, 4))))
    z = session.forward(y, 1)
    assert (1, LINK_FORWARD) in session.draw.noise
    np.testing.assert_array_equal(z.pairs.data, session.draw.noise[(1, LINK_FORWARD)])
    assert session.feedback(z, 1) is z
    np.testing.assert_array_equal(session.draw.h, np.ones(2))


def test_session_uses_link_operations(unit_signal):
    config = ChannelConfig(forward_kind="rayleigh_slow", forward_snr_db=2.0, feedback_kind="awgn", feedback_snr_db=6.0)
    streams = ChannelStreams(seed=4, image_indices=(0, 1, 2, 3))
    session = ChannelSession(config, streams, rows=4)
    z = session.forward(unit_signal, 2)
    w = session.feedback(z, 2)

    draw = ChannelDraw(h=session.draw.h.copy())
    expected_z = rayleigh_transmit(unit_signal, draw, 2.0, streams.rng(2, LINK_FORWARD), (2, LINK_FORWARD))
    expected_w = feedback_transmit(expected_z, 6.0, streams.rng(2, LINK_FEEDBACK), draw, (2, LINK_FEEDBACK))
    np.testing.assert_array_equal(z.pairs.data, expected_z.pairs.data)
    np.testing.assert_array_equal(w.pairs.data, expected_w.pairs.data)
    assert set(session.draw.noise) == set(draw.noise) == {(2, LINK_FORWARD), (2, LINK_FEEDBACK)}
    for key in draw.noise:
        np.testing.assert_array_equal(session.draw.noise[key], draw.noise[key])


def test_awgn_transmit_records_noise(unit_signal):
    draw = ChannelDraw(h=np.ones(4))
    z = awgn_transmit(unit_signal, 0.0, np.random.default_rng(2), draw, (1, LINK_FORWARD))
    np.testing.assert_allclose(z.pairs.data - unit_signal.pairs.data, draw.noise[(1, LINK_FORWARD)], atol=1e-12)
    awgn_transmit(unit_signal, float("inf"), np.random.default_rng(2), draw, (2, LINK_FORWARD))
    assert (2, LINK_FORWARD) not in draw.noise
