import numpy as np
import pytest
from scipy import signal as sp_signal

from eegrank.errors import ConfigurationError, DataError
from eegrank.preprocess import (PreprocessConfig, bandpass, baseline_correct,
                                design_bandpass, downsample, has_artifact,
                                preprocess, rereference, slice_by_events)
from eegrank.segments import ParagraphEvent

from conftest import make_segment, sinusoid_segment


def rms(x):
    return np.sqrt(np.mean(np.square(x)))


class TestRereference:
    def test_all_channel_reference_zeroes_column_means(self, rng):
        seg = make_segment(rng.normal(size=(2, 50)), 100.0)
        out = rereference(seg, seg.channel_labels)
        np.testing.assert_allclose(out.samples.mean(axis=0), 0.0, atol=1e-15)

    def test_single_reference_channel_becomes_zero(self, rng):
        seg = make_segment(rng.normal(size=(3, 40)), 100.0)
        out = rereference(seg, [seg.channel_labels[1]])
        np.testing.assert_array_equal(out.samples[1], 0.0)

    def test_constant_rows_fixture(self):
        seg = make_segment(np.array([[1.0] * 10, [2.0] * 10, [3.0] * 10]), 100.0)
        out = rereference(seg, seg.channel_labels[:2])  # reference mean 1.5
        np.testing.assert_allclose(out.samples[:, 0], [-0.5, 0.5, 1.5])

    def test_unknown_channel(self, rng):
        seg = make_segment(rng.normal(size=(2, 10)), 100.0)
        with pytest.raises(ConfigurationError, match="nope"):
            rereference(seg, ["nope"])

    def test_empty_reference_list(self, rng):
        with pytest.raises(ConfigurationError):
            rereference(make_segment(rng.normal(size=(2, 10)), 100.0), [])

    def test_idempotent(self, rng):
        seg = make_segment(rng.normal(size=(4, 100)), 100.0)
        once = rereference(seg, seg.channel_labels[:2])
        twice = rereference(once, seg.channel_labels[:2])
        np.testing.assert_allclose(twice.samples, once.samples, atol=1e-12)

    def test_preserves_channel_order(self, rng):
        seg = make_segment(rng.normal(size=(3, 10)), 100.0)
        assert rereference(seg, [seg.channel_labels[0]]).channel_labels == seg.channel_labels


class TestBaselineCorrect:
    def test_constant_channel_zeroed(self):
        seg = make_segment(np.full((1, 100), 5.0), 100.0)
        out = baseline_correct(seg, (0.0, 0.5))
        np.testing.assert_allclose(out.samples, 0.0)

    def test_full_window_removes_mean(self, rng):
        seg = make_segment(rng.normal(size=(3, 200)), 100.0)
        out = baseline_correct(seg, (0.0, 2.0))
        bound = 1e-12 * np.abs(seg.samples).max()
        assert np.abs(out.samples.mean(axis=1)).max() < bound

    def test_half_window_fixture(self):
        seg = make_segment(np.array([[1.0, 1.0, 3.0, 3.0]]), 100.0)
        out = baseline_correct(seg, (0.0, 0.02))  # first two samples, mean 1
        np.testing.assert_allclose(out.samples, [[0.0, 0.0, 2.0, 2.0]])

    def test_empty_window_rejected(self, rng):
        seg = make_segment(rng.normal(size=(1, 100)), 100.0)
        with pytest.raises(ConfigurationError):
            baseline_correct(seg, (0.005, 0.006))  # no sample boundary inside

    def test_window_outside_segment_rejected(self, rng):
        seg = make_segment(rng.normal(size=(1, 100)), 100.0)
        with pytest.raises(ConfigurationError):
            baseline_correct(seg, (0.5, 2.0))

    def test_idempotent(self, rng):
        seg = make_segment(rng.normal(size=(2, 300)), 100.0)
        once = baseline_correct(seg, (0.0, 0.2))
        twice = baseline_correct(once, (0.0, 0.2))
        np.testing.assert_allclose(twice.samples, once.samples, atol=1e-12)


class TestBandpass:
    # The assertions compare the measured attenuation against the designed
    # filter's magnitude response (applied twice for zero phase), evaluated
    # before the signal is filtered.

    def _response_power(self, cfg, freq, rate):
        sos = design_bandpass(cfg, rate)
        _, h = sp_signal.sosfreqz(sos, worN=[2 * np.pi * freq / rate])
        return abs(h[0]) ** 2  # forward-backward application squares |H|

    @pytest.mark.parametrize("freq,rel_tol", [(60.0, 0.10), (10.0, 0.05)])
    def test_attenuation_matches_designed_response(self, freq, rel_tol):
        cfg = PreprocessConfig(target_rate_hz=1000.0)
        seg = sinusoid_segment(freq, 20.0, 1000)
        expected = self._response_power(cfg, freq, 1000.0)
        out = bandpass(seg, cfg)
        trim = slice(2000, -2000)
        measured = rms(out.samples[0, trim]) / rms(seg.samples[0, trim])
        assert measured == pytest.approx(expected, rel=rel_tol)

    def test_passband_preserves_amplitude(self):
        cfg = PreprocessConfig(target_rate_hz=1000.0)
        seg = sinusoid_segment(10.0, 20.0, 1000)
        out = bandpass(seg, cfg)
        trim = slice(2000, -2000)
        assert rms(out.samples[0, trim]) == pytest.approx(rms(seg.samples[0, trim]), rel=0.05)

    def test_dc_removed(self):
        cfg = PreprocessConfig(target_rate_hz=1000.0)
        seg = make_segment(np.full((1, 20000), 3.0), 1000.0)
        out = bandpass(seg, cfg)
        assert rms(out.samples[0, 2000:-2000]) <= 1e-3 * 3.0

    def test_cutoff_at_nyquist_rejected(self):
        cfg = PreprocessConfig(lowpass_hz=50.0, target_rate_hz=1000.0)
        seg = sinusoid_segment(10.0, 2.0, 100)  # Nyquist 50 == lowpass
        with pytest.raises(ConfigurationError, match="Nyquist"):
            bandpass(seg, cfg)

    def test_shape_preserved(self, rng):
        seg = make_segment(rng.normal(size=(3, 2000)), 1000.0)
        assert bandpass(seg, PreprocessConfig()).samples.shape == (3, 2000)


class TestDownsample:
    def test_halves_length(self, rng):
        seg = make_segment(rng.normal(size=(2, 4000)), 2000.0)
        out = downsample(seg, 1000.0)
        assert out.n_samples == 2000
        assert out.sample_rate_hz == 1000.0

    def test_identity_rate(self, rng):
        seg = make_segment(rng.normal(size=(1, 100)), 1000.0)
        out = downsample(seg, 1000.0)
        np.testing.assert_array_equal(out.samples, seg.samples)

    def test_matches_direct_sampling(self):
        # Decimating a 10 Hz tone from 2000 Hz equals sampling it at 1000 Hz.
        high = sinusoid_segment(10.0, 4.0, 2000)
        low = sinusoid_segment(10.0, 4.0, 1000)
        out = downsample(high, 1000.0)
        assert np.abs(out.samples - low.samples).max() < 1e-9

    def test_non_integer_ratio_rejected(self, rng):
        seg = make_segment(rng.normal(size=(1, 100)), 1000.0)
        with pytest.raises(ConfigurationError, match="integer"):
            downsample(seg, 300.0)

    def test_duration_drift_below_one_source_sample(self, rng):
        for n in (4000, 4001, 4005):
            seg = make_segment(rng.normal(size=(1, n)), 2000.0)
            out = downsample(seg, 500.0)
            held = out.n_samples * (2000 // 500)  # upsample-by-hold length
            assert abs(held - n) * (1 / 2000.0) <= 4 / 2000.0


class TestPreprocess:
    def test_identityish_config_is_baseline_correction_only(self, rng):
        seg = make_segment(rng.normal(size=(2, 300)), 100.0)
        cfg = PreprocessConfig(reference_channels=(), highpass_hz=None,
                               lowpass_hz=None, baseline_window=(0.0, 0.2),
                               target_rate_hz=100.0)
        out = preprocess(seg, cfg)
        np.testing.assert_array_equal(out.samples,
                                      baseline_correct(seg, (0.0, 0.2)).samples)

    def test_equals_manual_composition(self, rng):
        seg = make_segment(rng.normal(size=(3, 6000)), 2000.0)
        cfg = PreprocessConfig(reference_channels=(seg.channel_labels[2],),
                               target_rate_hz=1000.0)
        manual = downsample(
            bandpass(baseline_correct(rereference(seg, cfg.reference_channels),
                                      cfg.baseline_window), cfg),
            cfg.target_rate_hz)
        out = preprocess(seg, cfg)
        np.testing.assert_array_equal(out.samples, manual.samples)

    def test_default_config_downsamples_to_1000(self, rng):
        seg = make_segment(rng.normal(size=(1, 8000)), 2000.0)
        out = preprocess(seg, PreprocessConfig())
        assert out.sample_rate_hz == 1000.0

    def test_deterministic(self, rng):
        seg = make_segment(rng.normal(size=(2, 4000)), 2000.0)
        cfg = PreprocessConfig()
        a = preprocess(seg, cfg).samples
        b = preprocess(seg, cfg).samples
        assert a.tobytes() == b.tobytes()

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            PreprocessConfig(highpass_hz=50.0, lowpass_hz=0.5)
        with pytest.raises(ConfigurationError):
            PreprocessConfig(lowpass_hz=600.0, target_rate_hz=1000.0)
        with pytest.raises(ConfigurationError):
            PreprocessConfig(highpass_hz=None)  # one-sided disable


class TestSliceByEvents:
    def test_whole_recording(self, rng):
        seg = make_segment(rng.normal(size=(2, 500)), 100.0)
        (out,) = slice_by_events(seg, [ParagraphEvent("p0", 0.0, 5.0)])
        np.testing.assert_array_equal(out.samples, seg.samples)
        assert out.meta.paragraph == "p0"

    def test_two_disjoint_events(self, rng):
        seg = make_segment(rng.normal(size=(1, 3000)), 1000.0)
        parts = slice_by_events(seg, [ParagraphEvent("a", 0.0, 1.0),
                                      ParagraphEvent("b", 1.5, 2.5)])
        assert [p.n_samples for p in parts] == [1000, 1000]
        np.testing.assert_array_equal(parts[1].samples, seg.samples[:, 1500:2500])

    def test_zero_length_event_degenerate(self, rng):
        seg = make_segment(rng.normal(size=(1, 100)), 100.0)
        (out,) = slice_by_events(seg, [ParagraphEvent("p", 0.5, 0.5)])
        assert out.is_degenerate

    def test_out_of_range_event_named(self, rng):
        seg = make_segment(rng.normal(size=(1, 100)), 100.0)
        with pytest.raises(DataError, match="p9"):
            slice_by_events(seg, [ParagraphEvent("p9", 0.0, 2.0)])


class TestArtifacts:
    def test_flags_large_amplitude(self):
        data = np.zeros((2, 100))
        data[1, 42] = 150e-6
        assert has_artifact(make_segment(data, 100.0), 100e-6)

    def test_accepts_small_amplitude(self):
        assert not has_artifact(make_segment(np.full((1, 50), 20e-6), 100.0), 100e-6)
