import numpy as np
import pytest

from drumgen.audio_io import AudioClip
from drumgen.errors import InputError
from drumgen.spectral import hpss, stft


def _clip(samples, rate=22050):
    return AudioClip(np.asarray(samples, dtype=float), rate)


def test_stft_impulse_gives_flat_first_frame():
    # centered framing puts the t=0 impulse at the window peak, so frame 0 is
    # the window-scaled flat spectrum of a delta: all ones
    spec = stft(_clip(np.r_[1.0, np.zeros(4095)]))
    assert np.allclose(np.abs(spec.values[:, 0]), 1.0, atol=1e-12)


def test_stft_sine_peaks_at_expected_bin():
    t = np.arange(22050) / 22050
    spec = stft(_clip(0.5 * np.sin(2 * np.pi * 1000.0 * t)))
    assert int(np.argmax(np.abs(spec.values[:, 20]))) == 93


def test_stft_zero_signal():
    spec = stft(_clip(np.zeros(8000)))
    assert np.all(spec.values == 0.0)


def test_stft_geometry():
    spec = stft(_clip(np.zeros(22050)))
    assert spec.freq_bins == 1025
    assert spec.n_frames == 1 + 22050 // 512
    assert spec.frame_rate == pytest.approx(22050 / 512)


def test_stft_validation():
    with pytest.raises(InputError):
        stft(_clip(np.zeros(0)))
    with pytest.raises(InputError):
        stft(_clip(np.zeros(100)), n_fft=1000)
    with pytest.raises(InputError):
        stft(_clip(np.zeros(100)), n_fft=1024, hop=2048)


def test_hpss_components_sum_to_magnitude():
    rng = np.random.default_rng(5)
    spec = stft(_clip(rng.uniform(-0.5, 0.5, 30000)))
    out = hpss(spec, 15, 15)
    mag = spec.magnitude
    assert np.all(out.harmonic >= 0)
    assert np.all(out.percussive >= 0)
    assert np.all(out.harmonic_mask + out.percussive_mask == 1.0)
    assert np.all((out.harmonic_mask >= 0) & (out.harmonic_mask <= 1))
    assert np.allclose(out.harmonic + out.percussive, mag, atol=1e-12)
    assert np.allclose(np.abs(out.phase), 1.0)


def test_hpss_zero_spectrogram():
    out = hpss(stft(_clip(np.zeros(8000))), 75, 75)
    assert np.all(out.harmonic == 0.0)
    assert np.all(out.percussive == 0.0)


def test_hpss_constant_spectrogram_splits_evenly():
    # median filtering is idempotent on constants, so both enhanced copies
    # are equal and each soft mask is exactly one half
    spec = stft(_clip(np.zeros(8000)))
    spec.values = np.full_like(spec.values, 0.7 + 0j)
    out = hpss(spec, 11, 11)
    assert np.allclose(out.harmonic, 0.35)
    assert np.allclose(out.percussive, 0.35)


def test_hpss_scaling_invariance():
    rng = np.random.default_rng(6)
    spec = stft(_clip(rng.uniform(-0.5, 0.5, 30000)))
    out1 = hpss(spec, 15, 15)
    spec.values = spec.values * 3.0
    out2 = hpss(spec, 15, 15)
    assert np.allclose(out2.harmonic, 3.0 * out1.harmonic)
    assert np.allclose(out2.percussive, 3.0 * out1.percussive)


def test_hpss_kernel_validation():
    spec = stft(_clip(np.zeros(4000)))
    with pytest.raises(InputError):
        hpss(spec, 74, 75)
    with pytest.raises(InputError):
        hpss(spec, 75, -3)


def test_hpss_kernel_larger_than_matrix_is_clamped():
    spec = stft(_clip(np.ones(3000)))
    out = hpss(spec, 75, 75)  # only 6 frames; must not raise
    assert np.allclose(out.harmonic + out.percussive, spec.magnitude, atol=1e-12)


def _sine_clicks_clip(rate=22050, duration=8.0, period=0.5):
    n = int(duration * rate)
    t = np.arange(n) / rate
    x = 0.3 * np.sin(2 * np.pi * 1000.0 * t)
    click_samples = (np.arange(0.25, duration, period) * rate).astype(int)
    x[click_samples] += 0.9
    return _clip(x, rate), click_samples


def test_hpss_separates_sine_from_clicks():
    clip, click_samples = _sine_clicks_clip()
    spec = stft(clip)
    out = hpss(spec)
    sine_rows = slice(91, 96)
    click_frames = np.unique(np.round(click_samples / 512).astype(int))

    harm_sine = np.sum(out.harmonic[sine_rows, :] ** 2)
    perc_sine = np.sum(out.percussive[sine_rows, :] ** 2)
    assert harm_sine / (harm_sine + perc_sine) >= 0.90

    cols = np.unique(np.clip(click_frames[:, None] + np.arange(-1, 2), 0, spec.n_frames - 1))
    keep = np.ones(spec.freq_bins, dtype=bool)
    keep[sine_rows] = False
    perc_click = np.sum(out.percussive[np.ix_(keep, cols)] ** 2)
    harm_click = np.sum(out.harmonic[np.ix_(keep, cols)] ** 2)
    assert perc_click / (perc_click + harm_click) >= 0.90


def test_hpss_pure_sine_mostly_harmonic():
    rate = 22050
    t = np.arange(6 * rate) / rate
    out = hpss(stft(_clip(0.4 * np.sin(2 * np.pi * 1000.0 * t))))
    total = np.sum(out.harmonic**2) + np.sum(out.percussive**2)
    assert np.sum(out.percussive**2) / total < 0.05
