"""Short-time Fourier transform and median-filter harmonic/percussive split.

The separation enhances sustained energy with a median filter along time and
transient energy with a median filter along frequency, then splits the
magnitude with soft (power-2) masks, so harmonic + percussive equals the
input magnitude exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal.windows import hann

from .audio_io import AudioClip
from .errors import InputError

N_FFT = 2048
HOP = 512


@dataclass
class Spectrogram:
    """Complex STFT matrix (freq_bins x frames) plus its analysis geometry."""

    values: np.ndarray
    n_fft: int
    hop: int
    window: str
    sample_rate: int

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def freq_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop


@dataclass
class HpssResult:
    """Non-negative harmonic/percussive magnitudes and the shared unit phase.

    The soft masks are complementary by construction, so they sum to exactly
    one everywhere and the two components reconstruct the input magnitude.
    """

    harmonic: np.ndarray
    percussive: np.ndarray
    phase: np.ndarray
    harmonic_mask: np.ndarray
    percussive_mask: np.ndarray


def stft(clip: AudioClip, n_fft: int = N_FFT, hop: int = HOP) -> Spectrogram:
    """Centered, Hann-windowed STFT.

    The input is zero-padded by n_fft/2 on both sides so frame t is centered
    at sample t*hop; frame count is 1 + len//hop.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) == 0:
        raise InputError("cannot take the STFT of an empty clip")
    if n_fft <= 0 or n_fft & (n_fft - 1):
        raise InputError(f"n_fft must be a power of two, got {n_fft}")
    if not 0 < hop <= n_fft:
        raise InputError(f"hop must be in (0, n_fft], got {hop}")

    window = hann(n_fft, sym=False)
    padded = np.pad(x, n_fft // 2)
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop]
    values = np.fft.rfft(frames * window, axis=1).T
    return Spectrogram(values, n_fft, hop, "hann", clip.sample_rate)


def hpss(spec: Spectrogram, kernel_time: int = 75, kernel_freq: int = 75) -> HpssResult:
    """Split a spectrogram into harmonic and percussive magnitudes.

    ``kernel_time`` is the median length along time (per frequency row) and
    ``kernel_freq`` the length along frequency (per time column).  Kernels
    larger than the matrix are effectively clamped by edge replication.
    """
    for name, k in (("kernel_time", kernel_time), ("kernel_freq", kernel_freq)):
        if k <= 0 or k % 2 == 0:
            raise InputError(f"{name} must be odd and positive, got {k}")

    mag = spec.magnitude
    harm_enh = ndimage.median_filter(mag, size=(1, kernel_time), mode="nearest")
    perc_enh = ndimage.median_filter(mag, size=(kernel_freq, 1), mode="nearest")

    h2 = harm_enh * harm_enh
    p2 = perc_enh * perc_enh
    total = h2 + p2
    mask_h = np.full_like(mag, 0.5)
    np.divide(h2, total, out=mask_h, where=total > 0)

    mask_p = 1.0 - mask_h

    nonzero = mag > 0
    phase = np.ones_like(spec.values)
    np.divide(spec.values, np.where(nonzero, mag, 1.0), out=phase, where=nonzero)
    return HpssResult(mag * mask_h, mag * mask_p, phase, mask_h, mask_p)
