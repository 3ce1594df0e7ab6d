"""Onset detection, tempo estimation, and 16th-note grid fitting.

Tempo is never estimated from the song itself: the strongest onsets (98th
percentile of onset strengths, nearest-rank) are rendered as a click track
first, and the click track's own onset envelope is autocorrelated.  That
keeps weak or sustained material from diluting the periodicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import GridUndefined
from .percentile import nearest_rank
from . import spectral

# peak picking (pinned here; see module docs)
PEAK_RADIUS_FRAMES = 3
PEAK_DELTA_FACTOR = 0.07
PEAK_DELTA_PERCENTILE = 95
MIN_ONSET_GAP_S = 0.030

STRONG_PERCENTILE = 98

CLICK_FREQ_HZ = 1000.0
CLICK_DURATION_S = 0.030
CLICK_DECAY_S = 0.010
CLICK_AMP = 0.8

BPM_MIN = 30.0
BPM_MAX = 300.0
PRIOR_BPM = 120.0
PRIOR_OCTAVES = 1.0

FOLD_LOW_BPM = 70.0
FOLD_HIGH_BPM = 180.0


@dataclass
class OnsetEvent:
    """One detected percussive onset."""

    frame: int
    time: float  # frame * hop / sample_rate
    strength: float
    spectrum: np.ndarray  # percussive magnitudes averaged over frame +/- 1


@dataclass
class TempoEstimate:
    bpm: float
    rounded_bpm: int
    is_fallback: bool = False


@dataclass
class RhythmGrid:
    """16th-note lattice: points at origin + k*step for k in [0, n_steps)."""

    origin: float
    step: float
    n_steps: int


def onset_envelope(percussive: np.ndarray) -> np.ndarray:
    """Per-frame spectral flux: positive magnitude increase summed over bins."""
    mag = np.asarray(percussive, dtype=np.float64)
    env = np.zeros(mag.shape[1])
    if mag.shape[1] > 1:
        env[1:] = np.maximum(mag[:, 1:] - mag[:, :-1], 0.0).sum(axis=0)
    return env


def detect_onsets(
    envelope: np.ndarray,
    percussive: np.ndarray,
    sample_rate: int,
    hop: int,
) -> list[OnsetEvent]:
    """Pick local envelope maxima as onsets.

    A frame qualifies when it is the maximum within +/-3 frames, strictly
    exceeds the local mean by 0.07x the envelope's 95th percentile, and lies
    at least 30 ms after the previously accepted onset.  Returns every onset;
    ``strong_onsets`` filters the 98th-percentile subset.
    """
    env = np.asarray(envelope, dtype=np.float64)
    n = len(env)
    if n == 0 or env.max() <= 0.0:
        return []

    delta = PEAK_DELTA_FACTOR * nearest_rank(env, PEAK_DELTA_PERCENTILE)
    min_gap = math.ceil(MIN_ONSET_GAP_S * sample_rate / hop)
    r = PEAK_RADIUS_FRAMES

    events: list[OnsetEvent] = []
    last = -n
    for t in range(n):
        local = env[max(0, t - r) : t + r + 1]
        if env[t] < local.max():
            continue
        if not env[t] > local.mean() + delta:
            continue
        if t - last < min_gap:
            continue
        cols = percussive[:, max(0, t - 1) : t + 2]
        events.append(
            OnsetEvent(
                frame=t,
                time=t * hop / sample_rate,
                strength=float(env[t]),
                spectrum=cols.mean(axis=1),
            )
        )
        last = t
    return events


def strong_onsets(events: list[OnsetEvent]) -> list[OnsetEvent]:
    """Subset with strength at or above the 98th percentile of all onsets."""
    if not events:
        return []
    threshold = nearest_rank([e.strength for e in events], STRONG_PERCENTILE)
    return [e for e in events if e.strength >= threshold]


def synthesize_clicks(times, duration: float, sample_rate: int) -> AudioClip:
    """Silence with a decaying 1 kHz burst added at each onset time."""
    out = np.zeros(int(round(duration * sample_rate)))
    t = np.arange(int(round(CLICK_DURATION_S * sample_rate))) / sample_rate
    click = CLICK_AMP * np.sin(2.0 * np.pi * CLICK_FREQ_HZ * t) * np.exp(-t / CLICK_DECAY_S)
    for time in times:
        if not 0.0 <= time < duration:
            continue
        i = int(round(time * sample_rate))
        j = min(i + len(click), len(out))
        out[i:j] += click[: j - i]
    return AudioClip(np.clip(out, -1.0, 1.0), sample_rate, "<clicks>")


def _parabolic_vertex(y_prev: float, y_mid: float, y_next: float) -> float:
    """Sub-sample offset of the vertex through three equally spaced points."""
    denom = y_prev - 2.0 * y_mid + y_next
    if denom == 0.0:
        return 0.0
    return float(np.clip(0.5 * (y_prev - y_next) / denom, -0.5, 0.5))


def estimate_tempo(clicks: AudioClip) -> TempoEstimate:
    """Autocorrelation tempo of a click track with a log-normal 120 BPM prior.

    The best prior-weighted lag is refined twice: parabolic interpolation at
    the base lag, then again at the farthest clean multiple of that lag, so
    the period is accurate enough to keep a 60-second grid from drifting.
    Degenerate input falls back to the prior center, flagged.
    """
    spec = spectral.stft(clicks)
    env = onset_envelope(spec.magnitude)
    n = len(env)
    fps = spec.frame_rate
    if n < 4 or env.max() <= 0.0:
        return TempoEstimate(PRIOR_BPM, round(PRIOR_BPM), is_fallback=True)

    env = env - env.mean()
    ac = np.correlate(env, env, mode="full")[n - 1 :]
    ac = ac / (n - np.arange(n))  # unbiased: remove the linear overlap taper

    lag_min = max(2, math.ceil(60.0 * fps / BPM_MAX))
    lag_max = min(n - 2, math.floor(60.0 * fps / BPM_MIN))
    if lag_min > lag_max:
        return TempoEstimate(PRIOR_BPM, round(PRIOR_BPM), is_fallback=True)

    lags = np.arange(lag_min, lag_max + 1)
    weights = np.exp(-0.5 * (np.log2((60.0 * fps / lags) / PRIOR_BPM) / PRIOR_OCTAVES) ** 2)
    # A lag with energy at half its period is the subharmonic of a faster
    # pulse; discount it so the beat beats its own half tempo.
    half = ac[np.maximum(np.round(lags / 2).astype(int), 1)]
    scores = weights * (ac[lags] - 0.5 * np.maximum(half, 0.0))
    best = int(lags[np.argmax(scores)])
    if scores.max() <= 0.0 or ac[best] <= 0.0:
        return TempoEstimate(PRIOR_BPM, round(PRIOR_BPM), is_fallback=True)

    lag = best + _parabolic_vertex(ac[best - 1], ac[best], ac[best + 1])

    # Picking the m-th multiple of the beat lag divides the lag quantization
    # error by m. Search a half-period band around the predicted multiple.
    m = int((n // 2) / lag)
    if m >= 2:
        center = m * lag
        lo = max(lag_min, int(center - lag / 2))
        hi = min(n - 2, int(center + lag / 2) + 1)
        if hi > lo + 2:
            k = lo + int(np.argmax(ac[lo:hi]))
            if 0 < k < n - 1 and ac[k] > 0:
                refined = k + _parabolic_vertex(ac[k - 1], ac[k], ac[k + 1])
                candidate = refined / m
                if abs(candidate - lag) < 0.1 * lag:
                    lag = candidate

    bpm = 60.0 * fps / lag
    while bpm > BPM_MAX:
        bpm /= 2.0
    while bpm < BPM_MIN:
        bpm *= 2.0
    return TempoEstimate(bpm, int(round(bpm)))


def fold_tempo(estimate: TempoEstimate, low: float = FOLD_LOW_BPM, high: float = FOLD_HIGH_BPM) -> TempoEstimate:
    """Fold octave errors into [low, high) by doubling or halving."""
    bpm = estimate.bpm
    while bpm < low:
        bpm *= 2.0
    while bpm > high:
        bpm /= 2.0
    return TempoEstimate(bpm, int(round(bpm)), estimate.is_fallback)


def fit_grid(
    onsets: list[OnsetEvent],
    tempo: TempoEstimate,
    window_start: float = 0.0,
    duration: float = 60.0,
) -> RhythmGrid:
    """Fit the 16th-note grid phase to the detected onsets.

    The candidate phases are the onsets' own phases modulo one step; the
    winner maximizes total onset strength within +/- step/4 of the phase.
    The grid origin is then the phase of the earliest strong onset consistent
    with the winner, so "beat one" is anchored to a real percussive hit.
    """
    if not onsets:
        raise GridUndefined("cannot fit a grid without onsets")
    step = 15.0 / tempo.bpm
    tol = step / 4.0

    phases = np.array([(e.time - window_start) % step for e in onsets])
    strengths = np.array([e.strength for e in onsets])

    def close(a: np.ndarray, b: float) -> np.ndarray:
        d = np.abs(a - b)
        return np.minimum(d, step - d) <= tol

    best_phase = 0.0
    best_score = -1.0
    for phase in sorted(set(phases.tolist())):
        score = strengths[close(phases, phase)].sum()
        if score > best_score:
            best_score = score
            best_phase = phase

    anchors = strong_onsets(onsets)
    pool = [e for e in anchors if close(np.array([(e.time - window_start) % step]), best_phase)[0]]
    if not pool:
        pool = [e for e in onsets if close(np.array([(e.time - window_start) % step]), best_phase)[0]]
    anchor = min(pool, key=lambda e: e.time)

    origin = (anchor.time - window_start) % step
    n_steps = int((duration - origin) / step) + 1
    return RhythmGrid(origin=origin, step=step, n_steps=n_steps)


def quantize(onsets: list[OnsetEvent], grid: RhythmGrid) -> list[tuple[int, OnsetEvent]]:
    """Assign each onset to its nearest step; ties at .5 round down.

    Onsets mapping outside [0, n_steps) are dropped.
    """
    out: list[tuple[int, OnsetEvent]] = []
    for event in onsets:
        x = (event.time - grid.origin) / grid.step
        idx = math.ceil(x - 0.5)  # round half down
        if 0 <= idx < grid.n_steps:
            out.append((idx, event))
    return out
