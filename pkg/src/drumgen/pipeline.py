"""End-to-end extraction: audio file in, consensus pattern out."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import audio_io, consensus, percussion_clustering, rhythm_analysis, spectral
from .audio_io import AudioClip, DecoderPlugin
from .errors import NoOnsets
from .percussion_clustering import InstrumentTrack
from .rhythm_analysis import OnsetEvent, RhythmGrid, TempoEstimate


@dataclass
class ExtractionConfig:
    sample_rate: int = audio_io.PIPELINE_RATE
    n_fft: int = spectral.N_FFT
    hop: int = spectral.HOP
    kernel_time: int = 75
    kernel_freq: int = 75
    kmeans_seed: int = percussion_clustering.DEFAULT_SEED
    n_instruments: int = 4
    min_cluster_population: int = percussion_clustering.MIN_CLUSTER_POPULATION
    role_order: tuple = percussion_clustering.ROLE_ORDER


@dataclass
class ExtractionResult:
    pattern: consensus.ConsensusPattern
    tempo: TempoEstimate  # folded tempo used for the grid
    raw_tempo: TempoEstimate  # estimate before octave folding
    grid: RhythmGrid
    onsets: list[OnsetEvent]
    strong: list[OnsetEvent]
    clicks: AudioClip
    tracks: list[InstrumentTrack] = field(default_factory=list)

    @property
    def vector(self) -> np.ndarray:
        return consensus.to_vector(self.pattern)


def extract_clip(window: AudioClip, cfg: ExtractionConfig | None = None) -> ExtractionResult:
    """Run the analysis pipeline on an already-windowed clip."""
    cfg = cfg or ExtractionConfig()
    duration = window.duration

    spec = spectral.stft(window, cfg.n_fft, cfg.hop)
    separated = spectral.hpss(spec, cfg.kernel_time, cfg.kernel_freq)
    envelope = rhythm_analysis.onset_envelope(separated.percussive)
    onsets = rhythm_analysis.detect_onsets(
        envelope, separated.percussive, window.sample_rate, cfg.hop
    )
    if not onsets:
        raise NoOnsets(f"no percussive onsets detected: {window.source_path}")

    strong = rhythm_analysis.strong_onsets(onsets)
    clicks = rhythm_analysis.synthesize_clicks(
        [e.time for e in strong], duration, window.sample_rate
    )
    raw_tempo = rhythm_analysis.estimate_tempo(clicks)
    tempo = rhythm_analysis.fold_tempo(raw_tempo)

    grid = rhythm_analysis.fit_grid(onsets, tempo, window_start=0.0, duration=duration)
    quantized = rhythm_analysis.quantize(onsets, grid)
    tracks = percussion_clustering.cluster_onsets(
        quantized,
        k=cfg.n_instruments,
        seed=cfg.kmeans_seed,
        min_population=cfg.min_cluster_population,
    )
    tracks = percussion_clustering.assign_roles(tracks, cfg.role_order)

    pattern = consensus.find_consensus(
        {t.role: t.steps for t in tracks}, grid.n_steps, tempo.rounded_bpm
    )
    return ExtractionResult(pattern, tempo, raw_tempo, grid, onsets, strong, clicks, tracks)


def extract_file(
    path,
    cfg: ExtractionConfig | None = None,
    decoder: DecoderPlugin | None = None,
) -> ExtractionResult:
    """Decode, window to [60 s, 120 s), and extract the consensus pattern."""
    cfg = cfg or ExtractionConfig()
    clip = audio_io.decode(path, target_rate=cfg.sample_rate, decoder=decoder)
    window = audio_io.sample_window(clip)
    return extract_clip(window, cfg)


def extract_vector(path, cfg: ExtractionConfig | None = None) -> np.ndarray:
    """Convenience wrapper returning just the 129-value rhythm vector."""
    return extract_file(path, cfg).vector
