"""Most-common 2-bar pattern voting and the 129-value rhythm vector.

A pattern window is 32 steps (two 16-step bars).  Windows are enumerated at
every bar boundary (stride 16) so a 2-bar phrase may start on either bar,
keyed by their exact binary content, and the most frequent key wins.  Ties
prefer the window using more instruments, then the earliest occurrence.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import InputError, WindowTooShort
from .percussion_clustering import ROLE_ORDER

PATTERN_STEPS = 32
BAR_STEPS = 16
VECTOR_SIZE = 1 + 4 * PATTERN_STEPS

# role -> key used in the JSON form
JSON_TRACK_KEYS = {
    "snare": "snare",
    "kick": "kick",
    "other_percussion": "other",
    "hihat": "hihat",
}


@dataclass
class ConsensusPattern:
    """Tempo plus four 32-step binary tracks in role order (snare, kick, other, hihat)."""

    tempo_bpm: int
    tracks: tuple[tuple[int, ...], ...]
    source_window: int = 0

    def __post_init__(self):
        if len(self.tracks) != 4 or any(len(t) != PATTERN_STEPS for t in self.tracks):
            raise ValueError("tracks must be a 4-tuple of 32-step vectors")

    def track(self, role: str) -> tuple[int, ...]:
        return self.tracks[ROLE_ORDER.index(role)]

    @property
    def total_beats(self) -> int:
        return sum(sum(t) for t in self.tracks)


def find_consensus(
    step_sets: Mapping[str, Iterable[int]],
    n_steps: int,
    tempo_bpm: int,
) -> ConsensusPattern:
    """Vote for the most common 32-step window across the instrument tracks.

    ``step_sets`` maps roles to step indices; missing roles count as silent
    tracks.  Requires at least one full window (n_steps >= 32).
    """
    unknown = set(step_sets) - set(ROLE_ORDER)
    if unknown:
        raise InputError(f"unknown roles: {sorted(unknown)}")
    if n_steps < PATTERN_STEPS:
        raise WindowTooShort(f"need at least {PATTERN_STEPS} steps, got {n_steps}")

    sets = tuple(frozenset(step_sets.get(role, ())) for role in ROLE_ORDER)
    counts: Counter = Counter()
    first_start: dict = {}
    for start in range(0, n_steps - PATTERN_STEPS + 1, BAR_STEPS):
        key = tuple(
            tuple(1 if (start + i) in s else 0 for i in range(PATTERN_STEPS)) for s in sets
        )
        counts[key] += 1
        first_start.setdefault(key, start)

    def rank(key):
        instruments = sum(1 for track in key if any(track))
        return (counts[key], instruments, -first_start[key])

    winner = max(counts, key=rank)
    return ConsensusPattern(tempo_bpm, winner, source_window=first_start[winner])


def to_vector(pattern: ConsensusPattern) -> np.ndarray:
    """Flatten to [tempo, snare 0..31, kick 0..31, other 0..31, hihat 0..31]."""
    values = np.empty(VECTOR_SIZE)
    values[0] = pattern.tempo_bpm
    for i, track in enumerate(pattern.tracks):
        values[1 + i * PATTERN_STEPS : 1 + (i + 1) * PATTERN_STEPS] = track
    return values


def from_vector(values: np.ndarray) -> ConsensusPattern:
    """Inverse of ``to_vector``; pattern entries are binarized at nonzero."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (VECTOR_SIZE,):
        raise InputError(f"rhythm vector must have {VECTOR_SIZE} values, got {values.shape}")
    tracks = tuple(
        tuple(int(v != 0) for v in values[1 + i * PATTERN_STEPS : 1 + (i + 1) * PATTERN_STEPS])
        for i in range(4)
    )
    return ConsensusPattern(int(round(values[0])), tracks)


def pattern_to_json(pattern: ConsensusPattern) -> str:
    payload = {
        "schema_version": 1,
        "tempo": pattern.tempo_bpm,
        "tracks": {
            JSON_TRACK_KEYS[role]: list(pattern.track(role)) for role in ROLE_ORDER
        },
        "source_window": pattern.source_window,
    }
    return json.dumps(payload, sort_keys=True)


def pattern_from_json(text: str) -> ConsensusPattern:
    try:
        payload = json.loads(text)
        tracks = tuple(
            tuple(int(v) for v in payload["tracks"][JSON_TRACK_KEYS[role]])
            for role in ROLE_ORDER
        )
        return ConsensusPattern(
            int(payload["tempo"]), tracks, int(payload.get("source_window", 0))
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"malformed pattern JSON: {exc}") from exc
