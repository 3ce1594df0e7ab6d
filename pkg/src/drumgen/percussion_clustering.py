"""Group quantized onsets into up to four instruments by spectral timbre.

Features are the per-onset percussive spectra, L2-normalized so loudness
drops out and only the energy distribution across frequency matters.
Clustering is plain Lloyd k-means with k-means++ seeding, a fixed seed, and
ten restarts reduced deterministically by lowest inertia.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, replace

import numpy as np

log = logging.getLogger(__name__)

ROLE_ORDER = ("snare", "kick", "other_percussion", "hihat")

DEFAULT_SEED = 7067265
N_RESTARTS = 10
MAX_ITER = 100
MIN_CLUSTER_POPULATION = 4


@dataclass
class InstrumentTrack:
    """One clustered instrument: which steps it plays and how hard."""

    cluster_id: int
    role: str | None
    steps: frozenset[int]
    median_strength: float
    centroid: np.ndarray


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[int(rng.integers(n))]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[i] = points[i % n]
            continue
        centroids[i] = points[int(rng.choice(n, p=d2 / total))]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, float]:
    n, k = len(points), len(centroids)
    prev_inertia = np.inf
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), new_labels].sum())
        # Lloyd never increases the objective; guard against regressions
        assert inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12
        moved = not np.array_equal(new_labels, labels)
        labels = new_labels
        prev_inertia = inertia
        reseeded = False
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
            else:
                # re-center an empty cluster on the worst-fit point; the
                # current assignment cost is unchanged, so monotonicity holds
                worst = int(np.argmax(d2[np.arange(n), labels]))
                centroids[c] = points[worst]
                reseeded = True
        if not moved and not reseeded:
            break
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    return labels, centroids, inertia


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = DEFAULT_SEED,
    n_restarts: int = N_RESTARTS,
    max_iter: int = MAX_ITER,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Restarted k-means; returns (labels, centroids, inertia).

    Restarts are seeded as (seed, restart) and reduced by strictly lower
    inertia, so the result is a deterministic function of inputs and seed.
    """
    points = np.asarray(points, dtype=np.float64)
    best = None
    for restart in range(n_restarts):
        rng = np.random.default_rng([seed, restart])
        centroids = _kmeanspp_init(points, k, rng)
        labels, centroids, inertia = _lloyd(points, centroids.copy(), max_iter)
        if best is None or inertia < best[2]:
            best = (labels, centroids, inertia)
    return best


def cluster_onsets(
    quantized: list[tuple[int, "object"]],
    k: int = 4,
    seed: int = DEFAULT_SEED,
    min_population: int = MIN_CLUSTER_POPULATION,
) -> list[InstrumentTrack]:
    """Cluster (step, onset) pairs into instrument tracks.

    Clusters with fewer than ``min_population`` onsets are discarded, which
    is how songs end up with fewer than four instruments.  If every spectrum
    is identical a single flagged track is returned.
    """
    if not quantized:
        return []
    quantized = sorted(quantized, key=lambda it: (it[1].time, it[0]))
    events = [e for _, e in quantized]
    steps = [s for s, _ in quantized]

    features = np.stack([np.asarray(e.spectrum, dtype=np.float64) for e in events])
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    features = np.divide(features, norms, out=features.copy(), where=norms > 0)

    if np.all(features == features[0]):
        log.warning("all onset spectra identical; returning a single cluster")
        return [
            InstrumentTrack(
                cluster_id=0,
                role=None,
                steps=frozenset(steps),
                median_strength=float(statistics.median(e.strength for e in events)),
                centroid=features[0].copy(),
            )
        ]

    k_eff = min(k, len(events))
    labels, centroids, _ = kmeans(features, k_eff, seed=seed)

    tracks = []
    for c in range(k_eff):
        members = [i for i, lab in enumerate(labels) if lab == c]
        if len(members) < min_population:
            continue
        tracks.append(
            InstrumentTrack(
                cluster_id=c,
                role=None,
                steps=frozenset(steps[i] for i in members),
                median_strength=float(statistics.median(events[i].strength for i in members)),
                centroid=centroids[c],
            )
        )
    return tracks


def assign_roles(
    tracks: list[InstrumentTrack],
    role_order: tuple[str, ...] = ROLE_ORDER,
) -> list[InstrumentTrack]:
    """Assign snare, kick, other, hihat by increasing median strength.

    Equal medians break toward the lower cluster id.  With fewer than four
    tracks the first roles of the order are used.  ``role_order`` allows a
    manual remapping when the default strength ordering misfires on a song.
    """
    if sorted(role_order) != sorted(ROLE_ORDER):
        raise ValueError(f"role_order must be a permutation of {ROLE_ORDER}")
    if len(tracks) > len(role_order):
        raise ValueError(f"at most {len(role_order)} tracks supported, got {len(tracks)}")
    ordered = sorted(tracks, key=lambda t: (t.median_strength, t.cluster_id))
    return [replace(track, role=role) for track, role in zip(ordered, role_order)]
