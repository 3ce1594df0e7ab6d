"""Nearest-rank percentile, the single convention used across the toolkit.

The threshold for percentile ``pct`` of ``n`` sorted values is the element at
0-based index ``(pct * n) // 100`` (clamped to the last element).  Selection
is always "at or above the threshold", so the 98th percentile of the
strengths 1..100 is 99 and keeps exactly {99, 100}, and the 75th percentile
of the 128 values 0..127 is 96 and keeps exactly the top 32.
"""

import numpy as np


def nearest_rank(values, pct: int) -> float:
    """Return the nearest-rank percentile threshold of ``values``.

    ``pct`` is an integer percentage in [0, 100].
    """
    arr = np.sort(np.asarray(values, dtype=float).ravel())
    if arr.size == 0:
        raise ValueError("nearest_rank of an empty sequence")
    if not 0 <= pct <= 100:
        raise ValueError(f"percentile out of range: {pct}")
    idx = min((pct * arr.size) // 100, arr.size - 1)
    return float(arr[idx])
