"""Drum pattern toolkit: consensus loop extraction and word-driven generation.

Two halves share one vocabulary:

* extraction: decode audio, separate the percussive layer, detect onsets,
  estimate tempo, quantize to a 16th-note grid, cluster hits into up to four
  instruments, and vote for the most common 2-bar (32-step) pattern;
* generation: a small dense regression network maps a 768-dim phrase
  embedding to a 129-value rhythm vector (tempo + 4 x 32 step tracks).
"""

__version__ = "0.1.0"

from .consensus import ConsensusPattern, find_consensus, from_vector, to_vector
from .errors import DrumgenError

__all__ = [
    "ConsensusPattern",
    "DrumgenError",
    "find_consensus",
    "from_vector",
    "to_vector",
    "__version__",
]
