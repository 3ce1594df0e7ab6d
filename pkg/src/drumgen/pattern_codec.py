"""Render and parse drum patterns: text diagram and sequencer string.

The text diagram prints one row per instrument, top to bottom hihat, other
percussion, kick, snare, with 'X' for a beat, '-' for silence, and '|'
separating the two bars.  The sequencer string is the semicolon-delimited
note-entry format accepted by the companion web sequencer; the trailing
``1 2`` fields of each entry are emitted verbatim as constants.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .consensus import BAR_STEPS, ConsensusPattern, PATTERN_STEPS
from .errors import InputError
from .percussion_clustering import ROLE_ORDER

# top-to-bottom row order of the text diagram
DISPLAY_ORDER = ("hihat", "other_percussion", "kick", "snare")

DEFAULT_NOTE_MAP = {
    "snare": "D4",
    "kick": "C3",
    "other_percussion": "D5",
    "hihat": "F#3",
}
DEFAULT_SEQUENCE_ID = 319887

_TEMPO_LINE = re.compile(r"^Suggested tempo: (\d+)$")


@dataclass
class SequencerNoteMap:
    """Role-to-note assignment plus the target sequence id."""

    notes: dict = field(default_factory=lambda: dict(DEFAULT_NOTE_MAP))
    sequence_id: int = DEFAULT_SEQUENCE_ID

    def __post_init__(self):
        missing = set(ROLE_ORDER) - set(self.notes)
        if missing:
            raise InputError(f"note map missing roles: {sorted(missing)}")
        if len(set(self.notes[r] for r in ROLE_ORDER)) != len(ROLE_ORDER):
            raise InputError("note map must assign four distinct notes")


def render_text(pattern: ConsensusPattern) -> str:
    """Render the tempo line and the four tab-prefixed diagram rows."""
    lines = [f"Suggested tempo: {pattern.tempo_bpm}"]
    for role in DISPLAY_ORDER:
        cells = "".join("X" if v else "-" for v in pattern.track(role))
        lines.append(f"\t|{cells[:BAR_STEPS]}|{cells[BAR_STEPS:]}|")
    return "\n".join(lines)


def render_sequencer(pattern: ConsensusPattern, note_map: SequencerNoteMap | None = None) -> str:
    """Render the copy-pasteable sequencer string."""
    note_map = note_map or SequencerNoteMap()
    parts = [f"Online Sequencer:{note_map.sequence_id}:"]
    for role in DISPLAY_ORDER:
        note = note_map.notes[role]
        for step, value in enumerate(pattern.track(role)):
            if value:
                parts.append(f"{step} {note} 1 2;")
    parts.append(":")
    return "".join(parts)


def parse_text(diagram: str) -> ConsensusPattern:
    """Parse a text diagram back into a pattern (inverse of ``render_text``)."""
    lines = [ln for ln in diagram.splitlines() if ln.strip()]
    if len(lines) != 5:
        raise InputError(f"expected a tempo line plus 4 rows, got {len(lines)} lines")
    match = _TEMPO_LINE.match(lines[0].strip())
    if not match:
        raise InputError(f"malformed tempo line: {lines[0]!r}")
    tempo = int(match.group(1))

    rows = {}
    for row_index, raw in enumerate(lines[1:]):
        row = raw.lstrip("\t ")
        if len(row) != PATTERN_STEPS + 3:
            raise InputError(
                f"row {row_index + 1}: expected {PATTERN_STEPS + 3} characters, got {len(row)}"
            )
        bits = []
        col = 0
        for ch in row:
            if col in (0, BAR_STEPS + 1, PATTERN_STEPS + 2):
                if ch != "|":
                    raise InputError(f"row {row_index + 1}, column {col}: expected '|', got {ch!r}")
            elif ch == "X":
                bits.append(1)
            elif ch == "-":
                bits.append(0)
            else:
                raise InputError(f"row {row_index + 1}, column {col}: unknown character {ch!r}")
            col += 1
        rows[DISPLAY_ORDER[row_index]] = tuple(bits)

    return ConsensusPattern(tempo, tuple(rows[role] for role in ROLE_ORDER))
