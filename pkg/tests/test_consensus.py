import numpy as np
import pytest

from drumgen.consensus import (
    ConsensusPattern,
    find_consensus,
    from_vector,
    pattern_from_json,
    pattern_to_json,
    to_vector,
)
from drumgen.errors import InputError, WindowTooShort


def _steps_from_loop(loop_steps, n_steps):
    """Tile a 32-step loop across a grid of n_steps."""
    return {
        role: {k for k in range(n_steps) if (k % 32) in steps}
        for role, steps in loop_steps.items()
    }


LOOP = {
    "snare": {4, 12, 20, 28},
    "kick": {0, 8, 16, 25},
    "other_percussion": {10, 26},
    "hihat": {0, 2, 4, 6, 8},
}


def test_find_consensus_recovers_pure_loop():
    sets = _steps_from_loop(LOOP, 480)
    pattern = find_consensus(sets, 480, tempo_bpm=120)
    assert pattern.source_window == 0
    for role, steps in LOOP.items():
        assert {i for i, v in enumerate(pattern.track(role)) if v} == steps


def test_find_consensus_majority_wins():
    # bars P,P,P,P,Q: windows at 0/16/32 all read (P,P); the window at 48
    # reads (P,Q); the 3-vs-1 majority wins
    kick = {b * 16 + s for b in range(4) for s in (0, 8)} | {4 * 16 + 1}
    pattern = find_consensus({"kick": kick}, 80, tempo_bpm=100)
    got = {i for i, v in enumerate(pattern.track("kick")) if v}
    assert got == {0, 8, 16, 24}
    assert pattern.source_window == 0


def test_tie_prefers_more_instruments():
    # bars A,B,A,B,C,D,C,D: window keys (A,B) and (C,D) occur twice each,
    # but (C,D) plays three instruments against one, so it wins the tie
    # despite occurring later
    bar_kick = {"A": {0}, "B": {2}, "C": {0}, "D": {2}}
    bar_snare = {"C": {4}, "D": {6}}
    bar_hat = {"C": {8}}
    bars = ["A", "B", "A", "B", "C", "D", "C", "D"]
    sets = {"kick": set(), "snare": set(), "hihat": set()}
    for i, name in enumerate(bars):
        sets["kick"] |= {16 * i + s for s in bar_kick.get(name, ())}
        sets["snare"] |= {16 * i + s for s in bar_snare.get(name, ())}
        sets["hihat"] |= {16 * i + s for s in bar_hat.get(name, ())}
    pattern = find_consensus(sets, 128, tempo_bpm=100)
    assert pattern.source_window == 64
    assert sum(1 for t in pattern.tracks if any(t)) == 3


def _oracle(sets, n_steps):
    """Independent window-vote implementation used as ground truth."""
    order = ("snare", "kick", "other_percussion", "hihat")
    windows = {}
    for start in range(0, n_steps - 31, 16):
        key = tuple(
            tuple(1 if (start + i) in sets.get(role, ()) else 0 for i in range(32))
            for role in order
        )
        windows.setdefault(key, []).append(start)
    scored = []
    for key, starts in windows.items():
        n_inst = len([1 for tr in key if sum(tr)])
        scored.append((len(starts), n_inst, -min(starts), key))
    scored.sort(reverse=True)
    best = scored[0]
    return best[3], -best[2]


def test_find_consensus_matches_oracle_on_random_instances():
    rng = np.random.default_rng(17)
    roles = ("snare", "kick", "other_percussion", "hihat")
    for trial in range(60):
        n_steps = int(rng.integers(32, 200))
        sets = {}
        for role in roles:
            density = rng.uniform(0.02, 0.3)
            sets[role] = set(np.nonzero(rng.random(n_steps) < density)[0].tolist())
        pattern = find_consensus(sets, n_steps, tempo_bpm=100)
        key, start = _oracle(sets, n_steps)
        assert pattern.tracks == key, f"trial {trial}"
        assert pattern.source_window == start, f"trial {trial}"


def test_find_consensus_rotation_invariance():
    sets = _steps_from_loop(LOOP, 480)
    rotated = {role: {(s + 64) % 480 for s in steps} for role, steps in sets.items()}
    a = find_consensus(sets, 480, tempo_bpm=120)
    b = find_consensus(rotated, 480, tempo_bpm=120)
    assert a.tracks == b.tracks


def test_find_consensus_rejects_short_grid():
    with pytest.raises(WindowTooShort):
        find_consensus({"kick": {0}}, 31, tempo_bpm=100)


def test_find_consensus_rejects_unknown_role():
    with pytest.raises(InputError):
        find_consensus({"cowbell": {0}}, 64, tempo_bpm=100)


def test_find_consensus_missing_roles_are_silent():
    pattern = find_consensus({"kick": {0, 32, 64}}, 96, tempo_bpm=99)
    assert any(pattern.track("kick"))
    assert not any(pattern.track("snare"))
    assert not any(pattern.track("hihat"))


# --- vector layout ----------------------------------------------------------


def _empty_pattern(tempo):
    return ConsensusPattern(tempo, tuple(tuple(0 for _ in range(32)) for _ in range(4)))


def test_to_vector_empty_pattern():
    vec = to_vector(_empty_pattern(120))
    assert vec.shape == (129,)
    assert vec[0] == 120
    assert np.all(vec[1:] == 0)


def test_to_vector_layout_snare_first():
    tracks = [[0] * 32 for _ in range(4)]
    tracks[0][0] = 1  # snare step 0
    pattern = ConsensusPattern(121, tuple(tuple(t) for t in tracks))
    vec = to_vector(pattern)
    assert vec[0] == 121
    assert vec[1] == 1
    assert np.sum(vec[1:]) == 1


def test_vector_round_trip_on_random_binary_patterns():
    rng = np.random.default_rng(23)
    for _ in range(25):
        vec = np.zeros(129)
        vec[0] = float(rng.integers(30, 300))
        vec[1:] = (rng.random(128) < 0.3).astype(float)
        assert np.array_equal(to_vector(from_vector(vec)), vec)


def test_from_vector_rejects_bad_shape():
    with pytest.raises(InputError):
        from_vector(np.zeros(128))


def test_json_round_trip():
    sets = _steps_from_loop(LOOP, 64)
    pattern = find_consensus(sets, 64, tempo_bpm=117)
    text = pattern_to_json(pattern)
    assert pattern_from_json(text) == pattern
    assert '"tempo": 117' in text or '"tempo":117' in text.replace(" ", "")


def test_json_rejects_malformed():
    with pytest.raises(InputError):
        pattern_from_json("{}")
