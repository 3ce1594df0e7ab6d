import json

import pytest

import synthutil


@pytest.fixture(scope="session")
def song_files(tmp_path_factory):
    """bpm -> (wav path, sample rate, pattern) for the three loop songs."""
    root = tmp_path_factory.mktemp("songs")
    files = {}
    for bpm in synthutil.SONG_CASES:
        path = root / f"loop_{bpm}.wav"
        rate, pattern = synthutil.write_song(path, bpm)
        files[bpm] = (path, rate, pattern)
    return files


@pytest.fixture(scope="session")
def short_song(tmp_path_factory):
    """A 90-second song, below the two-minute minimum."""
    path = tmp_path_factory.mktemp("short") / "short.wav"
    rate, _ = synthutil.write_song(path, 90, total_s=90.0)
    return path, rate


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """Audio root with two usable songs, one too-short song, and annotations."""
    root = tmp_path_factory.mktemp("corpus")
    rate = synthutil.SONG_CASES[90][0]
    synthutil.write_song(root / "one.wav", 90, total_s=126.0)
    synthutil.write_song(root / "two.wav", 120, total_s=126.0)
    synthutil.write_song(root / "three.wav", 90, total_s=90.0)  # rejected: < 2 min
    rows = [
        {"artist": "A", "title": "One", "phrases": ["calm", "soft"], "audio_path": "one.wav"},
        {"artist": "B", "title": "Two", "phrases": ["driving"], "audio_path": "two.wav"},
        {"artist": "C", "title": "Three", "phrases": ["tension"], "audio_path": "three.wav"},
    ]
    annotations = root / "annotations.jsonl"
    annotations.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return root, annotations, rate
