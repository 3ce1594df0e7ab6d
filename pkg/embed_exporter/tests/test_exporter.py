import json
import os
import subprocess
import sys

import numpy as np
import pytest

from embed_exporter import ExporterError, export, load_backend
from embed_exporter.cli import main
from embed_exporter.exporter import embed_phrases

TABLE_PHRASES = ["peaceful", "soft", "marching"]


def test_export_writes_768_dim_vectors(tmp_path, local_checkpoint):
    out = tmp_path / "emb.json"
    payload = export(TABLE_PHRASES, out, model_id=local_checkpoint)
    assert sorted(payload["embeddings"]) == sorted(TABLE_PHRASES)
    on_disk = json.loads(out.read_text())
    assert on_disk == payload
    for phrase in TABLE_PHRASES:
        vec = on_disk["embeddings"][phrase]
        assert len(vec) == 768
        assert all(np.isfinite(vec))
    meta = on_disk["metadata"]
    assert meta["dimension"] == 768
    assert meta["model"] == local_checkpoint
    assert "mean" in meta["pooling"]
    assert meta["created"]


def test_export_is_deterministic_across_runs(tmp_path, local_checkpoint):
    a = export(TABLE_PHRASES, tmp_path / "a.json", model_id=local_checkpoint)
    b = export(TABLE_PHRASES, tmp_path / "b.json", model_id=local_checkpoint)
    assert a["embeddings"] == b["embeddings"]


def test_export_dedupes_repeated_phrases(tmp_path, local_checkpoint):
    payload = export(["soft", "soft", "soft"], tmp_path / "d.json", model_id=local_checkpoint)
    assert list(payload["embeddings"]) == ["soft"]


def test_export_rejects_empty_phrase(tmp_path, local_checkpoint):
    with pytest.raises(ExporterError, match="non-empty"):
        export(["soft", "  "], tmp_path / "e.json", model_id=local_checkpoint)
    with pytest.raises(ExporterError, match="no phrases"):
        export([], tmp_path / "e.json", model_id=local_checkpoint)


def test_export_rejects_missing_model(tmp_path):
    with pytest.raises(ExporterError, match="model unavailable"):
        export(["soft"], tmp_path / "x.json", model_id=str(tmp_path / "no-model-here"))


def test_embeddings_differ_between_phrases(local_checkpoint):
    tok, model = load_backend(local_checkpoint)
    table = embed_phrases(["happy", "weary"], tok, model)
    assert not np.allclose(table["happy"], table["weary"])


def test_pooling_excludes_special_tokens(local_checkpoint):
    # pooling only non-special tokens means the single-word vector equals the
    # mean of that word's token vectors, not a CLS/SEP-diluted mean
    import torch

    tok, model = load_backend(local_checkpoint)
    (vec,) = embed_phrases(["happy"], tok, model).values()
    enc = tok(["happy"], return_tensors="pt", return_special_tokens_mask=True)
    special = enc.pop("special_tokens_mask").bool()[0]
    with torch.no_grad():
        hidden = model(**enc).last_hidden_state[0].double().numpy()
    manual = hidden[~special.numpy()].mean(axis=0)
    assert np.allclose(vec, manual, atol=1e-12)
    diluted = hidden.mean(axis=0)
    assert not np.allclose(vec, diluted)


def test_cli_export_with_args_and_file(tmp_path, local_checkpoint, capsys):
    out = tmp_path / "cli.json"
    code = main(["export", "calm", "driving", "--out", str(out), "--model", local_checkpoint])
    assert code == 0
    assert "wrote 2 embeddings" in capsys.readouterr().err

    listing = tmp_path / "phrases.txt"
    listing.write_text("tension\nspeed\n\nsweet\n")
    out2 = tmp_path / "cli2.json"
    code = main(["export", "--phrases", str(listing), "--out", str(out2),
                 "--model", local_checkpoint])
    assert code == 0
    capsys.readouterr()
    assert sorted(json.loads(out2.read_text())["embeddings"]) == ["speed", "sweet", "tension"]


def test_cli_errors_exit_one(tmp_path, capsys):
    code = main(["export", "--out", str(tmp_path / "x.json"),
                 "--model", str(tmp_path / "missing")])
    assert code == 1
    assert "no phrases" in capsys.readouterr().err


# --- consumption by the drum toolkit (its external file interface) ----------


def test_output_loads_through_drumgen_corpus(tmp_path, local_checkpoint):
    corpus = pytest.importorskip("drumgen.corpus")
    out = tmp_path / "emb.json"
    export(TABLE_PHRASES, out, model_id=local_checkpoint)
    table = corpus.load_embeddings(out)
    assert sorted(table) == sorted(TABLE_PHRASES)
    assert all(v.shape == (768,) for v in table.values())


def _write_click_song(path, rate=22050, total_s=126.0, seed=4):
    rng = np.random.default_rng(seed)
    burst = rng.standard_normal(int(0.03 * rate))
    burst *= 0.8 * np.exp(-np.arange(len(burst)) / (0.008 * rate)) / np.max(np.abs(burst))
    out = np.zeros(int(total_s * rate))
    for start in range(0, len(out) - len(burst), int(0.5 * rate)):
        out[start : start + len(burst)] += burst
    peak = np.max(np.abs(out))
    if peak > 1:
        out /= peak
    header_frames = out  # mono float
    import struct

    q = np.clip(np.round(header_frames * 32768.0), -32768, 32767).astype("<i2")
    payload = q.tobytes()
    fmt = struct.pack("<HHIIHH", 1, 1, rate, rate * 2, 2, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def test_output_feeds_build_corpus_unmodified(tmp_path, local_checkpoint):
    pytest.importorskip("drumgen")
    emb = tmp_path / "emb.json"
    export(["calm", "driving"], emb, model_id=local_checkpoint)

    _write_click_song(tmp_path / "song.wav")
    annotations = tmp_path / "ann.jsonl"
    annotations.write_text(json.dumps({
        "artist": "A", "title": "T", "phrases": ["calm", "driving"],
        "audio_path": "song.wav",
    }) + "\n")
    dataset = tmp_path / "dataset.json"
    proc = subprocess.run(
        [sys.executable, "-m", "drumgen", "build-corpus",
         "--annotations", str(annotations), "--embeddings", str(emb),
         "--audio-root", str(tmp_path), "--out", str(dataset)],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(dataset.read_text())
    assert len(payload["records"]) == 1
    assert len(payload["records"][0]["embedding"]) == 768


# --- semantic sanity (needs real pretrained weights) -------------------------


def _real_model():
    model_id = os.environ.get("EMBED_EXPORTER_TEST_MODEL", "bert-base-uncased")
    try:
        return model_id, load_backend(model_id)
    except ExporterError as exc:
        pytest.skip(f"pretrained checkpoint unavailable in this environment: {exc}")


def test_semantic_neighbors_with_real_model():
    _, (tok, model) = _real_model()
    table = embed_phrases(["happy", "cheerful", "aggression"], tok, model)

    def cosine(a, b):
        return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))

    assert cosine(table["happy"], table["cheerful"]) > cosine(
        table["happy"], table["aggression"]
    )
