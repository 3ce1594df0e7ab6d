"""Export phrase embeddings from a pretrained transformer.

Each phrase is embedded as a single sequence (not word-by-word): the final
hidden layer's token vectors are mean-pooled over non-special tokens.  The
output file is JSON with a metadata block and an ``embeddings`` mapping,
which the drumgen corpus loader ingests as-is:

    {
      "metadata": {"model": ..., "pooling": ..., "created": ..., "dimension": 768},
      "embeddings": {"<phrase>": [768 numbers], ...}
    }

Inference runs in eval mode with no dropout, so the same model and phrase
always produce the identical vector.
"""

from __future__ import annotations

import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

EMBEDDING_DIM = 768
DEFAULT_MODEL = "bert-base-uncased"
POOLING = "mean of final-layer non-special tokens"
BATCH_SIZE = 16


class ExporterError(Exception):
    pass


def load_backend(model_id: str = DEFAULT_MODEL):
    """Load tokenizer and model; raises ExporterError when unavailable."""
    try:
        import torch
        from transformers import AutoModel, AutoTokenizer
    except ImportError as exc:  # pragma: no cover - deps are declared
        raise ExporterError(f"transformers backend not installed: {exc}") from exc
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ExporterError(f"model unavailable: {model_id} ({exc})") from exc
    model.eval()
    hidden = getattr(model.config, "hidden_size", None)
    if hidden != EMBEDDING_DIM:
        raise ExporterError(
            f"model {model_id} has hidden size {hidden}, need {EMBEDDING_DIM}"
        )
    return tokenizer, model


def embed_phrases(phrases: list[str], tokenizer, model) -> dict[str, np.ndarray]:
    """Embed phrases (deduplicated, order preserved) with mean pooling."""
    import torch

    unique = list(dict.fromkeys(phrases))
    if not unique:
        raise ExporterError("no phrases to embed")
    if any(not isinstance(p, str) or not p.strip() for p in unique):
        raise ExporterError("phrases must be non-empty strings")

    out: dict[str, np.ndarray] = {}
    with torch.no_grad():
        for start in range(0, len(unique), BATCH_SIZE):
            batch = unique[start : start + BATCH_SIZE]
            enc = tokenizer(
                batch,
                padding=True,
                truncation=True,
                return_tensors="pt",
                return_special_tokens_mask=True,
            )
            special = enc.pop("special_tokens_mask")
            hidden = model(**enc).last_hidden_state  # (batch, tokens, 768)
            keep = (enc["attention_mask"].bool() & ~special.bool()).unsqueeze(-1)
            counts = keep.sum(dim=1).clamp(min=1)
            pooled = (hidden * keep).sum(dim=1) / counts
            # a phrase of only special tokens falls back to plain mean
            empty = keep.sum(dim=1).squeeze(-1) == 0
            if bool(empty.any()):
                att = enc["attention_mask"].unsqueeze(-1)
                fallback = (hidden * att).sum(dim=1) / att.sum(dim=1).clamp(min=1)
                pooled[empty] = fallback[empty]
            vectors = pooled.double().cpu().numpy()
            for phrase, vec in zip(batch, vectors):
                if not np.all(np.isfinite(vec)):
                    raise ExporterError(f"non-finite embedding for {phrase!r}")
                out[phrase] = vec
    return out


def export(phrases: list[str], out_path, model_id: str = DEFAULT_MODEL) -> dict:
    """Embed phrases and write the embedding file atomically; returns the payload."""
    tokenizer, model = load_backend(model_id)
    table = embed_phrases(phrases, tokenizer, model)
    payload = {
        "metadata": {
            "model": model_id,
            "pooling": POOLING,
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "dimension": EMBEDDING_DIM,
        },
        "embeddings": {phrase: vec.tolist() for phrase, vec in table.items()},
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return payload
