"""Command-line interface: extract, build-corpus, train, cv, generate.

Exit codes: 0 success, 1 usage or input error, 2 domain rejection (for
example a song shorter than two minutes).  Human-readable output goes to
stdout, diagnostics and skip reports to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import audio_io, consensus, corpus, drum_model, pattern_codec, pipeline
from .errors import DomainError, DrumgenError, InputError
from .percussion_clustering import ROLE_ORDER


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this toolkit reserves 2 for domain
    # rejections, so remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_kernel(text: str) -> tuple[int, int]:
    try:
        t, f = text.lower().split("x")
        return int(t), int(f)
    except ValueError:
        raise InputError(f"--hpss-kernel expects TxF (e.g. 75x75), got {text!r}")


def _parse_note_map(entries) -> dict:
    notes = dict(pattern_codec.DEFAULT_NOTE_MAP)
    for entry in entries or []:
        role, sep, note = entry.partition("=")
        if not sep or role not in ROLE_ORDER or not note:
            raise InputError(
                f"--note-map expects role=NOTE with role in {ROLE_ORDER}, got {entry!r}"
            )
        notes[role] = note
    return notes


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")
    parser.add_argument(
        "--kmeans-seed", type=int, default=7067265,
        help="seed of the instrument clustering restarts",
    )
    parser.add_argument(
        "--sample-rate", type=int, default=audio_io.PIPELINE_RATE, help="pipeline sample rate (Hz)"
    )
    parser.add_argument(
        "--hpss-kernel", default="75x75", metavar="TxF", help="median kernel sizes (time x freq)"
    )
    parser.add_argument(
        "--tempo-scale",
        type=float,
        default=1.0 / 200.0,
        help="tempo scaling used during training; 1 disables",
    )
    parser.add_argument(
        "--sequence-id", type=int, default=pattern_codec.DEFAULT_SEQUENCE_ID,
        help="sequence id embedded in the sequencer string",
    )
    parser.add_argument(
        "--note-map", action="append", metavar="ROLE=NOTE",
        help="override an instrument note (repeatable)",
    )


def _parse_role_order(text: str | None):
    if not text:
        return ROLE_ORDER
    order = tuple(part.strip() for part in text.split(","))
    if sorted(order) != sorted(ROLE_ORDER):
        raise InputError(f"--role-order must be a permutation of {','.join(ROLE_ORDER)}")
    return order


def _extraction_config(args) -> pipeline.ExtractionConfig:
    kt, kf = _parse_kernel(args.hpss_kernel)
    return pipeline.ExtractionConfig(
        sample_rate=args.sample_rate,
        kernel_time=kt,
        kernel_freq=kf,
        kmeans_seed=args.kmeans_seed,
        role_order=_parse_role_order(getattr(args, "role_order", None)),
    )


def _note_map(args) -> pattern_codec.SequencerNoteMap:
    return pattern_codec.SequencerNoteMap(_parse_note_map(args.note_map), args.sequence_id)


def cmd_extract(args) -> int:
    result = pipeline.extract_file(args.audio, _extraction_config(args))
    if args.out:
        Path(args.out).write_text(consensus.pattern_to_json(result.pattern) + "\n")
    if args.clicks_out:
        audio_io.write_wav(args.clicks_out, result.clicks.samples, result.clicks.sample_rate)
    if args.onsets_out:
        strong = {id(e) for e in result.strong}
        payload = [
            {"time": e.time, "strength": e.strength, "strong": id(e) in strong}
            for e in result.onsets
        ]
        Path(args.onsets_out).write_text(json.dumps(payload))
    if args.clusters_out:
        payload = [
            {
                "cluster_id": t.cluster_id,
                "role": t.role,
                "steps": sorted(t.steps),
                "median_strength": t.median_strength,
                "centroid": t.centroid.tolist(),
            }
            for t in result.tracks
        ]
        Path(args.clusters_out).write_text(json.dumps(payload))
    print(pattern_codec.render_text(result.pattern))
    return 0


def _embedding_table(args) -> dict[str, np.ndarray]:
    if args.pseudo_embeddings is not None:
        annotations = corpus.load_annotations(args.annotations)
        phrases = [p for a in annotations for p in a.phrases]
        return corpus.pseudo_embedding_table(phrases, seed=args.pseudo_embeddings)
    if not args.embeddings:
        raise InputError("need --embeddings FILE or --pseudo-embeddings SEED")
    return corpus.load_embeddings(args.embeddings)


def cmd_build_corpus(args) -> int:
    annotations = corpus.load_annotations(args.annotations)
    table = _embedding_table(args)
    cfg = _extraction_config(args)
    records, skipped = corpus.build_dataset(
        annotations,
        table,
        args.audio_root,
        extract_fn=lambda path: pipeline.extract_vector(path, cfg),
    )
    corpus.save_dataset(args.out, records)
    print(f"wrote {len(records)} records ({len(skipped)} skipped) to {args.out}", file=sys.stderr)
    return 0


def _train_config(args, **overrides) -> drum_model.TrainConfig:
    base = dict(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        seed=args.seed,
        tempo_scale=args.tempo_scale,
    )
    base.update(overrides)
    return drum_model.TrainConfig(**base)


def cmd_train(args) -> int:
    records = corpus.load_dataset(args.dataset)
    cfg = _train_config(args)
    result = drum_model.train(records, cfg)
    drum_model.save_model(args.model_out, result.params, cfg.seed, cfg.tempo_scale)
    print(f"final training loss: {result.train_history[-1]:.6g}", file=sys.stderr)
    return 0


def cmd_cv(args) -> int:
    records = corpus.load_dataset(args.dataset)
    cfg = _train_config(args, folds=args.folds, repeats=args.repeats)
    rows = drum_model.cross_validate(records, cfg)
    Path(args.out).write_text(drum_model.cv_table_csv(rows))
    print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    return 0


def _resolve_generate_embedding(args) -> np.ndarray:
    if args.embedding_json:
        values = np.asarray(json.loads(Path(args.embedding_json).read_text()), dtype=np.float64)
        if values.shape != (corpus.EMBEDDING_DIM,):
            raise InputError(
                f"--embedding-json must hold {corpus.EMBEDDING_DIM} numbers, got {values.shape}"
            )
        return values
    if not args.phrase:
        raise InputError("give at least one phrase or --embedding-json")
    if args.pseudo_embeddings is not None:
        table = corpus.pseudo_embedding_table(args.phrase, seed=args.pseudo_embeddings)
    elif args.embeddings:
        table = corpus.load_embeddings(args.embeddings)
    else:
        raise InputError("need --embeddings FILE, --pseudo-embeddings SEED, or --embedding-json")
    missing = [p for p in args.phrase if p not in table]
    if missing:
        raise InputError(f"no embedding for phrase {missing[0]!r}")
    return corpus.average_embeddings([table[p] for p in args.phrase])


def cmd_generate(args) -> int:
    params, _, tempo_scale = drum_model.load_model(args.model)
    embedding = _resolve_generate_embedding(args)
    if args.debug_embedding:
        digest = hashlib.sha256(np.ascontiguousarray(embedding).tobytes()).hexdigest()
        print(f"embedding sha256: {digest}", file=sys.stderr)
    vector = drum_model.predict(params, embedding, tempo_scale)
    pattern = consensus.from_vector(vector)
    print(pattern_codec.render_text(pattern))
    print()
    print(pattern_codec.render_sequencer(pattern, _note_map(args)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drumgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract the consensus pattern from an audio file")
    p.add_argument("audio", help="input audio file (RIFF/WAVE built in)")
    p.add_argument("--out", help="write the pattern as JSON")
    p.add_argument("--clicks-out", help="write the strong-onset click track as WAVE")
    p.add_argument("--onsets-out", help="write the detected onsets as JSON")
    p.add_argument("--clusters-out", help="write the instrument clusters as JSON")
    p.add_argument("--role-order", metavar="R1,R2,R3,R4",
                   help="override the increasing-strength role order")
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("build-corpus", help="extract and join a training dataset")
    p.add_argument("--annotations", required=True, help="JSON Lines annotation file")
    p.add_argument("--embeddings", help="phrase embedding JSON file")
    p.add_argument("--pseudo-embeddings", type=int, metavar="SEED",
                   help="use the built-in deterministic embedding generator")
    p.add_argument("--audio-root", required=True, help="directory audio paths are relative to")
    p.add_argument("--out", required=True, help="dataset JSON output path")
    _add_common(p)
    p.set_defaults(func=cmd_build_corpus)

    for name, help_text in (("train", "train the regression network"),
                            ("cv", "k-fold cross-validation")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--dataset", required=True, help="dataset JSON file")
        p.add_argument("--epochs", type=int, default=500)
        p.add_argument("--batch-size", type=int, default=5)
        p.add_argument("--learning-rate", type=float, default=0.001)
        if name == "train":
            p.add_argument("--model-out", required=True, help="model JSON output path")
            p.set_defaults(func=cmd_train)
        else:
            p.add_argument("--folds", type=int, default=10)
            p.add_argument("--repeats", type=int, default=3)
            p.add_argument("--out", required=True, help="CSV output path")
            p.set_defaults(func=cmd_cv)
        _add_common(p)

    p = sub.add_parser("generate", help="generate a pattern from a word or phrase")
    p.add_argument("phrase", nargs="*", help="input word(s)/phrase(s); multiple are averaged")
    p.add_argument("--model", required=True, help="trained model JSON file")
    p.add_argument("--embeddings", help="phrase embedding JSON file")
    p.add_argument("--pseudo-embeddings", type=int, metavar="SEED",
                   help="use the built-in deterministic embedding generator")
    p.add_argument("--embedding-json", help="JSON file holding one raw 768-number vector")
    p.add_argument("--debug-embedding", action="store_true",
                   help="echo a hash of the resolved input vector to stderr")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except DomainError as exc:
        print(f"drumgen: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"drumgen: {exc}", file=sys.stderr)
        return 1
    except (DrumgenError, FileNotFoundError, OSError) as exc:
        print(f"drumgen: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
