"""Command-line entry point.

Exit codes: 0 success, 1 domain error (bad data, failed validation, I/O),
2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .codec import CodecError, load_song_file, serialize_song, write_song_file
from .core import InvalidSongError, Source, TaxonomyError, TrackRole, default_taxonomy, load_taxonomy
from .midi import MidiError, midi_to_song, song_to_midi
from .nn.checkpoint import Checkpoint, CheckpointError

log = logging.getLogger("midistring")

DOMAIN_ERRORS = (ValueError, OSError, KeyError, CodecError, MidiError, CheckpointError, TaxonomyError,
                 InvalidSongError, RuntimeError)


class UsageError(Exception):
    pass


# -- helpers -------------------------------------------------------------------------


def _taxonomy(args):
    if getattr(args, "taxonomy", None):
        return load_taxonomy(args.taxonomy)
    return default_taxonomy()


def _backend(args, taxonomy):
    from .llm import RemoteHttpBackend, mock_backend

    if args.backend == "mock":
        return mock_backend(args.seed, taxonomy)
    return RemoteHttpBackend()


def _load_song_any(path: Path):
    if path.suffix.lower() in (".mid", ".midi"):
        song, _ = midi_to_song(path.read_bytes())
        return song
    return load_song_file(path)


def _write_report(report, path):
    if path:
        Path(path).write_text(report.to_json() + "\n", encoding="utf-8")


def _print_table(header, rows):
    print("\t".join(header))
    for r in rows:
        print("\t".join(r))


def _fmt(x):
    return f"{x:.3f}"


# -- subcommands ---------------------------------------------------------------------


def cmd_generate(args):
    from .llm import generate_dataset

    tax = _taxonomy(args)
    if args.genres or args.styles:
        tax = tax.slice(args.genres or len(tax.genres), args.styles or len(tax.styles))
    backend = _backend(args, tax)
    source = Source.MOCK if args.backend == "mock" else Source.LLM
    rows = generate_dataset(backend, tax, args.per_combo, args.out, seed=args.seed, concurrency=args.concurrency,
                            max_attempts=args.max_attempts, resume=args.resume, source=source)
    ok = sum(r["outcome"] == "success" for r in rows)
    print(f"generated\t{ok}\nfailed\t{len(rows) - ok}\nmanifest\t{Path(args.out) / 'manifest.jsonl'}")
    return 0


def cmd_validate(args):
    from .datastore import audit_manifest, read_manifest

    manifest = read_manifest(args.manifest)
    problems = audit_manifest(manifest)
    for p in problems:
        print(p, file=sys.stderr)
    print(f"checked\t{len(manifest.successes())}\nproblems\t{len(problems)}")
    return 1 if problems else 0


def cmd_json2midi(args):
    song = load_song_file(args.input)
    Path(args.output).write_bytes(song_to_midi(song))
    return 0


def _parse_map(text):
    mapping = {}
    for part in text.split(","):
        key, _, role = part.partition("=")
        try:
            mapping[int(key)] = TrackRole(role.strip().lower())
        except ValueError as exc:
            raise UsageError(f"bad --map entry {part!r}: expected INDEX=melody|chords|bass|rhythm") from exc
    return mapping


def cmd_midi2json(args):
    mapping = _parse_map(args.map) if args.map else None
    song, report = midi_to_song(Path(args.input).read_bytes(), mapping)
    write_song_file(song, args.output)
    print(json.dumps(report.to_dict(), indent=2), file=sys.stderr)
    return 0


def cmd_render(args):
    from .pianoroll import melody_phrases, render_roll, song_to_roll

    song = _load_song_any(Path(args.input))
    if args.phrase:
        source, target = melody_phrases(song)
        roll = source if args.phrase == "source" else target
    else:
        roll = song_to_roll(song)
    render_roll(roll, args.out, scale=args.scale)
    print(args.out)
    return 0


def cmd_stats(args):
    from .datastore import dataset_stats, format_stats, read_manifest

    stats = dataset_stats(read_manifest(args.manifest))
    print(format_stats(stats))
    if args.json:
        Path(args.json).write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.figures:
        from .plotting import plot_stats

        plot_stats(stats, Path(args.figures) / "stats.png")
    return 0


def cmd_split(args):
    from .datastore import SplitSpec, read_manifest, split_dataset, write_manifest

    names = tuple(args.names) if args.names else (("train", "test") if len(args.ratios) == 2 else
                                                   ("train", "val", "test"))
    spec = SplitSpec(tuple(args.ratios), args.seed, args.stratify, names)
    src = Path(args.manifest)
    manifest = read_manifest(src)
    out_dir = Path(args.out_dir) if args.out_dir else src.parent
    stem = src.name[:-len(".jsonl")] if src.name.endswith(".jsonl") else src.stem
    for name, part in split_dataset(manifest, spec).items():
        path = write_manifest(part, out_dir / f"{stem}.{name}.jsonl")
        print(f"{name}\t{len(part)}\t{path}")
    return 0


def _train_config(args):
    from .models import TrainConfig

    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, seed=args.seed,
                       max_steps=args.max_steps, transpose=getattr(args, "transpose", 0))


def cmd_train_classify(args):
    from .datastore import classification_arrays, read_manifest
    from .models import train_classifier

    tax = _taxonomy(args)
    rolls, genres, styles = classification_arrays(read_manifest(args.manifest), tax)
    cfg = _train_config(args)
    res = train_classifier(rolls, genres, styles, len(tax.genres), len(tax.styles), cfg)
    res.checkpoint("cnn", vars(cfg)).save(args.out)
    for i, loss in enumerate(res.history, 1):
        print(f"epoch\t{i}\tloss\t{loss:.4f}")
    print(f"checkpoint\t{args.out}")
    return 0


def _labeled(args, tax):
    from .datastore import ingest_labels, manifest_labeled_set, read_manifest

    if args.labels:
        return ingest_labels(args.labels, tax, args.task)
    if args.manifest:
        return manifest_labeled_set(read_manifest(args.manifest), tax, args.task)
    raise UsageError("one of --labels or --manifest is required")


def cmd_eval_classify(args):
    from .models import chance_baselines, eval_classifier, load_classifier

    tax = _taxonomy(args)
    data = _labeled(args, tax)
    model = load_classifier(Checkpoint.load(args.checkpoint))
    names = tax.labels(args.task)
    report = eval_classifier(model, data.rolls(), data.labels, args.task, names, seed=args.seed)
    col = "Genre F1" if args.task == "genre" else "Style F1"
    _print_table(("Model", col), [("Chance", _fmt(chance_baselines("classification", len(names))["weighted_f1"])),
                                  ("CNN + LLM-MIDI", _fmt(report.metrics["weighted_f1"]))])
    _write_report(report, args.report)
    if args.figures:
        from .plotting import plot_class_f1

        plot_class_f1(report, Path(args.figures) / f"classify-{args.task}.png")
    return 0


def cmd_zeroshot(args):
    from .llm import zero_shot_classify
    from .models import chance_baselines
    from .models.metrics import per_class_f1
    from .models.train import EvalReport, config_hash

    tax = _taxonomy(args)
    data = _labeled(args, tax)
    backend = _backend(args, tax)
    names = tax.labels(args.task)
    unmatched = len(names)  # extra bucket scored as wrong
    preds = []
    for song in data.songs:
        rec = zero_shot_classify(backend, song, args.task, tax)
        preds.append(names.index(rec.label) if rec.matched else unmatched)
    f1, support = per_class_f1(data.labels, preds, len(names) + 1)
    wf1 = float((f1 * support).sum() / support.sum())
    per_class = {n: {"f1": float(f1[i]), "support": int(support[i])} for i, n in enumerate(names)}
    metrics = {"weighted_f1": wf1, "unmatched_rate": float(np.mean(np.asarray(preds) == unmatched))}
    report = EvalReport(f"zeroshot-{args.task}", metrics, per_class, len(preds), args.seed,
                        config_hash({"backend": args.backend, "task": args.task}))
    col = "Genre F1" if args.task == "genre" else "Style F1"
    _print_table(("Model", col), [("Chance", _fmt(chance_baselines("classification", len(names))["weighted_f1"])),
                                  ("LLM", _fmt(wf1))])
    _write_report(report, args.report)
    return 0


def cmd_train_melody(args):
    from .datastore import phrase_pairs, read_manifest
    from .models import train_melody

    manifest = read_manifest(args.manifest)
    sources, targets = phrase_pairs(manifest.load_song(r) for r in manifest.successes())
    cfg = _train_config(args)
    res = train_melody(sources, targets, cfg)
    res.checkpoint("melody", vars(cfg)).save(args.out)
    for i, loss in enumerate(res.history, 1):
        print(f"epoch\t{i}\tloss\t{loss:.4f}")
    print(f"checkpoint\t{args.out}")
    return 0


def cmd_make_queries(args):
    from .datastore import build_queries, phrase_pairs, read_manifest, write_queries

    manifest = read_manifest(args.manifest)
    sources, targets = phrase_pairs(manifest.load_song(r) for r in manifest.successes())
    queries = build_queries(sources, targets, args.n, args.seed)
    write_queries(queries, args.out, dense=args.dense)
    print(f"queries\t{len(queries)}\t{args.out}")
    return 0


def cmd_eval_melody(args):
    from .datastore import read_queries
    from .models import chance_baselines, eval_melody, load_melody

    model = load_melody(Checkpoint.load(args.checkpoint))
    queries = read_queries(args.queries)
    report = eval_melody(model, queries, seed=args.seed)
    chance = chance_baselines("ranking")
    cols = ["MAP", "HITS@1", "HITS@5", "HITS@10", "HITS@25"]
    _print_table(["Model"] + cols, [["Chance"] + [_fmt(chance[c]) for c in cols],
                                    ["Transformer + LLM-MIDI"] + [_fmt(report.metrics[c]) for c in cols]])
    _write_report(report, args.report)
    if args.figures:
        from .plotting import plot_ranking

        plot_ranking(report, Path(args.figures) / "melody-ranking.png")
    return 0


# -- parser --------------------------------------------------------------------------


def _add_train_flags(p):
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--max-steps", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="midistring", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="YAML file of flag defaults")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--taxonomy", help="taxonomy YAML (default: bundled)")

    p = sub.add_parser("generate", parents=[common], help="generate a dataset sweep")
    p.add_argument("--backend", choices=("remote", "mock"), default="mock")
    p.add_argument("--per-combo", type=int, default=50)
    p.add_argument("--out", required=True)
    p.add_argument("--concurrency", type=int, default=1)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--max-attempts", type=int, default=3)
    p.add_argument("--genres", type=int, default=None, help="use only the first N genres")
    p.add_argument("--styles", type=int, default=None, help="use only the first N styles")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="audit files against a manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("json2midi", help="convert a .song.json to a .mid")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_json2midi)

    p = sub.add_parser("midi2json", help="ingest a .mid into a .song.json")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--map", help="explicit roles, e.g. 1=melody,2=chords,3=bass,4=rhythm")
    p.set_defaults(func=cmd_midi2json)

    p = sub.add_parser("render", help="render a piano roll image")
    p.add_argument("input", help=".song.json or .mid")
    p.add_argument("--out", required=True)
    p.add_argument("--phrase", choices=("source", "target"))
    p.add_argument("--scale", type=int, default=4)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--json")
    p.add_argument("--figures", help="directory for figures")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", parents=[common], help="stratified train/val/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratios", type=float, nargs="+", default=[0.8, 0.1, 0.1])
    p.add_argument("--names", nargs="+")
    p.add_argument("--stratify", choices=("genre", "style", "genre_style"), default="genre_style")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train-classify", parents=[common], help="train the genre/style CNN")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train_classify)

    for name, func, helptext in (("eval-classify", cmd_eval_classify, "evaluate the CNN"),
                                 ("zeroshot-classify", cmd_zeroshot, "ask the LLM to classify")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--task", choices=("genre", "style"), required=True)
        p.add_argument("--labels", help="CSV of midi_path,label")
        p.add_argument("--manifest", help="evaluate on a manifest's songs instead")
        p.add_argument("--report", help="EvalReport JSON output")
        if name == "eval-classify":
            p.add_argument("--checkpoint", required=True)
            p.add_argument("--figures")
        else:
            p.add_argument("--backend", choices=("remote", "mock"), default="mock")
        p.set_defaults(func=func)

    p = sub.add_parser("train-melody", parents=[common], help="train the melody transformer")
    _add_train_flags(p)
    p.add_argument("--transpose", type=int, default=0, help="random +-N semitone shift per batch")
    p.set_defaults(func=cmd_train_melody)

    p = sub.add_parser("make-queries", parents=[common], help="build ranking queries from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=None, help="number of queries (default: one per song)")
    p.add_argument("--dense", action="store_true", help="dense 0/1 arrays instead of run lengths")
    p.set_defaults(func=cmd_make_queries)

    p = sub.add_parser("eval-melody", parents=[common], help="rank continuations")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--report")
    p.add_argument("--figures")
    p.set_defaults(func=cmd_eval_melody)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = yaml.safe_load(Path(known.config).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        parser.error(f"cannot read config {known.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must be a mapping")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in subparsers.choices.items():
        dests = {a.dest for a in sp._actions}
        values = {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)}
        values.update({k.replace("-", "_"): v for k, v in (cfg.get(name) or {}).items()})
        defaults = {k: v for k, v in values.items() if k in dests}
        if defaults:
            sp.set_defaults(**defaults)
            # a config value satisfies a required flag
            for a in sp._actions:
                if a.dest in defaults:
                    a.required = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
