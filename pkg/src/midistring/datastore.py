"""Manifest persistence, stratified splits, dataset statistics and ingestion.

A manifest is a line-delimited JSON file, one row per generated song, with
file paths stored relative to the manifest's directory.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .codec import CodecError, load_song_file
from .core import Song, SongMeta, Source, Taxonomy, TaxonomyError, normalize_label, song_note_count, validate_song
from .llm.generate import sha256_bytes
from .midi import MidiError, midi_to_song
from .models.ranking import RankedQuery
from .pianoroll import SkipReason, melody_phrases, song_to_roll

log = logging.getLogger(__name__)


class ManifestError(ValueError):
    pass


class ManifestWriter:
    """Appends one JSON row per call; each row is a single flushed write."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8", newline="\n")
        return self

    def append(self, row: dict) -> None:
        self._fh.write(json.dumps(row, sort_keys=True) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def __exit__(self, *exc):
        self._fh.close()
        self._fh = None


def write_manifest_row(path, row: dict) -> None:
    with ManifestWriter(path) as w:
        w.append(row)


@dataclass
class Manifest:
    rows: list
    root: Path = field(default_factory=Path)

    def __len__(self):
        return len(self.rows)

    def successes(self) -> list:
        return [r for r in self.rows if r.get("outcome") == "success"]

    def file(self, row: dict, key: str = "json_path") -> Path:
        return self.root / row[key]

    def load_song(self, row: dict) -> Song:
        meta = SongMeta(row["genre"], row["style"], row.get("mood", ""), row.get("temperature", 0.0),
                        row.get("song_index", 0), Source(row.get("source", "llm")))
        return load_song_file(self.file(row), meta)


def read_manifest(path) -> Manifest:
    path = Path(path)
    rows, seen = [], {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}: corrupt row at line {lineno}: {exc.msg}") from exc
            if not isinstance(row, dict) or "id" not in row:
                raise ManifestError(f"{path}: corrupt row at line {lineno}: missing id")
            if row["id"] in seen:
                raise ManifestError(f"{path}: duplicate song id {row['id']!r} at line {lineno} "
                                    f"(first at line {seen[row['id']]})")
            seen[row["id"]] = lineno
            rows.append(row)
    return Manifest(rows, path.parent)


def write_manifest(manifest: Manifest, path) -> Path:
    """Write rows to a new manifest, rewriting file paths relative to its directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in manifest.rows:
            row = dict(row)
            for key in ("json_path", "midi_path"):
                if key in row:
                    target = (manifest.root / row[key]).resolve()
                    row[key] = Path(os.path.relpath(target, path.parent.resolve())).as_posix()
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


# -- splits --------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple = (0.8, 0.1, 0.1)
    seed: int = 0
    stratify: str = "genre"  # genre | style | genre_style
    names: tuple = ("train", "val", "test")

    def __post_init__(self):
        if len(self.ratios) != len(self.names):
            raise ValueError("one ratio per split name is required")
        if any(r < 0 for r in self.ratios) or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must be non-negative and sum to 1, got {self.ratios}")
        if self.stratify not in ("genre", "style", "genre_style"):
            raise ValueError(f"unknown stratification {self.stratify!r}")


def _stratum(row: dict, how: str) -> str:
    if how == "genre":
        return row["genre"]
    if how == "style":
        return row["style"]
    return row["genre"] + "|" + row["style"]


def allocate(n: int, ratios) -> list[int]:
    """Largest-remainder counts: each within 1 of n*ratio and summing to n."""
    exact = [n * r for r in ratios]
    counts = [int(np.floor(x)) for x in exact]
    rest = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def _stable_key(text: str) -> int:
    return int(sha256_bytes(text.encode("utf-8"))[:8], 16)


def split_dataset(manifest: Manifest, spec: SplitSpec) -> dict[str, Manifest]:
    """Stratified, seeded partition of the successful rows."""
    strata = defaultdict(list)
    for row in manifest.successes():
        strata[_stratum(row, spec.stratify)].append(row)
    parts = {name: [] for name in spec.names}
    nonzero = sum(r > 0 for r in spec.ratios)
    for key in sorted(strata):
        rows = sorted(strata[key], key=lambda r: r["id"])
        if len(rows) < nonzero:
            log.warning("stratum %r has %d songs for %d non-empty splits; assignment is best-effort",
                        key, len(rows), nonzero)
        rng = np.random.default_rng([spec.seed, _stable_key(key)])
        order = rng.permutation(len(rows))
        start = 0
        for name, count in zip(spec.names, allocate(len(rows), spec.ratios)):
            parts[name].extend(rows[i] for i in order[start:start + count])
            start += count
    for name in parts:
        parts[name].sort(key=lambda r: r["id"])
    return {name: Manifest(rows, manifest.root) for name, rows in parts.items()}


# -- statistics and audit ------------------------------------------------------------


def dataset_stats(manifest: Manifest) -> dict:
    ok = manifest.successes()
    return {
        "total_files": len(ok),
        "failures": len(manifest.rows) - len(ok),
        "per_genre": dict(sorted(Counter(r["genre"] for r in ok).items())),
        "per_style": dict(sorted(Counter(r["style"] for r in ok).items())),
        "total_note_events": int(sum(r.get("note_count", 0) for r in ok)),
        "temperature_histogram": {f"{t:.2f}": c for t, c in sorted(Counter(r["temperature"] for r in ok).items())},
        "mood_histogram": dict(sorted(Counter(r["mood"] for r in ok).items())),
        "tracks_per_file": 4,
        "sequence_length": "8 bars (7680 ticks at 128 time steps)",
    }


def format_stats(stats: dict, sep: str = "\t") -> str:
    def per_class(counts):
        vals = set(counts.values())
        if len(vals) == 1:
            return f"{len(counts)} ({vals.pop()} per class)"
        return f"{len(counts)} ({min(counts.values())}-{max(counts.values())} per class)" if counts else "0"

    temps = list(stats["temperature_histogram"])
    rows = [
        ("Characteristic", "Description"),
        ("Total # Files", f"{stats['total_files']:,}"),
        ("# of Genre Classes", per_class(stats["per_genre"])),
        ("# of Style Classes", per_class(stats["per_style"])),
        ("Tracks per File", "4 (melody, chords, bass, rhythm)"),
        ("Sequence Length", stats["sequence_length"]),
        ("Pitch Range", "0-127; For rhythm, 35/38/42"),
        ("Duration Values", "240/480/960"),
        ("Velocity Range", "0-127"),
        ("Temperature", f"{temps[0]}-{temps[-1]}" if temps else "-"),
        ("Max Tokens", "1200"),
        ("Total Note Events", f"{stats['total_note_events']:,}"),
        ("Mood Variation", "/".join(stats["mood_histogram"]) or "-"),
    ]
    return "\n".join(sep.join(r) for r in rows)


def audit_manifest(manifest: Manifest) -> list[str]:
    """Problems found re-checking every successful row against its files."""
    problems = []
    for row in manifest.successes():
        for key, hkey in (("json_path", "json_sha256"), ("midi_path", "midi_sha256")):
            p = manifest.file(row, key)
            if not p.exists():
                problems.append(f"{row['id']}: missing {p}")
                continue
            if sha256_bytes(p.read_bytes()) != row.get(hkey):
                problems.append(f"{row['id']}: hash mismatch for {p}")
        try:
            song = manifest.load_song(row)
        except (CodecError, OSError) as exc:
            problems.append(f"{row['id']}: {exc}")
            continue
        issues = validate_song(song)
        if issues:
            problems.append(f"{row['id']}: {issues[0]}")
        elif song_note_count(song) != row.get("note_count"):
            problems.append(f"{row['id']}: note count {song_note_count(song)} != {row.get('note_count')}")
    return problems


# -- arrays for the models -----------------------------------------------------------


def classification_arrays(manifest: Manifest, taxonomy: Taxonomy):
    """(rolls uint8 (N,4,128,128), genre indices, style indices) for successful rows."""
    rows = manifest.successes()
    rolls = np.zeros((len(rows), 4, 128, 128), dtype=np.uint8)
    genres = np.zeros(len(rows), dtype=np.int64)
    styles = np.zeros(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        rolls[i] = song_to_roll(manifest.load_song(row))
        genres[i] = taxonomy.index("genre", row["genre"])
        styles[i] = taxonomy.index("style", row["style"])
    return rolls, genres, styles


def phrase_pairs(songs: Iterable[Song]):
    """Stacked (sources, targets) from songs whose melody fills both halves."""
    src, tgt, skipped = [], [], 0
    for song in songs:
        try:
            s, t = melody_phrases(song)
        except SkipReason:
            skipped += 1
            continue
        src.append(s)
        tgt.append(t)
    if skipped:
        log.info("skipped %d songs with an empty melody half", skipped)
    if not src:
        return np.zeros((0, 64, 128), np.uint8), np.zeros((0, 64, 128), np.uint8)
    return np.stack(src), np.stack(tgt)


def build_queries(sources: np.ndarray, targets: np.ndarray, n_queries: Optional[int] = None, seed: int = 0,
                  n_candidates: int = 50) -> list[RankedQuery]:
    """One query per phrase pair: its true continuation among 49 other continuations."""
    n = len(sources)
    if n < n_candidates:
        raise ValueError(f"need at least {n_candidates} phrase pairs to draw negatives, got {n}")
    rng = np.random.default_rng([seed, 23])
    picks = range(n) if n_queries is None else rng.choice(n, size=min(n_queries, n), replace=False)
    queries = []
    for q in picks:
        others = rng.choice(np.delete(np.arange(n), q), size=n_candidates - 1, replace=False)
        pos = int(rng.integers(n_candidates))
        idx = list(others[:pos]) + [q] + list(others[pos:])
        queries.append(RankedQuery(sources[q], targets[idx], pos))
    return queries


# -- query file format ---------------------------------------------------------------


def encode_roll(roll: np.ndarray, dense: bool = False) -> dict:
    """Run-length form: ``runs`` alternates zero/one run lengths over the row-major
    flattening, starting with a (possibly empty) zero run."""
    roll = np.asarray(roll, dtype=np.uint8)
    if dense:
        return {"shape": list(roll.shape), "dense": roll.tolist()}
    flat = roll.ravel()
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0] == 1:
        runs = [0] + runs
    return {"shape": list(roll.shape), "runs": runs}


def decode_roll(obj) -> np.ndarray:
    if isinstance(obj, list):
        return np.asarray(obj, dtype=np.uint8)
    shape = tuple(obj["shape"])
    if "dense" in obj:
        arr = np.asarray(obj["dense"], dtype=np.uint8)
    else:
        vals = np.arange(len(obj["runs"])) % 2
        arr = np.repeat(vals, obj["runs"]).astype(np.uint8)
    if arr.size != int(np.prod(shape)):
        raise ValueError(f"roll encodes {arr.size} cells, shape {shape} needs {int(np.prod(shape))}")
    if arr.max(initial=0) > 1:
        raise ValueError("roll entries must be 0 or 1")
    return arr.reshape(shape)


def write_queries(queries: Iterable[RankedQuery], path, dense: bool = False) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in queries:
            fh.write(json.dumps({
                "source": encode_roll(q.source, dense),
                "candidates": [encode_roll(c, dense) for c in q.candidates],
                "positive_index": int(q.positive_index),
            }) + "\n")
    return path


def read_queries(path) -> list[RankedQuery]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(RankedQuery(decode_roll(obj["source"]),
                                       np.stack([decode_roll(c) for c in obj["candidates"]]),
                                       int(obj["positive_index"])))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}: bad query at line {lineno}: {exc}") from exc
    return out


# -- external labelled MIDI ----------------------------------------------------------


@dataclass
class LabeledSet:
    songs: list
    labels: np.ndarray
    paths: list
    skipped: list  # (row number, path, reason)

    def rolls(self) -> np.ndarray:
        if not self.songs:
            return np.zeros((0, 4, 128, 128), dtype=np.uint8)
        return np.stack([song_to_roll(s) for s in self.songs])


_PATH_COLUMNS = ("midi_path", "path", "file", "midi")


def ingest_labels(csv_path, taxonomy: Taxonomy, task: str) -> LabeledSet:
    """Read ``midi_path,label`` rows; MIDI paths are relative to the CSV's directory."""
    csv_path = Path(csv_path)
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip().lower() for f in (reader.fieldnames or [])]
        path_col = next((reader.fieldnames[fields.index(c)] for c in _PATH_COLUMNS if c in fields), None)
        label_col = reader.fieldnames[fields.index("label")] if "label" in fields else None
        if path_col is None:
            raise ValueError(f"{csv_path}: no MIDI file column (expected one of {', '.join(_PATH_COLUMNS)})")
        if label_col is None:
            raise ValueError(f"{csv_path}: no 'label' column")
        rows = list(reader)
    songs, labels, paths, skipped = [], [], [], []
    labelset = taxonomy.labels(task)
    for i, row in enumerate(rows, 2):
        p = csv_path.parent / row[path_col].strip()
        label = normalize_label(row[label_col] or "")
        if label not in labelset:
            skipped.append((i, str(p), f"label {label!r} not in {task} taxonomy"))
            continue
        try:
            song, _ = midi_to_song(p.read_bytes(), meta=SongMeta(source=Source.INGESTED))
        except (OSError, MidiError) as exc:
            skipped.append((i, str(p), str(exc)))
            continue
        songs.append(song)
        labels.append(labelset.index(label))
        paths.append(str(p))
    for row_no, p, why in skipped:
        log.warning("row %d (%s) skipped: %s", row_no, p, why)
    if not songs:
        raise ValueError(f"{csv_path}: no usable rows ({len(skipped)} skipped)")
    return LabeledSet(songs, np.asarray(labels, dtype=np.int64), paths, skipped)


def manifest_labeled_set(manifest: Manifest, taxonomy: Taxonomy, task: str) -> LabeledSet:
    rows = manifest.successes()
    songs = [manifest.load_song(r) for r in rows]
    try:
        labels = np.asarray([taxonomy.index(task, r[task]) for r in rows], dtype=np.int64)
    except TaxonomyError as exc:
        raise ValueError(str(exc)) from exc
    return LabeledSet(songs, labels, [str(manifest.file(r)) for r in rows], [])
