"""Single-song generation with retries and the genre x style sweep."""
from __future__ import annotations

import hashlib
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..codec import CodecError, extract_json_payload, parse_song, write_song_file
from ..core import InvalidSongError, Song, SongMeta, Source, Taxonomy, song_note_count
from ..midi import song_to_midi
from .backends import BackendError, CompletionRequest, LlmBackend
from .prompts import MAX_TOKENS, build_generation_prompt, temperature_for_index

log = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3


@dataclass
class GenerationRecord:
    meta: SongMeta
    attempts: int
    song: Optional[Song] = None
    error: Optional[str] = None
    error_kind: Optional[str] = None
    raw: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.song is not None


def generate_song(backend: LlmBackend, genre: str, style: str, mood: str, index: int, taxonomy: Taxonomy,
                  max_attempts: int = DEFAULT_MAX_ATTEMPTS, source: Source = Source.LLM) -> GenerationRecord:
    """Prompt until a reply parses and validates, resending the full prompt each time."""
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    temperature = temperature_for_index(index)
    meta = SongMeta(genre, style, mood, temperature, index, source)
    prompt = build_generation_prompt(genre, style, mood, taxonomy)
    request = CompletionRequest(prompt, temperature, MAX_TOKENS)
    rec = GenerationRecord(meta, 0)
    for attempt in range(1, max_attempts + 1):
        rec.attempts = attempt
        try:
            raw = backend.complete(request)
            rec.raw.append(raw)
            song = parse_song(extract_json_payload(raw), meta)
        except (CodecError, BackendError, InvalidSongError) as exc:
            rec.error = str(exc)
            rec.error_kind = getattr(exc, "kind", type(exc).__name__)
            log.debug("%s/%s/%d attempt %d failed: %s", genre, style, index, attempt, exc)
            continue
        rec.song, rec.error, rec.error_kind = song, None, None
        return rec
    return rec


def slug(label: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-") or "x"


def song_id(genre: str, style: str, index: int) -> str:
    return f"{genre}|{style}|{index}"


def mood_for(seed: int, genre_idx: int, style_idx: int, index: int, moods) -> str:
    """Seeded uniform mood choice, independent of sweep order."""
    rng = np.random.default_rng([seed, 11, genre_idx, style_idx, index])
    return moods[int(rng.integers(len(moods)))]


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_outputs(rec: GenerationRecord, out_dir: Path) -> dict:
    m = rec.meta
    rel_dir = Path(slug(m.genre)) / slug(m.style)
    (out_dir / rel_dir).mkdir(parents=True, exist_ok=True)
    json_rel = rel_dir / f"{m.song_index}.song.json"
    midi_rel = rel_dir / f"{m.song_index}.mid"
    text = write_song_file(rec.song, out_dir / json_rel)
    midi = song_to_midi(rec.song)
    (out_dir / midi_rel).write_bytes(midi)
    return {
        "json_path": json_rel.as_posix(),
        "midi_path": midi_rel.as_posix(),
        "note_count": song_note_count(rec.song),
        "json_sha256": sha256_bytes(text.encode("utf-8")),
        "midi_sha256": sha256_bytes(midi),
    }


def record_row(rec: GenerationRecord, files: Optional[dict], seed: int) -> dict:
    m = rec.meta
    row = {
        "id": song_id(m.genre, m.style, m.song_index),
        "genre": m.genre,
        "style": m.style,
        "mood": m.mood,
        "temperature": m.temperature,
        "song_index": m.song_index,
        "source": m.source.value,
        "sweep_seed": seed,
        "attempts": rec.attempts,
        "outcome": "success" if rec.ok else "failure",
    }
    if files:
        row.update(files)
    if not rec.ok:
        row["error"] = rec.error
        row["error_kind"] = rec.error_kind
    return row


def generate_dataset(backend: LlmBackend, taxonomy: Taxonomy, songs_per_combo: int, out_dir, *,
                     seed: int = 0, concurrency: int = 1, max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                     manifest_name: str = "manifest.jsonl", resume: bool = False,
                     source: Source = Source.LLM) -> list[dict]:
    """Sweep every genre x style combination ``songs_per_combo`` times.

    Rows are appended to ``out_dir/manifest_name`` in (genre, style, index)
    order whatever order the backend calls finish in.  With ``resume`` the
    triples already in the manifest are skipped.  Failures are recorded, never
    raised.  Returns the rows written by this call.
    """
    from ..datastore import ManifestWriter, read_manifest

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / manifest_name
    done = set()
    if manifest_path.exists():
        if not resume:
            raise FileExistsError(f"{manifest_path} exists; pass resume=True to continue it")
        done = {r["id"] for r in read_manifest(manifest_path).rows}

    jobs = []
    for gi, genre in enumerate(taxonomy.genres):
        for si, style in enumerate(taxonomy.styles):
            for idx in range(songs_per_combo):
                if song_id(genre, style, idx) in done:
                    continue
                jobs.append((genre, style, mood_for(seed, gi, si, idx, taxonomy.moods), idx))

    def run(job):
        genre, style, mood, idx = job
        return generate_song(backend, genre, style, mood, idx, taxonomy, max_attempts, source)

    rows = []
    with ManifestWriter(manifest_path) as writer:
        if concurrency <= 1:
            results = map(run, jobs)
        else:
            pool = ThreadPoolExecutor(max_workers=concurrency)
            results = pool.map(run, jobs)  # yields in submission order
        try:
            for rec in results:
                files = _write_outputs(rec, out_dir) if rec.ok else None
                row = record_row(rec, files, seed)
                writer.append(row)
                rows.append(row)
        finally:
            if concurrency > 1:
                pool.shutdown(wait=True)
    n_ok = sum(r["outcome"] == "success" for r in rows)
    log.info("generated %d/%d songs into %s", n_ok, len(rows), out_dir)
    return rows
