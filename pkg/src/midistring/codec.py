"""Canonical JSON form of a Song and recovery of JSON from raw LLM text."""
from __future__ import annotations

import json

from .core import ROLES, InvalidSongError, Song, SongMeta, validate_song


class CodecError(ValueError):
    kind = "CodecError"


class MalformedJson(CodecError):
    kind = "MalformedJson"


class WrongShape(CodecError):
    kind = "WrongShape"


class NoJsonFound(CodecError):
    kind = "NoJsonFound"


class ValidationFailed(CodecError):
    kind = "ValidationFailed"

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


def song_to_obj(song: Song) -> dict:
    return {r.value: [list(n) for n in song.track(r)] for r in ROLES}


def serialize_song(song: Song) -> str:
    """Canonical text: fixed key order, ``", "``/``": "`` separators, no trailing newline."""
    issues = validate_song(song)
    if issues:
        raise InvalidSongError(issues)
    return json.dumps(song_to_obj(song), separators=(", ", ": "))


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def parse_song(text: str, meta: SongMeta | None = None) -> Song:
    """Decode, re-sort into canonical (start, pitch) order and validate."""
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedJson(str(exc)) from exc
    if not isinstance(obj, dict):
        raise WrongShape(f"top level must be an object, got {type(obj).__name__}")
    tracks = {}
    for role in ROLES:
        if role.value not in obj:
            continue
        notes = obj[role.value]
        if not isinstance(notes, list):
            raise WrongShape(f"{role.value}: expected a list of notes")
        parsed = []
        for i, note in enumerate(notes):
            if not isinstance(note, list) or len(note) != 4:
                raise WrongShape(f"{role.value}[{i}]: expected [pitch, duration, velocity, start]")
            if not all(_is_int(x) for x in note):
                raise WrongShape(f"{role.value}[{i}]: non-integer element in {note}")
            parsed.append(tuple(note))
        tracks[role] = parsed
    song = Song(tracks, meta or SongMeta()).sorted()
    issues = validate_song(song)
    if issues:
        raise ValidationFailed(issues)
    return song


def extract_json_payload(raw: str) -> str:
    """First balanced top-level ``{...}`` in ``raw``; braces inside strings are ignored."""
    start = raw.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escaped = False
        for i in range(start, len(raw)):
            c = raw[i]
            if in_str:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_str = False
            elif c == '"':
                in_str = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    return raw[start:i + 1]
        # unbalanced from here; try a later opening brace
        start = raw.find("{", start + 1)
    raise NoJsonFound("no balanced JSON object in completion")


def load_song_file(path, meta: SongMeta | None = None) -> Song:
    with open(path, encoding="utf-8") as fh:
        return parse_song(fh.read(), meta)


def write_song_file(song: Song, path) -> str:
    text = serialize_song(song)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text

