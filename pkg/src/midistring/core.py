"""Domain types for constrained four-track songs and the label taxonomy."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Optional

import yaml

PITCH_MAX = 127
VELOCITY_MAX = 127
START_MAX = 7680
DURATIONS = (240, 480, 960)
DRUM_PITCHES = (35, 38, 42)  # kick, snare, closed hi-hat

N_GENRES = 13
N_STYLES = 25
N_MOODS = 5


class TrackRole(str, enum.Enum):
    MELODY = "melody"
    CHORDS = "chords"
    BASS = "bass"
    RHYTHM = "rhythm"


ROLES = (TrackRole.MELODY, TrackRole.CHORDS, TrackRole.BASS, TrackRole.RHYTHM)


class NoteEvent(NamedTuple):
    pitch: int
    duration: int
    velocity: int
    start: int

    @property
    def end(self) -> int:
        return self.start + self.duration


class Source(str, enum.Enum):
    LLM = "llm"
    MOCK = "mock"
    INGESTED = "ingested"


@dataclass(frozen=True)
class SongMeta:
    genre: str = ""
    style: str = ""
    mood: str = ""
    temperature: float = 0.0
    song_index: int = 0
    source: Source = Source.LLM


@dataclass(frozen=True, eq=True)
class Song:
    """Four role-keyed note lists plus generation metadata.

    A Song may lack roles or hold empty tracks while it is an intermediate
    (e.g. straight out of a parser); :func:`validate_song` is the gate.
    """

    tracks: Mapping[TrackRole, tuple[NoteEvent, ...]]
    meta: SongMeta = field(default_factory=SongMeta)

    def __post_init__(self):
        frozen = {TrackRole(r): tuple(NoteEvent(*n) for n in notes) for r, notes in self.tracks.items()}
        object.__setattr__(self, "tracks", MappingProxyType(frozen))

    def __eq__(self, other):
        if not isinstance(other, Song):
            return NotImplemented
        return dict(self.tracks) == dict(other.tracks) and self.meta == other.meta

    __hash__ = None

    def track(self, role: TrackRole) -> tuple[NoteEvent, ...]:
        return self.tracks.get(role, ())

    def notes_equal(self, other: "Song") -> bool:
        """Compare note content only, ignoring metadata."""
        return all(self.track(r) == other.track(r) for r in ROLES) and set(self.tracks) == set(other.tracks)

    def with_meta(self, meta: SongMeta) -> "Song":
        return Song(dict(self.tracks), meta)

    def sorted(self) -> "Song":
        return Song({r: sorted(n, key=note_sort_key) for r, n in self.tracks.items()}, self.meta)


def note_sort_key(note: NoteEvent) -> tuple[int, int]:
    return (note.start, note.pitch)


def song_note_count(song: Song) -> int:
    return sum(len(song.track(r)) for r in ROLES)


# -- validation -----------------------------------------------------------------


class ErrorKind(str, enum.Enum):
    MISSING_TRACK = "MissingTrack"
    EMPTY_TRACK = "EmptyTrack"
    PITCH_OUT_OF_RANGE = "PitchOutOfRange"
    INVALID_DURATION = "InvalidDuration"
    VELOCITY_OUT_OF_RANGE = "VelocityOutOfRange"
    START_OUT_OF_RANGE = "StartOutOfRange"
    INVALID_DRUM_PITCH = "InvalidDrumPitch"
    UNSORTED_TRACK = "UnsortedTrack"


@dataclass(frozen=True)
class ValidationIssue:
    kind: ErrorKind
    role: Optional[TrackRole] = None
    note_index: Optional[int] = None
    detail: str = ""

    def __str__(self):
        where = []
        if self.role is not None:
            where.append(self.role.value)
        if self.note_index is not None:
            where.append(f"note {self.note_index}")
        loc = f" [{', '.join(where)}]" if where else ""
        return f"{self.kind.value}{loc}: {self.detail}"


class InvalidSongError(ValueError):
    def __init__(self, issues: Iterable[ValidationIssue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


def validate_note(note: NoteEvent, is_rhythm: bool = False) -> Optional[ValidationIssue]:
    """Return the first violated constraint, or None when the note is legal."""
    pitch, duration, velocity, start = note
    if not 0 <= pitch <= PITCH_MAX:
        return ValidationIssue(ErrorKind.PITCH_OUT_OF_RANGE, detail=f"pitch {pitch} not in 0..{PITCH_MAX}")
    if duration not in DURATIONS:
        return ValidationIssue(ErrorKind.INVALID_DURATION, detail=f"duration {duration} not in {DURATIONS}")
    if not 0 <= velocity <= VELOCITY_MAX:
        return ValidationIssue(ErrorKind.VELOCITY_OUT_OF_RANGE, detail=f"velocity {velocity} not in 0..{VELOCITY_MAX}")
    if not 0 <= start <= START_MAX:
        return ValidationIssue(ErrorKind.START_OUT_OF_RANGE, detail=f"start {start} not in 0..{START_MAX}")
    if is_rhythm and pitch not in DRUM_PITCHES:
        return ValidationIssue(ErrorKind.INVALID_DRUM_PITCH, detail=f"drum pitch {pitch} not in {DRUM_PITCHES}")
    return None


def validate_song(song: Song) -> list[ValidationIssue]:
    """All violations in ``song``; an empty list means the song is valid."""
    issues = []
    for role in ROLES:
        if role not in song.tracks:
            issues.append(ValidationIssue(ErrorKind.MISSING_TRACK, role, detail="track absent"))
            continue
        notes = song.tracks[role]
        if not notes:
            issues.append(ValidationIssue(ErrorKind.EMPTY_TRACK, role, detail="track has no notes"))
            continue
        for i, note in enumerate(notes):
            issue = validate_note(note, is_rhythm=role is TrackRole.RHYTHM)
            if issue is not None:
                issues.append(ValidationIssue(issue.kind, role, i, issue.detail))
        for i in range(1, len(notes)):
            if note_sort_key(notes[i]) < note_sort_key(notes[i - 1]):
                issues.append(ValidationIssue(
                    ErrorKind.UNSORTED_TRACK, role, i,
                    f"note {i} (start {notes[i].start}) precedes note {i - 1} (start {notes[i - 1].start})"))
                break
    return issues


def check_song(song: Song) -> Song:
    issues = validate_song(song)
    if issues:
        raise InvalidSongError(issues)
    return song


# -- taxonomy -------------------------------------------------------------------


class TaxonomyError(ValueError):
    pass


_WS = re.compile(r"\s+")


def normalize_label(label: str) -> str:
    return _WS.sub(" ", label.strip().lower())


@dataclass(frozen=True)
class Taxonomy:
    genres: tuple[str, ...]
    styles: tuple[str, ...]
    moods: tuple[str, ...]

    def __post_init__(self):
        for name in ("genres", "styles", "moods"):
            labels = tuple(normalize_label(str(x)) for x in getattr(self, name))
            if any(not x for x in labels):
                raise TaxonomyError(f"empty label in {name}")
            seen = set()
            for x in labels:
                if x in seen:
                    raise TaxonomyError(f"duplicate label in {name}: {x!r}")
                seen.add(x)
            object.__setattr__(self, name, labels)

    @property
    def is_full(self) -> bool:
        return (len(self.genres), len(self.styles), len(self.moods)) == (N_GENRES, N_STYLES, N_MOODS)

    def check_cardinality(self) -> "Taxonomy":
        for name, want in (("genres", N_GENRES), ("styles", N_STYLES), ("moods", N_MOODS)):
            got = len(getattr(self, name))
            if got != want:
                raise TaxonomyError(f"expected {want} {name}, found {got}")
        return self

    def labels(self, task: str) -> tuple[str, ...]:
        if task == "genre":
            return self.genres
        if task == "style":
            return self.styles
        if task == "mood":
            return self.moods
        raise ValueError(f"unknown task {task!r}")

    def index(self, task: str, label: str) -> int:
        labels = self.labels(task)
        try:
            return labels.index(normalize_label(label))
        except ValueError:
            raise TaxonomyError(f"{label!r} is not a known {task}") from None

    def slice(self, n_genres: int, n_styles: int) -> "Taxonomy":
        """Leading sub-taxonomy for small sweeps; does not satisfy the full cardinality."""
        return Taxonomy(self.genres[:n_genres], self.styles[:n_styles], self.moods)

    def to_dict(self) -> dict:
        return {"genres": list(self.genres), "styles": list(self.styles), "moods": list(self.moods)}


def load_taxonomy(path, strict: bool = True) -> Taxonomy:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise TaxonomyError(f"cannot read taxonomy {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise TaxonomyError(f"{path}: expected a mapping with genres/styles/moods")
    lists = []
    for key in ("genres", "styles", "moods"):
        val = raw.get(key)
        if not isinstance(val, list) or not all(isinstance(x, str) for x in val):
            raise TaxonomyError(f"{path}: {key!r} must be a list of strings")
        lists.append(val)
    tax = Taxonomy(*lists)
    return tax.check_cardinality() if strict else tax


def default_taxonomy() -> Taxonomy:
    with resources.as_file(resources.files("midistring") / "data" / "taxonomy.yaml") as p:
        return load_taxonomy(p)
