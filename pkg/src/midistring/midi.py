"""Standard MIDI File writer for generated songs and reader for ingestion.

Writer layout (format 1, 480 ticks per quarter note):

* track 0: time signature 4/4, tempo 120 BPM, a sequencer-specific marker
* tracks 1-4: melody (ch 0, piano), chords (ch 1, piano),
  bass (ch 2, GM program 33), rhythm (ch 9, percussion)

Every note is a Note-On at ``start`` and an explicit ``0x80`` Note-Off with
velocity 0 at ``start + duration``.  No running status is written.  Because a
song may legally contain velocity-0 notes, the marker in track 0 tells the
reader that a ``0x9n`` event with velocity 0 is a real note rather than the
conventional note-off alias.
"""
from __future__ import annotations

import struct
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .core import (
    DRUM_PITCHES, DURATIONS, ROLES, START_MAX, NoteEvent, Song, SongMeta, Source,
    TrackRole, check_song, note_sort_key, validate_song,
)

DIVISION = 480
TEMPO_US_PER_QN = 500_000  # 120 BPM
CHANNELS = {TrackRole.MELODY: 0, TrackRole.CHORDS: 1, TrackRole.BASS: 2, TrackRole.RHYTHM: 9}
PROGRAMS = {TrackRole.MELODY: 0, TrackRole.CHORDS: 0, TrackRole.BASS: 33}
DRUM_CHANNEL = 9
MIN_INGEST_TICKS = 120
# FF 7F payload: manufacturer 0x7D (non-commercial) + tag
WRITER_MARKER = b"\x7dmidistring:vel0-on"


class MidiError(ValueError):
    kind = "MidiError"


class BadHeader(MidiError):
    kind = "BadHeader"


class TruncatedChunk(MidiError):
    kind = "TruncatedChunk"


class UnsupportedDivision(MidiError):
    kind = "UnsupportedDivision"


class NoMappableTracks(MidiError):
    kind = "NoMappableTracks"


class RunawayVlq(MidiError):
    kind = "RunawayVlq"


# -- variable-length quantities -------------------------------------------------


def encode_vlq(value: int) -> bytes:
    if not 0 <= value < 1 << 28:
        raise ValueError(f"VLQ value out of range: {value}")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def decode_vlq(data: bytes, pos: int = 0) -> tuple[int, int]:
    """Return ``(value, bytes consumed)`` for the VLQ starting at ``pos``."""
    value = 0
    for i in range(4):
        if pos + i >= len(data):
            raise TruncatedChunk("VLQ runs past end of data")
        b = data[pos + i]
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, i + 1
    raise RunawayVlq("VLQ longer than 4 bytes")


# -- writer ---------------------------------------------------------------------


def _chunk(tag: bytes, body: bytes) -> bytes:
    return tag + struct.pack(">I", len(body)) + body


def _meta(kind: int, payload: bytes) -> bytes:
    return bytes([0xFF, kind]) + encode_vlq(len(payload)) + payload


def _track_body(events: list[tuple[int, bytes]]) -> bytes:
    """``events`` are (absolute tick, message bytes), already ordered."""
    out = bytearray()
    now = 0
    for tick, msg in events:
        out += encode_vlq(tick - now)
        out += msg
        now = tick
    out += b"\x00" + _meta(0x2F, b"")
    return bytes(out)


def _note_track(role: TrackRole, notes) -> bytes:
    ch = CHANNELS[role]
    events = [(0, _meta(0x03, role.value.encode("ascii")))]
    if role in PROGRAMS:
        events.append((0, bytes([0xC0 | ch, PROGRAMS[role]])))
    timed = []
    for n in notes:
        # sort keys: offs before ons at a tick; ons by (pitch, end) so FIFO pairing recovers durations
        timed.append(((n.start, 1, n.pitch, n.end, n.velocity), bytes([0x90 | ch, n.pitch, n.velocity])))
        timed.append(((n.end, 0, n.pitch, n.start, 0), bytes([0x80 | ch, n.pitch, 0])))
    timed.sort(key=lambda e: e[0])
    events.extend((key[0], msg) for key, msg in timed)
    return _track_body(events)


def song_to_midi(song: Song) -> bytes:
    check_song(song)
    conductor = _track_body([
        (0, _meta(0x58, bytes([4, 2, 24, 8]))),
        (0, _meta(0x51, TEMPO_US_PER_QN.to_bytes(3, "big"))),
        (0, _meta(0x7F, WRITER_MARKER)),
    ])
    tracks = [conductor] + [_note_track(r, song.track(r)) for r in ROLES]
    header = _chunk(b"MThd", struct.pack(">HHH", 1, len(tracks), DIVISION))
    return header + b"".join(_chunk(b"MTrk", t) for t in tracks)


# -- reader ---------------------------------------------------------------------


@dataclass
class RawEvent:
    tick: int
    status: int
    data: bytes


@dataclass
class MidiDocument:
    format: int
    division: int
    tracks: list[list[RawEvent]]
    names: list[Optional[str]]
    vel0_is_note: bool = False


def _parse_track(body: bytes) -> tuple[list[RawEvent], Optional[str], bool]:
    events = []
    pos = 0
    tick = 0
    running = None
    name = None
    marker = False
    while pos < len(body):
        delta, n = decode_vlq(body, pos)
        pos += n
        tick += delta
        if pos >= len(body):
            raise TruncatedChunk("event missing after delta time")
        status = body[pos]
        if status == 0xFF:
            if pos + 2 > len(body):
                raise TruncatedChunk("truncated meta event")
            kind = body[pos + 1]
            length, n = decode_vlq(body, pos + 2)
            start = pos + 2 + n
            payload = body[start:start + length]
            if len(payload) != length:
                raise TruncatedChunk("truncated meta payload")
            pos = start + length
            if kind == 0x03 and name is None:
                name = payload.decode("latin-1")
            elif kind == 0x7F and payload == WRITER_MARKER:
                marker = True
            elif kind == 0x2F:
                break
            events.append(RawEvent(tick, 0xFF, bytes([kind]) + payload))
            continue
        if status in (0xF0, 0xF7):
            length, n = decode_vlq(body, pos + 1)
            pos += 1 + n + length
            if pos > len(body):
                raise TruncatedChunk("truncated sysex")
            continue
        if status & 0x80:
            running = status
            pos += 1
        elif running is None:
            raise MidiError(f"data byte {status:#04x} without running status")
        width = 1 if running & 0xF0 in (0xC0, 0xD0) else 2
        data = body[pos:pos + width]
        if len(data) != width:
            raise TruncatedChunk("truncated channel message")
        pos += width
        events.append(RawEvent(tick, running, bytes(data)))
    return events, name, marker


def read_midi(data: bytes) -> MidiDocument:
    if len(data) < 14 or data[:4] != b"MThd":
        raise BadHeader("missing MThd header")
    hlen = struct.unpack(">I", data[4:8])[0]
    if hlen < 6 or len(data) < 8 + hlen:
        raise TruncatedChunk("header chunk truncated")
    fmt, ntrk, division = struct.unpack(">HHH", data[8:14])
    if division & 0x8000:
        raise UnsupportedDivision("SMPTE time division is not supported")
    if division == 0:
        raise BadHeader("division of 0 ticks")
    pos = 8 + hlen
    tracks, names, marker = [], [], False
    while pos < len(data) and len(tracks) < ntrk:
        if pos + 8 > len(data):
            raise TruncatedChunk("chunk header truncated")
        tag = data[pos:pos + 4]
        length = struct.unpack(">I", data[pos + 4:pos + 8])[0]
        body = data[pos + 8:pos + 8 + length]
        if len(body) != length:
            raise TruncatedChunk(f"chunk {tag!r} declares {length} bytes, {len(body)} present")
        pos += 8 + length
        if tag != b"MTrk":
            continue
        events, name, m = _parse_track(body)
        tracks.append(events)
        names.append(name)
        marker = marker or m
    if len(tracks) < ntrk:
        raise TruncatedChunk(f"header declares {ntrk} tracks, found {len(tracks)}")
    return MidiDocument(fmt, division, tracks, names, marker)


@dataclass
class RoleMappingReport:
    assignments: dict[int, TrackRole] = field(default_factory=dict)
    notes: dict[int, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "assignments": {str(k): v.value for k, v in sorted(self.assignments.items())},
            "notes": {str(k): v for k, v in sorted(self.notes.items())},
            "warnings": list(self.warnings),
        }


@dataclass
class _Unit:
    key: int
    channels: set
    notes: list  # (start, end, pitch, velocity) in source ticks

    @property
    def mean_pitch(self) -> float:
        return sum(n[2] for n in self.notes) / len(self.notes)

    @property
    def polyphony(self) -> int:
        edges = sorted([(s, 1) for s, _, _, _ in self.notes] + [(e, -1) for _, e, _, _ in self.notes])
        best = cur = 0
        for _, d in edges:
            cur += d
            best = max(best, cur)
        return best


def _pair_key(ons, offs, valid) -> list[tuple[int, int, int]]:
    """Pair note-ons with note-offs of one (channel, pitch).

    ``ons`` are (tick, velocity) and ``offs`` ticks, both in event order.  A
    pairing in which every duration passes ``valid`` is searched for with a
    FIFO preference; if none exists plain FIFO is used.
    """
    events = sorted([(t, 0, i) for i, t in enumerate(offs)] + [(t, 1, i) for i, (t, _) in enumerate(ons)])
    budget = [20_000]

    def search(k, active, acc):
        budget[0] -= 1
        if budget[0] < 0:
            return None
        if k == len(events):
            return acc
        t, kind, i = events[k]
        if kind == 1:
            return search(k + 1, active + [i], acc)
        if not active:
            return search(k + 1, active, acc)
        for j, on in enumerate(active):
            if valid(t - ons[on][0]):
                found = search(k + 1, active[:j] + active[j + 1:], acc + [(on, t)])
                if found is not None:
                    return found
        return None

    result = None
    if len(ons) <= 64:
        result = search(0, [], [])
    if result is None:
        result, active = [], []
        for t, kind, i in events:
            if kind == 1:
                active.append(i)
            elif active:
                result.append((active.pop(0), t))
    return [(ons[i][0], end, ons[i][1]) for i, end in result]


def _collect_units(doc: MidiDocument) -> list[_Unit]:
    units: dict[int, _Unit] = {}
    by_source = defaultdict(lambda: ([], []))  # (unit key, ch, pitch) -> (ons, offs)
    for ti, events in enumerate(doc.tracks):
        for ev in events:
            kind = ev.status & 0xF0
            if kind not in (0x80, 0x90):
                continue
            ch = ev.status & 0x0F
            key = ch if doc.format == 0 else ti
            pitch, vel = ev.data[0], ev.data[1]
            ons, offs = by_source[(key, ch, pitch)]
            if kind == 0x90 and (vel > 0 or doc.vel0_is_note):
                ons.append((ev.tick, vel))
            else:
                offs.append(ev.tick)
    scale = DIVISION / doc.division

    def valid(d):
        return round(d * scale) in DURATIONS

    for (key, ch, pitch), (ons, offs) in sorted(by_source.items()):
        unit = units.setdefault(key, _Unit(key, set(), []))
        unit.channels.add(ch)
        for start, end, vel in _pair_key(ons, offs, valid):
            unit.notes.append((start, end, pitch, vel))
    return [u for _, u in sorted(units.items()) if u.notes]


def _assign_roles(units: list[_Unit], doc: MidiDocument, report: RoleMappingReport) -> dict[int, TrackRole]:
    named = {}
    if doc.format != 0:
        for u in units:
            name = (doc.names[u.key] or "").strip().lower()
            if name in {r.value for r in ROLES} and TrackRole(name) not in named.values():
                named[u.key] = TrackRole(name)
    if len(named) == len(ROLES):
        for k in named:
            report.notes[k] = "matched by track name"
        return named

    mapping: dict[int, TrackRole] = {}
    remaining = list(units)
    drums = [u for u in remaining if DRUM_CHANNEL in u.channels]
    if drums:
        pick = max(drums, key=lambda u: (len(u.notes), -u.key))
        mapping[pick.key] = TrackRole.RHYTHM
        report.notes[pick.key] = "channel 10 (percussion)"
        for u in drums:
            remaining.remove(u)
            if u is not pick:
                report.warnings.append(f"unit {u.key}: extra percussion unit dropped")
    if remaining:
        pick = min(remaining, key=lambda u: (u.mean_pitch, u.key))
        mapping[pick.key] = TrackRole.BASS
        report.notes[pick.key] = f"lowest mean pitch {pick.mean_pitch:.1f}"
        remaining.remove(pick)
    if remaining:
        pick = max(remaining, key=lambda u: (u.polyphony, -u.key))
        mapping[pick.key] = TrackRole.CHORDS
        report.notes[pick.key] = f"highest polyphony {pick.polyphony}"
        remaining.remove(pick)
    if remaining:
        pick = max(remaining, key=lambda u: (len(u.notes), -u.key))
        mapping[pick.key] = TrackRole.MELODY
        report.notes[pick.key] = f"most notes of the rest ({len(pick.notes)})"
        remaining.remove(pick)
    for u in remaining:
        report.warnings.append(f"unit {u.key}: not assigned to any role")
    return mapping


def _snap_duration(ticks: int) -> int:
    # nearest allowed value; ties go to the longer one
    return min(DURATIONS, key=lambda d: (abs(d - ticks), -d))


def _drum_class(pitch: int) -> int:
    if pitch in DRUM_PITCHES:
        return pitch
    if pitch == 36:
        return 35
    if 37 <= pitch <= 40:
        return 38
    return 42


def midi_to_song(data: bytes, mapping: Optional[Mapping[int, TrackRole]] = None,
                 meta: Optional[SongMeta] = None) -> tuple[Song, RoleMappingReport]:
    """Ingest SMF bytes into a validated Song.

    ``mapping`` keys are SMF track indices (format 1) or channels (format 0).
    """
    doc = read_midi(data)
    units = _collect_units(doc)
    if not units:
        raise NoMappableTracks("file contains no notes")
    report = RoleMappingReport()
    if mapping is not None:
        roles = {int(k): TrackRole(v) for k, v in mapping.items()}
        if len(set(roles.values())) != len(roles):
            raise MidiError("explicit mapping assigns a role twice")
        for k in roles:
            report.notes[k] = "explicit"
    else:
        roles = _assign_roles(units, doc, report)
    report.assignments = dict(roles)

    scale = DIVISION / doc.division
    tracks = {r: [] for r in ROLES}
    dropped_short = dropped_late = remapped = 0
    for u in units:
        role = roles.get(u.key)
        if role is None:
            continue
        for start, end, pitch, vel in u.notes:
            s = round(start * scale)
            d = round((end - start) * scale)
            if d < MIN_INGEST_TICKS:
                dropped_short += 1
                continue
            if s > START_MAX:
                dropped_late += 1
                continue
            if role is TrackRole.RHYTHM:
                p = _drum_class(pitch)
                remapped += p != pitch
                pitch = p
            tracks[role].append(NoteEvent(pitch, _snap_duration(d), min(vel, 127), s))
    if dropped_short:
        report.warnings.append(f"{dropped_short} notes shorter than {MIN_INGEST_TICKS} ticks dropped")
    if dropped_late:
        report.warnings.append(f"{dropped_late} notes starting after tick {START_MAX} dropped")
    if remapped:
        report.warnings.append(f"{remapped} percussion notes folded onto kick/snare/hi-hat")
    missing = [r.value for r in ROLES if not tracks[r]]
    if missing:
        raise NoMappableTracks(f"no notes for roles: {', '.join(missing)}")
    meta = meta or SongMeta(source=Source.INGESTED)
    song = Song({r: sorted(n, key=note_sort_key) for r, n in tracks.items()}, meta)
    issues = validate_song(song)
    if issues:
        raise MidiError(f"ingested song fails validation: {issues[0]}")
    return song, report


def identity_mapping() -> dict[int, TrackRole]:
    """Track-index mapping for files written by :func:`song_to_midi`."""
    return {i + 1: r for i, r in enumerate(ROLES)}
