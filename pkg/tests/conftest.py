import numpy as np
import pytest
from hypothesis import strategies as st

from midistring.core import DRUM_PITCHES, DURATIONS, ROLES, START_MAX, NoteEvent, Song, TrackRole, note_sort_key


def note_strategy(rhythm=False):
    pitch = st.sampled_from(DRUM_PITCHES) if rhythm else st.integers(0, 127)
    return st.builds(NoteEvent, pitch, st.sampled_from(DURATIONS), st.integers(0, 127), st.integers(0, START_MAX))


@st.composite
def songs(draw, max_notes=12):
    tracks = {}
    for role in ROLES:
        notes = draw(st.lists(note_strategy(role is TrackRole.RHYTHM), min_size=1, max_size=max_notes))
        tracks[role] = sorted(notes, key=note_sort_key)
    return Song(tracks)


def random_song(rng: np.random.Generator, max_notes=20) -> Song:
    tracks = {}
    for role in ROLES:
        n = int(rng.integers(1, max_notes + 1))
        notes = []
        for _ in range(n):
            pitch = int(rng.choice(DRUM_PITCHES)) if role is TrackRole.RHYTHM else int(rng.integers(0, 128))
            notes.append(NoteEvent(pitch, int(rng.choice(DURATIONS)), int(rng.integers(0, 128)),
                                   int(rng.integers(0, START_MAX + 1))))
        tracks[role] = sorted(notes, key=note_sort_key)
    return Song(tracks)


@pytest.fixture
def simple_song():
    return Song({
        TrackRole.MELODY: [(60, 480, 100, 0), (62, 480, 100, 480), (64, 960, 90, 3840)],
        TrackRole.CHORDS: [(48, 960, 80, 0), (52, 960, 80, 0), (55, 960, 80, 0)],
        TrackRole.BASS: [(36, 960, 90, 0)],
        TrackRole.RHYTHM: [(35, 240, 110, 0), (42, 240, 70, 0), (38, 240, 100, 480)],
    })


def pytest_terminal_summary(terminalreporter):
    from .acceptance_log import lines

    out = lines()
    if out:
        terminalreporter.section("acceptance criteria")
        for line in out:
            terminalreporter.write_line(line)
