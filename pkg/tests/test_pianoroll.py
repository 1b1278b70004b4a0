import numpy as np
import pytest
from hypothesis import given, settings
from PIL import Image

from midistring.core import NoteEvent, Song, TrackRole
from midistring.pianoroll import (
    N_STEPS, SkipReason, TICKS_PER_STEP, melody_phrases, render_roll, roll_to_image, song_to_roll, tick_to_step,
)

from .conftest import songs


@pytest.mark.parametrize("tick,step", [(0, 0), (59, 0), (60, 1), (3840, 64), (7620, 127), (7679, 127)])
def test_tick_to_step(tick, step):
    assert tick_to_step(tick) == step


def test_tick_to_step_edges():
    assert tick_to_step(7680) is None
    with pytest.raises(ValueError):
        tick_to_step(-1)


def test_roll_shape_and_cells(simple_song):
    roll = song_to_roll(simple_song)
    assert roll.shape == (4, 128, 128) and roll.dtype == np.uint8
    # melody C4 480 ticks from tick 0 covers steps 0..7
    assert roll[0, 0:8, 60].all() and not roll[0, 8, 60]
    # half-note chord tones span 16 steps
    assert roll[1, :16, [48, 52, 55]].all()
    # last melody note starts at 3840 (step 64), a half note
    assert roll[0, 64:80, 64].all()
    assert roll[3, 0:4, 35].all() and roll[3, 8:12, 38].all()


def _song_with_melody(notes):
    return Song({
        TrackRole.MELODY: notes,
        TrackRole.CHORDS: [(48, 960, 70, 0)],
        TrackRole.BASS: [(36, 960, 90, 0)],
        TrackRole.RHYTHM: [(35, 240, 110, 0)],
    })


def test_note_at_window_end_is_dropped():
    roll = song_to_roll(_song_with_melody([(60, 480, 90, 0), (62, 960, 90, 7680)]))
    assert roll[0, :, 62].sum() == 0


def test_note_clipped_at_last_step():
    roll = song_to_roll(_song_with_melody([(60, 960, 90, 7200)]))
    assert roll[0, 120:128, 60].all() and roll[0, :, 60].sum() == 8


@settings(max_examples=40, deadline=None)
@given(songs())
def test_roll_cells_match_notes(song):
    # oracle: count covered cells per (channel, pitch) by direct interval arithmetic
    roll = song_to_roll(song)
    for ch, role in enumerate(TrackRole):
        want = np.zeros((N_STEPS, 128), dtype=bool)
        for n in song.track(role):
            if n.start >= 7680:
                continue
            first = n.start // TICKS_PER_STEP
            for t in range(first, min(first + n.duration // TICKS_PER_STEP, N_STEPS)):
                want[t, n.pitch] = True
        assert np.array_equal(roll[ch].astype(bool), want)


def test_melody_phrases_split(simple_song):
    src, tgt = melody_phrases(simple_song)
    assert src.shape == tgt.shape == (64, 128)
    assert src[0, 60] and tgt[0, 64]


def test_empty_half_is_skipped():
    with pytest.raises(SkipReason) as info:
        melody_phrases(_song_with_melody([(60, 480, 90, 0)]))
    assert info.value.reason == "EmptyHalf"
    with pytest.raises(SkipReason):
        melody_phrases(_song_with_melody([(60, 480, 90, 4000)]))


def test_image_orientation():
    roll = np.zeros((1, 128, 128), dtype=np.uint8)
    roll[0, 0, 127] = 1  # first step, highest pitch
    img = np.asarray(roll_to_image(roll, scale=1))
    assert img.shape == (128, 128, 3)
    assert tuple(img[0, 0]) != tuple(img[127, 0])
    assert (img[1:, :] == img[127, 127]).all()


def test_render_is_deterministic(tmp_path, simple_song):
    roll = song_to_roll(simple_song)
    a, b = render_roll(roll, tmp_path / "a.png"), render_roll(roll, tmp_path / "b.png", scale=4)
    assert a.read_bytes() == b.read_bytes()
    assert Image.open(a).size == (512, 512)


def test_image_rejects_bad_shape():
    with pytest.raises(ValueError):
        roll_to_image(np.zeros(5))


def test_phrase_render(tmp_path, simple_song):
    src, _ = melody_phrases(simple_song)
    assert Image.open(render_roll(src, tmp_path / "p.png", scale=2)).size == (128, 256)


def test_notevent_end():
    assert NoteEvent(60, 480, 1, 100).end == 580
