import pytest
from hypothesis import given

from midistring.core import (
    ErrorKind, InvalidSongError, NoteEvent, Song, SongMeta, Taxonomy, TaxonomyError, TrackRole, check_song,
    default_taxonomy, load_taxonomy, normalize_label, validate_note, validate_song,
)

from .conftest import songs


def _mutate(song, role, index, note):
    tracks = {r: list(n) for r, n in song.tracks.items()}
    tracks[role][index] = note
    return Song(tracks)


def test_valid_song_has_no_issues(simple_song):
    assert validate_song(simple_song) == []
    assert check_song(simple_song) is simple_song


@given(songs())
def test_generated_songs_are_valid(song):
    assert validate_song(song) == []


@pytest.mark.parametrize("note,rhythm,kind", [
    (NoteEvent(128, 480, 64, 0), False, ErrorKind.PITCH_OUT_OF_RANGE),
    (NoteEvent(-1, 480, 64, 0), False, ErrorKind.PITCH_OUT_OF_RANGE),
    (NoteEvent(60, 360, 64, 0), False, ErrorKind.INVALID_DURATION),
    (NoteEvent(60, 480, 128, 0), False, ErrorKind.VELOCITY_OUT_OF_RANGE),
    (NoteEvent(60, 480, 64, 7681), False, ErrorKind.START_OUT_OF_RANGE),
    (NoteEvent(60, 480, 64, 0), True, ErrorKind.INVALID_DRUM_PITCH),
])
def test_validate_note_kinds(note, rhythm, kind):
    assert validate_note(note, rhythm).kind is kind


def test_boundaries_are_inclusive():
    assert validate_note(NoteEvent(127, 960, 127, 7680)) is None
    assert validate_note(NoteEvent(0, 240, 0, 0)) is None
    # velocity 0 is a legal stored value
    assert validate_note(NoteEvent(42, 240, 0, 0), True) is None


def test_first_failing_check_wins():
    # pitch is checked before duration
    assert validate_note(NoteEvent(200, 7, 64, 0)).kind is ErrorKind.PITCH_OUT_OF_RANGE


def test_missing_and_empty_tracks(simple_song):
    tracks = dict(simple_song.tracks)
    del tracks[TrackRole.BASS]
    tracks[TrackRole.CHORDS] = []
    issues = validate_song(Song(tracks))
    assert [(i.kind, i.role) for i in issues] == [(ErrorKind.EMPTY_TRACK, TrackRole.CHORDS),
                                                 (ErrorKind.MISSING_TRACK, TrackRole.BASS)]


def test_unsorted_reports_first_index(simple_song):
    bad = _mutate(simple_song, TrackRole.MELODY, 0, NoteEvent(60, 480, 100, 5000))
    issues = validate_song(bad)
    assert len(issues) == 1
    assert issues[0].kind is ErrorKind.UNSORTED_TRACK and issues[0].note_index == 1


def test_issue_location_and_error(simple_song):
    bad = _mutate(simple_song, TrackRole.RHYTHM, 2, NoteEvent(40, 240, 100, 480))
    with pytest.raises(InvalidSongError) as info:
        check_song(bad)
    (issue,) = info.value.issues
    assert (issue.kind, issue.role, issue.note_index) == (ErrorKind.INVALID_DRUM_PITCH, TrackRole.RHYTHM, 2)
    assert "rhythm" in str(issue)


def test_song_equality_and_meta(simple_song):
    other = Song(dict(simple_song.tracks))
    assert other == simple_song
    tagged = simple_song.with_meta(SongMeta(genre="pop"))
    assert tagged != simple_song
    assert tagged.notes_equal(simple_song)


def test_song_is_immutable(simple_song):
    with pytest.raises(TypeError):
        simple_song.tracks[TrackRole.BASS] = ()


def test_default_taxonomy_cardinality():
    tax = default_taxonomy()
    assert (len(tax.genres), len(tax.styles), len(tax.moods)) == (13, 25, 5)
    assert tax.is_full
    assert tax.index("genre", " R&B ") == tax.genres.index("r&b")


def test_taxonomy_rejects_duplicates():
    with pytest.raises(TaxonomyError):
        Taxonomy(("pop", "Pop"), ("a",), ("b",))


def test_taxonomy_cardinality_checked(tmp_path):
    p = tmp_path / "t.yaml"
    p.write_text("genres: [pop]\nstyles: [indie]\nmoods: [sad]\n")
    with pytest.raises(TaxonomyError, match="expected 13 genres"):
        load_taxonomy(p)
    assert load_taxonomy(p, strict=False).genres == ("pop",)


def test_taxonomy_unknown_label():
    with pytest.raises(TaxonomyError):
        default_taxonomy().index("style", "polka")


def test_normalize_label():
    assert normalize_label("  New   Age\t") == "new age"
