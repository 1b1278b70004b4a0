"""Prompt text and the per-index temperature schedule."""
from __future__ import annotations

import re

from ..codec import serialize_song
from ..core import Song, Taxonomy, TaxonomyError, normalize_label

MAX_TOKENS = 1200
BASE_TEMPERATURE = 0.6
TEMPERATURE_STEP = 0.04
TEMPERATURE_PERIOD = 10

GENERATION_TEMPLATE = """\
Write a {genre} song in {style} manner.
Mood: {mood}.

Compose 8 bars in 4/4 time at a fixed tempo of 120 BPM (480 ticks per quarter note) \
with exactly four tracks: melody, chords, bass, and rhythm.
Encode every track as a list of notes, each note a tuple [pitch, duration, velocity, start_time].

Constraints:
- pitch: integer from 0 to 127
- duration: 240 (eighth note), 480 (quarter note) or 960 (half note) ticks
- velocity: integer from 0 to 127
- start_time: integer ticks from 0 to 7680
- rhythm track: drum pitches only 35 (kick), 38 (snare) and 42 (hi-hat)
- all four tracks must contain at least one note

Output format:
{{"melody": [[pitch, duration, velocity, start_time], ...], "chords": [...], "bass": [...], "rhythm": [...]}}

Give a pure JSON string as output, with no explanation and no code fences."""

_GEN_RE = re.compile(r"^Write an? (?P<genre>.+?) song in (?P<style>.+?) manner\.\nMood: (?P<mood>.+?)\.$", re.M)

RECOGNITION_QUESTION = "What {task} is the song described in the following JSON for MIDI file?"


def temperature_for_index(index: int) -> float:
    if index < 0:
        raise ValueError("song index must be non-negative")
    return round(BASE_TEMPERATURE + TEMPERATURE_STEP * (index % TEMPERATURE_PERIOD), 10)


def build_generation_prompt(genre: str, style: str, mood: str, taxonomy: Taxonomy) -> str:
    genre, style, mood = normalize_label(genre), normalize_label(style), normalize_label(mood)
    for task, label in (("genre", genre), ("style", style), ("mood", mood)):
        if label not in taxonomy.labels(task):
            raise TaxonomyError(f"{label!r} is not a known {task}")
    # "a" vs "an" keeps the sentence readable for vowel-initial genres
    text = GENERATION_TEMPLATE.format(genre=genre, style=style, mood=mood)
    if genre[:1] in "aeiou":
        text = text.replace("Write a ", "Write an ", 1)
    return text


def parse_generation_prompt(prompt: str) -> tuple[str, str, str] | None:
    """Recover (genre, style, mood) from a prompt built by :func:`build_generation_prompt`."""
    m = _GEN_RE.search(prompt)
    if not m:
        return None
    return m["genre"], m["style"], m["mood"]


def build_recognition_prompt(song: Song, task: str) -> str:
    if task not in ("genre", "style"):
        raise ValueError(f"task must be 'genre' or 'style', got {task!r}")
    return RECOGNITION_QUESTION.format(task=task) + "\n" + serialize_song(song)


def parse_recognition_prompt(prompt: str) -> tuple[str, str] | None:
    """(task, json text) from a recognition prompt, or None."""
    for task in ("genre", "style"):
        head = RECOGNITION_QUESTION.format(task=task)
        if prompt.startswith(head):
            return task, prompt[len(head):].strip()
    return None
