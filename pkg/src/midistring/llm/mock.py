"""Deterministic offline stand-in for the LLM.

Generation replies are songs built from templates keyed on the (genre, style)
pair, plus seeded jitter whose size grows with temperature:

* genre fixes the melody register and pitch set, the melody's rhythmic cell,
  and the chord register and voicing;
* style fixes the bass register (5 options) and the bass/drum groove (5
  options), giving 25 distinct style signatures;
* the melody's first four bars are a random motif that bars 5-8 repeat, with a
  temperature-dependent chance of altering a note.

Recognition replies invert the templates and name the closest label.
Every reply is a pure function of (prompt, temperature, seed).
"""
from __future__ import annotations

import hashlib
import json

import numpy as np

from ..codec import parse_song
from ..core import Taxonomy, TrackRole, default_taxonomy, normalize_label
from .backends import CompletionRequest
from .prompts import parse_generation_prompt, parse_recognition_prompt

# 7680 ticks hold 8 bars, so one bar here is 960 ticks (16 roll steps)
BAR = 960
SCALE = (0, 2, 4, 7, 9)  # major pentatonic degrees
MELODY_CELLS = (
    (480, 480),
    (240, 240, 480),
    (480, 240, 240),
    (240, 240, 240, 240),
)
BASS_REGISTERS = (28, 33, 38, 43, 48)
DRUM_GROOVES = (
    # (kick starts, snare starts, hi-hat step) within one bar, in ticks
    ((0,), (480,), 240),
    ((0, 480), (240, 720), 240),
    ((0, 360), (480,), 480),
    ((0, 240, 480, 720), (), 480),
    ((0, 600), (240, 480, 720), 240),
)
BASS_GROOVES = (
    # (starts within a bar, duration)
    ((0,), 960),
    ((0, 480), 480),
    ((0, 240, 480, 720), 240),
    ((0, 720), 240),
    ((240, 720), 240),
)


def _label_index(label: str, labels: tuple[str, ...]) -> int:
    label = normalize_label(label)
    if label in labels:
        return labels.index(label)
    # unknown labels still get a stable template
    return int.from_bytes(hashlib.sha256(label.encode()).digest()[:4], "big") % max(len(labels), 1)


def genre_template(g: int) -> dict:
    return {
        "melody_root": 50 + 3 * g,
        "cell": MELODY_CELLS[g % len(MELODY_CELLS)],
        "chord_root": 40 + 2 * g,
        "chord_shape": (0, 4, 7) if g % 2 == 0 else (0, 3, 7, 10),
    }


def style_template(s: int) -> dict:
    return {
        "bass_root": BASS_REGISTERS[s % 5],
        "bass": BASS_GROOVES[s // 5 % 5],
        "drums": DRUM_GROOVES[s // 5 % 5],
    }


def mock_song_obj(genre_idx: int, style_idx: int, temperature: float, rng: np.random.Generator) -> dict:
    gt, st = genre_template(genre_idx), style_template(style_idx)
    wobble = max(0.0, temperature - 0.5)

    def vel(base):
        return int(np.clip(base + rng.integers(-10, 11) * (1 + wobble), 1, 127))

    melody_pitches = [gt["melody_root"] + d for d in SCALE] + [gt["melody_root"] + 12]
    motif = []
    t = 0
    while t < 4 * BAR:
        for dur in gt["cell"]:
            if t >= 4 * BAR:
                break
            motif.append([int(rng.choice(melody_pitches)), dur, vel(90), t])
            t += dur
    melody = [list(n) for n in motif]
    for n in motif:
        p = n[0]
        if rng.random() < 0.15 * wobble:
            p = int(rng.choice(melody_pitches))
        melody.append([p, n[1], vel(90), n[3] + 4 * BAR])

    chords = []
    progression = (0, 5, 7, 0)
    for bar in range(8):
        root = gt["chord_root"] + progression[bar % 4]
        for iv in gt["chord_shape"]:
            chords.append([root + iv, 960, vel(70), bar * BAR])

    bass = []
    starts, dur = st["bass"]
    for bar in range(8):
        root = st["bass_root"] + (progression[bar % 4] % 5)
        for s in starts:
            bass.append([root, dur, vel(85), bar * BAR + s])

    rhythm = []
    kicks, snares, hat_step = st["drums"]
    for bar in range(8):
        for s in kicks:
            rhythm.append([35, 240, vel(105), bar * BAR + s])
        for s in snares:
            rhythm.append([38, 240, vel(100), bar * BAR + s])
        for s in range(0, BAR, hat_step):
            if rng.random() < 0.1 * wobble:
                continue
            rhythm.append([42, 240, vel(75), bar * BAR + s])
    # LLM-like disorder: tracks need not arrive sorted
    order = rng.permutation(len(rhythm))
    rhythm = [rhythm[i] for i in order]
    return {"melody": melody, "chords": chords, "bass": bass, "rhythm": rhythm}


class MockBackend:
    def __init__(self, seed: int = 0, taxonomy: Taxonomy | None = None):
        self.seed = seed
        self.taxonomy = taxonomy or default_taxonomy()

    def _rng(self, request: CompletionRequest) -> np.random.Generator:
        key = f"{self.seed}|{request.temperature:.6f}|{request.prompt}".encode("utf-8")
        return np.random.default_rng(int.from_bytes(hashlib.sha256(key).digest()[:8], "big"))

    def complete(self, request: CompletionRequest) -> str:
        rng = self._rng(request)
        labels = parse_generation_prompt(request.prompt)
        if labels is not None:
            genre, style, _mood = labels
            obj = mock_song_obj(_label_index(genre, self.taxonomy.genres),
                                _label_index(style, self.taxonomy.styles), request.temperature, rng)
            text = json.dumps(obj)
            if rng.random() < 0.1:
                text = "```json\n" + text + "\n```"
            return text
        recog = parse_recognition_prompt(request.prompt)
        if recog is not None:
            return self._recognize(*recog)
        return "I can only write songs or name their genre and style."

    def _recognize(self, task: str, payload: str) -> str:
        try:
            song = parse_song(payload)
        except ValueError:
            return "Classification: unknown"
        if task == "genre":
            # the lowest chord tone is the genre's chord root (bars 1 and 4 sit on it)
            low = min(n.pitch for n in song.track(TrackRole.CHORDS))
            scores = [abs(genre_template(g)["chord_root"] - low) for g in range(len(self.taxonomy.genres))]
            label = self.taxonomy.genres[int(np.argmin(scores))]
        else:
            low = min(n.pitch for n in song.track(TrackRole.BASS))
            reg = int(np.argmin([abs(r - low) for r in BASS_REGISTERS]))
            offsets = {n.start % BAR for n in song.track(TrackRole.BASS)}
            groove = int(np.argmax([len(offsets & set(g[0])) - len(offsets ^ set(g[0])) for g in BASS_GROOVES]))
            idx = min(groove * 5 + reg, len(self.taxonomy.styles) - 1)
            label = self.taxonomy.styles[idx]
        return f"The melody and groove point to a clear answer.\nClassification: {label.title()}"


def mock_backend(seed: int = 0, taxonomy: Taxonomy | None = None) -> MockBackend:
    return MockBackend(seed, taxonomy)
