"""Binary piano rolls: 4x128x128 song rolls and 64x128 melody phrase rolls."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .core import ROLES, START_MAX, Song, TrackRole

TICKS_PER_STEP = 60  # 7680 ticks / 128 steps
N_STEPS = 128
N_PITCHES = 128
PHRASE_STEPS = 64

# channel colours for rendering, in ROLES order
PALETTE = np.array([(230, 85, 13), (49, 130, 189), (49, 163, 84), (158, 154, 200)], dtype=np.uint8)
BACKGROUND = (20, 20, 24)


class SkipReason(Exception):
    """A song that cannot yield a phrase pair."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


def tick_to_step(tick: int) -> Optional[int]:
    """Step index for ``tick``; None past the 8-bar window."""
    if tick < 0:
        raise ValueError(f"negative tick {tick}")
    if tick >= START_MAX:
        return None
    return tick // TICKS_PER_STEP


def song_to_roll(song: Song) -> np.ndarray:
    roll = np.zeros((len(ROLES), N_STEPS, N_PITCHES), dtype=np.uint8)
    for ch, role in enumerate(ROLES):
        for note in song.track(role):
            t0 = tick_to_step(note.start)
            if t0 is None:
                continue
            t1 = min(t0 + note.duration // TICKS_PER_STEP, N_STEPS)
            roll[ch, t0:t1, note.pitch] = 1
    return roll


def melody_phrases(song: Song) -> tuple[np.ndarray, np.ndarray]:
    """Split the melody channel into (steps 0-63, steps 64-127)."""
    melody = song_to_roll(song)[ROLES.index(TrackRole.MELODY)]
    source, target = melody[:PHRASE_STEPS].copy(), melody[PHRASE_STEPS:].copy()
    if not source.any() or not target.any():
        raise SkipReason("EmptyHalf")
    return source, target


def roll_to_image(roll: np.ndarray, scale: int = 4) -> Image.Image:
    """Time on x, pitch on y (high pitches at the top), one colour per channel."""
    roll = np.asarray(roll)
    if roll.ndim == 2:
        roll = roll[None]
    if roll.ndim != 3:
        raise ValueError(f"expected a 2-D or 3-D roll, got shape {roll.shape}")
    _, steps, pitches = roll.shape
    rgb = np.empty((pitches, steps, 3), dtype=np.uint8)
    rgb[:] = BACKGROUND
    for ch in range(roll.shape[0]):
        mask = roll[ch].T[::-1] > 0
        rgb[mask] = PALETTE[ch % len(PALETTE)]
    img = Image.fromarray(rgb, mode="RGB")
    if scale > 1:
        img = img.resize((steps * scale, pitches * scale), Image.NEAREST)
    return img


def render_roll(roll: np.ndarray, path, scale: int = 4) -> Path:
    path = Path(path)
    # PNG from PIL carries no timestamp, so equal rolls give equal bytes
    roll_to_image(roll, scale).save(path, format="PNG", optimize=False)
    return path
