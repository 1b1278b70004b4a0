"""Zero-shot genre/style recognition with strict single-label matching."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..core import Song, Taxonomy, normalize_label
from .backends import CompletionRequest, LlmBackend
from .prompts import build_recognition_prompt

RECOGNITION_TEMPERATURE = 1.0
RECOGNITION_MAX_TOKENS = 1200
_MARKER = re.compile(r"classification\s*[:\-]?", re.I)


@dataclass(frozen=True)
class Recognition:
    label: Optional[str]  # None when unmatched
    raw: str

    @property
    def matched(self) -> bool:
        return self.label is not None


def final_segment(reply: str) -> str:
    """Text after the last "Classification" marker, else the last non-empty line."""
    hits = list(_MARKER.finditer(reply))
    if hits:
        return reply[hits[-1].end():]
    lines = [ln for ln in reply.splitlines() if ln.strip()]
    return lines[-1] if lines else ""


def labels_in(text: str, labels) -> list[str]:
    text = normalize_label(text)
    found = []
    for label in labels:
        pattern = r"(?<![a-z0-9])" + re.escape(label).replace(r"\ ", r"\s+") + r"(?![a-z0-9])"
        if re.search(pattern, text):
            found.append(label)
    return found


def match_label(reply: str, labels) -> Optional[str]:
    """The single taxonomy label named in the reply's final segment, else None."""
    found = labels_in(final_segment(reply), labels)
    return found[0] if len(found) == 1 else None


def zero_shot_classify(backend: LlmBackend, song: Song, task: str, taxonomy: Taxonomy,
                       temperature: float = RECOGNITION_TEMPERATURE) -> Recognition:
    prompt = build_recognition_prompt(song, task)
    reply = backend.complete(CompletionRequest(prompt, temperature, RECOGNITION_MAX_TOKENS))
    return Recognition(match_label(reply, taxonomy.labels(task)), reply)
