"""Candidate ranking for melody completion."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .transformer import MelodyTransformer, shift_right

log = logging.getLogger(__name__)


@dataclass
class RankedQuery:
    source: np.ndarray  # (64, 128) binary
    candidates: np.ndarray  # (50, 64, 128) binary
    positive_index: int

    def __post_init__(self):
        self.source = np.asarray(self.source, dtype=np.uint8)
        self.candidates = np.asarray(self.candidates, dtype=np.uint8)
        if self.candidates.ndim != 3 or self.candidates.shape[0] != 50:
            raise ValueError(f"a query needs exactly 50 candidates, got shape {self.candidates.shape}")
        if self.candidates.shape[1:] != self.source.shape:
            raise ValueError("candidate and source roll shapes differ")
        if not 0 <= self.positive_index < 50:
            raise ValueError(f"positive_index {self.positive_index} outside 0..49")


def cosine(a: np.ndarray, b: np.ndarray) -> float | None:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return None
    return float(a @ b / (na * nb))


def order_by_score(scores) -> list[int]:
    """Descending score, ties by ascending index."""
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def score_candidates(model: MelodyTransformer, query: RankedQuery) -> np.ndarray:
    """Cosine similarity of each candidate with its teacher-forced probability matrix.

    All-zero candidates score -1.
    """
    memory = model.encode(query.source[None])
    probs = model.decode(shift_right(query.candidates.astype(model.dtype)), memory).data
    scores = np.empty(len(query.candidates))
    for i, cand in enumerate(query.candidates):
        c = cosine(probs[i], cand)
        if c is None:
            log.warning("candidate %d is all-zero; scored -1", i)
            c = -1.0
        scores[i] = c
    return scores


def rank_candidates(model: MelodyTransformer, query: RankedQuery) -> list[int]:
    return order_by_score(score_candidates(model, query))
