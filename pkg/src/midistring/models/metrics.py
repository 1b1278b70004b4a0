"""Classification and ranking metrics plus their analytic chance levels."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

HITS_KS = (1, 5, 10, 25)
N_CANDIDATES = 50


def per_class_f1(y_true, y_pred, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """(F1 per class, support per class)."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("empty label vectors")
    if min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= n_classes:
        raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    tp = np.bincount(y_true[y_true == y_pred], minlength=n_classes).astype(float)
    support = np.bincount(y_true, minlength=n_classes).astype(float)
    predicted = np.bincount(y_pred, minlength=n_classes).astype(float)
    denom = support + predicted
    # F1 = 2TP / (2TP + FP + FN) = 2TP / (support + predicted)
    f1 = np.divide(2 * tp, denom, out=np.zeros(n_classes), where=denom > 0)
    return f1, support


def weighted_f1(y_true, y_pred, n_classes: int) -> float:
    f1, support = per_class_f1(y_true, y_pred, n_classes)
    return float((f1 * support).sum() / support.sum())


def accuracy(y_true, y_pred) -> float:
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    return float((y_true == y_pred).mean())


def positive_rank(ranking: Sequence[int], positive_index: int) -> int:
    """1-based position of the positive candidate in a ranking."""
    return int(list(ranking).index(positive_index)) + 1


def average_precision(rank: int) -> float:
    # one relevant item: AP = precision at its rank
    return 1.0 / rank


def ranking_metrics(ranks: Iterable[int], ks=HITS_KS) -> dict[str, float]:
    ranks = np.asarray(list(ranks), dtype=float)
    if ranks.size == 0:
        raise ValueError("no ranks to score")
    out = {"MAP": float(np.mean(1.0 / ranks))}
    for k in ks:
        out[f"HITS@{k}"] = float(np.mean(ranks <= k))
    return out


def harmonic(n: int) -> float:
    return float(sum(1.0 / r for r in range(1, n + 1)))


def chance_baselines(task: str, n_classes: int | None = None, n_candidates: int = N_CANDIDATES,
                     ks=HITS_KS) -> dict[str, float]:
    """Expected metric values for uniform random guessing or ranking.

    ``task`` is ``"classification"`` (needs ``n_classes``) or ``"ranking"``.
    """
    if task == "classification":
        if not n_classes:
            raise ValueError("classification chance needs n_classes")
        return {"accuracy": 1.0 / n_classes, "weighted_f1": 1.0 / n_classes}
    if task == "ranking":
        out = {"MAP": harmonic(n_candidates) / n_candidates}
        for k in ks:
            out[f"HITS@{k}"] = min(k, n_candidates) / n_candidates
        return out
    raise ValueError(f"unknown task {task!r}")
