"""Slow, obviously-correct reference implementations used as test oracles."""


def f1_bruteforce(y_true, y_pred, n_classes):
    """Weighted F1 from explicit precision/recall counting."""
    n = len(y_true)
    total = 0.0
    for c in range(n_classes):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        total += f1 * (tp + fn)
    return total / n


def rank_of(scores, positive):
    """1-based rank under descending score with ties broken by lower index first."""
    rank = 1
    for i, s in enumerate(scores):
        if i == positive:
            continue
        if s > scores[positive] or (s == scores[positive] and i < positive):
            rank += 1
    return rank


def map_bruteforce(ranks):
    # AP with a single relevant item: precision at the position where it is retrieved
    aps = []
    for r in ranks:
        retrieved_relevant = 0
        for pos in range(1, r + 1):
            if pos == r:
                retrieved_relevant += 1
                aps.append(retrieved_relevant / pos)
    return sum(aps) / len(aps)


def hits_bruteforce(ranks, k):
    return sum(1 for r in ranks if r <= k) / len(ranks)
