"""Training loops, checkpoint I/O and evaluation reports for both models."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..nn import tensor as T
from ..nn.checkpoint import Checkpoint
from ..nn.optim import AdamState, adam_step
from .cnn import CnnClassifier, predict
from .metrics import HITS_KS, per_class_f1, positive_rank, ranking_metrics, weighted_f1
from .ranking import RankedQuery, rank_candidates
from .transformer import MelodyTransformer

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    max_steps: Optional[int] = None  # stop early after this many optimizer steps
    # melody only: shift each batch by a random -k..k semitones; 0 disables
    transpose: int = 0


@dataclass
class TrainResult:
    model: object
    adam: AdamState
    history: list = field(default_factory=list)  # per-epoch mean loss
    steps: int = 0

    def checkpoint(self, kind: str, config: dict) -> Checkpoint:
        arrays = dict(("model/" + k, v) for k, v in self.model.state_dict().items())
        names = [k for k, _ in self.model.named_parameters()]
        for name, m, v in zip(names, self.adam.m, self.adam.v):
            arrays["adam/m/" + name] = m
            arrays["adam/v/" + name] = v
        extra = {"adam": {"lr": self.adam.lr, "beta1": self.adam.beta1, "beta2": self.adam.beta2,
                          "eps": self.adam.eps, "t": self.adam.t},
                 "rng": {"seed": self.model.config["seed"], "step": self.steps},
                 "history": [float(x) for x in self.history], "train": config}
        return Checkpoint(kind, dict(self.model.config), arrays, extra)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def _fit(model, n: int, cfg: TrainConfig, loss_fn: Callable, label: str) -> TrainResult:
    params = model.parameters()
    adam = AdamState.for_params(params, lr=cfg.lr)
    res = TrainResult(model, adam)
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng([cfg.seed, 7, epoch])
        losses = []
        for idx in _batches(n, cfg.batch_size, rng):
            model.zero_grad()
            loss = loss_fn(idx, res.steps)
            loss.backward()
            adam_step(params, adam)
            res.steps += 1
            losses.append(float(loss.data))
            if cfg.max_steps is not None and res.steps >= cfg.max_steps:
                break
        res.history.append(float(np.mean(losses)))
        log.info("%s epoch %d/%d loss %.4f", label, epoch + 1, cfg.epochs, res.history[-1])
        if cfg.max_steps is not None and res.steps >= cfg.max_steps:
            break
    return res


# -- classifier -------------------------------------------------------------------------


def classifier_loss(model: CnnClassifier, rolls, genres, styles, train: bool = True, step: int = 0):
    g, s = model(np.asarray(rolls, dtype=model.dtype), train=train, step=step)
    return T.softmax_cross_entropy(g, genres) + T.softmax_cross_entropy(s, styles)


def train_classifier(rolls: np.ndarray, genres: Sequence[int], styles: Sequence[int],
                     n_genres: int, n_styles: int, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Joint genre+style training; loss is the sum of the two cross-entropies."""
    rolls = np.asarray(rolls)
    genres = np.asarray(genres, dtype=np.int64)
    styles = np.asarray(styles, dtype=np.int64)
    if len(rolls) == 0:
        raise ValueError("empty training set")
    if genres.max() >= n_genres or styles.max() >= n_styles or min(genres.min(), styles.min()) < 0:
        raise ValueError("label outside taxonomy")
    model = CnnClassifier(n_genres, n_styles, size=rolls.shape[-1], seed=cfg.seed)

    def loss_fn(idx, step):
        return classifier_loss(model, rolls[idx], genres[idx], styles[idx], True, step)

    return _fit(model, len(rolls), cfg, loss_fn, "classifier")


def load_classifier(ckpt: Checkpoint) -> CnnClassifier:
    if ckpt.kind != "cnn":
        raise ValueError(f"expected a cnn checkpoint, got {ckpt.kind!r}")
    model = CnnClassifier(**ckpt.config)
    model.load_state_dict({k[6:]: v for k, v in ckpt.arrays.items() if k.startswith("model/")})
    return model


# -- melody -----------------------------------------------------------------------------


def transpose_roll(roll: np.ndarray, k: int) -> np.ndarray:
    """Shift along the last (pitch) axis; notes pushed past either end are dropped."""
    out = np.zeros_like(roll)
    n = roll.shape[-1]
    if abs(k) >= n:
        return out
    if k >= 0:
        out[..., k:] = roll[..., :n - k]
    else:
        out[..., :k] = roll[..., -k:]
    return out


def melody_loss(model: MelodyTransformer, sources, targets):
    probs = model(np.asarray(sources, dtype=model.dtype), np.asarray(targets, dtype=model.dtype))
    return T.binary_cross_entropy(probs, np.asarray(targets, dtype=model.dtype))


def train_melody(sources: np.ndarray, targets: np.ndarray, cfg: TrainConfig = TrainConfig(),
                 **model_kw) -> TrainResult:
    sources, targets = np.asarray(sources), np.asarray(targets)
    if len(sources) == 0:
        raise ValueError("no usable phrase pairs")
    model = MelodyTransformer(seed=cfg.seed, steps=sources.shape[1], n_pitches=sources.shape[2], **model_kw)

    def loss_fn(idx, step):
        src, tgt = sources[idx], targets[idx]
        if cfg.transpose:
            k = int(np.random.default_rng([cfg.seed, 5, step]).integers(-cfg.transpose, cfg.transpose + 1))
            src, tgt = transpose_roll(src, k), transpose_roll(tgt, k)
        return melody_loss(model, src, tgt)

    return _fit(model, len(sources), cfg, loss_fn, "melody")


def load_melody(ckpt: Checkpoint) -> MelodyTransformer:
    if ckpt.kind != "melody":
        raise ValueError(f"expected a melody checkpoint, got {ckpt.kind!r}")
    model = MelodyTransformer(**ckpt.config)
    model.load_state_dict({k[6:]: v for k, v in ckpt.arrays.items() if k.startswith("model/")})
    return model


# -- evaluation -------------------------------------------------------------------------


@dataclass
class EvalReport:
    task: str
    metrics: dict
    per_class: dict
    n_samples: int
    seed: int
    config_hash: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def eval_classifier(model: CnnClassifier, rolls: np.ndarray, labels: Sequence[int], task: str,
                    class_names: Sequence[str], seed: int = 0) -> EvalReport:
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("empty evaluation set")
    genre_pred, style_pred = predict(model, rolls)
    pred = genre_pred if task == "genre" else style_pred
    n = len(class_names)
    f1, support = per_class_f1(labels, pred, n)
    per_class = {name: {"f1": float(f1[i]), "support": int(support[i])} for i, name in enumerate(class_names)}
    metrics = {"weighted_f1": weighted_f1(labels, pred, n), "accuracy": float((labels == pred).mean())}
    return EvalReport(f"classify-{task}", metrics, per_class, int(len(labels)), seed, config_hash(model.config))


def eval_melody(model: MelodyTransformer, queries: Sequence[RankedQuery], seed: int = 0) -> EvalReport:
    if not queries:
        raise ValueError("no queries")
    ranks = [positive_rank(rank_candidates(model, q), q.positive_index) for q in queries]
    metrics = ranking_metrics(ranks, HITS_KS)
    hist = np.bincount(np.asarray(ranks) - 1, minlength=50)
    per_class = {"rank_histogram": [int(x) for x in hist]}
    return EvalReport("melody", metrics, per_class, len(queries), seed, config_hash(model.config))
