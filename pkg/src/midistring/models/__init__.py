"""Genre/style CNN, melody transformer, training loops and metrics."""
from .cnn import CnnClassifier, cnn_forward
from .metrics import chance_baselines, ranking_metrics, weighted_f1
from .ranking import RankedQuery, rank_candidates
from .train import (
    EvalReport, TrainConfig, eval_classifier, eval_melody, load_classifier, load_melody,
    train_classifier, train_melody,
)
from .transformer import MelodyTransformer, transformer_forward

__all__ = [
    "CnnClassifier", "cnn_forward", "chance_baselines", "ranking_metrics", "weighted_f1",
    "RankedQuery", "rank_candidates", "EvalReport", "TrainConfig", "eval_classifier",
    "eval_melody", "load_classifier", "load_melody", "train_classifier", "train_melody",
    "MelodyTransformer", "transformer_forward",
]
