from .config import METHODS, TrainConfig
from .losses import (
    cross_entropy,
    l1_to_targets,
    pairwise_rank_loss,
    rank_probability,
    supervised_loss,
    unsupervised_loss,
)
from .pseudo_rank import (
    PairSet,
    PseudoRankPair,
    generate_pseudo_ranks,
    pseudo_rank_accuracy,
    qualifying_pairs,
)
from .train import TrainReport, Trainer, evaluate_model, train, train_baseline, train_lpr

__all__ = [
    "METHODS", "TrainConfig", "cross_entropy", "l1_to_targets", "pairwise_rank_loss",
    "rank_probability", "supervised_loss", "unsupervised_loss", "PairSet",
    "PseudoRankPair", "generate_pseudo_ranks", "pseudo_rank_accuracy",
    "qualifying_pairs", "TrainReport", "Trainer", "evaluate_model", "train",
    "train_baseline", "train_lpr",
]
