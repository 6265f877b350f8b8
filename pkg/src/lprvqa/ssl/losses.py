"""Supervised L1, pairwise rank cross-entropy and pseudo-label losses.

Each ``*_loss`` that takes a model returns ``(loss, grads)`` where ``grads``
is aligned with ``model.params()``.
"""

from __future__ import annotations

import numpy as np

from ..nnet import sigmoid

EPS = 1e-7


def rank_probability(q1, q2):
    """Logistic of the score difference: P(first video ranks above second)."""
    return sigmoid(np.asarray(q1, dtype=np.float64) - np.asarray(q2, dtype=np.float64))


def cross_entropy(p1, p2):
    p2 = np.clip(np.asarray(p2, dtype=np.float64), EPS, 1.0 - EPS)
    return -p1 * np.log(p2) - (1.0 - p1) * np.log(1.0 - p2)


def pairwise_rank_loss(q1, q2, ranks):
    """Summed cross entropy between ranks and sigma(q1 - q2); returns loss, dq1, dq2."""
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    ranks = np.asarray(ranks, dtype=np.float64)
    p = rank_probability(q1, q2)
    loss = float(np.sum(cross_entropy(ranks, p)))
    # d/dd of CE(r, sigma(d)) is p - r; zero where the clamp is active
    active = (p > EPS) & (p < 1.0 - EPS)
    dd = np.where(active, p - ranks, 0.0)
    return loss, dd, -dd


def _zero_grads(model):
    return [np.zeros_like(p) for p in model.params()]


def l1_to_targets(model, records, targets, augmentation, spec):
    """Sum of |target - q(T(v))| with subgradient 0 at exact ties."""
    if len(records) == 0:
        return 0.0, _zero_grads(model)
    targets = np.asarray(targets, dtype=np.float64)
    scores, cache = model.forward(records, augmentation, spec)
    resid = scores - targets
    return float(np.sum(np.abs(resid))), model.backward(cache, np.sign(resid))


def supervised_loss(model, batch, spec, augmentation: str = "weak"):
    missing = [r.id for r in batch if r.mos is None]
    if missing:
        raise ValueError(f"supervised loss needs labels; missing for {missing[:3]}")
    return l1_to_targets(model, batch, [r.mos for r in batch], augmentation, spec)


def unsupervised_loss(model, first, second, ranks, spec, augmentation: str = "strong"):
    """Rank cross entropy over pairs (first[i], second[i]) scored by one shared model."""
    if len(first) == 0:
        return 0.0, _zero_grads(model)
    b = len(first)
    scores, cache = model.forward(list(first) + list(second), augmentation, spec)
    loss, dq1, dq2 = pairwise_rank_loss(scores[:b], scores[b:], ranks)
    return loss, model.backward(cache, np.concatenate([dq1, dq2]))
