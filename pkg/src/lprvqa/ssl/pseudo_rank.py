from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PseudoRankPair:
    id1: str
    id2: str
    rank: int
    teacher_gap: float

    def swapped(self) -> "PseudoRankPair":
        gap = -self.teacher_gap
        return PseudoRankPair(self.id2, self.id1, int(gap >= 0), gap)


@dataclass
class PairSet:
    """Qualifying pairs as index arrays into the unlabelled list."""

    first: np.ndarray
    second: np.ndarray
    ranks: np.ndarray
    gaps: np.ndarray

    def __len__(self):
        return len(self.first)

    def to_pairs(self, ids) -> list[PseudoRankPair]:
        return [
            PseudoRankPair(ids[i], ids[j], int(r), float(g))
            for i, j, r, g in zip(self.first, self.second, self.ranks, self.gaps)
        ]


def qualifying_pairs(scores, tau: float) -> PairSet:
    """Every unordered pair whose score gap exceeds ``tau``.

    Pairs are oriented so the higher-scored video comes first, which makes the
    pseudo-rank 1 for all of them. Pairs are listed in (i < j) index order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    i, j = np.triu_indices(len(scores), k=1)
    gap = scores[i] - scores[j]
    keep = np.abs(gap) > tau
    i, j, gap = i[keep], j[keep], gap[keep]
    flip = gap < 0
    first = np.where(flip, j, i)
    second = np.where(flip, i, j)
    gap = np.abs(gap)
    return PairSet(first, second, np.ones(len(first), dtype=np.int64), gap)


def generate_pseudo_ranks(teacher, unlabelled, tau: float, spec, augmentation: str = "weak"):
    """Score each unlabelled video once with the teacher and gate pairs by ``tau``."""
    unlabelled = list(unlabelled)
    if not unlabelled:
        return []
    scores = teacher.predict_many(unlabelled, augmentation, spec)
    return qualifying_pairs(scores, tau).to_pairs([r.id for r in unlabelled])


def pseudo_rank_accuracy(pairs, true_mos) -> float | None:
    """Fraction of pairs whose rank agrees with the true ordering; ties count as correct.

    ``pairs`` is a list of :class:`PseudoRankPair` with ``true_mos`` a mapping
    from id, or a :class:`PairSet` with ``true_mos`` an array indexed like it.
    Returns None for an empty pair set.
    """
    if len(pairs) == 0:
        return None
    if isinstance(pairs, PairSet):
        m1 = np.asarray(true_mos)[pairs.first]
        m2 = np.asarray(true_mos)[pairs.second]
        ranks = pairs.ranks
    else:
        m1 = np.array([true_mos[p.id1] for p in pairs])
        m2 = np.array([true_mos[p.id2] for p in pairs])
        ranks = np.array([p.rank for p in pairs])
    correct = np.where(ranks == 1, m1 >= m2, m1 <= m2)
    return float(np.mean(correct))
