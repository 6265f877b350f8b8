"""Training loops: supervised warm-up, pseudo-rank learning and SSL baselines.

All methods share the same supervised warm-up so that, for equal seeds, the
students entering the semi-supervised phase are identical. Randomness comes
from four independent streams (initialization, labelled batches, unlabelled
batches, fresh-student initialization) so that turning a loss term off never
shifts the sampling of another.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from ..metrics import EvalResult, evaluate
from ..nnet import OptimizerState, copy_params, ema_update, sgd_step
from ..qmodel import AugmentationSpec, QualityModel
from .config import TrainConfig
from .losses import l1_to_targets, supervised_loss, unsupervised_loss
from .pseudo_rank import PairSet, pseudo_rank_accuracy, qualifying_pairs


@dataclass
class TrainReport:
    method: str
    config: dict
    seed: int
    loss_s: list = field(default_factory=list)
    loss_u: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    refresh_iters: list = field(default_factory=list)
    pair_counts: list = field(default_factory=list)
    rank_accuracy: list = field(default_factory=list)
    student: QualityModel | None = None
    teacher: QualityModel | None = None
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        # wall-clock time is left out so that reports are reproducible byte for byte
        return {
            "method": self.method,
            "seed": self.seed,
            "config": self.config,
            "loss_s": self.loss_s,
            "loss_u": self.loss_u,
            "loss": self.loss,
            "refresh_iters": self.refresh_iters,
            "pair_counts": self.pair_counts,
            "rank_accuracy": self.rank_accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _mean(loss, grads, count):
    return loss / count, [g / count for g in grads]


class Trainer:
    def __init__(self, data, config: TrainConfig):
        if not data.labelled:
            raise ValueError("training needs at least one labelled video")
        self.data = data
        self.cfg = config
        self.spec = AugmentationSpec(config.strong_fps, config.weak_divisor)
        streams = np.random.SeedSequence(config.seed).spawn(4)
        self.init_rng, self.lab_rng, self.unl_rng, self.fresh_rng = (
            np.random.default_rng(s) for s in streams
        )
        self.batch_size = config.effective_batch_size(len(data.labelled))
        self.student = self._new_model(self.init_rng)
        self.opt = self._new_optimizer()
        self.teacher: QualityModel | None = None
        self.report = TrainReport(config.method, config.to_dict(), config.seed)
        self.unlabelled = list(data.unlabelled)
        self.true_unlabelled_mos = (
            data.diagnostic_mos([r.id for r in self.unlabelled])
            if data.has_diagnostic_mos else None
        )
        if config.use_augmentation:
            self.student_aug = config.student_augmentation
            self.teacher_aug = config.teacher_augmentation
        else:
            self.student_aug = self.teacher_aug = "none"
        self.pairs: PairSet | None = None
        self.pseudo_labels: np.ndarray | None = None

    def _new_model(self, rng) -> QualityModel:
        r = self.data.labelled[0]
        return QualityModel.build(
            self.cfg.mode, r.frame_dim, r.video_dim, rng,
            f_widths=self.cfg.f_widths, g_hidden=self.cfg.g_hidden,
        )

    def _new_optimizer(self) -> OptimizerState:
        return OptimizerState(self.cfg.lr0, self.cfg.decay, self.cfg.momentum)

    def labelled_batch(self):
        n = len(self.data.labelled)
        idx = self.lab_rng.choice(n, size=min(self.batch_size, n), replace=False)
        return [self.data.labelled[i] for i in idx]

    def unlabelled_batch_indices(self):
        n = len(self.unlabelled)
        return self.unl_rng.choice(n, size=min(self.batch_size, n), replace=False)

    def student_step(self, unsup=None):
        """One SGD step on L = L_s + lam * L_u.

        ``unsup`` returns (L_u, grads, batch count) or None when there is
        nothing to learn from.
        """
        cfg = self.cfg
        batch = self.labelled_batch()
        ls, grads = supervised_loss(self.student, batch, self.spec, cfg.labelled_augmentation)
        if cfg.loss_reduction == "mean":
            ls, grads = _mean(ls, grads, len(batch))
        lu, lam = 0.0, cfg.lam
        term = unsup() if unsup is not None else None
        if term is not None:
            lu, gu, count = term
            if cfg.loss_reduction == "mean":
                lu, gu = _mean(lu, gu, count)
            if cfg.auto_balance and lu > 0:
                lam = ls / lu
            if lam != 0.0:
                grads = [a + lam * b for a, b in zip(grads, gu)]
        sgd_step(self.student.params(), grads, self.opt)
        self.report.loss_s.append(ls)
        self.report.loss_u.append(lu)
        self.report.lam.append(lam)
        self.report.loss.append(ls + lam * lu)

    def update_teacher(self):
        if self.cfg.use_ema:
            ema_update(self.teacher.params(), self.student.params(), self.cfg.alpha)
        else:
            copy_params(self.teacher.params(), self.student.params())

    def warmup(self):
        for _ in range(self.cfg.warmup_iters):
            self.student_step()

    def start_phase2(self):
        if self.cfg.phase2_optimizer == "restart":
            self.opt = self._new_optimizer()

    # -- unsupervised terms --------------------------------------------------

    def rank_term(self):
        if self.pairs is None or len(self.pairs) == 0:
            return None
        n = len(self.pairs)
        pick = self.unl_rng.choice(n, size=min(self.batch_size, n), replace=False)
        first = [self.unlabelled[i] for i in self.pairs.first[pick]]
        second = [self.unlabelled[i] for i in self.pairs.second[pick]]
        return (*unsupervised_loss(self.student, first, second, self.pairs.ranks[pick],
                                   self.spec, self.student_aug), len(pick))

    def cached_label_term(self, augmentation):
        if not self.unlabelled or self.pseudo_labels is None:
            return None
        idx = self.unlabelled_batch_indices()
        batch = [self.unlabelled[i] for i in idx]
        return (*l1_to_targets(self.student, batch, self.pseudo_labels[idx], augmentation,
                               self.spec), len(idx))

    def live_teacher_term(self):
        if not self.unlabelled:
            return None
        idx = self.unlabelled_batch_indices()
        batch = [self.unlabelled[i] for i in idx]
        targets = self.teacher.forward(batch, self.teacher_aug, self.spec)[0]
        return (*l1_to_targets(self.student, batch, targets, self.student_aug, self.spec), len(idx))

    # -- refreshes -------------------------------------------------------------

    def refresh(self, iteration: int, model: QualityModel, augmentation: str, ranks: bool):
        self.report.refresh_iters.append(iteration)
        if not self.unlabelled:
            self.pairs = PairSet(*(np.empty(0, dtype=np.int64) for _ in range(3)), np.empty(0))
            self.pseudo_labels = np.empty(0)
            self.report.pair_counts.append(0)
            self.report.rank_accuracy.append(None)
            return
        scores = model.predict_many(self.unlabelled, augmentation, self.spec)
        self.pseudo_labels = scores
        if ranks:
            self.pairs = qualifying_pairs(scores, self.cfg.effective_tau)
            self.report.pair_counts.append(len(self.pairs))
            acc = None
            if self.true_unlabelled_mos is not None:
                acc = pseudo_rank_accuracy(self.pairs, self.true_unlabelled_mos)
            self.report.rank_accuracy.append(acc)
        else:
            self.report.pair_counts.append(len(scores))
            self.report.rank_accuracy.append(None)

    # -- methods ---------------------------------------------------------------

    def run_lpr(self):
        cfg = self.cfg
        self.warmup()
        self.start_phase2()
        self.teacher = self.student.copy()
        for k in range(cfg.ssl_iters):
            if k % cfg.K == 0:
                self.refresh(k, self.teacher, self.teacher_aug, ranks=cfg.use_rank)
            if cfg.use_rank:
                self.student_step(self.rank_term)
            else:
                self.student_step(lambda: self.cached_label_term(self.student_aug))
            self.update_teacher()

    def run_supervised(self):
        self.warmup()

    def run_pl(self):
        cfg = self.cfg
        self.warmup()
        self.start_phase2()
        for k in range(cfg.ssl_iters):
            if k % cfg.K == 0:
                self.refresh(k, self.student, cfg.labelled_augmentation, ranks=False)
            self.student_step(lambda: self.cached_label_term(cfg.labelled_augmentation))

    def run_mt(self):
        self.warmup()
        self.start_phase2()
        self.teacher = self.student.copy()
        for _ in range(self.cfg.ssl_iters):
            self.student_step(self.live_teacher_term)
            self.update_teacher()

    def run_fmstar(self):
        cfg = self.cfg
        self.warmup()
        self.start_phase2()
        self.teacher = self.student.copy()
        for k in range(cfg.ssl_iters):
            if k % cfg.K == 0:
                self.refresh(k, self.teacher, self.teacher_aug, ranks=False)
            self.student_step(lambda: self.cached_label_term(self.student_aug))
            self.update_teacher()

    def run_ns(self):
        cfg = self.cfg
        self.warmup()
        teacher = self.student
        for _ in range(cfg.ns_rounds):
            self.refresh(0, teacher, self.teacher_aug, ranks=False)
            self.student = self._new_model(self.fresh_rng)
            self.opt = self._new_optimizer()
            for _ in range(cfg.ssl_iters):
                self.student_step(lambda: self.cached_label_term(self.student_aug))
            teacher = self.student
        self.teacher = teacher

    def run(self) -> TrainReport:
        start = time.perf_counter()
        {
            "LPR": self.run_lpr,
            "supervised": self.run_supervised,
            "PL": self.run_pl,
            "MT": self.run_mt,
            "FMstar": self.run_fmstar,
            "NS": self.run_ns,
        }[self.cfg.method]()
        self.report.student = self.student
        self.report.teacher = self.teacher
        self.report.wall_clock = time.perf_counter() - start
        return self.report


def train_lpr(data, config: TrainConfig) -> TrainReport:
    if config.method != "LPR":
        raise ValueError("train_lpr needs method='LPR'")
    return Trainer(data, config).run()


def train_baseline(data, config: TrainConfig) -> TrainReport:
    if config.method == "LPR":
        raise ValueError("use train_lpr for the pseudo-rank method")
    return Trainer(data, config).run()


def train(data, config: TrainConfig) -> TrainReport:
    return Trainer(data, config).run()


def evaluate_model(model: QualityModel, data, config: TrainConfig) -> EvalResult:
    spec = AugmentationSpec(config.strong_fps, config.weak_divisor)
    preds = model.predict_many(data.test, config.eval_augmentation, spec)
    return evaluate(preds, data.test_mos)
