from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

METHODS = ("LPR", "PL", "MT", "NS", "FMstar", "supervised")


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of one training run; defaults follow the published recipe."""

    method: str = "LPR"
    lam: float = 0.1
    tau: float = 0.1
    alpha: float = 0.5
    K: int = 50
    warmup_iters: int = 1000
    ssl_iters: int = 1000
    batch_size: int | None = None  # None: 16 for <= 30 labels, else 32
    lr0: float = 0.1
    decay: float = 0.01
    momentum: float = 0.9
    # "continue" keeps the warm-up optimizer (and its decayed learning rate) in
    # the semi-supervised phase; "restart" starts a new one at lr0
    phase2_optimizer: str = "continue"
    strong_fps: float = 1.0
    weak_divisor: int = 2
    seed: int = 0
    use_augmentation: bool = True
    use_rank: bool = True
    use_threshold: bool = True
    use_ema: bool = True
    auto_balance: bool = False
    # "mean" divides each loss term by its batch size; "sum" uses the raw batch sums
    loss_reduction: str = "mean"
    # augmentation fed to the student / teacher on unlabelled videos
    student_augmentation: str = "strong"
    teacher_augmentation: str = "weak"
    labelled_augmentation: str = "weak"
    eval_augmentation: str = "none"
    mode: str = "hybrid"
    f_widths: tuple = (128, 128)
    g_hidden: int = 64
    ns_rounds: int = 2

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if min(self.warmup_iters, self.ssl_iters, self.ns_rounds) < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.loss_reduction not in ("sum", "mean"):
            raise ValueError("loss_reduction must be 'sum' or 'mean'")
        if self.phase2_optimizer not in ("continue", "restart"):
            raise ValueError("phase2_optimizer must be 'continue' or 'restart'")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        object.__setattr__(self, "f_widths", tuple(int(w) for w in self.f_widths))

    def effective_batch_size(self, n_labelled: int) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return 16 if n_labelled <= 30 else 32

    @property
    def effective_tau(self) -> float:
        return self.tau if self.use_threshold else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["f_widths"] = list(self.f_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)
