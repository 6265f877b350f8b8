"""Frame-level, video-level and hybrid quality models plus temporal augmentations.

A model scores a video as ``g(z)``, ``g(t)`` or ``g([z, t])`` where ``t`` is
the (normalized) video-level feature and ``z`` is the temporal mean of the
frame mapper ``f`` over the selected frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nnet import DenseNet, net_from_arrays, net_to_arrays

MODES = ("frame", "video", "hybrid")
AUGMENTATIONS = ("none", "strong", "weak")


@dataclass(frozen=True)
class AugmentationSpec:
    strong_fps: float = 1.0
    weak_divisor: int = 2

    def __post_init__(self):
        if not self.strong_fps > 0:
            raise ValueError("strong_fps must be positive")
        if int(self.weak_divisor) != self.weak_divisor or self.weak_divisor < 1:
            raise ValueError("weak_divisor must be a positive integer")


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def strong_stride(fps: float, strong_fps: float) -> int:
    return max(1, _round_half_away(fps / strong_fps))


def _frame_slice(n_frames: int, fps: float, augmentation: str, spec: AugmentationSpec) -> slice:
    if augmentation == "none":
        return slice(0, n_frames, 1)
    if augmentation == "strong":
        return slice(0, n_frames, strong_stride(fps, spec.strong_fps))
    if augmentation == "weak":
        return slice(0, n_frames, int(spec.weak_divisor))
    raise ValueError(f"unknown augmentation {augmentation!r}")


def strong_augment(record, spec: AugmentationSpec = AugmentationSpec()) -> np.ndarray:
    """Indices 0, s, 2s, ... with s = round(fps / strong_fps), at least 1."""
    return np.arange(record.n_frames)[_frame_slice(record.n_frames, record.fps, "strong", spec)]


def weak_augment(record, spec: AugmentationSpec = AugmentationSpec()) -> np.ndarray:
    """Every ``weak_divisor``-th frame starting at 0."""
    return np.arange(record.n_frames)[_frame_slice(record.n_frames, record.fps, "weak", spec)]


def select_frames(record, augmentation: str, spec: AugmentationSpec) -> np.ndarray:
    return record.frames[_frame_slice(record.n_frames, record.fps, augmentation, spec)]


def temporal_average(mapped_frames) -> np.ndarray:
    mapped = np.asarray(mapped_frames, dtype=np.float64)
    if mapped.ndim != 2 or mapped.shape[0] == 0:
        raise ValueError("temporal_average needs a nonempty (N, d) sequence")
    return mapped.mean(axis=0)


@dataclass
class ModelCache:
    f_cache: object
    g_cache: object
    counts: np.ndarray | None
    z_dim: int


class QualityModel:
    def __init__(self, mode: str, g: DenseNet, f: DenseNet | None = None,
                 frame_dim: int | None = None, video_dim: int | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "video":
            if f is not None:
                raise ValueError("video mode has no frame mapper")
            if video_dim is None or g.in_dim != video_dim:
                raise ValueError("video mode: g input must equal the video feature dimension")
        else:
            if f is None or frame_dim is None or f.in_dim != frame_dim:
                raise ValueError(f"{mode} mode needs a frame mapper over {frame_dim}-dim frames")
            if mode == "hybrid" and video_dim is None:
                raise ValueError("hybrid mode needs a video feature dimension")
            expected = f.out_dim + (video_dim if mode == "hybrid" else 0)
            if g.in_dim != expected:
                raise ValueError(f"g input dimension {g.in_dim} != expected {expected}")
        if g.out_dim != 1 or g.layers[-1].activation != "sigmoid":
            raise ValueError("g must end in a single sigmoid unit")
        self.mode = mode
        self.f = f
        self.g = g
        self.frame_dim = frame_dim
        self.video_dim = video_dim

    @classmethod
    def build(cls, mode: str, frame_dim: int | None, video_dim: int | None,
              rng: np.random.Generator, f_widths=(128, 128), g_hidden: int = 64):
        """f: D -> w1 (relu) -> w2 (sigmoid); g: in -> g_hidden (relu) -> 1 (sigmoid)."""
        f = None
        g_in = 0
        if mode in ("frame", "hybrid"):
            f = DenseNet.init([frame_dim, *f_widths], ["relu", "sigmoid"], rng)
            g_in += f_widths[-1]
        if mode in ("video", "hybrid"):
            g_in += video_dim
        g = DenseNet.init([g_in, g_hidden, 1], ["relu", "sigmoid"], rng)
        return cls(mode, g, f, frame_dim if f is not None else None,
                   video_dim if mode != "frame" else None)

    def params(self) -> list[np.ndarray]:
        return (self.f.params() if self.f is not None else []) + self.g.params()

    def copy(self) -> "QualityModel":
        return QualityModel(self.mode, self.g.copy(), None if self.f is None else self.f.copy(),
                            self.frame_dim, self.video_dim)

    def _gather(self, records, augmentation, spec):
        blocks = counts = t = None
        if self.mode != "video":
            blocks = []
            for r in records:
                if r.frame_dim != self.frame_dim:
                    raise ValueError(f"{r.id}: frame dimension {r.frame_dim} != {self.frame_dim}")
                blocks.append(select_frames(r, augmentation, spec))
            counts = np.array([b.shape[0] for b in blocks])
            blocks = np.concatenate(blocks, axis=0)
        if self.mode != "frame":
            for r in records:
                if r.video_feat is None:
                    raise ValueError(f"{r.id}: {self.mode} mode needs video-level features")
                if r.video_dim != self.video_dim:
                    raise ValueError(f"{r.id}: video dimension {r.video_dim} != {self.video_dim}")
            t = np.stack([r.video_feat for r in records])
        return blocks, counts, t

    def forward(self, records, augmentation: str = "none",
                spec: AugmentationSpec = AugmentationSpec()):
        """Scores for a batch of records and the cache needed by ``backward``."""
        if augmentation not in AUGMENTATIONS:
            raise ValueError(f"unknown augmentation {augmentation!r}")
        frames, counts, t = self._gather(records, augmentation, spec)
        f_cache = None
        parts = []
        z_dim = 0
        if self.f is not None:
            mapped, f_cache = self.f.forward(frames)
            starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
            z = np.add.reduceat(mapped, starts, axis=0) / counts[:, None]
            parts.append(z)
            z_dim = z.shape[1]
        if t is not None:
            parts.append(t)
        g_in = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)
        out, g_cache = self.g.forward(g_in)
        return out[:, 0], ModelCache(f_cache, g_cache, counts, z_dim)

    def backward(self, cache: ModelCache, grad_scores):
        """Parameter gradients (aligned with ``params()``) for d(loss)/d(scores)."""
        grad_scores = np.asarray(grad_scores, dtype=np.float64)
        g_grads, g_in_grad = self.g.backward(cache.g_cache, grad_scores[:, None])
        if self.f is None:
            return g_grads
        grad_z = g_in_grad[:, : cache.z_dim] / cache.counts[:, None]
        f_grads, _ = self.f.backward(cache.f_cache, np.repeat(grad_z, cache.counts, axis=0))
        return f_grads + g_grads

    def predict_many(self, records, augmentation: str = "none",
                     spec: AugmentationSpec = AugmentationSpec(), chunk: int = 64) -> np.ndarray:
        records = list(records)
        out = [self.forward(records[i:i + chunk], augmentation, spec)[0]
               for i in range(0, len(records), chunk)]
        return np.concatenate(out) if out else np.empty(0)

    def predict(self, record, augmentation: str = "none",
                spec: AugmentationSpec = AugmentationSpec()) -> float:
        return float(self.forward([record], augmentation, spec)[0][0])

    def to_arrays(self) -> dict:
        arrays = {"mode": np.array(self.mode),
                  "frame_dim": np.array(-1 if self.frame_dim is None else self.frame_dim),
                  "video_dim": np.array(-1 if self.video_dim is None else self.video_dim)}
        if self.f is not None:
            arrays.update(net_to_arrays(self.f, "f"))
        arrays.update(net_to_arrays(self.g, "g"))
        return arrays

    @classmethod
    def from_arrays(cls, arrays) -> "QualityModel":
        mode = str(arrays["mode"])
        fd, vd = int(arrays["frame_dim"]), int(arrays["video_dim"])
        f = net_from_arrays(arrays, "f") if mode != "video" else None
        return cls(mode, net_from_arrays(arrays, "g"), f,
                   None if fd < 0 else fd, None if vd < 0 else vd)

    def save(self, path):
        np.savez(path, **self.to_arrays())

    @classmethod
    def load(cls, path) -> "QualityModel":
        with np.load(path) as data:
            return cls.from_arrays(dict(data))
