"""Video feature records, manifest I/O, splits, normalization and synthetic data.

Manifest layout (CSV with header)::

    id,frame_file,video_file,fps,mos

``video_file`` and ``mos`` may be empty. Feature paths are relative to the
manifest's directory. Frame files are headerless CSV with one frame per row;
video files are a single headerless row.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

MANIFEST_HEADER = ("id", "frame_file", "video_file", "fps", "mos")
TEST_FRACTION = 0.2


class DatasetError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class VideoRecord:
    id: str
    frames: np.ndarray  # (N, D)
    fps: float
    video_feat: np.ndarray | None = None  # (Dv,)
    mos: float | None = None
    normalized: bool = False

    def __post_init__(self):
        frames = _frozen(self.frames)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise DatasetError(f"{self.id}: frames must be a nonempty (N, D) array")
        if not np.all(np.isfinite(frames)):
            raise DatasetError(f"{self.id}: non-finite frame features")
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise DatasetError(f"{self.id}: fps must be positive, got {self.fps}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", float(self.fps))
        if self.video_feat is not None:
            vf = _frozen(self.video_feat).reshape(-1)
            if not np.all(np.isfinite(vf)):
                raise DatasetError(f"{self.id}: non-finite video features")
            object.__setattr__(self, "video_feat", vf)
        if self.mos is not None:
            if not math.isfinite(self.mos):
                raise DatasetError(f"{self.id}: non-finite mos")
            if self.normalized and not 0.0 <= self.mos <= 1.0:
                raise DatasetError(f"{self.id}: normalized mos {self.mos} outside [0, 1]")
            object.__setattr__(self, "mos", float(self.mos))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_dim(self) -> int:
        return self.frames.shape[1]

    @property
    def video_dim(self) -> int | None:
        return None if self.video_feat is None else self.video_feat.shape[0]

    def __eq__(self, other):
        if not isinstance(other, VideoRecord):
            return NotImplemented
        same_vf = (self.video_feat is None and other.video_feat is None) or (
            self.video_feat is not None
            and other.video_feat is not None
            and np.array_equal(self.video_feat, other.video_feat)
        )
        return (
            self.id == other.id
            and self.fps == other.fps
            and self.mos == other.mos
            and self.normalized == other.normalized
            and same_vf
            and np.array_equal(self.frames, other.frames)
        )

    __hash__ = None


def _read_matrix(path: Path, vid: str) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"{vid}: feature file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise DatasetError(f"{vid}: {path.name} line {lineno}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise DatasetError(
                    f"{vid}: ragged row in {path.name} line {lineno}: "
                    f"{len(rows[-1])} values, expected {len(rows[0])}"
                )
    if not rows:
        raise DatasetError(f"{vid}: empty feature file {path}")
    m = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise DatasetError(f"{vid}: non-finite values in {path.name}")
    return m


def load_manifest(path) -> list[VideoRecord]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"manifest not found: {path}")
    root = path.parent
    records = []
    frame_dim = video_dim = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MANIFEST_HEADER:
            raise DatasetError(f"manifest header must be {','.join(MANIFEST_HEADER)}")
        for row in reader:
            vid = row["id"]
            frames = _read_matrix(root / row["frame_file"], vid)
            video_feat = None
            if row["video_file"]:
                video_feat = _read_matrix(root / row["video_file"], vid)
                if video_feat.shape[0] != 1:
                    raise DatasetError(f"{vid}: video feature file must have exactly one row")
                video_feat = video_feat[0]
            if frame_dim is None:
                frame_dim = frames.shape[1]
            elif frames.shape[1] != frame_dim:
                raise DatasetError(
                    f"{vid}: frame dimension {frames.shape[1]} differs from {frame_dim}"
                )
            if video_feat is not None:
                if video_dim is None:
                    video_dim = video_feat.shape[0]
                elif video_feat.shape[0] != video_dim:
                    raise DatasetError(
                        f"{vid}: video feature dimension {video_feat.shape[0]} differs from {video_dim}"
                    )
            try:
                fps = float(row["fps"])
                mos = float(row["mos"]) if row["mos"].strip() else None
            except ValueError as exc:
                raise DatasetError(f"{vid}: {exc}") from None
            records.append(VideoRecord(vid, frames, fps, video_feat, mos))
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise DatasetError("duplicate ids in manifest")
    return records


def write_manifest(records, directory, name: str = "manifest.csv") -> Path:
    """Write records as manifest + per-video feature CSVs; values round-trip exactly."""
    directory = Path(directory)
    (directory / "frames").mkdir(parents=True, exist_ok=True)
    has_video = any(r.video_feat is not None for r in records)
    if has_video:
        (directory / "video").mkdir(exist_ok=True)
    manifest = directory / name
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for r in records:
            frame_file = f"frames/{r.id}.csv"
            np.savetxt(directory / frame_file, r.frames, fmt="%.17g", delimiter=",")
            video_file = ""
            if r.video_feat is not None:
                video_file = f"video/{r.id}.csv"
                np.savetxt(directory / video_file, r.video_feat[None, :], fmt="%.17g", delimiter=",")
            mos = "" if r.mos is None else repr(r.mos)
            writer.writerow([r.id, frame_file, video_file, repr(r.fps), mos])
    return manifest


@dataclass(frozen=True)
class DatasetSplit:
    labelled: tuple
    unlabelled: tuple
    test: tuple
    seed: int

    def __post_init__(self):
        v, u, w = set(self.labelled), set(self.unlabelled), set(self.test)
        if v & u or v & w or u & w:
            raise DatasetError("labelled, unlabelled and test sets must be disjoint")


def test_size(n: int) -> int:
    # round half up, not banker's rounding
    return int(math.floor(TEST_FRACTION * n + 0.5))


def make_split(records, labelled_count: int, seed: int) -> DatasetSplit:
    """Seeded 80/20 train/test partition; ``labelled_count`` train ids form V."""
    n = len(records)
    n_test = test_size(n)
    n_train = n - n_test
    if labelled_count < 0 or labelled_count > n_train:
        raise DatasetError(
            f"labelled_count {labelled_count} exceeds the training partition size {n_train}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    chosen = np.sort(rng.choice(n_train, size=labelled_count, replace=False))
    mask = np.zeros(n_train, dtype=bool)
    mask[chosen] = True
    labelled = tuple(records[i].id for i in train_idx[mask])
    for i in train_idx[mask]:
        if records[i].mos is None:
            raise DatasetError(f"{records[i].id}: sampled as labelled but has no mos")
    unlabelled = tuple(records[i].id for i in train_idx[~mask])
    test = tuple(records[i].id for i in test_idx)
    return DatasetSplit(labelled, unlabelled, test, seed)


@dataclass(frozen=True)
class NormalizationSpec:
    feat_min: np.ndarray | None
    feat_max: np.ndarray | None
    mos_min: float
    mos_max: float

    def __post_init__(self):
        if self.feat_min is not None and np.any(self.feat_max < self.feat_min):
            raise DatasetError("feature max below min")
        if self.mos_max < self.mos_min:
            raise DatasetError("mos max below min")


def fit_normalization(records) -> NormalizationSpec:
    """Per-dimension min/max of video features and of mos over the fitting set."""
    records = list(records)
    if not records:
        raise DatasetError("cannot fit normalization on an empty set")
    feats = [r.video_feat for r in records if r.video_feat is not None]
    mos = [r.mos for r in records if r.mos is not None]
    if not mos:
        raise DatasetError("normalization fitting set has no labels")
    fmin = fmax = None
    if feats:
        stacked = np.stack(feats)
        fmin, fmax = stacked.min(axis=0), stacked.max(axis=0)
    return NormalizationSpec(fmin, fmax, float(min(mos)), float(max(mos)))


def _scale(x, lo, hi):
    x = np.asarray(x, dtype=np.float64)
    span = np.asarray(hi - lo, dtype=np.float64)
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (x - lo) / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


def apply_normalization(record: VideoRecord, spec: NormalizationSpec, mos: bool = True) -> VideoRecord:
    """Min-max scale video features (and mos) into [0, 1].

    Degenerate dimensions map to 0 and out-of-range values clamp. A record
    that is already normalized is returned unchanged. Frame features are
    never touched.
    """
    if record.normalized:
        return record
    vf = record.video_feat
    if vf is not None and spec.feat_min is not None:
        if vf.shape != spec.feat_min.shape:
            raise DatasetError(f"{record.id}: video feature dimension does not match normalization")
        vf = _scale(vf, spec.feat_min, spec.feat_max)
    m = record.mos
    if mos and m is not None:
        m = float(_scale(m, spec.mos_min, spec.mos_max))
    return replace(record, video_feat=vf, mos=m, normalized=True)


@dataclass
class SplitData:
    """Materialized split with the unlabelled mos held back for diagnostics."""

    split: DatasetSplit
    labelled: list
    unlabelled: list
    test: list
    test_mos: np.ndarray
    normalization: NormalizationSpec | None
    _hidden_mos: dict = field(repr=False, default_factory=dict)

    def diagnostic_mos(self, ids) -> np.ndarray:
        """True mos of unlabelled videos; never to be used for training."""
        missing = [i for i in ids if i not in self._hidden_mos]
        if missing:
            raise DatasetError(f"no diagnostic mos for {missing[:3]}")
        return np.array([self._hidden_mos[i] for i in ids])

    @property
    def has_diagnostic_mos(self) -> bool:
        return bool(self.unlabelled) and all(r.id in self._hidden_mos for r in self.unlabelled)


def materialize(records, split: DatasetSplit, normalize: bool = True) -> SplitData:
    by_id = {r.id: r for r in records}
    labelled = [by_id[i] for i in split.labelled]
    if any(r.mos is None for r in labelled):
        raise DatasetError("every labelled video needs a mos")
    unlabelled_raw = [by_id[i] for i in split.unlabelled]
    test = [by_id[i] for i in split.test]
    hidden = {r.id: r.mos for r in unlabelled_raw if r.mos is not None}
    unlabelled = [replace(r, mos=None) for r in unlabelled_raw]
    test_mos = np.array([np.nan if r.mos is None else r.mos for r in test])
    spec = None
    if normalize and labelled:
        spec = fit_normalization(labelled)
        labelled = [apply_normalization(r, spec) for r in labelled]
        unlabelled = [apply_normalization(r, spec) for r in unlabelled]
        test = [apply_normalization(r, spec, mos=False) for r in test]
    return SplitData(split, labelled, unlabelled, test, test_mos, spec, hidden)


@dataclass(frozen=True)
class SyntheticSpec:
    n_videos: int = 1200
    frame_dim: int = 32
    video_dim: int = 8
    fps: float = 30.0
    duration: float = 8.0
    noise_scale: float = 0.5
    seed: int = 0
    n_nuisance: int = 4
    content_scale: float = 1.0
    motion_scale: float = 1.0
    frame_noise_scale: float | None = None


def n_frames_for(fps: float, duration: float) -> int:
    return max(1, int(math.floor(fps * duration + 0.5)))


def generate_synthetic(
    n_videos: int,
    frame_dim: int,
    video_dim: int,
    fps: float,
    duration: float,
    noise_scale: float,
    seed: int,
    n_nuisance: int = 4,
    content_scale: float = 1.0,
    motion_scale: float = 1.0,
    frame_noise_scale: float | None = None,
) -> list[VideoRecord]:
    """Videos whose features are noisy linear embeddings of a latent quality q.

    Per video, q ~ U[0, 1] becomes the mos. Frame n's feature is
    ``A @ [q, c_n] + a0`` with one embedding (A, a0) shared by all videos and
    a nuisance vector ``c_n = content + motion_n`` of size ``n_nuisance``:
    ``content`` is drawn once per video, ``motion_n`` afresh for every frame.
    On top comes noise of scale ``noise_scale``, split into a per-video offset
    that temporal averaging cannot remove and an independent per-frame jitter
    (of scale ``frame_noise_scale`` when given). The video-level feature is
    ``B q + b0`` plus noise of scale ``noise_scale``.
    """
    if min(n_videos, frame_dim, video_dim) <= 0 or fps <= 0 or duration <= 0:
        raise ValueError("counts, fps and duration must be positive")
    if frame_noise_scale is None:
        frame_noise_scale = noise_scale
    if noise_scale < 0 or frame_noise_scale < 0:
        raise ValueError("noise scales must be nonnegative")
    if not 0 <= n_nuisance < frame_dim:
        raise ValueError("need 0 <= n_nuisance < frame_dim so q stays identifiable")
    rng = np.random.default_rng(seed)
    n_frames = n_frames_for(fps, duration)
    embed = rng.normal(size=(frame_dim, 1 + n_nuisance))
    embed_offset = rng.normal(size=frame_dim)
    video_embed = rng.normal(size=video_dim)
    video_offset = rng.normal(size=video_dim)
    width = len(str(n_videos - 1))
    records = []
    for i in range(n_videos):
        q = rng.uniform()
        content = content_scale * rng.normal(size=n_nuisance)
        motion = motion_scale * rng.normal(size=(n_frames, n_nuisance))
        latent = np.column_stack([np.full(n_frames, q), content + motion])
        frames = latent @ embed.T + embed_offset
        frames += noise_scale * rng.normal(size=frame_dim)
        frames += frame_noise_scale * rng.normal(size=(n_frames, frame_dim))
        vf = q * video_embed + video_offset + noise_scale * rng.normal(size=video_dim)
        records.append(VideoRecord(f"v{i:0{width}d}", frames, fps, vf, q))
    return records
