"""Cumulative semantic fusion: radius-gated nearest-neighbor voting and argmax."""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .projection import LabeledFragment, frame_to_fragment
from .scene import ClassTable, FrameRecord, PathLike, ScenePointCloud, select_frames

ACC_MAGIC = b"CSFVOTE1"


@dataclass(frozen=True)
class FusionConfig:
    radius_m: float = 0.1
    pixel_stride: int = 1
    frame_stride: int = 50

    def __post_init__(self):
        if not self.radius_m > 0:
            raise ValueError("radius_m must be > 0")
        if self.pixel_stride < 1 or self.frame_stride < 1:
            raise ValueError("strides must be >= 1")


class SceneIndex:
    """Exact nearest-neighbor queries over the scene positions."""

    def __init__(self, positions: np.ndarray):
        self.positions = np.ascontiguousarray(positions, dtype=np.float64)
        if self.positions.ndim != 2 or len(self.positions) < 1:
            raise ValueError("index needs at least one point")
        self._tree = cKDTree(self.positions)

    def __len__(self) -> int:
        return len(self.positions)

    def nearest(self, queries: np.ndarray, max_distance: float = np.inf):
        """Nearest scene point id and Euclidean distance for each query.

        Queries with no point within ``max_distance`` get id -1 and distance inf.
        """
        q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        if len(q) == 0:
            return np.empty(0, dtype=np.int64), np.empty(0)
        bound = max_distance * (1 + 1e-9) if np.isfinite(max_distance) else np.inf
        d, k = self._tree.query(q, k=1, distance_upper_bound=bound)
        k = np.where(np.isfinite(d), k, -1).astype(np.int64)
        hit = k >= 0
        # recompute with a fixed formula so the gate does not depend on tree internals
        d = np.full(len(q), np.inf)
        diff = q[hit] - self.positions[k[hit]]
        d[hit] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return k, d


def build_spatial_index(cloud: ScenePointCloud) -> SceneIndex:
    return SceneIndex(cloud.positions)


class VoteAccumulator:
    """Per-point, per-class vote counts (N x m)."""

    def __init__(self, n_points: int, n_classes: int, counts: Optional[np.ndarray] = None):
        if n_points < 1 or n_classes < 1:
            raise ValueError("accumulator dimensions must be positive")
        self.n_points = int(n_points)
        self.n_classes = int(n_classes)
        if counts is None:
            self.counts = np.zeros((self.n_points, self.n_classes), dtype=np.int64)
        else:
            counts = np.array(counts, dtype=np.int64)
            if counts.shape != (self.n_points, self.n_classes):
                raise ValueError("counts shape does not match accumulator dimensions")
            if (counts < 0).any():
                raise ValueError("negative vote count")
            self.counts = counts

    @classmethod
    def for_scene(cls, cloud: ScenePointCloud, ct: ClassTable) -> "VoteAccumulator":
        return cls(len(cloud), ct.m)

    def copy(self) -> "VoteAccumulator":
        return VoteAccumulator(self.n_points, self.n_classes, self.counts)

    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        return (
            isinstance(other, VoteAccumulator)
            and self.counts.shape == other.counts.shape
            and np.array_equal(self.counts, other.counts)
        )

    def __repr__(self):
        return f"VoteAccumulator(N={self.n_points}, m={self.n_classes}, votes={self.total()})"

    def save(self, path: PathLike) -> None:
        """Binary dump: magic, N (u64), m (u32), row-major u32 counts, little-endian."""
        if self.counts.max(initial=0) > np.iinfo(np.uint32).max:
            raise OverflowError("vote count exceeds 32 bits")
        with open(path, "wb") as fh:
            fh.write(ACC_MAGIC)
            fh.write(struct.pack("<QI", self.n_points, self.n_classes))
            fh.write(self.counts.astype("<u4").tobytes())

    @classmethod
    def load(cls, path: PathLike) -> "VoteAccumulator":
        with open(path, "rb") as fh:
            raw = fh.read()
        head = len(ACC_MAGIC) + 12
        if raw[: len(ACC_MAGIC)] != ACC_MAGIC or len(raw) < head:
            raise ValueError(f"{path}: not an accumulator dump")
        n, m = struct.unpack("<QI", raw[len(ACC_MAGIC):head])
        body = raw[head:]
        if len(body) != 4 * n * m:
            raise ValueError(f"{path}: truncated accumulator dump")
        counts = np.frombuffer(body, dtype="<u4").reshape(n, m)
        return cls(n, m, counts)


def transfer_votes(
    fragment: LabeledFragment,
    index: SceneIndex,
    acc: VoteAccumulator,
    radius_m: float,
) -> VoteAccumulator:
    """Add one vote per fragment point to its nearest scene point, if within ``radius_m``.

    Updates ``acc`` in place and returns it.
    """
    if acc.n_points != len(index):
        raise ValueError("accumulator size does not match the scene index")
    labels = fragment.labels
    if len(labels) and (labels.min() < 0 or labels.max() >= acc.n_classes):
        raise ValueError("fragment label out of range")
    k, d = index.nearest(fragment.points, radius_m)
    gate = (k >= 0) & (d <= radius_m)
    flat = k[gate] * acc.n_classes + labels[gate]
    acc.counts += np.bincount(flat, minlength=acc.counts.size).reshape(acc.counts.shape)
    return acc


def merge_accumulators(a: VoteAccumulator, b: VoteAccumulator) -> VoteAccumulator:
    if a.counts.shape != b.counts.shape:
        raise ValueError("dimension mismatch")
    return VoteAccumulator(a.n_points, a.n_classes, a.counts + b.counts)


def fuse_labels(acc: VoteAccumulator) -> np.ndarray:
    """Argmax per point; ties go to the lowest class id; empty rows get the ignore id (m)."""
    # np.argmax returns the first maximal index
    labels = np.argmax(acc.counts, axis=1).astype(np.int32)
    labels[acc.counts.max(axis=1) == 0] = acc.n_classes
    return labels


@dataclass
class FusionStats:
    frames_used: list = field(default_factory=list)
    fragment_points: int = 0
    votes: int = 0
    class_votes: Optional[np.ndarray] = None
    ignore_fraction: float = 1.0

    def as_dict(self, ct: Optional[ClassTable] = None) -> dict:
        names = ct.names if ct is not None else range(len(self.class_votes))
        return {
            "frames_used": list(self.frames_used),
            "fragment_points": int(self.fragment_points),
            "votes": int(self.votes),
            "class_votes": {str(n): int(c) for n, c in zip(names, self.class_votes)},
            "ignore_fraction": float(self.ignore_fraction),
        }


def selected(frames: Sequence[FrameRecord], frame_stride: int) -> list:
    """Frames whose index lies on the ``frame_stride`` grid, in input order."""
    if not frames:
        return []
    grid = set(select_frames(max(f.frame_index for f in frames) + 1, frame_stride))
    return [f for f in frames if f.frame_index in grid]


def _accumulate(frames: Iterable[FrameRecord], index, n_points, m, cfg) -> tuple:
    acc = VoteAccumulator(n_points, m)
    n_frag = 0
    for f in frames:
        if f.mask is None:
            raise ValueError(f"frame {f.frame_index} carries no mask")
        frag = frame_to_fragment(f, f.mask, cfg.pixel_stride)
        n_frag += len(frag)
        transfer_votes(frag, index, acc, cfg.radius_m)
    return acc, n_frag


def run_csf(
    cloud: ScenePointCloud,
    frames: Sequence[FrameRecord],
    cfg: FusionConfig = FusionConfig(),
    ct: Optional[ClassTable] = None,
    acc: Optional[VoteAccumulator] = None,
    workers: int = 1,
):
    """Fuse the masks carried by ``frames`` into per-point labels.

    Returns ``(labels, accumulator, stats)``. ``acc`` resumes from earlier votes.
    With ``workers > 1`` frames are split across threads, each with a private
    accumulator; the merged result equals the sequential one.
    """
    ct = ct or ClassTable.scannet20()
    index = build_spatial_index(cloud)
    use = selected(frames, cfg.frame_stride)
    n, m = len(cloud), ct.m
    if acc is None:
        acc = VoteAccumulator(n, m)
    elif (acc.n_points, acc.n_classes) != (n, m):
        raise ValueError("resumed accumulator does not match scene and class table")
    before = acc.total()
    if workers > 1 and len(use) > 1:
        chunks = [use[i::workers] for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _accumulate(c, index, n, m, cfg), chunks))
        for part, _ in parts:
            acc = merge_accumulators(acc, part)
        n_frag = sum(p[1] for p in parts)
    else:
        part, n_frag = _accumulate(use, index, n, m, cfg)
        acc = merge_accumulators(acc, part)
    labels = fuse_labels(acc)
    stats = FusionStats(
        frames_used=[f.frame_index for f in use],
        fragment_points=n_frag,
        votes=acc.total() - before,
        class_votes=acc.counts.sum(axis=0),
        ignore_fraction=float(np.mean(labels == ct.ignore_id)),
    )
    return labels, acc, stats
