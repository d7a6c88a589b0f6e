"""Sparse point prompts and second-positive-point augmentation.

Pixels are ``(u, v)`` = (column, row). Wherever a rule must break ties between
pixels it uses row-major order: smallest ``v`` first, then smallest ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .scene import LabelMask

Pixel = Tuple[int, int]

STRATEGIES = ("none", "random", "max_distance", "max_entropy")
ENTROPY_WINDOW = 9
RGB_BITS = 3
MAX_ENTROPY_BITS = math.log2(2 ** (3 * RGB_BITS))
# |dH| values closer than this are ties (distinct window entropies differ by far more)
ENTROPY_TIE_TOL = 1e-9

# Entropies are computed as log2(n) - S / n with S = sum_c c*log2(c) held in
# fixed point, so every code path (scalar or batched, any summation order)
# produces bit-identical floats and argmax ties resolve the same way.
_FP_SCALE = 2 ** 40
# window sums stay below 2**53 for windows up to 15 x 15
_MAX_WINDOW = 15
_MAX_N = _MAX_WINDOW ** 2
_LOG2_N = np.array([0.0] + [math.log2(n) for n in range(1, _MAX_N + 1)])
_CLOG_FP = np.array([0] + [round(c * math.log2(c) * _FP_SCALE) for c in range(1, _MAX_N + 1)],
                    dtype=np.int64)


@dataclass(frozen=True)
class PromptPoint:
    u: int
    v: int
    class_id: int
    role: str  # "positive" | "negative"

    @property
    def pixel(self) -> Pixel:
        return (self.u, self.v)


@dataclass(frozen=True)
class PointPrompt:
    """What a prompted segmenter receives: positive and negative pixels."""

    positives: tuple
    negatives: tuple = ()


@dataclass(frozen=True)
class PromptSet:
    width: int
    height: int
    points: dict  # class id -> annotated pixel

    def __contains__(self, class_id) -> bool:
        return class_id in self.points

    def __getitem__(self, class_id) -> Pixel:
        return self.points[class_id]

    def classes(self) -> list:
        return sorted(self.points)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    data: np.ndarray  # H x W bool

    def __post_init__(self):
        d = np.array(self.data, dtype=bool)
        if d.ndim != 2:
            raise ValueError("binary mask must be 2-D")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def area(self) -> int:
        return int(self.data.sum())

    def contains(self, pixel: Pixel) -> bool:
        u, v = pixel
        return 0 <= v < self.height and 0 <= u < self.width and bool(self.data[v, u])

    def pixels(self):
        """Member pixels as ``(us, vs)`` arrays in row-major order."""
        vs, us = np.nonzero(self.data)
        return us, vs

    def __eq__(self, other):
        return isinstance(other, BinaryMask) and np.array_equal(self.data, other.data)

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))


def iou(a: BinaryMask, b: BinaryMask) -> float:
    union = np.logical_or(a.data, b.data).sum()
    return float(np.logical_and(a.data, b.data).sum() / union) if union else 1.0


# ---------------------------------------------------------------------------
# Sparse prompts
# ---------------------------------------------------------------------------


def sample_sparse_prompts(gt_mask: LabelMask, rng_seed) -> PromptSet:
    """One uniformly drawn pixel per class present in ``gt_mask``."""
    rng = np.random.default_rng(rng_seed)
    flat = gt_mask.values.ravel()
    classes = gt_mask.present_classes()
    if not classes:
        raise ValueError("empty mask: no labeled pixel to annotate")
    pts = {}
    for c in classes:
        idx = np.flatnonzero(flat == c)
        k = int(idx[rng.integers(len(idx))])
        pts[c] = (k % gt_mask.width, k // gt_mask.width)
    return PromptSet(gt_mask.width, gt_mask.height, pts)


def assemble_class_prompt(ps: PromptSet, target: int):
    """The target's annotated pixel is the positive; every other annotation is a negative."""
    if target not in ps:
        raise KeyError(f"class {target} has no annotated pixel")
    pos = [PromptPoint(*ps[target], target, "positive")]
    neg = [PromptPoint(*ps[c], c, "negative") for c in ps.classes() if c != target]
    return pos, neg


# ---------------------------------------------------------------------------
# Augmentation strategies
# ---------------------------------------------------------------------------


def _require_nonempty(mask: BinaryMask):
    if not mask.data.any():
        raise ValueError("empty mask: no candidate pixel")


def augment_random(initial: BinaryMask, rng_seed) -> Pixel:
    _require_nonempty(initial)
    us, vs = initial.pixels()
    k = int(np.random.default_rng(rng_seed).integers(len(us)))
    return int(us[k]), int(vs[k])


def augment_max_distance(initial: BinaryMask, anchor: Pixel) -> Pixel:
    """Mask pixel farthest (Euclidean) from ``anchor``."""
    _require_nonempty(initial)
    us, vs = initial.pixels()
    du = us.astype(np.int64) - anchor[0]
    dv = vs.astype(np.int64) - anchor[1]
    # integer squared distances: exact comparisons; argmax takes the first (row-major) max
    k = int(np.argmax(du * du + dv * dv))
    return int(us[k]), int(vs[k])


def quantize_rgb(image: np.ndarray) -> np.ndarray:
    """Joint color bin per pixel: 3 bits per channel, 512 bins."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an H x W x 3 RGB image")
    q = img.astype(np.int32) >> (8 - RGB_BITS)
    return (q[..., 0] << (2 * RGB_BITS)) | (q[..., 1] << RGB_BITS) | q[..., 2]


def _check_window(window: int):
    if window < 1 or window % 2 == 0 or window > _MAX_WINDOW:
        raise ValueError(f"window must be odd and at most {_MAX_WINDOW}")


def _entropy_from_counts(counts) -> float:
    counts = [int(c) for c in counts if c > 0]
    if len(counts) <= 1:
        return 0.0
    n = sum(counts)
    s = sum(int(_CLOG_FP[c]) for c in counts)
    return float(_LOG2_N[n]) - s / (n * _FP_SCALE)


def region_entropy(image: np.ndarray, center: Pixel, window: int = ENTROPY_WINDOW) -> float:
    """Shannon entropy (bits) of quantized colors in a window cropped to the image."""
    _check_window(window)
    bins = quantize_rgb(image)
    u, v = center
    h, w = bins.shape
    if not (0 <= u < w and 0 <= v < h):
        raise ValueError(f"center {center} outside the image")
    r = window // 2
    patch = bins[max(v - r, 0): v + r + 1, max(u - r, 0): u + r + 1]
    return _entropy_from_counts(np.bincount(patch.ravel()))


def entropy_at(bins: np.ndarray, us, vs, window: int = ENTROPY_WINDOW) -> np.ndarray:
    """Batched :func:`region_entropy` over pixels of a pre-quantized image."""
    _check_window(window)
    us = np.asarray(us, dtype=np.int64)
    vs = np.asarray(vs, dtype=np.int64)
    if len(us) == 0:
        return np.empty(0)
    r = window // 2
    padded = np.pad(bins.astype(np.int32), r, constant_values=-1)
    win = sliding_window_view(padded, (window, window))[vs, us].reshape(len(us), -1)
    win = np.sort(win, axis=1)
    K, L = win.shape
    flat = win.ravel()
    start = np.ones(flat.shape, dtype=bool)
    start[1:] = flat[1:] != flat[:-1]
    start[::L] = True  # runs never span rows
    starts = np.flatnonzero(start)
    lengths = np.diff(np.append(starts, flat.size))
    rows = starts // L
    real = flat[starts] >= 0  # drop the padding run
    rows, lengths = rows[real], lengths[real]
    n = np.bincount(rows, weights=lengths, minlength=K).astype(np.int64)
    nbins = np.bincount(rows, minlength=K)
    # integer-valued float sums below 2**53 are exact
    s = np.bincount(rows, weights=_CLOG_FP[lengths].astype(np.float64), minlength=K)
    with np.errstate(invalid="ignore", divide="ignore"):
        h = _LOG2_N[n] - s / (n * float(_FP_SCALE))
    return np.where(nbins <= 1, 0.0, h)


def augment_max_entropy(
    image: np.ndarray,
    initial: BinaryMask,
    anchor: Pixel,
    window: int = ENTROPY_WINDOW,
    stride: int = 1,
) -> Pixel:
    """Mask pixel whose window entropy differs most (absolute) from the anchor's.

    ``stride`` keeps every stride-th candidate in row-major order.
    """
    _require_nonempty(initial)
    if image.shape[:2] != initial.data.shape:
        raise ValueError("image and mask dimensions differ")
    bins = quantize_rgb(image)
    us, vs = initial.pixels()
    us, vs = us[::stride], vs[::stride]
    h_anchor = entropy_at(bins, [anchor[0]], [anchor[1]], window)[0]
    diff = np.abs(entropy_at(bins, us, vs, window) - h_anchor)
    # first row-major candidate within tolerance of the best, so exact ties
    # such as |0 - 1| == |2 - 1| do not hinge on rounding
    k = int(np.argmax(diff >= diff.max() - ENTROPY_TIE_TOL))
    return int(us[k]), int(vs[k])


def choose_augmented_point(strategy: str, image, initial: BinaryMask, anchor: Pixel, rng_seed=None) -> Pixel:
    if strategy == "random":
        return augment_random(initial, rng_seed)
    if strategy == "max_distance":
        return augment_max_distance(initial, anchor)
    if strategy == "max_entropy":
        return augment_max_entropy(image, initial, anchor)
    raise ValueError(f"unknown augmentation strategy {strategy!r}")


def run_augmented_prompt(
    segmenter,
    image: np.ndarray,
    ps: PromptSet,
    target: int,
    strategy: str = "none",
    rng_seed=None,
    frame_index: Optional[int] = None,
) -> BinaryMask:
    """Prompt ``segmenter`` for ``target``, optionally with an augmented second positive.

    The augmented point is drawn from the smallest candidate of the first
    query; the second query uses both positives plus the negatives and its
    highest-confidence candidate is returned. An empty initial mask or a failed
    second query falls back to the first query's best candidate.
    """
    from .segmenters import SegmenterError

    if strategy not in STRATEGIES:
        raise ValueError(f"unknown augmentation strategy {strategy!r}")
    pos, neg = assemble_class_prompt(ps, target)
    negatives = tuple(p.pixel for p in neg)
    anchor = pos[0].pixel
    first = segmenter.query(image, PointPrompt((anchor,), negatives), frame_index=frame_index)
    best = as_binary(first.best)
    if strategy == "none":
        return best
    initial = as_binary(first.smallest)
    if initial.area == 0:
        return best
    extra = choose_augmented_point(strategy, image, initial, anchor, rng_seed)
    try:
        second = segmenter.query(image, PointPrompt((anchor, extra), negatives), frame_index=frame_index)
    except SegmenterError:
        return best
    return as_binary(second.best)


def as_binary(mask, class_id: Optional[int] = None) -> BinaryMask:
    if isinstance(mask, BinaryMask):
        return mask
    if isinstance(mask, LabelMask):
        if class_id is None:
            return BinaryMask(mask.values != mask.ignore_id)
        return BinaryMask(mask.values == class_id)
    raise TypeError(f"not a mask: {type(mask).__name__}")


def compose_label_mask(masks: Sequence[Tuple[int, BinaryMask]], width: int, height: int, ignore_id: int) -> LabelMask:
    """Paint per-class binary masks into one label mask; the first mask claiming a pixel keeps it."""
    out = np.full((height, width), ignore_id, dtype=np.int32)
    for c, bm in masks:
        free = bm.data & (out == ignore_id)
        out[free] = c
    return LabelMask(width, height, out.ravel(), ignore_id)
