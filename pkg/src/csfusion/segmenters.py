"""2D segmenters: the query contract plus file-backed and oracle implementations.

Real foundation-model inference runs out of process; its label masks enter
through :func:`load_mask_directory`. The oracles work from ground-truth
renderings and exist for testing and controlled degradation studies.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Protocol, Union

import numpy as np
from scipy import ndimage

from .prompting import (
    BinaryMask,
    PointPrompt,
    as_binary,
    compose_label_mask,
    run_augmented_prompt,
    sample_sparse_prompts,
)
from .scene import ClassTable, LabelMask, PathLike, read_label_pgm, write_label_pgm, FormatError

Mask = Union[BinaryMask, LabelMask]

# Prompted-oracle confidences; only their order matters downstream.
CONF_LOBE, CONF_INSTANCE, CONF_MERGED, CONF_PROMOTED = 0.5, 0.4, 0.3, 0.9


class SegmenterError(RuntimeError):
    pass


class MissingMaskError(SegmenterError, KeyError):
    pass


def _area(mask: Mask) -> int:
    if isinstance(mask, BinaryMask):
        return mask.area
    return int((mask.values != mask.ignore_id).sum())


@dataclass(frozen=True)
class SegmenterOutput:
    candidates: tuple  # (mask, confidence) pairs, descending confidence

    def __post_init__(self):
        cands = tuple(self.candidates)
        if not cands:
            raise SegmenterError("segmenter returned no candidates")
        for _, s in cands:
            if not np.isfinite(s):
                raise ValueError("confidence must be finite")
        # stable: equal scores keep the producer's order
        cands = tuple(sorted(cands, key=lambda c: -c[1]))
        object.__setattr__(self, "candidates", cands)

    @property
    def best(self) -> Mask:
        return self.candidates[0][0]

    @property
    def best_score(self) -> float:
        return self.candidates[0][1]

    @property
    def smallest(self) -> Mask:
        """Smallest-area candidate; ties keep the higher-confidence one."""
        return min(self.candidates, key=lambda c: _area(c[0]))[0]


class Segmenter(Protocol):
    def query(self, image, prompt: Optional[PointPrompt] = None, *, frame_index: Optional[int] = None) -> SegmenterOutput:
        """Segment ``image``; with ``prompt`` a prompted (binary) query, else a full label mask."""


def _check_dims(image, width, height):
    if image is not None and np.asarray(image).shape[:2] != (height, width):
        raise SegmenterError("image dimensions do not match the mask")


def _check_prompt(prompt: PointPrompt, width, height):
    for u, v in tuple(prompt.positives) + tuple(prompt.negatives):
        if not (0 <= u < width and 0 <= v < height):
            raise SegmenterError(f"prompt pixel ({u}, {v}) outside the image")


# ---------------------------------------------------------------------------
# File-backed
# ---------------------------------------------------------------------------


class MaskDirectorySegmenter:
    """Serves precomputed label masks ``<dir>/<frame>.pgm`` (optional ``<frame>.conf``)."""

    def __init__(self, root: PathLike, ct: ClassTable):
        self.root = Path(root)
        self.ct = ct
        self._masks: Dict[int, LabelMask] = {}
        self._conf: Dict[int, float] = {}
        if not self.root.is_dir():
            raise FileNotFoundError(f"mask directory not found: {self.root}")
        for f in sorted(self.root.glob("*.pgm")):
            if not f.stem.isdigit():
                continue
            i = int(f.stem)
            self._masks[i] = read_label_pgm(f, ct)
            conf = f.with_suffix(".conf")
            if conf.is_file():
                vals = [float(t) for t in conf.read_text().split()]
                if not vals or not all(0.0 <= x <= 1.0 for x in vals):
                    raise FormatError(f"{conf}: confidences must lie in [0, 1]")
                self._conf[i] = vals[0]

    @property
    def frame_indices(self) -> list:
        return sorted(self._masks)

    def query(self, image=None, prompt=None, *, frame_index=None) -> SegmenterOutput:
        if prompt is not None:
            raise SegmenterError("file-backed masks cannot answer point prompts")
        if frame_index not in self._masks:
            raise MissingMaskError(f"no mask for frame {frame_index} in {self.root}")
        m = self._masks[frame_index]
        _check_dims(image, m.width, m.height)
        return SegmenterOutput(((m, self._conf.get(frame_index, 1.0)),))


def load_mask_directory(root: PathLike, ct: ClassTable) -> MaskDirectorySegmenter:
    return MaskDirectorySegmenter(root, ct)


def write_mask_directory(root: PathLike, masks: Mapping[int, LabelMask], ct: ClassTable,
                         confidences: Optional[Mapping[int, float]] = None) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for i, m in masks.items():
        write_label_pgm(root / f"{i}.pgm", m, ct)
        if confidences and i in confidences:
            (root / f"{i}.conf").write_text(f"{float(confidences[i])!r}\n")


# ---------------------------------------------------------------------------
# Ground-truth oracles
# ---------------------------------------------------------------------------


def _instance_crops(mask: LabelMask, pad: int = 0):
    """Yield ``(class, (rows, cols) slice, local bool mask)`` per 4-connected instance.

    Order: by class, then by raster order of each component's first pixel.
    Crops are the component's bounding box grown by ``pad`` (clipped to the image).
    """
    H, W = mask.values.shape
    for c in mask.present_classes():
        lab, _ = ndimage.label(mask.values == c)
        for k, sl in enumerate(ndimage.find_objects(lab), 1):
            rs = slice(max(sl[0].start - pad, 0), min(sl[0].stop + pad, H))
            cs = slice(max(sl[1].start - pad, 0), min(sl[1].stop + pad, W))
            yield c, (rs, cs), lab[rs, cs] == k


def instances(mask: LabelMask):
    """Connected components (4-connectivity) per class, ordered by class then raster order."""
    out = []
    for c, sl, local in _instance_crops(mask):
        full = np.zeros(mask.values.shape, dtype=bool)
        full[sl] = local
        out.append((c, full))
    return out


def _component_at(mask: LabelMask, pixel):
    u, v = pixel
    c = int(mask.values[v, u])
    lab, n = ndimage.label(mask.values == c)
    return c, lab, n, lab[v, u]


@dataclass(frozen=True)
class NoiseSpec:
    morph_radius_px: int = 0
    drop_instance_prob: float = 0.0
    mislabel_prob: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for p in (self.drop_instance_prob, self.mislabel_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")


def _square(radius: int):
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def apply_noise(mask: LabelMask, noise: NoiseSpec, frame_index: int, n_classes: int) -> LabelMask:
    """Per instance: drop, then erode/dilate, then swap the class; first instance keeps contested pixels.

    Random draws are made for every instance in a fixed order, so runs that
    differ only in a probability share their draws (a higher drop probability
    drops a superset of instances).
    """
    rng = np.random.default_rng([noise.rng_seed, frame_index])
    r = noise.morph_radius_px
    out = np.full(mask.values.shape, mask.ignore_id, dtype=np.int32)
    for c, sl, inst in _instance_crops(mask, pad=abs(r) + 1):
        u_drop, u_swap = rng.random(), rng.random()
        swap_to = int(rng.integers(max(n_classes - 1, 1)))
        if u_drop < noise.drop_instance_prob:
            continue
        if r < 0:
            # crops reach the image border only where the image ends, and the
            # image border is not an object boundary
            inst = ndimage.binary_erosion(inst, _square(-r), border_value=1)
        elif r > 0:
            inst = ndimage.binary_dilation(inst, _square(r))
        if u_swap < noise.mislabel_prob and n_classes > 1:
            c = swap_to + (swap_to >= c)
        view = out[sl]
        view[inst & (view == mask.ignore_id)] = c
    return LabelMask(mask.width, mask.height, out.ravel(), mask.ignore_id)


class OracleSegmenter:
    """Ground-truth renderings, optionally degraded by :class:`NoiseSpec`.

    An unprompted query returns the (noisy) label mask of the frame; a prompted
    query returns the exact GT connected component under the first positive.
    """

    def __init__(self, gt_masks: Mapping[int, LabelMask], noise: NoiseSpec = NoiseSpec(),
                 ct: Optional[ClassTable] = None):
        self.gt = dict(gt_masks)
        self.noise = noise
        self.ct = ct or ClassTable.scannet20()

    def query(self, image=None, prompt=None, *, frame_index=None) -> SegmenterOutput:
        if frame_index not in self.gt:
            raise MissingMaskError(f"no ground truth for frame {frame_index}")
        gt = self.gt[frame_index]
        _check_dims(image, gt.width, gt.height)
        if prompt is None:
            return SegmenterOutput(((apply_noise(gt, self.noise, frame_index, self.ct.m), 1.0),))
        _check_prompt(prompt, gt.width, gt.height)
        p = prompt.positives[0]
        if gt.values[p[1], p[0]] == gt.ignore_id:
            raise SegmenterError("prompt on an ignore pixel")
        _, lab, _, k = _component_at(gt, p)
        return SegmenterOutput(((BinaryMask(lab == k), 1.0),))


def oracle_segmenter(gt_masks: Mapping[int, LabelMask], noise: NoiseSpec = NoiseSpec(),
                     ct: Optional[ClassTable] = None) -> OracleSegmenter:
    return OracleSegmenter(gt_masks, noise, ct)


def principal_split(inst: np.ndarray, pixel):
    """Split an instance across its principal axis.

    Returns ``(lobe, axis_coord)``: the connected part of the half holding
    ``pixel`` and each pixel's coordinate along the principal axis (relative
    to the centroid, over the whole image).
    """
    vs, us = np.nonzero(inst)
    pts = np.stack([us, vs], axis=1).astype(np.float64)
    centroid = pts.mean(axis=0)
    if len(pts) > 1:
        w, vec = np.linalg.eigh(np.cov(pts - centroid, rowvar=False))
        axis = vec[:, np.argmax(w)]
    else:
        axis = np.array([1.0, 0.0])
    H, W = inst.shape
    gv, gu = np.mgrid[0:H, 0:W]
    coord = (gu - centroid[0]) * axis[0] + (gv - centroid[1]) * axis[1]
    u, v = pixel
    side = coord >= 0 if coord[v, u] >= 0 else coord < 0
    lab, _ = ndimage.label(inst & side)
    return lab == lab[v, u], coord


class PromptedOracleSegmenter:
    """Simulates mask-granularity ambiguity of a point-prompted segmenter.

    For a positive at pixel p on instance I (GT component of p's class) three
    candidates come back: the sub-lobe of I around p (I split across its
    principal axis), I itself, and I merged with its nearest same-class
    instance. A second positive promotes I to high confidence when it lies in
    the other half of I or the positives span at least half of the sub-lobe's
    length along the axis; a positive on the nearest same-class instance
    promotes the merged candidate. Candidates holding a negative are dropped.
    """

    def __init__(self, gt_masks: Union[LabelMask, Mapping[int, LabelMask]]):
        self.gt = {None: gt_masks} if isinstance(gt_masks, LabelMask) else dict(gt_masks)

    def _gt(self, frame_index):
        if frame_index in self.gt:
            return self.gt[frame_index]
        if None in self.gt and len(self.gt) == 1:
            return self.gt[None]
        raise MissingMaskError(f"no ground truth for frame {frame_index}")

    def query(self, image=None, prompt=None, *, frame_index=None) -> SegmenterOutput:
        gt = self._gt(frame_index)
        _check_dims(image, gt.width, gt.height)
        if prompt is None or not prompt.positives:
            raise SegmenterError("prompted oracle needs at least one positive point")
        _check_prompt(prompt, gt.width, gt.height)
        p = tuple(prompt.positives[0])
        if gt.values[p[1], p[0]] == gt.ignore_id:
            raise SegmenterError("prompt on an ignore pixel: empty output")
        c, lab, n, k = _component_at(gt, p)
        inst = lab == k
        lobe, coord = principal_split(inst, p)
        merged, other = inst, None
        if n > 1:
            dist = ndimage.distance_transform_edt(~inst)
            best = None
            for j in range(1, n + 1):
                if j == k:
                    continue
                d = dist[lab == j].min()
                if best is None or d < best:
                    best, other = d, lab == j
            merged = inst | other
        conf = [CONF_LOBE, CONF_INSTANCE, CONF_MERGED]
        lobe_coord = coord[lobe]
        lobe_len = lobe_coord.max() - lobe_coord.min()
        for q in prompt.positives[1:]:
            u, v = q
            if inst[v, u]:
                spread = abs(coord[v, u] - coord[p[1], p[0]])
                if not lobe[v, u] or spread >= 0.5 * lobe_len:
                    conf[1] = max(conf[1], CONF_PROMOTED)
            elif other is not None and other[v, u]:
                conf[2] = max(conf[2], CONF_PROMOTED)
        cands = [(BinaryMask(lobe), conf[0]), (BinaryMask(inst), conf[1]), (BinaryMask(merged), conf[2])]
        for u, v in prompt.negatives:
            cands = [cd for cd in cands if not cd[0].data[v, u]]
        if not cands:
            raise SegmenterError("every candidate contains a negative point")
        return SegmenterOutput(tuple(cands))


def prompted_oracle_segmenter(gt_masks) -> PromptedOracleSegmenter:
    return PromptedOracleSegmenter(gt_masks)


# ---------------------------------------------------------------------------
# Per-frame label masks for fusion
# ---------------------------------------------------------------------------


def label_mask_from_segmenter(segmenter, frame_index: int, image=None) -> LabelMask:
    """Top candidate of an unprompted query, as a label mask."""
    best = segmenter.query(image, None, frame_index=frame_index).best
    if not isinstance(best, LabelMask):
        raise SegmenterError("unprompted query did not return a label mask")
    return best


def label_mask_from_prompts(
    segmenter,
    image,
    gt_mask: LabelMask,
    strategy: str = "none",
    rng_seed: int = 0,
    frame_index: int = 0,
) -> LabelMask:
    """Sparse one-point-per-class prompting of ``segmenter``, one binary mask per class.

    Annotations are drawn from ``gt_mask``. Where masks overlap, the lower class id wins.
    A mask without labeled pixels yields an all-ignore mask.
    """
    if not gt_mask.present_classes():
        return compose_label_mask([], gt_mask.width, gt_mask.height, gt_mask.ignore_id)
    ps = sample_sparse_prompts(gt_mask, [rng_seed, frame_index])
    masks = []
    for c in ps.classes():
        try:
            bm = run_augmented_prompt(segmenter, image, ps, c, strategy,
                                      rng_seed=[rng_seed, frame_index, c], frame_index=frame_index)
        except SegmenterError:
            continue
        masks.append((c, as_binary(bm)))
    return compose_label_mask(masks, gt_mask.width, gt_mask.height, gt_mask.ignore_id)
