import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csfusion.prompting import (
    BinaryMask,
    PromptSet,
    assemble_class_prompt,
    augment_max_distance,
    augment_max_entropy,
    augment_random,
    compose_label_mask,
    entropy_at,
    iou,
    quantize_rgb,
    region_entropy,
    run_augmented_prompt,
    sample_sparse_prompts,
)
from csfusion.scene import LabelMask
from csfusion.segmenters import OracleSegmenter, PromptedOracleSegmenter, SegmenterOutput

from oracles import scan_max_distance, scan_max_entropy, window_entropy

IGN = 20


def _mask(values):
    values = np.asarray(values)
    h, w = values.shape
    return LabelMask(w, h, values.ravel(), IGN)


def _distinct_bin_colors(k, rng=None):
    bins = np.arange(512) if rng is None else rng.permutation(512)
    b = bins[:k]
    return np.stack([(b >> 6) << 5, ((b >> 3) & 7) << 5, (b & 7) << 5], axis=-1).astype(np.uint8)


# --- sparse prompts -------------------------------------------------------


def test_sparse_prompts_one_per_class():
    m = _mask([[0, 0], [0, IGN]])
    ps = sample_sparse_prompts(m, 0)
    assert ps.classes() == [0]
    m2 = _mask([[1, 7, 7], [1, IGN, 7]])
    ps2 = sample_sparse_prompts(m2, 1)
    assert ps2.classes() == [1, 7]
    for c in ps2.classes():
        u, v = ps2[c]
        assert m2.values[v, u] == c


def test_sparse_prompts_deterministic_and_empty():
    m = _mask(np.random.default_rng(0).integers(0, 4, (6, 6)))
    assert sample_sparse_prompts(m, 9) == sample_sparse_prompts(m, 9)
    with pytest.raises(ValueError):
        sample_sparse_prompts(_mask(np.full((2, 2), IGN)), 0)


def test_sparse_prompt_frequencies_uniform():
    vals = np.array([[0, 0, 0, 1], [0, 1, 1, 1], [0, 0, 1, IGN]])
    m = _mask(vals)
    rng = np.random.default_rng(11)
    draws = 100_000
    counts = {}
    for _ in range(draws):
        ps = sample_sparse_prompts(m, rng)
        for c in ps.classes():
            counts[ps[c]] = counts.get(ps[c], 0) + 1
    for c in (0, 1):
        pix = [(u, v) for v in range(3) for u in range(4) if vals[v, u] == c]
        p = 1.0 / len(pix)
        sigma = math.sqrt(draws * p * (1 - p))
        for px in pix:
            assert abs(counts.get(px, 0) - draws * p) <= 3 * sigma


def test_assemble_class_prompt():
    ps = PromptSet(10, 10, {2: (1, 1)})
    pos, neg = assemble_class_prompt(ps, 2)
    assert len(pos) == 1 and neg == []
    ps = PromptSet(10, 10, {2: (1, 1), 5: (2, 2), 9: (3, 3)})
    pos, neg = assemble_class_prompt(ps, 5)
    assert [p.pixel for p in pos] == [(2, 2)] and {p.pixel for p in neg} == {(1, 1), (3, 3)}
    assert all(p.role == "negative" for p in neg) and pos[0].role == "positive"
    with pytest.raises(KeyError):
        assemble_class_prompt(ps, 4)


# --- augmentation ---------------------------------------------------------


def test_random_single_pixel_and_membership():
    m = np.zeros((5, 5), bool)
    m[2, 3] = True
    assert augment_random(BinaryMask(m), 0) == (3, 2)
    rng = np.random.default_rng(1)
    for i in range(10_000):
        mm = rng.random((6, 6)) < 0.3
        mm[0, 0] = True
        u, v = augment_random(BinaryMask(mm), i)
        assert mm[v, u]


def test_random_frequencies_uniform():
    m = np.zeros((4, 4), bool)
    m[1:3, 1:4] = True
    n = 60_000
    counts = np.zeros((4, 4))
    for i in range(n):
        u, v = augment_random(BinaryMask(m), i)
        counts[v, u] += 1
    p = 1 / 6
    assert np.all(np.abs(counts[m] - n * p) <= 3 * math.sqrt(n * p * (1 - p)))
    with pytest.raises(ValueError):
        augment_random(BinaryMask.empty(3, 3), 0)


def test_max_distance_examples():
    m = np.zeros((1, 11), bool)
    m[0, :] = True
    assert augment_max_distance(BinaryMask(m), (0, 0)) == (10, 0)
    one = np.zeros((3, 3), bool)
    one[1, 1] = True
    assert augment_max_distance(BinaryMask(one), (1, 1)) == (1, 1)
    with pytest.raises(ValueError):
        augment_max_distance(BinaryMask.empty(3, 3), (0, 0))


def test_max_distance_tie_row_major():
    m = np.ones((3, 3), bool)
    assert augment_max_distance(BinaryMask(m), (1, 1)) == (0, 0)


def test_max_distance_matches_scan():
    rng = np.random.default_rng(2)
    for _ in range(200):
        h, w = rng.integers(1, 65, 2)
        m = rng.random((h, w)) < rng.uniform(0.05, 0.9)
        m.flat[rng.integers(m.size)] = True
        a = (int(rng.integers(w)), int(rng.integers(h)))
        assert augment_max_distance(BinaryMask(m), a) == scan_max_distance(m, a)


def test_entropy_uniform_window_is_zero():
    img = np.full((9, 9, 3), 77, np.uint8)
    assert region_entropy(img, (4, 4)) == 0.0


def test_entropy_two_bin_split():
    img = np.zeros((9, 9, 3), np.uint8)
    img.reshape(-1, 3)[:40] = (255, 255, 255)
    h = region_entropy(img, (4, 4))
    expect = -(40 / 81) * math.log2(40 / 81) - (41 / 81) * math.log2(41 / 81)
    assert abs(h - expect) <= 1e-12 and abs(h - 0.9999) < 1e-3


def test_entropy_81_distinct_bins():
    img = _distinct_bin_colors(81).reshape(9, 9, 3)
    assert abs(region_entropy(img, (4, 4)) - math.log2(81)) <= 1e-9


def test_entropy_cropped_at_border():
    img = np.zeros((9, 9, 3), np.uint8)
    img[0, 0] = (255, 0, 0)
    # corner window is 5 x 5 = 25 pixels: one red, 24 black
    expect = -(1 / 25) * math.log2(1 / 25) - (24 / 25) * math.log2(24 / 25)
    assert abs(region_entropy(img, (0, 0)) - expect) <= 1e-12


def test_entropy_window_validation():
    img = np.zeros((5, 5, 3), np.uint8)
    for bad in (0, 4, 17):
        with pytest.raises(ValueError):
            region_entropy(img, (2, 2), bad)
    with pytest.raises(ValueError):
        region_entropy(img, (5, 0))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_entropy_permutation_invariant_and_bounded(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 82))
    pal = rng.integers(0, 256, (k, 3), dtype=np.uint8)
    img = pal[rng.integers(0, k, 81)].reshape(9, 9, 3)
    h = region_entropy(img, (4, 4))
    perm = img.reshape(81, 3)[rng.permutation(81)].reshape(9, 9, 3)
    assert region_entropy(perm, (4, 4)) == h
    assert 0.0 <= h <= math.log2(512)


def test_batched_entropy_equals_scalar():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, (20, 25, 3), dtype=np.uint8)
    bins = quantize_rgb(img)
    vs, us = np.mgrid[0:20, 0:25]
    batched = entropy_at(bins, us.ravel(), vs.ravel(), 9)
    scalar = [region_entropy(img, (u, v), 9) for u, v in zip(us.ravel(), vs.ravel())]
    assert batched.tolist() == scalar  # bit-identical


def test_entropy_against_high_precision():
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, (12, 12, 3), dtype=np.uint8)
    for u, v in [(0, 0), (5, 6), (11, 11), (3, 10)]:
        assert abs(region_entropy(img, (u, v)) - float(window_entropy(img, u, v))) <= 1e-12


def test_max_entropy_constant_image():
    img = np.full((8, 8, 3), 10, np.uint8)
    m = np.zeros((8, 8), bool)
    m[3:6, 2:7] = True
    assert augment_max_entropy(img, BinaryMask(m), (4, 4)) == (2, 3)


def test_max_entropy_finds_textured_patch():
    img = np.full((32, 32, 3), 128, np.uint8)
    patch = _distinct_bin_colors(81).reshape(9, 9, 3)
    img[18:27, 20:29] = patch  # center (24, 22)
    m = np.ones((32, 32), bool)
    assert augment_max_entropy(img, BinaryMask(m), (3, 3)) == (24, 22)


def test_max_entropy_exact_tie_takes_row_major():
    # 2-row image, 3x3 windows. Anchor (7, 0) sees 2 + 2 pixels: H = 1.
    # (0, 1) sees four distinct bins (H = 2), (3, 1) one bin (H = 0): |dH| = 1 for both.
    A, B, C, D, E, F = _distinct_bin_colors(6)
    cols = [(A, B), (C, D), (E, E), (E, E), (E, E), (E, E), (E, E), (F, F)]
    img = np.array([[c[0] for c in cols], [c[1] for c in cols]], np.uint8)
    assert region_entropy(img, (7, 0), 3) == 1.0
    assert region_entropy(img, (0, 1), 3) == 2.0 and region_entropy(img, (3, 1), 3) == 0.0
    m = np.zeros((2, 8), bool)
    m[1, 0] = m[1, 3] = True
    assert augment_max_entropy(img, BinaryMask(m), (7, 0), window=3) == (0, 1)
    m = np.zeros((2, 8), bool)
    m[0, 3] = m[1, 0] = True
    assert augment_max_entropy(img, BinaryMask(m), (7, 0), window=3) == (3, 0)


def test_max_entropy_matches_scan_small():
    rng = np.random.default_rng(5)
    for _ in range(30):
        h, w = rng.integers(1, 14, 2)
        k = int(rng.integers(1, 5))
        img = _distinct_bin_colors(k, rng)[rng.integers(0, k, (h, w))]
        m = rng.random((h, w)) < 0.5
        m.flat[rng.integers(m.size)] = True
        a = (int(rng.integers(w)), int(rng.integers(h)))
        assert augment_max_entropy(img, BinaryMask(m), a) == scan_max_entropy(img, m, a)


def test_max_entropy_stride():
    img = np.zeros((4, 4, 3), np.uint8)
    m = np.ones((4, 4), bool)
    assert augment_max_entropy(img, BinaryMask(m), (0, 0), stride=5) == (0, 0)


# --- prompting a segmenter -----------------------------------------------


def test_exact_oracle_unchanged_by_augmentation():
    vals = np.full((12, 12), 0)
    vals[2:7, 3:10] = 4
    gt = _mask(vals)
    seg = OracleSegmenter({0: gt})
    img = np.zeros((12, 12, 3), np.uint8)
    ps = sample_sparse_prompts(gt, 0)
    base = run_augmented_prompt(seg, img, ps, 4, "none", frame_index=0)
    for s in ("random", "max_distance", "max_entropy"):
        assert run_augmented_prompt(seg, img, ps, 4, s, rng_seed=1, frame_index=0) == base
    assert base == BinaryMask(vals == 4)


class _EmptyFirst:
    def __init__(self):
        self.calls = 0

    def query(self, image, prompt=None, *, frame_index=None):
        self.calls += 1
        full = np.ones((4, 4), bool)
        return SegmenterOutput(((BinaryMask(full), 0.8), (BinaryMask.empty(4, 4), 0.1)))


def test_empty_initial_mask_falls_back():
    seg = _EmptyFirst()
    ps = PromptSet(4, 4, {1: (0, 0)})
    out = run_augmented_prompt(seg, np.zeros((4, 4, 3), np.uint8), ps, 1, "max_distance")
    assert out == BinaryMask(np.ones((4, 4), bool)) and seg.calls == 1


def test_unknown_strategy():
    with pytest.raises(ValueError):
        run_augmented_prompt(_EmptyFirst(), None, PromptSet(4, 4, {1: (0, 0)}), 1, "loudest")


def _hand_dumbbell():
    # horizontal: discs of radius 5 at x = 10 and x = 40, bar of half-height 1
    gv, gu = np.mgrid[0:21, 0:51]
    inst = ((gu - 10) ** 2 + (gv - 10) ** 2 <= 25) | ((gu - 40) ** 2 + (gv - 10) ** 2 <= 25)
    inst |= (gu >= 10) & (gu <= 40) & (abs(gv - 10) <= 1)
    return _mask(np.where(inst, 6, 0)), inst


def test_max_distance_completes_hand_dumbbell():
    gt, inst = _hand_dumbbell()
    seg = PromptedOracleSegmenter(gt)
    ps = PromptSet(gt.width, gt.height, {6: (10, 10)})
    img = np.zeros((21, 51, 3), np.uint8)
    none = iou(run_augmented_prompt(seg, img, ps, 6, "none"), BinaryMask(inst))
    aug = iou(run_augmented_prompt(seg, img, ps, 6, "max_distance"), BinaryMask(inst))
    assert 0.4 < none < 0.6 and aug == 1.0


def test_max_distance_beats_none_on_dumbbells():
    from csfusion.synthetic import make_dumbbell

    rng = np.random.default_rng(6)
    none, aug = [], []
    for k in range(20):
        f = make_dumbbell(rng)
        seg = PromptedOracleSegmenter(f.gt)
        ps = sample_sparse_prompts(f.gt, k)
        truth = BinaryMask(f.instance)
        none.append(iou(run_augmented_prompt(seg, f.image, ps, 6, "none"), truth))
        aug.append(iou(run_augmented_prompt(seg, f.image, ps, 6, "max_distance"), truth))
        assert aug[-1] >= none[-1]
    assert np.mean(aug) > np.mean(none)


def test_compose_first_mask_keeps_pixel():
    a = np.zeros((2, 3), bool)
    a[0, :2] = True
    b = np.zeros((2, 3), bool)
    b[0, 1:] = True
    out = compose_label_mask([(2, BinaryMask(a)), (5, BinaryMask(b))], 3, 2, IGN)
    assert out.values.tolist() == [[2, 2, 5], [IGN, IGN, IGN]]


def test_iou_basics():
    a = np.zeros((3, 3), bool)
    a[0] = True
    assert iou(BinaryMask(a), BinaryMask(a)) == 1.0
    assert iou(BinaryMask(a), BinaryMask(~a)) == 0.0
    assert iou(BinaryMask.empty(3, 3), BinaryMask.empty(3, 3)) == 1.0
