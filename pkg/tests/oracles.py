"""Exhaustive-scan reference implementations, written independently of the package."""

import mpmath
import numpy as np

mpmath.mp.dps = 60
TIE = mpmath.mpf("1e-40")


def bin_of(rgb):
    r, g, b = (int(x) >> 5 for x in rgb)
    return r * 64 + g * 8 + b


def window_entropy(image, u, v, window=9):
    """Entropy in bits with 60-digit arithmetic; the window is cropped at the border."""
    h, w = image.shape[:2]
    r = window // 2
    hist = {}
    for y in range(max(v - r, 0), min(v + r + 1, h)):
        for x in range(max(u - r, 0), min(u + r + 1, w)):
            k = bin_of(image[y, x])
            hist[k] = hist.get(k, 0) + 1
    n = sum(hist.values())
    return -sum(mpmath.mpf(c) / n * mpmath.log(mpmath.mpf(c) / n, 2) for c in hist.values())


def scan_max_distance(mask, anchor):
    best, arg = -1, None
    for v in range(mask.shape[0]):
        for u in range(mask.shape[1]):
            if mask[v, u]:
                d = (u - anchor[0]) ** 2 + (v - anchor[1]) ** 2
                if d > best:
                    best, arg = d, (u, v)
    return arg


def scan_max_entropy(image, mask, anchor, window=9):
    ha = window_entropy(image, anchor[0], anchor[1], window)
    best, arg = None, None
    for v in range(mask.shape[0]):
        for u in range(mask.shape[1]):
            if mask[v, u]:
                d = abs(window_entropy(image, u, v, window) - ha)
                if best is None or d > best + TIE:
                    best, arg = d, (u, v)
    return arg
