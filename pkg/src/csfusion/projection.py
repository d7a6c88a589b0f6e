"""Pinhole unprojection of labeled pixels and the inverse z-buffer point renderer.

Camera frame convention: x right, y down, z forward; integer pixel coordinates
address pixel centers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .scene import (
    CameraIntrinsics,
    CameraPose,
    ClassTable,
    DepthMap,
    FrameRecord,
    LabelMask,
    ScenePointCloud,
)

MM_PER_M = 1000.0
MAX_DEPTH_MM = 65535


class InvalidDepthError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledFragment:
    points: np.ndarray
    labels: np.ndarray
    source_frame: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        lab = np.asarray(self.labels, dtype=np.int32).reshape(-1)
        if len(pts) != len(lab):
            raise ValueError("points and labels differ in length")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return len(self.labels)


def unproject_pixel(u: float, v: float, depth_mm: int, K: CameraIntrinsics) -> np.ndarray:
    """Camera-space point (meters) seen at pixel (u, v) with the given depth."""
    if depth_mm <= 0:
        raise InvalidDepthError("invalid depth (0)")
    if not (-0.5 <= u < K.width - 0.5 and -0.5 <= v < K.height - 0.5):
        raise ValueError(f"pixel ({u}, {v}) outside the image")
    z = depth_mm / MM_PER_M
    return np.array([(u - K.cx) * z / K.fx, (v - K.cy) * z / K.fy, z])


def unproject_pixels(u, v, depth_mm, K: CameraIntrinsics) -> np.ndarray:
    """Vectorized :func:`unproject_pixel` without validation."""
    z = np.asarray(depth_mm, dtype=np.float64) / MM_PER_M
    x = (np.asarray(u, dtype=np.float64) - K.cx) * z / K.fx
    y = (np.asarray(v, dtype=np.float64) - K.cy) * z / K.fy
    return np.stack([x, y, z], axis=-1)


def to_camera(points_world: np.ndarray, pose: CameraPose) -> np.ndarray:
    # R^T (p - t), written for row vectors
    return (np.asarray(points_world, dtype=np.float64) - pose.translation) @ pose.rotation


def to_world(points_cam: np.ndarray, pose: CameraPose) -> np.ndarray:
    return np.asarray(points_cam, dtype=np.float64) @ pose.rotation.T + pose.translation


def project_point(p_world, K: CameraIntrinsics, pose: CameraPose) -> Optional[Tuple[float, float, int]]:
    """Pixel (u, v) and rounded depth in mm, or None when the point is behind the camera."""
    x, y, z = to_camera(np.asarray(p_world, dtype=np.float64)[None, :], pose)[0]
    if z <= 0:
        return None
    return (K.fx * x / z + K.cx, K.fy * y / z + K.cy, int(round(MM_PER_M * z)))


def project_points(points_world: np.ndarray, K: CameraIntrinsics, pose: CameraPose):
    """Vectorized projection: returns (u, v, z_m); u and v are NaN where z <= 0."""
    pc = to_camera(points_world, pose)
    z = pc[:, 2]
    front = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(front, K.fx * pc[:, 0] / z + K.cx, np.nan)
        v = np.where(front, K.fy * pc[:, 1] / z + K.cy, np.nan)
    return u, v, z


def frame_to_fragment(frame: FrameRecord, mask: LabelMask, pixel_stride: int = 1) -> LabeledFragment:
    """World-space points for every valid-depth, labeled pixel on the stride grid (row-major)."""
    K = frame.intrinsics
    if (mask.width, mask.height) != (K.width, K.height):
        raise ValueError("dimension mismatch: mask vs frame depth")
    if pixel_stride < 1:
        raise ValueError("pixel_stride must be >= 1")
    depth = frame.depth.values[::pixel_stride, ::pixel_stride]
    labels = mask.values[::pixel_stride, ::pixel_stride]
    keep = (depth > 0) & (labels != mask.ignore_id)
    rows, cols = np.nonzero(keep)
    pts = unproject_pixels(cols * pixel_stride, rows * pixel_stride, depth[rows, cols], K)
    return LabeledFragment(to_world(pts, frame.pose), labels[rows, cols], frame.frame_index)


def rasterize(cloud: ScenePointCloud, K: CameraIntrinsics, pose: CameraPose, splat_radius_px: int = 1):
    """Z-buffer point splatting.

    Returns ``(depth_mm, index)`` images of shape (H, W): the rounded depth of
    the winning point (0 where empty) and its point index (-1 where empty).
    Each point covers a (2r+1)^2 square around its rounded pixel; a strictly
    smaller depth replaces, so equal depths keep the lower point index.
    """
    W, H, r = K.width, K.height, int(splat_radius_px)
    if r < 0:
        raise ValueError("splat radius must be >= 0")
    u, v, z = project_points(cloud.positions, K, pose)
    ok = np.isfinite(u) & (u > -r - 0.5) & (u < W + r - 0.5) & (v > -r - 0.5) & (v < H + r - 0.5)
    d_mm = np.rint(z * MM_PER_M)
    ok &= (d_mm >= 1) & (d_mm <= MAX_DEPTH_MM)
    idx = np.flatnonzero(ok)
    ui = np.rint(u[idx]).astype(np.int64)
    vi = np.rint(v[idx]).astype(np.int64)
    zs = z[idx]
    offs = np.arange(-r, r + 1)
    du = np.tile(offs, len(offs))
    dv = np.repeat(offs, len(offs))
    # point-major layout so a stable sort breaks depth ties by point index
    U = ui[:, None] + du[None, :]
    V = vi[:, None] + dv[None, :]
    inside = (U >= 0) & (U < W) & (V >= 0) & (V < H)
    pix = (V * W + U)[inside]
    zz = np.broadcast_to(zs[:, None], U.shape)[inside]
    pid = np.broadcast_to(idx[:, None], U.shape)[inside]
    order = np.lexsort((zz, pix))
    pix_sorted = pix[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]
    win = order[first]
    depth = np.zeros(H * W, dtype=np.uint16)
    index = np.full(H * W, -1, dtype=np.int64)
    depth[pix[win]] = np.rint(zz[win] * MM_PER_M).astype(np.uint16)
    index[pix[win]] = pid[win]
    return depth.reshape(H, W), index.reshape(H, W)


def render_frame(
    cloud: ScenePointCloud,
    K: CameraIntrinsics,
    pose: CameraPose,
    splat_radius_px: int = 1,
    ct: Optional[ClassTable] = None,
) -> Tuple[DepthMap, LabelMask]:
    """Depth map and ground-truth label mask of ``cloud`` seen from ``pose``."""
    if cloud.gt_labels is None:
        raise ValueError("render_frame needs a cloud with gt_labels")
    ignore = (ct or ClassTable.scannet20()).ignore_id
    depth, index = rasterize(cloud, K, pose, splat_radius_px)
    labels = np.where(index >= 0, cloud.gt_labels[np.maximum(index, 0)], ignore)
    return DepthMap(K.width, K.height, depth.ravel()), LabelMask(K.width, K.height, labels.ravel(), ignore)


def render_color(index: np.ndarray, cloud: ScenePointCloud, background=(0, 0, 0)) -> np.ndarray:
    """RGB image from a :func:`rasterize` index image."""
    if cloud.colors is None:
        raise ValueError("cloud has no colors")
    img = np.empty(index.shape + (3,), dtype=np.uint8)
    img[...] = np.asarray(background, dtype=np.uint8)
    hit = index >= 0
    img[hit] = cloud.colors[index[hit]]
    return img
