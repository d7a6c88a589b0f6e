"""Synthetic labeled rooms and orbiting RGB-D trajectories for end-to-end checks."""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .projection import rasterize, render_color
from .scene import (
    CameraIntrinsics,
    CameraPose,
    ClassTable,
    DepthMap,
    FrameRecord,
    LabelMask,
    PathLike,
    ScenePointCloud,
    save_scene,
    write_frame,
)

OBJECT_CLASSES = (
    "cabinet", "bed", "chair", "sofa", "table", "bookshelf", "counter",
    "desk", "refrigerator", "toilet", "sink", "bathtub", "otherfurniture",
)
WALL_MARGIN = 0.15
OBJECT_GAP = 0.1
MAX_PLACEMENT_TRIES = 500


class SceneTooCrowded(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    room: tuple = (4.0, 4.0, 2.5)
    n_objects: int = 8
    object_classes: tuple = OBJECT_CLASSES
    density: float = 3000.0  # points per square meter
    rng_seed: int = 0
    object_size: tuple = (0.4, 1.1)  # edge length range (m)
    object_height: tuple = (0.4, 1.1)

    def __post_init__(self):
        if len(self.room) != 3 or min(self.room) <= 0:
            raise ValueError("room dimensions must be positive")
        if not self.density > 0:
            raise ValueError("density must be positive")
        if self.n_objects < 0:
            raise ValueError("object count must be >= 0")
        if self.n_objects and not self.object_classes:
            raise ValueError("no object classes to draw from")


@dataclass(frozen=True)
class Cuboid:
    lo: tuple  # (x, y, z) min corner; z = 0 on the floor
    hi: tuple
    class_name: str

    def overlaps(self, other: "Cuboid", gap: float = 0.0) -> bool:
        return all(
            self.lo[a] < other.hi[a] + gap and other.lo[a] < self.hi[a] + gap for a in range(2)
        )


@dataclass
class SceneLayout:
    spec: SceneSpec
    objects: list = field(default_factory=list)

    def surface_area(self) -> float:
        sx, sy, sz = self.spec.room
        area = sx * sy + 2 * (sx + sy) * sz
        for o in self.objects:
            dx, dy, dz = (o.hi[a] - o.lo[a] for a in range(3))
            area += dx * dy + 2 * (dx + dy) * dz - dx * dy  # top and sides; the footprint leaves the floor
        return area


def class_color(class_id: int) -> np.ndarray:
    h = (class_id * 0.61803398875) % 1.0
    r, g, b = colorsys.hsv_to_rgb(h, 0.55, 0.85)
    return np.array([r, g, b]) * 255.0


def place_objects(spec: SceneSpec, rng: np.random.Generator) -> list:
    sx, sy, _ = spec.room
    placed = []
    for _ in range(spec.n_objects):
        name = spec.object_classes[int(rng.integers(len(spec.object_classes)))]
        for _ in range(MAX_PLACEMENT_TRIES):
            dx, dy = rng.uniform(*spec.object_size, size=2)
            dz = rng.uniform(*spec.object_height)
            if dx + 2 * WALL_MARGIN > sx or dy + 2 * WALL_MARGIN > sy:
                continue
            x0 = rng.uniform(WALL_MARGIN, sx - WALL_MARGIN - dx)
            y0 = rng.uniform(WALL_MARGIN, sy - WALL_MARGIN - dy)
            cand = Cuboid((x0, y0, 0.0), (x0 + dx, y0 + dy, min(dz, spec.room[2])), name)
            if not any(cand.overlaps(o, OBJECT_GAP) for o in placed):
                placed.append(cand)
                break
        else:
            raise SceneTooCrowded("scene too crowded: could not place every object")
    return placed


def _sample_rect(rng, origin, e1, e2, n):
    a = rng.random((n, 1))
    b = rng.random((n, 1))
    return np.asarray(origin) + a * np.asarray(e1) + b * np.asarray(e2)


def _count(area, density):
    return int(round(area * density))


def make_scene(spec: SceneSpec = SceneSpec(), ct: Optional[ClassTable] = None):
    """Room (floor + 4 walls) with axis-aligned cuboid objects, surface-sampled.

    The floor under objects is not sampled and object bottoms are omitted, so
    every point lies on a surface that can be seen.
    """
    ct = ct or ClassTable.scannet20()
    rng = np.random.default_rng(spec.rng_seed)
    sx, sy, sz = spec.room
    objects = place_objects(spec, rng)
    wall, floor = ct.index("wall"), ct.index("floor")
    parts = []  # (points, class_id)

    # floor: rejection-sample outside object footprints
    free_area = sx * sy - sum((o.hi[0] - o.lo[0]) * (o.hi[1] - o.lo[1]) for o in objects)
    need = _count(free_area, spec.density)
    chunks, got = [], 0
    while got < need:
        pts = _sample_rect(rng, (0, 0, 0), (sx, 0, 0), (0, sy, 0), max(need - got, 64) * 2)
        keep = np.ones(len(pts), dtype=bool)
        for o in objects:
            keep &= ~((pts[:, 0] >= o.lo[0]) & (pts[:, 0] <= o.hi[0]) & (pts[:, 1] >= o.lo[1]) & (pts[:, 1] <= o.hi[1]))
        pts = pts[keep][: need - got]
        chunks.append(pts)
        got += len(pts)
    parts.append((np.concatenate(chunks) if chunks else np.empty((0, 3)), floor))

    walls = [
        ((0, 0, 0), (sx, 0, 0), (0, 0, sz)),
        ((0, sy, 0), (sx, 0, 0), (0, 0, sz)),
        ((0, 0, 0), (0, sy, 0), (0, 0, sz)),
        ((sx, 0, 0), (0, sy, 0), (0, 0, sz)),
    ]
    for origin, e1, e2 in walls:
        area = np.linalg.norm(e1) * np.linalg.norm(e2)
        parts.append((_sample_rect(rng, origin, e1, e2, _count(area, spec.density)), wall))

    for o in objects:
        (x0, y0, z0), (x1, y1, z1) = o.lo, o.hi
        dx, dy, dz = x1 - x0, y1 - y0, z1 - z0
        faces = [
            ((x0, y0, z1), (dx, 0, 0), (0, dy, 0)),  # top
            ((x0, y0, z0), (dx, 0, 0), (0, 0, dz)),
            ((x0, y1, z0), (dx, 0, 0), (0, 0, dz)),
            ((x0, y0, z0), (0, dy, 0), (0, 0, dz)),
            ((x1, y0, z0), (0, dy, 0), (0, 0, dz)),
        ]
        pts = [_sample_rect(rng, org, e1, e2, _count(np.linalg.norm(e1) * np.linalg.norm(e2), spec.density))
               for org, e1, e2 in faces]
        parts.append((np.concatenate(pts), ct.index(o.class_name)))

    positions = np.concatenate([p for p, _ in parts])
    labels = np.concatenate([np.full(len(p), c, dtype=np.int32) for p, c in parts])
    colors = []
    for p, c in parts:
        base = class_color(c) + rng.uniform(-25, 25, size=3)  # per-surface jitter
        col = base + rng.uniform(-6, 6, size=(len(p), 3))
        colors.append(np.clip(np.rint(col), 0, 255).astype(np.uint8))
    return ScenePointCloud(positions, np.concatenate(colors), labels)


def scene_layout(spec: SceneSpec) -> SceneLayout:
    """The cuboids :func:`make_scene` places for ``spec`` (placement draws first from the seed)."""
    return SceneLayout(spec, place_objects(spec, np.random.default_rng(spec.rng_seed)))


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> CameraPose:
    """Camera-to-world pose (x right, y down, z forward) looking from ``eye`` at ``target``."""
    eye = np.asarray(eye, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - eye
    z /= np.linalg.norm(z)
    x = np.cross(z, up)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    T = np.eye(4)
    T[:3, 0], T[:3, 1], T[:3, 2], T[:3, 3] = x, y, z, eye
    return CameraPose(T)


def make_trajectory(spec: SceneSpec, n_frames: int, eye_height: float = 1.5,
                    orbit_fraction: float = 0.3) -> list:
    """Poses orbiting the room center at eye height, looking inward and down.

    The look-at height oscillates slowly so both the floor and the upper walls
    come into view.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    sx, sy, sz = spec.room
    cx, cy = sx / 2, sy / 2
    radius = orbit_fraction * min(sx, sy)
    h = min(eye_height, 0.9 * sz)
    poses = []
    for i in range(n_frames):
        t = 2 * math.pi * i / n_frames
        eye = (cx + radius * math.cos(t), cy + radius * math.sin(t), h)
        target = (cx - 0.5 * radius * math.cos(t), cy - 0.5 * radius * math.sin(t),
                  0.45 * h + 0.35 * h * math.sin(2 * t))
        poses.append(look_at(eye, target))
    return poses


def default_intrinsics(width: int = 640, height: int = 480, focal: float = 440.0) -> CameraIntrinsics:
    return CameraIntrinsics(focal, focal, (width - 1) / 2, (height - 1) / 2, width, height)


def render_frames(cloud: ScenePointCloud, poses, K: CameraIntrinsics, ct: ClassTable,
                  splat_radius_px: int = 1, index_step: int = 1) -> list:
    """GT frames (depth, color, label mask) for each pose; frame i gets index ``i * index_step``."""
    frames = []
    for i, pose in enumerate(poses):
        depth, idx = rasterize(cloud, K, pose, splat_radius_px)
        labels = np.where(idx >= 0, cloud.gt_labels[np.maximum(idx, 0)], ct.ignore_id)
        color = render_color(idx, cloud) if cloud.colors is not None else None
        frames.append(FrameRecord(
            i * index_step, K, pose,
            DepthMap(K.width, K.height, depth.ravel()),
            color,
            LabelMask(K.width, K.height, labels.ravel(), ct.ignore_id),
        ))
    return frames


@dataclass
class EmittedDataset:
    root: Path
    scene_path: Path
    frames_dir: Path
    classes_path: Path
    frame_indices: list
    n_points: int
    class_histogram: dict


SCENE_FILE = "scene.ply"
FRAMES_DIR = "frames"
CLASSES_FILE = "classes.txt"


def emit_dataset(
    spec: SceneSpec,
    n_frames: int,
    K: Optional[CameraIntrinsics],
    out_dir: PathLike,
    ct: Optional[ClassTable] = None,
    index_step: int = 50,
    splat_radius_px: int = 1,
) -> EmittedDataset:
    """Write ``scene.ply``, ``classes.txt`` and a ``frames/`` directory of GT renderings.

    Frames are numbered ``0, index_step, 2*index_step, ...`` as if only every
    ``index_step``-th frame of a video had been exported.
    """
    ct = ct or ClassTable.scannet20()
    K = K or default_intrinsics()
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    cloud = make_scene(spec, ct)
    poses = make_trajectory(spec, n_frames)
    frames = render_frames(cloud, poses, K, ct, splat_radius_px, index_step)
    save_scene(cloud, root / SCENE_FILE, ct=ct)
    ct.save(root / CLASSES_FILE)
    for f in frames:
        write_frame(root / FRAMES_DIR, f, ct)
    hist = {ct.names[c]: int(n) for c, n in enumerate(np.bincount(cloud.gt_labels, minlength=ct.m)) if n}
    return EmittedDataset(root, root / SCENE_FILE, root / FRAMES_DIR, root / CLASSES_FILE,
                          [f.frame_index for f in frames], len(cloud), hist)


# ---------------------------------------------------------------------------
# Two-lobe image fixtures for prompt augmentation
# ---------------------------------------------------------------------------

BACKGROUND_RGB = (200, 200, 200)
LOBE_RGB = ((150, 60, 40), (40, 90, 160))


@dataclass
class DumbbellFixture:
    image: np.ndarray  # H x W x 3 uint8
    gt: LabelMask  # instance pixels carry ``class_id``, the rest ``background_id``
    instance: np.ndarray  # H x W bool


def make_dumbbell(
    rng: np.random.Generator,
    size: int = 96,
    class_id: int = 6,
    background_id: int = 0,
    ct: Optional[ClassTable] = None,
) -> DumbbellFixture:
    """Two discs joined by a bar at a random angle; each half in its own color.

    Disc radii are drawn from [7, 11] px, center distance from [36, 52] px,
    bar half-width 2.5 px, on a flat gray background.
    """
    ct = ct or ClassTable.scannet20()
    ang = rng.uniform(0.0, math.pi)
    r1, r2 = rng.uniform(7, 11, size=2)
    dist = rng.uniform(36, 52)
    center = np.array([size / 2, size / 2]) + rng.uniform(-3, 3, size=2)
    d = np.array([math.cos(ang), math.sin(ang)])
    a, b = center - d * dist / 2, center + d * dist / 2
    gv, gu = np.mgrid[0:size, 0:size]
    P = np.stack([gu, gv], axis=-1).astype(np.float64)
    t = ((P - a) @ d) / dist
    perp = np.abs((P - a) @ np.array([-d[1], d[0]]))
    inst = (
        (((P - a) ** 2).sum(-1) <= r1 * r1)
        | (((P - b) ** 2).sum(-1) <= r2 * r2)
        | ((t >= 0) & (t <= 1) & (perp <= 2.5))
    )
    labels = np.where(inst, class_id, background_id)
    image = np.empty((size, size, 3), dtype=np.uint8)
    image[:] = BACKGROUND_RGB
    image[inst & (t < 0.5)] = LOBE_RGB[0]
    image[inst & (t >= 0.5)] = LOBE_RGB[1]
    return DumbbellFixture(image, LabelMask(size, size, labels.ravel(), ct.ignore_id), inst)
