"""Scene and frame data model plus on-disk formats.

Layout of a frame directory (mirrors a ScanNet per-frame export)::

    <dir>/intrinsics.txt        fx fy cx cy width height, one ``key value`` per line
    <dir>/depth/<i>.pgm         16-bit PGM, millimeters, 0 = invalid
    <dir>/pose/<i>.txt          4x4 camera-to-world, row-major
    <dir>/color/<i>.ppm         optional 8-bit RGB
    <dir>/label/<i>.pgm         optional 8-bit label mask, 255 = ignore
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

PathLike = Union[str, os.PathLike]

# Ignore label as stored in 8-bit masks and PLY label properties.
FILE_IGNORE = 255

SCANNET20 = (
    "wall", "floor", "cabinet", "bed", "chair", "sofa", "table", "door",
    "window", "bookshelf", "picture", "counter", "desk", "curtain",
    "refrigerator", "shower curtain", "toilet", "sink", "bathtub",
    "otherfurniture",
)


class FormatError(ValueError):
    """A file on disk does not match the expected format or invariants."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassTable:
    names: tuple

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if not names:
            raise ValueError("class table is empty")
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")
        if len(names) >= FILE_IGNORE:
            raise ValueError(f"at most {FILE_IGNORE - 1} classes fit an 8-bit mask")

    @property
    def m(self) -> int:
        return len(self.names)

    @property
    def ignore_id(self) -> int:
        # one past the last class
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @classmethod
    def scannet20(cls) -> "ClassTable":
        return cls(SCANNET20)

    @classmethod
    def load(cls, path: PathLike) -> "ClassTable":
        lines = Path(path).read_text().splitlines()
        return cls(tuple(ln.strip() for ln in lines if ln.strip()))

    def save(self, path: PathLike) -> None:
        Path(path).write_text("".join(n + "\n" for n in self.names))

    def decode_file_labels(self, raw: np.ndarray) -> np.ndarray:
        """Map on-disk label values (255 = ignore) to internal ids (m = ignore)."""
        raw = np.asarray(raw).astype(np.int64)
        bad = (raw != FILE_IGNORE) & ((raw < 0) | (raw >= self.m))
        if bad.any():
            raise FormatError(f"label out of range: {int(raw[bad][0])} (m={self.m})")
        return np.where(raw == FILE_IGNORE, self.ignore_id, raw).astype(np.int32)

    def encode_file_labels(self, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels).astype(np.int64)
        if ((labels < 0) | (labels > self.m)).any():
            raise ValueError("label out of range")
        return np.where(labels == self.ignore_id, FILE_IGNORE, labels).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ScenePointCloud:
    positions: np.ndarray
    colors: Optional[np.ndarray] = None
    gt_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) < 1:
            raise ValueError("positions must be an N x 3 array with N >= 1")
        if not np.isfinite(pos).all():
            raise ValueError("positions must be finite")
        object.__setattr__(self, "positions", pos)
        if self.colors is not None:
            col = np.ascontiguousarray(self.colors, dtype=np.uint8)
            if col.shape != pos.shape:
                raise ValueError("colors must be N x 3")
            object.__setattr__(self, "colors", col)
        if self.gt_labels is not None:
            lab = np.ascontiguousarray(self.gt_labels, dtype=np.int32)
            if lab.shape != (len(pos),):
                raise ValueError("gt_labels must have length N")
            if (lab < 0).any():
                raise ValueError("negative label")
            object.__setattr__(self, "gt_labels", lab)

    def __len__(self) -> int:
        return len(self.positions)

    def check_labels(self, ct: ClassTable) -> None:
        if self.gt_labels is not None and (self.gt_labels > ct.ignore_id).any():
            raise ValueError("label out of range")


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class CameraPose:
    """Camera-to-world rigid transform."""

    matrix: np.ndarray
    tol: float = field(default=1e-5, repr=False)

    def __post_init__(self):
        T = np.array(self.matrix, dtype=np.float64)
        if T.shape != (4, 4) or not np.isfinite(T).all():
            raise ValueError("pose not rigid: expected a finite 4x4 matrix")
        if not np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0]):
            raise ValueError("pose not rigid: bottom row must be 0 0 0 1")
        R = T[:3, :3]
        if np.abs(R.T @ R - np.eye(3)).max() > self.tol or abs(np.linalg.det(R) - 1.0) > self.tol:
            raise ValueError("pose not rigid")
        T.setflags(write=False)
        object.__setattr__(self, "matrix", T)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def inverse_matrix(self) -> np.ndarray:
        R, t = self.rotation, self.translation
        inv = np.eye(4)
        inv[:3, :3] = R.T
        inv[:3, 3] = -R.T @ t
        return inv

    def __eq__(self, other):
        return isinstance(other, CameraPose) and np.array_equal(self.matrix, other.matrix)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(4))


def _image_array(values, width, height, dtype, what):
    arr = np.asarray(values)
    if arr.size != width * height:
        raise ValueError(f"{what}: expected {width * height} values, got {arr.size}")
    arr = np.array(arr.reshape(height, width), dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Row-major depths in millimeters; 0 marks an invalid pixel."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.size and (v.min() < 0 or v.max() > 65535):
            raise ValueError("depth values must fit in 16 bits")
        object.__setattr__(self, "values", _image_array(v, self.width, self.height, np.uint16, "depth"))

    def __eq__(self, other):
        return isinstance(other, DepthMap) and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class LabelMask:
    """Row-major class ids using the internal ignore id (m)."""

    width: int
    height: int
    values: np.ndarray
    ignore_id: int

    def __post_init__(self):
        v = _image_array(self.values, self.width, self.height, np.int32, "mask")
        if v.size and (v.min() < 0 or v.max() > self.ignore_id):
            raise ValueError("mask value out of range")
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        return (
            isinstance(other, LabelMask)
            and self.ignore_id == other.ignore_id
            and np.array_equal(self.values, other.values)
        )

    @classmethod
    def full(cls, width, height, value, ignore_id) -> "LabelMask":
        return cls(width, height, np.full(width * height, value), ignore_id)

    def present_classes(self) -> list:
        return [int(c) for c in np.unique(self.values) if c != self.ignore_id]


@dataclass(frozen=True, eq=False)
class FrameRecord:
    frame_index: int
    intrinsics: CameraIntrinsics
    pose: CameraPose
    depth: DepthMap
    color: Optional[np.ndarray] = None
    mask: Optional[LabelMask] = None

    def __post_init__(self):
        K = self.intrinsics
        if (self.depth.width, self.depth.height) != (K.width, K.height):
            raise ValueError("dimension mismatch: depth vs intrinsics")
        if self.color is not None:
            col = np.array(self.color, dtype=np.uint8)
            if col.shape != (K.height, K.width, 3):
                raise ValueError("dimension mismatch: color vs depth")
            col.setflags(write=False)
            object.__setattr__(self, "color", col)
        if self.mask is not None and (self.mask.width, self.mask.height) != (K.width, K.height):
            raise ValueError("dimension mismatch: mask vs depth")

    def __eq__(self, other):
        if not isinstance(other, FrameRecord):
            return NotImplemented
        same_color = (self.color is None and other.color is None) or (
            self.color is not None and other.color is not None
            and np.array_equal(self.color, other.color)
        )
        return (
            self.frame_index == other.frame_index
            and self.intrinsics == other.intrinsics
            and self.pose == other.pose
            and self.depth == other.depth
            and same_color
            and self.mask == other.mask
        )


def select_frames(total: int, stride: int) -> list:
    """Frame indices ``0, stride, 2*stride, ...`` below ``total``."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return list(range(0, max(total, 0), stride))


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}
LABEL_PROPERTY_NAMES = ("label", "semantic_label")


def _parse_ply_header(fh):
    first = fh.readline()
    if first.strip() != b"ply":
        raise FormatError("malformed header: missing 'ply' magic")
    fmt = None
    elements = []  # (name, count, [(prop, dtype)])
    while True:
        line = fh.readline()
        if not line:
            raise FormatError("malformed header: missing end_header")
        tok = line.decode("ascii", errors="replace").split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "end_header":
            break
        if tok[0] == "format":
            if len(tok) != 3 or tok[1] not in ("ascii", "binary_little_endian", "binary_big_endian"):
                raise FormatError(f"malformed header: bad format line {line!r}")
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise FormatError(f"malformed header: bad element line {line!r}")
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise FormatError("malformed header: property before element")
            if tok[1] == "list":
                if len(tok) != 5 or tok[2] not in _PLY_TYPES or tok[3] not in _PLY_TYPES:
                    raise FormatError(f"unknown property type in {line!r}")
                elements[-1][2].append((tok[4], ("list", _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]])))
            else:
                if len(tok) != 3:
                    raise FormatError(f"malformed header: bad property line {line!r}")
                if tok[1] not in _PLY_TYPES:
                    raise FormatError(f"unknown property type {tok[1]!r}")
                elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
        else:
            raise FormatError(f"malformed header: unexpected keyword {tok[0]!r}")
    if fmt is None:
        raise FormatError("malformed header: missing format line")
    return fmt, elements


def _read_vertices(fh, fmt, elements):
    vertex = None
    for name, count, props in elements:
        if name == "vertex":
            vertex = (count, props)
            break
        # only fixed-size elements may precede the vertex block in binary files
        if fmt != "ascii" and any(isinstance(t, tuple) for _, t in props):
            raise FormatError("list element before vertex element is not supported")
        if fmt == "ascii":
            for _ in range(count):
                fh.readline()
        else:
            fh.seek(count * np.dtype([(p, t) for p, t in props]).itemsize, 1)
    if vertex is None:
        raise FormatError("malformed header: no vertex element")
    count, props = vertex
    if any(isinstance(t, tuple) for _, t in props):
        raise FormatError("list properties on vertices are not supported")
    names = [p for p, _ in props]
    for req in "xyz":
        if req not in names:
            raise FormatError(f"malformed header: vertex lacks '{req}'")
    if fmt == "ascii":
        dtype = np.dtype([(p, t) for p, t in props])
        rows = []
        for _ in range(count):
            line = fh.readline()
            tok = line.split()
            if len(tok) != len(props):
                raise FormatError("truncated or malformed ascii vertex data")
            rows.append(tuple(tok))
        data = np.empty(count, dtype=dtype)
        for i, (p, t) in enumerate(props):
            col = [r[i] for r in rows]
            try:
                data[p] = np.array(col, dtype=np.float64 if t.startswith("f") else np.int64)
            except ValueError as exc:
                raise FormatError(f"bad ascii value for {p}: {exc}") from None
        return data
    endian = "<" if fmt == "binary_little_endian" else ">"
    dtype = np.dtype([(p, endian + t) for p, t in props])
    buf = fh.read(count * dtype.itemsize)
    if len(buf) != count * dtype.itemsize:
        raise FormatError("truncated binary vertex data")
    return np.frombuffer(buf, dtype=dtype)


def load_scene(path: PathLike, ct: Optional[ClassTable] = None) -> ScenePointCloud:
    """Read a PLY point cloud (ascii or binary) with optional colors and labels.

    Label values are validated against ``ct`` (default: ScanNet-20); 255 is ignore.
    """
    ct = ct or ClassTable.scannet20()
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        data = _read_vertices(fh, fmt, elements)
    if len(data) < 1:
        raise FormatError("point cloud has no vertices")
    names = data.dtype.names
    pos = np.stack([data["x"], data["y"], data["z"]], axis=1).astype(np.float64)
    if not np.isfinite(pos).all():
        raise FormatError("non-finite coordinates")
    colors = None
    if all(c in names for c in ("red", "green", "blue")):
        colors = np.stack([data["red"], data["green"], data["blue"]], axis=1)
        if colors.min() < 0 or colors.max() > 255:
            raise FormatError("color out of 8-bit range")
    labels = None
    for lname in LABEL_PROPERTY_NAMES:
        if lname in names:
            raw = data[lname]
            if raw.dtype.kind == "f":
                if not np.array_equal(raw, np.round(raw)):
                    raise FormatError("non-integral label values")
            labels = ct.decode_file_labels(raw)
            break
    return ScenePointCloud(pos, colors, labels)


def save_scene(
    cloud: ScenePointCloud,
    path: PathLike,
    labels: Optional[np.ndarray] = None,
    ct: Optional[ClassTable] = None,
    ascii: bool = False,
) -> None:
    """Write ``cloud`` as PLY; ``labels`` (or the cloud's gt labels) go in a uchar ``label`` property."""
    ct = ct or ClassTable.scannet20()
    n = len(cloud)
    if labels is None:
        labels = cloud.gt_labels
    fields = [("x", "f8"), ("y", "f8"), ("z", "f8")]
    if cloud.colors is not None:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ValueError("labels must have length N")
        fields.append(("label", "u1"))
    ply_names = {"f8": "double", "u1": "uchar"}
    header = ["ply", "format ascii 1.0" if ascii else "format binary_little_endian 1.0",
              f"element vertex {n}"]
    header += [f"property {ply_names[t]} {p}" for p, t in fields]
    header.append("end_header")
    data = np.empty(n, dtype=[(p, "<" + t) for p, t in fields])
    data["x"], data["y"], data["z"] = cloud.positions.T
    if cloud.colors is not None:
        data["red"], data["green"], data["blue"] = cloud.colors.T
    if labels is not None:
        data["label"] = ct.encode_file_labels(labels)
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if ascii:
            for row in data:
                fh.write((" ".join(repr(float(v)) if t == "f8" else str(int(v))
                                   for v, (_, t) in zip(row, fields)) + "\n").encode("ascii"))
        else:
            fh.write(data.tobytes())


# ---------------------------------------------------------------------------
# Netpbm (PGM / PPM)
# ---------------------------------------------------------------------------

_PNM_TOKEN = re.compile(rb"(#[^\n]*\n?)|(\S+)")


def read_pnm(path: PathLike) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6). 16-bit samples are big-endian."""
    raw = Path(path).read_bytes()
    pos = 0
    tokens = []
    while len(tokens) < 4:
        # header: magic, width, height, maxval, then one whitespace byte
        mt = _PNM_TOKEN.search(raw, pos)
        if mt is None:
            raise FormatError(f"{path}: truncated netpbm header")
        pos = mt.end()
        if mt.group(2) is not None:
            tokens.append(mt.group(2))
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported netpbm magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed netpbm header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: invalid netpbm dimensions or maxval")
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing separator after header")
    pos += 1
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    nbytes = width * height * channels * dtype.itemsize
    body = raw[pos:pos + nbytes]
    if len(body) != nbytes:
        raise FormatError(f"{path}: truncated pixel data")
    arr = np.frombuffer(body, dtype=dtype)
    if arr.size and arr.max() > maxval:
        raise FormatError(f"{path}: sample exceeds maxval")
    shape = (height, width, 3) if channels == 3 else (height, width)
    return arr.reshape(shape).astype(np.uint16 if maxval > 255 else np.uint8)


def write_pnm(path: PathLike, image: np.ndarray, maxval: Optional[int] = None) -> None:
    image = np.asarray(image)
    if image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    elif image.ndim == 2:
        magic = b"P5"
    else:
        raise ValueError("expected an H x W or H x W x 3 image")
    if maxval is None:
        maxval = 65535 if image.dtype == np.uint16 else 255
    h, w = image.shape[:2]
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n%d\n" % (magic, w, h, maxval))
        fh.write(np.ascontiguousarray(image, dtype=dtype).tobytes())


# ---------------------------------------------------------------------------
# Frame directory layout
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_intrinsics(path: PathLike, K: CameraIntrinsics) -> None:
    Path(path).write_text(
        f"fx {_fmt(K.fx)}\nfy {_fmt(K.fy)}\ncx {_fmt(K.cx)}\ncy {_fmt(K.cy)}\n"
        f"width {K.width}\nheight {K.height}\n"
    )


def read_intrinsics(path: PathLike) -> CameraIntrinsics:
    vals = {}
    for line in Path(path).read_text().splitlines():
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if len(tok) != 2:
            raise FormatError(f"{path}: expected 'key value', got {line!r}")
        vals[tok[0]] = tok[1]
    try:
        return CameraIntrinsics(
            float(vals["fx"]), float(vals["fy"]), float(vals["cx"]), float(vals["cy"]),
            int(vals["width"]), int(vals["height"]),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing intrinsics key {exc}") from None
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_pose(path: PathLike, pose: CameraPose) -> None:
    Path(path).write_text(
        "".join(" ".join(_fmt(v) for v in row) + "\n" for row in pose.matrix)
    )


def read_pose(path: PathLike) -> CameraPose:
    try:
        M = np.array([float(t) for t in Path(path).read_text().split()])
    except ValueError:
        raise FormatError(f"{path}: non-numeric pose entry") from None
    if M.size != 16:
        raise FormatError(f"{path}: pose must have 16 entries, got {M.size}")
    try:
        return CameraPose(M.reshape(4, 4))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def frame_paths(root: PathLike, index: int) -> dict:
    root = Path(root)
    return {
        "intrinsics": root / "intrinsics.txt",
        "depth": root / "depth" / f"{index}.pgm",
        "pose": root / "pose" / f"{index}.txt",
        "color": root / "color" / f"{index}.ppm",
        "label": root / "label" / f"{index}.pgm",
    }


def read_label_pgm(path: PathLike, ct: ClassTable) -> LabelMask:
    img = read_pnm(path)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise FormatError(f"{path}: label mask must be an 8-bit PGM")
    h, w = img.shape
    return LabelMask(w, h, ct.decode_file_labels(img.ravel()), ct.ignore_id)


def write_label_pgm(path: PathLike, mask: LabelMask, ct: ClassTable) -> None:
    if mask.ignore_id != ct.ignore_id:
        raise ValueError("mask and class table disagree on the ignore id")
    write_pnm(path, ct.encode_file_labels(mask.values))


def load_frame(root: PathLike, index: int, ct: Optional[ClassTable] = None) -> FrameRecord:
    ct = ct or ClassTable.scannet20()
    p = frame_paths(root, index)
    for key in ("intrinsics", "depth", "pose"):
        if not p[key].is_file():
            raise FileNotFoundError(f"missing {key} file for frame {index}: {p[key]}")
    K = read_intrinsics(p["intrinsics"])
    pose = read_pose(p["pose"])
    d = read_pnm(p["depth"])
    if d.ndim != 2 or d.dtype != np.uint16:
        raise FormatError(f"{p['depth']}: depth must be a 16-bit PGM")
    if d.shape != (K.height, K.width):
        raise FormatError(f"dimension mismatch: depth {d.shape[::-1]} vs intrinsics {(K.width, K.height)}")
    depth = DepthMap(K.width, K.height, d.ravel())
    color = None
    if p["color"].is_file():
        color = read_pnm(p["color"])
        if color.ndim != 3 or color.dtype != np.uint8:
            raise FormatError(f"{p['color']}: color must be an 8-bit PPM")
        if color.shape[:2] != d.shape:
            raise FormatError("dimension mismatch: color vs depth")
    mask = None
    if p["label"].is_file():
        mask = read_label_pgm(p["label"], ct)
        if (mask.height, mask.width) != d.shape:
            raise FormatError("dimension mismatch: mask vs depth")
    return FrameRecord(index, K, pose, depth, color, mask)


def write_frame(root: PathLike, frame: FrameRecord, ct: Optional[ClassTable] = None) -> None:
    """Write a frame in the layout read by :func:`load_frame`.

    The intrinsics file is shared by all frames of a directory and is overwritten.
    """
    ct = ct or ClassTable.scannet20()
    p = frame_paths(root, frame.frame_index)
    for key in ("depth", "pose"):
        p[key].parent.mkdir(parents=True, exist_ok=True)
    write_intrinsics(p["intrinsics"], frame.intrinsics)
    write_pnm(p["depth"], frame.depth.values.astype(np.uint16), maxval=65535)
    write_pose(p["pose"], frame.pose)
    if frame.color is not None:
        p["color"].parent.mkdir(parents=True, exist_ok=True)
        write_pnm(p["color"], frame.color)
    if frame.mask is not None:
        p["label"].parent.mkdir(parents=True, exist_ok=True)
        write_label_pgm(p["label"], frame.mask, ct)


def list_frame_indices(root: PathLike) -> list:
    depth_dir = Path(root) / "depth"
    if not depth_dir.is_dir():
        return []
    out = []
    for f in depth_dir.glob("*.pgm"):
        if f.stem.isdigit():
            out.append(int(f.stem))
    return sorted(out)


def load_frames(root: PathLike, indices: Optional[Sequence[int]] = None,
                ct: Optional[ClassTable] = None) -> list:
    """Frames in the order of ``indices`` (default: every frame on disk, ascending)."""
    if indices is None:
        indices = list_frame_indices(root)
    return [load_frame(root, i, ct) for i in indices]
