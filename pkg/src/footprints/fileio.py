"""Raster, scene, and dataset-manifest persistence.

Float rasters are grayscale PFM: header "Pf", little-endian payload
(scale field -1.0), rows stored bottom-to-top per the format. Binary
masks are PGM P5 with maxval 255 and the value mapping 0 <-> 0,
1 <-> 255. Scenes and manifests are JSON with sorted keys so identical
inputs produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Intrinsics, Pose
from .rasters import as_binary_mask
from .scene import Obstacle, Scene


def write_pfm(path, values: np.ndarray) -> None:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"PFM rasters are 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("PFM rasters must be finite")
    height, width = arr.shape
    payload = np.flipud(arr).astype("<f4").tobytes()
    with open(path, "wb") as handle:
        handle.write(f"Pf\n{width} {height}\n-1.0\n".encode("ascii"))
        handle.write(payload)


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as handle:
        magic = handle.readline().strip()
        if magic == b"PF":
            raise ValueError(f"{path}: color PFM is not supported, expected grayscale 'Pf'")
        if magic != b"Pf":
            raise ValueError(f"{path}: not a PFM file (magic {magic!r})")
        dims = handle.readline().split()
        if len(dims) != 2:
            raise ValueError(f"{path}: malformed PFM dimensions line")
        width, height = int(dims[0]), int(dims[1])
        if width <= 0 or height <= 0:
            raise ValueError(f"{path}: invalid PFM dimensions {width}x{height}")
        scale = float(handle.readline().strip())
        if scale > 0:
            raise ValueError(f"{path}: big-endian PFM (positive scale) is not supported")
        payload = handle.read(width * height * 4)
    if len(payload) != width * height * 4:
        raise ValueError(f"{path}: truncated PFM payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    return np.flipud(data).astype(np.float64)


def write_pgm(path, mask: np.ndarray) -> None:
    arr = as_binary_mask(mask)
    height, width = arr.shape
    with open(path, "wb") as handle:
        handle.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        handle.write((arr * np.uint8(255)).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as handle:
        data = handle.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: malformed PGM header")
        tokens.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval != 255:
        raise ValueError(f"{path}: PGM maxval must be 255, got {maxval}")
    payload = data[pos:pos + width * height]
    if len(payload) != width * height:
        raise ValueError(f"{path}: truncated PGM payload")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    bad = ~np.isin(arr, (0, 255))
    if bad.any():
        raise ValueError(f"{path}: non-binary PGM value {arr[bad].flat[0]}")
    return (arr == 255).astype(np.uint8)


# -- JSON descriptions -------------------------------------------------------

def intrinsics_to_dict(intrinsics: Intrinsics) -> dict:
    return {"fx": intrinsics.fx, "fy": intrinsics.fy,
            "cx": intrinsics.cx, "cy": intrinsics.cy,
            "width": intrinsics.width, "height": intrinsics.height}


def intrinsics_from_dict(data: dict) -> Intrinsics:
    return Intrinsics(fx=float(data["fx"]), fy=float(data["fy"]),
                      cx=float(data["cx"]), cy=float(data["cy"]),
                      width=int(data["width"]), height=int(data["height"]))


def pose_to_list(pose: Pose) -> list[float]:
    """4x4 camera-to-world matrix, row-major."""
    return [float(x) for x in pose.matrix().reshape(-1)]


def pose_from_list(values) -> Pose:
    mat = np.asarray(values, dtype=np.float64)
    if mat.size != 16:
        raise ValueError(f"pose must be 16 row-major values, got {mat.size}")
    return Pose.from_matrix(mat.reshape(4, 4))


def scene_to_dict(scene: Scene) -> dict:
    return {
        "ground_x": list(scene.ground_x),
        "ground_z": list(scene.ground_z),
        "obstacles": [{"center": obstacle.center.tolist(),
                       "half_extents": obstacle.half_extents.tolist(),
                       "velocity": obstacle.velocity.tolist()}
                      for obstacle in scene.obstacles],
    }


def scene_from_dict(data: dict) -> Scene:
    obstacles = tuple(Obstacle(np.asarray(item["center"], dtype=np.float64),
                               np.asarray(item["half_extents"], dtype=np.float64),
                               np.asarray(item.get("velocity", (0.0, 0.0, 0.0)),
                                          dtype=np.float64))
                      for item in data.get("obstacles", ()))
    return Scene(tuple(data["ground_x"]), tuple(data["ground_z"]), obstacles)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2, sort_keys=True) + "\n")


def load_scene(path) -> Scene:
    return scene_from_dict(json.loads(Path(path).read_text()))


# -- dataset manifests --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FrameRecord:
    """One frame's camera and raster file paths (relative to the manifest)."""

    frame_id: int
    intrinsics: Intrinsics
    pose: Pose
    paths: dict[str, str]


@dataclass(eq=False)
class DatasetManifest:
    """One scene's worth of rendered frames plus generation parameters."""

    scene: Scene
    seed: int
    params: dict
    frames: list[FrameRecord]
    root: Path | None = field(default=None, compare=False)

    def frame_path(self, frame: FrameRecord, key: str) -> Path:
        if self.root is None:
            raise ValueError("manifest has no root directory; load it from disk first")
        return self.root / frame.paths[key]


def save_manifest(manifest: DatasetManifest, path) -> None:
    payload = {
        "seed": manifest.seed,
        "scene": scene_to_dict(manifest.scene),
        "params": manifest.params,
        "frames": [{"id": frame.frame_id,
                    "intrinsics": intrinsics_to_dict(frame.intrinsics),
                    "pose": pose_to_list(frame.pose),
                    "paths": dict(sorted(frame.paths.items()))}
                   for frame in manifest.frames],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    data = json.loads(path.read_text())
    frames = []
    seen_ids = set()
    for item in data["frames"]:
        frame = FrameRecord(frame_id=int(item["id"]),
                            intrinsics=intrinsics_from_dict(item["intrinsics"]),
                            pose=pose_from_list(item["pose"]),
                            paths=dict(item["paths"]))
        if frame.frame_id in seen_ids:
            raise ValueError(f"{path}: duplicate frame id {frame.frame_id}")
        seen_ids.add(frame.frame_id)
        for key, rel in frame.paths.items():
            target = path.parent / rel
            if not target.is_file():
                raise FileNotFoundError(f"{path}: frame {frame.frame_id} {key} missing: {target}")
        frames.append(frame)
    return DatasetManifest(scene=scene_from_dict(data["scene"]),
                           seed=int(data["seed"]),
                           params=dict(data["params"]),
                           frames=frames,
                           root=path.parent)
