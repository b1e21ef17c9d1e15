"""Mesh and camera primitives plus the OBJ / JSON wire formats for scenes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import check_array, check_finite, check_rotation


@dataclass
class HandMesh:
    """Triangle mesh of one hand with per-corner UVs and per-vertex normals.

    vertices: (V, 3) world positions, faces: (F, 3) int indices,
    face_uvs: (F, 3, 2) per-corner UV in [0,1]^2, normals: (V, 3) unit,
    handedness: "left" or "right".
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_uvs: np.ndarray
    normals: np.ndarray
    handedness: str

    def __post_init__(self):
        self.vertices = check_array(self.vertices, "vertices", shape=(None, 3))
        self.faces = np.asarray(self.faces, dtype=np.int64)
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces: expected (F, 3) triangle indices")
        self.face_uvs = check_array(self.face_uvs, "face_uvs", shape=(None, 3, 2))
        self.normals = check_array(self.normals, "normals", shape=(None, 3))
        self.validate()

    def validate(self):
        if self.handedness not in ("left", "right"):
            raise ValueError(f"handedness must be left|right, got {self.handedness!r}")
        if len(self.vertices) == 0 or len(self.faces) == 0:
            raise ValueError(f"empty mesh: {self.handedness}")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise ValueError("face indices out of range")
        if self.face_uvs.shape[0] != self.faces.shape[0]:
            raise ValueError("face_uvs count must match faces")
        if self.normals.shape != self.vertices.shape:
            raise ValueError("normals must be per-vertex")
        check_finite(self.vertices, "vertices")
        norms = np.linalg.norm(self.normals, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError("vertex normals must be unit length within 1e-6")

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "HandMesh":
        """Rigidly transformed copy (normals rotate with the geometry)."""
        r = check_rotation(rotation)
        t = check_array(translation, "translation", shape=(3,))
        return HandMesh(
            vertices=self.vertices @ r.T + t,
            faces=self.faces.copy(),
            face_uvs=self.face_uvs.copy(),
            normals=self.normals @ r.T,
            handedness=self.handedness,
        )


@dataclass
class Camera:
    """Pinhole camera: world point x maps to R x + t in camera space,
    then (fx X/Z + cx, fy Y/Z + cy) in pixels. +z looks into the scene.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        self.rotation = check_rotation(self.rotation, "camera rotation")
        self.translation = check_array(self.translation, "camera translation", shape=(3,))

    @property
    def origin(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def scaled(self, size: int) -> "Camera":
        """Camera for the same view rendered at ``size`` x ``size`` pixels."""
        s = size / self.width
        sy = size / self.height
        return Camera(
            fx=self.fx * s, fy=self.fy * sy,
            cx=self.cx * s, cy=self.cy * sy,
            width=size, height=size,
            rotation=self.rotation.copy(), translation=self.translation.copy(),
        )

    @staticmethod
    def look_at(origin, target, up=(0.0, -1.0, 0.0), fov_deg=45.0, size=256) -> "Camera":
        """Camera placed at ``origin`` looking at ``target``.

        ``up`` defaults to -y so that +y in world space maps upward in the
        image (image rows grow downward).
        """
        origin = np.asarray(origin, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        fwd = target - origin
        fwd = fwd / np.linalg.norm(fwd)
        upv = np.asarray(up, dtype=np.float64)
        right = np.cross(upv, fwd)
        rn = np.linalg.norm(right)
        if rn < 1e-9:
            upv = np.array([0.0, 0.0, 1.0])
            right = np.cross(upv, fwd)
            rn = np.linalg.norm(right)
        right = right / rn
        down = np.cross(fwd, right)
        rot = np.stack([right, down, fwd], axis=0)
        trans = -rot @ origin
        focal = 0.5 * size / np.tan(np.radians(fov_deg) / 2)
        return Camera(fx=focal, fy=focal, cx=size / 2, cy=size / 2,
                      width=size, height=size, rotation=rot, translation=trans)

    def to_dict(self) -> dict:
        return {
            "focal": [self.fx, self.fy],
            "principal": [self.cx, self.cy],
            "width": self.width,
            "height": self.height,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "Camera":
        try:
            return Camera(
                fx=float(d["focal"][0]), fy=float(d["focal"][1]),
                cx=float(d["principal"][0]), cy=float(d["principal"][1]),
                width=int(d["width"]), height=int(d["height"]),
                rotation=np.asarray(d["rotation"], dtype=np.float64),
                translation=np.asarray(d["translation"], dtype=np.float64),
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise ValueError(f"invalid camera description: {exc}") from exc


def save_camera(camera: Camera, path) -> None:
    Path(path).write_text(json.dumps(camera.to_dict(), indent=2))


def load_camera(path) -> Camera:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing camera file: {path}")
    return Camera.from_dict(json.loads(path.read_text()))


def compute_vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted per-vertex normals, unit length."""
    tri = vertices[faces]
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    normals = np.zeros_like(vertices)
    for c in range(3):
        np.add.at(normals, faces[:, c], fn)
    lens = np.linalg.norm(normals, axis=1, keepdims=True)
    lens[lens < 1e-12] = 1.0
    return normals / lens


def save_obj(mesh: HandMesh, path) -> None:
    """Write a mesh as OBJ with per-corner `vt` records and per-vertex `vn`."""
    lines = [f"# handtex mesh ({mesh.handedness})"]
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for n in mesh.normals:
        lines.append(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
    for fuv in mesh.face_uvs.reshape(-1, 2):
        lines.append(f"vt {fuv[0]:.9g} {fuv[1]:.9g}")
    for fi, f in enumerate(mesh.faces):
        corners = [f"{f[c] + 1}/{3 * fi + c + 1}/{f[c] + 1}" for c in range(3)]
        lines.append("f " + " ".join(corners))
    Path(path).write_text("\n".join(lines) + "\n")


def load_obj(path, handedness: str) -> HandMesh:
    """Parse the OBJ subset written by :func:`save_obj` (v / vn / vt / f v/vt/vn)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing mesh: {handedness}")
    verts, norms, uvs, faces, corner_uv = [], [], [], [], []
    for raw in path.read_text().splitlines():
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        if tag == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif tag == "vn":
            norms.append([float(x) for x in parts[1:4]])
        elif tag == "vt":
            uvs.append([float(x) for x in parts[1:3]])
        elif tag == "f":
            if len(parts) != 4:
                raise ValueError(f"{path}: only triangle faces are supported")
            vi, ti = [], []
            for corner in parts[1:]:
                fields = corner.split("/")
                vi.append(int(fields[0]) - 1)
                if len(fields) < 2 or fields[1] == "":
                    raise ValueError(f"{path}: faces must carry vt UV references")
                ti.append(int(fields[1]) - 1)
            faces.append(vi)
            corner_uv.append(ti)
    if not verts or not faces:
        raise ValueError(f"empty mesh: {handedness} ({path})")
    verts = np.asarray(verts, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    uvs = np.asarray(uvs, dtype=np.float64)
    face_uvs = uvs[np.asarray(corner_uv, dtype=np.int64)]
    if norms:
        normals = np.asarray(norms, dtype=np.float64)
        if normals.shape != verts.shape:
            normals = compute_vertex_normals(verts, faces)
    else:
        normals = compute_vertex_normals(verts, faces)
    return HandMesh(vertices=verts, faces=faces, face_uvs=face_uvs,
                    normals=normals, handedness=handedness)
