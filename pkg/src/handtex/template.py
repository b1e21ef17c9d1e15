"""Procedural articulated hand template.

A low-poly left hand built from 16 box parts (palm + 5 fingers x 3 segments,
~1.5k triangles) with a fixed UV layout: every box face owns its own island
rectangle inside the unit UV square. The right hand is the mirrored left
hand with identical UV coordinates, so the left/right texel correspondence
is the identity. Posing applies rigid per-segment transforms down the
finger chains (16 joints: wrist root + 15 finger joints).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import HandMesh

N_FINGERS = 5
N_SEGMENTS = 3

# part order is fixed; it defines face ordering and therefore the atlas layout
_PART_NAMES = ["palm"] + [f"f{f}s{s}" for f in range(N_FINGERS) for s in range(N_SEGMENTS)]

_PALM_SIZE = (1.05, 1.0, 0.30)
_FINGER_PIVOT_X = [-0.62, -0.38, -0.13, 0.13, 0.40]
_FINGER_PIVOT_Y = [0.30, 1.0, 1.0, 1.0, 1.0]
_FINGER_MOUNT_Z = [-0.9, 0.12, 0.0, -0.10, -0.22]  # radians about z
_FINGER_SCALE = [0.95, 1.0, 1.08, 1.0, 0.85]
_SEGMENT_LENGTHS = [0.42, 0.30, 0.24]
_SEGMENT_WIDTH = 0.20
_SEGMENT_DEPTH = 0.19
_TAPER = 0.88

_UV_GRID = 10          # islands are packed on a 10x10 cell grid
_UV_MARGIN = 0.010     # inset inside each 0.1-wide cell

# per-face grid subdivisions (nu, nv): front/back large, sides, caps
_FACE_SUBDIV = {"+z": (3, 5), "-z": (3, 5), "+x": (1, 5), "-x": (1, 5),
                "+y": (3, 1), "-y": (3, 1)}
_FACE_ORDER = ["+z", "-z", "+x", "-x", "+y", "-y"]

_AXES = {
    # face -> (in-plane axis a, in-plane axis b, outward normal); a x b = outward
    "+z": (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0])),
    "-z": (np.array([0, 1.0, 0]), np.array([1.0, 0, 0]), np.array([0, 0, -1.0])),
    "+x": (np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), np.array([1.0, 0, 0])),
    "-x": (np.array([0, 0, 1.0]), np.array([0, 1.0, 0]), np.array([-1.0, 0, 0])),
    "+y": (np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])),
    "-y": (np.array([1.0, 0, 0]), np.array([0, 0, 1.0]), np.array([0, -1.0, 0])),
}


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


@dataclass
class HandPose:
    """Joint angles in radians: curl (5 fingers x 3 joints) and per-finger spread."""

    curl: np.ndarray = field(default_factory=lambda: np.zeros((N_FINGERS, N_SEGMENTS)))
    spread: np.ndarray = field(default_factory=lambda: np.zeros(N_FINGERS))

    def __post_init__(self):
        self.curl = np.asarray(self.curl, dtype=np.float64).reshape(N_FINGERS, N_SEGMENTS)
        self.spread = np.asarray(self.spread, dtype=np.float64).reshape(N_FINGERS)

    def to_dict(self) -> dict:
        return {"curl": self.curl.tolist(), "spread": self.spread.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "HandPose":
        return HandPose(curl=np.asarray(d["curl"]), spread=np.asarray(d["spread"]))

    @staticmethod
    def sample(rng: np.random.Generator) -> "HandPose":
        curl = rng.uniform(0.05, 0.75, size=(N_FINGERS, N_SEGMENTS))
        curl[0] *= 0.6  # thumb curls less
        spread = rng.uniform(-0.12, 0.12, size=N_FINGERS)
        return HandPose(curl=curl, spread=spread)


def _island_rect(island_idx: int) -> tuple[float, float, float, float]:
    cell = 1.0 / _UV_GRID
    row, col = divmod(island_idx, _UV_GRID)
    u0 = col * cell + _UV_MARGIN
    v0 = row * cell + _UV_MARGIN
    return u0, v0, cell - 2 * _UV_MARGIN, cell - 2 * _UV_MARGIN


def _box_part(size, island_base):
    """Subdivided box [−sx/2,sx/2]x[0,sy]x[−sz/2,sz/2]; returns verts/faces/uvs/normals."""
    sx, sy, sz = size
    lo = np.array([-sx / 2, 0.0, -sz / 2])
    hi = np.array([sx / 2, sy, sz / 2])
    verts, normals, faces, face_uvs = [], [], [], []
    for fi, name in enumerate(_FACE_ORDER):
        a_dir, b_dir, n_dir = _AXES[name]
        nu, nv = _FACE_SUBDIV[name]
        origin = np.where(n_dir > 0, hi * np.abs(n_dir), lo * np.abs(n_dir))
        origin = origin + np.where(a_dir != 0, lo * np.abs(a_dir), 0)
        origin = origin + np.where(b_dir != 0, lo * np.abs(b_dir), 0)
        a_ext = a_dir * (hi - lo)
        b_ext = b_dir * (hi - lo)
        u0, v0, du, dv = _island_rect(island_base + fi)
        base = len(verts)
        grid_uv = np.empty((nu + 1, nv + 1, 2))
        for i in range(nu + 1):
            for j in range(nv + 1):
                verts.append(origin + a_ext * (i / nu) + b_ext * (j / nv))
                normals.append(n_dir)
                grid_uv[i, j] = (u0 + du * i / nu, v0 + dv * j / nv)
        idx = lambda i, j: base + i * (nv + 1) + j
        for i in range(nu):
            for j in range(nv):
                q = [idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]
                quv = [grid_uv[i, j], grid_uv[i + 1, j], grid_uv[i + 1, j + 1], grid_uv[i, j + 1]]
                faces.append([q[0], q[1], q[2]])
                face_uvs.append([quv[0], quv[1], quv[2]])
                faces.append([q[0], q[2], q[3]])
                face_uvs.append([quv[0], quv[2], quv[3]])
    return (np.asarray(verts), np.asarray(normals),
            np.asarray(faces, dtype=np.int64), np.asarray(face_uvs))


def _build_parts():
    """Rest-pose geometry per part plus the kinematic table."""
    parts = {}
    island = 0
    parts["palm"] = {
        "geom": _box_part(_PALM_SIZE, island),
        "parent": None, "pivot": np.zeros(3), "mount": np.eye(3),
    }
    island += 6
    for f in range(N_FINGERS):
        scale = _FINGER_SCALE[f]
        mount = rot_z(_FINGER_MOUNT_Z[f])
        for s in range(N_SEGMENTS):
            size = (_SEGMENT_WIDTH * scale * _TAPER ** s,
                    _SEGMENT_LENGTHS[s] * scale,
                    _SEGMENT_DEPTH * scale * _TAPER ** s)
            if s == 0:
                parent = "palm"
                pivot = np.array([_FINGER_PIVOT_X[f], _FINGER_PIVOT_Y[f] * _PALM_SIZE[1], 0.0])
            else:
                parent = f"f{f}s{s - 1}"
                pivot = np.array([0.0, _SEGMENT_LENGTHS[s - 1] * scale, 0.0])
            parts[f"f{f}s{s}"] = {
                "geom": _box_part(size, island),
                "parent": parent, "pivot": pivot,
                "mount": mount if s == 0 else np.eye(3),
            }
            island += 6
    return parts


_PARTS = _build_parts()


def template_face_count() -> int:
    return sum(len(_PARTS[p]["geom"][2]) for p in _PART_NAMES)


def build_hand(handedness: str = "left",
               pose: HandPose | None = None,
               rotation: np.ndarray | None = None,
               translation: np.ndarray | None = None) -> HandMesh:
    """Posed hand mesh. The right hand mirrors the left across the x = 0 plane
    (winding flipped to keep outward normals) before the global transform.
    """
    pose = pose or HandPose()
    rotation = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
    translation = np.zeros(3) if translation is None else np.asarray(translation, dtype=np.float64)

    transforms = {"palm": (np.eye(3), np.zeros(3))}
    for f in range(N_FINGERS):
        for s in range(N_SEGMENTS):
            name = f"f{f}s{s}"
            part = _PARTS[name]
            pr, pt = transforms[part["parent"]]
            local = part["mount"] @ rot_z(pose.spread[f] if s == 0 else 0.0) @ rot_x(-pose.curl[f, s])
            transforms[name] = (pr @ local, pr @ part["pivot"] + pt)

    all_v, all_n, all_f, all_uv = [], [], [], []
    offset = 0
    for name in _PART_NAMES:
        v, n, fc, fuv = _PARTS[name]["geom"]
        r, t = transforms[name]
        all_v.append(v @ r.T + t)
        all_n.append(n @ r.T)
        all_f.append(fc + offset)
        all_uv.append(fuv)
        offset += len(v)
    verts = np.concatenate(all_v)
    normals = np.concatenate(all_n)
    faces = np.concatenate(all_f)
    face_uvs = np.concatenate(all_uv)

    if handedness == "right":
        verts = verts * np.array([-1.0, 1.0, 1.0])
        normals = normals * np.array([-1.0, 1.0, 1.0])
        faces = faces[:, ::-1]          # restore outward winding after mirror
        face_uvs = face_uvs[:, ::-1]
    elif handedness != "left":
        raise ValueError(f"handedness must be left|right, got {handedness!r}")

    verts = verts @ rotation.T + translation
    normals = normals @ rotation.T
    return HandMesh(vertices=verts, faces=faces, face_uvs=face_uvs,
                    normals=normals, handedness=handedness)


def rest_template() -> HandMesh:
    """Rest-pose left hand; its UV layout defines the shipped atlas."""
    return build_hand("left")
