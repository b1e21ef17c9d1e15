"""UV texture template: texel bookkeeping shared by both hands.

The atlas fixes the mapping between flat texture vectors (RGB triplets over
the P valid texels, slot-major) and 2-D UV images, plus the left/right texel
correspondence used by the symmetry machinery. Texels are enumerated in
row-major order over the UV image; texel (r, c) covers the UV rectangle
[c/R, (c+1)/R) x [r/R, (r+1)/R) with R = resolution, u along columns and
v along rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import torch

from .container import load_arrays, save_arrays

TEMPLATE_VERSION = "1"


class AtlasError(ValueError):
    pass


@dataclass
class UVAtlas:
    resolution: int
    valid_mask: np.ndarray        # (R, R) bool
    texel_of_index: np.ndarray    # (P, 2) int32 rows/cols, row-major order
    index_of_texel: np.ndarray    # (R, R) int32, -1 where invalid
    face_uvs: np.ndarray          # (F, 3, 2) template per-corner UVs
    sym_map: np.ndarray           # (P,) permutation pairing left/right slots

    @property
    def n_texels(self) -> int:
        return int(self.texel_of_index.shape[0])

    @property
    def vector_length(self) -> int:
        return 3 * self.n_texels

    @cached_property
    def _torch_index_of_texel(self) -> torch.Tensor:
        return torch.from_numpy(self.index_of_texel.astype(np.int64))

    @cached_property
    def _torch_texel_of_index(self) -> torch.Tensor:
        return torch.from_numpy(self.texel_of_index.astype(np.int64))

    @cached_property
    def _torch_sym_map(self) -> torch.Tensor:
        return torch.from_numpy(self.sym_map.astype(np.int64))

    @cached_property
    def valid_mask_f64(self) -> np.ndarray:
        return self.valid_mask.astype(np.float64)

    def _check_vector(self, t):
        n = t.shape[-1] if hasattr(t, "shape") else len(t)
        if n != self.vector_length:
            raise AtlasError(
                f"texture vector length {n} != 3*P = {self.vector_length}"
            )

    def vector_to_image(self, t):
        """Scatter a flat texture vector into a (R, R, 3) UV image.

        Invalid texels are zero. Accepts numpy arrays or torch tensors and
        stays differentiable for tensors.
        """
        self._check_vector(t)
        rows = self.texel_of_index[:, 0]
        cols = self.texel_of_index[:, 1]
        if torch.is_tensor(t):
            img = t.new_zeros((self.resolution, self.resolution, 3))
            idx = self._torch_texel_of_index
            img[idx[:, 0], idx[:, 1]] = t.reshape(-1, 3)
            return img
        t = np.asarray(t)
        img = np.zeros((self.resolution, self.resolution, 3), dtype=t.dtype)
        img[rows, cols] = t.reshape(-1, 3)
        return img

    def image_to_vector(self, img):
        """Gather valid texels of a (R, R, 3) UV image into a flat vector."""
        if img.shape[0] != self.resolution or img.shape[1] != self.resolution:
            raise AtlasError(
                f"image resolution {img.shape[:2]} != atlas resolution {self.resolution}"
            )
        if torch.is_tensor(img):
            idx = self._torch_texel_of_index
            return img[idx[:, 0], idx[:, 1]].reshape(-1)
        rows = self.texel_of_index[:, 0]
        cols = self.texel_of_index[:, 1]
        return np.asarray(img)[rows, cols].reshape(-1)

    def apply_sym_map(self, t):
        """Permute texel slots by the left/right correspondence (RGB together)."""
        self._check_vector(t)
        if torch.is_tensor(t):
            return t.reshape(-1, 3)[self._torch_sym_map].reshape(-1)
        return np.asarray(t).reshape(-1, 3)[self.sym_map].reshape(-1)

    def apply_sym_map_mask(self, v):
        """Permute a per-texel mask/vector of length P by the correspondence."""
        if v.shape[-1] != self.n_texels:
            raise AtlasError(f"mask length {v.shape[-1]} != P = {self.n_texels}")
        if torch.is_tensor(v):
            return v[self._torch_sym_map]
        return np.asarray(v)[self.sym_map]

    def save(self, path):
        return save_arrays(
            path,
            {
                "resolution": np.asarray(self.resolution, dtype=np.int64),
                "valid_mask": self.valid_mask,
                "texel_of_index": self.texel_of_index,
                "index_of_texel": self.index_of_texel,
                "face_uvs": self.face_uvs,
                "sym_map": self.sym_map,
            },
            meta={
                "kind": "uv_atlas",
                "n_texels": self.n_texels,
                "template_version": TEMPLATE_VERSION,
            },
        )

    @staticmethod
    def load(path) -> "UVAtlas":
        arrays, meta = load_arrays(path)
        if meta.get("kind") not in (None, "uv_atlas"):
            raise AtlasError(f"not an atlas container: {path}")
        return UVAtlas(
            resolution=int(arrays["resolution"]),
            valid_mask=arrays["valid_mask"].astype(bool),
            texel_of_index=arrays["texel_of_index"].astype(np.int32),
            index_of_texel=arrays["index_of_texel"].astype(np.int32),
            face_uvs=arrays["face_uvs"].astype(np.float64),
            sym_map=arrays["sym_map"].astype(np.int64),
        )


def build_atlas(mesh_template, resolution: int, sym_map: np.ndarray | None = None) -> UVAtlas:
    """Rasterize the template's UV faces into a texel atlas.

    A texel is valid when its center lies inside at least one UV face.
    Two different faces both claiming a texel center strictly inside each
    is an overlap error; centers exactly on a shared edge go to the first
    face in index order. Zero-area UV faces are rejected.
    """
    if resolution < 16:
        raise AtlasError("resolution must be >= 16")
    face_uvs = np.asarray(mesh_template.face_uvs, dtype=np.float64)
    claim = np.full((resolution, resolution), -1, dtype=np.int64)
    strict = np.zeros((resolution, resolution), dtype=bool)

    centers = (np.arange(resolution) + 0.5) / resolution
    for fi, tri in enumerate(face_uvs):
        (u0, v0), (u1, v1), (u2, v2) = tri
        denom = (v1 - v2) * (u0 - u2) + (u2 - u1) * (v0 - v2)
        if abs(denom) < 1e-14:
            raise AtlasError(f"degenerate UV face {fi} (zero area)")
        c0 = max(0, int(np.floor(min(u0, u1, u2) * resolution)))
        c1 = min(resolution - 1, int(np.ceil(max(u0, u1, u2) * resolution)))
        r0 = max(0, int(np.floor(min(v0, v1, v2) * resolution)))
        r1 = min(resolution - 1, int(np.ceil(max(v0, v1, v2) * resolution)))
        if c1 < c0 or r1 < r0:
            continue
        uu, vv = np.meshgrid(centers[c0:c1 + 1], centers[r0:r1 + 1])
        a = ((v1 - v2) * (uu - u2) + (u2 - u1) * (vv - v2)) / denom
        b = ((v2 - v0) * (uu - u2) + (u0 - u2) * (vv - v2)) / denom
        c = 1.0 - a - b
        inside = (a >= -1e-12) & (b >= -1e-12) & (c >= -1e-12)
        interior = (a > 1e-9) & (b > 1e-9) & (c > 1e-9)
        if not inside.any():
            continue
        rows, cols = np.nonzero(inside)
        rows = rows + r0
        cols = cols + c0
        ins_interior = interior[inside]
        prev = claim[rows, cols]
        conflict = (prev >= 0) & (prev != fi) & ins_interior & strict[rows, cols]
        if conflict.any():
            k = int(np.argmax(conflict))
            raise AtlasError(
                f"overlapping UV faces: texel (row={rows[k]}, col={cols[k]}) "
                f"claimed by faces {prev[k]} and {fi}"
            )
        fresh = prev < 0
        claim[rows[fresh], cols[fresh]] = fi
        strict[rows[fresh], cols[fresh]] = ins_interior[fresh]

    valid_mask = claim >= 0
    rows, cols = np.nonzero(valid_mask)  # np.nonzero is row-major
    texel_of_index = np.stack([rows, cols], axis=1).astype(np.int32)
    index_of_texel = np.full((resolution, resolution), -1, dtype=np.int32)
    index_of_texel[rows, cols] = np.arange(len(rows), dtype=np.int32)

    n = len(rows)
    if sym_map is None:
        sym_map = np.arange(n, dtype=np.int64)
    else:
        sym_map = np.asarray(sym_map, dtype=np.int64)
        if sym_map.shape != (n,) or not np.array_equal(sym_map[sym_map], np.arange(n)):
            raise AtlasError("sym_map must be an involutive permutation on [0, P)")

    return UVAtlas(
        resolution=resolution,
        valid_mask=valid_mask,
        texel_of_index=texel_of_index,
        index_of_texel=index_of_texel,
        face_uvs=face_uvs,
        sym_map=sym_map,
    )
