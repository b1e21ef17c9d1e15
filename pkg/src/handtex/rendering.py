"""Deterministic rasterization + differentiable Phong shading of two hands.

Rasterization is a fixed, non-differentiable preprocess (geometry is never
optimized); gradients flow through texture sampling and shading only, into
the texture vectors and all light components. Faces with any vertex at
camera-space z <= 1e-6 are skipped entirely (no near-plane clipping); scenes
are expected to keep hands in front of the camera.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .atlas import UVAtlas
from .container import load_arrays, save_arrays
from .geometry import Camera, HandMesh
from .validation import check_array, check_unit_rows

DEFAULT_SHININESS = 16.0
_Z_NEAR = 1e-6


@dataclass
class LightParams:
    """Ambient/diffuse/specular colors in [0.2, 1] plus a unit light direction.

    ``direction`` is the direction light travels; shading illuminates
    surfaces whose normals face -direction. Fields may be numpy arrays or
    torch tensors (tensors keep autograd alive).
    """

    ambient: object = field(default_factory=lambda: np.full(3, 0.6))
    diffuse: object = field(default_factory=lambda: np.full(3, 0.6))
    specular: object = field(default_factory=lambda: np.full(3, 0.6))
    direction: object = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def validate(self):
        for name in ("ambient", "diffuse", "specular"):
            v = np.asarray(self._np(getattr(self, name)))
            if v.shape != (3,):
                raise ValueError(f"light {name}: expected 3 components")
            if v.min() < 0.2 - 1e-6 or v.max() > 1 + 1e-6:
                raise ValueError(f"light {name}: components must lie in [0.2, 1]")
        d = np.asarray(self._np(self.direction))
        check_unit_rows(d, "light direction")
        return self

    @staticmethod
    def _np(v):
        return v.detach().cpu().numpy() if torch.is_tensor(v) else np.asarray(v, dtype=np.float64)

    def numpy(self) -> "LightParams":
        return LightParams(*(self._np(getattr(self, k)) for k in
                             ("ambient", "diffuse", "specular", "direction")))

    def to_tensor(self, dtype=torch.float64) -> torch.Tensor:
        parts = [torch.as_tensor(self._np(getattr(self, k)), dtype=dtype)
                 for k in ("ambient", "diffuse", "specular", "direction")]
        return torch.cat(parts)

    @staticmethod
    def from_tensor(t: torch.Tensor) -> "LightParams":
        if t.shape != (12,):
            raise ValueError("light tensor must have 12 components")
        return LightParams(ambient=t[0:3], diffuse=t[3:6], specular=t[6:9], direction=t[9:12])

    def to_dict(self) -> dict:
        n = self.numpy()
        return {k: getattr(n, k).tolist() for k in ("ambient", "diffuse", "specular", "direction")}

    @staticmethod
    def from_dict(d: dict) -> "LightParams":
        return LightParams(**{k: np.asarray(d[k], dtype=np.float64)
                              for k in ("ambient", "diffuse", "specular", "direction")})


@dataclass
class RasterBuffers:
    """Per-pixel fragment data for a fixed two-hand view.

    hand_id: -1 uncovered, 0 left, 1 right. Barycentrics are
    perspective-corrected and sum to 1 on covered pixels. ``front_facing``
    marks fragments whose interpolated normal points toward the camera;
    back-facing fragments are shaded with the flipped normal but excluded
    from unwrapping.
    """

    hand_id: np.ndarray       # (H, W) int8
    face_id: np.ndarray       # (H, W) int32
    bary: np.ndarray          # (H, W, 3) float64
    uv: np.ndarray            # (H, W, 2) float64
    normal: np.ndarray        # (H, W, 3) float64, unit on covered pixels
    depth: np.ndarray         # (H, W) float64, +inf uncovered
    position: np.ndarray      # (H, W, 3) float64 world-space
    front_facing: np.ndarray  # (H, W) bool
    cam_origin: np.ndarray    # (3,)

    @property
    def resolution(self) -> int:
        return self.hand_id.shape[0]

    @property
    def covered(self) -> np.ndarray:
        return self.hand_id >= 0

    def save(self, path):
        return save_arrays(path, {
            "hand_id": self.hand_id, "face_id": self.face_id, "bary": self.bary,
            "uv": self.uv, "normal": self.normal, "depth": self.depth,
            "position": self.position, "front_facing": self.front_facing,
            "cam_origin": self.cam_origin,
        }, meta={"kind": "raster_buffers"})

    @staticmethod
    def load(path) -> "RasterBuffers":
        arrays, _ = load_arrays(path)
        return RasterBuffers(**{k: arrays[k] for k in (
            "hand_id", "face_id", "bary", "uv", "normal", "depth",
            "position", "front_facing", "cam_origin")})


def rasterize(mesh_left: HandMesh, mesh_right: HandMesh, camera: Camera,
              resolution: int) -> RasterBuffers:
    """Joint z-buffered rasterization of both hands at ``resolution`` pixels.

    Inter-hand occlusion is resolved by a single shared depth buffer; depth
    ties keep the earlier face (left mesh first, ascending face index), so
    the result is deterministic.
    """
    cam = camera if camera.width == resolution and camera.height == resolution \
        else camera.scaled(resolution)
    H = W = resolution
    hand_id = np.full((H, W), -1, dtype=np.int8)
    face_id = np.full((H, W), -1, dtype=np.int32)
    bary = np.zeros((H, W, 3))
    uv = np.zeros((H, W, 2))
    normal = np.zeros((H, W, 3))
    depth = np.full((H, W), np.inf)
    position = np.zeros((H, W, 3))

    for hid, mesh in ((0, mesh_left), (1, mesh_right)):
        cam_pts = mesh.vertices @ cam.rotation.T + cam.translation
        z = cam_pts[:, 2]
        safe_z = np.where(z > _Z_NEAR, z, 1.0)
        sx = cam.fx * cam_pts[:, 0] / safe_z + cam.cx
        sy = cam.fy * cam_pts[:, 1] / safe_z + cam.cy
        ok = z > _Z_NEAR
        for fi, f in enumerate(mesh.faces):
            if not (ok[f[0]] and ok[f[1]] and ok[f[2]]):
                continue
            x0, x1, x2 = sx[f]
            y0, y1, y2 = sy[f]
            denom = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
            if abs(denom) < 1e-12:
                continue
            c0 = max(0, int(np.floor(min(x0, x1, x2) - 0.5)))
            c1 = min(W - 1, int(np.ceil(max(x0, x1, x2) - 0.5)))
            r0 = max(0, int(np.floor(min(y0, y1, y2) - 0.5)))
            r1 = min(H - 1, int(np.ceil(max(y0, y1, y2) - 0.5)))
            if c1 < c0 or r1 < r0:
                continue
            px = np.arange(c0, c1 + 1) + 0.5
            py = np.arange(r0, r1 + 1) + 0.5
            gx, gy = np.meshgrid(px, py)
            a = ((y1 - y2) * (gx - x2) + (x2 - x1) * (gy - y2)) / denom
            b = ((y2 - y0) * (gx - x2) + (x0 - x2) * (gy - y2)) / denom
            c = 1.0 - a - b
            inside = (a >= -1e-9) & (b >= -1e-9) & (c >= -1e-9)
            if not inside.any():
                continue
            zf = z[f]
            # perspective-correct interpolation via 1/z weighting
            inv_d = a / zf[0] + b / zf[1] + c / zf[2]
            frag_z = 1.0 / inv_d
            rows, cols = np.nonzero(inside)
            rows_g = rows + r0
            cols_g = cols + c0
            fz = frag_z[rows, cols]
            closer = fz < depth[rows_g, cols_g]
            if not closer.any():
                continue
            rows_g, cols_g = rows_g[closer], cols_g[closer]
            rows, cols = rows[closer], cols[closer]
            pa = (a[rows, cols] / zf[0]) * fz[closer]
            pb = (b[rows, cols] / zf[1]) * fz[closer]
            pc = 1.0 - pa - pb
            pw = np.stack([pa, pb, pc], axis=1)
            depth[rows_g, cols_g] = fz[closer]
            hand_id[rows_g, cols_g] = hid
            face_id[rows_g, cols_g] = fi
            bary[rows_g, cols_g] = pw
            uv[rows_g, cols_g] = pw @ mesh.face_uvs[fi]
            n = pw @ mesh.normals[f]
            n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-12)
            normal[rows_g, cols_g] = n
            position[rows_g, cols_g] = pw @ mesh.vertices[f]

    covered = hand_id >= 0
    to_cam = cam.origin[None, None, :] - position
    front = np.einsum("hwc,hwc->hw", normal, to_cam) > 0
    front &= covered
    return RasterBuffers(hand_id=hand_id, face_id=face_id, bary=bary, uv=uv,
                         normal=normal, depth=depth, position=position,
                         front_facing=front, cam_origin=cam.origin)


def _bilinear_sample(img: torch.Tensor, mask: torch.Tensor, uv: torch.Tensor) -> torch.Tensor:
    """Bilinear texture lookup with weights renormalized over valid texels,
    so invalid (zero) texels never bleed into island borders."""
    res = img.shape[0]
    tx = uv[:, 0] * res - 0.5
    ty = uv[:, 1] * res - 0.5
    x0f = torch.floor(tx)
    y0f = torch.floor(ty)
    fx = (tx - x0f).unsqueeze(1)
    fy = (ty - y0f).unsqueeze(1)
    x0 = x0f.long().clamp(0, res - 1)
    y0 = y0f.long().clamp(0, res - 1)
    x1 = (x0f.long() + 1).clamp(0, res - 1)
    y1 = (y0f.long() + 1).clamp(0, res - 1)
    w00 = (1 - fx) * (1 - fy)
    w10 = fx * (1 - fy)
    w01 = (1 - fx) * fy
    w11 = fx * fy
    m = mask.unsqueeze(-1)
    acc = (w00 * img[y0, x0] * m[y0, x0] + w10 * img[y0, x1] * m[y0, x1]
           + w01 * img[y1, x0] * m[y1, x0] + w11 * img[y1, x1] * m[y1, x1])
    den = (w00 * m[y0, x0] + w10 * m[y0, x1] + w01 * m[y1, x0] + w11 * m[y1, x1])
    return acc / den.clamp(min=1e-12)


def shade_phong(raster: RasterBuffers, tex_left, tex_right, light: LightParams,
                atlas: UVAtlas, background=None,
                shininess: float = DEFAULT_SHININESS) -> torch.Tensor:
    """Phong-shade rasterized fragments from per-hand UV textures.

    Per covered pixel, with albedo a bilinearly sampled from the owning
    hand's texture: clamp(a*ambient + a*diffuse*max(0, n.ld)
    + specular*max(0, r.v)^shininess). Specular is not modulated by albedo.
    Differentiable w.r.t. both texture vectors and all light components.
    """
    tex_left = torch.as_tensor(tex_left)
    tex_right = torch.as_tensor(tex_right)
    dtype = tex_left.dtype if tex_left.is_floating_point() else torch.float64
    tex_right = tex_right.to(dtype)
    H = W = raster.resolution

    img_l = atlas.vector_to_image(tex_left)
    img_r = atlas.vector_to_image(tex_right)
    valid = torch.as_tensor(atlas.valid_mask_f64, dtype=dtype)

    if background is None:
        out = torch.zeros((H, W, 3), dtype=dtype)
    else:
        out = torch.as_tensor(np.asarray(background), dtype=dtype).clone()
        if out.shape != (H, W, 3):
            raise ValueError(f"background shape {tuple(out.shape)} != ({H}, {W}, 3)")

    ys, xs = np.nonzero(raster.covered)
    if len(ys) == 0:
        return out

    uv = torch.as_tensor(raster.uv[ys, xs], dtype=dtype)
    nrm = torch.as_tensor(raster.normal[ys, xs], dtype=dtype)
    pos = torch.as_tensor(raster.position[ys, xs], dtype=dtype)
    left_px = torch.as_tensor(raster.hand_id[ys, xs] == 0)
    flip = torch.as_tensor(np.where(raster.front_facing[ys, xs], 1.0, -1.0)[:, None]).to(dtype)

    alb_l = _bilinear_sample(img_l, valid, uv)
    alb_r = _bilinear_sample(img_r, valid, uv)
    albedo = torch.where(left_px.unsqueeze(1), alb_l, alb_r)

    ambient = torch.as_tensor(light.ambient).to(dtype) if not torch.is_tensor(light.ambient) \
        else light.ambient.to(dtype)
    diffuse = light.diffuse.to(dtype) if torch.is_tensor(light.diffuse) \
        else torch.as_tensor(light.diffuse, dtype=dtype)
    specular = light.specular.to(dtype) if torch.is_tensor(light.specular) \
        else torch.as_tensor(light.specular, dtype=dtype)
    direction = light.direction.to(dtype) if torch.is_tensor(light.direction) \
        else torch.as_tensor(light.direction, dtype=dtype)

    ld = -direction / direction.norm().clamp(min=1e-12)
    n_eff = nrm * flip
    ndl = (n_eff * ld).sum(dim=1, keepdim=True)
    diff = ndl.clamp(min=0)
    refl = 2.0 * ndl * n_eff - ld
    view = torch.as_tensor(raster.cam_origin, dtype=dtype) - pos
    view = view / view.norm(dim=1, keepdim=True).clamp(min=1e-12)
    spec = (refl * view).sum(dim=1, keepdim=True).clamp(min=0) ** shininess

    rgb = albedo * ambient + albedo * diffuse * diff + specular * spec
    out[ys, xs] = rgb.clamp(0.0, 1.0)
    return out


def render(tex_left, tex_right, mesh_left: HandMesh, mesh_right: HandMesh,
           camera: Camera, light: LightParams, atlas: UVAtlas,
           background=None, resolution: int | None = None,
           raster: RasterBuffers | None = None,
           shininess: float = DEFAULT_SHININESS) -> torch.Tensor:
    """rasterize + shade_phong; pass ``raster`` to reuse a cached rasterization."""
    if raster is None:
        raster = rasterize(mesh_left, mesh_right, camera,
                           resolution or camera.width)
    return shade_phong(raster, tex_left, tex_right, light, atlas,
                       background=background, shininess=shininess)


def unwrap_visible(image, raster: RasterBuffers, atlas: UVAtlas):
    """Splat covered, front-facing pixels back onto each hand's texels.

    A texel gets the mean color of the pixels whose interpolated UV falls
    inside its cell; such texels form the visibility mask. Returns
    (u_left, u_right) flat texture vectors and (v_left, v_right) boolean
    per-texel masks. Differentiable w.r.t. the image colors.
    """
    img = image if torch.is_tensor(image) else torch.as_tensor(np.asarray(image))
    if img.shape[0] != raster.resolution or img.shape[1] != raster.resolution:
        raise ValueError(
            f"image resolution {tuple(img.shape[:2])} != raster resolution {raster.resolution}"
        )
    dtype = img.dtype if img.is_floating_point() else torch.float64
    img = img.to(dtype)
    res = atlas.resolution
    P = atlas.n_texels
    index_of_texel = atlas._torch_index_of_texel

    outputs = []
    for hid in (0, 1):
        sel = (raster.hand_id == hid) & raster.front_facing
        ys, xs = np.nonzero(sel)
        sums = torch.zeros((P, 3), dtype=dtype)
        counts = torch.zeros(P, dtype=dtype)
        if len(ys):
            uv = np.clip(raster.uv[ys, xs], 0.0, 1.0 - 1e-9)
            rows = np.minimum((uv[:, 1] * res).astype(np.int64), res - 1)
            cols = np.minimum((uv[:, 0] * res).astype(np.int64), res - 1)
            slots = index_of_texel[torch.as_tensor(rows), torch.as_tensor(cols)]
            keep = slots >= 0
            slots = slots[keep]
            colors = img[torch.as_tensor(ys), torch.as_tensor(xs)][keep]
            sums = sums.index_add(0, slots, colors)
            counts = counts.index_add(0, slots, torch.ones(len(slots), dtype=dtype))
        u = (sums / counts.clamp(min=1).unsqueeze(1)).reshape(-1)
        v = counts > 0
        outputs.append((u, v))
    (u_l, v_l), (u_r, v_r) = outputs
    return u_l, u_r, v_l, v_r


@dataclass
class PartitionRatios:
    """Per-hand texel partition: visible / usable-symmetric / invisible.

    usable-symmetric texels are invisible on the hand itself while the
    corresponding texel on the other hand is visible. The three fractions
    sum to 1 per hand.
    """

    left: dict
    right: dict

    def as_dict(self) -> dict:
        return {"left": dict(self.left), "right": dict(self.right)}


def visibility_stats(v_left, v_right, atlas: UVAtlas) -> PartitionRatios:
    vl = v_left.numpy() if torch.is_tensor(v_left) else np.asarray(v_left)
    vr = v_right.numpy() if torch.is_tensor(v_right) else np.asarray(v_right)
    vl = vl.astype(bool)
    vr = vr.astype(bool)
    if vl.shape != (atlas.n_texels,) or vr.shape != (atlas.n_texels,):
        raise ValueError("visibility masks must have length P")

    def ratios(own, other):
        other_sym = other[atlas.sym_map]
        visible = float(own.mean())
        usable = float(((~own) & other_sym).mean())
        invisible = float(((~own) & ~other_sym).mean())
        return {"visible": visible, "usable_symmetric": usable, "invisible": invisible}

    return PartitionRatios(left=ratios(vl, vr), right=ratios(vr, vl))


def raster_cache_key(mesh_left: HandMesh, mesh_right: HandMesh,
                     camera: Camera, resolution: int) -> str:
    h = hashlib.sha256()
    for mesh in (mesh_left, mesh_right):
        h.update(np.ascontiguousarray(mesh.vertices.round(9)).tobytes())
        h.update(np.ascontiguousarray(mesh.faces).tobytes())
        h.update(np.ascontiguousarray(mesh.face_uvs.round(9)).tobytes())
    cam = camera.to_dict()
    h.update(repr(sorted(cam.items())).encode())
    h.update(str(resolution).encode())
    return h.hexdigest()[:32]


def cached_rasterize(mesh_left: HandMesh, mesh_right: HandMesh, camera: Camera,
                     resolution: int, cache_dir=None) -> RasterBuffers:
    """Rasterize with an optional on-disk cache (HANDTEX_CACHE_DIR by default)."""
    cache_dir = cache_dir or os.environ.get("HANDTEX_CACHE_DIR")
    if not cache_dir:
        return rasterize(mesh_left, mesh_right, camera, resolution)
    key = raster_cache_key(mesh_left, mesh_right, camera, resolution)
    path = os.path.join(cache_dir, f"raster_{key}.npz")
    if os.path.exists(path):
        return RasterBuffers.load(path)
    raster = rasterize(mesh_left, mesh_right, camera, resolution)
    raster.save(path)
    return raster
