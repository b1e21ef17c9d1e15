"""Scene ingestion and the synthetic scene / texture-corpus generators.

A scene directory contains: image.png (8-bit RGB), left.obj / right.obj
(triangles with vt UV records), camera.json, and optionally
gt_texture_left.png / gt_texture_right.png (UV layout), light.json and
scene.json (background color). Synthetic scenes are fully self-consistent:
the stored image is produced by this package's own renderer from the stored
ground-truth textures and light.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import rendering, template
from .atlas import UVAtlas
from .geometry import Camera, HandMesh, load_camera, load_obj, save_camera, save_obj
from .template import HandPose, build_hand, rot_y, rot_z


@dataclass
class SceneSample:
    """One training scene: a single RGB image plus the two posed hand meshes."""

    image: np.ndarray
    mesh_left: HandMesh
    mesh_right: HandMesh
    camera: Camera
    gt_texture_left: np.ndarray | None = None
    gt_texture_right: np.ndarray | None = None
    gt_light: rendering.LightParams | None = None
    background_color: np.ndarray | None = None

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        size = self.camera.width
        if self.image.shape != (self.camera.height, size, 3):
            raise ValueError(
                f"image shape {self.image.shape} != camera-declared "
                f"({self.camera.height}, {size}, 3)"
            )
        if self.image.min() < 0 or self.image.max() > 1:
            raise ValueError("image values must lie in [0, 1]")
        if {self.mesh_left.handedness, self.mesh_right.handedness} != {"left", "right"}:
            raise ValueError("scene must contain one left and one right hand")

    @property
    def resolution(self) -> int:
        return self.camera.width


def save_png(path, img) -> None:
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), "RGB").save(path)


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def _resize(img: np.ndarray, size: int) -> np.ndarray:
    if img.shape[0] == size and img.shape[1] == size:
        return img
    im = Image.fromarray((np.clip(img, 0, 1) * 255.0 + 0.5).astype(np.uint8), "RGB")
    im = im.resize((size, size), Image.BILINEAR)
    return np.asarray(im, dtype=np.float64) / 255.0


def save_scene(scene: SceneSample, directory, atlas: UVAtlas | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_png(directory / "image.png", scene.image)
    save_obj(scene.mesh_left, directory / "left.obj")
    save_obj(scene.mesh_right, directory / "right.obj")
    save_camera(scene.camera, directory / "camera.json")
    if scene.gt_light is not None:
        (directory / "light.json").write_text(json.dumps(scene.gt_light.to_dict(), indent=2))
    if scene.background_color is not None:
        (directory / "scene.json").write_text(
            json.dumps({"background_color": np.asarray(scene.background_color).tolist()}, indent=2))
    if atlas is not None:
        if scene.gt_texture_left is not None:
            save_png(directory / "gt_texture_left.png", atlas.vector_to_image(scene.gt_texture_left))
        if scene.gt_texture_right is not None:
            save_png(directory / "gt_texture_right.png", atlas.vector_to_image(scene.gt_texture_right))
    return directory


def load_scene(directory, atlas: UVAtlas | None = None) -> SceneSample:
    """Load a scene directory; the image is resized to the camera-declared size."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"scene directory not found: {directory}")
    image_path = directory / "image.png"
    if not image_path.exists():
        raise FileNotFoundError(f"missing image: {image_path}")
    camera = load_camera(directory / "camera.json")
    mesh_left = load_obj(directory / "left.obj", "left")
    mesh_right = load_obj(directory / "right.obj", "right")
    image = _resize(load_png(image_path), camera.width)

    gt_left = gt_right = None
    if atlas is not None:
        lp = directory / "gt_texture_left.png"
        rp = directory / "gt_texture_right.png"
        if lp.exists():
            gt_left = atlas.image_to_vector(load_png(lp))
        if rp.exists():
            gt_right = atlas.image_to_vector(load_png(rp))
    light = None
    light_path = directory / "light.json"
    if light_path.exists():
        light = rendering.LightParams.from_dict(json.loads(light_path.read_text()))
    background = None
    meta_path = directory / "scene.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        if "background_color" in meta:
            background = np.asarray(meta["background_color"], dtype=np.float64)

    return SceneSample(image=image, mesh_left=mesh_left, mesh_right=mesh_right,
                       camera=camera, gt_texture_left=gt_left, gt_texture_right=gt_right,
                       gt_light=light, background_color=background)


def _smooth_field(rng: np.random.Generator, res: int, cells: int, channels: int = 3) -> np.ndarray:
    """Bilinearly upsampled coarse Gaussian noise, unit-ish amplitude."""
    g = rng.normal(0.0, 1.0, size=(cells, cells, channels))
    xs = (np.arange(res) + 0.5) / res * (cells - 1)
    i0 = np.floor(xs).astype(np.int64)
    f = xs - i0
    i1 = np.minimum(i0 + 1, cells - 1)
    rows = g[i0] * (1 - f)[:, None, None] + g[i1] * f[:, None, None]
    out = rows[:, i0] * (1 - f)[None, :, None] + rows[:, i1] * f[None, :, None]
    return out


def generate_texture_corpus(seed: int, n: int, atlas: UVAtlas) -> list[np.ndarray]:
    """Procedural skin-like texture vectors: base tone, low-frequency
    mottling, wrinkle streaks, and bright nail-like patches. Deterministic
    per seed; values in [0.05, 0.95].
    """
    if n < 2:
        raise ValueError("corpus needs n >= 2 samples (PCA rank)")
    rng = np.random.default_rng(seed)
    res = atlas.resolution
    vv = (np.arange(res) + 0.5) / res
    uu = vv
    corpus = []
    for _ in range(n):
        base = rng.uniform([0.45, 0.28, 0.22], [0.80, 0.55, 0.45])
        img = np.broadcast_to(base, (res, res, 3)).copy()
        img += 0.06 * _smooth_field(rng, res, cells=9)
        freq = rng.uniform(18.0, 40.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        amp = rng.uniform(0.015, 0.04)
        streaks = amp * np.sin(2 * np.pi * freq * vv + phase)
        img += streaks[:, None, None] * np.array([1.0, 0.9, 0.85])
        for _ in range(int(rng.integers(4, 9))):
            cx, cy = rng.uniform(0.08, 0.92, size=2)
            rad = rng.uniform(0.015, 0.035)
            d2 = (uu[None, :] - cx) ** 2 + (vv[:, None] - cy) ** 2
            img += 0.16 * np.exp(-d2 / (2 * rad * rad))[..., None] * np.array([1.0, 0.97, 0.92])
        img = np.clip(img, 0.05, 0.95)
        corpus.append(atlas.image_to_vector(img))
    return corpus


def _sample_light(rng: np.random.Generator) -> rendering.LightParams:
    colors = rng.uniform(0.25, 0.95, size=(3, 3))
    direction = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                          rng.uniform(0.6, 1.0)])
    direction /= np.linalg.norm(direction)
    return rendering.LightParams(ambient=colors[0], diffuse=colors[1],
                                 specular=colors[2], direction=direction)


def scene_meshes(seed: int, pose_id: int) -> tuple[HandMesh, HandMesh]:
    """Posed, interacting left/right meshes for a synthetic scene.

    The right hand crosses in front of the left so each hand occludes part
    of the other from most viewpoints.
    """
    rng = np.random.default_rng([seed, 1000 + pose_id])
    pose_l = HandPose.sample(rng)
    pose_r = HandPose.sample(rng)
    jitter = rng.uniform(-0.08, 0.08, size=6)
    mesh_left = build_hand(
        "left", pose_l,
        rotation=rot_y(0.25 + jitter[0]) @ rot_z(0.10 + jitter[1]),
        translation=np.array([-0.35, -0.95, 0.10]) + jitter[3:6] * 0.5,
    )
    mesh_right = build_hand(
        "right", pose_r,
        rotation=rot_z(1.25 + jitter[2]) @ rot_y(-0.2),
        translation=np.array([0.85, -0.10, -0.35]),
    )
    return mesh_left, mesh_right


def scene_camera(seed: int, view_id: int, size: int) -> Camera:
    rng = np.random.default_rng([seed, 2000 + view_id])
    az = rng.uniform(-0.55, 0.55)
    el = rng.uniform(-0.30, 0.30)
    radius = 4.6
    origin = radius * np.array([np.sin(az) * np.cos(el), np.sin(el),
                                -np.cos(az) * np.cos(el)])
    return Camera.look_at(origin, target=(0.0, 0.0, 0.0), fov_deg=45.0, size=size)


def generate_synthetic_scene(seed: int, atlas: UVAtlas, pose_id: int, view_id: int,
                             image_size: int = 256,
                             quantize_textures: bool = False) -> SceneSample:
    """Deterministic synthetic scene with ground truth installed.

    Left/right ground-truth textures are the same corpus texture with small
    independent smooth perturbations. The image is rendered by this
    package's renderer, so re-rendering the ground truth reproduces it
    exactly. ``quantize_textures`` snaps textures to 8-bit before rendering
    so a scene saved to disk stays self-consistent.
    """
    rng = np.random.default_rng([seed, 3000])
    base = generate_texture_corpus(seed, 2, atlas)[0]
    res = atlas.resolution
    pert_l = atlas.image_to_vector(0.02 * _smooth_field(rng, res, cells=7))
    pert_r = atlas.image_to_vector(0.02 * _smooth_field(rng, res, cells=7))
    tex_l = np.clip(base + pert_l, 0.05, 0.95)
    tex_r = np.clip(base + pert_r, 0.05, 0.95)
    if quantize_textures:
        tex_l = np.round(tex_l * 255.0) / 255.0
        tex_r = np.round(tex_r * 255.0) / 255.0
    light = _sample_light(rng)
    background_color = rng.uniform(0.08, 0.20, size=3)

    mesh_left, mesh_right = scene_meshes(seed, pose_id)
    camera = scene_camera(seed, view_id, image_size)
    raster = rendering.rasterize(mesh_left, mesh_right, camera, image_size)
    bg = np.broadcast_to(background_color, (image_size, image_size, 3)).copy()
    image = rendering.shade_phong(raster, tex_l, tex_r, light, atlas,
                                  background=bg).numpy()
    return SceneSample(image=image, mesh_left=mesh_left, mesh_right=mesh_right,
                       camera=camera, gt_texture_left=tex_l, gt_texture_right=tex_r,
                       gt_light=light, background_color=background_color)


def build_default_atlas(resolution: int = 256) -> UVAtlas:
    """Atlas over the shipped hand template's UV layout."""
    from .atlas import build_atlas

    return build_atlas(template.rest_template(), resolution)
