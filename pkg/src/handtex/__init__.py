"""handtex: relightable two-hand UV texture reconstruction from one image."""

from .atlas import UVAtlas, build_atlas
from .geometry import Camera, HandMesh
from .rendering import LightParams, RasterBuffers, render, shade_phong, unwrap_visible
from .scene import SceneSample, generate_synthetic_scene, generate_texture_corpus, load_scene

__version__ = "0.1.0"

__all__ = [
    "UVAtlas", "build_atlas", "Camera", "HandMesh", "LightParams",
    "RasterBuffers", "render", "shade_phong", "unwrap_visible",
    "SceneSample", "generate_synthetic_scene", "generate_texture_corpus",
    "load_scene", "__version__",
]
