"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_array(a, name, shape=None, dtype=np.float64):
    """Coerce to a numpy array and optionally verify its shape.

    ``shape`` entries set to None are wildcards.
    """
    arr = np.asarray(a, dtype=dtype)
    if shape is not None:
        if arr.ndim != len(shape):
            raise ValueError(f"{name}: expected {len(shape)}-d array, got {arr.ndim}-d")
        for axis, want in enumerate(shape):
            if want is not None and arr.shape[axis] != want:
                raise ValueError(
                    f"{name}: expected shape {shape}, got {arr.shape}"
                )
    return arr


def check_image(img, name="image", size=None):
    """Validate an (H, W, 3) float image in [0, 1]."""
    arr = check_array(img, name, shape=(None, None, 3))
    if size is not None and arr.shape[:2] != (size, size):
        raise ValueError(f"{name}: expected {size}x{size}, got {arr.shape[0]}x{arr.shape[1]}")
    if arr.min() < -1e-6 or arr.max() > 1 + 1e-6:
        raise ValueError(f"{name}: values outside [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def check_texture_vector(t, n_texels, name="texture"):
    """Validate a flat RGB texture vector of length 3 * n_texels."""
    arr = np.asarray(t)
    if arr.ndim != 1 or arr.shape[0] != 3 * n_texels:
        raise ValueError(
            f"{name}: expected flat vector of length {3 * n_texels}, got shape {arr.shape}"
        )
    return arr


def check_unit_rows(v, name, atol=1e-6):
    """Verify rows of ``v`` have unit norm within ``atol``."""
    norms = np.linalg.norm(np.atleast_2d(v), axis=-1)
    if not np.allclose(norms, 1.0, atol=atol):
        raise ValueError(f"{name}: expected unit vectors, norms in [{norms.min()}, {norms.max()}]")
    return v


def check_rotation(r, name="rotation", atol=1e-6):
    """Verify a 3x3 orthonormal matrix."""
    arr = check_array(r, name, shape=(3, 3))
    if not np.allclose(arr @ arr.T, np.eye(3), atol=atol):
        raise ValueError(f"{name}: not orthonormal within {atol}")
    return arr


def check_finite(a, name):
    arr = np.asarray(a)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")
    return arr
