"""Named-array container files: an .npz payload plus a .json metadata sidecar.

Every persisted artifact (atlas, PCA model, raster cache, checkpoints) uses
this layout so files stay inspectable with plain numpy/json tooling.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def save_arrays(path, arrays: dict, meta: dict | None = None) -> Path:
    """Write named arrays to ``path`` (.npz appended if missing) + json sidecar."""
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(path.suffix + ".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **arrays)
    sidecar = dict(meta or {})
    sidecar.setdefault("format_version", FORMAT_VERSION)
    sidecar["arrays"] = sorted(arrays.keys())
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))
    return path


def load_arrays(path) -> tuple[dict, dict]:
    """Load a named-array container; returns (arrays, meta)."""
    path = Path(path)
    if not path.exists() and path.suffix != ".npz":
        path = path.with_suffix(path.suffix + ".npz")
    if not path.exists():
        raise FileNotFoundError(f"container not found: {path}")
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    meta_path = path.with_suffix(".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return arrays, meta
