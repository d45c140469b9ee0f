"""File formats: density and crossing-time CSVs, JSON documents, run manifests.

Floats are written with ``repr`` so every value survives a round trip.
Writes go to a temporary file in the target directory and are renamed into
place, so a reader never sees a half-written file.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .grids import DensityGrid

__all__ = [
    "RunManifest",
    "atomic_write_text",
    "read_density_csv",
    "sha256_file",
    "to_jsonable",
    "versions",
    "write_crossings_csv",
    "write_density_csv",
    "write_json",
]


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def _num(x) -> str:
    return repr(float(x))


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n")


def write_density_csv(path, density: DensityGrid) -> Path:
    """CSV with header ``s,f,F`` (``F`` from the grid, cumulated if missing)."""
    F = density.F_values
    if F is None:
        F = np.concatenate([[0.0], np.cumsum(density.cell_masses())])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s", "f", "F"])
    for row in zip(density.s_nodes, density.f_values, F):
        writer.writerow([_num(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_density_csv(path) -> DensityGrid:
    """Parse a density CSV with columns ``s`` and ``f`` (``F`` optional).

    Raises
    ------
    ValidationError
        Missing columns, unparsable numbers or an invalid density.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if not rows or not {"s", "f"} <= set(rows[0]):
        raise ValidationError(f"{path}: expected a header with columns s,f[,F]")
    try:
        s = np.array([float(r["s"]) for r in rows])
        f = np.array([float(r["f"]) for r in rows])
        F = np.array([float(r["F"]) for r in rows]) if rows[0].get("F") not in (None, "") else None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from exc
    return DensityGrid.from_values(s, f, F_values=F)


def write_crossings_csv(path, crossing_times) -> Path:
    buf = io.StringIO()
    buf.write("t_cross\n")
    for t in crossing_times:
        buf.write(_num(t) + "\n")
    return atomic_write_text(path, buf.getvalue())


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def versions() -> dict:
    import numba
    import scipy

    from . import __version__

    return {
        "fpt_fredholm": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


@dataclass
class RunManifest:
    """Provenance of one CLI run; ``outputs`` maps file names to SHA-256."""

    command: str
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    versions: dict = field(default_factory=versions)
    wall_clock: float = 0.0

    def add_input(self, path):
        if path is not None:
            self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path):
        path = Path(path)
        self.outputs[path.name] = sha256_file(path)

    def write(self, out_dir) -> Path:
        return write_json(Path(out_dir) / "manifest.json", asdict(self))
