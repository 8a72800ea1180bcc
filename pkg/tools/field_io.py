# tools/field_io.py
"""
Field dumps: CSV matrices, 16-bit grayscale images and their JSON sidecars.

Formats
- CSV: one row per j (y index), one column per i (x index), 17 significant digits, so a
  field read back is bit-identical and reruns produce byte-identical files.
- PGM (binary "P5", maxval 65535, big-endian samples): one pixel per node, u mapped
  affinely from [-1, 1] onto [0, 65535]; row order matches the CSV.
- Sidecar `<stem>.json` next to either dump: {"L", "N", "theta", "kappa", "t_final", ...}.
"""

from __future__ import annotations

import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from tools.errors import FieldFormatError, ValidationError
from tools.grid import GridGeometry, ScalarField

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

PathLike = Union[str, os.PathLike]

CSV_FORMAT = "%.17g"
PGM_MAXVAL = 65535


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def result_stem(L: float, N: int, theta: float, kappa: float, t: float, run: int = 1) -> str:
    """File stem such as Result_surf_L=4.4429_N=128_theta=0.7000_kappa=0.0200_t=50.0000_run_1."""
    return f"Result_surf_L={L:.4f}_N={N}_theta={theta:.4f}_kappa={kappa:.4f}_t={t:.4f}_run_{run}"


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_sidecar(path: PathLike, geometry: GridGeometry, meta: Optional[Mapping[str, Any]] = None) -> Path:
    side = sidecar_path(path)
    _ensure_parent(side)
    payload: Dict[str, Any] = {"L": geometry.L, "N": geometry.N}
    if meta:
        payload.update(meta)
    with open(side, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    return side


def read_sidecar(path: PathLike) -> Dict[str, Any]:
    side = sidecar_path(path)
    try:
        with open(side, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise FieldFormatError(f"sidecar {side} not found") from exc
    except json.JSONDecodeError as exc:
        raise FieldFormatError(f"sidecar {side} is not valid JSON: {exc}") from exc


def write_csv(u: ScalarField, path: PathLike, meta: Optional[Mapping[str, Any]] = None) -> Path:
    """Write the node matrix (row per j) and its sidecar; returns the CSV path."""
    path = Path(path)
    _ensure_parent(path)
    np.savetxt(path, u.values.T, fmt=CSV_FORMAT, delimiter=",")
    write_sidecar(path, u.geometry, meta)
    logger.debug("Wrote field CSV %s", path)
    return path


def read_csv(path: PathLike, L: Optional[float] = None) -> Tuple[ScalarField, Dict[str, Any]]:
    """
    Load a field written by write_csv. L comes from the sidecar unless given.

    Raises FieldFormatError for a missing file, ragged or non-numeric rows, a non-square
    matrix, or a size that disagrees with the sidecar.
    """
    path = Path(path)
    if not path.exists():
        raise FieldFormatError(f"field file {path} not found")
    meta: Dict[str, Any] = {}
    if L is None or sidecar_path(path).exists():
        meta = read_sidecar(path)
    try:
        matrix = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FieldFormatError(f"field file {path} is corrupt: {exc}") from exc
    if matrix.shape[0] != matrix.shape[1]:
        raise FieldFormatError(f"field file {path} holds a {matrix.shape} matrix; expected square")
    N = matrix.shape[0] - 1
    if "N" in meta and int(meta["N"]) != N:
        raise FieldFormatError(f"field file {path} has N={N} but its sidecar says N={meta['N']}")
    side_L = L if L is not None else meta.get("L")
    if side_L is None:
        raise FieldFormatError(f"no domain length for {path}: pass L or provide a sidecar")
    try:
        field = ScalarField(GridGeometry(float(side_L), N), matrix.T)
    except ValidationError as exc:
        raise FieldFormatError(f"field file {path} is invalid: {exc}") from exc
    return field, meta


def to_gray16(values: np.ndarray) -> np.ndarray:
    """Affine map [-1, 1] -> [0, 65535], clipped and rounded, as uint16."""
    scaled = np.rint((np.clip(values, -1.0, 1.0) + 1.0) * 0.5 * PGM_MAXVAL)
    return scaled.astype(np.uint16)


def write_pgm16(u: ScalarField, path: PathLike, meta: Optional[Mapping[str, Any]] = None) -> Path:
    """Binary 16-bit PGM, one sample per node, with a sidecar carrying the physical parameters."""
    path = Path(path)
    _ensure_parent(path)
    gray = to_gray16(u.values.T)
    height, width = gray.shape
    header = f"P5\n{width} {height}\n{PGM_MAXVAL}\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(gray.astype(">u2").tobytes())
    write_sidecar(path, u.geometry, meta)
    logger.debug("Wrote 16-bit image %s", path)
    return path


def read_pgm16(path: PathLike) -> np.ndarray:
    """Read the raw uint16 samples (rows = j) of a file written by write_pgm16."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as exc:
        raise FieldFormatError(f"image {path} not found") from exc
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise FieldFormatError(f"{path} is not a binary PGM")
    width, height = (int(v) for v in parts[1].split())
    if int(parts[2]) != PGM_MAXVAL:
        raise FieldFormatError(f"{path} has maxval {parts[2]!r}; expected {PGM_MAXVAL}")
    samples = np.frombuffer(parts[3], dtype=">u2")
    if samples.size != width * height:
        raise FieldFormatError(f"{path} is truncated: {samples.size} of {width * height} samples")
    return samples.reshape(height, width).astype(np.uint16)


def gray16_to_values(gray: np.ndarray) -> np.ndarray:
    """Inverse of to_gray16 up to quantization (step 2/65535)."""
    return gray.astype(np.float64) / PGM_MAXVAL * 2.0 - 1.0


def dump_field(
    u: ScalarField,
    directory: PathLike,
    stem: str,
    meta: Optional[Mapping[str, Any]] = None,
    image: bool = False,
) -> Dict[str, str]:
    """Write CSV (always) and PGM (optional) under directory; returns the written paths."""
    directory = Path(directory)
    written = {"csv": str(write_csv(u, directory / f"{stem}.csv", meta))}
    if image:
        written["image"] = str(write_pgm16(u, directory / f"{stem}.pgm", meta))
    return written


def finite_or_none(x: float) -> Optional[float]:
    """JSON has no inf/nan; map them to null."""
    return x if isinstance(x, (int, float)) and math.isfinite(x) else None
