# agents/record_store.py

import json
import logging
import math
import os
import platform
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from tools import __version__
from tools.errors import FieldFormatError

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

CSV_COLUMNS = [
    "theta",
    "kappa",
    "kappa_c",
    "seed",
    "u_theta",
    "max_u",
    "energy",
    "nehari_residual",
    "t_final",
    "classification",
    "flags",
]
FLAG_SEPARATOR = ";"
KAPPA_C_READ_TOL = 1e-15


@dataclass
class SweepRecord:
    """One (theta, kappa, seed) case of a sweep."""

    theta: float
    kappa: float
    kappa_c: float
    seed: int
    u_theta: float
    max_u: float
    energy: float
    nehari_residual: float
    t_final: float
    classification: str
    flags: List[str] = field(default_factory=list)
    min_u: float = float("nan")
    converged: bool = False
    kappa_c_discrete: float = float("nan")
    wall_time_s: float = 0.0

    @property
    def key(self) -> str:
        return record_key(self.theta, self.kappa, self.seed)

    @property
    def anomalies(self) -> List[str]:
        return [f for f in self.flags if f.startswith("anomaly:")]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SweepRecord":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def to_row(self) -> Dict[str, Any]:
        row = {c: getattr(self, c) for c in CSV_COLUMNS}
        row["flags"] = FLAG_SEPARATOR.join(self.flags)
        return row


def record_key(theta: float, kappa: float, seed: int) -> str:
    return f"theta={theta!r}|kappa={kappa!r}|seed={seed}"


def sort_records(records: Iterable[SweepRecord]) -> List[SweepRecord]:
    return sorted(records, key=lambda r: (r.theta, r.kappa, r.seed))


def json_safe(value: Any) -> Any:
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


class RecordStore:
    """
    JSON-backed store of sweep records.

    Responsibilities:
        - Persist records keyed by (theta, kappa, seed); a rerun of the same case
          replaces the old record instead of appending a duplicate.
        - Export the fixed-header CSV and the run manifest.
        - Re-validate kappa_c on load so a corrupted or hand-edited file is caught.

    Storage format (records.json):
        [
            {"key": "theta=0.7|kappa=0.02|seed=1", "data": {...SweepRecord fields except wall_time_s...}},
            ...
        ]
    """

    def __init__(self, storage_path: str = "data/outputs/records.json", lambda1: float = 1.0):
        self.storage_path = storage_path
        self.lambda1 = lambda1
        self._ensure_initialized()

    # ---------------------------------------------------------
    # Initialization helpers
    # ---------------------------------------------------------
    def _ensure_initialized(self):
        parent = os.path.dirname(self.storage_path)
        if parent and not os.path.exists(parent):
            os.makedirs(parent, exist_ok=True)

        if not os.path.exists(self.storage_path):
            with open(self.storage_path, "w", encoding="utf-8") as f:
                json.dump([], f)

    # ---------------------------------------------------------
    # Basic load/save
    # ---------------------------------------------------------
    def _load_raw(self) -> List[Dict[str, Any]]:
        try:
            with open(self.storage_path, "r", encoding="utf-8") as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise FieldFormatError(f"record store {self.storage_path} is corrupt: {e}") from e

    def _save_raw(self, data: List[Dict[str, Any]]) -> None:
        with open(self.storage_path, "w", encoding="utf-8") as f:
            json.dump(json_safe(data), f, indent=2, sort_keys=True)

    # ---------------------------------------------------------
    # Public APIs
    # ---------------------------------------------------------
    def store(self, record: SweepRecord) -> bool:
        """Insert or replace by key; returns True when an old record was replaced."""
        memory = self._load_raw()
        data = record.to_dict()
        # wall times live in the manifest only, so the store stays identical across reruns
        data.pop("wall_time_s", None)
        entry = {"key": record.key, "data": data}

        updated = False
        for idx, old in enumerate(memory):
            if old.get("key") == record.key:
                memory[idx] = entry
                updated = True
                break
        if not updated:
            memory.append(entry)

        memory.sort(key=lambda e: (e["data"]["theta"], e["data"]["kappa"], e["data"]["seed"]))
        self._save_raw(memory)
        logger.debug("RecordStore: stored key=%s (updated=%s)", record.key, updated)
        return updated

    def store_many(self, records: Iterable[SweepRecord]) -> int:
        n = 0
        for r in records:
            self.store(r)
            n += 1
        logger.info("RecordStore: stored %d record(s) in %s", n, self.storage_path)
        return n

    def load(self) -> List[SweepRecord]:
        """
        Read every record back. kappa_c is recomputed as (1 - theta)/lambda1; a stored value
        off by more than 1e-15 marks the record with "anomaly:kappa_c_mismatch".
        """
        out = []
        for entry in self._load_raw():
            data = dict(entry.get("data", {}))
            for k in ("max_u", "energy", "nehari_residual", "t_final", "min_u", "u_theta", "kappa_c_discrete"):
                if data.get(k) is None:
                    data[k] = float("nan")
            rec = SweepRecord.from_dict(data)
            expected = (1.0 - rec.theta) / self.lambda1
            if abs(expected - rec.kappa_c) > KAPPA_C_READ_TOL and "anomaly:kappa_c_mismatch" not in rec.flags:
                logger.warning("RecordStore: kappa_c mismatch for %s (%r vs %r)", rec.key, rec.kappa_c, expected)
                rec.flags.append("anomaly:kappa_c_mismatch")
            out.append(rec)
        return sort_records(out)

    def query(self, theta: Optional[float] = None, kappa: Optional[float] = None) -> List[SweepRecord]:
        """Records matching the given theta and/or kappa exactly."""
        return [
            r for r in self.load()
            if (theta is None or r.theta == theta) and (kappa is None or r.kappa == kappa)
        ]


def records_frame(records: Iterable[SweepRecord]) -> pd.DataFrame:
    rows = [r.to_row() for r in sort_records(records)]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_records_csv(records: Iterable[SweepRecord], path: str) -> str:
    """Fixed header, rows ordered by (theta, kappa, seed), full float precision."""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    records_frame(records).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_records_csv(path: str) -> List[SweepRecord]:
    try:
        df = pd.read_csv(path, keep_default_na=False, na_values=[""], dtype={"flags": str, "classification": str})
    except FileNotFoundError as e:
        raise FieldFormatError(f"records file {path} not found") from e
    if list(df.columns) != CSV_COLUMNS:
        raise FieldFormatError(f"records file {path} has columns {list(df.columns)}; expected {CSV_COLUMNS}")
    out = []
    for row in df.to_dict(orient="records"):
        flags = row.pop("flags")
        row["flags"] = [f for f in str(flags).split(FLAG_SEPARATOR) if f and f != "nan"]
        row["seed"] = int(row["seed"])
        out.append(SweepRecord.from_dict(row))
    return out


def write_manifest(path: str, numerics: Dict[str, Any], records: Iterable[SweepRecord], extra: Optional[Dict[str, Any]] = None) -> str:
    """
    Manifest next to the CSV. Everything outside the "timing" block is a pure function of
    the inputs; "timing" (creation time, wall times) is the only part that differs across reruns.
    """
    recs = sort_records(records)
    manifest: Dict[str, Any] = {
        "code_version": __version__,
        "numerics": numerics,
        "record_count": len(recs),
        "columns": CSV_COLUMNS,
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
        "timing": {
            "created": datetime.now(timezone.utc).isoformat(),
            "wall_time_total_s": float(sum(r.wall_time_s for r in recs)),
            "wall_time_s": {r.key: r.wall_time_s for r in recs},
        },
    }
    if extra:
        manifest.update(extra)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(json_safe(manifest), f, indent=2, sort_keys=True)
    return path
