"""Canonical JSON, JSON-lines and binary sidecar helpers."""

import dataclasses
import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional, Union

import numpy as np


def to_jsonable(obj: Any) -> Any:
    """Convert numpy/dataclass/enum values into plain JSON types.

    NaN becomes null; infinities become the strings "Infinity"/"-Infinity".
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "Infinity" if obj > 0 else "-Infinity"
        return obj
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(dataclasses.asdict(obj))
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def from_json_float(value: Any) -> float:
    """Inverse of the float encoding used by to_jsonable."""
    if value is None:
        return math.nan
    if value == "Infinity":
        return math.inf
    if value == "-Infinity":
        return -math.inf
    return float(value)


def canonical_json(obj: Any, indent: Optional[int] = None) -> str:
    """Serialize with sorted keys and shortest round-trip floats."""
    separators = (",", ":") if indent is None else (",", ": ")
    return json.dumps(
        to_jsonable(obj),
        sort_keys=True,
        separators=separators,
        indent=indent,
        allow_nan=False,
        ensure_ascii=False,
    )


def sha256_digest(data: Union[bytes, str, Path]) -> str:
    """Hex sha256 of raw bytes, a string, or a file's contents."""
    if isinstance(data, Path):
        h = hashlib.sha256()
        with data.open("rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        return h.hexdigest()
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def write_json(path: Path, obj: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj, indent=2) + "\n", encoding="utf-8")
    return path


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


class JsonLinesWriter:
    """Append one canonical JSON record per line, flushing after each."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._fh = None
        self.count = 0

    def __enter__(self) -> "JsonLinesWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", encoding="utf-8")
        return self

    def write(self, record: Any) -> None:
        if self._fh is None:
            raise RuntimeError("JsonLinesWriter used outside its context")
        self._fh.write(canonical_json(record) + "\n")
        self._fh.flush()
        self.count += 1

    def write_all(self, records: Iterable[Any]) -> None:
        for record in records:
            self.write(record)

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def write_sidecar(path: Path, array: np.ndarray) -> tuple[int, ...]:
    """Write a matrix as little-endian float64, row-major. Returns its shape."""
    data = np.ascontiguousarray(array, dtype="<f8")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data.tobytes(order="C"))
    return tuple(int(n) for n in data.shape)


def read_sidecar(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    data = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    expected = int(np.prod(shape))
    if data.size != expected:
        raise ValueError(
            f"Sidecar {path} holds {data.size} values, expected {expected} for shape {shape}"
        )
    return data.reshape(shape).astype(np.float64)
