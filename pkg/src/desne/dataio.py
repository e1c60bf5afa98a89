"""Dataset loading, normalization, and coreset manifest persistence."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "DatasetMatrix",
    "CoresetSelection",
    "load_dataset",
    "save_raw_f32",
    "normalize",
    "target_count",
    "write_selection",
    "read_selection",
    "dump_json",
]

FORMATS = ("cifar-binary", "raw-f32", "csv")
CIFAR_DIMS = (32, 32, 3)


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DatasetMatrix:
    """N samples by D features, read-only after construction."""

    data: np.ndarray
    labels: np.ndarray | None = None
    dims: tuple = ()
    source_id: str = ""

    def __post_init__(self):
        data = _frozen(self.data, np.float64)
        if data.ndim != 2:
            raise DataError("data must be a 2-D matrix")
        n, d = data.shape
        if n < 2 or d < 1:
            raise DataError(f"need N >= 2 and D >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("data contains non-finite entries")
        object.__setattr__(self, "data", data)
        if self.labels is not None:
            labels = _frozen(self.labels, np.int64)
            if labels.shape != (n,):
                raise DataError("labels length must equal N")
            object.__setattr__(self, "labels", labels)
        if not self.dims:
            object.__setattr__(self, "dims", (d,))
        else:
            object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    def label_vector(self):
        """Labels with -1 where absent."""
        if self.labels is None:
            return np.full(self.n, -1, dtype=np.int64)
        return self.labels

    def subset(self, idx):
        idx = np.asarray(idx)
        labels = None if self.labels is None else self.labels[idx]
        return DatasetMatrix(self.data[idx], labels, self.dims, self.source_id)


def target_count(keeping_ratio, n):
    """round(keeping_ratio * n) with halves rounded up, computed exactly."""
    kr = Fraction(repr(float(keeping_ratio)))
    return int((kr * n + Fraction(1, 2)) // 1)


@dataclass(frozen=True, eq=False)
class CoresetSelection:
    indices: np.ndarray
    keeping_ratio: float
    cell_of: dict = field(default_factory=dict)
    seed: int = 0
    source_id: str = ""
    labels: dict = field(default_factory=dict)
    n: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        idx = _frozen(self.indices, np.int64)
        if idx.ndim != 1:
            raise DataError("indices must be a vector")
        if idx.size and np.any(np.diff(idx) <= 0):
            raise DataError("indices must be strictly increasing")
        if idx.size and idx[0] < 0:
            raise DataError("negative index")
        if not 0.0 < self.keeping_ratio <= 1.0:
            raise DataError("keeping_ratio must lie in (0, 1]")
        if self.n is not None:
            if idx.size and idx[-1] >= self.n:
                raise DataError("index out of bounds")
            if idx.size != target_count(self.keeping_ratio, self.n):
                raise DataError("selection size does not match round(KR * N)")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "cell_of", {int(k): int(v) for k, v in self.cell_of.items()})
        object.__setattr__(
            self, "labels", {int(k): int(v) for k, v in self.labels.items() if v != -1}
        )

    def __eq__(self, other):
        if not isinstance(other, CoresetSelection):
            return NotImplemented
        return (
            np.array_equal(self.indices, other.indices)
            and self.keeping_ratio == other.keeping_ratio
            and self.cell_of == other.cell_of
            and self.seed == other.seed
            and self.source_id == other.source_id
            and self.labels == other.labels
            and self.n == other.n
        )


# ---------------------------------------------------------------- loading


def _load_cifar(path, dims=CIFAR_DIMS):
    record = 1 + int(np.prod(dims))
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % record:
        raise DataError(
            f"{path}: {raw.size} bytes is not a whole number of {record}-byte records"
        )
    recs = raw.reshape(-1, record)
    labels = recs[:, 0].astype(np.int64)
    pixels = recs[:, 1:].astype(np.float64) / 255.0
    return DatasetMatrix(pixels, labels, dims, Path(path).name)


def _header_path(path):
    return Path(str(path) + ".json")


def _load_raw_f32(path):
    hpath = _header_path(path)
    try:
        header = json.loads(hpath.read_text())
    except FileNotFoundError:
        raise DataError(f"missing sidecar header {hpath}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"bad sidecar header {hpath}: {exc}") from None
    try:
        n, d = int(header["n"]), int(header["d"])
    except (KeyError, TypeError, ValueError):
        raise DataError(f"{hpath}: header needs integer n and d") from None
    order = {"little": "<", "big": ">"}.get(header.get("endianness", "little"))
    if order is None:
        raise DataError(f"{hpath}: unknown endianness {header.get('endianness')!r}")
    payload = Path(path).read_bytes()
    if len(payload) != 4 * n * d:
        raise DataError(
            f"{path}: header declares {n}x{d} floats ({4 * n * d} bytes), "
            f"payload has {len(payload)}"
        )
    data = np.frombuffer(payload, dtype=order + "f4").reshape(n, d)
    labels = header.get("labels")
    dims = tuple(header.get("dims") or (d,))
    return DatasetMatrix(data, labels, dims, Path(path).name)


def save_raw_f32(m, path):
    """Write ``m`` as little-endian float32 plus its sidecar header."""
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(m.data, dtype="<f4").tobytes())
    header = {"n": m.n, "d": m.d, "dims": list(m.dims), "endianness": "little"}
    if m.labels is not None:
        header["labels"] = m.labels.tolist()
    dump_json(header, _header_path(path))


def _load_csv(path, label_column=None):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric cell in {row!r}") from None
    if len({len(r) for r in rows}) > 1:
        raise DataError(f"{path}: rows have differing column counts")
    arr = np.array(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DataError(f"{path}: empty csv")
    if label_column is None:
        # A trailing column is treated as labels only when it is integral and
        # there are other feature columns left.
        last = arr[:, -1]
        label_column = arr.shape[1] > 2 and bool(
            np.all(last == np.round(last)) and np.all(last >= 0)
        )
    labels = None
    if label_column:
        labels = arr[:, -1].astype(np.int64)
        arr = arr[:, :-1]
    return DatasetMatrix(arr, labels, (arr.shape[1],), Path(path).name)


def load_dataset(path, format, label_column=None):
    """Load ``path`` as one of ``cifar-binary``, ``raw-f32`` or ``csv``.

    CIFAR pixel bytes are scaled by 1/255. For csv, ``label_column`` forces
    (True) or forbids (False) treating the last column as labels; ``None``
    guesses from the values.
    """
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    if format == "cifar-binary":
        return _load_cifar(path)
    if format == "raw-f32":
        return _load_raw_f32(path)
    if format == "csv":
        return _load_csv(path, label_column)
    raise DataError(f"unknown format {format!r}; expected one of {FORMATS}")


def normalize(m, mode="unit-range"):
    if mode == "none":
        return m
    x = m.data
    if mode == "unit-range":
        lo, hi = x.min(), x.max()
        if hi == lo:
            return m
        out = (x - lo) / (hi - lo)
    elif mode == "per-feature-standardize":
        mu = x.mean(axis=0)
        sd = x.std(axis=0)
        safe = np.where(sd > 0, sd, 1.0)
        out = np.where(sd > 0, (x - mu) / safe, 0.0)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    return DatasetMatrix(out, m.labels, m.dims, m.source_id)


# ------------------------------------------------------------- manifests


def _fmt_float(v):
    return float(f"{v:.17g}")


def dump_json(obj, path):
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    text = json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def selection_to_dict(sel):
    idx = sel.indices.tolist()
    out = {
        "source_id": sel.source_id,
        "seed": int(sel.seed),
        "keeping_ratio": _fmt_float(sel.keeping_ratio),
        "n": sel.n,
        "indices": idx,
        "cell_ids": [sel.cell_of.get(i, -1) for i in idx],
        "labels": [sel.labels.get(i, -1) for i in idx],
    }
    out.update(sel.extra)
    return out


def write_selection(sel, path):
    path = Path(path)
    if path.is_dir():
        raise DataError(f"{path} is a directory")
    if not path.parent.is_dir():
        raise DataError(f"directory {path.parent} does not exist")
    dump_json(selection_to_dict(sel), path)
    return path


def read_selection(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"no such manifest: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid manifest json: {exc}") from None
    try:
        idx = doc["indices"]
        cells = dict(zip(idx, doc.get("cell_ids", [])))
        labels = {i: l for i, l in zip(idx, doc.get("labels", [])) if l != -1}
        extra = {
            k: v
            for k, v in doc.items()
            if k not in {"source_id", "seed", "keeping_ratio", "n", "indices", "cell_ids", "labels"}
        }
        return CoresetSelection(
            indices=np.array(idx, dtype=np.int64),
            keeping_ratio=float(doc["keeping_ratio"]),
            cell_of={i: c for i, c in cells.items() if c != -1},
            seed=int(doc["seed"]),
            source_id=doc.get("source_id", ""),
            labels=labels,
            n=doc.get("n"),
            extra=extra,
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: manifest missing field {exc}") from None
