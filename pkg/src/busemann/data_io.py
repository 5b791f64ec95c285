"""Datasets, splits, and on-disk formats (CSV, IDX, JSON checkpoints)."""

from __future__ import annotations

import csv
import json
import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError
from .prototypes import PrototypeSet, Provenance, project_to_boundary

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CHECKPOINT_SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[0] < 1:
            raise InvalidInputError(f"features must be a non-empty (n, I) array, got {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidInputError(f"need {X.shape[0]} labels, got shape {y.shape}")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(y == np.round(y)):
                raise InvalidInputError("labels must be integers")
        y = y.astype(np.int64)
        if y.min() < 0 or y.max() >= self.class_count:
            raise InvalidInputError(f"labels must lie in [0, {self.class_count})")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx, name: str | None = None) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.class_count,
                       name or self.name)


@dataclass(frozen=True)
class SplitSpec:
    validation_fraction: float = 0.2
    seed: int = 0
    stratified: bool = True


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise FormatError(f"row {row}: non-numeric cell {cell!r} in column {col}") from None


def load_csv(path, label_column=-1, name: str | None = None) -> Dataset:
    """Read a numeric table with one integer label column.

    A first row made only of non-numeric cells is treated as a header, in
    which case ``label_column`` may also be a column name.  Row numbers in
    error messages are 1-based file lines.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: no data rows")

    header = None
    first = rows[0]

    def numeric(c):
        try:
            float(c)
            return True
        except ValueError:
            return False

    if not any(numeric(c) for c in first):
        header = [c.strip() for c in first]
        rows = rows[1:]
        if not rows:
            raise FormatError(f"{path}: header but no data rows")
    start_line = 2 if header else 1

    width = len(rows[0])
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None or label_column not in header:
            raise InvalidInputError(f"label column {label_column!r} not found in header")
        col = header.index(label_column)
    else:
        col = int(label_column)
        if not -width <= col < width:
            raise InvalidInputError(f"label column {col} out of range for {width} columns")
        col %= width

    feats, labels = [], []
    for i, r in enumerate(rows):
        line = start_line + i
        if len(r) != width:
            raise FormatError(f"row {line}: expected {width} cells, found {len(r)}")
        vals = [_parse_float(c.strip(), line, j) for j, c in enumerate(r)]
        lab = vals.pop(col)
        if not math.isfinite(lab) or lab != int(lab):
            raise FormatError(f"row {line}: label {r[col]!r} is not an integer")
        if lab < 0:
            raise FormatError(f"row {line}: negative label {int(lab)}")
        if not all(math.isfinite(v) for v in vals):
            raise FormatError(f"row {line}: non-finite feature value")
        feats.append(vals)
        labels.append(int(lab))

    if width < 2:
        raise FormatError(f"{path}: need at least one feature column besides the label")
    labels = np.asarray(labels, dtype=np.int64)
    C = int(labels.max()) + 1
    unseen = sorted(set(range(C)) - set(labels.tolist()))
    if unseen:
        warnings.warn(f"{path}: classes {unseen} have no examples (C={C} from max label)")
    return Dataset(np.asarray(feats), labels, C, name or path.stem)


def _read_idx(path: Path, magic: int, ndim: int):
    data = Path(path).read_bytes()
    if len(data) < 4 + 4 * ndim:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    (got,) = struct.unpack(">I", data[:4])
    if got != magic:
        raise FormatError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", data[4:4 + 4 * ndim])
    body = data[4 + 4 * ndim:]
    expected = int(np.prod(dims))
    if len(body) < expected:
        raise FormatError(f"{path}: truncated payload, {len(body)} of {expected} bytes")
    if len(body) > expected:
        raise FormatError(f"{path}: {len(body) - expected} trailing bytes after payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path, name: str | None = None) -> Dataset:
    """Load an IDX image/label pair (the MNIST distribution format)."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"image count {images.shape[0]} does not match label count {labels.shape[0]}"
        )
    if images.shape[0] == 0:
        raise FormatError(f"{images_path}: contains no images")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = labels.astype(np.int64)
    return Dataset(X, y, int(y.max()) + 1, name or Path(images_path).stem)


def synthetic_blobs(C: int, I: int, per_class: int, center_scale: float = 5.0,
                    noise_sigma: float = 1.0, seed: int = 0) -> Dataset:
    """Isotropic Gaussian clusters around seeded centers on a sphere of radius
    ``center_scale``.

    When ``C <= I`` the centers are a randomly rotated orthonormal frame
    (one-hot directions up to rotation), so every pair of centers sits at
    distance ``sqrt(2) * center_scale``.  Otherwise directions are drawn
    independently.  Examples are grouped by class.
    """
    if C < 2 or per_class < 1 or I < 1:
        raise InvalidInputError(f"need C >= 2, I >= 1, per_class >= 1 (got {C}, {I}, {per_class})")
    if noise_sigma < 0 or center_scale < 0:
        raise InvalidInputError("center_scale and noise_sigma must be non-negative")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((I, C) if C <= I else (C, I))
    if C <= I:
        Q, R = np.linalg.qr(G)
        centers = (Q * np.sign(np.diag(R))).T
    else:
        centers = G / np.linalg.norm(G, axis=1, keepdims=True)
    centers = center_scale * centers
    labels = np.repeat(np.arange(C), per_class)
    X = centers[labels] + noise_sigma * rng.standard_normal((C * per_class, I))

    gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    off = gaps[~np.eye(C, dtype=bool)]
    info = {"min_center_distance": float(off.min()),
            "mean_center_distance": float(off.mean())}
    return Dataset(X, labels, C, f"blobs-{C}x{I}-s{seed}", info)


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Partition into (train, validation); indices keep their original order."""
    if not 0.0 < spec.validation_fraction < 1.0:
        raise InvalidInputError(f"validation fraction must lie in (0, 1), got {spec.validation_fraction}")
    rng = np.random.default_rng(spec.seed)
    n = len(data)
    if spec.stratified:
        val = []
        for c in range(data.class_count):
            members = np.flatnonzero(data.labels == c)
            if members.size == 0:
                continue
            k = int(round(spec.validation_fraction * members.size))
            val.append(rng.permutation(members)[:k])
        val_idx = np.concatenate(val) if val else np.empty(0, dtype=np.int64)
    else:
        k = int(round(spec.validation_fraction * n))
        val_idx = rng.permutation(n)[:k]
    mask = np.zeros(n, dtype=bool)
    mask[val_idx] = True
    if mask.all() or not mask.any():
        raise InvalidInputError(
            f"validation fraction {spec.validation_fraction} leaves a split empty for n={n}"
        )
    return (data.subset(np.flatnonzero(~mask), f"{data.name}-train"),
            data.subset(np.flatnonzero(mask), f"{data.name}-val"))


def fit_standardizer(data: Dataset) -> dict:
    mean = data.features.mean(axis=0)
    std = data.features.std(axis=0)
    std[std == 0.0] = 1.0
    return {"mean": mean.tolist(), "std": std.tolist()}


def apply_standardizer(data: Dataset, norm: dict | None) -> Dataset:
    if not norm:
        return data
    mean = np.asarray(norm["mean"])
    std = np.asarray(norm["std"])
    if mean.shape != (data.input_dim,):
        raise InvalidInputError(
            f"normalization has {mean.size} features, dataset has {data.input_dim}"
        )
    return Dataset((data.features - mean) / std, data.labels, data.class_count, data.name)


def parse_data_spec(spec: str) -> Dataset:
    """Resolve ``csv:PATH[:LABELCOL]``, ``idx:IMAGES:LABELS`` or
    ``blobs:C,I,per_class,scale,sigma,seed``."""
    kind, _, rest = spec.partition(":")
    if kind == "csv":
        path, sep, col = rest.rpartition(":")
        if not sep or not path:
            path, col = rest, "-1"
        return load_csv(path, col)
    if kind == "idx":
        images, sep, labels = rest.partition(":")
        if not sep:
            raise InvalidInputError("idx spec needs idx:IMAGES:LABELS")
        return load_idx(images, labels)
    if kind == "blobs":
        parts = rest.split(",")
        if len(parts) != 6:
            raise InvalidInputError("blobs spec needs blobs:C,I,per_class,scale,sigma,seed")
        try:
            C, I, per = (int(p) for p in parts[:3])
            scale, sigma = float(parts[3]), float(parts[4])
            seed = int(parts[5])
        except ValueError as exc:
            raise InvalidInputError(f"bad blobs spec {spec!r}: {exc}") from None
        return synthetic_blobs(C, I, per, scale, sigma, seed)
    raise InvalidInputError(f"unknown data spec kind {kind!r} (expected csv, idx or blobs)")


# -- prototype CSV -----------------------------------------------------------

def write_prototypes(path, protos: PrototypeSet) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        for label, row in zip(protos.labels, protos.points):
            w.writerow([int(label)] + [f"{v:.17g}" for v in row])


def read_prototypes(path, project: bool = False) -> PrototypeSet:
    """Read a prototype CSV (label, then ``d`` coordinates per row).

    With ``project=True`` rows are l2-normalized, which is how externally
    produced (e.g. hierarchy-derived) prototypes are brought to the boundary.
    """
    labels, rows = [], []
    with Path(path).open(newline="") as fh:
        for i, r in enumerate(csv.reader(fh), start=1):
            if not r or not any(c.strip() for c in r):
                continue
            if len(r) < 2:
                raise FormatError(f"{path} row {i}: need a label and at least one coordinate")
            vals = [_parse_float(c.strip(), i, j) for j, c in enumerate(r)]
            if vals[0] != int(vals[0]):
                raise FormatError(f"{path} row {i}: label {r[0]!r} is not an integer")
            labels.append(int(vals[0]))
            rows.append(vals[1:])
    if len({len(r) for r in rows}) > 1:
        raise FormatError(f"{path}: rows have differing dimensions")
    if project:
        return project_to_boundary(rows, labels)
    try:
        return PrototypeSet(np.asarray(rows), Provenance.EXTERNAL_PROJECTED, labels)
    except InvalidInputError as exc:
        raise FormatError(f"{path}: {exc}") from None


# -- checkpoints and metrics -------------------------------------------------

def write_checkpoint(path, doc: dict) -> None:
    # json emits the shortest repr of each float, which round-trips exactly
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


_REQUIRED_KEYS = {"schema_version", "input_dim", "output_dim", "layers", "penalty_slope",
                  "prototype_file_reference", "training_config", "final_metrics"}


def read_checkpoint(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: checkpoint must be a JSON object")
    missing = _REQUIRED_KEYS - doc.keys()
    if missing:
        raise FormatError(f"{path}: checkpoint missing fields {sorted(missing)}")
    if doc["schema_version"] != CHECKPOINT_SCHEMA_VERSION:
        raise FormatError(f"{path}: unsupported schema_version {doc['schema_version']!r}")
    return doc


def append_metrics(path, record: dict) -> None:
    with Path(path).open("a") as fh:
        fh.write(json.dumps(record) + "\n")


def read_metrics(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
