"""Labeled task ingestion and per-class Gaussian statistics.

A task is a labeled classification dataset: N feature rows plus one integer
label per row. Two on-disk formats are supported:

* CSV: one row per sample, d real feature columns followed by one integer
  label column. Lines starting with '#' are comments.
* raw-f32: little-endian binary with header (magic "WTED", u32 version=1,
  u32 N, u32 d, u32 J) followed by N*d float32 features then N uint32 labels.

Per-class means and covariances use population (divide-by-n) formulas, since
each class is treated as a fixed empirical measure, plus a small ridge so the
covariances stay numerically PSD.
"""

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .numerics import symmetrize

RAW_MAGIC = b"WTED"
RAW_VERSION = 1
_RAW_HEADER = struct.Struct("<4sIIII")

DEFAULT_COV_REG_SCALE = 1e-6


@dataclass
class LabeledDataset:
    """N samples in d-dimensional feature space with integer class labels.

    Labels must cover [0, J) with every class nonempty; features must be
    finite. Arrays are frozen after validation.
    """

    name: str
    samples: np.ndarray
    labels: np.ndarray
    label_names: tuple = ()

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ValidationError(f"samples must be a nonempty 2-D array, got shape {self.samples.shape}")
        if self.labels.shape != (self.samples.shape[0],):
            raise ValidationError("labels must be one integer per sample row")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError(f"dataset {self.name!r} contains NaN or Inf features")
        if self.labels.min() < 0:
            raise ValidationError(f"dataset {self.name!r} has a negative label")
        n_labels = int(self.labels.max()) + 1
        present = np.bincount(self.labels, minlength=n_labels)
        missing = np.flatnonzero(present == 0)
        if missing.size:
            raise ValidationError(
                f"dataset {self.name!r}: label {int(missing[0])} never occurs (labels must cover [0, J))"
            )
        if not self.label_names:
            self.label_names = tuple(str(j) for j in range(n_labels))
        elif len(self.label_names) != n_labels:
            raise ValidationError(
                f"dataset {self.name!r}: {len(self.label_names)} label names for {n_labels} labels"
            )
        self.samples.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def n_labels(self) -> int:
        return len(self.label_names)

    def class_indices(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


@dataclass
class GaussianLabelStats:
    """Mean and covariance of one class, the Gaussian surrogate for its label distribution."""

    label_key: tuple
    count: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        if self.count < 1:
            raise ValidationError("class statistics require at least one sample")
        if self.cov.shape != (self.mean.shape[0], self.mean.shape[0]):
            raise ValidationError("covariance shape does not match the mean")


def ingest(path, fmt: str = "auto") -> LabeledDataset:
    """Load and validate a task file; `fmt` is one of auto, csv, raw-f32.

    In auto mode the raw-f32 magic is sniffed, anything else parses as CSV.
    """
    path = Path(path)
    if fmt == "auto":
        try:
            with open(path, "rb") as fh:
                fmt = "raw-f32" if fh.read(4) == RAW_MAGIC else "csv"
        except OSError as exc:
            raise ParseError(f"cannot open file: {exc}", path=path) from exc
    if fmt == "csv":
        return _ingest_csv(path)
    if fmt == "raw-f32":
        return _ingest_raw(path)
    raise ValueError(f"unknown format {fmt!r}")


def _ingest_csv(path: Path) -> LabeledDataset:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # loadtxt warns on empty input; we raise below
            raw = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise ParseError(f"cannot open file: {exc}", path=path) from exc
    except ValueError:
        raise _locate_csv_fault(path) from None
    if raw.size == 0:
        raise ParseError("empty file", path=path)
    if raw.shape[1] < 2:
        raise ParseError("need at least one feature column plus a label column", path=path)
    features = raw[:, :-1]
    label_col = raw[:, -1]
    bad = np.flatnonzero((label_col != np.floor(label_col)) | ~np.isfinite(label_col))
    if bad.size:
        raise ParseError(
            f"label column value {label_col[bad[0]]!r} is not an integer",
            path=path,
            line=_data_line_number(path, int(bad[0])),
        )
    if label_col.min() < 0:
        row = int(np.argmin(label_col))
        raise ParseError("negative label", path=path, line=_data_line_number(path, row))
    if not np.all(np.isfinite(features)):
        row = int(np.flatnonzero(~np.isfinite(features).all(axis=1))[0])
        raise ParseError("non-finite feature value", path=path, line=_data_line_number(path, row))
    try:
        return LabeledDataset(path.stem, features, label_col.astype(np.int64))
    except ValidationError as exc:
        raise ParseError(str(exc), path=path) from exc


def _locate_csv_fault(path: Path) -> ParseError:
    """Rescan a CSV that numpy rejected and name the offending line."""
    width = None
    try:
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                cells = text.split(",")
                if width is None:
                    width = len(cells)
                elif len(cells) != width:
                    return ParseError(
                        f"row has {len(cells)} columns, expected {width}", path=path, line=lineno
                    )
                for cell in cells:
                    try:
                        float(cell)
                    except ValueError:
                        return ParseError(f"malformed value {cell.strip()!r}", path=path, line=lineno)
    except OSError as exc:
        return ParseError(f"cannot open file: {exc}", path=path)
    return ParseError("malformed CSV", path=path)


def _data_line_number(path: Path, row_index: int) -> int:
    """Map a data-row index back to its 1-based line number, skipping comments."""
    seen = -1
    try:
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                seen += 1
                if seen == row_index:
                    return lineno
    except OSError:
        pass
    return row_index + 1


def _ingest_raw(path: Path) -> LabeledDataset:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot open file: {exc}", path=path) from exc
    if len(blob) < _RAW_HEADER.size:
        raise ParseError("truncated header", path=path, offset=len(blob))
    magic, version, n, d, n_labels = _RAW_HEADER.unpack_from(blob)
    if magic != RAW_MAGIC:
        raise ParseError(f"bad magic {magic!r}", path=path, offset=0)
    if version != RAW_VERSION:
        raise ParseError(f"unsupported version {version}", path=path, offset=4)
    expected = _RAW_HEADER.size + 4 * n * d + 4 * n
    if len(blob) != expected:
        raise ParseError(
            f"payload is {len(blob)} bytes, header implies {expected}", path=path, offset=len(blob)
        )
    features = np.frombuffer(blob, dtype="<f4", count=n * d, offset=_RAW_HEADER.size)
    labels = np.frombuffer(blob, dtype="<u4", count=n, offset=_RAW_HEADER.size + 4 * n * d)
    if labels.size and labels.max() >= n_labels:
        idx = int(np.argmax(labels >= n_labels))
        raise ParseError(
            f"label {int(labels[idx])} out of range [0, {n_labels})",
            path=path,
            offset=_RAW_HEADER.size + 4 * n * d + 4 * idx,
        )
    features = features.astype(np.float64).reshape(n, d) if n else np.empty((0, d))
    if n == 0:
        raise ParseError("empty file (N=0)", path=path)
    if not np.all(np.isfinite(features)):
        row = int(np.flatnonzero(~np.isfinite(features).all(axis=1))[0])
        raise ParseError("non-finite feature value", path=path, line=row + 1)
    try:
        return LabeledDataset(
            Path(path).stem,
            features,
            labels.astype(np.int64),
            tuple(str(j) for j in range(n_labels)),
        )
    except ValidationError as exc:
        raise ParseError(str(exc), path=path) from exc


def write_raw_f32(ds: LabeledDataset, path) -> None:
    """Write the raw-f32 format; features are truncated to float32."""
    path = Path(path)
    header = _RAW_HEADER.pack(RAW_MAGIC, RAW_VERSION, ds.n_samples, ds.dim, ds.n_labels)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(ds.samples, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(ds.labels, dtype="<u4").tobytes())


def write_csv(ds: LabeledDataset, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {ds.name}: N={ds.n_samples} d={ds.dim} J={ds.n_labels}\n")
        for row, label in zip(ds.samples, ds.labels):
            fh.write(",".join(f"{x:.17g}" for x in row) + f",{int(label)}\n")


def subsample(ds: LabeledDataset, n_per_class: int, seed: int) -> LabeledDataset:
    """Take min(n_per_class, class size) rows per class via a seeded shuffle.

    Output rows are regrouped by class; the same seed always yields the same
    dataset.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    keep = []
    for j in range(ds.n_labels):
        idx = ds.class_indices(j)
        perm = rng.permutation(idx.size)
        keep.append(idx[perm[: min(n_per_class, idx.size)]])
    keep = np.concatenate(keep)
    return LabeledDataset(ds.name, ds.samples[keep], ds.labels[keep], ds.label_names)


def default_cov_reg(ds: LabeledDataset) -> float:
    """Default covariance ridge: 1e-6 times the mean per-feature variance."""
    return DEFAULT_COV_REG_SCALE * float(np.mean(np.var(ds.samples, axis=0)))


def class_stats(ds: LabeledDataset, reg: float | None = None) -> list:
    """Per-class Gaussian statistics: sample mean and biased covariance + reg*I.

    `reg=None` picks the default ridge from the dataset's feature variances;
    singleton classes come out as cov = reg*I.
    """
    if reg is None:
        reg = default_cov_reg(ds)
    if reg < 0:
        raise ValueError("covariance regularization must be >= 0")
    out = []
    eye = np.eye(ds.dim)
    for j in range(ds.n_labels):
        rows = ds.samples[ds.labels == j]
        mean = rows.mean(axis=0)
        centered = rows - mean
        cov = symmetrize(centered.T @ centered / rows.shape[0] + reg * eye)
        out.append(GaussianLabelStats((ds.name, j), rows.shape[0], mean, cov))
    return out
