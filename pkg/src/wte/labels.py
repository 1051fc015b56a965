"""Label atlas: a joint Euclidean embedding of every class across a task collection.

All (dataset, label) pairs are embedded together so that squared Euclidean
distance between label vectors approximates the squared Gaussian Wasserstein
distance between the class-conditional distributions. Each sample is then
augmented by concatenating its label vector, moving the hierarchical ground
cost into a plain squared-Euclidean one.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .errors import PersistenceError, UnknownLabelError, ValidationError
from .mds import mds_embed
from .ot import bures_wasserstein2

ATLAS_MAGIC = b"WTEA"
ATLAS_VERSION = 1

DEFAULT_MDS_DIM = 10


@dataclass
class LabelAtlas:
    """Joint label embedding for one task collection.

    entries[k] is the (dataset id, label id) behind row k of both the squared
    label-distance matrix and the coordinate matrix.
    """

    entries: tuple
    bures2_matrix: np.ndarray
    coords: np.ndarray
    mds_stress: float
    l: int
    residual_rel: float
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.entries = tuple((str(ds), int(lab)) for ds, lab in self.entries)
        self._index = {key: row for row, key in enumerate(self.entries)}
        if len(self._index) != len(self.entries):
            raise ValidationError("duplicate (dataset, label) entry in atlas")

    @property
    def n_entries(self) -> int:
        return len(self.entries)

    def row_of(self, dataset_id: str, label: int) -> int:
        key = (str(dataset_id), int(label))
        if key not in self._index:
            raise UnknownLabelError(f"no atlas entry for dataset {key[0]!r} label {key[1]}")
        return self._index[key]

    def coords_for(self, dataset_id: str, label: int) -> np.ndarray:
        return self.coords[self.row_of(dataset_id, label)]


def build_atlas(stats, l: int = DEFAULT_MDS_DIM) -> LabelAtlas:
    """Embed all class Gaussians jointly: pairwise squared Wasserstein, then MDS.

    Entries are sorted by (dataset id, label id) before embedding, so the
    atlas does not depend on the order tasks were supplied.
    """
    stats = sorted(stats, key=lambda s: (str(s.label_key[0]), int(s.label_key[1])))
    k = len(stats)
    if k < 2:
        raise ValueError("an atlas needs at least two labels")
    if not 1 <= l <= k:
        raise ValueError(f"embedding dimension l={l} must be in [1, {k}]")
    keys = [s.label_key for s in stats]
    if len(set(keys)) != k:
        raise ValidationError("duplicate (dataset, label) keys in statistics")

    bures2 = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            bures2[i, j] = bures2[j, i] = bures_wasserstein2(stats[i], stats[j])

    emb = mds_embed(np.sqrt(bures2), l)
    return LabelAtlas(
        entries=tuple(keys),
        bures2_matrix=bures2,
        coords=emb.coords,
        mds_stress=emb.stress,
        l=l,
        residual_rel=emb.residual_rel,
    )


@dataclass
class AugmentedTask:
    """Task samples concatenated with their label vectors, in R^(d+l)."""

    dataset_id: str
    points: np.ndarray
    d: int
    l: int


def augment(ds: LabeledDataset, atlas: LabelAtlas) -> AugmentedTask:
    """Stack each sample with the atlas vector of its label."""
    rows = np.array([atlas.row_of(ds.name, int(lab)) for lab in ds.labels])
    points = np.hstack([ds.samples, atlas.coords[rows]])
    return AugmentedTask(dataset_id=ds.name, points=points, d=ds.dim, l=atlas.l)


def save_atlas(atlas: LabelAtlas, path) -> None:
    k = atlas.n_entries
    parts = [struct.pack("<4sIII", ATLAS_MAGIC, ATLAS_VERSION, k, atlas.l)]
    parts.append(struct.pack("<dd", atlas.mds_stress, atlas.residual_rel))
    for name, label in atlas.entries:
        blob = name.encode("utf-8")
        parts.append(struct.pack("<I", len(blob)))
        parts.append(blob)
        parts.append(struct.pack("<I", label))
    parts.append(np.ascontiguousarray(atlas.bures2_matrix, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(atlas.coords, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_atlas(path) -> LabelAtlas:
    blob = Path(path).read_bytes()
    try:
        magic, version, k, l = struct.unpack_from("<4sIII", blob)
        if magic != ATLAS_MAGIC:
            raise PersistenceError(f"bad atlas magic {magic!r}")
        if version != ATLAS_VERSION:
            raise PersistenceError(f"unsupported atlas version {version}")
        offset = struct.calcsize("<4sIII")
        stress_val, residual_rel = struct.unpack_from("<dd", blob, offset)
        offset += struct.calcsize("<dd")
        entries = []
        for _ in range(k):
            (name_len,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (label,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            entries.append((name, label))
        bures2 = np.frombuffer(blob, dtype="<f8", count=k * k, offset=offset).reshape(k, k)
        offset += 8 * k * k
        coords = np.frombuffer(blob, dtype="<f8", count=k * l, offset=offset).reshape(k, l)
        offset += 8 * k * l
    except struct.error as exc:
        raise PersistenceError(f"truncated atlas file: {exc}") from exc
    if offset != len(blob):
        raise PersistenceError(f"atlas file has {len(blob) - offset} trailing bytes")
    return LabelAtlas(
        entries=tuple(entries),
        bures2_matrix=bures2.copy(),
        coords=coords.copy(),
        mds_stress=float(stress_val),
        l=int(l),
        residual_rel=float(residual_rel),
    )
