"""Task embedding against a fixed reference distribution.

Each augmented task is coupled to the reference by one exact OT solve, the
plan is collapsed to a Monge-map approximation by barycentric projection, and
the embedding is the normalized displacement field (T - X0)/sqrt(M). The
reference itself embeds to exactly zero, and Frobenius distance between two
embeddings approximates the 2-Wasserstein distance between the tasks.

Embeddings carry a content hash of their reference; distances between
embeddings built against different references are refused.
"""

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    IncompatibleEmbeddingError,
    PersistenceError,
)
from .labels import AugmentedTask
from .ot import DiscreteMeasure, barycentric_project, solve_exact

REFERENCE_MAGIC = b"WTER"
REFERENCE_VERSION = 1
EMBEDDING_MAGIC = b"WTEV"
EMBEDDING_VERSION = 1

PROVENANCE_CODES = {"smooth-image": 0, "uniform-box": 1, "user-supplied": 2}
_CODE_TO_PROVENANCE = {v: k for k, v in PROVENANCE_CODES.items()}


def hash_points(points: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(struct.pack("<II", *points.shape))
    h.update(np.ascontiguousarray(points, dtype="<f8").tobytes())
    return h.hexdigest()


@dataclass
class ReferenceDistribution:
    """Fixed set of M points in the augmented space all tasks embed against."""

    points: np.ndarray
    seed: int
    provenance: str
    content_hash: str = ""

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ValueError(f"reference needs a nonempty 2-D point array, got {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("reference points contain NaN or Inf")
        if self.provenance not in PROVENANCE_CODES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        computed = hash_points(self.points)
        if self.content_hash and self.content_hash != computed:
            raise ValueError("reference content hash does not match its points")
        self.content_hash = computed

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]


@dataclass
class TaskEmbedding:
    """Normalized displacement field of one task relative to a reference."""

    dataset_id: str
    vector: np.ndarray
    reference_hash: str
    ot_cost: float

    def __post_init__(self):
        self.vector = np.ascontiguousarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("embedding contains NaN or Inf")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def _bilinear_upsample(imgs: np.ndarray, out_side: int) -> np.ndarray:
    """Upsample (m, s, s) images to (m, out_side, out_side) bilinearly."""
    m, s, _ = imgs.shape
    if out_side == 1:
        return imgs[:, :1, :1].copy()
    if s == 1:
        return np.repeat(np.repeat(imgs, out_side, axis=1), out_side, axis=2)
    pos = np.linspace(0.0, s - 1.0, out_side)
    i0 = np.floor(pos).astype(np.int64)
    i0 = np.minimum(i0, s - 2)
    w = pos - i0
    rows = imgs[:, i0, :] * (1.0 - w)[None, :, None] + imgs[:, i0 + 1, :] * w[None, :, None]
    return rows[:, :, i0] * (1.0 - w)[None, None, :] + rows[:, :, i0 + 1] * w[None, None, :]


def make_reference(
    m: int,
    d: int,
    l: int,
    seed: int,
    image_side: int | None = None,
    feature_range: tuple = (0.0, 1.0),
    label_box: tuple | None = None,
) -> ReferenceDistribution:
    """Generate a deterministic reference of M points in R^(d+l).

    With `image_side`, the feature block is uniform noise drawn at a quarter
    of the resolution and bilinearly upsampled, which gives the reference
    images smooth spatial structure; otherwise features are plain uniform
    noise. Both are affinely mapped onto `feature_range`. Label coordinates
    default to zero; pass `label_box = (lows, highs)` to draw them uniformly
    from a box instead.
    """
    if m < 1:
        raise ValueError("reference size must be >= 1")
    if d < 1 or l < 0:
        raise ValueError("need d >= 1 and l >= 0")
    rng = np.random.default_rng(seed)
    if image_side is not None:
        if image_side * image_side != d:
            raise ValueError(f"image mode needs d = side^2, got d={d}, side={image_side}")
        low_side = max(1, image_side // 4)
        noise = rng.random((m, low_side, low_side))
        features = _bilinear_upsample(noise, image_side).reshape(m, d)
        provenance = "smooth-image"
    else:
        features = rng.random((m, d))
        provenance = "uniform-box"
    lo, hi = float(feature_range[0]), float(feature_range[1])
    features = lo + (hi - lo) * features
    if l == 0:
        label_part = np.empty((m, 0))
    elif label_box is None:
        label_part = np.zeros((m, l))
    else:
        lows = np.asarray(label_box[0], dtype=np.float64).reshape(l)
        highs = np.asarray(label_box[1], dtype=np.float64).reshape(l)
        label_part = lows + (highs - lows) * rng.random((m, l))
    return ReferenceDistribution(np.hstack([features, label_part]), seed, provenance)


def embed_task(task: AugmentedTask, ref: ReferenceDistribution) -> TaskEmbedding:
    """One exact OT solve from the reference to the task, then the displacement field."""
    if task.points.shape[1] != ref.ambient_dim:
        raise DimensionMismatchError(
            f"task lives in R^{task.points.shape[1]}, reference in R^{ref.ambient_dim}"
        )
    plan, total = solve_exact(DiscreteMeasure(ref.points), DiscreteMeasure(task.points))
    monge = barycentric_project(plan, DiscreteMeasure(task.points))
    vector = (monge.images - ref.points) / np.sqrt(ref.size)
    return TaskEmbedding(task.dataset_id, vector, ref.content_hash, float(total))


def wte_distance(a: TaskEmbedding, b: TaskEmbedding) -> float:
    """Frobenius distance between two embeddings sharing one reference."""
    if a.reference_hash != b.reference_hash:
        raise IncompatibleEmbeddingError(
            "embeddings were built against different references"
        )
    if a.vector.shape != b.vector.shape:
        raise DimensionMismatchError("embedding shapes differ")
    return float(np.linalg.norm(a.vector - b.vector))


def pairwise_distances(embeddings, squared: bool = False) -> np.ndarray:
    """All-pairs embedded distances; a pure array computation, zero OT solves."""
    embeddings = list(embeddings)
    if not embeddings:
        raise ValueError("need at least one embedding")
    out = np.zeros((len(embeddings), len(embeddings)))
    for i in range(len(embeddings)):
        for j in range(i + 1, len(embeddings)):
            v = wte_distance(embeddings[i], embeddings[j])
            out[i, j] = out[j, i] = v * v if squared else v
    return out


# -- persistence ---------------------------------------------------------------


def save_reference(ref: ReferenceDistribution, path) -> None:
    head = struct.pack(
        "<4sIIIqB",
        REFERENCE_MAGIC,
        REFERENCE_VERSION,
        ref.size,
        ref.ambient_dim,
        ref.seed,
        PROVENANCE_CODES[ref.provenance],
    )
    Path(path).write_bytes(head + np.ascontiguousarray(ref.points, dtype="<f8").tobytes())


def load_reference(path) -> ReferenceDistribution:
    blob = Path(path).read_bytes()
    head = struct.Struct("<4sIIIqB")
    try:
        magic, version, m, ambient, seed, code = head.unpack_from(blob)
    except struct.error as exc:
        raise PersistenceError(f"truncated reference file: {exc}") from exc
    if magic != REFERENCE_MAGIC:
        raise PersistenceError(f"bad reference magic {magic!r}")
    if version != REFERENCE_VERSION:
        raise PersistenceError(f"unsupported reference version {version}")
    if code not in _CODE_TO_PROVENANCE:
        raise PersistenceError(f"unknown provenance code {code}")
    expected = head.size + 8 * m * ambient
    if len(blob) != expected:
        raise PersistenceError(f"reference payload is {len(blob)} bytes, expected {expected}")
    points = np.frombuffer(blob, dtype="<f8", count=m * ambient, offset=head.size)
    return ReferenceDistribution(points.reshape(m, ambient).copy(), int(seed), _CODE_TO_PROVENANCE[code])


def save_embedding(emb: TaskEmbedding, path) -> None:
    name = emb.dataset_id.encode("utf-8")
    ref_hash = emb.reference_hash.encode("ascii")
    parts = [
        struct.pack("<4sI", EMBEDDING_MAGIC, EMBEDDING_VERSION),
        struct.pack("<I", len(name)),
        name,
        struct.pack("<I", len(ref_hash)),
        ref_hash,
        struct.pack("<IId", emb.vector.shape[0], emb.vector.shape[1], emb.ot_cost),
        np.ascontiguousarray(emb.vector, dtype="<f8").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def load_embedding(path) -> TaskEmbedding:
    blob = Path(path).read_bytes()
    try:
        magic, version = struct.unpack_from("<4sI", blob)
        if magic != EMBEDDING_MAGIC:
            raise PersistenceError(f"bad embedding magic {magic!r}")
        if version != EMBEDDING_VERSION:
            raise PersistenceError(f"unsupported embedding version {version}")
        offset = struct.calcsize("<4sI")
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (hash_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        ref_hash = blob[offset : offset + hash_len].decode("ascii")
        offset += hash_len
        rows, cols, ot_cost = struct.unpack_from("<IId", blob, offset)
        offset += struct.calcsize("<IId")
        vector = np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=offset)
        offset += 8 * rows * cols
    except struct.error as exc:
        raise PersistenceError(f"truncated embedding file: {exc}") from exc
    if offset != len(blob):
        raise PersistenceError(f"embedding file has {len(blob) - offset} trailing bytes")
    return TaskEmbedding(name, vector.reshape(rows, cols).copy(), ref_hash, float(ot_cost))
