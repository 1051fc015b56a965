"""End-to-end embedding pipeline shared by the CLI commands.

Stages: ingest -> subsample -> class statistics -> label atlas -> reference ->
augment -> embed. Failures are wrapped in PipelineError carrying the stage
name and the offending input, which the CLI maps to exit codes.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import class_stats, ingest, subsample
from .embedding import (
    ReferenceDistribution,
    embed_task,
    load_reference,
    make_reference,
)
from .errors import PipelineError, WteError
from .labels import DEFAULT_MDS_DIM, LabelAtlas, augment, build_atlas

REF_MODES = ("smooth-image", "uniform-box", "file")


@dataclass
class RunConfig:
    """Validated knobs for one pipeline run; serialized next to the outputs."""

    tasks: list
    out_dir: str | None = None
    mds_dim: int = DEFAULT_MDS_DIM
    reg: float | None = None
    ref_size: int | None = None
    ref_seed: int = 0
    ref_mode: str = "uniform-box"
    ref_file: str | None = None
    image_side: int | None = None
    subsample_per_class: int | None = None
    seed: int = 0
    squared: bool = False
    workers: int = 1
    otdd_mode: str = "direct"

    def validate(self) -> None:
        if not self.tasks:
            raise ValueError("no task files given")
        if self.mds_dim < 1:
            raise ValueError("mds dimension must be >= 1")
        if self.reg is not None and self.reg < 0:
            raise ValueError("covariance regularization must be >= 0")
        if self.ref_size is not None and self.ref_size < 1:
            raise ValueError("reference size must be >= 1")
        if self.ref_mode not in REF_MODES:
            raise ValueError(f"reference mode must be one of {REF_MODES}")
        if self.ref_mode == "file" and not self.ref_file:
            raise ValueError("reference mode 'file' needs a reference file path")
        if self.subsample_per_class is not None and self.subsample_per_class < 1:
            raise ValueError("subsample size must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.otdd_mode not in ("direct", "atlas"):
            raise ValueError("otdd mode must be 'direct' or 'atlas'")

    def snapshot_text(self) -> str:
        """Flat key-value form, the same syntax the CLI accepts as a config file."""
        items = {
            "tasks": ",".join(str(t) for t in self.tasks),
            "out": self.out_dir or "",
            "mds-dim": self.mds_dim,
            "reg": "" if self.reg is None else repr(self.reg),
            "ref-size": "" if self.ref_size is None else self.ref_size,
            "ref-seed": self.ref_seed,
            "ref-mode": self.ref_mode,
            "ref-file": self.ref_file or "",
            "image-side": "" if self.image_side is None else self.image_side,
            "subsample": "" if self.subsample_per_class is None else self.subsample_per_class,
            "seed": self.seed,
            "squared": int(self.squared),
            "workers": self.workers,
            "otdd-mode": self.otdd_mode,
        }
        return "".join(f"{k} = {v}\n" for k, v in items.items())


def load_config_file(path) -> dict:
    """Parse `key = value` lines; '#' starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


@dataclass
class EmbedRun:
    """Everything cmd-level code needs after a pipeline run."""

    config: RunConfig
    tasks: list
    atlas: LabelAtlas
    reference: ReferenceDistribution
    augmented: list
    embeddings: list


def _stage(stage_name, source=None):
    def wrap(exc):
        return PipelineError(stage_name, str(exc), source=str(source) if source else None)

    return wrap


def load_tasks(config: RunConfig) -> list:
    tasks = []
    for path in config.tasks:
        try:
            tasks.append(ingest(path))
        except (WteError, OSError) as exc:
            raise _stage("ingest", path)(exc) from exc
    names = [t.name for t in tasks]
    if len(set(names)) != len(names):
        raise PipelineError("ingest", f"duplicate task ids: {sorted(names)}")
    dims = {t.dim for t in tasks}
    if len(dims) != 1:
        raise PipelineError("ingest", f"tasks have inconsistent feature dimensions {sorted(dims)}")
    if config.subsample_per_class is not None:
        try:
            tasks = [subsample(t, config.subsample_per_class, config.seed) for t in tasks]
        except (WteError, ValueError) as exc:
            raise _stage("subsample")(exc) from exc
    return tasks


def build_reference(config: RunConfig, tasks, ambient_l: int) -> ReferenceDistribution:
    dim = tasks[0].dim
    if config.ref_mode == "file":
        try:
            ref = load_reference(config.ref_file)
        except (WteError, OSError) as exc:
            raise _stage("reference", config.ref_file)(exc) from exc
        if ref.ambient_dim != dim + ambient_l:
            raise PipelineError(
                "reference",
                f"reference lives in R^{ref.ambient_dim}, tasks need R^{dim + ambient_l}",
                source=str(config.ref_file),
            )
        return ref
    sizes = sorted(t.n_samples for t in tasks)
    m = config.ref_size if config.ref_size is not None else int(np.median(sizes))
    lo = float(min(t.samples.min() for t in tasks))
    hi = float(max(t.samples.max() for t in tasks))
    if hi <= lo:
        hi = lo + 1.0
    image_side = config.image_side
    if config.ref_mode == "smooth-image" and image_side is None:
        side = math.isqrt(dim)
        if side * side != dim:
            raise PipelineError(
                "reference", f"feature dimension {dim} is not a square; pass an image side"
            )
        image_side = side
    try:
        return make_reference(
            m,
            dim,
            ambient_l,
            seed=config.ref_seed,
            image_side=image_side if config.ref_mode == "smooth-image" else None,
            feature_range=(lo, hi),
        )
    except (WteError, ValueError) as exc:
        raise _stage("reference")(exc) from exc


def run_embed(config: RunConfig) -> EmbedRun:
    config.validate()
    tasks = load_tasks(config)
    try:
        stats = [s for t in tasks for s in class_stats(t, config.reg)]
    except (WteError, ValueError) as exc:
        raise _stage("stats")(exc) from exc
    try:
        atlas = build_atlas(stats, config.mds_dim)
    except (WteError, ValueError) as exc:
        raise _stage("atlas")(exc) from exc
    try:
        augmented = [augment(t, atlas) for t in tasks]
    except WteError as exc:
        raise _stage("augment")(exc) from exc
    reference = build_reference(config, tasks, atlas.l)
    try:
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                embeddings = list(pool.map(lambda a: embed_task(a, reference), augmented))
        else:
            embeddings = [embed_task(a, reference) for a in augmented]
    except WteError as exc:
        raise _stage("embed")(exc) from exc
    return EmbedRun(config, tasks, atlas, reference, augmented, embeddings)
