"""Synthetic Gaussian-mixture tasks for benchmarks and self-checks."""

import numpy as np

from .dataset import GaussianLabelStats, LabeledDataset
from .numerics import symmetrize


def gaussian_task(
    name: str,
    means: np.ndarray,
    n_per_class: int,
    seed: int,
    scale: float = 1.0,
) -> LabeledDataset:
    """Sample a task whose class j is an isotropic Gaussian around means[j]."""
    means = np.asarray(means, dtype=np.float64)
    rng = np.random.default_rng(seed)
    blocks = []
    labels = []
    for j, mu in enumerate(means):
        blocks.append(mu + scale * rng.standard_normal((n_per_class, means.shape[1])))
        labels.append(np.full(n_per_class, j, dtype=np.int64))
    return LabeledDataset(name, np.vstack(blocks), np.concatenate(labels))


def shifted_task_family(
    n_tasks: int,
    n_classes: int = 3,
    dim: int = 5,
    n_per_class: int = 70,
    seed: int = 0,
    shift_step: float = 0.8,
    scale: float = 1.0,
) -> list:
    """Tasks with progressively shifted class means, so pairwise distances vary.

    Task i shifts a common set of class means by roughly i * shift_step along
    a fixed direction, with a small seeded per-class wobble to avoid exact
    translations.
    """
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((n_classes, dim)) * 3.0
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    tasks = []
    for i in range(n_tasks):
        wobble = 0.25 * rng.standard_normal((n_classes, dim))
        means = base + i * shift_step * direction + wobble
        tasks.append(gaussian_task(f"task{i:02d}", means, n_per_class, seed=seed + 1000 + i, scale=scale))
    return tasks


def similarity_task_family(
    n_tasks: int,
    n_classes: int = 3,
    dim: int = 4,
    n_per_class: int = 40,
    seed: int = 0,
    shift_max: float = 4.0,
    scale_wobble: float = 0.05,
    jitter: float = 0.0,
) -> list:
    """Tasks that are shifted and mildly rescaled copies of one shared cloud.

    Transport between such tasks is dominated by translation and scaling, the
    regime where the displacement embedding tracks the true distance tightly;
    `jitter` adds optional independent per-point noise on top.
    """
    rng = np.random.default_rng(seed)
    means = 2.0 * rng.standard_normal((n_classes, dim))
    base = np.vstack([m + rng.standard_normal((n_per_class, dim)) for m in means])
    labels = np.repeat(np.arange(n_classes), n_per_class)
    tasks = []
    for i in range(n_tasks):
        direction = rng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        shift = shift_max * rng.random() * direction
        scale = 1.0 + scale_wobble * rng.standard_normal()
        pts = scale * base + shift
        if jitter > 0.0:
            pts = pts + jitter * rng.standard_normal(base.shape)
        tasks.append(LabeledDataset(f"sim{i:02d}", pts, labels))
    return tasks


def gaussian_stats_family(
    n_labels: int,
    dim: int = 6,
    seed: int = 0,
    mean_spread: float = 2.0,
    cov_wobble: float = 0.8,
) -> list:
    """Synthetic per-label Gaussian statistics with well-separated means.

    Covariances are SPD with a controlled departure from identity so the
    pairwise Gaussian distances stay close to Euclidean-realizable.
    """
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_labels):
        mean = mean_spread * rng.standard_normal(dim)
        noise = rng.standard_normal((dim, dim))
        cov = symmetrize(np.eye(dim) + cov_wobble * (noise @ noise.T) / dim)
        out.append(GaussianLabelStats(("synthetic", k), 1000, mean, cov))
    return out
