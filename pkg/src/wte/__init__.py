"""Wasserstein task embedding.

Embed labeled classification datasets into a fixed vector space where squared
Euclidean distance approximates the optimal-transport dataset distance, so a
collection of K tasks needs K exact OT solves instead of K*(K-1)/2.
"""

from .dataset import (
    GaussianLabelStats,
    LabeledDataset,
    class_stats,
    ingest,
    subsample,
    write_csv,
    write_raw_f32,
)
from .embedding import (
    ReferenceDistribution,
    TaskEmbedding,
    embed_task,
    load_embedding,
    load_reference,
    make_reference,
    pairwise_distances,
    save_embedding,
    save_reference,
    wte_distance,
)
from .errors import WteError
from .labels import (
    AugmentedTask,
    LabelAtlas,
    augment,
    build_atlas,
    load_atlas,
    save_atlas,
)
from .mds import MdsEmbedding, mds_embed, stress
from .numerics import EigenDecomposition, double_center, eig_sym, psd_sqrt
from .ot import (
    DiscreteMeasure,
    MongeMapApprox,
    TransportPlan,
    barycentric_project,
    bures_wasserstein2,
    cost_matrix,
    count_solves,
    solve_count,
    solve_exact,
    wasserstein2,
)
from .otdd import OtddResult, otdd, otdd_matrix

__version__ = "0.1.0"

__all__ = [
    "AugmentedTask",
    "DiscreteMeasure",
    "EigenDecomposition",
    "GaussianLabelStats",
    "LabelAtlas",
    "LabeledDataset",
    "MdsEmbedding",
    "MongeMapApprox",
    "OtddResult",
    "ReferenceDistribution",
    "TaskEmbedding",
    "TransportPlan",
    "WteError",
    "augment",
    "barycentric_project",
    "build_atlas",
    "bures_wasserstein2",
    "class_stats",
    "cost_matrix",
    "count_solves",
    "double_center",
    "eig_sym",
    "embed_task",
    "ingest",
    "load_atlas",
    "load_embedding",
    "load_reference",
    "make_reference",
    "mds_embed",
    "otdd",
    "otdd_matrix",
    "pairwise_distances",
    "psd_sqrt",
    "save_atlas",
    "save_embedding",
    "save_reference",
    "solve_count",
    "solve_exact",
    "stress",
    "subsample",
    "wasserstein2",
    "write_csv",
    "write_raw_f32",
    "wte_distance",
]
