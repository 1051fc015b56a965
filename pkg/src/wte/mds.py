"""Classical (Torgerson) multidimensional scaling.

Input distances are squared, double-centered into a Gram matrix, and the top
eigenpairs give the configuration. Negative eigenvalues among the retained
ones (possible for non-Euclidean dissimilarities such as Wasserstein
matrices) are clamped to zero and reported in the diagnostics. Eigenvector
signs are fixed so the output is deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidDissimilarityError
from .numerics import double_center, eig_sym, symmetrize
from .ot import pairwise_sq_dists

_DIAG_TOL = 1e-9
_SIGN_TOL = 1e-12


@dataclass
class MdsEmbedding:
    """Embedded coordinates plus the quality diagnostics of the truncation.

    `residual_rel` is the relative Frobenius gap between the input squared
    dissimilarities and the embedded squared distances, computed from the
    truncated spectrum (not from the coordinates), so tests can cross-check
    the two routes against each other.
    """

    coords: np.ndarray
    stress: float
    eigen_spectrum: np.ndarray
    n_clamped: int
    clamped_mass: float
    residual_rel: float


def _validated(d: np.ndarray) -> np.ndarray:
    dm = symmetrize(d)
    if float(dm.min(initial=0.0)) < 0.0:
        raise InvalidDissimilarityError(f"negative dissimilarity {dm.min():.6e}")
    if dm.shape[0] and float(np.abs(np.diagonal(dm)).max()) > _DIAG_TOL:
        raise InvalidDissimilarityError("dissimilarity matrix must have a zero diagonal")
    return dm


def stress(d, coords) -> float:
    """Normalized residual between given distances and embedded distances.

    sqrt( sum (d_ij - ||psi_i - psi_j||)^2 / sum d_ij^2 ), over all ordered
    pairs. Zero exactly when the configuration reproduces d.
    """
    dm = _validated(d)
    denom = float((dm * dm).sum())
    if denom == 0.0:
        raise DegenerateInputError("all dissimilarities are zero; stress is undefined")
    emb = np.sqrt(np.maximum(pairwise_sq_dists(coords, coords), 0.0))
    gap = dm - emb
    return float(np.sqrt((gap * gap).sum() / denom))


def mds_embed(d, l: int) -> MdsEmbedding:
    """Embed N objects with pairwise dissimilarities d into R^l."""
    dm = _validated(d)
    n = dm.shape[0]
    if not 1 <= l <= n:
        raise ValueError(f"embedding dimension l={l} must be in [1, {n}]")
    if float((dm * dm).sum()) == 0.0:
        raise DegenerateInputError("all dissimilarities are zero; nothing to embed")

    gram = double_center(dm * dm)
    dec = eig_sym(gram)
    vecs = _fix_signs(dec.eigenvectors)
    lam = dec.eigenvalues

    top = lam[:l]
    clamped = np.clip(top, 0.0, None)
    n_clamped = int((top < 0.0).sum())
    clamped_mass = float(-top[top < 0.0].sum())
    coords = vecs[:, :l] * np.sqrt(clamped)

    # spectral-route reconstruction of the embedded squared distances
    gram_hat = (vecs[:, :l] * clamped) @ vecs[:, :l].T
    diag_hat = np.diagonal(gram_hat)
    sq_hat = diag_hat[:, None] + diag_hat[None, :] - 2.0 * gram_hat
    sq_in = dm * dm
    residual_rel = float(np.linalg.norm(sq_in - sq_hat) / np.linalg.norm(sq_in))

    return MdsEmbedding(
        coords=coords,
        stress=stress(dm, coords),
        eigen_spectrum=lam,
        n_clamped=n_clamped,
        clamped_mass=clamped_mass,
        residual_rel=residual_rel,
    )


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each eigenvector so its first nonzero component is positive."""
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        nz = np.flatnonzero(np.abs(col) > _SIGN_TOL)
        if nz.size and col[nz[0]] < 0.0:
            out[:, k] = -col
    return out
