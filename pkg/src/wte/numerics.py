"""Dense symmetric linear algebra primitives.

Everything here is a pure function on float64 numpy arrays: a cyclic Jacobi
eigensolver for small symmetric matrices (LAPACK takes over past a size
cutoff), PSD square roots, and the double-centering step that turns squared
dissimilarities into a Gram matrix. Eigenvalues always come back in
descending order and all tie-breaking is deterministic so golden tests stay
stable.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDissimilarityError, NotPsdError, SolverFailureError

PSD_EIGENVALUE_FLOOR = -1e-10

_JACOBI_MAX_SWEEPS = 100
_JACOBI_OFF_TOL = 1e-12
_LAPACK_CUTOFF = 64


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix; eigenvectors[:, k] pairs with eigenvalues[k]."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def symmetrize(m) -> np.ndarray:
    """Return 0.5*(m + m.T) as a fresh float64 array; rejects non-square input."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def off_diagonal_norm(a: np.ndarray) -> float:
    # computed entrywise; subtracting diagonal mass from the total cancels badly
    off = np.array(a, dtype=np.float64)
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def _jacobi(a: np.ndarray):
    """Cyclic Jacobi on a symmetric matrix (modified in place).

    Sweeps row-major over all (p, q) pairs until the off-diagonal Frobenius
    mass drops below 1e-12 * ||A||_F, capped at 100 sweeps. Returns unsorted
    (eigenvalues, eigenvectors-as-columns).
    """
    n = a.shape[0]
    v = np.eye(n)
    threshold = _JACOBI_OFF_TOL * float(np.linalg.norm(a))
    for _ in range(_JACOBI_MAX_SWEEPS):
        if off_diagonal_norm(a) <= threshold:
            return np.diagonal(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(1.0, theta))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                new_p = c * cp - s * cq
                new_q = s * cp + c * cq
                a[:, p] = new_p
                a[p, :] = new_p
                a[:, q] = new_q
                a[q, :] = new_q
                # closed-form 2x2 block keeps the zeroed pivot exact
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    residual = off_diagonal_norm(a)
    if residual <= threshold:
        return np.diagonal(a).copy(), v
    raise SolverFailureError(
        f"Jacobi eigensolver did not converge within {_JACOBI_MAX_SWEEPS} sweeps",
        residual=residual,
    )


def eig_sym(m) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.

    Uses cyclic Jacobi below the LAPACK cutoff (deterministic, orthonormal
    columns by construction) and numpy.linalg.eigh above it, where pure-Python
    sweeps would be too slow for image-scale covariances.
    """
    a = symmetrize(m)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf")
    if a.shape[0] >= _LAPACK_CUTOFF:
        try:
            vals, vecs = np.linalg.eigh(a)
        except np.linalg.LinAlgError as exc:
            raise SolverFailureError(f"eigh failed to converge: {exc}") from exc
    else:
        vals, vecs = _jacobi(a.copy())
    order = np.argsort(-vals, kind="stable")
    return EigenDecomposition(vals[order], vecs[:, order])


def psd_sqrt(m) -> np.ndarray:
    """Symmetric PSD square root R with R @ R == m.

    Eigenvalues below the -1e-10 floor raise NotPsdError; tiny negatives from
    rounding are clamped to zero before the square root.
    """
    dec = eig_sym(m)
    lo = float(dec.eigenvalues.min()) if dec.dim else 0.0
    if lo < PSD_EIGENVALUE_FLOOR:
        raise NotPsdError("matrix is not positive semidefinite", eigenvalue=lo)
    lam = np.sqrt(np.clip(dec.eigenvalues, 0.0, None))
    root = (dec.eigenvectors * lam) @ dec.eigenvectors.T
    return symmetrize(root)


def double_center(d2) -> np.ndarray:
    """Gram matrix B = -0.5 * J @ d2 @ J with J the centering projector.

    `d2` must be the matrix of SQUARED dissimilarities (zero diagonal,
    nonnegative); callers working with plain distances square first. Row and
    column sums of the result are zero by construction.
    """
    a = symmetrize(d2)
    if float(a.min(initial=0.0)) < 0.0:
        raise InvalidDissimilarityError(
            f"squared dissimilarities must be nonnegative (min entry {a.min():.6e})"
        )
    row_means = a.mean(axis=1)
    grand_mean = float(a.mean())
    b = -0.5 * (a - row_means[:, None] - row_means[None, :] + grand_mean)
    return symmetrize(b)
