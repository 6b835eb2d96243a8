"""Kernelized-input sliced inverse regression.

Inputs enter only through a Gram matrix of an input-space kernel, so the
per-iteration eigenproblem costs depend on the number of anchors, not on
the ambient dimension. The double-centered Gram plays the role of the
centered design matrix: slice means of its columns form the between-slice
factor and K_c K_c^T the covariance, and new points project through their
centered kernel column against the anchors.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, eigh

from .gp import kernel_matrix, kernel_vector
from .sdr import RANK_TOLERANCE, partition_slices

# Ridge added to the Gram covariance, relative to its mean diagonal.
GRAM_RIDGE_EPS = 1e-3

# Projected training features with sample variance at or below this are
# degenerate and dropped instead of rescaled.
_FEATURE_VARIANCE_FLOOR = 1e-300


@dataclass(frozen=True)
class GramState:
    """Anchor set with its raw and double-centered Gram matrices.

    Fields
    ------
    anchor_points : ndarray, shape (N, D)
    raw_gram : ndarray, shape (N, N)
    centered_gram : ndarray, shape (N, N)
        H K H with H = I - 11^T / N.
    column_means : ndarray, shape (N,)
        Column means of the raw Gram.
    grand_mean : float
        Mean of all raw Gram entries.
    input_kernel : KernelConfig
    """

    anchor_points: np.ndarray
    raw_gram: np.ndarray
    centered_gram: np.ndarray
    column_means: np.ndarray
    grand_mean: float
    input_kernel: object

    @property
    def anchor_count(self):
        return self.anchor_points.shape[0]


def _assemble_state(points, raw, kernel):
    column_means = raw.mean(axis=0)
    grand_mean = float(raw.mean())
    centered = raw - column_means[None, :] - column_means[:, None] + grand_mean
    return GramState(
        anchor_points=points,
        raw_gram=raw,
        centered_gram=centered,
        column_means=column_means,
        grand_mean=grand_mean,
        input_kernel=kernel,
    )


def gram_build(points, kernel):
    """Build the Gram state for a set of anchor points.

    The matrix is filled one row at a time through the same kernel-row
    primitive that ``gram_append`` uses, so appending points one by one
    reproduces a fresh build bit for bit.

    Parameters
    ----------
    points : ndarray, shape (N, D)
    kernel : KernelConfig

    Returns
    -------
    GramState
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if n == 0:
        raise ValueError("need at least one anchor point")
    if not np.all(np.isfinite(points)):
        raise ValueError("anchor points contain non-finite values")
    raw = np.empty((n, n))
    for i in range(n):
        row = kernel_vector(kernel, points[i], points[: i + 1])
        raw[i, : i + 1] = row
        raw[: i + 1, i] = row
    return _assemble_state(points, raw, kernel)


def gram_append(state, point):
    """Extend the Gram state by one anchor without recomputing old entries.

    Parameters
    ----------
    state : GramState
    point : ndarray, shape (D,)

    Returns
    -------
    GramState
        New state over N + 1 anchors; bit-identical to rebuilding from
        scratch on the extended point set.
    """
    point = np.asarray(point, dtype=float).ravel()
    if point.shape[0] != state.anchor_points.shape[1]:
        raise ValueError(
            f"dimension mismatch: point has length {point.shape[0]}, "
            f"anchors have {state.anchor_points.shape[1]}"
        )
    if not np.all(np.isfinite(point)):
        raise ValueError("anchor point contains non-finite values")
    n = state.anchor_count
    points = np.vstack([state.anchor_points, point[None, :]])
    raw = np.empty((n + 1, n + 1))
    raw[:n, :n] = state.raw_gram
    row = kernel_vector(state.input_kernel, points[n], points[: n + 1])
    raw[n, : n + 1] = row
    raw[: n + 1, n] = row
    return _assemble_state(points, raw, state.input_kernel)


def centered_cross_gram(state, points):
    """Centered kernel columns of new points against the anchors.

    Row for a point x is k(x, anchors) centered consistently with the
    training Gram: k - mean(k) - column_means + grand_mean. At an anchor
    it reproduces that anchor's column of the centered Gram.

    Parameters
    ----------
    state : GramState
    points : ndarray, shape (m, D)

    Returns
    -------
    ndarray, shape (m, N)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    cross = kernel_matrix(state.input_kernel, points, state.anchor_points)
    return (
        cross
        - cross.mean(axis=1, keepdims=True)
        - state.column_means[None, :]
        + state.grand_mean
    )


@dataclass(frozen=True)
class KisirDecomposition:
    """Directions in the kernel feature space, as anchor coefficients.

    Fields
    ------
    coefficients : ndarray, shape (d_eff, N)
        A point's features are coefficients @ (its centered kernel column).
        Rows are scaled so each projected training feature has unit sample
        variance.
    eigenvalues : ndarray, shape (d_eff,)
    anchor_count : int
    train_features : ndarray, shape (d_eff, N)
        Projections of the anchors themselves.
    """

    coefficients: np.ndarray
    eigenvalues: np.ndarray
    anchor_count: int
    train_features: np.ndarray

    @property
    def d_eff(self):
        return self.coefficients.shape[0]


def kisir_directions(state, targets, target_dim, slice_count=None):
    """Estimate sufficient directions in the kernel feature space.

    The centered Gram K_c substitutes for the centered design matrix:
    the between-slice factor has columns sqrt(n_j / N) times the slice
    means of K_c's columns, the covariance is K_c K_c^T / N plus a
    relative ridge, and the reduced eigenproblem proceeds as in the
    linear case. Every cost after the Gram is O(N^3) at worst, so the
    ambient dimension never enters.

    Parameters
    ----------
    state : GramState
    targets : ndarray, shape (N,)
    target_dim : int
        Requested dimension d >= 1. Requires N >= d + 1.
    slice_count : int, optional
        Defaults to d + 1.

    Returns
    -------
    KisirDecomposition
        May hold fewer than d directions, down to zero.
    """
    targets = np.asarray(targets, dtype=float).ravel()
    n = state.anchor_count
    if targets.shape[0] != n:
        raise ValueError(f"got {n} anchors but {targets.shape[0]} targets")
    if target_dim < 1:
        raise ValueError(f"target_dim must be >= 1, got {target_dim}")
    if slice_count is None:
        slice_count = target_dim + 1
    if n < target_dim + 1:
        raise ValueError(
            f"need at least d + 1 = {target_dim + 1} anchors, got {n}"
        )

    if np.all(targets == targets[0]):
        # No response variation: slices would be tie-breaking artifacts,
        # while the population between-slice covariance is exactly zero.
        return KisirDecomposition(
            coefficients=np.zeros((0, n)),
            eigenvalues=np.zeros(0),
            anchor_count=n,
            train_features=np.zeros((0, n)),
        )

    assignment = partition_slices(targets, slice_count)
    centered = state.centered_gram
    factor = np.zeros((n, slice_count))
    for j in range(slice_count):
        members = assignment.slice_of == j
        size = int(assignment.slice_sizes[j])
        factor[:, j] = np.sqrt(size / n) * centered[:, members].mean(axis=1)

    covariance = centered @ centered.T / n
    covariance = 0.5 * (covariance + covariance.T)
    scale = float(np.trace(covariance)) / n
    if scale <= 0:
        scale = 1.0
    covariance[np.diag_indices(n)] += GRAM_RIDGE_EPS * scale

    lower = cholesky(covariance, lower=True)
    solved = cho_solve((lower, True), factor)
    reduced = factor.T @ solved
    reduced = 0.5 * (reduced + reduced.T)
    eigenvalues, eigenvectors = eigh(reduced)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    cutoff = RANK_TOLERANCE * max(float(eigenvalues[0]), 0.0)
    keep = min(target_dim, slice_count - 1)
    kept = [
        i
        for i in range(min(keep, eigenvalues.shape[0]))
        if eigenvalues[i] > cutoff and eigenvalues[i] > 0
    ]
    if not kept:
        return KisirDecomposition(
            coefficients=np.zeros((0, n)),
            eigenvalues=np.zeros(0),
            anchor_count=n,
            train_features=np.zeros((0, n)),
        )

    kept_values = eigenvalues[kept]
    coefficients = (solved @ eigenvectors[:, kept] / np.sqrt(kept_values)).T
    features = coefficients @ centered
    variances = np.einsum("ij,ij->i", features, features) / n
    usable = variances > _FEATURE_VARIANCE_FLOOR
    coefficients = coefficients[usable] / np.sqrt(variances[usable])[:, None]
    features = features[usable] / np.sqrt(variances[usable])[:, None]
    return KisirDecomposition(
        coefficients=coefficients,
        eigenvalues=kept_values[usable],
        anchor_count=n,
        train_features=features,
    )


def kisir_project(decomposition, state, points):
    """Project new points through their centered kernel columns.

    Parameters
    ----------
    decomposition : KisirDecomposition
    state : GramState
        Must hold the same anchors the decomposition was built from.
    points : ndarray, shape (D,) or (m, D)

    Returns
    -------
    ndarray, shape (d_eff,) or (m, d_eff)
    """
    if decomposition.anchor_count != state.anchor_count:
        raise ValueError(
            f"decomposition was built on {decomposition.anchor_count} "
            f"anchors but state holds {state.anchor_count}"
        )
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    block = np.atleast_2d(points)
    if block.shape[1] != state.anchor_points.shape[1]:
        raise ValueError(
            f"dimension mismatch: points have {block.shape[1]} columns, "
            f"anchors have {state.anchor_points.shape[1]}"
        )
    if decomposition.d_eff == 0:
        features = np.zeros((block.shape[0], 0))
    else:
        features = centered_cross_gram(state, block) @ decomposition.coefficients.T
    return features[0] if single else features
