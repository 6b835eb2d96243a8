"""Sufficient dimension reduction by sliced inverse regression.

Observations are sliced by sorted response, slice means of the centered
inputs form a between-slice factor W with Gamma = W W^T, and directions
come from the generalized eigenproblem Gamma beta = lambda Sigma beta.
The eigenproblem is solved through the reduced J x J system
W^T Sigma^{-1} W, which keeps the cost independent of the ambient
dimension once W is formed.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, eigh, solve_triangular

# Relative eigenvalue cutoff below which a direction is treated as rank
# deficient and dropped.
RANK_TOLERANCE = 1e-10

# Ridge added to the input covariance, relative to its mean diagonal.
RIDGE_EPS = 1e-4


@dataclass(frozen=True)
class SliceAssignment:
    """Partition of observations into contiguous response slices.

    Fields
    ------
    slice_count : int
    slice_of : ndarray, shape (n,)
        Slice id of each observation, in input order.
    slice_sizes : ndarray, shape (J,)
    """

    slice_count: int
    slice_of: np.ndarray
    slice_sizes: np.ndarray


def partition_slices(targets, slice_count):
    """Assign observations to slices of near-equal size by sorted target.

    Ties are broken by original index (stable sort). When n is not a
    multiple of J, the first n mod J slices receive one extra observation.

    Parameters
    ----------
    targets : ndarray, shape (n,)
    slice_count : int
        Number of slices J, 1 <= J <= n.

    Returns
    -------
    SliceAssignment
    """
    targets = np.asarray(targets, dtype=float).ravel()
    n = targets.shape[0]
    if not 1 <= slice_count <= n:
        raise ValueError(
            f"slice_count must satisfy 1 <= J <= n, got J={slice_count}, n={n}"
        )
    order = np.argsort(targets, kind="stable")
    base, remainder = divmod(n, slice_count)
    sizes = np.full(slice_count, base, dtype=int)
    sizes[:remainder] += 1
    slice_of = np.empty(n, dtype=int)
    slice_of[order] = np.repeat(np.arange(slice_count), sizes)
    return SliceAssignment(
        slice_count=slice_count, slice_of=slice_of, slice_sizes=sizes
    )


def slice_factor(inputs, assignment):
    """Weighted slice-mean factor W of the between-slice covariance.

    Column j is sqrt(n_j / n) times the mean of the centered inputs in
    slice j, so that W W^T equals sum_j (n_j / n) m_j m_j^T. Inputs are
    centered by their sample mean internally.

    Parameters
    ----------
    inputs : ndarray, shape (n, D)
    assignment : SliceAssignment

    Returns
    -------
    ndarray, shape (D, J)
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    n, dim = inputs.shape
    if assignment.slice_of.shape[0] != n:
        raise ValueError(
            f"assignment covers {assignment.slice_of.shape[0]} observations "
            f"but got {n} inputs"
        )
    if np.any(assignment.slice_sizes < 1):
        raise ValueError("every slice must contain at least one observation")
    centered = inputs - inputs.mean(axis=0)
    factor = np.zeros((dim, assignment.slice_count))
    for j in range(assignment.slice_count):
        members = assignment.slice_of == j
        size = int(assignment.slice_sizes[j])
        factor[:, j] = np.sqrt(size / n) * centered[members].mean(axis=0)
    return factor


def regularized_covariance(inputs):
    """Sample covariance (1/n normalization) with a relative ridge.

    The ridge is RIDGE_EPS times the mean diagonal, which keeps the matrix
    positive definite when n < D.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    n, dim = inputs.shape
    centered = inputs - inputs.mean(axis=0)
    sigma = centered.T @ centered / n
    sigma = 0.5 * (sigma + sigma.T)
    scale = float(np.trace(sigma)) / dim
    if scale <= 0:
        scale = 1.0
    sigma[np.diag_indices(dim)] += RIDGE_EPS * scale
    return sigma


def _tall_covariance_solve(inputs, rhs):
    """Solve regularized_covariance(inputs) @ S = rhs without forming it.

    For n < D the covariance is ridge * I plus a rank-n term, so the
    Woodbury identity reduces the solve to an n x n factorization. The
    operator is algebraically identical to the dense route.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    n, dim = inputs.shape
    centered = inputs - inputs.mean(axis=0)
    scale = float(np.einsum("ij,ij->", centered, centered)) / (n * dim)
    if scale <= 0:
        scale = 1.0
    ridge = RIDGE_EPS * scale
    # (ridge I + X^T X / n)^{-1} = (I - X^T (ridge n I + X X^T)^{-1} X) / ridge
    inner = centered @ centered.T
    inner[np.diag_indices(n)] += ridge * n
    lower = cholesky(0.5 * (inner + inner.T), lower=True)
    correction = centered.T @ cho_solve((lower, True), centered @ rhs)
    return (rhs - correction) / ridge


@dataclass(frozen=True)
class SirDecomposition:
    """Estimated sufficient directions.

    Fields
    ------
    directions : ndarray, shape (d_eff, D)
        Unit-norm rows, ordered by descending eigenvalue.
    eigenvalues : ndarray, shape (d_eff,)
        Positive, nonincreasing.
    input_mean : ndarray, shape (D,)
        Subtracted from points before projecting.
    """

    directions: np.ndarray
    eigenvalues: np.ndarray
    input_mean: np.ndarray

    @property
    def d_eff(self):
        return self.directions.shape[0]


def sir_directions(inputs, targets, target_dim, slice_count=None):
    """Estimate up to ``target_dim`` sufficient directions by SIR.

    Solves Gamma beta = lambda Sigma beta through the reduced system:
    with S = Sigma^{-1} W, the J x J matrix W^T S = U M U^T gives
    V = S U M^{-1/2}, whose columns are the generalized eigenvectors.
    Directions with eigenvalue at or below RANK_TOLERANCE times the
    largest are dropped, so at most min(target_dim, J - 1) survive.

    Parameters
    ----------
    inputs : ndarray, shape (n, D)
    targets : ndarray, shape (n,)
    target_dim : int
        Requested subspace dimension d >= 1. Requires n >= d + 1.
    slice_count : int, optional
        Number of slices J; defaults to d + 1.

    Returns
    -------
    SirDecomposition
        May hold fewer than d directions, down to zero when no slice-mean
        signal survives the tolerance.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    n = inputs.shape[0]
    if targets.shape[0] != n:
        raise ValueError(f"got {n} inputs but {targets.shape[0]} targets")
    if target_dim < 1:
        raise ValueError(f"target_dim must be >= 1, got {target_dim}")
    if slice_count is None:
        slice_count = target_dim + 1
    if n < target_dim + 1:
        raise ValueError(
            f"need at least d + 1 = {target_dim + 1} observations, got {n}"
        )

    input_mean = inputs.mean(axis=0)
    if np.all(targets == targets[0]):
        # No response variation: slices would be tie-breaking artifacts,
        # while the population between-slice covariance is exactly zero.
        return SirDecomposition(
            directions=np.zeros((0, inputs.shape[1])),
            eigenvalues=np.zeros(0),
            input_mean=input_mean,
        )
    assignment = partition_slices(targets, slice_count)
    factor = slice_factor(inputs, assignment)

    if n < inputs.shape[1]:
        solved = _tall_covariance_solve(inputs, factor)
    else:
        sigma = regularized_covariance(inputs)
        sigma_lower = cholesky(sigma, lower=True)
        solved = cho_solve((sigma_lower, True), factor)
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
        return SirDecomposition(
            directions=np.zeros((0, inputs.shape[1])),
            eigenvalues=np.zeros(0),
            input_mean=input_mean,
        )

    kept_values = eigenvalues[kept]
    basis = solved @ eigenvectors[:, kept] / np.sqrt(kept_values)[None, :]
    directions = basis.T
    norms = np.linalg.norm(directions, axis=1)
    valid = norms > 0
    directions = directions[valid] / norms[valid, None]
    return SirDecomposition(
        directions=directions,
        eigenvalues=kept_values[valid],
        input_mean=input_mean,
    )


def dense_generalized_eig(gamma, sigma, target_dim):
    """Top-d generalized eigenpairs of Gamma beta = lambda Sigma beta.

    Direct route used as an oracle for the reduced solver: Cholesky-reduce
    to an ordinary symmetric eigenproblem, then back-transform. Pairs with
    eigenvalue at or below RANK_TOLERANCE times the largest are dropped.

    Parameters
    ----------
    gamma : ndarray, shape (D, D)
        Symmetric positive semidefinite.
    sigma : ndarray, shape (D, D)
        Symmetric positive definite.
    target_dim : int

    Returns
    -------
    SirDecomposition
        ``input_mean`` is zero; callers projecting with it must center
        inputs themselves.
    """
    gamma = np.asarray(gamma, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if gamma.shape != sigma.shape or gamma.ndim != 2:
        raise ValueError(
            f"shape mismatch: gamma {gamma.shape}, sigma {sigma.shape}"
        )
    gamma = 0.5 * (gamma + gamma.T)
    sigma = 0.5 * (sigma + sigma.T)
    try:
        sigma_lower = cholesky(sigma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("sigma must be positive definite") from exc

    # C = L^{-1} Gamma L^{-T}; same spectrum as the generalized problem.
    half = solve_triangular(sigma_lower, gamma, lower=True)
    core = solve_triangular(sigma_lower, half.T, lower=True)
    core = 0.5 * (core + core.T)
    eigenvalues, eigenvectors = eigh(core)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    cutoff = RANK_TOLERANCE * max(float(eigenvalues[0]), 0.0)
    kept = [
        i
        for i in range(min(target_dim, eigenvalues.shape[0]))
        if eigenvalues[i] > cutoff and eigenvalues[i] > 0
    ]
    if not kept:
        return SirDecomposition(
            directions=np.zeros((0, gamma.shape[0])),
            eigenvalues=np.zeros(0),
            input_mean=np.zeros(gamma.shape[0]),
        )
    basis = solve_triangular(
        sigma_lower.T, eigenvectors[:, kept], lower=False
    )
    directions = basis.T
    norms = np.linalg.norm(directions, axis=1)
    valid = norms > 0
    directions = directions[valid] / norms[valid, None]
    return SirDecomposition(
        directions=directions,
        eigenvalues=eigenvalues[kept][valid],
        input_mean=np.zeros(gamma.shape[0]),
    )


def project(decomposition, points):
    """Project points onto the estimated directions.

    Parameters
    ----------
    decomposition : SirDecomposition
    points : ndarray, shape (D,) or (m, D)

    Returns
    -------
    ndarray, shape (d_eff,) or (m, d_eff)
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    block = np.atleast_2d(points)
    dim = decomposition.input_mean.shape[0]
    if block.shape[1] != dim:
        raise ValueError(
            f"dimension mismatch: points have {block.shape[1]} columns, "
            f"decomposition expects {dim}"
        )
    features = (block - decomposition.input_mean) @ decomposition.directions.T
    return features[0] if single else features
