"""Gaussian process regression on low-dimensional feature coordinates.

Covers kernel evaluation, Cholesky-based fitting and prediction, the log
marginal likelihood, and a deterministic grid search for hyperparameters.
The prior mean is constant: targets are centered by their sample mean
before fitting and the mean is added back at prediction time.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import pdist

SQUARED_EXPONENTIAL = "squared-exponential"
LINEAR = "linear"

# Jitter ladder: start at 1e-10 times the mean kernel diagonal, grow by 10x
# up to 1e-2 times the diagonal before giving up.
_JITTER_START = 1e-10
_JITTER_STOP = 1e-2
_JITTER_GROWTH = 10.0

# Negative predictive variances beyond this magnitude indicate a broken
# factorization rather than round-off and are reported as errors.
_VARIANCE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class KernelConfig:
    """Covariance function selector with its hyperparameters.

    Parameters
    ----------
    family : str
        Either ``"squared-exponential"`` or ``"linear"``.
    lengthscale : float
        Isotropic lengthscale; ignored by the linear kernel.
    signal_variance : float
        Kernel amplitude; ignored by the linear kernel.
    """

    family: str = SQUARED_EXPONENTIAL
    lengthscale: float = 1.0
    signal_variance: float = 1.0

    def __post_init__(self):
        if self.family not in (SQUARED_EXPONENTIAL, LINEAR):
            raise ValueError(f"unknown kernel family: {self.family!r}")
        if not np.isfinite(self.lengthscale) or self.lengthscale <= 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if not np.isfinite(self.signal_variance) or self.signal_variance <= 0:
            raise ValueError(
                f"signal_variance must be positive, got {self.signal_variance}"
            )


def kernel_eval(config, x, v):
    """Evaluate the kernel on a single pair of points.

    Parameters
    ----------
    config : KernelConfig
    x, v : array_like, shape (d,)

    Returns
    -------
    float
    """
    x = np.asarray(x, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if x.shape[0] != v.shape[0]:
        raise ValueError(
            f"dimension mismatch: first point has length {x.shape[0]}, "
            f"second has length {v.shape[0]}"
        )
    return float(kernel_vector(config, x, v[None, :])[0])


def kernel_vector(config, x, points):
    """Kernel values between one point and each row of ``points``.

    This is the primitive the Gram construction is built on: evaluating the
    same (x, points) pair always executes the same float operations, so
    incremental Gram updates reproduce a fresh build bit for bit.

    Parameters
    ----------
    config : KernelConfig
    x : ndarray, shape (d,)
    points : ndarray, shape (n, d)

    Returns
    -------
    ndarray, shape (n,)
    """
    x = np.asarray(x, dtype=float)
    points = np.asarray(points, dtype=float)
    if config.family == LINEAR:
        return points @ x
    diff = points - x[None, :]
    sq_dist = np.einsum("ij,ij->i", diff, diff)
    return config.signal_variance * np.exp(-sq_dist / (2.0 * config.lengthscale**2))


def kernel_matrix(config, a, b):
    """Kernel cross-matrix between the rows of ``a`` and the rows of ``b``.

    Parameters
    ----------
    config : KernelConfig
    a : ndarray, shape (n, d)
    b : ndarray, shape (m, d)

    Returns
    -------
    ndarray, shape (n, m)
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"dimension mismatch: first block has {a.shape[1]} columns, "
            f"second has {b.shape[1]}"
        )
    if config.family == LINEAR:
        return a @ b.T
    sq_dist = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq_dist, 0.0, out=sq_dist)
    return config.signal_variance * np.exp(-sq_dist / (2.0 * config.lengthscale**2))


def kernel_diag(config, a):
    """Kernel values k(x, x) for each row of ``a``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if config.family == LINEAR:
        return np.einsum("ij,ij->i", a, a)
    return np.full(a.shape[0], config.signal_variance)


@dataclass(frozen=True)
class GpModel:
    """Fitted Gaussian process.

    Fields
    ------
    kernel : KernelConfig
    noise_std : float
    train_inputs : ndarray, shape (n, d)
    train_targets : ndarray, shape (n,)
        Raw targets as supplied.
    target_mean : float
        Sample mean subtracted before fitting, added back at prediction.
    chol_lower : ndarray, shape (n, n)
        Lower factor L with L L^T = K + (noise_std^2 + jitter) I.
    alpha : ndarray, shape (n,)
        (K + (noise_std^2 + jitter) I)^{-1} (y - mean).
    jitter : float
        Diagonal jitter actually added; 0.0 when none was needed.
    """

    kernel: KernelConfig
    noise_std: float
    train_inputs: np.ndarray
    train_targets: np.ndarray
    target_mean: float
    chol_lower: np.ndarray
    alpha: np.ndarray
    jitter: float


@dataclass(frozen=True)
class PosteriorPrediction:
    mean: float
    variance: float


def gp_fit(inputs, targets, kernel, noise_std):
    """Fit a GP by Cholesky factorization of the regularized kernel matrix.

    If the factorization fails, diagonal jitter is added on a geometric
    ladder (relative to the mean kernel diagonal) until it succeeds.

    Parameters
    ----------
    inputs : ndarray, shape (n, d)
    targets : ndarray, shape (n,)
    kernel : KernelConfig
    noise_std : float
        Observation noise standard deviation, >= 0.

    Returns
    -------
    GpModel
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError(
            f"got {inputs.shape[0]} inputs but {targets.shape[0]} targets"
        )
    if inputs.shape[0] == 0:
        raise ValueError("cannot fit a GP on an empty dataset")
    if not np.all(np.isfinite(inputs)):
        raise ValueError("inputs contain non-finite values")
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets contain non-finite values")
    if not np.isfinite(noise_std) or noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")

    target_mean = float(targets.mean())
    centered = targets - target_mean

    gram = kernel_matrix(kernel, inputs, inputs)
    gram = 0.5 * (gram + gram.T)
    diag_scale = float(np.mean(np.diag(gram)))
    if diag_scale <= 0:
        diag_scale = 1.0

    jitter = 0.0
    while True:
        try:
            factor = cholesky(
                gram
                + (noise_std**2 + jitter) * np.eye(inputs.shape[0]),
                lower=True,
            )
            break
        except np.linalg.LinAlgError:
            pass
        if jitter == 0.0:
            jitter = _JITTER_START * diag_scale
        elif jitter < _JITTER_STOP * diag_scale:
            jitter *= _JITTER_GROWTH
        else:
            raise np.linalg.LinAlgError(
                "kernel matrix is not positive definite even with jitter "
                f"{jitter:.3e} on the diagonal"
            )

    alpha = cho_solve((factor, True), centered)
    return GpModel(
        kernel=kernel,
        noise_std=float(noise_std),
        train_inputs=inputs,
        train_targets=targets,
        target_mean=target_mean,
        chol_lower=factor,
        alpha=alpha,
        jitter=float(jitter),
    )


def gp_predict_batch(model, points):
    """Posterior mean and variance at each row of ``points``.

    Parameters
    ----------
    model : GpModel
    points : ndarray, shape (m, d)

    Returns
    -------
    (ndarray, ndarray)
        Means and variances, each of shape (m,). Variances are clamped at
        zero; a variance below -1e-6 raises instead of being clamped.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    cross = kernel_matrix(model.kernel, points, model.train_inputs)
    means = cross @ model.alpha + model.target_mean
    solved = solve_triangular(model.chol_lower, cross.T, lower=True)
    variances = kernel_diag(model.kernel, points) - np.einsum(
        "ij,ij->j", solved, solved
    )
    lowest = float(variances.min())
    if lowest < -_VARIANCE_TOLERANCE:
        raise FloatingPointError(
            f"posterior variance {lowest:.3e} is negative beyond tolerance"
        )
    np.maximum(variances, 0.0, out=variances)
    return means, variances


def gp_predict(model, x):
    """Posterior prediction at a single point."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.train_inputs.shape[1]:
        raise ValueError(
            f"dimension mismatch: point has length {x.shape[0]}, "
            f"model was trained on dimension {model.train_inputs.shape[1]}"
        )
    means, variances = gp_predict_batch(model, x[None, :])
    return PosteriorPrediction(mean=float(means[0]), variance=float(variances[0]))


def log_marginal_likelihood(model):
    """Log marginal likelihood of the model's own training data.

    Computed from the cached Cholesky factor on the centered targets:
    -sum(log diag L) - 0.5 (y - mean)^T alpha - (n/2) log(2 pi).
    """
    centered = model.train_targets - model.target_mean
    n = centered.shape[0]
    log_det_half = float(np.sum(np.log(np.diag(model.chol_lower))))
    return float(
        -log_det_half
        - 0.5 * centered @ model.alpha
        - 0.5 * n * np.log(2.0 * np.pi)
    )


@dataclass(frozen=True)
class HyperSearchSpace:
    """Log-space box searched by ``fit_hyperparameters``.

    Each field is a (low, high) pair of natural-log bounds.
    """

    log_lengthscale: tuple
    log_signal_variance: tuple
    log_noise_std: tuple


def default_search_space(inputs, targets):
    """Data-driven search bounds.

    Lengthscale spans 1e-2 to 1e2 times the median pairwise distance,
    signal variance 1e-3 to 1e3 times the target variance, noise 1e-6 to
    1.0 times the target standard deviation.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if inputs.shape[0] >= 2:
        median_dist = float(np.median(pdist(inputs)))
    else:
        median_dist = 0.0
    if median_dist <= 0:
        median_dist = 1.0
    target_var = float(targets.var())
    if target_var <= 0:
        target_var = 1.0
    target_std = float(targets.std())
    if target_std <= 0:
        target_std = 1e-6
    return HyperSearchSpace(
        log_lengthscale=(np.log(1e-2 * median_dist), np.log(1e2 * median_dist)),
        log_signal_variance=(np.log(1e-3 * target_var), np.log(1e3 * target_var)),
        log_noise_std=(np.log(1e-6 * target_std), np.log(target_std)),
    )


_GRID_POINTS = 16
_REFINE_PASSES = 2
_MAX_SWEEPS = 20


def fit_hyperparameters(inputs, targets, search_space=None):
    """Select squared-exponential hyperparameters by maximizing the LML.

    Deterministic multi-start coordinate descent over a log-space grid
    (16 points per axis), followed by 2 refinement passes that shrink each
    axis to the neighborhood of the incumbent. Candidates whose kernel
    matrix cannot be factorized score -inf.

    Parameters
    ----------
    inputs : ndarray, shape (n, d)
    targets : ndarray, shape (n,)
    search_space : HyperSearchSpace, optional
        Defaults to ``default_search_space(inputs, targets)``.

    Returns
    -------
    (KernelConfig, float)
        The selected kernel and noise standard deviation.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if search_space is None:
        search_space = default_search_space(inputs, targets)
    bounds = [
        search_space.log_lengthscale,
        search_space.log_signal_variance,
        search_space.log_noise_std,
    ]
    for low, high in bounds:
        if not (np.isfinite(low) and np.isfinite(high) and low <= high):
            raise ValueError(f"invalid search bounds ({low}, {high})")

    def score(log_params):
        kernel = KernelConfig(
            family=SQUARED_EXPONENTIAL,
            lengthscale=float(np.exp(log_params[0])),
            signal_variance=float(np.exp(log_params[1])),
        )
        noise = float(np.exp(log_params[2]))
        try:
            model = gp_fit(inputs, targets, kernel, noise)
        except np.linalg.LinAlgError:
            return -np.inf
        value = log_marginal_likelihood(model)
        return value if np.isfinite(value) else -np.inf

    def descend(grids, start_index, cache):
        # Coordinate descent on grid indices; memoized per index tuple.
        # The cache is only valid for one grid set and is shared by all
        # starts that use it.
        def value_at(index):
            key = tuple(index)
            if key not in cache:
                cache[key] = score([grids[a][i] for a, i in enumerate(index)])
            return cache[key]

        index = list(start_index)
        best = value_at(index)
        for _ in range(_MAX_SWEEPS):
            moved = False
            for axis in range(3):
                candidates = []
                for i in range(len(grids[axis])):
                    trial = list(index)
                    trial[axis] = i
                    candidates.append((value_at(trial), i))
                top_value, top_i = max(candidates, key=lambda c: (c[0], -c[1]))
                if top_value > best:
                    best = top_value
                    index[axis] = top_i
                    moved = True
            if not moved:
                break
        return best, index

    grids = [np.linspace(low, high, _GRID_POINTS) for low, high in bounds]
    starts = [
        (4, 4, 4),
        (8, 8, 8),
        (12, 12, 12),
        (4, 12, 4),
        (12, 4, 12),
    ]
    best_value = -np.inf
    best_index = None
    best_grids = grids
    coarse_cache = {}
    for start in starts:
        value, index = descend(grids, start, coarse_cache)
        if value > best_value:
            best_value = value
            best_index = index
    if best_index is None or not np.isfinite(best_value):
        raise np.linalg.LinAlgError(
            "every hyperparameter candidate failed to factorize"
        )

    for _ in range(_REFINE_PASSES):
        refined = []
        for axis in range(3):
            grid = best_grids[axis]
            i = best_index[axis]
            low = grid[max(i - 1, 0)]
            high = grid[min(i + 1, len(grid) - 1)]
            refined.append(np.linspace(low, high, _GRID_POINTS))
        value, index = descend(refined, [_GRID_POINTS // 2] * 3, {})
        if value >= best_value:
            best_value = value
            best_index = index
            best_grids = refined

    log_best = [best_grids[a][best_index[a]] for a in range(3)]
    kernel = KernelConfig(
        family=SQUARED_EXPONENTIAL,
        lengthscale=float(np.exp(log_best[0])),
        signal_variance=float(np.exp(log_best[1])),
    )
    return kernel, float(np.exp(log_best[2]))
