"""Upper confidence bound acquisition and its CMA-ES maximizer.

The UCB score is mean + sqrt(beta * variance). The maximizer is a
covariance matrix adaptation evolution strategy run in internal [0, 1]^D
coordinates with candidates clipped to the box; above 500 dimensions it
switches to a separable (diagonal covariance) update so cost stays linear
in the dimension.
"""

from dataclasses import dataclass

import numpy as np

FIXED = "fixed"
LOG_GROWTH = "log-growth"

# Covariance update is diagonal above this dimension.
DIAGONAL_THRESHOLD = 500

_POPULATION_CAP = 64
_SIGMA_CAP = 10.0


@dataclass(frozen=True)
class UcbConfig:
    """Exploration schedule for the upper confidence bound.

    Parameters
    ----------
    beta : float
        Exploration weight, > 0. Used directly by the fixed schedule.
    schedule : str
        ``"fixed"`` or ``"log-growth"``; the latter uses
        2 log(dim * t^2 * pi^2 / 0.6) at iteration t.
    dim : int
        Feature dimension entering the log-growth rule.
    """

    beta: float = 4.0
    schedule: str = FIXED
    dim: int = 1

    def __post_init__(self):
        if self.schedule not in (FIXED, LOG_GROWTH):
            raise ValueError(f"unknown schedule: {self.schedule!r}")
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


def beta_at(config, iteration):
    """Exploration weight at a 1-based iteration index."""
    if config.schedule == FIXED:
        return config.beta
    t = max(int(iteration), 1)
    return max(2.0 * np.log(config.dim * t**2 * np.pi**2 / 0.6), 0.0)


def ucb_values(means, variances, config, iteration=1):
    """Vectorized UCB scores, mean + sqrt(beta * variance)."""
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    beta = beta_at(config, iteration)
    return means + np.sqrt(beta * np.maximum(variances, 0.0))


def ucb(prediction, config, iteration=1):
    """UCB score of a single posterior prediction."""
    return float(
        ucb_values([prediction.mean], [prediction.variance], config, iteration)[0]
    )


@dataclass(frozen=True)
class CmaesConfig:
    """CMA-ES settings.

    Parameters
    ----------
    population : int
        Candidates per generation, >= 4.
    max_generations : int
    initial_step : float
        Initial step size in internal [0, 1] coordinates, in (0, 1].
    covariance_mode : str
        ``"full"`` or ``"diagonal"``.
    seed : int
    """

    population: int
    max_generations: int = 100
    initial_step: float = 0.3
    covariance_mode: str = "full"
    seed: int = 0

    def __post_init__(self):
        if self.population < 4:
            raise ValueError(f"population must be >= 4, got {self.population}")
        if self.max_generations < 1:
            raise ValueError(
                f"max_generations must be >= 1, got {self.max_generations}"
            )
        if not 0.0 < self.initial_step <= 1.0:
            raise ValueError(
                f"initial_step must be in (0, 1], got {self.initial_step}"
            )
        if self.covariance_mode not in ("full", "diagonal"):
            raise ValueError(
                f"unknown covariance_mode: {self.covariance_mode!r}"
            )


def default_cmaes_config(dim, seed=0, max_generations=100):
    """Population 4 + floor(3 ln D) capped at 64; diagonal above 500 dims."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    population = min(4 + int(3 * np.log(dim)), _POPULATION_CAP)
    mode = "full" if dim <= DIAGONAL_THRESHOLD else "diagonal"
    return CmaesConfig(
        population=population,
        max_generations=max_generations,
        covariance_mode=mode,
        seed=seed,
    )


def maximize_acquisition(objective, bounds, config):
    """Maximize a batch objective over a box with CMA-ES.

    Parameters
    ----------
    objective : callable
        Maps an (m, D) array of points to an (m,) array of scores.
        Non-finite scores mark a candidate as discarded; a generation in
        which every candidate is non-finite is an error.
    bounds : ndarray, shape (D, 2)
        Box, low <= high per row. Candidates are clipped to it.
    config : CmaesConfig

    Returns
    -------
    (ndarray, float)
        Best point found (shape (D,)) and its score. The best score never
        decreases across generations, and the box center is injected into
        the first generation so the result is never worse than the center.
    """
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    if bounds.ndim != 2 or bounds.shape[1] != 2 or bounds.shape[0] < 1:
        raise ValueError(f"bounds must have shape (D, 2), got {bounds.shape}")
    if not np.all(np.isfinite(bounds)):
        raise ValueError("bounds contain non-finite values")
    low = bounds[:, 0]
    width = bounds[:, 1] - low
    if np.any(width < 0):
        raise ValueError("bounds must satisfy low <= high")
    dim = bounds.shape[0]
    lam = config.population
    diagonal = config.covariance_mode == "diagonal"
    rng = np.random.default_rng(config.seed)

    # Recombination weights and learning rates follow the standard CMA-ES
    # parameterization; the separable variant scales the covariance rates
    # by (D + 2) / 3.
    mu = lam // 2
    weights = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights /= weights.sum()
    mueff = 1.0 / np.sum(weights**2)
    cc = (4.0 + mueff / dim) / (dim + 4.0 + 2.0 * mueff / dim)
    cs = (mueff + 2.0) / (dim + mueff + 5.0)
    c1 = 2.0 / ((dim + 1.3) ** 2 + mueff)
    cmu = min(
        1.0 - c1,
        2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dim + 2.0) ** 2 + mueff),
    )
    if diagonal:
        scale = (dim + 2.0) / 3.0
        c1 = min(1.0, c1 * scale)
        cmu = min(1.0 - c1, cmu * scale)
    damps = 1.0 + 2.0 * max(0.0, np.sqrt((mueff - 1.0) / (dim + 1.0)) - 1.0) + cs
    chi_n = np.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim**2))

    mean = np.full(dim, 0.5)
    sigma = config.initial_step
    path_sigma = np.zeros(dim)
    path_cov = np.zeros(dim)
    if diagonal:
        cov_diag = np.ones(dim)
        sqrt_cov = np.ones(dim)
    else:
        cov = np.eye(dim)
        basis = np.eye(dim)
        cov_sqrt_diag = np.ones(dim)
        stale = 0
        lazy_gap = max(1, int(1.0 / ((c1 + cmu) * dim * 10.0)))

    best_value = -np.inf
    best_internal = mean.copy()

    for generation in range(config.max_generations):
        if not diagonal and stale >= lazy_gap:
            cov = 0.5 * (cov + cov.T)
            eigenvalues, basis = np.linalg.eigh(cov)
            cov_sqrt_diag = np.sqrt(np.maximum(eigenvalues, 1e-20))
            stale = 0

        normals = rng.standard_normal((lam, dim))
        if diagonal:
            steps = normals * sqrt_cov[None, :]
        else:
            steps = (normals * cov_sqrt_diag[None, :]) @ basis.T
        candidates = mean[None, :] + sigma * steps
        np.clip(candidates, 0.0, 1.0, out=candidates)
        if generation == 0:
            candidates[0] = 0.5

        values = np.asarray(
            objective(low[None, :] + candidates * width[None, :]), dtype=float
        ).ravel()
        if values.shape[0] != lam:
            raise ValueError(
                f"objective returned {values.shape[0]} values for {lam} points"
            )
        values = np.where(np.isfinite(values), values, -np.inf)
        if not np.any(values > -np.inf):
            raise RuntimeError(
                "every candidate in a generation evaluated non-finite"
            )

        order = np.argsort(-values, kind="stable")
        if values[order[0]] > best_value:
            best_value = float(values[order[0]])
            best_internal = candidates[order[0]].copy()

        finite = order[values[order] > -np.inf]
        chosen = finite[: min(mu, finite.shape[0])]
        if chosen.shape[0] == mu:
            used_weights = weights
            used_mueff = mueff
        else:
            used_weights = weights[: chosen.shape[0]]
            used_weights = used_weights / used_weights.sum()
            used_mueff = 1.0 / np.sum(used_weights**2)

        old_mean = mean
        mean = used_weights @ candidates[chosen]
        step_w = (mean - old_mean) / sigma

        if diagonal:
            whitened = step_w / sqrt_cov
        else:
            whitened = basis @ ((basis.T @ step_w) / cov_sqrt_diag)
        path_sigma = (1.0 - cs) * path_sigma + np.sqrt(
            cs * (2.0 - cs) * used_mueff
        ) * whitened
        decay = np.sqrt(
            1.0 - (1.0 - cs) ** (2.0 * (generation + 1))
        )
        hsig = float(
            np.linalg.norm(path_sigma) / decay / chi_n < 1.4 + 2.0 / (dim + 1.0)
        )
        path_cov = (1.0 - cc) * path_cov + hsig * np.sqrt(
            cc * (2.0 - cc) * used_mueff
        ) * step_w

        offsets = (candidates[chosen] - old_mean[None, :]) / sigma
        if diagonal:
            rank_mu = used_weights @ offsets**2
            cov_diag = (
                (1.0 - c1 - cmu) * cov_diag
                + c1 * (path_cov**2 + (1.0 - hsig) * cc * (2.0 - cc) * cov_diag)
                + cmu * rank_mu
            )
            sqrt_cov = np.sqrt(np.maximum(cov_diag, 1e-20))
        else:
            rank_mu = offsets.T @ (offsets * used_weights[:, None])
            cov = (
                (1.0 - c1 - cmu) * cov
                + c1
                * (
                    np.outer(path_cov, path_cov)
                    + (1.0 - hsig) * cc * (2.0 - cc) * cov
                )
                + cmu * rank_mu
            )
            stale += 1

        sigma *= np.exp((cs / damps) * (np.linalg.norm(path_sigma) / chi_n - 1.0))
        sigma = float(min(sigma, _SIGMA_CAP))

    return low + best_internal * width, best_value
