"""Optimization loops producing regret traces.

Four methods share one evaluation protocol: an initial uniform design
drawn from a seed stream that does not depend on the method, followed by
guided (or random) queries until the budget is spent. Minimized problems
are negated internally so the model side always maximizes.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .acquisition import (
    CmaesConfig,
    UcbConfig,
    default_cmaes_config,
    maximize_acquisition,
    ucb_values,
)
from .gp import KernelConfig, fit_hyperparameters, gp_fit, gp_predict_batch
from .kisir import centered_cross_gram, gram_append, gram_build, kisir_directions
from .sdr import project, sir_directions

METHODS = ("sir-bo", "kisir-bo", "random", "full-gp-ucb")

# Dimension cap for the dense full-space baseline.
FULL_GP_DIM_CAP = 200

# Observations may not beat a declared optimum by more than this.
_OPTIMUM_SLACK = 1e-9

# Wall-time taxonomy: objective = problem evaluations; gram = feature
# mapping / kernel columns (the only ambient-dimension-bound model cost);
# eigen = subspace decompositions; gp = hyperparameter search and model
# fitting; cma = acquisition maximization, its predictions included.
_STAGES = ("objective", "gram", "eigen", "gp", "cma")


@dataclass(frozen=True)
class RunConfig:
    """Settings for one optimization run.

    Parameters
    ----------
    budget_T : int
        Total objective evaluations, including the initial design.
    init_n : int
        Initial uniform evaluations, 0 < init_n < budget_T.
    target_dim_d : int
        Requested subspace dimension, >= 1.
    sir_refresh_every : int
        Guided iterations between SIR direction refreshes (SIR-BO only;
        KISIR-BO refreshes every iteration).
    hyper_refresh_every : int
        Guided iterations between GP hyperparameter refits.
    seed : int
    method : str
        One of ``sir-bo``, ``kisir-bo``, ``random``, ``full-gp-ucb``.
    beta : float
        UCB exploration weight (fixed schedule).
    ucb_schedule : str
        ``"fixed"`` or ``"log-growth"``.
    cma_generations : int
    cma_population : int
        0 selects 4 + floor(3 ln D) capped at 64.
    input_lengthscale : float
        Lengthscale of the KISIR input kernel on unit-scaled inputs. 0
        selects the median pairwise distance of the initial design.
    noise_floor : float
        Lower bound applied to the fitted GP noise for conditioning.
    """

    budget_T: int
    init_n: int = 50
    target_dim_d: int = 10
    sir_refresh_every: int = 10
    hyper_refresh_every: int = 20
    seed: int = 0
    method: str = "sir-bo"
    beta: float = 4.0
    ucb_schedule: str = "fixed"
    cma_generations: int = 100
    cma_population: int = 0
    input_lengthscale: float = 0.0
    noise_floor: float = 1e-6

    def __post_init__(self):
        if not 0 < self.init_n < self.budget_T:
            raise ValueError(
                f"need 0 < init_n < budget_T, got init_n={self.init_n}, "
                f"budget_T={self.budget_T}"
            )
        if self.target_dim_d < 1:
            raise ValueError(f"target_dim_d must be >= 1, got {self.target_dim_d}")
        if self.sir_refresh_every < 1 or self.hyper_refresh_every < 1:
            raise ValueError("refresh intervals must be >= 1")
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}, expected one of {METHODS}"
            )
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.cma_population < 0 or self.input_lengthscale < 0:
            raise ValueError("cma_population and input_lengthscale must be >= 0")


@dataclass
class RegretTrace:
    """Evaluation history of one run.

    Fields
    ------
    evaluations : list of (ndarray, float)
        Queried points and their objective values, in query order.
    best_so_far : ndarray, shape (T,)
        Running best in the problem's own sense.
    simple_regret : ndarray or None
        |known_optimum - best_so_far| when the optimum is declared.
    metadata : dict
        Method, seed, stage timings, fallback iterations, subspace angles.
    """

    evaluations: list
    best_so_far: np.ndarray
    simple_regret: np.ndarray
    metadata: dict = field(default_factory=dict)


class _Recorder:
    """Tracks evaluations, budget, and per-stage wall time for one run."""

    def __init__(self, problem, cfg):
        self.problem = problem
        self.bounds = np.asarray(problem.bounds, dtype=float)
        if self.bounds.ndim != 2 or self.bounds.shape[1] != 2:
            raise ValueError(
                f"problem bounds must have shape (D, 2), got {self.bounds.shape}"
            )
        if not np.all(np.isfinite(self.bounds)):
            raise ValueError("problem bounds must be finite")
        if problem.sense not in ("min", "max"):
            raise ValueError(f"unknown sense {problem.sense!r}")
        self.maximize = problem.sense == "max"
        self.budget = cfg.budget_T
        self.xs = []
        self.ys = []
        self.stage_seconds = dict.fromkeys(_STAGES, 0.0)

    def evaluate(self, x):
        if len(self.ys) >= self.budget:
            raise RuntimeError(f"evaluation budget {self.budget} exhausted")
        x = np.asarray(x, dtype=float).ravel()
        start = time.perf_counter()
        y = float(np.asarray(self.problem.objective(x[None, :])).ravel()[0])
        self.stage_seconds["objective"] += time.perf_counter() - start
        if not np.isfinite(y):
            raise FloatingPointError(f"objective returned non-finite value {y}")
        optimum = self.problem.known_optimum
        if optimum is not None:
            beats = y > optimum + _OPTIMUM_SLACK if self.maximize else (
                y < optimum - _OPTIMUM_SLACK
            )
            if beats:
                raise RuntimeError(
                    f"evaluation {y!r} beats the declared optimum {optimum!r}"
                )
        self.xs.append(x)
        self.ys.append(y)
        return y

    def add_time(self, stage, seconds):
        self.stage_seconds[stage] += seconds

    @property
    def inputs(self):
        return np.asarray(self.xs)

    @property
    def internal_targets(self):
        # Internal convention is maximization.
        values = np.asarray(self.ys)
        return values if self.maximize else -values

    def trace(self, metadata):
        values = np.asarray(self.ys)
        best = np.maximum.accumulate(values) if self.maximize else (
            np.minimum.accumulate(values)
        )
        optimum = self.problem.known_optimum
        regret = np.abs(optimum - best) if optimum is not None else None
        metadata = dict(metadata)
        metadata["stage_seconds"] = dict(self.stage_seconds)
        return RegretTrace(
            evaluations=list(zip(self.xs, values.tolist())),
            best_so_far=best,
            simple_regret=regret,
            metadata=metadata,
        )


def _streams(cfg):
    # Two independent streams: the initial design must not depend on the
    # method, so it gets its own spawn.
    init_seq, method_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(method_seq)


def _uniform(rng, bounds, count):
    low = bounds[:, 0]
    width = bounds[:, 1] - bounds[:, 0]
    return low + rng.random((count, bounds.shape[0])) * width


def _cma_config(cfg, dim, seed):
    base = default_cmaes_config(dim, seed=seed, max_generations=cfg.cma_generations)
    if cfg.cma_population:
        return CmaesConfig(
            population=cfg.cma_population,
            max_generations=base.max_generations,
            covariance_mode=base.covariance_mode,
            seed=seed,
        )
    return base


def _max_principal_angle_degrees(rows_a, rows_b):
    # Largest principal angle between the row spans, for diagnostics only.
    qa, _ = np.linalg.qr(rows_a.T)
    qb, _ = np.linalg.qr(rows_b.T)
    singulars = np.linalg.svd(qa.T @ qb, compute_uv=False)
    k = min(rows_a.shape[0], rows_b.shape[0])
    smallest = float(np.clip(singulars[:k].min(), -1.0, 1.0))
    return float(np.degrees(np.arccos(smallest)))


def _maximize_with_stages(recorder, acq, cma_cfg, inner):
    # inner["gram"] is filled by the acquisition closure (feature mapping
    # or kernel columns, the only dimension-bound cost); the rest of the
    # optimizer's wall time, model predictions included, counts as cma.
    start = time.perf_counter()
    best_x, _ = maximize_acquisition(acq, recorder.bounds, cma_cfg)
    elapsed = time.perf_counter() - start
    recorder.add_time("gram", inner["gram"])
    recorder.add_time("cma", max(elapsed - inner["gram"], 0.0))
    return best_x


def run(problem, cfg):
    """Dispatch one run by ``cfg.method``."""
    if cfg.method == "sir-bo":
        return run_sir_bo(problem, cfg)
    if cfg.method == "kisir-bo":
        return run_kisir_bo(problem, cfg)
    return run_baseline(problem, cfg)


def run_sir_bo(problem, cfg):
    """GP-UCB in a subspace learned online by SIR.

    Directions are refreshed every ``sir_refresh_every`` guided
    iterations, GP hyperparameters every ``hyper_refresh_every``. When a
    refresh finds no usable direction the iteration falls back to a
    uniform proposal, recorded in the trace metadata.
    """
    if cfg.method != "sir-bo":
        raise ValueError(f"config method is {cfg.method!r}, expected 'sir-bo'")
    recorder = _Recorder(problem, cfg)
    rng_init, rng_method = _streams(cfg)
    for x in _uniform(rng_init, recorder.bounds, cfg.init_n):
        recorder.evaluate(x)

    dim = recorder.bounds.shape[0]
    decomposition = None
    kernel, noise = None, None
    fallbacks = []
    angles = []

    for it in range(cfg.budget_T - cfg.init_n):
        cma_seed = int(rng_method.integers(2**31 - 1))
        inputs = recorder.inputs
        targets = recorder.internal_targets

        if decomposition is None or it % cfg.sir_refresh_every == 0:
            start = time.perf_counter()
            refreshed = sir_directions(inputs, targets, cfg.target_dim_d)
            recorder.add_time("eigen", time.perf_counter() - start)
            if (
                decomposition is not None
                and decomposition.d_eff
                and refreshed.d_eff
            ):
                angles.append(
                    (
                        len(recorder.ys),
                        _max_principal_angle_degrees(
                            decomposition.directions, refreshed.directions
                        ),
                    )
                )
            decomposition = refreshed

        if decomposition.d_eff == 0:
            fallbacks.append(len(recorder.ys))
            recorder.evaluate(_uniform(rng_method, recorder.bounds, 1)[0])
            continue

        start = time.perf_counter()
        features = project(decomposition, inputs)
        recorder.add_time("gram", time.perf_counter() - start)

        start = time.perf_counter()
        if kernel is None or it % cfg.hyper_refresh_every == 0:
            kernel, noise = fit_hyperparameters(features, targets)
        model = gp_fit(features, targets, kernel, max(noise, cfg.noise_floor))
        recorder.add_time("gp", time.perf_counter() - start)

        ucb_cfg = UcbConfig(
            beta=cfg.beta, schedule=cfg.ucb_schedule, dim=decomposition.d_eff
        )
        iteration = it + 1
        inner = {"gram": 0.0}

        def acq(points, _d=decomposition, _m=model, _u=ucb_cfg, _t=iteration, _i=inner):
            start = time.perf_counter()
            feats = project(_d, points)
            _i["gram"] += time.perf_counter() - start
            means, variances = gp_predict_batch(_m, feats)
            return ucb_values(means, variances, _u, _t)

        best_x = _maximize_with_stages(
            recorder, acq, _cma_config(cfg, dim, cma_seed), inner
        )
        recorder.evaluate(best_x)

    return recorder.trace(
        {
            "method": cfg.method,
            "seed": cfg.seed,
            "fallback_evaluations": fallbacks,
            "subspace_angles_degrees": angles,
            "d_eff": decomposition.d_eff if decomposition is not None else 0,
        }
    )


def run_kisir_bo(problem, cfg):
    """GP-UCB on kernelized-input SIR features.

    Inputs are scaled to the unit box and enter only through a Gram
    matrix, extended incrementally by each new query. Directions are
    recomputed every iteration; the per-iteration eigenproblem and GP
    stages depend on the number of observations, not on the ambient
    dimension.
    """
    if cfg.method != "kisir-bo":
        raise ValueError(f"config method is {cfg.method!r}, expected 'kisir-bo'")
    recorder = _Recorder(problem, cfg)
    rng_init, rng_method = _streams(cfg)
    for x in _uniform(rng_init, recorder.bounds, cfg.init_n):
        recorder.evaluate(x)

    dim = recorder.bounds.shape[0]
    low = recorder.bounds[:, 0]
    width = recorder.bounds[:, 1] - low
    safe_width = np.where(width > 0, width, 1.0)

    def unit_scale(points):
        return (np.atleast_2d(points) - low[None, :]) / safe_width[None, :]

    unit_init = unit_scale(recorder.inputs)
    if cfg.input_lengthscale:
        lengthscale = cfg.input_lengthscale
    else:
        lengthscale = float(np.median(pdist(unit_init)))
        if lengthscale <= 0:
            lengthscale = 1.0
    input_kernel = KernelConfig(lengthscale=lengthscale, signal_variance=1.0)

    start = time.perf_counter()
    gram_state = gram_build(unit_init, input_kernel)
    recorder.add_time("gram", time.perf_counter() - start)

    kernel, noise = None, None
    previous = None
    fallbacks = []
    angles = []

    for it in range(cfg.budget_T - cfg.init_n):
        cma_seed = int(rng_method.integers(2**31 - 1))
        targets = recorder.internal_targets

        start = time.perf_counter()
        decomposition = kisir_directions(gram_state, targets, cfg.target_dim_d)
        recorder.add_time("eigen", time.perf_counter() - start)
        if (
            previous is not None
            and previous.d_eff
            and decomposition.d_eff
            and previous.anchor_count == decomposition.anchor_count
        ):
            angles.append(
                (
                    len(recorder.ys),
                    _max_principal_angle_degrees(
                        previous.coefficients, decomposition.coefficients
                    ),
                )
            )
        previous = decomposition

        if decomposition.d_eff == 0:
            fallbacks.append(len(recorder.ys))
            x_next = _uniform(rng_method, recorder.bounds, 1)[0]
        else:
            start = time.perf_counter()
            features = decomposition.train_features.T
            if kernel is None or it % cfg.hyper_refresh_every == 0:
                kernel, noise = fit_hyperparameters(features, targets)
            model = gp_fit(features, targets, kernel, max(noise, cfg.noise_floor))
            recorder.add_time("gp", time.perf_counter() - start)

            ucb_cfg = UcbConfig(
                beta=cfg.beta, schedule=cfg.ucb_schedule, dim=decomposition.d_eff
            )
            iteration = it + 1
            inner = {"gram": 0.0}

            def acq(
                points,
                _d=decomposition,
                _g=gram_state,
                _m=model,
                _u=ucb_cfg,
                _t=iteration,
                _i=inner,
            ):
                start = time.perf_counter()
                columns = centered_cross_gram(_g, unit_scale(points))
                _i["gram"] += time.perf_counter() - start
                feats = columns @ _d.coefficients.T
                means, variances = gp_predict_batch(_m, feats)
                return ucb_values(means, variances, _u, _t)

            x_next = _maximize_with_stages(
                recorder, acq, _cma_config(cfg, dim, cma_seed), inner
            )

        recorder.evaluate(x_next)
        start = time.perf_counter()
        gram_state = gram_append(gram_state, unit_scale(x_next)[0])
        recorder.add_time("gram", time.perf_counter() - start)

    return recorder.trace(
        {
            "method": cfg.method,
            "seed": cfg.seed,
            "fallback_evaluations": fallbacks,
            "subspace_angles_degrees": angles,
            "d_eff": previous.d_eff if previous is not None else 0,
            "gram_rows": gram_state.anchor_count,
            "input_lengthscale": lengthscale,
        }
    )


def run_baseline(problem, cfg):
    """Random search, or GP-UCB on all coordinates for modest dimensions."""
    if cfg.method not in ("random", "full-gp-ucb"):
        raise ValueError(
            f"config method is {cfg.method!r}, expected 'random' or 'full-gp-ucb'"
        )
    recorder = _Recorder(problem, cfg)
    dim = recorder.bounds.shape[0]
    if cfg.method == "full-gp-ucb" and dim > FULL_GP_DIM_CAP:
        raise ValueError(
            f"full-gp-ucb fits a GP on all {dim} coordinates and is capped at "
            f"D = {FULL_GP_DIM_CAP}; use sir-bo or kisir-bo instead"
        )
    rng_init, rng_method = _streams(cfg)
    for x in _uniform(rng_init, recorder.bounds, cfg.init_n):
        recorder.evaluate(x)

    kernel, noise = None, None
    for it in range(cfg.budget_T - cfg.init_n):
        cma_seed = int(rng_method.integers(2**31 - 1))
        if cfg.method == "random":
            recorder.evaluate(_uniform(rng_method, recorder.bounds, 1)[0])
            continue

        inputs = recorder.inputs
        targets = recorder.internal_targets
        start = time.perf_counter()
        if kernel is None or it % cfg.hyper_refresh_every == 0:
            kernel, noise = fit_hyperparameters(inputs, targets)
        model = gp_fit(inputs, targets, kernel, max(noise, cfg.noise_floor))
        recorder.add_time("gp", time.perf_counter() - start)

        ucb_cfg = UcbConfig(beta=cfg.beta, schedule=cfg.ucb_schedule, dim=dim)
        iteration = it + 1
        inner = {"gram": 0.0}

        def acq(points, _m=model, _u=ucb_cfg, _t=iteration):
            means, variances = gp_predict_batch(_m, points)
            return ucb_values(means, variances, _u, _t)

        best_x = _maximize_with_stages(
            recorder, acq, _cma_config(cfg, dim, cma_seed), inner
        )
        recorder.evaluate(best_x)

    return recorder.trace({"method": cfg.method, "seed": cfg.seed})
