"""Synthetic problems, dummy-dimension embedding, suites, and CSV export.

Problems expose vectorized objectives (an (m, D) block of points maps to
(m,) values). The embedding hides a low-dimensional objective inside a
high-dimensional unit box by reading a seeded choice of coordinates and
ignoring the rest.
"""

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .driver import RunConfig, run

PROBLEM_NAMES = ("branin", "trimodal")

# Exact Branin minimum, 10 / (8 pi).
BRANIN_MINIMUM = 1.25 / np.pi

_TRIMODAL_CENTERS = np.array([[0.2, 0.2], [0.5, 0.5], [0.8, 0.8]])
_TRIMODAL_WEIGHTS = (0.1, 0.8, 0.1)


@dataclass(frozen=True)
class Problem:
    """Box-constrained objective with optional known optimum.

    Fields
    ------
    name : str
    dim_D : int
        Ambient dimension.
    intrinsic_dim_de : int
        Coordinates the objective actually depends on.
    bounds : ndarray, shape (dim_D, 2)
    objective : callable
        Maps (m, dim_D) to (m,); also accepts a single (dim_D,) vector.
    known_optimum : float or None
    sense : str
        ``"min"`` or ``"max"``.
    embedding_indices : tuple or None
        Ambient coordinates an embedded objective reads, None otherwise.
    """

    name: str
    dim_D: int
    intrinsic_dim_de: int
    bounds: np.ndarray
    objective: object
    known_optimum: float
    sense: str
    embedding_indices: tuple = None


def branin(u):
    """Branin function on [-5, 10] x [0, 15].

    a (u2 - b u1^2 + c u1 - 6)^2 + s (1 - t) cos(u1) + s with a = 1,
    b = 5.1 / (4 pi^2), c = 5 / pi, s = 10, t = 1 / (8 pi). Global minimum
    10 / (8 pi) at (pi, 2.275), (-pi, 12.275), and (9.42478, 2.475).
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    block = np.atleast_2d(u)
    if block.shape[1] != 2:
        raise ValueError(f"branin expects 2 coordinates, got {block.shape[1]}")
    b = 5.1 / (4.0 * np.pi**2)
    c = 5.0 / np.pi
    t = 1.0 / (8.0 * np.pi)
    residual = block[:, 1] - b * block[:, 0] ** 2 + c * block[:, 0] - 6.0
    values = residual**2 + 10.0 * (1.0 - t) * np.cos(block[:, 0]) + 10.0
    return float(values[0]) if single else values


def trimodal(u, centers=None, weights=_TRIMODAL_WEIGHTS):
    """Log of a three-component isotropic Gaussian mixture.

    Component variance is 0.01 * d_e^0.1 where d_e is the center
    dimension. Evaluated through a max-shifted log-sum-exp, so it never
    takes log of an underflowed zero.
    """
    if centers is None:
        centers = _TRIMODAL_CENTERS
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if centers.shape[0] != weights.shape[0]:
        raise ValueError(
            f"got {centers.shape[0]} centers but {weights.shape[0]} weights"
        )
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    block = np.atleast_2d(u)
    d_e = centers.shape[1]
    if block.shape[1] != d_e:
        raise ValueError(
            f"trimodal expects {d_e} coordinates, got {block.shape[1]}"
        )
    variance = 0.01 * d_e**0.1
    # log density of each component at each point, (m, n_centers)
    diffs = block[:, None, :] - centers[None, :, :]
    sq_dist = np.einsum("mij,mij->mi", diffs, diffs)
    log_norm = -0.5 * d_e * np.log(2.0 * np.pi * variance)
    log_densities = log_norm - sq_dist / (2.0 * variance)
    values = logsumexp(log_densities, axis=1, b=weights[None, :])
    return float(values[0]) if single else values


def branin_problem():
    """Raw 2-d Branin, minimized."""
    return Problem(
        name="branin",
        dim_D=2,
        intrinsic_dim_de=2,
        bounds=np.array([[-5.0, 10.0], [0.0, 15.0]]),
        objective=branin,
        known_optimum=BRANIN_MINIMUM,
        sense="min",
    )


def trimodal_problem():
    """Raw 2-d trimodal log-mixture on the unit box, maximized.

    The dominant center is the exact maximizer: the two side modes sit
    symmetrically about it, so their pulls cancel there.
    """
    peak = trimodal(_TRIMODAL_CENTERS[1])
    return Problem(
        name="trimodal",
        dim_D=2,
        intrinsic_dim_de=2,
        bounds=np.array([[0.0, 1.0], [0.0, 1.0]]),
        objective=trimodal,
        known_optimum=peak,
        sense="max",
    )


def embed(problem, ambient_dim, seed, indices=None):
    """Hide a problem inside a [0, 1]^D box with dummy coordinates.

    The embedded objective reads d_e seeded distinct coordinates,
    affinely rescaled from [0, 1] to the intrinsic bounds; every other
    coordinate is ignored. Optimum and sense carry over.

    Parameters
    ----------
    problem : Problem
    ambient_dim : int
        D >= the problem's dimension.
    seed : int
        Seeds the coordinate choice.
    indices : sequence of int, optional
        Forces the coordinate choice (distinct, within range).

    Returns
    -------
    Problem
    """
    d_e = problem.dim_D
    if ambient_dim < d_e:
        raise ValueError(
            f"ambient dimension {ambient_dim} is below the problem's {d_e}"
        )
    if indices is None:
        rng = np.random.default_rng(seed)
        indices = rng.choice(ambient_dim, size=d_e, replace=False)
    indices = np.asarray(indices, dtype=int)
    if indices.shape != (d_e,):
        raise ValueError(f"need exactly {d_e} indices, got {indices.shape}")
    if len(set(indices.tolist())) != d_e:
        raise ValueError("embedding indices must be distinct")
    if indices.min() < 0 or indices.max() >= ambient_dim:
        raise ValueError(
            f"indices must lie in [0, {ambient_dim}), got {indices.tolist()}"
        )

    inner_bounds = np.asarray(problem.bounds, dtype=float)
    low = inner_bounds[:, 0]
    width = inner_bounds[:, 1] - low
    inner_objective = problem.objective

    def objective(x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        block = np.atleast_2d(x)
        if block.shape[1] != ambient_dim:
            raise ValueError(
                f"expected {ambient_dim} coordinates, got {block.shape[1]}"
            )
        inner = low[None, :] + block[:, indices] * width[None, :]
        values = inner_objective(inner)
        return float(np.asarray(values).ravel()[0]) if single else values

    return Problem(
        name=f"{problem.name}-D{ambient_dim}",
        dim_D=ambient_dim,
        intrinsic_dim_de=problem.intrinsic_dim_de,
        bounds=np.tile([0.0, 1.0], (ambient_dim, 1)),
        objective=objective,
        known_optimum=problem.known_optimum,
        sense=problem.sense,
        embedding_indices=tuple(int(i) for i in indices),
    )


def make_problem(name, ambient_dim, seed):
    """Embedded instance of a named problem; the embedding is seeded."""
    if name == "branin":
        base = branin_problem()
    elif name == "trimodal":
        base = trimodal_problem()
    else:
        raise ValueError(
            f"unknown problem {name!r}, expected one of {PROBLEM_NAMES}"
        )
    return embed(base, ambient_dim, seed)


@dataclass(frozen=True)
class SuiteCell:
    """One (problem, method, config) cell executed over several seeds."""

    problem: str
    method: str
    dim_D: int
    target_dim_d: int
    budget_T: int = 500
    init_n: int = 50
    seeds: tuple = tuple(range(20))
    beta: float = 4.0


@dataclass
class CellResult:
    """Aggregated outcome of one suite cell.

    ``mean_regret``/``stderr_regret`` are per-iteration aggregates over
    the completed runs; both are None when any seed failed (the cell is
    aborted), though completed traces are kept for inspection.
    """

    cell: SuiteCell
    traces: dict
    errors: dict
    mean_regret: np.ndarray
    stderr_regret: np.ndarray
    wall_seconds: float


@dataclass
class BenchmarkReport:
    cells: list
    metadata: dict = field(default_factory=dict)


def _execute_run(cell, seed):
    problem = make_problem(cell.problem, cell.dim_D, seed)
    cfg = RunConfig(
        budget_T=cell.budget_T,
        init_n=cell.init_n,
        target_dim_d=cell.target_dim_d,
        seed=seed,
        method=cell.method,
        beta=cell.beta,
    )
    return run(problem, cfg)


def _execute_run_guarded(args):
    index, cell, seed = args
    started = time.perf_counter()
    try:
        trace, error = _execute_run(cell, seed), None
    except Exception as exc:
        trace, error = None, f"{type(exc).__name__}: {exc}"
    return index, seed, trace, error, time.perf_counter() - started


def run_suite(cells, jobs=1):
    """Execute every (cell, seed) run and aggregate regret per cell.

    Runs are independent and execute concurrently when ``jobs`` > 1. A
    failed run aborts its cell (recorded in the cell's errors); other
    cells are unaffected.

    Parameters
    ----------
    cells : sequence of SuiteCell
    jobs : int

    Returns
    -------
    BenchmarkReport
    """
    cells = list(cells)
    started = time.perf_counter()
    tasks = [
        (index, cell, seed)
        for index, cell in enumerate(cells)
        for seed in sorted(cell.seeds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_execute_run_guarded, tasks))
    else:
        outcomes = [_execute_run_guarded(task) for task in tasks]

    by_cell = {index: ({}, {}, [0.0]) for index in range(len(cells))}
    for index, seed, trace, error, seconds in outcomes:
        traces, errors, walls = by_cell[index]
        walls[0] += seconds
        if error is None:
            traces[seed] = trace
        else:
            errors[seed] = error

    results = []
    for index, cell in enumerate(cells):
        traces, errors, walls = by_cell[index]
        mean = stderr = None
        if not errors and traces:
            matrix = np.vstack(
                [traces[seed].simple_regret for seed in sorted(traces)]
            )
            mean = matrix.mean(axis=0)
            if matrix.shape[0] > 1:
                stderr = matrix.std(axis=0, ddof=1) / np.sqrt(matrix.shape[0])
            else:
                stderr = np.zeros(matrix.shape[1])
        results.append(
            CellResult(
                cell=cell,
                traces=traces,
                errors=errors,
                mean_regret=mean,
                stderr_regret=stderr,
                wall_seconds=walls[0],
            )
        )
    return BenchmarkReport(
        cells=results,
        metadata={
            "jobs": jobs,
            "wall_seconds": time.perf_counter() - started,
        },
    )


def _format(value):
    # Full round-trip precision.
    return repr(float(value))


def export_csv(report, path):
    """Write ``runs.csv`` (raw traces) and ``summary.csv`` (aggregates).

    Completed runs are always written; summary rows cover only cells
    that aggregated (no failed seeds). Returns the two file paths.
    """
    os.makedirs(path, exist_ok=True)
    runs_path = os.path.join(path, "runs.csv")
    summary_path = os.path.join(path, "summary.csv")

    with open(runs_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "problem",
                "method",
                "D",
                "d",
                "seed",
                "iteration",
                "y",
                "best_so_far",
                "simple_regret",
            ]
        )
        for result in report.cells:
            cell = result.cell
            for seed in sorted(result.traces):
                trace = result.traces[seed]
                for i, (_, y) in enumerate(trace.evaluations):
                    regret = (
                        _format(trace.simple_regret[i])
                        if trace.simple_regret is not None
                        else ""
                    )
                    writer.writerow(
                        [
                            cell.problem,
                            cell.method,
                            cell.dim_D,
                            cell.target_dim_d,
                            seed,
                            i + 1,
                            _format(y),
                            _format(trace.best_so_far[i]),
                            regret,
                        ]
                    )

    with open(summary_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "problem",
                "method",
                "D",
                "d",
                "iteration",
                "mean_regret",
                "stderr_regret",
                "n_runs",
            ]
        )
        for result in report.cells:
            if result.mean_regret is None:
                continue
            cell = result.cell
            for i in range(result.mean_regret.shape[0]):
                writer.writerow(
                    [
                        cell.problem,
                        cell.method,
                        cell.dim_D,
                        cell.target_dim_d,
                        i + 1,
                        _format(result.mean_regret[i]),
                        _format(result.stderr_regret[i]),
                        len(result.traces),
                    ]
                )
    return runs_path, summary_path


def parse_seed_list(text):
    """Parse a seed count ("20") or explicit comma list ("0,3,7")."""
    text = str(text).strip()
    if "," in text:
        seeds = tuple(int(part) for part in text.split(",") if part.strip())
        if not seeds:
            raise ValueError(f"empty seed list: {text!r}")
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"duplicate seeds in {text!r}")
        return seeds
    count = int(text)
    if count < 1:
        raise ValueError(f"seed count must be >= 1, got {count}")
    return tuple(range(count))


_SUITE_KEYS = ("problem", "method", "D", "d", "budget", "init", "seeds", "beta")


def parse_suite_file(path):
    """Parse a line-oriented suite description into cells.

    Each non-blank, non-comment line is one cell: whitespace-separated
    key=value pairs with keys problem, method, D, d, and optionally
    budget (500), init (50), seeds (20), beta (4.0). ``seeds`` is a count
    or a comma-separated list.
    """
    cells = []
    with open(path, encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            pairs = {}
            for token in line.split():
                key, sep, value = token.partition("=")
                if not sep or not value:
                    raise ValueError(
                        f"{path}:{number}: expected key=value, got {token!r}"
                    )
                if key not in _SUITE_KEYS:
                    raise ValueError(
                        f"{path}:{number}: unknown key {key!r}, "
                        f"expected one of {_SUITE_KEYS}"
                    )
                if key in pairs:
                    raise ValueError(f"{path}:{number}: duplicate key {key!r}")
                pairs[key] = value
            for required in ("problem", "method", "D", "d"):
                if required not in pairs:
                    raise ValueError(
                        f"{path}:{number}: missing required key {required!r}"
                    )
            try:
                cell = SuiteCell(
                    problem=pairs["problem"],
                    method=pairs["method"],
                    dim_D=int(pairs["D"]),
                    target_dim_d=int(pairs["d"]),
                    budget_T=int(pairs.get("budget", 500)),
                    init_n=int(pairs.get("init", 50)),
                    seeds=parse_seed_list(pairs.get("seeds", "20")),
                    beta=float(pairs.get("beta", 4.0)),
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{number}: {exc}") from None
            if cell.problem not in PROBLEM_NAMES:
                raise ValueError(
                    f"{path}:{number}: unknown problem {cell.problem!r}"
                )
            cells.append(cell)
    return cells
