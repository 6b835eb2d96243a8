import csv

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hdbo.bench import (
    BRANIN_MINIMUM,
    BenchmarkReport,
    SuiteCell,
    branin,
    branin_problem,
    embed,
    export_csv,
    make_problem,
    parse_seed_list,
    parse_suite_file,
    run_suite,
    trimodal,
    trimodal_problem,
)

BRANIN_MINIMIZERS = [(-np.pi, 12.275), (np.pi, 2.275), (9.42478, 2.475)]

TRIMODAL_CENTERS = np.array([[0.2, 0.2], [0.5, 0.5], [0.8, 0.8]])


def branin_reference(u1, u2):
    # independent scalar re-implementation, term by term
    a = 1.0
    b = 5.1 / (4.0 * np.pi * np.pi)
    c = 5.0 / np.pi
    r = 6.0
    s = 10.0
    t = 1.0 / (8.0 * np.pi)
    return a * (u2 - b * u1 * u1 + c * u1 - r) ** 2 + s * (
        1.0 - t
    ) * np.cos(u1) + s


def trimodal_reference(point, centers, weights):
    # direct density sum; safe in the unit box where nothing underflows
    centers = np.asarray(centers, dtype=float)
    d_e = centers.shape[1]
    variance = 0.01 * d_e**0.1
    total = 0.0
    for weight, center in zip(weights, centers):
        sq = float(np.sum((np.asarray(point) - center) ** 2))
        total += (
            weight
            * np.exp(-sq / (2.0 * variance))
            / (2.0 * np.pi * variance) ** (d_e / 2.0)
        )
    return np.log(total)


class TestBranin:
    def test_known_minimizers(self):
        for minimizer in BRANIN_MINIMIZERS:
            assert_allclose(branin(np.array(minimizer)), 0.397887, atol=1e-6)

    def test_origin_value(self):
        expected = 36.0 + 20.0 - 10.0 / (8.0 * np.pi)
        assert_allclose(branin(np.zeros(2)), expected, atol=1e-9)

    def test_matches_reference_on_grid(self):
        u1 = np.linspace(-5.0, 10.0, 10)
        u2 = np.linspace(0.0, 15.0, 10)
        for x in u1:
            for y in u2:
                assert_allclose(
                    branin(np.array([x, y])),
                    branin_reference(x, y),
                    atol=1e-9,
                )

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        points = rng.random((40, 2)) * [15.0, 15.0] + [-5.0, 0.0]
        batch = branin(points)
        singles = [branin(p) for p in points]
        assert_allclose(batch, singles, atol=1e-12)

    def test_rejects_wrong_arity(self):
        with pytest.raises(ValueError, match="2 coordinates"):
            branin(np.zeros(3))


class TestTrimodal:
    def test_peak_value_at_dominant_center(self):
        assert_allclose(trimodal(TRIMODAL_CENTERS[1]), 2.4748, atol=1e-3)

    def test_dominant_term_closed_form(self):
        variance = 0.01 * 2**0.1
        dominant_only = np.log(0.8 / (2.0 * np.pi * variance))
        assert_allclose(trimodal(TRIMODAL_CENTERS[1]), dominant_only, atol=1e-3)

    def test_permuted_weights_relocate_peak(self):
        flipped = trimodal(TRIMODAL_CENTERS[0], weights=(0.8, 0.1, 0.1))
        assert_allclose(flipped, trimodal(TRIMODAL_CENTERS[1]), atol=1e-3)

    def test_matches_reference_on_grid(self):
        weights = (0.1, 0.8, 0.1)
        grid = np.linspace(0.0, 1.0, 10)
        for x in grid:
            for y in grid:
                assert_allclose(
                    trimodal(np.array([x, y])),
                    trimodal_reference([x, y], TRIMODAL_CENTERS, weights),
                    atol=1e-9,
                )

    def test_three_dimensional_centers(self):
        centers = np.array([[0.2] * 3, [0.5] * 3, [0.8] * 3])
        value = trimodal(np.array([0.5] * 3), centers=centers)
        variance = 0.01 * 3**0.1
        dominant_only = np.log(0.8 / (2.0 * np.pi * variance) ** 1.5)
        assert_allclose(value, dominant_only, atol=1e-3)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(1)
        points = rng.random((30, 2))
        assert_allclose(
            trimodal(points), [trimodal(p) for p in points], atol=1e-12
        )

    def test_center_weight_mismatch(self):
        with pytest.raises(ValueError, match="weights"):
            trimodal(np.zeros(2), centers=TRIMODAL_CENTERS, weights=(0.5, 0.5))


class TestProblemFactories:
    def test_branin_problem_optimum(self):
        problem = branin_problem()
        assert problem.sense == "min"
        assert problem.known_optimum == BRANIN_MINIMUM
        assert_allclose(BRANIN_MINIMUM, 0.397887, atol=1e-6)

    def test_trimodal_problem_optimum_is_attained(self):
        problem = trimodal_problem()
        assert problem.sense == "max"
        assert_allclose(
            problem.objective(TRIMODAL_CENTERS[1]),
            problem.known_optimum,
            atol=1e-12,
        )

    def test_trimodal_center_is_maximal_on_grid(self):
        problem = trimodal_problem()
        grid = np.linspace(0.0, 1.0, 41)
        points = np.array([[x, y] for x in grid for y in grid])
        assert problem.objective(points).max() <= problem.known_optimum


class TestEmbed:
    def test_identity_embedding_matches_after_rescale(self):
        base = branin_problem()
        embedded = embed(base, 2, seed=0, indices=(0, 1))
        rng = np.random.default_rng(2)
        unit = rng.random((20, 2))
        low = base.bounds[:, 0]
        width = base.bounds[:, 1] - low
        assert_allclose(
            embedded.objective(unit),
            base.objective(low + unit * width),
            atol=1e-12,
        )

    def test_constant_along_dummy_coordinates(self):
        embedded = embed(branin_problem(), 30, seed=3)
        rng = np.random.default_rng(3)
        point = rng.random(30)
        variant = point.copy()
        for i in range(30):
            if i not in embedded.embedding_indices:
                variant[i] = rng.random()
        assert embedded.objective(point) == embedded.objective(variant)

    def test_minimizer_maps_through_embedding(self):
        embedded = embed(branin_problem(), 50, seed=4)
        i, j = embedded.embedding_indices
        point = np.random.default_rng(4).random(50)
        point[i] = (np.pi + 5.0) / 15.0
        point[j] = 2.275 / 15.0
        assert_allclose(embedded.objective(point), 0.397887, atol=1e-6)

    def test_seeded_choice_is_deterministic_and_distinct(self):
        first = embed(branin_problem(), 100, seed=7)
        second = embed(branin_problem(), 100, seed=7)
        assert first.embedding_indices == second.embedding_indices
        assert len(set(first.embedding_indices)) == 2

    def test_metadata_carries_over(self):
        embedded = embed(trimodal_problem(), 40, seed=5)
        assert embedded.sense == "max"
        assert embedded.known_optimum == trimodal_problem().known_optimum
        assert embedded.dim_D == 40
        assert embedded.intrinsic_dim_de == 2
        assert embedded.bounds.shape == (40, 2)
        assert np.all(embedded.bounds == [0.0, 1.0])

    def test_rejects_small_ambient(self):
        with pytest.raises(ValueError, match="below"):
            embed(branin_problem(), 1, seed=0)

    def test_rejects_duplicate_indices(self):
        with pytest.raises(ValueError, match="distinct"):
            embed(branin_problem(), 10, seed=0, indices=(3, 3))

    def test_rejects_out_of_range_indices(self):
        with pytest.raises(ValueError, match="indices"):
            embed(branin_problem(), 10, seed=0, indices=(0, 10))

    def test_make_problem_names(self):
        assert make_problem("branin", 20, 0).sense == "min"
        assert make_problem("trimodal", 20, 0).sense == "max"
        with pytest.raises(ValueError, match="unknown problem"):
            make_problem("rosenbrock", 20, 0)


def small_cell(method="random", seeds=(0, 1, 2), problem="branin"):
    return SuiteCell(
        problem=problem,
        method=method,
        dim_D=6,
        target_dim_d=2,
        budget_T=12,
        init_n=4,
        seeds=seeds,
    )


class TestRunSuite:
    def test_aggregates_match_traces(self):
        report = run_suite([small_cell()])
        result = report.cells[0]
        assert not result.errors
        assert result.mean_regret.shape == (12,)
        matrix = np.vstack(
            [result.traces[seed].simple_regret for seed in sorted(result.traces)]
        )
        assert_allclose(result.mean_regret, matrix.mean(axis=0), atol=1e-15)
        assert_allclose(
            result.stderr_regret,
            matrix.std(axis=0, ddof=1) / np.sqrt(3),
            atol=1e-15,
        )
        assert np.all(result.mean_regret <= matrix.max(axis=0))
        assert np.all(result.mean_regret >= matrix.min(axis=0))

    def test_deterministic_across_invocations(self):
        first = run_suite([small_cell(method="sir-bo", seeds=(0, 1))])
        second = run_suite([small_cell(method="sir-bo", seeds=(0, 1))])
        assert np.array_equal(
            first.cells[0].mean_regret, second.cells[0].mean_regret
        )
        for seed in (0, 1):
            assert np.array_equal(
                first.cells[0].traces[seed].best_so_far,
                second.cells[0].traces[seed].best_so_far,
            )

    def test_failed_run_aborts_only_its_cell(self):
        failing = SuiteCell(
            problem="branin",
            method="full-gp-ucb",
            dim_D=250,
            target_dim_d=2,
            budget_T=12,
            init_n=4,
            seeds=(0,),
        )
        report = run_suite([failing, small_cell()])
        assert report.cells[0].mean_regret is None
        assert 0 in report.cells[0].errors
        assert "sir-bo or kisir-bo" in report.cells[0].errors[0]
        assert report.cells[1].mean_regret is not None

    def test_single_seed_zero_stderr(self):
        report = run_suite([small_cell(seeds=(5,))])
        assert np.all(report.cells[0].stderr_regret == 0.0)

    def test_wall_time_recorded(self):
        report = run_suite([small_cell(seeds=(0,))])
        assert report.metadata["wall_seconds"] > 0
        assert report.cells[0].wall_seconds > 0

    def test_parallel_jobs_match_serial(self):
        cells = [small_cell(seeds=(0, 1)), small_cell(problem="trimodal")]
        serial = run_suite(cells, jobs=1)
        parallel = run_suite(cells, jobs=2)
        for left, right in zip(serial.cells, parallel.cells):
            assert np.array_equal(left.mean_regret, right.mean_regret)
            assert np.array_equal(left.stderr_regret, right.stderr_regret)


class TestExportCsv:
    def read(self, path):
        with open(path, encoding="utf-8") as handle:
            return list(csv.reader(handle))

    def test_empty_report_headers_only(self, tmp_path):
        runs_path, summary_path = export_csv(
            BenchmarkReport(cells=[]), str(tmp_path)
        )
        assert len(self.read(runs_path)) == 1
        assert len(self.read(summary_path)) == 1

    def test_row_counts(self, tmp_path):
        report = run_suite([small_cell(seeds=(0, 1))])
        runs_path, summary_path = export_csv(report, str(tmp_path))
        assert len(self.read(runs_path)) == 1 + 2 * 12
        assert len(self.read(summary_path)) == 1 + 12

    def test_round_trip_consistency(self, tmp_path):
        report = run_suite([small_cell(seeds=(0, 1, 2))])
        runs_path, summary_path = export_csv(report, str(tmp_path))
        runs_rows = self.read(runs_path)[1:]
        by_iteration = {}
        for row in runs_rows:
            by_iteration.setdefault(int(row[5]), []).append(float(row[8]))
        summary_rows = self.read(summary_path)[1:]
        assert len(summary_rows) == 12
        for row in summary_rows:
            iteration = int(row[4])
            mean = float(row[5])
            expected = np.mean(by_iteration[iteration])
            assert abs(mean - expected) <= 1e-12
            assert int(row[7]) == 3

    def test_full_precision_round_trip(self, tmp_path):
        report = run_suite([small_cell(seeds=(0,))])
        runs_path, _ = export_csv(report, str(tmp_path))
        trace = report.cells[0].traces[0]
        rows = self.read(runs_path)[1:]
        for i, row in enumerate(rows):
            assert float(row[7]) == trace.best_so_far[i]

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            export_csv(BenchmarkReport(cells=[]), str(blocker / "sub"))


class TestParseSeedList:
    def test_count(self):
        assert parse_seed_list("3") == (0, 1, 2)

    def test_explicit_list(self):
        assert parse_seed_list("0,3,7") == (0, 3, 7)

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError, match="duplicate"):
            parse_seed_list("1,1")

    def test_rejects_zero_count(self):
        with pytest.raises(ValueError, match=">= 1"):
            parse_seed_list("0")


class TestParseSuiteFile:
    def write(self, tmp_path, text):
        path = tmp_path / "suite.txt"
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_parses_cells_with_defaults(self, tmp_path):
        path = self.write(
            tmp_path,
            "# comment line\n"
            "\n"
            "problem=branin method=sir-bo D=200 d=10\n"
            "problem=trimodal method=random D=20 d=5 budget=100 init=10 "
            "seeds=0,2 beta=2.5  # trailing comment\n",
        )
        cells = parse_suite_file(path)
        assert len(cells) == 2
        assert cells[0].budget_T == 500
        assert cells[0].init_n == 50
        assert cells[0].seeds == tuple(range(20))
        assert cells[0].beta == 4.0
        assert cells[1].budget_T == 100
        assert cells[1].seeds == (0, 2)
        assert cells[1].beta == 2.5

    def test_unknown_key(self, tmp_path):
        path = self.write(tmp_path, "problem=branin method=random D=5 d=2 j=3\n")
        with pytest.raises(ValueError, match=":1: unknown key"):
            parse_suite_file(path)

    def test_missing_required_key(self, tmp_path):
        path = self.write(tmp_path, "problem=branin method=random D=5\n")
        with pytest.raises(ValueError, match="missing required key 'd'"):
            parse_suite_file(path)

    def test_duplicate_key(self, tmp_path):
        path = self.write(
            tmp_path, "problem=branin problem=branin method=random D=5 d=2\n"
        )
        with pytest.raises(ValueError, match="duplicate key"):
            parse_suite_file(path)

    def test_bad_value(self, tmp_path):
        path = self.write(tmp_path, "problem=branin method=random D=five d=2\n")
        with pytest.raises(ValueError, match=":1:"):
            parse_suite_file(path)

    def test_unknown_problem(self, tmp_path):
        path = self.write(tmp_path, "problem=sphere method=random D=5 d=2\n")
        with pytest.raises(ValueError, match="unknown problem"):
            parse_suite_file(path)

    def test_malformed_token(self, tmp_path):
        path = self.write(tmp_path, "problem=branin method D=5 d=2\n")
        with pytest.raises(ValueError, match="key=value"):
            parse_suite_file(path)
