"""
Tests for experiment.py: trial construction, the per-trial pipeline,
aggregation and report output.
"""
import numpy as np
import pandas as pd
import pytest


@pytest.fixture
def small_config():
    from sparsepls.schemas import ExperimentConfig, SimSource
    from sparsepls.settings import AdmmOptions

    def build(**overrides):
        fields = dict(
            source=SimSource(model_id=1, n=30, p=60),
            methods=["simpls", "global_simpls"],
            k_grid=[1, 2],
            lambda_grid=[0.05, 0.3],
            folds=3,
            trials=2,
            seed=11,
            admm=AdmmOptions(max_iter=50),
        )
        fields.update(overrides)
        return ExperimentConfig(**fields)

    return build


@pytest.fixture
def csv_files(tmp_path):
    """Factory writing X / Y (and optional subject) CSVs with headers."""

    def write(n=24, p=6, subjects=None, y_rows=None):
        gen = np.random.default_rng(3)
        X = gen.standard_normal((n, p))
        Y = X[:, :2].sum(axis=1, keepdims=True) + 0.3 * gen.standard_normal((n, 1))
        x_path, y_path = tmp_path / "X.csv", tmp_path / "Y.csv"
        pd.DataFrame(X, columns=[f"x{j}" for j in range(p)]).to_csv(x_path, index=False)
        pd.DataFrame(Y[: y_rows or n], columns=["y"]).to_csv(y_path, index=False)
        paths = {"x_path": str(x_path), "y_path": str(y_path)}
        if subjects is not None:
            s_path = tmp_path / "subjects.csv"
            pd.DataFrame({"subject": subjects}).to_csv(s_path, index=False)
            paths["subjects_path"] = str(s_path)
        return paths

    return write


class TestTrials:
    def test_trial_seeds_are_stable_and_distinct(self):
        from sparsepls.experiment import trial_seeds
        assert trial_seeds(5, 0) == trial_seeds(5, 0)
        assert trial_seeds(5, 0) != trial_seeds(5, 1)
        train, test = trial_seeds(5, 0)
        assert train != test

    def test_simulated_trials_use_separate_test_draws(self, small_config):
        from sparsepls.experiment import build_trials
        from sparsepls.schemas import SimSource
        trials = build_trials(small_config(source=SimSource(model_id=1, n=30, p=60, n_test=12)))
        assert [t.index for t in trials] == [0, 1]
        assert trials[0].train.n == 30
        assert trials[0].test.n == 12
        assert not np.array_equal(trials[0].train.X[:12], trials[0].test.X)

    def test_random_split(self, small_config, csv_files):
        from sparsepls.experiment import build_trials
        from sparsepls.schemas import CsvSource
        trials = build_trials(small_config(source=CsvSource(**csv_files(), test_fraction=0.25), trials=3))
        assert len(trials) == 3
        for t in trials:
            assert (t.train.n, t.test.n) == (18, 6)
        assert trials[0].test.X.tolist() != trials[1].test.X.tolist()

    def test_leave_one_subject_out(self, small_config, csv_files):
        from sparsepls.experiment import build_trials
        from sparsepls.schemas import CsvSource
        subjects = [f"s{i // 6}" for i in range(24)]
        source = CsvSource(**csv_files(subjects=subjects), protocol="leave_one_subject_out")
        trials = build_trials(small_config(source=source, trials=2))
        assert len(trials) == 4
        for t, trial in enumerate(trials):
            assert set(trial.test.subject_ids) == {f"s{t}"}
            assert f"s{t}" not in set(trial.train.subject_ids)

    def test_row_count_mismatch_names_both_files(self, csv_files):
        from sparsepls.errors import ConfigError
        from sparsepls.experiment import load_source
        from sparsepls.schemas import CsvSource
        paths = csv_files(y_rows=20)
        with pytest.raises(ConfigError) as exc:
            load_source(CsvSource(**paths))
        assert paths["x_path"] in str(exc.value)
        assert paths["y_path"] in str(exc.value)

    def test_missing_subjects_rejected(self, csv_files):
        from pydantic import ValidationError
        from sparsepls.schemas import CsvSource
        with pytest.raises(ValidationError):
            CsvSource(**csv_files(), protocol="leave_one_subject_out")


class TestLambdaGrid:
    def test_relative_values_scale_lambda_max(self, small_config):
        from sparsepls.admm import lambda_max
        from sparsepls.data import center_columns
        from sparsepls.experiment import build_trials, resolve_lambda_grid
        config = small_config()
        cd = center_columns(build_trials(config)[0].train)
        top = lambda_max(cd.Xc, cd.Yc, 2, config.admm)
        np.testing.assert_allclose(resolve_lambda_grid(config, "global_simpls", cd), [0.05 * top, 0.3 * top])

    def test_absolute_and_unpenalized(self, small_config):
        from sparsepls.data import center_columns
        from sparsepls.experiment import build_trials, resolve_lambda_grid
        config = small_config(lambda_mode="absolute")
        cd = center_columns(build_trials(config)[0].train)
        assert resolve_lambda_grid(config, "global_simpls", cd) == [0.05, 0.3]
        assert resolve_lambda_grid(config, "simpls", cd) == [0.0]
        assert resolve_lambda_grid(config, "l1_spls", cd) == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]


class TestRunExperiment:
    def test_rows_and_determinism(self, small_config):
        from sparsepls.experiment import run_experiment
        a = run_experiment(small_config())
        b = run_experiment(small_config())
        assert len(a.rows) == 4
        assert {(r.trial, r.method) for r in a.rows} == {(t, m) for t in (0, 1) for m in ("simpls", "global_simpls")}
        assert a.model_dump_json() == b.model_dump_json()
        assert not any(r.failed for r in a.rows)
        assert a.provenance.n_variables == 60

    def test_threads_do_not_change_rows(self, small_config):
        from sparsepls.experiment import run_experiment
        serial = run_experiment(small_config())
        pooled = run_experiment(small_config(threads=2))
        assert [r.model_dump() for r in serial.rows] == [r.model_dump() for r in pooled.rows]

    def test_aggregates_are_row_means(self, small_config):
        from sparsepls.experiment import run_experiment
        report = run_experiment(small_config())
        for agg in report.aggregates:
            rows = [r for r in report.rows if r.method == agg.method]
            assert agg.n_success == 2
            assert agg.mean_test_mse == pytest.approx(np.mean([r.test_mse for r in rows]), abs=1e-12)
            assert agg.mean_selected == pytest.approx(np.mean([r.n_selected for r in rows]), abs=1e-12)
            assert agg.mean_seconds is None
        simpls = report.aggregate("simpls")
        assert simpls.mean_selected == 60
        assert simpls.mean_support_fraction == pytest.approx(50 / 60)

    def test_pairwise_covers_ordered_pairs(self, small_config):
        from sparsepls.experiment import run_experiment
        report = run_experiment(small_config())
        keys = {(t.method_a, t.method_b, t.metric) for t in report.pairwise}
        assert len(keys) == 2 * 3
        assert all(t.n == 2 for t in report.pairwise)

    def test_full_relative_penalty_gives_mean_model(self, small_config):
        from sparsepls.experiment import build_trials, run_experiment
        from sparsepls.selection import mse
        config = small_config(methods=["global_simpls"], lambda_grid=[1.0])
        report = run_experiment(config)
        for row, trial in zip(report.rows, build_trials(config)):
            assert row.n_selected == 0
            assert row.n_components == 0
            assert row.selected == []
            y_mean = trial.train.Y.mean(axis=0)
            assert row.test_mse == pytest.approx(mse(trial.test.Y, np.tile(y_mean, (trial.test.n, 1))))

    def test_failures_are_recorded(self, small_config, monkeypatch):
        import sparsepls.experiment as experiment
        from sparsepls.errors import ConvergenceError

        def boom(*args, **kwargs):
            raise ConvergenceError("forced")

        monkeypatch.setattr(experiment, "fit_method", boom)
        report = experiment.run_experiment(small_config())
        assert report.all_failed
        assert all("ConvergenceError" in r.error for r in report.rows)
        agg = report.aggregate("simpls")
        assert (agg.n_success, agg.n_failed) == (0, 2)
        assert agg.mean_test_mse is None
        assert all(t.p_value is None for t in report.pairwise)
        assert "-" in experiment.render_table(report)

    def test_timings_only_when_asked(self, small_config):
        from sparsepls.experiment import render_table, run_experiment
        report = run_experiment(small_config(methods=["simpls"], record_timings=True))
        assert all(r.cv_seconds is not None and r.cv_seconds >= 0.0 for r in report.rows)
        assert report.aggregate("simpls").mean_seconds is not None
        assert "seconds" in render_table(report)

    def test_leave_one_subject_out_runs(self, small_config, csv_files):
        from sparsepls.experiment import run_experiment
        from sparsepls.schemas import CsvSource
        subjects = [f"s{i // 6}" for i in range(24)]
        source = CsvSource(**csv_files(subjects=subjects), protocol="leave_one_subject_out")
        report = run_experiment(small_config(source=source, methods=["simpls"]))
        assert len(report.rows) == 4
        assert not any(r.failed for r in report.rows)
        assert all(r.support_fraction is None for r in report.rows)


class TestReportOutput:
    def test_json_and_table(self, small_config, tmp_path):
        from sparsepls.experiment import run_experiment, write_report
        from sparsepls.schemas import ExperimentReport
        report = run_experiment(small_config())
        json_path, text_path = write_report(report, tmp_path / "out" / "report.json")
        assert ExperimentReport.model_validate_json(json_path.read_text()) == report
        table = text_path.read_text()
        assert text_path.suffix == ".txt"
        for agg in report.aggregates:
            assert agg.method in table
            assert f"{agg.mean_test_mse:.4g}" in table

    def test_selection_frequency_frame(self, small_config):
        from sparsepls.experiment import run_experiment, selection_frequency_frame
        report = run_experiment(small_config())
        frame = selection_frequency_frame(report)
        assert frame["variable"].tolist() == list(range(1, 61))
        assert (frame["simpls_count"] == 2).all()
        assert (frame["simpls_frequency"] == 1.0).all()
        counts = np.zeros(60, dtype=int)
        for row in report.rows:
            if row.method == "global_simpls":
                counts[row.selected] += 1
        np.testing.assert_array_equal(frame["global_simpls_count"].to_numpy(), counts)
