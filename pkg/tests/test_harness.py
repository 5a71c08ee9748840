"""Tests for the experiment harness: grids, aggregation, outputs, verification."""

import json
from pathlib import Path

import numpy as np
import pytest

from crb_sbl import bounds, estimators as est, harness, model


def tiny_config(tmp_path, **overrides):
    kwargs = dict(
        dim=12,
        n_obs=[8],
        snr_db=[10.0, 25.0],
        nu=[2.5],
        m_vectors=[1],
        trials=6,
        estimators=["em", "mmse-oracle"],
        bounds=["hcrb-x", "bcrb-x", "mcrb-x", "hcrb-gamma", "bcrb-gamma", "mcrb-gamma"],
        master_seed=11,
        output_dir=str(tmp_path / "out"),
        estimator_options={"max_iter": 60},
    )
    kwargs.update(overrides)
    return harness.ExperimentConfig(**kwargs)


class TestConfig:
    def test_roundtrip(self, tmp_path):
        cfg = tiny_config(tmp_path)
        back = harness.ExperimentConfig.from_json(cfg.to_json())
        assert back.to_json() == cfg.to_json()

    def test_rejects_unknown_estimator(self, tmp_path):
        with pytest.raises(ValueError):
            tiny_config(tmp_path, estimators=["em", "nope"])

    def test_rejects_empty_axis(self, tmp_path):
        with pytest.raises(ValueError):
            tiny_config(tmp_path, snr_db=[])

    def test_rejects_uncovered_target(self, tmp_path):
        # em produces gamma estimates; a config with only x bounds is invalid.
        with pytest.raises(ValueError):
            tiny_config(tmp_path, bounds=["mcrb-x"])

    def test_rejects_ard_with_multiple_vectors(self, tmp_path):
        with pytest.raises(ValueError):
            tiny_config(tmp_path, estimators=["ard"], m_vectors=[2])

    def test_thread_resolution_env_override(self, monkeypatch):
        monkeypatch.setenv(harness.THREADS_ENV_VAR, "5")
        assert harness.resolve_threads(1, 2) == 5
        monkeypatch.delenv(harness.THREADS_ENV_VAR)
        assert harness.resolve_threads(1, 2) == 2
        assert harness.resolve_threads(3, None) == 3


class TestAggregateMse:
    def test_identical_estimates_zero(self):
        phi = model.sample_measurement_matrix(6, 4, 1)
        prior = model.StudentTPrior(nu=3.0, lam=1.0)
        inst = model.synthesize(phi, prior, model.NoiseModel("known-variance", xi=0.1), 1, 2)
        fake = est.EstimateResult(
            x_hat=inst.x_true.copy(),
            gamma_hat=inst.gamma_true.copy(),
            xi_hat=None,
            iterations=1,
            converged=True,
            objective_trace=np.zeros(1),
        )
        records = harness.aggregate_mse([fake], [inst])
        assert records["x"]["mse"] == 0.0
        assert records["gamma"]["mse"] == 0.0

    def test_scalar_arithmetic(self):
        records = harness.aggregate_mse([1.0, 3.0], [0.0, 0.0])
        assert records["x"]["mse"] == pytest.approx(5.0)
        assert records["x"]["trials"] == 2

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            harness.aggregate_mse([1.0], [0.0, 0.0])


class TestRunExperiment:
    def test_deterministic_and_thread_invariant(self, tmp_path):
        cfg = tiny_config(tmp_path)
        t1 = harness.run_experiment(cfg)
        t2 = harness.run_experiment(cfg)
        assert harness._csv_text(t1) == harness._csv_text(t2)
        t3 = harness.run_experiment(cfg, threads=2)
        assert harness._csv_text(t1) == harness._csv_text(t3)

    def test_estimator_rows_have_matching_bound_rows(self, tmp_path):
        cfg = tiny_config(tmp_path)
        table = harness.run_experiment(cfg)
        bound_rows = {(tuple(r.grid.items()), r.target) for r in table.rows if r.series.startswith("bound:")}
        for row in table.rows:
            if row.series.startswith("bound:") or row.target.endswith("_pc"):
                continue
            assert (tuple(row.grid.items()), row.target) in bound_rows

    def test_values_nonnegative(self, tmp_path):
        table = harness.run_experiment(tiny_config(tmp_path))
        assert all(r.value >= 0 for r in table.rows)

    def test_mmse_matches_hybrid_bound_row(self, tmp_path):
        cfg = tiny_config(tmp_path, trials=64, snr_db=[15.0])
        table = harness.run_experiment(cfg)
        g = {"n_obs": 8, "snr_db": 15.0, "nu": 2.5, "m_vectors": 1}
        mmse = table.lookup(g, "mmse-oracle", "x")
        hcrb = table.lookup(g, "bound:hcrb-x", "x")
        spread = 3 * np.hypot(mmse.stderr, hcrb.stderr)
        assert abs(mmse.value - hcrb.value) <= spread

    def test_deterministic_unknown_noise_produces_xi_rows(self, tmp_path):
        cfg = tiny_config(
            tmp_path,
            noise_mode=model.DETERMINISTIC_UNKNOWN,
            estimators=["em"],
            bounds=["hcrb-x", "bcrb-x", "hcrb-gamma", "bcrb-gamma", "hcrb-xi", "mcrb-gamma-xi"],
            snr_db=[20.0],
        )
        table = harness.run_experiment(cfg)
        g = {"n_obs": 8, "snr_db": 20.0, "nu": 2.5, "m_vectors": 1}
        assert table.lookup(g, "em", "xi").value >= 0
        assert table.lookup(g, "bound:hcrb-xi", "xi").value > 0
        assert table.lookup(g, "bound:mcrb-gamma-xi", "xi").value > 0

    def test_mmv_grid_point(self, tmp_path):
        cfg = tiny_config(
            tmp_path,
            m_vectors=[2],
            estimators=["em"],
            snr_db=[15.0],
        )
        table = harness.run_experiment(cfg)
        g = {"n_obs": 8, "snr_db": 15.0, "nu": 2.5, "m_vectors": 2}
        assert table.lookup(g, "em", "x").value > 0
        # x rows cover dim * m components.
        pc = table.lookup(g, "em", "x_pc")
        total = table.lookup(g, "em", "x")
        assert pc.value == pytest.approx(total.value / (12 * 2))

    def test_gcp_prior_grid(self, tmp_path):
        cfg = tiny_config(
            tmp_path,
            prior={"kind": "gcp", "tau": 1.0, "lam": 500.0},
            estimators=["em"],
            bounds=["mcrb-x"],
            nu=[3.0],
            snr_db=[20.0],
        )
        table = harness.run_experiment(cfg)
        g = {"n_obs": 8, "snr_db": 20.0, "nu": 3.0, "m_vectors": 1}
        assert table.lookup(g, "em", "x").value > 0
        assert table.lookup(g, "bound:mcrb-x", "x").value > 0
        # No gamma realization exists, so no gamma rows appear.
        assert not [r for r in table.rows if r.target.startswith("gamma")]


class TestFailureHandling:
    def test_sporadic_failures_drop_trials(self, tmp_path, monkeypatch):
        from crb_sbl._linalg import NumericalFailure

        cfg = tiny_config(tmp_path, trials=12, snr_db=[15.0], estimators=["em"])
        real_em = est.em_sbl
        calls = {"n": 0}

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 3:
                raise NumericalFailure("synthetic failure")
            return real_em(*args, **kwargs)

        monkeypatch.setattr(harness.est, "em_sbl", flaky)
        table = harness.run_experiment(cfg)
        g = {"n_obs": 8, "snr_db": 15.0, "nu": 2.5, "m_vectors": 1}
        assert table.lookup(g, "em", "x").trials == 11
        assert not table.invalid_points

    def test_majority_failures_invalidate_grid_point(self, tmp_path, monkeypatch):
        from crb_sbl._linalg import NumericalFailure

        cfg = tiny_config(tmp_path, trials=8, snr_db=[15.0], estimators=["em"])

        def broken(*args, **kwargs):
            raise NumericalFailure("synthetic failure")

        monkeypatch.setattr(harness.est, "em_sbl", broken)
        table = harness.run_experiment(cfg)
        assert table.invalid_points == [
            {"n_obs": 8, "snr_db": 15.0, "nu": 2.5, "m_vectors": 1}
        ]
        assert not table.rows


class TestEmitOutputs:
    def test_rejects_empty_table(self, tmp_path):
        cfg = tiny_config(tmp_path)
        with pytest.raises(ValueError):
            harness.emit_outputs(harness.ResultTable(harness.GRID_KEYS, []), cfg)

    def test_csv_row_count_and_schema(self, tmp_path):
        cfg = tiny_config(tmp_path)
        table = harness.run_experiment(cfg)
        paths = harness.emit_outputs(table, cfg)
        lines = Path(paths["csv"]).read_text().splitlines()
        header = lines[0].split(",")
        assert header == ["n_obs", "snr_db", "nu", "m_vectors", "series", "target", "value", "stderr", "trials"]
        assert len(lines) - 1 == len(table.rows)

    def test_rerun_byte_identical(self, tmp_path):
        cfg = tiny_config(tmp_path)
        table = harness.run_experiment(cfg)
        paths = harness.emit_outputs(table, cfg, output_dir=tmp_path / "a")
        first = Path(paths["csv"]).read_bytes()
        figs_a = {p: (tmp_path / "a" / p).read_bytes() for p in paths["figures"]}
        paths2 = harness.emit_outputs(table, cfg, output_dir=tmp_path / "b")
        assert Path(paths2["csv"]).read_bytes() == first
        for p in paths2["figures"]:
            assert (tmp_path / "b" / p).read_bytes() == figs_a[p]

    def test_manifest_lists_figures(self, tmp_path):
        cfg = tiny_config(tmp_path)
        table = harness.run_experiment(cfg)
        paths = harness.emit_outputs(table, cfg)
        manifest = json.loads(Path(paths["manifest"]).read_text())
        assert set(manifest["figures"]) == set(paths["figures"])
        assert manifest["config"]["dim"] == 12
        for name in paths["figures"]:
            body = (Path(cfg.output_dir) / name).read_text()
            assert body.startswith("<svg") and "polyline" in body


class TestVerifySuite:
    def test_quick_level_passes(self, tmp_path):
        out = tmp_path / "report.json"
        status, payload = harness.verify_suite(level="quick", output_path=str(out))
        assert status == 0
        assert payload["pass"] is True
        data = json.loads(out.read_text())
        assert all(r["pass"] for r in data["reports"])

    def test_rejects_unknown_level(self):
        with pytest.raises(ValueError):
            harness.verify_suite(level="huge")


class TestOrderingReproduction:
    def test_gamma_mse_above_mcrb_above_bcrb(self):
        # Deterministic-variance analogue of the tabulated gamma comparison:
        # one fixed variance profile, trials over (x, noise).  The estimator
        # MSE stays above the marginalized bound, which stays above the
        # Bayesian bound.
        n, l, trials, snr = 240, 256, 40, 10.0
        nu = 2.01
        prior = model.StudentTPrior.from_second_moment(nu, 1e-3)
        phi = model.sample_measurement_matrix(n, l, seed=77)
        gamma = model.sample_hyperparameters(prior, l, seed=11)
        xi = model.snr_to_noise_variance(snr, l, 1e-3)

        mcrb = bounds.mcrb_gamma(phi, xi, gamma).bound_trace()
        bcrb = bounds.bcrb_smv(phi, xi, nu, prior.lam).bound_trace("gamma")
        errs = []
        for t in range(trials):
            x = model.sample_compressible_vector(gamma, 1, seed=1000 + t)
            noise = np.sqrt(xi) * np.random.default_rng(5000 + t).standard_normal((n, 1))
            y = (phi.entries @ x + noise)[:, 0]
            r = est.em_sbl(y, phi, xi, max_iter=400, tol=1e-5)
            errs.append(float(np.sum((r.gamma_hat - gamma) ** 2)))
        mse = float(np.mean(errs))
        se = float(np.std(errs, ddof=1) / np.sqrt(trials))
        assert mse >= mcrb - 3 * se
        assert mcrb >= bcrb
