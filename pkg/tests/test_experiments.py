"""Tests for the experiment harness: configs, runners, and CSV canonicality.

Runs here use deliberately tiny models (tens of nodes, hundreds of solver
iterations) — they exercise wiring, determinism, and column contracts, not
statistical regimes.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from csbmgc import theory
from csbmgc.errors import ParameterError
from csbmgc.experiments import (
    DENSITY_SWEEP_COLUMNS,
    MEANS_SWEEP_COLUMNS,
    NOISE_SWEEP_COLUMNS,
    OOD_SWEEP_COLUMNS,
    SEPARABILITY_GRID_COLUMNS,
    ExperimentConfig,
    config_hash,
    format_cell,
    preset,
    run_and_write,
    run_experiment,
    write_outputs,
)


def tiny_means_config(**overrides):
    base = dict(
        experiment="means_sweep",
        n=40,
        d=8,
        p=0.5,
        q=0.1,
        train_trials=2,
        test_trials=2,
        distances=(0.2, 0.8),
        tolerance=1e-7,
        max_iterations=300,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_unknown_experiment(self):
        with pytest.raises(ParameterError, match="unknown experiment"):
            ExperimentConfig(experiment="nope").validate()

    def test_means_requires_distances(self):
        with pytest.raises(ParameterError, match="distances"):
            ExperimentConfig(experiment="means_sweep").validate()

    def test_density_requirements(self):
        with pytest.raises(ParameterError, match="p_values"):
            ExperimentConfig(experiment="density_sweep").validate()
        with pytest.raises(ParameterError, match="q_ratio"):
            ExperimentConfig(
                experiment="density_sweep", p_values=(0.5,), q_ratio=0.0
            ).validate()
        with pytest.raises(ParameterError, match="grid point"):
            ExperimentConfig(experiment="density_sweep", p_values=(0.0,)).validate()

    def test_ood_requirements(self):
        with pytest.raises(ParameterError, match="test_densities"):
            ExperimentConfig(experiment="ood_sweep", distances=(0.5,)).validate()
        with pytest.raises(ParameterError, match="q' <= p'"):
            ExperimentConfig(
                experiment="ood_sweep",
                distances=(0.5,),
                test_densities=((0.1, 0.5),),
            ).validate()

    def test_noise_requirements(self):
        with pytest.raises(ParameterError, match="rho_values"):
            ExperimentConfig(experiment="noise_sweep").validate()
        with pytest.raises(ParameterError, match="non-negative"):
            ExperimentConfig(experiment="noise_sweep", rho_values=(-1.0,)).validate()

    def test_grid_requirements(self):
        with pytest.raises(ParameterError, match="pipeline"):
            ExperimentConfig(
                experiment="separability_grid", distances=(0.5,), pipelines=("mlp",)
            ).validate()
        with pytest.raises(ParameterError, match="part3_size"):
            ExperimentConfig(
                experiment="separability_grid", distances=(0.5,), part3_sets=2
            ).validate()
        with pytest.raises(ParameterError, match="part3_pooled"):
            ExperimentConfig(
                experiment="separability_grid",
                distances=(0.5,),
                part3_pooled=True,
            ).validate()

    def test_common_field_ranges(self):
        with pytest.raises(ParameterError, match="beta0"):
            tiny_means_config(beta0=0.7).validate()
        with pytest.raises(ParameterError, match="radius"):
            tiny_means_config(radius=-1.0).validate()
        with pytest.raises(ParameterError, match="certify_subset"):
            tiny_means_config(certify_subset="some").validate()

    def test_defaults(self):
        cfg = tiny_means_config(radius=None, distance=None)
        assert cfg.effective_radius == 8.0
        assert cfg.effective_distance == pytest.approx(2.0 / math.sqrt(8))


class TestConfigSerialization:
    def test_round_trip(self):
        cfg = tiny_means_config()
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg
        assert again.to_dict() == cfg.to_dict()

    def test_rejects_unknown_keys(self):
        data = tiny_means_config().to_dict()
        data["typo_field"] = 1
        with pytest.raises(ParameterError, match="typo_field"):
            ExperimentConfig.from_dict(data)

    def test_requires_experiment(self):
        with pytest.raises(ParameterError, match="experiment"):
            ExperimentConfig.from_dict({"n": 40})

    def test_json_borne_lists_normalized(self):
        cfg = ExperimentConfig.from_dict(
            {
                "experiment": "ood_sweep",
                "distances": [0.5],
                "test_densities": [[0.5, 0.1]],
            }
        )
        assert cfg.distances == (0.5,)
        assert cfg.test_densities == ((0.5, 0.1),)

    def test_hash_is_stable_and_sensitive(self):
        a = config_hash(tiny_means_config())
        b = config_hash(tiny_means_config())
        c = config_hash(tiny_means_config(base_seed=1))
        assert a == b
        assert a != c
        assert len(a) == 64 and set(a) <= set("0123456789abcdef")


@pytest.fixture(scope="module")
def means_result():
    return run_experiment(tiny_means_config())


@pytest.fixture(scope="module")
def noise_result():
    cfg = ExperimentConfig(
        experiment="noise_sweep",
        n=40,
        d=6,
        p=0.4,
        q=0.1,
        rho_values=(0.0, 1.0),
        noise_trials=2,
        tolerance=1e-7,
        max_iterations=300,
    )
    return run_experiment(cfg)


class TestMeansSweep:
    @pytest.fixture
    def result(self, means_result):
        return means_result

    def test_shape_and_order(self, result):
        assert result.columns == MEANS_SWEEP_COLUMNS
        assert len(result.rows) == 2 * 2 * 2
        keys = [(r["distance"], r["train_trial"], r["test_trial"]) for r in result.rows]
        assert keys == sorted(keys)

    def test_theory_columns_recompute(self, result):
        marks = theory.thresholds(40, 8, 0.5, 0.1)
        for row in result.rows:
            assert row["threshold_raw"] == marks.raw_scale
            assert row["threshold_conv_lower"] == marks.convolved_lower
            assert row["threshold_conv_upper"] == marks.convolved_upper
            assert row["ansatz_rate"] == theory.rate_from_distance(
                8.0, row["distance"], 0.5, 0.1
            )
            assert row["lower_bound"] == theory.raw_loss_lower_bound(
                row["distance"] * math.sqrt(8), 0.0, 0.5, 0.5
            )

    def test_value_invariants(self, result):
        for row in result.rows:
            for col in ("train_loss_raw", "train_loss_conv", "test_loss_raw", "test_loss_conv"):
                assert np.isfinite(row[col]) and row[col] >= 0.0
            for col in ("train_err_raw", "test_err_conv"):
                assert 0.0 <= row[col] <= 1.0
            assert row["w_norm_raw"] <= 8.0 + 1e-9
            assert row["w_norm_conv"] <= 8.0 + 1e-9
            assert isinstance(row["sep_raw"], bool)

    def test_seeds_vary_by_trial_only(self, result):
        by_train = {}
        for row in result.rows:
            key = (row["distance"], row["train_trial"])
            by_train.setdefault(key, set()).add((row["train_seed"], row["mask_seed"]))
        # Each (distance, trial) cell reuses one trained model across tests...
        assert all(len(v) == 1 for v in by_train.values())
        # ...and distinct cells get distinct sample seeds.
        seeds = {row["train_seed"] for row in result.rows}
        assert len(seeds) == 4  # 2 distances x 2 train trials


class TestDeterminism:
    def test_serial_rerun_byte_identical(self, tmp_path):
        cfg = tiny_means_config()
        a = run_and_write(cfg, str(tmp_path / "a"))
        b = run_and_write(cfg, str(tmp_path / "b"))
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_parallel_matches_serial(self, tmp_path):
        cfg = tiny_means_config()
        a = run_and_write(cfg, str(tmp_path / "serial"), jobs=1)
        b = run_and_write(cfg, str(tmp_path / "parallel"), jobs=2)
        assert open(a, "rb").read() == open(b, "rb").read()


class TestDensitySweep:
    def test_columns_and_derived_densities(self):
        cfg = ExperimentConfig(
            experiment="density_sweep",
            n=40,
            d=8,
            train_trials=1,
            test_trials=1,
            p_values=(0.3, 0.6),
            q_ratio=0.2,
            distance=0.8,
            tolerance=1e-7,
            max_iterations=300,
        )
        result = run_experiment(cfg)
        assert result.columns == DENSITY_SWEEP_COLUMNS
        assert [(r["p"], r["q"]) for r in result.rows] == [(0.3, 0.06), (0.6, 0.12)]
        p_ref = math.log(40) ** 2 / 40
        assert all(r["p_reference"] == p_ref for r in result.rows)


class TestOodSweep:
    def test_columns_and_rates(self):
        cfg = ExperimentConfig(
            experiment="ood_sweep",
            n=30,
            d=6,
            train_trials=2,
            test_trials=2,
            distances=(0.5,),
            test_densities=((0.5, 0.1), (0.8, 0.2)),
            tolerance=1e-7,
            max_iterations=300,
        )
        result = run_experiment(cfg)
        assert result.columns == OOD_SWEEP_COLUMNS
        assert len(result.rows) == 1 * 2 * 2 * 2
        for row in result.rows:
            assert row["gamma_test"] == theory.gamma_snr(row["p_test"], row["q_test"])
            assert row["ood_rate"] == theory.rate_from_distance(
                6.0, 0.5, row["p_test"], row["q_test"]
            )
        # Same trained model appears against every test density.
        seeds = {(r["train_trial"], r["train_seed"]) for r in result.rows}
        assert len(seeds) == 2


class TestNoiseSweep:
    @pytest.fixture
    def result(self, noise_result):
        return noise_result

    def test_columns_and_count(self, result):
        assert result.columns == NOISE_SWEEP_COLUMNS
        assert len(result.rows) == 4

    def test_raw_pipeline_unaffected_by_noise(self, result):
        raw = {(r["test_loss_raw"], r["test_err_raw"]) for r in result.rows}
        assert len(raw) == 1
        for row in result.rows:
            assert row["test_loss_raw"] == row["baseline_loss_raw"]

    def test_zero_rho_equals_baseline_exactly(self, result):
        for row in result.rows:
            if row["rho"] == 0.0:
                assert row["edges_added"] == 0
                assert row["achieved_rho"] == 0.0
                assert row["test_loss_conv"] == row["baseline_loss_conv"]
                assert row["test_err_conv"] == row["baseline_err_conv"]

    def test_injection_accounting(self, result):
        before = {row["inter_class_edges"] for row in result.rows}
        assert len(before) == 1
        (count,) = before
        for row in result.rows:
            if row["rho"] == 1.0:
                assert row["edges_added"] >= 0
                assert row["achieved_rho"] == pytest.approx(
                    row["edges_added"] / count, rel=1e-12
                )

    def test_requires_mask(self, tmp_path):
        # A dataset directory without a mask cannot seed training.
        root = tmp_path / "nomask"
        root.mkdir()
        (root / "labels.txt").write_text("0\n1\n")
        (root / "features.csv").write_text("0.0,1.0\n1.0,0.0\n")
        (root / "edges.tsv").write_text("0\t1\n")
        cfg = ExperimentConfig(
            experiment="noise_sweep",
            dataset=str(root),
            rho_values=(0.0,),
            noise_trials=1,
        )
        with pytest.raises(ParameterError, match="mask"):
            run_experiment(cfg)


class TestSeparabilityGrid:
    def common(self, **overrides):
        base = dict(
            experiment="separability_grid",
            n=24,
            d=4,
            p=0.5,
            q=0.1,
            train_trials=3,
            distances=(0.4,),
        )
        base.update(overrides)
        return ExperimentConfig(**base)

    def test_plain_layout(self):
        result = run_experiment(self.common())
        assert result.columns == SEPARABILITY_GRID_COLUMNS
        assert len(result.rows) == 2 * 3  # two pipelines, three examples
        for pipeline in ("raw", "conv"):
            rows = [r for r in result.rows if r["pipeline"] == pipeline]
            assert [r["trial"] for r in rows] == [0, 1, 2]
            expected = all(r["separable"] for r in rows)
            assert all(r["all_separable_in_set"] == expected for r in rows)

    def test_grouped_layout(self):
        result = run_experiment(
            self.common(part3_sets=2, part3_size=2, pipelines=("conv",))
        )
        assert len(result.rows) == 2 * 2
        per_set = {}
        for row in result.rows:
            per_set.setdefault(row["set_index"], []).append(row)
        for rows in per_set.values():
            expected = all(r["separable"] for r in rows)
            assert all(r["all_separable_in_set"] == expected for r in rows)

    def test_pooled_layout(self):
        result = run_experiment(
            self.common(
                part3_sets=2,
                part3_size=2,
                part3_pooled=True,
                part3_subsample=3,
                pipelines=("conv",),
            )
        )
        assert len(result.rows) == 2  # one row per set
        for row in result.rows:
            assert row["trial"] == -1
            assert row["all_separable_in_set"] == row["separable"]
            assert row["lp_status"] in ("optimal", "degenerate")

    def test_pooled_subsample_changes_the_program(self):
        full = run_experiment(
            self.common(part3_sets=1, part3_size=2, part3_pooled=True, pipelines=("conv",))
        )
        sub = run_experiment(
            self.common(
                part3_sets=1,
                part3_size=2,
                part3_pooled=True,
                part3_subsample=3,
                pipelines=("conv",),
            )
        )
        # Dropping points relaxes the LP: the subsampled margin can only grow.
        assert sub.rows[0]["margin"] >= full.rows[0]["margin"] - 1e-12


class TestOutputs:
    def test_csv_and_manifest(self, tmp_path):
        cfg = tiny_means_config()
        result = run_experiment(cfg)
        csv_path = write_outputs(result, str(tmp_path), wall_time_s=1.25)
        lines = open(csv_path).read().splitlines()
        assert lines[0] == ",".join(MEANS_SWEEP_COLUMNS)
        assert len(lines) == 1 + len(result.rows)
        manifest = json.load(open(tmp_path / "manifest.json"))
        assert manifest["experiment"] == "means_sweep"
        assert manifest["rows"] == len(result.rows)
        assert manifest["config_sha256"] == config_hash(cfg)
        assert manifest["columns"] == list(MEANS_SWEEP_COLUMNS)
        assert ExperimentConfig.from_dict(manifest["config"]) == cfg

    def test_force_guard(self, tmp_path):
        cfg = tiny_means_config()
        result = run_experiment(cfg)
        write_outputs(result, str(tmp_path))
        with pytest.raises(ParameterError, match="force"):
            write_outputs(result, str(tmp_path))
        write_outputs(result, str(tmp_path), force=True)


class TestFormatCell:
    def test_rules(self):
        assert format_cell(True) == "1"
        assert format_cell(False) == "0"
        assert format_cell(np.bool_(True)) == "1"
        assert format_cell(3) == "3"
        assert format_cell(np.int64(-1)) == "-1"
        assert format_cell(0.1) == "0.1"
        assert format_cell(np.float64(1 / 3)) == repr(1 / 3)
        assert format_cell("conv") == "conv"


class TestPresets:
    @pytest.mark.parametrize("name", ["fig1", "fig2", "fig3", "fig4"])
    def test_presets_validate(self, name):
        cfg = preset(name)
        cfg.validate()
        assert config_hash(cfg) == config_hash(preset(name))

    def test_unknown_preset(self):
        with pytest.raises(ParameterError, match="unknown preset"):
            preset("fig9")
