import hashlib
import json

import numpy as np
import pytest

from perinet.core import CountSeries, save_model
from perinet.errors import ConfigurationError, ParseError
from perinet.experiments import (ExperimentConfig, preset_kernel_approx, preset_rotavirus,
                                 preset_wellspec, rotavirus_layouts, run_experiment)
from perinet.io import BERLIN_DISTRICTS, berlin_network, save_counts
from perinet.presets import sbm_network, wellspec_model
from perinet.simulate import SimulationConfig, simulate_markov


@pytest.fixture(scope="module")
def synthetic_rotavirus(tmp_path_factory):
    """Weekly counts drawn from the seasonal network model on the Berlin graph."""
    ours, _ = rotavirus_layouts(berlin_network())
    mu, coef = ours.unpack(np.zeros(ours.size))
    mu[0], mu[1], mu[2] = 3.0, 1.5, 0.5
    coef[0, 0, 0], coef[0, 1, 0], coef[1, 0, 0] = 0.9, 0.6, 0.2
    spec = ours.to_model(ours.pack(mu, coef))
    y = simulate_markov(spec, SimulationConfig(600, seed=1))
    path = tmp_path_factory.mktemp("rota") / "counts.csv"
    save_counts(CountSeries(y.counts, names=BERLIN_DISTRICTS), path)
    return path


class TestBundles:
    def test_rerun_is_byte_identical(self, tmp_path):
        params = {"n_mc": 30, "horizon": 8}
        m1 = run_experiment(ExperimentConfig("fig6", str(tmp_path / "a"), 4, 1, params))
        m2 = run_experiment(ExperimentConfig("fig6", str(tmp_path / "b"), 4, 2, params))
        assert m1["files"] == m2["files"]
        for name, digest in m1["files"].items():
            data = (tmp_path / "a" / name).read_bytes()
            assert hashlib.sha256(data).hexdigest() == digest
            assert data == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / "timings.json").exists()

    def test_seed_in_file_names(self, tmp_path):
        manifest = run_experiment(ExperimentConfig("fig6", str(tmp_path), 7, 1,
                                                   {"n_mc": 10, "horizon": 4}))
        assert "fig6_fit_seed7.json" in manifest["files"]

    def test_alias(self, tmp_path):
        manifest = run_experiment(ExperimentConfig(
            "fig7", str(tmp_path), 0, 1, {"qs": [2], "n_seeds": 2, "T": 20, "n_lags": 300,
                                          "tau": 8.0, "q_sim": 2}))
        assert manifest["experiment"] == "kernel-approx"

    def test_failure_manifest(self, tmp_path):
        with pytest.raises(ConfigurationError):
            run_experiment(ExperimentConfig("fig6", str(tmp_path), 0, 1, {"bogus": 1}))
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["status"] == "failed" and "bogus" in manifest["error"]

    def test_unknown_experiment(self, tmp_path):
        with pytest.raises(ConfigurationError):
            run_experiment(ExperimentConfig("nosuch", str(tmp_path)))

    def test_custom_stages(self, tmp_path):
        spec = wellspec_model(sbm_network())
        save_model(spec, tmp_path / "m.json")
        cfg = ExperimentConfig.from_dict({
            "experiment": "custom", "out_dir": str(tmp_path / "out"), "seed": 2,
            "stages": [{"stage": "simulate", "model": str(tmp_path / "m.json"), "T": 50},
                       {"stage": "stability", "model": str(tmp_path / "m.json")}]})
        manifest = run_experiment(cfg)
        assert set(manifest["files"]) == {"00_counts_seed2.csv", "00_intensities_seed2.csv",
                                          "01_stability.json"}

    def test_config_requires_fields(self):
        with pytest.raises(ParseError):
            ExperimentConfig.from_dict({"experiment": "fig6"})


class TestPresets:
    def test_wellspec_smoke(self):
        files = preset_wellspec(replicates=2, periods=60)
        summary = json.loads(files["wellspec_summary_seed0.json"])
        assert len(summary["mu_mean"]) == 7 and all(summary["converged"])

    def test_kernel_approx_smoke(self):
        files = preset_kernel_approx(qs=(2, 3), n_seeds=5, T=40)
        summary = json.loads(files["approx_summary_seed0.json"])
        assert summary["l1_error"]["3"] <= summary["l1_error"]["2"]
        assert 0.0 <= summary["approx_better_fraction"] <= 1.0

    def test_rotavirus_pipeline_on_synthetic_data(self, synthetic_rotavirus):
        files = preset_rotavirus(data=str(synthetic_rotavirus), split=560, h=13)
        summary = json.loads(files["rotavirus_summary.json"])
        assert summary["bic_prefers_ours"]
        assert summary["districts_ours_better"] >= 8
        table = files["rotavirus_table.csv"].splitlines()
        assert table[0] == "district,RMSE_ours,RMSE_pnar,DM,p_adjusted"
        assert len(table) == 13

    def test_rotavirus_missing_data(self, tmp_path):
        with pytest.raises(ConfigurationError, match="fetch_rotavirus"):
            preset_rotavirus(data=str(tmp_path / "none.csv"))
