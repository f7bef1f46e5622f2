import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from perinet.cli import EXIT_INVALID, EXIT_OK, main
from perinet.core import (CountSeries, ExpPolyKernel, ModelSpec, NetworkSpec, PeriodicBaseline,
                          save_model)
from perinet.errors import ParseError
from perinet.io import (BERLIN_DISTRICTS, berlin_network, load_adjacency, load_counts,
                        save_adjacency, save_counts)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestCounts:
    @settings(max_examples=30, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(arrays(np.int64, st.tuples(st.integers(1, 20), st.integers(1, 4)),
                  elements=st.integers(0, 10_000)), st.integers(-5, 100))
    def test_roundtrip_is_byte_identical(self, tmp_path, counts, t0):
        path = tmp_path / "c.csv"
        names = [f"n{i}" for i in range(counts.shape[1])]
        save_counts(CountSeries(counts, t0=t0, names=names), path)
        text = path.read_text()
        back = load_counts(path)
        np.testing.assert_array_equal(back.counts, counts)
        assert back.t0 == t0 and list(back.names) == names
        save_counts(back, path)
        assert path.read_text() == text

    def test_bad_cell_names_row_and_column(self, tmp_path):
        path = _write(tmp_path / "c.csv", "t,a,b\n1,2,3\n2,x,1\n")
        with pytest.raises(ParseError, match=r"row 3, column 'a'"):
            load_counts(path)

    def test_negative_count(self, tmp_path):
        path = _write(tmp_path / "c.csv", "t,a\n1,-2\n")
        with pytest.raises(ParseError, match="negative"):
            load_counts(path)

    def test_ragged_row(self, tmp_path):
        with pytest.raises(ParseError, match="row 2"):
            load_counts(_write(tmp_path / "c.csv", "t,a,b\n1,2\n"))

    def test_gap_in_time(self, tmp_path):
        with pytest.raises(ParseError, match="increase by one"):
            load_counts(_write(tmp_path / "c.csv", "t,a\n1,2\n3,1\n"))

    def test_bad_header(self, tmp_path):
        with pytest.raises(ParseError):
            load_counts(_write(tmp_path / "c.csv", "week,a\n1,2\n"))


class TestAdjacency:
    def test_names_and_indices(self, tmp_path):
        path = _write(tmp_path / "a.csv", "src,dst\na,b\n3,1\n")
        net = load_adjacency(path, names=["a", "b", "c"])
        assert net.adjacency[1, 0] == 1 and net.adjacency[0, 2] == 1 and net.n_edges == 2

    def test_self_loop(self, tmp_path):
        with pytest.raises(ParseError, match="self-loop"):
            load_adjacency(_write(tmp_path / "a.csv", "src,dst\n1,1\n"), d=2)

    def test_unknown_node(self, tmp_path):
        with pytest.raises(ParseError, match="unknown node"):
            load_adjacency(_write(tmp_path / "a.csv", "src,dst\na,z\n"), names=["a", "b"])

    def test_index_out_of_range(self, tmp_path):
        with pytest.raises(ParseError, match="outside"):
            load_adjacency(_write(tmp_path / "a.csv", "src,dst\n1,5\n"), d=2)

    @settings(max_examples=30, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(arrays(np.int64, (5, 5), elements=st.integers(0, 1)), st.booleans())
    def test_roundtrip(self, tmp_path, adj, symmetric):
        np.fill_diagonal(adj, 0)
        if symmetric:
            adj = np.maximum(adj, adj.T)
        net = NetworkSpec.from_adjacency(adj)
        path = tmp_path / "a.csv"
        save_adjacency(net, path, symmetric=symmetric)
        text = path.read_text()
        back = load_adjacency(path, d=5, symmetric=symmetric)
        np.testing.assert_array_equal(back.adjacency, adj)
        save_adjacency(back, path, symmetric=symmetric)
        assert path.read_text() == text

    def test_berlin_fixture(self):
        net = berlin_network()
        assert net.d == len(BERLIN_DISTRICTS) == 12
        assert net.violations() == []
        np.testing.assert_array_equal(net.adjacency, net.adjacency.T)
        assert net.out_degrees.tolist() == [5, 6, 4, 5, 3, 3, 5, 3, 4, 2, 4, 4]


def _model_file(tmp_path):
    net = NetworkSpec.from_edges([(0, 1), (1, 2)], 3, symmetric=True)
    kern = ExpPolyKernel.from_network([[0.3], [0.2]], [[0.2], [0.1]], net, 2.0)
    spec = ModelSpec(3, 2, PeriodicBaseline.constant(1.0, 3, 2), kern)
    path = tmp_path / "model.json"
    save_model(spec, path)
    return path, net


class TestCli:
    def test_simulate_fit_forecast_compare(self, tmp_path, capsys):
        model, net = _model_file(tmp_path)
        save_adjacency(net, tmp_path / "adj.csv")
        assert main(["simulate", "--model", str(model), "--T", "300", "--seed", "3",
                     "--out", str(tmp_path)]) == EXIT_OK
        counts = tmp_path / "counts_seed3.csv"
        assert load_counts(counts).T == 300

        assert main(["fit", "--data", str(counts), "--adjacency", str(tmp_path / "adj.csv"),
                     "--period", "2", "--q", "1", "--tau", "2", "--out", str(tmp_path / "fit")]) == 0
        fit = json.loads((tmp_path / "fit" / "fit.json").read_text())
        assert fit["converged"]

        for name, src in (("a", tmp_path / "fit" / "fit.json"), ("b", model)):
            assert main(["forecast", "--model", str(src), "--data", str(counts), "--origin", "250",
                         "--h", "5", "--name", name, "--out", str(tmp_path / name)]) == 0
        assert main(["compare", "--a", str(tmp_path / "a" / "forecast_report.json"),
                     "--b", str(tmp_path / "b" / "forecast_report.json"),
                     "--out", str(tmp_path / "cmp")]) == 0
        table = (tmp_path / "cmp" / "comparison.csv").read_text().splitlines()
        assert table[0] == "district,RMSE_a,RMSE_b,DM,p_adjusted" and len(table) == 4

    def test_stability_and_approx(self, tmp_path):
        model, _ = _model_file(tmp_path)
        assert main(["stability", "--model", str(model), "--out", str(tmp_path)]) == 0
        verdict = json.loads((tmp_path / "stability.json").read_text())
        assert verdict["global"]["stable"] and verdict["periodic"]["stable"]
        assert main(["approx", "--model", str(model), "--tau", "2", "--q", "2",
                     "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "approx_report.json").read_text())
        assert max(max(max(r) for r in e) for e in report["errors"]) < 1e-8

    def test_simulate_markov_coupled_replications(self, tmp_path):
        model, _ = _model_file(tmp_path)
        assert main(["simulate", "--model", str(model), "--T", "20", "--seed", "4", "--markov",
                     "--couple", str(model), "--reps", "2", "--out", str(tmp_path)]) == 0
        a = load_counts(tmp_path / "counts_seed4_r1.csv")
        b = load_counts(tmp_path / "counts_seed4_b_r1.csv")
        assert list(a.names) == ["node_1", "node_2", "node_3"]
        np.testing.assert_array_equal(a.counts, b.counts)
        lam = (tmp_path / "intensities_seed4_r0.csv").read_text().splitlines()
        assert lam[0] == "t,node_1,node_2,node_3" and len(lam) == 21
        coupling = json.loads((tmp_path / "coupling_seed4.json").read_text())
        assert max(coupling["raw"]) == 0.0
        summary = json.loads((tmp_path / "summary_seed4.json").read_text())
        assert summary["replications"] == 2 and len(summary["mean_count"]) == 3

    def test_stability_mode(self, tmp_path):
        model, _ = _model_file(tmp_path)
        assert main(["stability", "--model", str(model), "--mode", "periodic",
                     "--out", str(tmp_path)]) == 0
        verdict = json.loads((tmp_path / "stability.json").read_text())
        assert set(verdict) == {"periodic"}

    def test_fit_layout_file_and_flags(self, tmp_path):
        model, net = _model_file(tmp_path)
        save_adjacency(net, tmp_path / "adj.csv")
        main(["simulate", "--model", str(model), "--T", "200", "--out", str(tmp_path)])
        layout = tmp_path / "layout.json"
        layout.write_text(json.dumps({"period": 2, "q": 1, "tau": 2.0, "mu_per_node": True}))
        assert main(["fit", "--data", str(tmp_path / "counts_seed0.csv"), "--layout", str(layout),
                     "--adjacency", str(tmp_path / "adj.csv"), "--psi", "softplus-offset",
                     "--trig", "1", "--out", str(tmp_path / "fit")]) == 0
        fit = json.loads((tmp_path / "fit" / "fit.json").read_text())
        assert fit["layout"]["kernel_basis"] == "trig" and fit["layout"]["harmonics"] == 1
        assert fit["layout"]["jump_rate"]["kind"] == "softplus_offset"
        assert fit["layout"]["structure"] == "network" and fit["layout"]["mu_per_node"]

    def test_fit_needs_period(self, tmp_path):
        model, _ = _model_file(tmp_path)
        main(["simulate", "--model", str(model), "--T", "10", "--out", str(tmp_path)])
        assert main(["fit", "--data", str(tmp_path / "counts_seed0.csv"),
                     "--out", str(tmp_path)]) == EXIT_INVALID

    def test_parse_error_exit_code(self, tmp_path, capsys):
        bad = _write(tmp_path / "bad.csv", "t,a\n1,oops\n")
        code = main(["fit", "--data", str(bad), "--period", "1", "--out", str(tmp_path)])
        assert code == EXIT_INVALID
        assert "row 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["stability", "--model", str(tmp_path / "nope.json")]) == EXIT_INVALID

    def test_unknown_preset(self, tmp_path):
        assert main(["experiment", "nosuch", "--out", str(tmp_path)]) == EXIT_INVALID

    def test_experiment_param(self, tmp_path):
        out = tmp_path / "fig6"
        assert main(["experiment", "fig6", "--param", "n_mc=20", "--param", "horizon=5",
                     "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["params"] == {"n_mc": 20, "horizon": 5}

    def test_requires_verb(self):
        with pytest.raises(SystemExit):
            main([])
