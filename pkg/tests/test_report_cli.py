import json

import numpy as np
import pytest
from click.testing import CliRunner

from hawkesgraph.cli import main
from hawkesgraph.graph import Adjacency
from hawkesgraph.model import LinkFunction
from hawkesgraph.report import (export_graph, graph_from_json, config_hash,
                                write_kv_report)
from hawkesgraph.simulate import SimulationSpec


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def sim_config(tmp_path):
    spec = SimulationSpec(
        n1=2, n2=1, n3=0, d=1, T=150,
        A=np.array([[0.4, 0.0], [0.3, 0.2]]), R=np.ones((2, 2)),
        B=np.array([[0.1], [0.1]]), Rtilde=np.ones((2, 1)),
        nu=np.array([0.3, 0.35]), link=LinkFunction("linear"),
        ar_noise=0.3, clip=1.0)
    path = tmp_path / "sim.json"
    path.write_text(spec.to_config())
    return path


PSV_TEMPLATE = """\
HR|O2Sat|Temp|SBP|DBP|Resp|Creatinine|ICULOS|Age|Gender|SepsisLabel
{rows}
"""


def _psv_dir(tmp_path, n_files=3):
    data = tmp_path / "data"
    data.mkdir()
    rng = np.random.default_rng(0)
    for k in range(n_files):
        rows = []
        for t in range(1, 13):
            hr = 75 + rng.integers(0, 30)
            rows.append(f"{hr}|97|36.6|120|64|15|1.1|{t}|{60 + k * 5}|{k % 2}|"
                        f"{int(t > 9)}")
        (data / f"p{k:03d}.psv").write_text(
            PSV_TEMPLATE.format(rows="\n".join(rows)))
    return data


class TestGraphExport:
    def _adj(self):
        return Adjacency(np.array([[0.0, 0.3], [-0.2, 0.0]]), ("a", "b"))

    def test_dot_single_edge(self):
        adj = Adjacency(np.array([[0.0, 0.4], [0.0, 0.0]]), ("a", "b"))
        dot = export_graph(adj, "dot")
        assert dot.count("->") == 1
        assert '"b" -> "a"' in dot

    def test_dot_negative_edge_styled(self):
        dot = export_graph(self._adj(), "dot")
        assert "color=red" in dot and "style=dashed" in dot
        assert "color=blue" in dot

    def test_json_round_trip(self):
        adj = self._adj()
        back = graph_from_json(export_graph(adj, "json"))
        np.testing.assert_allclose(back.weights, adj.weights)
        assert back.labels == adj.labels

    def test_unknown_format_rejected(self):
        from hawkesgraph.errors import ValidationError
        with pytest.raises(ValidationError):
            export_graph(self._adj(), "gml")


class TestReports:
    def test_timestamp_confined_to_header(self, tmp_path):
        p1 = tmp_path / "r1.txt"
        p2 = tmp_path / "r2.txt"
        write_kv_report(p1, "t", {"a": 1, "b": 2})
        write_kv_report(p2, "t", {"a": 1, "b": 2})
        body1 = p1.read_text().splitlines()[1:]
        body2 = p2.read_text().splitlines()[1:]
        assert body1 == body2

    def test_config_hash_stable_under_key_order(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


class TestCliPipeline:
    def test_simulate_fit_bootstrap_cluster_blockmodel(self, runner, tmp_path,
                                                       sim_config):
        out = tmp_path / "out"
        r = runner.invoke(main, ["simulate", "--config", str(sim_config),
                                 "-o", str(out), "--panels", "6", "--seed", "1"])
        assert r.exit_code == 0, r.output
        archive = out / "panels.npz"
        assert archive.exists() and (out / "truth.npz").exists()

        r = runner.invoke(main, ["fit", str(archive), "-o", str(out),
                                 "--d", "1", "--link", "linear"])
        assert r.exit_code == 0, r.output
        assert (out / "coefficients.tsv").exists()
        assert (out / "graph.json").exists()
        assert (out / "coefficients.png").exists()

        r = runner.invoke(main, ["bootstrap", str(archive), "-o", str(out),
                                 "--d", "1", "--link", "linear", "--B", "15",
                                 "--seed", "2", "--threshold", "0.05"])
        assert r.exit_code == 0, r.output
        assert (out / "edges.tsv").exists()
        assert (out / "network.png").exists()
        graph = out / "graph.json"

        r = runner.invoke(main, ["cluster", str(graph), "-o", str(out)])
        assert r.exit_code == 0, r.output
        assert (out / "merges.tsv").exists()
        assert (out / "dendrogram.png").exists()

        r = runner.invoke(main, ["blockmodel", str(graph), "-o", str(out),
                                 "--k", "2", "--depth", "1", "--threshold",
                                 "0.01"])
        assert r.exit_code == 0, r.output
        assert (out / "blocks.tsv").exists()
        assert (out / "blocks.png").exists()

        dot_out = tmp_path / "re.dot"
        r = runner.invoke(main, ["export", str(graph), "--format", "dot",
                                 "-o", str(dot_out)])
        assert r.exit_code == 0, r.output
        assert "digraph" in dot_out.read_text()

    def test_fit_then_select_then_ci(self, runner, tmp_path, sim_config):
        out = tmp_path / "out"
        runner.invoke(main, ["simulate", "--config", str(sim_config),
                             "-o", str(out), "--panels", "5", "--seed", "3"])
        archive = out / "panels.npz"
        r = runner.invoke(main, ["select", str(archive), "-o", str(out),
                                 "--target", "y0", "--criterion", "auc",
                                 "--link", "linear", "--no-class-weighting"])
        assert r.exit_code == 0, r.output
        sel = json.loads((out / "selection.json").read_text())
        assert sel["target"] == "y0"

        r = runner.invoke(main, ["fit", str(archive), "-o", str(out),
                                 "--d", "1", "--link", "linear",
                                 "--features-from", str(out / "selection.json"),
                                 "--target", "y0"])
        assert r.exit_code == 0, r.output

        r = runner.invoke(main, ["ci", str(archive), "-o", str(out),
                                 "--target", "y0", "--link", "linear",
                                 "--epsilon", "0.1"])
        assert r.exit_code == 0, r.output
        text = (out / "bound_report.txt").read_text()
        assert "theta_error_bound" in text
        assert (out / "intervals.tsv").exists()

    def test_ingest_pipeline(self, runner, tmp_path):
        data = _psv_dir(tmp_path)
        out = tmp_path / "ing"
        r = runner.invoke(main, ["ingest", str(data), "-o", str(out)])
        assert r.exit_code == 0, r.output
        assert (out / "panels.npz").exists()
        report = (out / "ingest_report.txt").read_text()
        assert "patients_kept\t3" in report
        assert "rows_before\t36" in report

    def test_ingest_subgroup_filter(self, runner, tmp_path):
        data = _psv_dir(tmp_path)
        out = tmp_path / "sub"
        r = runner.invoke(main, ["ingest", str(data), "-o", str(out),
                                 "--sex", "0", "--min-age", "60"])
        assert r.exit_code == 0, r.output
        # ages are 60,65,70 with sexes 0,1,0; sex=0 & age>60 keeps only p002
        assert "patients_kept\t1" in (out / "ingest_report.txt").read_text()

    def test_ingest_empty_dir_exit_2(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        r = runner.invoke(main, ["ingest", str(empty), "-o", str(tmp_path / "x")])
        assert r.exit_code == 2

    def test_missing_archive_exit_2(self, runner, tmp_path):
        r = runner.invoke(main, ["fit", str(tmp_path / "nope.npz"),
                                 "-o", str(tmp_path)])
        assert r.exit_code == 2
        assert "ingest or simulate" in r.output

    def test_unreadable_file_skipped_run_continues(self, runner, tmp_path):
        data = _psv_dir(tmp_path, n_files=2)
        (data / "broken.psv").write_text("HR|O2Sat\n80\n")
        out = tmp_path / "o2"
        r = runner.invoke(main, ["ingest", str(data), "-o", str(out)])
        assert r.exit_code == 0
        assert "files_failed\t1" in (out / "ingest_report.txt").read_text()

    def test_reports_deterministic_modulo_header(self, runner, tmp_path,
                                                 sim_config):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            runner.invoke(main, ["simulate", "--config", str(sim_config),
                                 "-o", str(out), "--panels", "4", "--seed", "7"])
            runner.invoke(main, ["fit", str(out / "panels.npz"), "-o", str(out),
                                 "--d", "1", "--link", "linear"])
            outs.append(out)
        for fname in ("coefficients.tsv", "graph.json"):
            t1 = (outs[0] / fname).read_text().splitlines()
            t2 = (outs[1] / fname).read_text().splitlines()
            if fname.endswith(".tsv"):
                t1, t2 = t1[1:], t2[1:]
            assert t1 == t2, fname
        m1 = json.loads((outs[0] / "fit_manifest.json").read_text())
        m2 = json.loads((outs[1] / "fit_manifest.json").read_text())
        assert m1["config_hash"] == m2["config_hash"]
        assert sorted(m1["inputs"].values()) == sorted(m2["inputs"].values())


class TestEndToEndOracle:
    def test_simulate_fit_recovers_truth_within_bound(self, runner, tmp_path,
                                                      sim_config):
        """Recovered parameters from the CLI round trip stay within the
        closed-form error bound at eps = 0.1."""
        from hawkesgraph.inference import parameter_error_bound
        from hawkesgraph.model import LinkFunction, stack_designs
        from hawkesgraph.panel import load_panels

        out = tmp_path / "oracle"
        r = runner.invoke(main, ["simulate", "--config", str(sim_config),
                                 "-o", str(out), "--panels", "12",
                                 "--seed", "21"])
        assert r.exit_code == 0, r.output
        r = runner.invoke(main, ["fit", str(out / "panels.npz"), "-o",
                                 str(out), "--d", "1", "--link", "linear",
                                 "--tol", "1e-9"])
        assert r.exit_code == 0, r.output
        models = np.load(out / "models.npz")
        truth = np.load(out / "truth.npz")
        panels = load_panels(out / "panels.npz")
        for i, name in enumerate(("y0", "y1")):
            design = stack_designs(panels, name, 1)
            bound = parameter_error_bound(design, LinkFunction("linear"), 0.1)
            err = np.linalg.norm(models[f"theta_{name}"] - truth[f"theta_{i}"])
            assert err <= bound.theta_error_bound

    def test_bootstrap_graph_respects_threshold(self, runner, tmp_path,
                                                sim_config):
        out = tmp_path / "thr"
        runner.invoke(main, ["simulate", "--config", str(sim_config),
                             "-o", str(out), "--panels", "8", "--seed", "4"])
        r = runner.invoke(main, ["bootstrap", str(out / "panels.npz"),
                                 "-o", str(out), "--d", "1", "--link",
                                 "linear", "--B", "25", "--seed", "1",
                                 "--threshold", "0.15"])
        assert r.exit_code == 0, r.output
        payload = json.loads((out / "graph.json").read_text())
        assert all(abs(e["weight"]) > 0.15 for e in payload["edges"])


class TestPipeline:
    def test_pipeline_from_simulation_config(self, runner, tmp_path,
                                             sim_config):
        from hawkesgraph.cli import RunConfig
        out = tmp_path / "pipe"
        cfg = RunConfig(output_dir=str(out), seed=2,
                        sim_config=str(sim_config), n_panels=6,
                        d=1, link="linear", B=15, threshold=0.05,
                        depth=1, min_block=1, K=2)
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(cfg.to_json())
        r = runner.invoke(main, ["pipeline", "--config", str(cfg_path)])
        assert r.exit_code == 0, r.output
        for fname in ("panels.npz", "coefficients.tsv", "edges.tsv",
                      "graph.json", "merges.tsv", "blocks.tsv",
                      "network.png", "dendrogram.png", "blocks.png",
                      "pipeline_manifest.json"):
            assert (out / fname).exists(), fname

    def test_pipeline_config_round_trip(self):
        from hawkesgraph.cli import RunConfig
        cfg = RunConfig(data_dir="d", select_target="Sepsis", B=77)
        back = RunConfig.from_json(cfg.to_json())
        assert back == cfg

    def test_pipeline_requires_one_source(self, runner, tmp_path):
        from hawkesgraph.cli import RunConfig
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(RunConfig().to_json())
        r = runner.invoke(main, ["pipeline", "--config", str(cfg_path)])
        assert r.exit_code == 2


class TestPsvExport:
    def test_simulate_psv_flag_round_trips(self, runner, tmp_path, sim_config):
        from hawkesgraph.ingest import read_psv, record_to_panel
        from hawkesgraph.panel import load_panels
        out = tmp_path / "psvx"
        r = runner.invoke(main, ["simulate", "--config", str(sim_config),
                                 "-o", str(out), "--panels", "2",
                                 "--seed", "5", "--psv"])
        assert r.exit_code == 0, r.output
        panels = load_panels(out / "panels.npz")
        files = sorted((out / "psv").glob("*.psv"))
        assert len(files) == 2
        back = record_to_panel(read_psv(files[0]))
        np.testing.assert_allclose(back.y, panels[0].y)
        np.testing.assert_allclose(back.x, panels[0].x)
