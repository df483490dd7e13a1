import json

import numpy as np
import pytest

from qilp import Dataset, ForwardInstance
from qilp.cli import main
from qilp.fileio import (
    load_biadjacency,
    load_instance,
    read_csv,
    save_dataset,
    save_instance,
)


@pytest.fixture
def box_files(tmp_path, box_instance, outlier_data):
    inst_path = tmp_path / "box.json"
    data_path = tmp_path / "points.txt"
    save_instance(box_instance, inst_path)
    save_dataset(outlier_data, data_path)
    return str(inst_path), str(data_path)


def run(args):
    return main(list(args))


class TestGen:
    def test_diet_round_trips(self, tmp_path):
        out = tmp_path / "diet.json"
        assert run(["gen", "diet", "--out", str(out)]) == 0
        inst, meta = load_instance(out)
        assert inst.m == 41 and meta["generator"] == "diet"

    def test_random_is_byte_stable(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert run(
                ["gen", "random", "--n", "3", "--m", "8", "--seed", "7",
                 "--out", str(out)]
            ) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_transshipment_metadata_has_true_cost(self, tmp_path):
        out = tmp_path / "t.json"
        assert run(
            ["gen", "transshipment", "--demand", "0.5,0.9", "--out", str(out)]
        ) == 0
        _, meta = load_instance(out)
        assert meta["c_true"][0] == pytest.approx(0.2393)
        assert meta["demand"] == [0.5, 0.9]

    def test_random_with_data_writes_points(self, tmp_path):
        out = tmp_path / "r.json"
        data_out = tmp_path / "r.txt"
        assert run(
            ["gen", "random", "--n", "2", "--m", "6", "--seed", "1",
             "--out", str(out), "--with-data", "--points", "5",
             "--sigma", "0.05", "--data-out", str(data_out)]
        ) == 0
        assert len(data_out.read_text().splitlines()) == 5


class TestInfer:
    def test_selection_mip_on_running_example(self, tmp_path, box_files):
        inst, data = box_files
        out = tmp_path / "fit.json"
        code = run(
            ["infer", "--instance", inst, "--data", data, "--method", "mip",
             "--tau", "1.0", "--theta", "0.8", "--p", "1", "--out", str(out)]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["objective"] == 2
        assert doc["facets"] == [0, 1]
        assert doc["representative_c"] == pytest.approx([-0.5, -0.5])

    def test_previous_model_baseline(self, tmp_path, box_instance, example1_data, box_files):
        inst_path = tmp_path / "box2.json"
        data_path = tmp_path / "pts2.txt"
        save_instance(box_instance, inst_path)
        save_dataset(example1_data, data_path)
        out = tmp_path / "prev.json"
        code = run(
            ["infer", "--instance", str(inst_path), "--data", str(data_path),
             "--method", "previous", "--tau", "1", "--theta", "1",
             "--out", str(out)]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["facets"] == [0]
        assert doc["objective"] == pytest.approx(1.4, abs=1e-6)

    def test_decomposition_methods_and_matrix_export(self, tmp_path, box_files):
        inst, data = box_files
        objectives = {}
        for method in ("mip", "dbar-exact", "dbar-heur", "dtilde-heur"):
            out = tmp_path / f"{method}.json"
            extra = []
            if method == "dbar-heur":
                extra = ["--matrix-out", str(tmp_path / "mat.txt")]
            assert run(
                ["infer", "--instance", inst, "--data", data,
                 "--method", method, "--tau", "1.0", "--theta", "0.8",
                 "--out", str(out)] + extra
            ) == 0
            objectives[method] = json.loads(out.read_text())["objective"]
        assert (
            objectives["dtilde-heur"]
            <= objectives["dbar-heur"]
            <= objectives["dbar-exact"]
            == objectives["mip"]
        )
        mat = load_biadjacency(tmp_path / "mat.txt")
        assert mat.entries.shape == (5, 4)

    def test_auto_tau_uses_margin(self, tmp_path, box_files):
        inst, data = box_files
        out = tmp_path / "auto.json"
        assert run(
            ["infer", "--instance", inst, "--data", data, "--method", "mip",
             "--auto-tau", "--theta", "0.8", "--out", str(out)]
        ) == 0
        doc = json.loads(out.read_text())
        # min feasible threshold at theta=.8 is 0.5 (facet 1), plus 10%
        assert doc["config"]["tau"] == pytest.approx(0.55, abs=1e-9)

    def test_infeasible_exits_3(self, tmp_path, box_files):
        inst, data = box_files
        out = tmp_path / "x.json"
        code = run(
            ["infer", "--instance", inst, "--data", data, "--method", "mip",
             "--tau", "0.01", "--theta", "1.0", "--out", str(out)]
        )
        assert code == 3

    def test_usage_error_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["infer", "--method", "mip"])
        assert exc.value.code == 2

    def test_missing_file_is_clean_error(self, tmp_path):
        out = tmp_path / "x.json"
        code = run(
            ["infer", "--instance", "nope.json", "--data", "nope.txt",
             "--method", "mip", "--tau", "1", "--theta", "1", "--out", str(out)]
        )
        assert code == 2

    def test_output_byte_stable(self, tmp_path, box_files):
        inst, data = box_files
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert run(
                ["infer", "--instance", inst, "--data", data, "--method",
                 "dbar-exact", "--tau", "1.0", "--theta", "0.8",
                 "--out", str(out)]
            ) == 0
        assert a.read_bytes() == b.read_bytes()


class TestStability:
    def test_lower_bound_report(self, tmp_path, box_files):
        inst, data = box_files
        out = tmp_path / "st.json"
        assert run(
            ["stability", "--instance", inst, "--data", data,
             "--mode", "inverse-lb", "--tau", "1.0", "--theta", "0.8",
             "--out", str(out)]
        ) == 0
        doc = json.loads(out.read_text())
        assert doc["lower_bound"] == pytest.approx(1.0, abs=1e-6)
        assert doc["per_facet_bounds"] == {"0": 0.5, "1": 1.0}

    def test_empirical_log(self, tmp_path, box_files):
        inst, data = box_files
        out, log = tmp_path / "st.json", tmp_path / "st.csv"
        assert run(
            ["stability", "--instance", inst, "--data", data,
             "--mode", "inverse-empirical", "--tau", "1.0", "--theta", "0.8",
             "--gamma-grid", "1.0:8.0:1.0", "--trials", "3", "--seed", "5",
             "--out", str(out), "--log", str(log)]
        ) == 0
        doc = json.loads(out.read_text())
        header, rows = read_csv(log)
        assert header == ["trial", "gamma_star", "distance"]
        assert len(rows) == 3
        assert doc["empirical_upper"] >= doc["lower_bound"]

    def test_forward_mode_with_sweep(self, tmp_path, box_files):
        inst, data = box_files
        out, log = tmp_path / "fw.json", tmp_path / "fw.csv"
        assert run(
            ["stability", "--instance", inst, "--data", data,
             "--mode", "forward", "--tau", "1.0", "--theta", "0.8",
             "--h-sweep", "--samples", "4", "--seed", "1",
             "--out", str(out), "--log", str(log)]
        ) == 0
        doc = json.loads(out.read_text())
        assert doc["forward_stability"] <= doc["forward_stability_ub"]
        header, rows = read_csv(log)
        assert header == ["h", "sample", "distance"]
        assert len(rows) == 2 * 4  # optimum is 2 facets, 4 samples per cap


class TestOnlineAndPlots:
    def test_simulated_run_and_tidy_table(self, tmp_path):
        out, log = tmp_path / "o.json", tmp_path / "o.csv"
        assert run(
            ["online", "--simulate", "5,0.0", "--theta", "0.75",
             "--tau", "0.05", "--probe", "2", "--seed", "3",
             "--out", str(out), "--log", str(log)]
        ) == 0
        doc = json.loads(out.read_text())
        assert doc["c_true_in_final_cone"] is True
        header, rows = read_csv(log)
        assert len(rows) == 5
        tidy = tmp_path / "tidy.csv"
        assert run(
            ["plot-data", "--figure", "online", "--in", str(log),
             "--out", str(tidy)]
        ) == 0
        header2, rows2 = read_csv(tidy)
        assert header2 == header and len(rows2) == len(rows)

    def test_plot_data_rejects_wrong_schema(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n")
        out = tmp_path / "out.csv"
        code = run(
            ["plot-data", "--figure", "fwstab", "--in", str(bad), "--out", str(out)]
        )
        assert code == 2

    def test_plot_data_merges_and_sorts(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        a.write_text("h,sample,distance\n2,0,1.5\n1,1,2.5\n")
        b.write_text("h,sample,distance\n1,0,3.5\n")
        out = tmp_path / "out.csv"
        assert run(
            ["plot-data", "--figure", "fwstab", "--in", str(a), "--in", str(b),
             "--out", str(out)]
        ) == 0
        header, rows = read_csv(out)
        assert len(rows) == 3
        assert [r[0] for r in rows] == ["1", "1", "2"]
        assert [r[1] for r in rows] == ["0", "1", "0"]
