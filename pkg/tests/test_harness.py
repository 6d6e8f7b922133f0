import csv
import io
import json
from pathlib import Path

import pytest

from apskga import catalog, harness
from apskga.cli import main
from apskga.constellation import load, validate
from apskga.genetic import Crossover, GaConfig, Selection

TINY = ["--pop", "6", "--generations", "3", "--symbols", "3000"]


def _rows(text):
    return list(csv.reader(io.StringIO("".join(l for l in text.splitlines(True)
                                               if not l.startswith("#")))))


class TestOptimize:
    def test_files_and_gene_count(self, tmp_path, capsys):
        out = tmp_path / "run"
        rc = main(["optimize", "--layout", "16apsk", "--symmetry", "double",
                   "--selection", "remainder", "--crossover", "single_point", "--seed", "5",
                   "--out", str(out)] + TINY)
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_genes"] == 5 and len(summary["best_genes"]) == 5
        assert summary["seed"] == 5 and summary["config"]["ga"]["selection"] == "REMAINDER"
        c = load(out / "constellation.json")
        assert validate(c) == [] and c.M == 16
        trace = (out / "trace.csv").read_text()
        assert "# termination_reason: MAX_GENERATIONS" in trace
        assert "# seed: 5" in trace and "# apskga " in trace
        rows = _rows(trace)
        assert rows[0] == ["generation", "best_mse", "mean_mse"] and len(rows) == 5

    def test_32_none_gene_count(self, tmp_path):
        out = tmp_path / "r32"
        assert main(["optimize", "--layout", "32apsk", "--symmetry", "none", "--out", str(out),
                     "--pop", "4", "--generations", "1", "--symbols", "2000"]) == 0
        assert json.loads((out / "summary.json").read_text())["n_genes"] == 34

    def test_replay_identical(self, tmp_path):
        for name, workers in (("a", "1"), ("b", "4"), ("c", "1")):
            assert main(["optimize", "--seed", "9", "--workers", workers,
                         "--out", str(tmp_path / name)] + TINY) == 0
        a = (tmp_path / "a" / "trace.csv").read_bytes()
        assert a == (tmp_path / "b" / "trace.csv").read_bytes()
        assert a == (tmp_path / "c" / "trace.csv").read_bytes()

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"symmetry": "single", "pop_size": 6, "max_generations": 2,
                                   "n_symbols": 2000, "crossover": "TWO_POINT"}))
        out = tmp_path / "o"
        assert main(["optimize", "--config", str(cfg), "--generations", "1",
                     "--out", str(out)]) == 0
        s = json.loads((out / "summary.json").read_text())
        assert s["config"]["symmetry"] == "single"
        assert s["config"]["ga"]["max_generations"] == 1
        assert s["config"]["ga"]["crossover"] == "TWO_POINT"
        assert s["n_genes"] == 9

    def test_bad_config_is_usage_error(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"pop_size": 2}))
        assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "pop_size" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"colour": "red"}))
        assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 2


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    assert main(["sweep", "--replicates", "1", "--seed", "3", "--pop", "4",
                 "--generations", "1", "--symbols", "1000", "--out", str(out)]) == 0
    return out


class TestSweep:
    def test_table_shape(self, sweep_dir):
        rows = _rows((sweep_dir / "sweep.csv").read_text())
        assert rows[0] == ["crossover"] + [s.name for s in Selection]
        assert [r[0] for r in rows[1:]] == [x.name for x in Crossover]
        assert all(float(v) >= 0 for r in rows[1:] for v in r[1:])

    def test_cells_and_runs(self, sweep_dir):
        cells = _rows((sweep_dir / "sweep_cells.csv").read_text())
        assert len(cells) == 31
        runs = _rows((sweep_dir / "sweep_runs.csv").read_text())
        assert len(runs) == 31 and all(r[6] == "" for r in runs[1:])

    def test_rerun_identical(self, sweep_dir, tmp_path):
        assert main(["sweep", "--replicates", "1", "--seed", "3", "--pop", "4",
                     "--generations", "1", "--symbols", "1000", "--workers", "2",
                     "--out", str(tmp_path)]) == 0
        for f in ("sweep.csv", "sweep_cells.csv", "sweep_runs.csv"):
            assert (tmp_path / f).read_bytes() == (sweep_dir / f).read_bytes()

    def test_failed_cell_recorded(self, monkeypatch):
        real = harness.optimize

        def flaky(spec, validate_symbols=0):
            if spec.ga.selection is Selection.UNIFORM and spec.ga.crossover is Crossover.HEURISTIC:
                raise RuntimeError("boom")
            return real(spec, validate_symbols)

        monkeypatch.setattr(harness, "optimize", flaky)
        spec = harness.ExperimentSpec(ga=GaConfig(pop_size=4, max_generations=1),
                                      n_symbols=500, replicate_count=1)
        res = harness.sweep(spec)
        assert res.cell(Selection.UNIFORM, Crossover.HEURISTIC)["best_mse"] is None
        assert "ERROR" in res.table_csv()
        assert res.cell(Selection.REMAINDER, Crossover.HEURISTIC)["best_mse"] is not None

    def test_seeds_distinct(self):
        jobs = harness.sweep_jobs(harness.ExperimentSpec(replicate_count=3))
        assert len(jobs) == 90 and len({j.seed for j in jobs}) == 90


class TestCurve:
    def test_table_v_curves(self, tmp_path):
        docs = harness.export_published(tmp_path / "docs")
        table_v = [str(p) for p in docs if p.name.startswith("16apsk")]
        out = tmp_path / "curve.csv"
        rc = main(["curve", *table_v, "--symbols", "200000", "--out", str(out)])
        assert rc == 0
        rows = _rows(out.read_text())
        assert rows[0] == ["name", "snr_db", "mse"] and len(rows) == 1 + 4 * 21
        keys = [(r[0], float(r[1])) for r in rows[1:]]
        assert keys == sorted(keys)
        by_name = {}
        for name, snr, mse in rows[1:]:
            by_name.setdefault(name, []).append(float(mse))
        for curve in by_name.values():
            assert all(b <= a * 1.02 for a, b in zip(curve, curve[1:]))

    def test_bad_document_continues(self, tmp_path, capsys):
        good = harness.export_published(tmp_path)[0]
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        out = tmp_path / "c.csv"
        rc = main(["curve", str(bad), str(good), "--snr-max", "2", "--symbols", "2000",
                   "--out", str(out)])
        assert rc == 1
        assert "bad.json" in capsys.readouterr().err
        assert len(_rows(out.read_text())) == 1 + 3

    def test_crossings(self):
        a = [(0, 2.0), (1, 1.0), (2, 0.5)]
        b = [(0, 1.0), (1, 1.5), (2, 1.0)]
        assert harness.crossings(a, b) == [pytest.approx(2 / 3)]


class TestEvaluate:
    def test_methods_agree_uniform(self, tmp_path):
        from apskga.constellation import LAYOUT_16, reference_constellation, save
        p = tmp_path / "u.json"
        save(reference_constellation(LAYOUT_16, [0.5]), p)
        c = load(p)
        mc = harness.cmd_evaluate(c, 10.0, "mc", 400_000, seed=1)
        ex = harness.cmd_evaluate(c, 10.0, "exact")
        assert mc["mse"] == pytest.approx(ex["mse"], rel=0.02)
        assert mc["n0"] == pytest.approx(mc["es_avg"] / 10)

    def test_cli_prints_record(self, tmp_path, capsys):
        p = harness.export_published(tmp_path)[1]
        assert main(["evaluate", str(p), "--symbols", "20000", "--seed", "4", "--json"]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["seed"] == 4 and {"mse", "fitness", "es_avg", "n0"} <= set(rec)
        assert main(["evaluate", str(p), "--symbols", "20000", "--seed", "4", "--json"]) == 0
        assert json.loads(capsys.readouterr().out)["mse"] == rec["mse"]

    def test_missing_file(self, tmp_path, capsys):
        assert main(["evaluate", str(tmp_path / "nope.json")]) == 1


def test_export_all(tmp_path):
    paths = harness.export_published(tmp_path)
    assert sorted(p.stem for p in paths) == sorted(catalog.NAMES)
    for p in paths:
        assert validate(load(p)) == []


def test_help_lists_gene_counts(capsys):
    with pytest.raises(SystemExit):
        main(["optimize", "--help"])
    assert "16apsk: double 5, single 9, none 17" in capsys.readouterr().out
