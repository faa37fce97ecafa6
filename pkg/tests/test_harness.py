import json
import re

import numpy as np
import pytest
import yaml

from fairkit.errors import ConfigError, IncompleteReport
from fairkit.harness.cli import main
from fairkit.harness.config import ExperimentConfig, load_config
from fairkit.harness.experiment import best_method, fit_fold, mean_ci, pooled_counts, run_experiment
from fairkit.harness.io import dumps_report, round_sig
from fairkit.harness.svg import forest_svg, render_figures, scatter_svg

COHORT = {"n": 1500, "seed": 5, "n_numeric": 3,
          "groups": [{"label": "A", "proportion": 0.5, "prevalence": 0.2},
                     {"label": "B", "proportion": 0.5, "prevalence": 0.08}]}


def small_config(mitigations=("SUP", "RW", "DIR", "CPP", "PSTA"), **kw):
    d = {"data": {"cohort": COHORT}, "protected": ["group"], "k_outer": 3, "k_inner": 2,
         "seed": 2, "mitigations": list(mitigations), "grid": [{"l2_strength": 0.01}]}
    d.update(kw)
    return ExperimentConfig.from_dict(d)


@pytest.fixture(scope="module")
def report():
    return run_experiment(small_config(), fixed_clock=True)


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"data": {"cohort": COHORT}, "protected": ["g"], "colour": 1})

    def test_bad_values(self):
        for bad in ({"k_outer": 1}, {"alpha": 2}, {"model": "svm"}, {"metric": "f1"}):
            with pytest.raises(ConfigError):
                small_config(**bad)

    def test_yaml_and_relative_paths(self, tmp_path):
        (tmp_path / "c.yaml").write_text(yaml.safe_dump(
            {"data": {"csv": "d.csv", "schema": "s.yaml"}, "protected": "sex"}))
        cfg = load_config(tmp_path / "c.yaml")
        assert cfg.protected == ["sex"]
        assert cfg.resolve("d.csv") == tmp_path / "d.csv"


class TestExperiment:
    def test_base_only(self):
        rep = run_experiment(small_config(mitigations=()), fixed_clock=True)
        assert list(rep.attributes["group"]["cells"]) == ["base"]
        assert rep.attributes["group"]["best_method"] is None

    def test_all_cells_ok(self, report):
        cells = report.attributes["group"]["cells"]
        assert sorted(cells) == ["CPP", "DIR", "PSTA", "RW", "SUP", "base"]
        assert not report.failed_cells()

    def test_fold_accounting(self, report):
        # every row is tested exactly once, and per-fold counts add up to the pooled ones
        data = report.to_dict()
        assert sum(f["n_test"] for f in data["folds"]) == data["n"]
        for cell in data["attributes"]["group"]["cells"].values():
            total = pooled_counts(cell)
            assert total.tp + total.fp + total.tn + total.fn == data["n"]
            for g, stats in cell["group_report"]["groups"].items():
                summed = {k: sum(f["group_counts"][g][k] for f in cell["folds"]) for k in stats["counts"]}
                for k, v in summed.items():
                    assert abs(v - stats["counts"][k]) <= 1e-9
            tpr = {g: s["tpr"] for g, s in cell["group_report"]["groups"].items()}
            priv = data["attributes"]["group"]["privileged"]
            unpriv = data["attributes"]["group"]["unprivileged"]
            assert abs(cell["fairness"]["eod"] - (tpr[unpriv] - tpr[priv])) <= 1e-9

    def test_deterministic_json(self, report):
        again = run_experiment(small_config(), fixed_clock=True)
        assert dumps_report(round_sig(report.to_dict())) == dumps_report(round_sig(again.to_dict()))

    def test_fit_fold_ignores_test_labels(self):
        cfg = small_config()
        cohort = cfg.load_cohort()
        train = np.arange(0, cohort.n, 2)
        test = np.arange(1, cohort.n, 2)
        y = cohort.outcome.copy()
        y[test] = 1 - y[test]
        flipped = cohort.with_outcome(y)
        a = fit_fold(cohort, train, 0, cfg, cfg.mitigation_specs())
        b = fit_fold(flipped, train, 0, cfg, cfg.mitigation_specs())
        for key in a:
            assert json.dumps(a[key].artifacts(), sort_keys=True) == json.dumps(b[key].artifacts(), sort_keys=True)

    def test_best_method_rule(self):
        cells = {"base": {"status": "ok", "bacc": {"pooled": 0.80}},
                 "X": {"status": "ok", "bacc": {"pooled": 0.70}, "fairness": {"eod": 0.0}},
                 "Y": {"status": "ok", "bacc": {"pooled": 0.79}, "fairness": {"eod": -0.05}},
                 "Z": {"status": "failed"}}
        assert best_method(cells) == "Y"

    def test_mean_ci(self):
        out = mean_ci([1.0, 2.0, 3.0])
        assert out["mean"] == 2.0
        assert out["ci"][1] - 2.0 == pytest.approx(4.302652729911275 / np.sqrt(3))


class TestFigures:
    def test_forest_interval_count(self):
        svg = forest_svg("sex", ["F", "M"], [("base", {"F": (0.6, 0.05), "M": (0.8, 0.05)}),
                                            ("PSTA", {"F": (0.75, 0.05), "M": (0.8, 0.05)})], ["PSTA"])
        assert len(re.findall(r'class="interval"', svg)) == 4

    def test_scatter_band(self):
        svg = scatter_svg("sex", [("base", -0.2, 0.7), ("RW", 0.01, 0.69)], ["RW"], 0.1)
        assert 'class="fair-band" data-eod-low="-0.1" data-eod-high="0.1"' in svg
        assert svg.count('class="marker"') == 2

    def test_render_and_determinism(self, report, tmp_path):
        data = round_sig(report.to_dict())
        a = render_figures(data, tmp_path / "a")
        b = render_figures(data, tmp_path / "b")
        assert [p.name for p in a] == [p.name for p in b]
        assert len(a) == 6   # 5 forest plots + 1 scatter
        for x, y in zip(a, b):
            assert x.read_bytes() == y.read_bytes()

    def test_incomplete(self, tmp_path):
        with pytest.raises(IncompleteReport):
            render_figures({"config": {"band": 0.1}, "attributes": {}}, tmp_path)


class TestCli:
    def _write_config(self, tmp_path, **kw):
        d = {"data": {"cohort": {**COHORT, "n": 600}}, "protected": ["group"], "k_outer": 2,
             "k_inner": 2, "mitigations": ["PSTA"], "grid": [{"l2_strength": 0.01}]}
        d.update(kw)
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(d))
        return path

    def test_mitigate_and_report(self, tmp_path):
        cfg = self._write_config(tmp_path)
        assert main(["mitigate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--fixed-clock",
                     "--format", "both"]) == 0
        assert (tmp_path / "o" / "report.json").exists()
        assert (tmp_path / "o" / "summary.csv").exists()
        before = (tmp_path / "o" / "figures" / "scatter_group.svg").read_bytes()
        assert main(["report", "--config", str(tmp_path / "o" / "report.json"),
                     "--out", str(tmp_path / "r")]) == 0
        assert (tmp_path / "r" / "figures" / "scatter_group.svg").read_bytes() == before

    def test_audit_has_base_only(self, tmp_path):
        cfg = self._write_config(tmp_path)
        assert main(["audit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        data = json.loads((tmp_path / "o" / "report.json").read_text())
        assert list(data["attributes"]["group"]["cells"]) == ["base"]

    def test_synth(self, tmp_path):
        (tmp_path / "s.yaml").write_text(yaml.safe_dump({**COHORT, "n": 200}))
        assert main(["synth", "--config", str(tmp_path / "s.yaml"), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "cohort.csv").read_text().startswith("x1,x2,x3,proxy,group,outcome")

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_data_error(self, tmp_path):
        cfg = self._write_config(tmp_path, protected=["nope"])
        assert main(["audit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert main(["audit", "--config", str(tmp_path / "missing.yaml")]) == 2

    def test_failed_cell_exit(self, tmp_path):
        # group B has no positives: its cells fail but the report is still written
        cohort = {**COHORT, "n": 600, "groups": [{"label": "A", "proportion": 0.97, "prevalence": 0.2},
                                                 {"label": "B", "proportion": 0.03, "prevalence": 0.01}]}
        cfg = self._write_config(tmp_path, data={"cohort": cohort}, mitigations=["RW"])
        assert main(["mitigate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
        data = json.loads((tmp_path / "o" / "report.json").read_text())
        assert data["attributes"]["group"]["cells"]["base"]["status"] == "failed"
