import json
import math

import pytest

from patdisc.cli import main
from patdisc.model import FeatureConfig, ScoringModel


def run(*argv):
    return main([str(a) for a in argv])


def read(path):
    return json.loads(path.read_text())


@pytest.fixture
def clusters(tmp_path):
    path = tmp_path / "data.json"
    assert run("synth", "--patterns", 2, "--size-dist", "fixed:3", "--seed", 1, "-o", path) == 0
    return path


@pytest.fixture
def perfect_model(tmp_path):
    # high minimum-similarity threshold separates tight clusters from cross-cluster sets
    path = tmp_path / "perfect.json"
    model = ScoringModel((0.0, 400.0, 0.0, 0.0), -150.0, FeatureConfig(), theta=0.5, alpha=0.5)
    path.write_text(json.dumps(model.to_dict()))
    return path


@pytest.fixture
def singletons(tmp_path):
    path = tmp_path / "two.json"
    path.write_text(json.dumps({
        "observations": [{"id": "a", "features": [0.0]}, {"id": "b", "features": [1.0]}],
        "patterns": [["a"], ["b"]],
    }))
    return path


class TestSynth:
    def test_counts(self, tmp_path):
        out = tmp_path / "d.json"
        assert run("synth", "--kind", "feature-clusters", "--patterns", 5, "--size-dist", "fixed:3", "-o", out) == 0
        d = read(out)
        assert len(d["patterns"]) == 5 and len(d["observations"]) == 15
        assert d["provenance"]["command"] == "synth"

    def test_blocks(self, tmp_path):
        out = tmp_path / "blocks"
        assert run("synth", "--patterns", 2, "--blocks", 3, "-o", out) == 0
        assert len(list(out.glob("*.json"))) == 3

    def test_bad_lambda(self, tmp_path, capsys):
        assert run("synth", "--size-dist", "geometric:2,1,1.5", "-o", tmp_path / "x.json") == 2
        assert "0 < lambda < 1" in capsys.readouterr().err

    def test_generation_failure(self, tmp_path, monkeypatch):
        import patdisc.synth

        def fail(*args, **kwargs):
            raise patdisc.synth.GenerationError("no room")

        monkeypatch.setattr(patdisc.synth, "_place_centers", fail)
        assert run("synth", "--patterns", 3, "-o", tmp_path / "x.json") == 3

    def test_line_shapes(self, tmp_path):
        out = tmp_path / "lines.json"
        assert run("synth", "--kind", "line-shapes", "--patterns", 2, "--shapes", "square,star", "--noise", 3,
                   "--spread", 1.0, "--distance", 5.0, "-o", out) == 0
        assert sorted(map(len, read(out)["patterns"])) == [1, 1, 1, 4, 5]

    def test_csv(self, tmp_path):
        out = tmp_path / "d.csv"
        assert run("synth", "--patterns", 2, "--format", "csv-summary", "-o", out) == 0
        assert out.read_text().startswith("key,value\n")


class TestTrain:
    def test_risk_printed(self, tmp_path, capsys):
        data = tmp_path / "sep.json"
        assert run("synth", "--patterns", 10, "--size-dist", "fixed:3", "--noise", 5, "--seed", 2, "-o", data) == 0
        out = tmp_path / "m.json"
        assert run("train", "--data", data, "--alpha", 0.5, "-o", out) == 0
        printed = capsys.readouterr().out
        risk = float(printed.strip().split("=")[1])
        assert risk <= 0.05
        assert read(out)["empirical_risk"] == risk
        assert 0.0 <= read(out)["theta"] <= 1.0

    @pytest.mark.parametrize("alpha", [0, 1])
    def test_alpha_bounds(self, clusters, alpha):
        assert run("train", "--data", clusters, "--alpha", alpha) == 2

    def test_cap_exceeded(self, clusters, capsys):
        assert run("train", "--data", clusters, "--cap", 3) == 4
        assert "3" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("train", "--data", tmp_path / "nope.json") == 2


class TestGrow:
    def test_seed_inside_pattern(self, clusters, perfect_model, tmp_path):
        truth = read(clusters)["patterns"]
        out = tmp_path / "t.json"
        assert run("grow", "--data", clusters, "--model", perfect_model, "--seed-ids", truth[1][0], "-o", out) == 0
        trace = read(out)
        assert trace["final"] == sorted(truth[1])
        assert trace["stop_reason"] in ("threshold", "exhausted")

    def test_all(self, clusters, perfect_model, tmp_path):
        out = tmp_path / "t.json"
        assert run("grow", "--data", clusters, "--model", perfect_model, "--all", "-o", out) == 0
        found = sorted(t["final"] for t in read(out)["traces"])
        assert found == sorted(sorted(P) for P in read(clusters)["patterns"])

    def test_unknown_seed(self, clusters, perfect_model):
        assert run("grow", "--data", clusters, "--model", perfect_model, "--seed-ids", "zz") == 2

    def test_theta_override(self, clusters, perfect_model, tmp_path):
        out = tmp_path / "t.json"
        first = read(clusters)["patterns"][0][0]
        assert run("grow", "--data", clusters, "--model", perfect_model, "--seed-ids", first,
                   "--theta-override", 1.0, "-o", out) == 0
        assert read(out)["steps"] == []


class TestEval:
    def write(self, tmp_path, name, obj):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return path

    def truth(self, tmp_path):
        obs = [{"id": i, "features": [0.0]} for i in "abc"]
        return self.write(tmp_path, "truth.json", {"observations": obs, "patterns": [["a", "b"], ["c"]]})

    def test_perfect(self, tmp_path):
        pred = self.write(tmp_path, "p.json", {"patterns": [["a", "b"], ["c"]]})
        out = tmp_path / "m.json"
        assert run("eval", "--predicted", pred, "--truth", self.truth(tmp_path), "-o", out) == 0
        m = read(out)
        assert m["exact_match_rate"] == m["pairwise_precision"] == m["pairwise_recall"] == 1.0

    def test_empty(self, tmp_path):
        pred = self.write(tmp_path, "p.json", {"traces": []})
        out = tmp_path / "m.json"
        assert run("eval", "--predicted", pred, "--truth", self.truth(tmp_path), "-o", out) == 0
        assert read(out)["pairwise_recall"] == 0.0

    def test_merged(self, tmp_path):
        pred = self.write(tmp_path, "p.json", {"traces": [{"final": ["a", "b", "c"]}]})
        out = tmp_path / "m.json"
        assert run("eval", "--predicted", pred, "--truth", self.truth(tmp_path), "-o", out) == 0
        m = read(out)
        assert m["pairwise_precision"] == pytest.approx(1 / 3) and m["pairwise_recall"] == 1.0

    def test_mismatch(self, tmp_path):
        pred = self.write(tmp_path, "p.json", {"patterns": [["a", "q"]]})
        assert run("eval", "--predicted", pred, "--truth", self.truth(tmp_path)) == 2


class TestComplexity:
    def test_zero_only(self, clusters, tmp_path):
        out = tmp_path / "c.json"
        assert run("complexity", "--data", clusters, "-o", out) == 0
        assert read(out)["class"]["shifted"] == 0.0

    def test_constant_model(self, singletons, tmp_path):
        # alpha = 0.25 and a constant score k give shifted losses 0.5 k = 0.4 on both patterns
        model = tmp_path / "m.json"
        model.write_text(json.dumps(ScoringModel((0, 0, 0, 0), math.log(0.8 / 0.2)).to_dict()))
        out = tmp_path / "c.json"
        assert run("complexity", "--data", singletons, "--model", model, "--alpha", 0.25, "-o", out) == 0
        rep = read(out)
        assert rep["exhaustive"] and rep["draws"] == 4
        row = rep["single"][0]
        assert row["shifted_abs"] == pytest.approx(0.2, abs=1e-12)
        assert row["shifted_signed"] == pytest.approx(0.0, abs=1e-15)
        assert set(row) == {"model", "shifted_signed", "shifted_abs", "unshifted_signed", "unshifted_abs"}

    def test_two_pattern_enumeration(self, tmp_path):
        from patdisc import loss as L
        from patdisc.cli import load_dataset

        data = tmp_path / "d.json"
        data.write_text(json.dumps({
            "observations": [{"id": i, "features": [float(k)]} for k, i in enumerate("abc")],
            "patterns": [["a", "b"], ["c"]],
        }))
        m = ScoringModel((0.0, 0.0, 0.0, 2.0), -1.0)
        Q = load_dataset(data)
        cfg = L.IndividualLossConfig(0.25)
        c = [L.shifted_individual_loss(m.scorer(Q.observations), P, Q.X, cfg) for P in Q.patterns]
        model = tmp_path / "m.json"
        model.write_text(json.dumps(m.to_dict()))
        out = tmp_path / "c.json"
        assert run("complexity", "--data", data, "--model", model, "--alpha", 0.25, "-o", out) == 0
        got = read(out)["single"][0]["shifted_abs"]
        assert got == pytest.approx((abs(c[0] + c[1]) + abs(c[0] - c[1])) / 4, abs=1e-15)


class TestBound:
    def test_lem52(self, tmp_path):
        out = tmp_path / "b.json"
        assert run("bound", "--formula", "lem5.2", "--b0", 2, "--c", 1, "--lambda", 0.5, "-o", out) == 0
        assert read(out)["rhs"] == 3.0

    def test_thm52_violation(self):
        assert run("bound", "--formula", "thm5.2", "--qhat", 0, "--b0", 20, "--c", 1, "--lambda", 0.5,
                   "--alpha", 0.5, "--n", 100, "--delta", 0.1) == 5

    def test_thm51(self, tmp_path):
        out = tmp_path / "b.json"
        assert run("bound", "--formula", "thm5.1", "--qhat", 0, "--b", 3, "--alpha", 0.5, "--n", 100,
                   "--delta", 0.1, "-o", out) == 0
        rep = read(out)
        assert rep["rhs"] == math.sqrt(8 * 16 * math.log(20) / 100)
        assert rep["formula"] == "thm5.1"

    def test_missing_flag(self):
        assert run("bound", "--formula", "thm5.1", "--qhat", 0) == 2

    def test_dudley(self, tmp_path):
        blocks = tmp_path / "blocks"
        assert run("synth", "--patterns", 2, "--size-dist", "uniform:2", "--blocks", 4, "-o", blocks) == 0
        out = tmp_path / "b.json"
        assert run("bound", "--formula", "thm3.2", "--data", blocks, "--delta", 0.1, "--candidates", 3, "-o", out) == 0
        rep = read(out)
        assert rep["formula"] == "thm3.2" and rep["rhs"] >= math.sqrt(8 * math.log(20) / 4)


def test_usage_error():
    assert run("frobnicate") == 2
