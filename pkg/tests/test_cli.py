import json

import pytest

from qswaptrace.cli import main
from qswaptrace.cswap import exact_distribution, sample
from qswaptrace.estimate import traces_from_counts, traces_from_distribution
from qswaptrace.qstate import builtin_state, make_w, save_state


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def usage_error(capsys, *argv):
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    assert exc.value.code == 2
    return capsys.readouterr().err


class TestSubcommands:
    def test_plan_shots(self, capsys):
        assert run_json(capsys, "plan-shots", "--epsilon", "0.01", "--delta", "0.05", "--copies", "4")["M"] == 95750

    def test_word_trace(self, capsys):
        out = run_json(capsys, "word-trace", "--word", "1,3", "--copies", "4", "--state", "maxmix2")
        assert out["cycle_type"] == [2, 2]
        assert out["value"] == pytest.approx(0.25)

    def test_word_trace_without_state(self, capsys):
        out = run_json(capsys, "word-trace", "--word", "2,4,5,2,1", "--copies", "6")
        assert out["expression"] == "tr(ρ²)·tr(ρ³)"
        assert "value" not in out

    def test_exact_dist(self, capsys):
        out = run_json(capsys, "exact-dist", "--state", "ghz3", "--copies", "3", "--target", "1")
        assert out["n_controls"] == 2
        assert out["probabilities"]["00"] == pytest.approx(0.5625)
        assert out["probabilities"]["11"] == pytest.approx(0.0625)

    @pytest.mark.parametrize("method", ["moments", "dense", "statevector"])
    def test_exact_dist_methods(self, capsys, method):
        out = run_json(capsys, "exact-dist", "--state", "w3", "--copies", "3", "--method", method)
        assert out["probabilities"]["01"] == pytest.approx(1 / 6)

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "exact-dist", "--state", "ghz3", "--copies", "3", "--format", "csv")
        assert code == 0
        assert out.splitlines()[0] == "z,p"
        assert len(out.splitlines()) == 5

    def test_state_file(self, capsys, tmp_path):
        path = tmp_path / "w.json"
        save_state(make_w(3), path)
        out = run_json(capsys, "exact-dist", "--state-file", str(path), "--copies", "2")
        assert out["probabilities"]["0"] == pytest.approx((1 + 5 / 9) / 2)

    def test_state_moments(self, capsys):
        out = run_json(capsys, "state", "--state", "ghz3", "--moments", "4")
        assert out["moments"] == pytest.approx([1, 0.5, 0.25, 0.125])

    def test_target_all(self, capsys):
        out = run_json(capsys, "state", "--state", "ghz3", "--target", "all", "--moments", "3")
        assert out["moments"] == pytest.approx([1, 1, 1])

    def test_sample_is_seeded(self, capsys):
        args = ("sample", "--state", "ghz3", "--copies", "4", "--shots", "1000", "--seed", "5")
        a = run_json(capsys, *args)
        b = run_json(capsys, *args)
        assert a == b and a["total"] == 1000

    def test_newton_girard(self, capsys, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"moments": [1.0, 5 / 9]}))
        out = run_json(capsys, "newton-girard", "--moments", str(path), "--rank", "2", "--extend", "2")
        assert out["coefficients"] == pytest.approx([1, 2 / 9])
        assert out["moments"][3] == pytest.approx(17 / 81)

    @pytest.mark.parametrize(
        "kind, extra, value",
        [
            ("concurrence", ["--state", "ghz3"], 1.0),
            ("icem", ["--state", "ghz3", "--R", "1"], 0.25),
            ("tsallis", ["--state", "w3", "--q", "2"], 4 / 9),
            ("qconcurrence", ["--state", "ghz3", "--q", "4"], 0.875),
        ],
    )
    def test_measure(self, capsys, kind, extra, value):
        out = run_json(capsys, "measure", "--kind", kind, "--cut", "1", *extra)
        assert out["value"] == pytest.approx(value, abs=1e-9)
        assert out["probability_form"] == pytest.approx(out["value"], abs=1e-10)

    def test_nonlinear(self, capsys):
        out = run_json(capsys, "nonlinear", "--kind", "exp-trace", "--trunc", "12", "--state", "maxmix2", "--target", "all")
        assert out["value"] == pytest.approx(3.2974425414, abs=1e-8)

    def test_nonlinear_guard(self, capsys):
        code, _, err = run(capsys, "nonlinear", "--kind", "entropy", "--trunc", "10", "--state", "w3", "--target", "all")
        assert code == 1 and "eigenvalue" in err

    def test_nonlinear_from_moments(self, capsys, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"moments": [1.0, 0.5, 0.25], "source_dim": 2}))
        out = run_json(capsys, "nonlinear", "--kind", "gibbs-cost", "--trunc", "2", "--moments", str(path))
        assert out["value"] == pytest.approx(0.5 + 0.125)

    def test_experiments(self, capsys, tmp_path):
        path = tmp_path / "r.json"
        code, out, _ = run(capsys, "experiment", "mse", "--state", "ghz3", "--copies", "3", "--seed", "42", "--out", str(path))
        assert code == 0 and out == ""
        assert json.loads(path.read_text())["copies"] == 3
        code, out, _ = run(capsys, "experiment", "hoeffding", "--state", "w3", "--copies", "3", "--epsilon", "0.1",
                           "--reps", "3", "--csv")
        assert code == 0 and out.startswith("repetition,err_k2,err_k3")


class TestRoundTrip:
    def test_distribution_file(self, capsys, tmp_path):
        path = tmp_path / "d.json"
        run(capsys, "exact-dist", "--state", "w3", "--copies", "5", "--out", str(path))
        out = run_json(capsys, "estimate", "--counts", str(path), "--k", "2..5")
        direct = traces_from_distribution(exact_distribution(builtin_state("w3"), 5)).values()
        for k, v in direct.items():
            assert out["per_k"][str(k)]["estimate"] == pytest.approx(v, abs=1e-12)

    def test_counts_file(self, capsys, tmp_path):
        path = tmp_path / "c.json"
        run(capsys, "sample", "--state", "ghz3", "--copies", "4", "--shots", "5000", "--seed", "1", "--out", str(path))
        out = run_json(capsys, "estimate", "--counts", str(path))
        counts = sample(exact_distribution(builtin_state("ghz3"), 4), 5000, seed=1)
        direct = traces_from_counts(counts)
        for k, e in direct.per_k.items():
            assert out["per_k"][str(k)]["estimate"] == pytest.approx(e.estimate, abs=1e-12)
            assert out["per_k"][str(k)]["variance"] == pytest.approx(e.variance, abs=1e-12)


class TestErrors:
    def test_unknown_subcommand(self, capsys):
        usage_error(capsys, "bogus")

    def test_unknown_flag(self, capsys):
        usage_error(capsys, "plan-shots", "--epsilon", "0.1", "--delta", "0.1", "--copies", "3", "--nope")

    def test_missing_state(self, capsys):
        assert "state" in usage_error(capsys, "exact-dist", "--copies", "3")

    def test_conflicting_sources(self, capsys):
        usage_error(capsys, "exact-dist", "--state", "ghz3", "--state-file", "x.json", "--copies", "3")

    def test_missing_q(self, capsys):
        usage_error(capsys, "measure", "--kind", "tsallis", "--state", "w3")

    def test_csv_unsupported(self, capsys):
        usage_error(capsys, "plan-shots", "--epsilon", "0.1", "--delta", "0.1", "--copies", "3", "--format", "csv")

    def test_missing_file(self, capsys, tmp_path):
        missing = tmp_path / "nope.json"
        code, _, err = run(capsys, "estimate", "--counts", str(missing))
        assert code == 1 and str(missing) in err

    def test_bad_json(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        code, _, err = run(capsys, "estimate", "--counts", str(path))
        assert code == 1 and str(path) in err

    def test_computation_error(self, capsys):
        code, _, err = run(capsys, "plan-shots", "--epsilon", "-1", "--delta", "0.1", "--copies", "3")
        assert code == 1 and "epsilon" in err

    def test_threads_env(self, capsys, monkeypatch):
        monkeypatch.setenv("QSWAPTRACE_THREADS", "0")
        assert run(capsys, "plan-shots", "--epsilon", "0.1", "--delta", "0.1", "--copies", "3")[0] == 0
        monkeypatch.setenv("QSWAPTRACE_THREADS", "many")
        usage_error(capsys, "plan-shots", "--epsilon", "0.1", "--delta", "0.1", "--copies", "3")
