"""Command-line surface: subcommands, outputs and exit codes"""

import json

import pytest

from layers.model_format import save_model
from layers.network_builder import build_network
from layers.neuron_mode import PNorm
from main import main
from numcore.rng import Rng

CORNERS = ["--set", "dataset=corners", "--set", "corners_d=4", "--set", "corners_n=10",
           "--set", "corners_test_n=5", "--set", "hidden_widths=8", "--set", "epochs=2",
           "--set", "batch_size=8"]


def train_model(tmp_path, *extra):
    out = tmp_path / "model.lnfc"
    code = main(["train", *CORNERS, "--epsilon", "0.1", "--out", str(out), *extra])
    assert code == 0
    return out


def error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return err[0]


class TestUsage:

    def test_print_defaults(self, capsys):
        assert main(["--print-defaults"]) == 0
        out = capsys.readouterr().out
        assert "epochs=10" in out
        assert "ema_decay=0.99" in out

    def test_help_lists_exit_codes(self, capsys):
        with pytest.raises(SystemExit):
            main(["--help"])
        assert "6  Certification refused" in capsys.readouterr().out

    def test_missing_subcommand(self, capsys):
        assert main([]) == 2
        assert error_line(capsys).startswith("error code=2 kind=ConfigError")

    def test_unknown_flag(self, capsys):
        assert main(["train", "--bogus"]) == 2
        error_line(capsys)

    def test_unknown_config_key(self, capsys):
        assert main(["train", "--set", "nonsense=1"]) == 2


class TestTrain:

    def test_writes_model_metrics_and_shadow(self, tmp_path, capsys):
        out = train_model(tmp_path)
        assert out.exists()
        assert (tmp_path / "model.ema.lnfc").exists()
        lines = (tmp_path / "metrics.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert json.loads(lines[-1])["ema"] is True
        captured = capsys.readouterr()
        assert "certified=" in captured.out
        assert captured.err == ""

    def test_seed_flag_wins_over_set(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir()
        b.mkdir()
        first = train_model(a, "--set", "seed=1", "--seed", "5")
        second = train_model(b, "--seed", "5")
        assert first.read_bytes() == second.read_bytes()

    def test_missing_idx_file(self, tmp_path, capsys):
        missing = tmp_path / "train-images.idx"
        code = main(["train", "--set", f"train_images={missing}", "--set", f"train_labels={missing}"])
        assert code == 3
        line = error_line(capsys)
        assert "kind=DataError" in line
        assert str(missing) in line


class TestEvaluate:

    def test_eval_report(self, tmp_path, capsys):
        model = train_model(tmp_path)
        report = tmp_path / "report.json"
        code = main(["eval", *CORNERS, "--model", str(tmp_path / "model.ema.lnfc"),
                     "--epsilon", "0.3", "--report", str(report), "--set", "attack_steps=5"])
        assert code == 0
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["metadata"]["epsilon"] == 0.3
        assert data["metadata"]["ema"] is True
        assert data["certified"] <= data["robust"] <= data["clean"]
        assert "Certified" in capsys.readouterr().out
        assert model.exists()

    def test_certify_refuses_surrogate_model(self, tmp_path, capsys):
        path = tmp_path / "pnorm.lnfc"
        save_model(build_network(4, 2, [8], Rng(0), mode=PNorm(8)), str(path))
        code = main(["certify", *CORNERS, "--model", str(path), "--report", str(tmp_path / "r.json")])
        assert code == 6
        assert "kind=CertificationRefusedError" in error_line(capsys)

    def test_corrupt_model(self, tmp_path, capsys):
        model = train_model(tmp_path)
        blob = bytearray(model.read_bytes())
        blob[-10] ^= 0xFF
        model.write_bytes(bytes(blob))
        capsys.readouterr()
        assert main(["certify", *CORNERS, "--model", str(model)]) == 5
        assert "kind=ChecksumError" in error_line(capsys)

    def test_ensemble_then_certify(self, tmp_path):
        manifest = tmp_path / "ens.manifest"
        assert main(["ensemble", *CORNERS, "--m", "2", "--out", str(manifest), "--epsilon", "0.1"]) == 0
        assert (tmp_path / "ens.base1.lnfc").exists()
        assert (tmp_path / "base0.metrics.jsonl").exists()
        report = tmp_path / "report.json"
        assert main(["certify", *CORNERS, "--model", str(manifest), "--report", str(report)]) == 0
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["metadata"]["model"] == "fusion-ensemble"
        assert data["robust"] is None


class TestBound:

    def test_invalid_t(self, tmp_path, capsys):
        rho = tmp_path / "rho.json"
        rho.write_text("[[0.5]]", encoding="utf-8")
        assert main(["bound", "--theorem", "3", "--rho", str(rho), "--t", "0"]) == 2
        assert "kind=ParameterError" in error_line(capsys)

    def test_ensemble_bound_from_rho(self, tmp_path):
        rho = tmp_path / "rho.json"
        rho.write_text(json.dumps([[0.3] * 50, [0.6] * 50]), encoding="utf-8")
        report = tmp_path / "bound.json"
        code = main(["bound", "--theorem", "3", "--rho", str(rho), "--r", "0.25", "--t", "0.1",
                     "--report", str(report)])
        assert code == 0
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["bound"] == 0.5
        assert data["threshold"] == pytest.approx(0.1731, abs=1e-4)

    def test_margin_bound_from_file(self, tmp_path):
        margins = tmp_path / "margins.json"
        margins.write_text("[0.2, 0.6]", encoding="utf-8")
        report = tmp_path / "bound.json"
        code = main(["bound", "--theorem", "2", "--margins", str(margins), "--r", "0.1",
                     "--delta-grid", "0.3", "--report", str(report)])
        assert code == 0
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["term1"] == [0.5]
        assert data["chosen_delta"] == 0.3

    def test_bound_from_trained_model(self, tmp_path):
        train_model(tmp_path)
        report = tmp_path / "bound.json"
        code = main(["bound", *CORNERS, "--theorem", "2", "--model", str(tmp_path / "model.ema.lnfc"),
                     "--report", str(report)])
        assert code == 0
        assert json.loads(report.read_text(encoding="utf-8"))["W"] == 8


class TestTools:

    def test_gap(self, tmp_path, capsys):
        report = tmp_path / "gap.json"
        assert main(["gap", *CORNERS, "--report", str(report)]) == 0
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["units"] == "features"
        assert data["gap"] >= 0.5
        assert "gap_raw=" in capsys.readouterr().out

    def test_gradcheck(self, capsys):
        assert main(["gradcheck", "--configs", "6"]) == 0
        assert "pass" in capsys.readouterr().out
