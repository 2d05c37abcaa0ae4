import math

import pytest

from sqclick import no_click_from_invariants
from sqclick.cli import main

TRACE0, DET0 = 2.321, 1.156

BASE_CONFIG = """\
rep_rate_hz = 780400
duration_s = 100
transmittances = 1, 0.75, 0.5, 0.25
eta_apd = 0.5
dark_rate_hz = 0
"""

SWEEP_CONFIG = """\
rep_rate_hz = 780400
duration_s = 0.02
transmittances = 1, 0.5
eta_apd = 0.5
t_uncertainty = 0.005
eta_rel_uncertainty = 0.01
state_trace = 2.321
state_det = 1.156
etas = 0.3, 0.6
states = 2.321,1.156; 2.5,1.2
"""


def record_dict(text):
    out = {}
    for line in text.splitlines():
        if " = " in line:
            key, value = line.split(" = ", 1)
            out[key] = value
    return out


def strip_created(text):
    return "\n".join(l for l in text.splitlines() if not l.startswith("# created"))


@pytest.fixture
def base_config(tmp_path):
    path = tmp_path / "base.cfg"
    path.write_text(BASE_CONFIG)
    return str(path)


class TestInvert:
    def test_roundtrip(self, capsys):
        p1 = no_click_from_invariants(TRACE0, DET0, 0.5)
        p2 = no_click_from_invariants(TRACE0, DET0, 0.25)
        code = main(
            ["invert", "--t1", "0.5", "--p1", repr(p1), "--t2", "0.25", "--p2", repr(p2)]
        )
        assert code == 0
        rec = record_dict(capsys.readouterr().out)
        assert float(rec["trace"]) == pytest.approx(TRACE0, abs=1e-9)
        assert float(rec["det"]) == pytest.approx(DET0, abs=1e-9)
        assert rec["physical"] == "true"

    def test_vacuum(self, capsys):
        code = main(["invert", "--t1", "0.8", "--p1", "1", "--t2", "0.3", "--p2", "1"])
        assert code == 0
        rec = record_dict(capsys.readouterr().out)
        assert float(rec["trace"]) == pytest.approx(2.0, abs=1e-12)
        assert float(rec["det"]) == pytest.approx(1.0, abs=1e-12)
        assert float(rec["purity"]) == pytest.approx(1.0, abs=1e-12)

    def test_unphysical_result_warns(self, capsys):
        # a small bump on p1 at percent-scale transmittances drives the
        # raw determinant below 1
        t1, t2 = 0.008, 0.004
        p1 = no_click_from_invariants(TRACE0, DET0, t1) + 2e-6
        p2 = no_click_from_invariants(TRACE0, DET0, t2)
        code = main(
            ["invert", "--t1", repr(t1), "--p1", repr(p1), "--t2", repr(t2), "--p2", repr(p2)]
        )
        assert code == 0
        out = capsys.readouterr().out
        rec = record_dict(out)
        assert rec["physical"] == "false"
        assert float(rec["det"]) < 1.0
        assert "warning" in out

    def test_eta_folds_into_transmittances(self, capsys):
        p1 = no_click_from_invariants(TRACE0, DET0, 0.5 * 0.5)
        p2 = no_click_from_invariants(TRACE0, DET0, 0.5 * 0.25)
        code = main(
            [
                "invert",
                "--t1", "0.5", "--p1", repr(p1),
                "--t2", "0.25", "--p2", repr(p2),
                "--eta", "0.5",
            ]
        )
        assert code == 0
        rec = record_dict(capsys.readouterr().out)
        assert float(rec["trace"]) == pytest.approx(TRACE0, abs=1e-9)

    def test_degenerate_exit_code(self, capsys):
        code = main(
            ["invert", "--t1", "0.5", "--p1", "0.9", "--t2", "0.5", "--p2", "0.9"]
        )
        assert code == 4

    def test_domain_exit_code(self, capsys):
        code = main(
            ["invert", "--t1", "1.2", "--p1", "0.9", "--t2", "0.5", "--p2", "0.9"]
        )
        assert code == 3


class TestSimulate:
    def test_reference_defaults_to_file(self, base_config, tmp_path):
        out = tmp_path / "clicks.csv"
        code = main(
            [
                "simulate",
                "--config", base_config,
                "--trace", "2.321", "--det", "1.156",
                "--seed", "7",
                "--output", str(out),
            ]
        )
        assert code == 0
        text = out.read_text()
        assert "# sqclick manifest" in text
        assert "# state_g = " in text  # both state forms echoed
        assert len([l for l in text.splitlines() if not l.startswith(("#", "t_nominal"))]) == 4

    def test_vacuum_gives_zero_clicks(self, base_config, capsys):
        code = main(
            ["simulate", "--config", base_config, "--trace", "2", "--det", "1", "--seed", "1"]
        )
        assert code == 0
        rows = [
            l for l in capsys.readouterr().out.splitlines()
            if not l.startswith(("#", "t_nominal"))
        ]
        assert all(int(r.split(",")[2]) == 0 for r in rows)

    def test_same_seed_identical_output(self, base_config, tmp_path):
        path = tmp_path / "a.csv"
        argv = [
            "simulate",
            "--config", base_config,
            "--g", "1.7", "--h", "1.08",
            "--seed", "11",
            "--output", str(path),
        ]
        assert main(argv) == 0
        first = strip_created(path.read_text())
        assert main(argv) == 0
        assert strip_created(path.read_text()) == first

    def test_state_forms_are_equivalent(self, base_config, tmp_path):
        path = tmp_path / "a.csv"
        assert main(
            ["simulate", "--config", base_config, "--g", "2", "--h", "1",
             "--seed", "3", "--output", str(path)]
        ) == 0
        first = strip_created(path.read_text())
        assert main(
            ["simulate", "--config", base_config, "--trace", "2.5", "--det", "1",
             "--seed", "3", "--output", str(path)]
        ) == 0
        assert strip_created(path.read_text()) == first

    def test_unphysical_state_exit_code(self, base_config):
        assert main(
            ["simulate", "--config", base_config, "--trace", "2", "--det", "1.5", "--seed", "1"]
        ) == 3

    def test_missing_config_exit_code(self):
        assert main(
            ["simulate", "--config", "/nonexistent.cfg", "--trace", "2.5", "--det", "1",
             "--seed", "1"]
        ) == 2


class TestEstimate:
    def _simulate(self, base_config, tmp_path, seed=5):
        out = tmp_path / "clicks.csv"
        assert main(
            [
                "simulate",
                "--config", base_config,
                "--trace", "2.321", "--det", "1.156",
                "--seed", str(seed),
                "--output", str(out),
            ]
        ) == 0
        return out

    def test_end_to_end_recovery(self, base_config, tmp_path, capsys):
        data = self._simulate(base_config, tmp_path)
        code = main(["estimate", "--data", str(data), "--eta", "0.5"])
        assert code == 0
        rec = record_dict(capsys.readouterr().out)
        assert float(rec["trace"]) == pytest.approx(TRACE0, abs=0.02)
        assert float(rec["det"]) == pytest.approx(DET0, abs=0.05)
        assert rec["det_reliable"] == "true"

    def test_low_eta_reports_unreliable_det_with_bounds(self, tmp_path, capsys):
        cfg = tmp_path / "lowsig.cfg"
        cfg.write_text(BASE_CONFIG.replace("eta_apd = 0.5", "eta_apd = 0.0084"))
        data = tmp_path / "clicks.csv"
        assert main(
            ["simulate", "--config", str(cfg), "--trace", "2.321", "--det", "1.156",
             "--seed", "2", "--output", str(data)]
        ) == 0
        code = main(["estimate", "--data", str(data), "--eta", "0.0084"])
        assert code == 0
        rec = record_dict(capsys.readouterr().out)
        assert rec["det_reliable"] == "false"
        assert "g_max_bound" in rec and "h_max_bound" in rec
        assert float(rec["trace"]) == pytest.approx(TRACE0, abs=0.05)

    def test_all_zero_clicks_gives_vacuum(self, tmp_path, capsys):
        data = tmp_path / "zeros.csv"
        data.write_text(
            "t_nominal,trials,clicks,dark_subtracted\n1,1000,0,0\n0.5,1000,0,0\n"
        )
        code = main(["estimate", "--data", str(data), "--eta", "0.5"])
        assert code == 0
        rec = record_dict(capsys.readouterr().out)
        assert float(rec["trace"]) == 2.0
        assert float(rec["det"]) == 1.0

    def test_roundtrip_file_format(self, base_config, tmp_path):
        # estimate consumes exactly what simulate emits, file to file
        data = self._simulate(base_config, tmp_path)
        out = tmp_path / "estimate.txt"
        assert main(
            ["estimate", "--data", str(data), "--eta", "0.5", "--output", str(out)]
        ) == 0
        assert "# sqclick manifest" in out.read_text()

    def test_missing_data_exit_code(self):
        assert main(["estimate", "--data", "/nonexistent.csv", "--eta", "0.5"]) == 2


class TestSweep:
    @pytest.fixture
    def sweep_config(self, tmp_path):
        path = tmp_path / "sweep.cfg"
        path.write_text(SWEEP_CONFIG)
        return str(path)

    def test_eta_mode(self, sweep_config, capsys):
        code = main(
            ["sweep", "--config", sweep_config, "--mode", "eta", "--seed", "1",
             "--runs", "2"]
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("trace_true,")
        assert len(lines) == 3
        for line in lines[1:]:
            assert all(math.isfinite(float(tok)) for tok in line.split(","))

    def test_state_mode_with_details(self, sweep_config, tmp_path):
        out = tmp_path / "sweep.csv"
        details = tmp_path / "runs.csv"
        code = main(
            ["sweep", "--config", sweep_config, "--mode", "state", "--seed", "1",
             "--runs", "2", "--output", str(out), "--details", str(details)]
        )
        assert code == 0
        assert len(out.read_text().splitlines()) >= 4  # manifest + header + 2 states
        rows = [
            l for l in details.read_text().splitlines()
            if not l.startswith(("#", "trace_true"))
        ]
        assert len(rows) == 4  # 2 states x 2 runs

    def test_determinism(self, sweep_config, tmp_path):
        path = tmp_path / "a.csv"
        argv = ["sweep", "--config", sweep_config, "--mode", "eta", "--seed", "9",
                "--runs", "2", "--output", str(path)]
        assert main(argv) == 0
        first = strip_created(path.read_text())
        assert main(argv) == 0
        assert strip_created(path.read_text()) == first

    def test_exact_knowledge_flag_changes_results(self, sweep_config, capsys):
        main(["sweep", "--config", sweep_config, "--mode", "eta", "--seed", "1",
              "--runs", "2", "--exact-knowledge"])
        exact = capsys.readouterr().out
        main(["sweep", "--config", sweep_config, "--mode", "eta", "--seed", "1",
              "--runs", "2"])
        noisy = capsys.readouterr().out
        assert exact != noisy

    def test_config_missing_sweep_keys(self, tmp_path):
        path = tmp_path / "bare.cfg"
        path.write_text(BASE_CONFIG)
        assert main(
            ["sweep", "--config", str(path), "--mode", "eta", "--seed", "1", "--runs", "2"]
        ) == 2


class TestModefit:
    def _write_samples(self, tmp_path, two_mode=False):
        ts = [0.05 + 0.07 * k for k in range(12)]
        lines = []
        for t in ts:
            p = no_click_from_invariants(TRACE0, DET0, t)
            if two_mode:
                p *= no_click_from_invariants(2.8, 1.4, t)
            lines.append(f"{t!r},{p!r}")
        path = tmp_path / ("two.csv" if two_mode else "one.csv")
        path.write_text("\n".join(lines) + "\n")
        return str(path)

    def test_single_mode(self, tmp_path, capsys):
        code = main(["modefit", "--data", self._write_samples(tmp_path), "--max-modes", "3"])
        assert code == 0
        rec = record_dict(capsys.readouterr().out)
        assert rec["n_modes"] == "1"
        assert float(rec["degree_2_rss"]) < 1e-15

    def test_two_mode(self, tmp_path, capsys):
        code = main(
            ["modefit", "--data", self._write_samples(tmp_path, two_mode=True),
             "--max-modes", "3"]
        )
        assert code == 0
        rec = record_dict(capsys.readouterr().out)
        assert rec["n_modes"] == "2"
        assert float(rec["degree_4_rss"]) < 1e-15

    def test_vacuum_reports_no_signal(self, tmp_path, capsys):
        path = tmp_path / "vac.csv"
        path.write_text("\n".join(f"0.{k + 1},1.0" for k in range(9)) + "\n")
        code = main(["modefit", "--data", str(path), "--max-modes", "3"])
        assert code == 0
        out = capsys.readouterr().out
        assert "n_modes = 0" in out
        assert "signal = none" in out

    def test_underdetermined_exit_code(self, tmp_path, capsys):
        path = tmp_path / "few.csv"
        path.write_text("0.1,0.99\n0.2,0.97\n0.3,0.95\n")
        assert main(["modefit", "--data", str(path), "--max-modes", "3"]) == 4
