import io
import json
import math
import shutil
import subprocess
import sys
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import pytest

from snslab import (
    expected_post_processing,
    expected_tallies,
    key_rate,
    plob_bound,
    transmittance,
)
from snslab.cli import entry
from snslab.presets import (
    desk_detector,
    desk_link,
    desk_security,
    desk_source,
    reference_security,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = entry(list(argv))
    return code, out.getvalue(), err.getvalue()


def csv_payload(text):
    lines = text.splitlines()
    assert lines[0] == "key,value"
    return dict(line.split(",", 1) for line in lines[1:])


# ------------------------------------------------------------------- plob

def test_plob_loss_flag_matches_library():
    code, out, _ = run_cli("plob", "--loss-db", "106", "--format", "json")
    assert code == 0
    p = json.loads(out)
    eta = transmittance(106.0)
    assert p["transmittance"] == eta
    assert p["bound_bits_per_use"] == plob_bound(eta)


def test_plob_csv_default_and_zero_transmittance():
    code, out, _ = run_cli("plob", "--transmittance", "0")
    assert code == 0
    payload = csv_payload(out)
    assert payload["bound_bits_per_use"] == "0.0"
    assert payload["transmittance"] == "0.0"


def test_plob_flag_misuse_is_a_config_error():
    assert run_cli("plob")[0] == 2
    assert run_cli("plob", "--loss-db", "10", "--transmittance", "0.5")[0] == 2
    assert run_cli("plob", "--loss-db", "-3")[0] == 2
    assert run_cli("plob", "--transmittance", "1.0")[0] == 2


# ---------------------------------------------------------------- keyrate

def test_keyrate_direct_mode_headline_numbers():
    code, out, _ = run_cli(
        "keyrate", "--config", str(CONFIGS / "longhaul_session.ini"),
        "--format", "json",
    )
    assert code == 0
    p = json.loads(out)
    assert p["mode"] == "direct"
    rate = p["rate"]["rate_per_pulse"]
    assert abs(rate - 9.22e-10) / 9.22e-10 < 0.10
    bps = p["rate"]["bits_per_second"]
    assert abs(bps - 0.092) / 0.092 < 0.10
    assert p["rate"]["clamped"] is False
    assert p["rate"]["rate_per_pulse_clamped"] == rate


def test_keyrate_direct_mode_equals_library_call():
    code, out, _ = run_cli(
        "keyrate", "--config", str(CONFIGS / "longhaul_session.ini"),
        "--format", "json",
    )
    assert code == 0
    p = json.loads(out)
    report = key_rate(244731.0, 0.1336, 558729.0, 0.0212, 1.007e13,
                      reference_security())
    assert p["rate"]["rate_per_pulse"] == report.rate_per_pulse
    assert p["rate"]["secret_bits"] == report.secret_bits
    assert p["inputs"]["n_untagged"] == 244731.0


def test_keyrate_model_path_equals_library_chain():
    code, out, _ = run_cli("keyrate")  # desk presets, csv default
    assert code == 0
    payload = csv_payload(out)
    tally = expected_tallies(desk_link(), desk_detector(), desk_source(), 1e10)
    analysis = expected_post_processing(tally, desk_source(), desk_security())
    assert float(payload["rate.rate_per_pulse"]) == analysis.report.rate_per_pulse
    assert payload["mode"] == "expected"
    assert float(payload["decoy.n1_low"]) == analysis.decoy.n1_low


def test_keyrate_negative_rate_is_reported_not_fatal(tmp_path):
    cfg = tmp_path / "weak.ini"
    cfg.write_text(
        "[keyrate]\n"
        "n_untagged = 1000\nphase_error_rate = 0.3\n"
        "n_sifted = 2000\nbit_error_rate = 0.1\nn_pulses = 1e9\n"
    )
    code, out, _ = run_cli("keyrate", "--config", str(cfg), "--format", "json")
    assert code == 0
    p = json.loads(out)
    assert p["rate"]["rate_per_pulse"] < 0.0
    assert p["rate"]["clamped"] is True
    assert p["rate"]["rate_per_pulse_clamped"] == 0.0


def test_keyrate_direct_mode_validates_inputs(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(
        "[keyrate]\n"
        "n_untagged = 3000\nphase_error_rate = 0.1\n"
        "n_sifted = 2000\nbit_error_rate = 0.1\nn_pulses = 1e9\n"
    )
    assert run_cli("keyrate", "--config", str(cfg))[0] == 2


def test_output_file_equals_stdout(tmp_path):
    cfg = str(CONFIGS / "longhaul_session.ini")
    code, out, _ = run_cli("keyrate", "--config", cfg, "--format", "json")
    assert code == 0
    target = tmp_path / "result.json"
    code2, out2, _ = run_cli("keyrate", "--config", cfg, "--format", "json",
                             "--out", str(target))
    assert code2 == 0
    assert out2 == ""
    assert target.read_text() == out


def test_reruns_are_byte_identical():
    a = run_cli("keyrate", "--config", str(CONFIGS / "desk.ini"))
    b = run_cli("keyrate", "--config", str(CONFIGS / "desk.ini"))
    assert a == b


# ------------------------------------------------------------ config errors

def test_config_error_battery(tmp_path):
    missing = tmp_path / "nope.ini"
    assert run_cli("keyrate", "--config", str(missing))[0] == 2

    bogus = tmp_path / "bogus.ini"
    bogus.write_text("[warp]\nfactor = 9\n")
    assert run_cli("keyrate", "--config", str(bogus))[0] == 2

    badkey = tmp_path / "badkey.ini"
    badkey.write_text("[link]\ncolour = blue\n")
    assert run_cli("keyrate", "--config", str(badkey))[0] == 2

    badnum = tmp_path / "badnum.ini"
    badnum.write_text("[link]\nlength_a_km = abc\n")
    assert run_cli("keyrate", "--config", str(badnum))[0] == 2

    negative = tmp_path / "neg.ini"
    negative.write_text("[run]\nn_pulses = -5\n")
    assert run_cli("keyrate", "--config", str(negative))[0] == 2


def test_curve_requires_distances():
    assert run_cli("curve")[0] == 2
    assert run_cli("curve", "--distances", "10,abc")[0] == 2
    assert run_cli("curve", "--distances", "-5")[0] == 2


def test_sense_requires_config_flag():
    with pytest.raises(SystemExit):
        run_cli("sense")


# --------------------------------------------------------------- simulate

def test_simulate_payload_and_determinism():
    args = ("simulate", "--config", str(CONFIGS / "desk.ini"),
            "--n-pulses", "200000", "--seed", "3", "--format", "json")
    code, out, _ = run_cli(*args)
    assert code == 0
    p = json.loads(out)
    assert p["mode"] == "monte_carlo"
    assert p["seed"] == 3
    assert p["tally"]["one_detector_events"] > 0
    assert 0.15 < p["tally"]["pre_pairing_qber"] < 0.40
    assert "rate_per_pulse" in p["rate"]
    assert run_cli(*args)[1] == out


# ------------------------------------------------------------------- curve

def test_curve_rates_fall_with_distance_and_clear_the_bound():
    code, out, _ = run_cli(
        "curve", "--config", str(CONFIGS / "longhaul_link.ini"),
        "--distances", "400,500,658.7,750", "--format", "json",
    )
    assert code == 0
    table = json.loads(out)
    assert table["columns"] == [
        "distance_km", "loss_db", "simulated_rate", "plob_absolute", "plob_relative",
    ]
    rows = table["rows"]
    rates = [r["simulated_rate"] for r in rows]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert all(r["simulated_rate"] >= 0.0 for r in rows)
    longest_keyed = rows[2]
    assert longest_keyed["distance_km"] == 658.7
    assert longest_keyed["loss_db"] == pytest.approx(106.0, abs=1e-9)
    assert longest_keyed["simulated_rate"] > 10.0 * longest_keyed["plob_absolute"]
    assert math.isclose(
        longest_keyed["plob_absolute"], plob_bound(transmittance(106.0)), rel_tol=1e-12
    )


def test_curve_csv_columns():
    code, out, _ = run_cli(
        "curve", "--config", str(CONFIGS / "desk.ini"), "--distances", "40,100"
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "distance_km,loss_db,simulated_rate,plob_absolute,plob_relative"
    assert len(lines) == 3


# ---------------------------------------------------------------- optimize

def test_optimize_cli_small_budget():
    code, out, _ = run_cli(
        "optimize", "--config", str(CONFIGS / "desk.ini"),
        "--budget", "25", "--n-starts", "3", "--seed", "2", "--format", "json",
    )
    assert code == 0
    p = json.loads(out)
    assert p["rate_per_pulse"] > 0.0
    assert p["evaluations"] <= 25
    assert set(p["params"]) == {
        "mu1", "mu2", "muz", "p_signal_window", "p_mu1", "p_mu2", "epsilon_send",
    }


def test_optimize_cli_infeasible_link_exits_3(tmp_path):
    cfg = tmp_path / "dead.ini"
    cfg.write_text(
        "[link]\nlength_a_km = 1000\nlength_b_km = 1000\n"
        "[optimize]\nn_pulses = 1e5\nn_starts = 2\nbudget = 5\n"
    )
    code, _, err = run_cli("optimize", "--config", str(cfg), "--seed", "1")
    assert code == 3
    assert "infeasible" in err


# ------------------------------------------------------------------- sense

def test_sense_end_to_end(tmp_path):
    out_dir = tmp_path / "sense_out"
    args = ("sense", "--config", str(CONFIGS / "sense_demo.ini"),
            "--out", str(out_dir), "--format", "json")
    code, out, _ = run_cli(*args)
    assert code == 0
    for name in ("trace_alice.txt", "trace_bob.txt", "recovered_phase.txt",
                 "localization.json"):
        assert (out_dir / name).exists()
    record = json.loads((out_dir / "localization.json").read_text())
    assert record["position_from_alice_km"] == pytest.approx(60.0, abs=1.0)
    assert record["correlation_peak"] > 0.9
    assert record["out_of_range"] is False
    summary = json.loads(out)
    assert summary["localization"] == record

    header = (out_dir / "recovered_phase.txt").read_text().splitlines()
    assert header[0].startswith("# sample_rate_hz=")
    assert "origin=recovered" in header[0]
    assert len(header[1].split()) == 2

    # the photon-counting recovery really ran: the recovered stream is a
    # noisy version of the bob trace, not a copy of it
    bob_lines = (out_dir / "trace_bob.txt").read_text().splitlines()
    assert header[1:] != bob_lines[1:]

    first = {name: (out_dir / name).read_bytes()
             for name in ("trace_alice.txt", "localization.json")}
    code2, out2, _ = run_cli(*args)
    assert code2 == 0 and out2 == out
    for name, blob in first.items():
        assert (out_dir / name).read_bytes() == blob


def test_sense_missing_section_is_config_error(tmp_path):
    cfg = tmp_path / "nosensing.ini"
    cfg.write_text("[vibration.a]\nposition_km = 1\nfrequency_hz = 5\namplitude_rad = 0.1\n")
    assert run_cli("sense", "--config", str(cfg))[0] == 2


def test_sense_aliasing_source_is_infeasible(tmp_path):
    cfg = tmp_path / "alias.ini"
    cfg.write_text(
        "[sensing]\nlength_km = 100\nsample_rate_hz = 1000\nduration_s = 0.1\n"
        "[vibration.a]\nposition_km = 10\nfrequency_hz = 900\namplitude_rad = 0.1\n"
    )
    code, _, err = run_cli("sense", "--config", str(cfg))
    assert code == 3
    assert "aliases" in err


def test_sense_position_past_the_end_is_config_error(tmp_path):
    cfg = tmp_path / "far.ini"
    cfg.write_text(
        "[sensing]\nlength_km = 100\nsample_rate_hz = 1000\nduration_s = 0.1\n"
        "[vibration.a]\nposition_km = 500\nfrequency_hz = 5\namplitude_rad = 0.1\n"
    )
    assert run_cli("sense", "--config", str(cfg))[0] == 2


# -------------------------------------------------------------- subprocess

def test_module_invocation_smoke():
    proc = subprocess.run(
        [sys.executable, "-m", "snslab.cli", "plob", "--loss-db", "106",
         "--format", "json"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    payload = json.loads(proc.stdout)
    assert payload["bound_bits_per_use"] == pytest.approx(3.62e-11, rel=0.01)


@pytest.mark.skipif(shutil.which("snslab") is None, reason="script not on PATH")
def test_console_script_smoke():
    proc = subprocess.run(
        ["snslab", "keyrate", "--config", str(CONFIGS / "longhaul_session.ini")],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "key,value"
