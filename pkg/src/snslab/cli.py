"""Command line front end.

Subcommands:

    keyrate    expected key rate of one configuration
    simulate   sampled session with realized pairing
    curve      rate and repeaterless bounds over a distance sweep
    optimize   tune the source parameters for a link
    sense      generate phase traces, recover them, locate a disturbance
    plob       repeaterless bound for a loss or transmittance

All inputs come from an INI file plus a few flags; without a config the
desk-scale presets apply. Exit codes: 0 on success (a negative rate is
still a success), 2 for configuration problems, 3 when the physics or
statistics make the request infeasible.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys

import numpy as np

from .model import DetectorModel, LinkModel, SecurityParams, SourceParams, transmittance
from .optimize import optimize_params
from .presets import desk_detector, desk_link, desk_security, desk_source
from .security import (
    SessionAnalysis,
    expected_post_processing,
    key_rate,
    mc_post_processing,
    plob_bound,
)
from .sensing import (
    DegenerateTraceError,
    DelayOutOfRangeError,
    LinkGeometry,
    PhaseTrace,
    VibrationSource,
    locate_traces,
    recover_phase_from_reference,
    simulate_phase_traces,
    synthesize_reference_counts,
    write_trace,
)
from .simulate import DEFAULT_SLICE_HALF_WIDTH_RAD, expected_tallies, monte_carlo_session


class ConfigError(Exception):
    """Bad or missing configuration; maps to exit code 2."""


class RuntimeInfeasible(RuntimeError):
    """Valid configuration that cannot produce the requested result."""


_SECTION_KEYS = {
    "link": {"length_a_km", "length_b_km", "atten_db_per_km", "station_loss_db", "noise_per_pulse"},
    "detector": {"efficiency", "dark_rate_hz", "gate_ns", "pulse_rate_hz"},
    "source": {
        "mu1", "mu2", "muz", "p_signal_window", "p_mu1", "p_mu2", "p_vac",
        "epsilon_send", "misalignment",
    },
    "security": {"f_ec", "eps_cor", "eps_pa", "eps_hat", "xi_decoy"},
    "keyrate": {"n_untagged", "phase_error_rate", "n_sifted", "bit_error_rate", "n_pulses"},
    "run": {"n_pulses", "seed", "slice_half_width_rad", "n_jobs"},
    "curve": {"distances_km", "n_pulses"},
    "optimize": {"n_starts", "budget", "n_pulses"},
    "sensing": {
        "length_km", "light_speed_km_per_s", "duration_s", "sample_rate_hz",
        "drift_rate_rad2_per_s", "noise_std_rad", "max_lag_s", "max_slack_s",
        "photons_per_frame",
    },
}
_VIBRATION_KEYS = {
    "position_km", "frequency_hz", "amplitude_rad", "phase_rad",
    "dc_offset_rad", "start_s", "duration_s",
}


def _read_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is None:
        return cp
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    for section in cp.sections():
        if section in _SECTION_KEYS:
            allowed = _SECTION_KEYS[section]
        elif section.startswith("vibration."):
            allowed = _VIBRATION_KEYS
        else:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in allowed:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
    return cp


def _getfloat(cp, section: str, key: str, default: float | None = None) -> float:
    if not cp.has_option(section, key):
        if default is None:
            raise ConfigError(f"[{section}] is missing required key '{key}'")
        return default
    try:
        return cp.getfloat(section, key)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be a number") from None


def _getint(cp, section: str, key: str, default: int) -> int:
    if not cp.has_option(section, key):
        return default
    try:
        return cp.getint(section, key)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be an integer") from None


def _build_link(cp) -> LinkModel:
    base = desk_link()
    try:
        return LinkModel(
            length_a_km=_getfloat(cp, "link", "length_a_km", base.length_a_km),
            length_b_km=_getfloat(cp, "link", "length_b_km", base.length_b_km),
            atten_db_per_km=_getfloat(cp, "link", "atten_db_per_km", base.atten_db_per_km),
            station_loss_db=_getfloat(cp, "link", "station_loss_db", base.station_loss_db),
            noise_per_pulse=_getfloat(cp, "link", "noise_per_pulse", base.noise_per_pulse),
        )
    except ValueError as exc:
        raise ConfigError(f"[link] {exc}") from None


def _build_detector(cp) -> DetectorModel:
    base = desk_detector()
    try:
        return DetectorModel(
            efficiency=_getfloat(cp, "detector", "efficiency", base.efficiency),
            dark_rate_hz=_getfloat(cp, "detector", "dark_rate_hz", base.dark_rate_hz),
            gate_ns=_getfloat(cp, "detector", "gate_ns", base.gate_ns),
            pulse_rate_hz=_getfloat(cp, "detector", "pulse_rate_hz", base.pulse_rate_hz),
        )
    except ValueError as exc:
        raise ConfigError(f"[detector] {exc}") from None


def _build_source(cp) -> SourceParams:
    base = desk_source()
    try:
        return SourceParams(
            mu1=_getfloat(cp, "source", "mu1", base.mu1),
            mu2=_getfloat(cp, "source", "mu2", base.mu2),
            muz=_getfloat(cp, "source", "muz", base.muz),
            p_signal_window=_getfloat(cp, "source", "p_signal_window", base.p_signal_window),
            p_mu1=_getfloat(cp, "source", "p_mu1", base.p_mu1),
            p_mu2=_getfloat(cp, "source", "p_mu2", base.p_mu2),
            p_vac=_getfloat(cp, "source", "p_vac", base.p_vac),
            epsilon_send=_getfloat(cp, "source", "epsilon_send", base.epsilon_send),
            misalignment=_getfloat(cp, "source", "misalignment", base.misalignment),
        )
    except ValueError as exc:
        raise ConfigError(f"[source] {exc}") from None


def _build_security(cp) -> SecurityParams:
    base = desk_security()
    try:
        return SecurityParams(
            f_ec=_getfloat(cp, "security", "f_ec", base.f_ec),
            eps_cor=_getfloat(cp, "security", "eps_cor", base.eps_cor),
            eps_pa=_getfloat(cp, "security", "eps_pa", base.eps_pa),
            eps_hat=_getfloat(cp, "security", "eps_hat", base.eps_hat),
            xi_decoy=_getfloat(cp, "security", "xi_decoy", base.xi_decoy),
        )
    except ValueError as exc:
        raise ConfigError(f"[security] {exc}") from None


def _run_options(cp, args, default_pulses: float):
    n_pulses = _getfloat(cp, "run", "n_pulses", default_pulses)
    if getattr(args, "n_pulses", None) is not None:
        n_pulses = args.n_pulses
    seed = _getint(cp, "run", "seed", 1)
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    half_width = _getfloat(cp, "run", "slice_half_width_rad", DEFAULT_SLICE_HALF_WIDTH_RAD)
    n_jobs = _getint(cp, "run", "n_jobs", 1)
    if getattr(args, "n_jobs", None) is not None:
        n_jobs = args.n_jobs
    if n_pulses <= 0:
        raise ConfigError("[run] n_pulses must be > 0")
    if not 0.0 < half_width < math.pi / 2.0:
        raise ConfigError("[run] slice_half_width_rad must lie in (0, pi/2)")
    return n_pulses, seed, half_width, n_jobs


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _flatten(payload: dict, prefix: str = "") -> list[tuple[str, str]]:
    rows: list[tuple[str, str]] = []
    for key in sorted(payload):
        value = payload[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.extend(_flatten(value, name + "."))
        else:
            rows.append((name, _fmt_value(value)))
    return rows


def _render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    lines = ["key,value"]
    lines += [f"{k},{v}" for k, v in _flatten(payload)]
    return "\n".join(lines) + "\n"


def _render_table(columns: list[str], rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps({"columns": columns, "rows": rows}, sort_keys=True, indent=2) + "\n"
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt_value(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="ascii") as fh:
            fh.write(text)


def _analysis_payload(analysis: SessionAnalysis, det: DetectorModel, mode: str) -> dict:
    d = analysis.decoy
    r = analysis.report
    return {
        "mode": mode,
        "n_pulses": float(r.n_pulses),
        "decoy": {
            "y0_low": float(d.y0_low),
            "y0_up": float(d.y0_up),
            "y1_alice_low": float(d.y1_alice_low),
            "y1_bob_low": float(d.y1_bob_low),
            "n1_alice_low": float(d.n1_alice_low),
            "n1_bob_low": float(d.n1_bob_low),
            "n1_low": float(d.n1_low),
            "phase_error_up": float(d.phase_error_up),
            "feasible": bool(d.feasible),
        },
        "pairing": {
            "pair_count": float(analysis.pair_count),
            "survival_fraction": float(analysis.survival_fraction),
            "n_sifted": float(analysis.n_sifted),
            "bit_error_rate": float(analysis.bit_error_rate),
            "n_untagged": float(analysis.n_untagged),
            "phase_error_rate": float(analysis.phase_error_rate),
        },
        "rate": {
            "privacy_bits": float(r.privacy_bits),
            "error_correction_bits": float(r.error_correction_bits),
            "correctness_bits": float(r.correctness_bits),
            "secrecy_bits": float(r.secrecy_bits),
            "secret_bits": float(r.secret_bits),
            "rate_per_pulse": float(r.rate_per_pulse),
            "rate_per_pulse_clamped": float(max(r.rate_per_pulse, 0.0)),
            "clamped": bool(r.rate_per_pulse < 0.0),
            "bits_per_second": float(r.rate_per_pulse * det.pulse_rate_hz),
        },
    }


def _cmd_keyrate(args) -> int:
    cp = _read_config(args.config)
    det, sec = _build_detector(cp), _build_security(cp)
    if cp.has_section("keyrate"):
        # session quantities supplied directly, no channel model involved
        try:
            report = key_rate(
                n_untagged=_getfloat(cp, "keyrate", "n_untagged"),
                phase_error_rate=_getfloat(cp, "keyrate", "phase_error_rate"),
                n_sifted=_getfloat(cp, "keyrate", "n_sifted"),
                bit_error_rate=_getfloat(cp, "keyrate", "bit_error_rate"),
                n_pulses=_getfloat(cp, "keyrate", "n_pulses"),
                sec=sec,
            )
        except ValueError as exc:
            raise ConfigError(f"[keyrate] {exc}") from None
        payload = {
            "mode": "direct",
            "n_pulses": float(report.n_pulses),
            "inputs": {
                "n_untagged": float(report.n_untagged),
                "phase_error_rate": float(report.phase_error_rate),
                "n_sifted": float(report.n_sifted),
                "bit_error_rate": float(report.bit_error_rate),
            },
            "rate": {
                "privacy_bits": float(report.privacy_bits),
                "error_correction_bits": float(report.error_correction_bits),
                "correctness_bits": float(report.correctness_bits),
                "secrecy_bits": float(report.secrecy_bits),
                "secret_bits": float(report.secret_bits),
                "rate_per_pulse": float(report.rate_per_pulse),
                "rate_per_pulse_clamped": float(max(report.rate_per_pulse, 0.0)),
                "clamped": bool(report.rate_per_pulse < 0.0),
                "bits_per_second": float(report.rate_per_pulse * det.pulse_rate_hz),
            },
        }
        _emit(_render(payload, args.format), args.out)
        return 0
    link, src = _build_link(cp), _build_source(cp)
    n_pulses, _, half_width, _ = _run_options(cp, args, default_pulses=1e10)
    tally = expected_tallies(link, det, src, n_pulses, half_width)
    analysis = expected_post_processing(tally, src, sec, half_width)
    _emit(_render(_analysis_payload(analysis, det, "expected"), args.format), args.out)
    return 0


def _cmd_simulate(args) -> int:
    cp = _read_config(args.config)
    link, det = _build_link(cp), _build_detector(cp)
    src, sec = _build_source(cp), _build_security(cp)
    n_pulses, seed, half_width, n_jobs = _run_options(cp, args, default_pulses=1e6)
    tally = monte_carlo_session(link, det, src, int(n_pulses), seed, n_jobs, half_width)
    analysis = mc_post_processing(tally, src, sec, seed, half_width)
    payload = _analysis_payload(analysis, det, "monte_carlo")
    payload["seed"] = seed
    payload["tally"] = {
        "one_detector_events": float(tally.total_one_detector_events()),
        "signal_heralded": float(tally.signal_heralded()),
        "pre_pairing_qber": float(tally.pre_pairing_qber()),
    }
    _emit(_render(payload, args.format), args.out)
    return 0


def _parse_distances(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError("[curve] distances_km must be comma-separated numbers") from None
    if not values:
        raise ConfigError("[curve] distances_km is empty")
    if any(d < 0 for d in values):
        raise ConfigError("[curve] distances_km must be >= 0")
    return values


_ETA_CEIL = 1.0 - 1e-12


def _cmd_curve(args) -> int:
    cp = _read_config(args.config)
    link, det = _build_link(cp), _build_detector(cp)
    src, sec = _build_source(cp), _build_security(cp)
    n_pulses, _, half_width, _ = _run_options(cp, args, default_pulses=1e10)
    if cp.has_option("curve", "n_pulses"):
        n_pulses = _getfloat(cp, "curve", "n_pulses")
    if args.distances is not None:
        distances = _parse_distances(args.distances)
    elif cp.has_option("curve", "distances_km"):
        distances = _parse_distances(cp.get("curve", "distances_km"))
    else:
        raise ConfigError("[curve] is missing required key 'distances_km'")

    columns = ["distance_km", "loss_db", "simulated_rate", "plob_absolute", "plob_relative"]
    rows = []
    for d in distances:
        scaled = LinkModel(
            length_a_km=d / 2.0,
            length_b_km=d / 2.0,
            atten_db_per_km=link.atten_db_per_km,
            station_loss_db=link.station_loss_db,
            noise_per_pulse=link.noise_per_pulse,
        )
        tally = expected_tallies(scaled, det, src, n_pulses, half_width)
        analysis = expected_post_processing(tally, src, sec, half_width)
        loss = link.atten_db_per_km * d
        eta_abs = min(transmittance(loss), _ETA_CEIL)
        eta_rel = min(
            transmittance(loss + link.station_loss_db) * det.efficiency, _ETA_CEIL
        )
        rows.append(
            {
                "distance_km": float(d),
                "loss_db": float(loss),
                # display floor: a session past its reach yields no key
                "simulated_rate": float(max(analysis.report.rate_per_pulse, 0.0)),
                "plob_absolute": float(plob_bound(eta_abs)),
                "plob_relative": float(plob_bound(eta_rel)),
            }
        )
    _emit(_render_table(columns, rows, args.format), args.out)
    return 0


def _cmd_optimize(args) -> int:
    cp = _read_config(args.config)
    link, det = _build_link(cp), _build_detector(cp)
    src, sec = _build_source(cp), _build_security(cp)
    n_pulses = _getfloat(cp, "optimize", "n_pulses", 1e10)
    n_starts = _getint(cp, "optimize", "n_starts", 12)
    budget = _getint(cp, "optimize", "budget", 20000)
    if args.n_starts is not None:
        n_starts = args.n_starts
    if args.budget is not None:
        budget = args.budget
    seed = args.seed if args.seed is not None else _getint(cp, "run", "seed", 1)
    half_width = _getfloat(cp, "run", "slice_half_width_rad", DEFAULT_SLICE_HALF_WIDTH_RAD)
    try:
        result = optimize_params(
            link, det, sec, n_pulses, seed,
            n_starts=n_starts, budget=budget,
            misalignment=src.misalignment, slice_half_width_rad=half_width,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not result.feasible:
        raise RuntimeInfeasible("no parameter vector produced usable decoy statistics")
    payload = {
        "params": {k: float(v) for k, v in result.params.items()},
        "rate_per_pulse": float(result.rate),
        "bits_per_second": float(result.rate * det.pulse_rate_hz),
        "evaluations": int(result.evaluations),
        "start_index": int(result.start_index),
    }
    _emit(_render(payload, args.format), args.out)
    return 0


def _build_geometry(cp) -> LinkGeometry:
    try:
        return LinkGeometry(
            length_km=_getfloat(cp, "sensing", "length_km"),
            light_speed_km_per_s=_getfloat(cp, "sensing", "light_speed_km_per_s", 2.0e5),
        )
    except ValueError as exc:
        raise ConfigError(f"[sensing] {exc}") from None


def _build_vibrations(cp) -> list[VibrationSource]:
    sections = sorted(
        (s for s in cp.sections() if s.startswith("vibration.")),
        key=lambda s: s.split(".", 1)[1],
    )
    if not sections:
        raise ConfigError("sense needs at least one [vibration.*] section")
    sources = []
    for section in sections:
        duration = None
        if cp.has_option(section, "duration_s"):
            duration = _getfloat(cp, section, "duration_s")
        try:
            sources.append(
                VibrationSource(
                    position_km=_getfloat(cp, section, "position_km"),
                    frequency_hz=_getfloat(cp, section, "frequency_hz"),
                    amplitude_rad=_getfloat(cp, section, "amplitude_rad"),
                    phase_rad=_getfloat(cp, section, "phase_rad", 0.0),
                    dc_offset_rad=_getfloat(cp, section, "dc_offset_rad", 0.0),
                    start_s=_getfloat(cp, section, "start_s", 0.0),
                    duration_s=duration,
                )
            )
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}") from None
    return sources


def _cmd_sense(args) -> int:
    cp = _read_config(args.config)
    if not cp.has_section("sensing"):
        raise ConfigError("sense needs a [sensing] section")
    geometry = _build_geometry(cp)
    sources = _build_vibrations(cp)
    duration = _getfloat(cp, "sensing", "duration_s")
    fs = _getfloat(cp, "sensing", "sample_rate_hz")
    if duration <= 0 or fs <= 0:
        raise ConfigError("[sensing] duration_s and sample_rate_hz must be > 0")
    for s in sources:
        if 2.0 * s.frequency_hz > fs:
            raise RuntimeInfeasible(
                f"source at {s.frequency_hz} Hz aliases at {fs} Hz sampling"
            )
        if s.position_km > geometry.length_km:
            raise ConfigError(
                f"vibration position {s.position_km} km lies past the link end"
            )
    seed = args.seed if args.seed is not None else _getint(cp, "run", "seed", 1)
    drift = _getfloat(cp, "sensing", "drift_rate_rad2_per_s", 0.01)
    noise = _getfloat(cp, "sensing", "noise_std_rad", 0.02)
    trace_a, trace_b = simulate_phase_traces(
        geometry, sources, duration, fs, seed,
        drift_rate_rad2_per_s=drift, noise_std_rad=noise,
    )

    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    path_a = os.path.join(out_dir, "trace_alice.txt")
    path_b = os.path.join(out_dir, "trace_bob.txt")
    path_rec = os.path.join(out_dir, "recovered_phase.txt")
    write_trace(path_a, trace_a)
    write_trace(path_b, trace_b)

    if cp.has_option("sensing", "photons_per_frame"):
        photons = _getfloat(cp, "sensing", "photons_per_frame")
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
        left, right = synthesize_reference_counts(trace_b.samples, photons, rng)
        recovered = recover_phase_from_reference(left, right, fs)
    else:
        recovered = PhaseTrace(
            samples=trace_b.samples, sample_rate_hz=fs, origin="recovered"
        )
    write_trace(path_rec, recovered)

    max_lag = None
    if cp.has_option("sensing", "max_lag_s"):
        max_lag = _getfloat(cp, "sensing", "max_lag_s")
    slack = None
    if cp.has_option("sensing", "max_slack_s"):
        slack = _getfloat(cp, "sensing", "max_slack_s")
    result = locate_traces(trace_a, trace_b, geometry, max_lag_s=max_lag, slack_s=slack)
    record = {
        "delay_s": float(result.delay_s),
        "position_from_bob_km": float(result.position_from_bob_km),
        "position_from_alice_km": float(result.position_from_alice_km),
        "position_from_bob_unclamped_km": float(result.position_from_bob_unclamped_km),
        "correlation_peak": float(result.correlation_peak),
        "out_of_range": bool(result.out_of_range),
    }
    loc_path = os.path.join(out_dir, "localization.json")
    with open(loc_path, "w", encoding="ascii") as fh:
        fh.write(json.dumps(record, sort_keys=True, indent=2) + "\n")
    summary = {
        "trace_alice": path_a,
        "trace_bob": path_b,
        "recovered_phase": path_rec,
        "localization_file": loc_path,
        "localization": record,
    }
    sys.stdout.write(_render(summary, args.format))
    return 0


def _cmd_plob(args) -> int:
    if (args.loss_db is None) == (args.transmittance is None):
        raise ConfigError("plob needs exactly one of --loss-db or --transmittance")
    if args.loss_db is not None:
        if args.loss_db < 0:
            raise ConfigError("--loss-db must be >= 0")
        eta = min(transmittance(args.loss_db), _ETA_CEIL)
    else:
        eta = args.transmittance
        if not 0.0 <= eta < 1.0:
            raise ConfigError("--transmittance must lie in [0, 1)")
    payload = {"transmittance": float(eta), "bound_bits_per_use": float(plob_bound(eta))}
    _emit(_render(payload, args.format), args.out)
    return 0


def _add_common(p: argparse.ArgumentParser, with_seed: bool = True) -> None:
    p.add_argument("--config", help="INI file; missing values fall back to desk presets")
    p.add_argument("--out", help="write the result here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    if with_seed:
        p.add_argument("--seed", type=int, help="overrides [run] seed")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snslab",
        description="Sending-or-not-sending twin-field protocol sessions, "
        "security analysis and fiber sensing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keyrate", help="expected key rate of one configuration")
    _add_common(p)
    p.add_argument("--n-pulses", type=float, help="session length in pulses")
    p.set_defaults(func=_cmd_keyrate)

    p = sub.add_parser("simulate", help="sampled session with realized pairing")
    _add_common(p)
    p.add_argument("--n-pulses", type=float)
    p.add_argument("--n-jobs", type=int, help="worker threads; result is identical")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("curve", help="key rate and repeaterless bounds vs distance")
    _add_common(p)
    p.add_argument("--distances", help="comma-separated total distances in km")
    p.set_defaults(func=_cmd_curve)

    p = sub.add_parser("optimize", help="tune source parameters for a link")
    _add_common(p)
    p.add_argument("--n-starts", type=int)
    p.add_argument("--budget", type=int)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("sense", help="phase traces, recovery and localization")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory for trace and result files")
    p.add_argument("--format", choices=("json", "csv"), default="csv",
                   help="stdout summary format")
    p.set_defaults(func=_cmd_sense)

    p = sub.add_parser("plob", help="repeaterless bound for a loss or transmittance")
    _add_common(p, with_seed=False)
    p.add_argument("--loss-db", type=float)
    p.add_argument("--transmittance", type=float)
    p.set_defaults(func=_cmd_plob)
    return parser


def entry(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeInfeasible, DegenerateTraceError, DelayOutOfRangeError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(entry())
