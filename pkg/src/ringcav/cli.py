"""Command-line interface: ``ringcav {transmission,peaks,ringdown} --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 numerical or sizing error,
4 oscillation threshold reached.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .cavity import lorentzian_reduction, round_trip_group_delay, transmission_sweep
from .config import SimulationConfig, canonical_json, metadata, parse_config
from .dispersion import TWO_PI
from .exceptions import CavityError, ConfigError, DegenerateDelayError, OscillationThresholdError
from .resonances import extract_peaks, find_satellites, satellite_predicate
from .timedomain import (
    default_time_grid,
    dominant_oscillation_frequency,
    max_time_step,
    overshoot,
    ringdown,
    steady_intensity,
    tail_time_constant,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_OSCILLATION = 4


def _num(x):
    return repr(float(x))


def _emit(fmt, meta, columns, rows, extra=None):
    """Serialise ``rows`` (a list of column arrays) as CSV or JSON text."""
    if fmt == "json":
        records = [dict(zip(columns, values)) for values in zip(*[list(map(_jsonable, col)) for col in rows])]
        doc = {"metadata": meta, "data": records}
        if extra:
            doc.update(extra)
        return canonical_json(doc) + "\n"
    lines = ["# " + canonical_json(meta), ",".join(columns)]
    for values in zip(*rows):
        lines.append(",".join(v if isinstance(v, str) else _num(v) for v in values))
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, (str, bool)) or v is None:
        return v
    return float(v)


def _cavity_summary(config):
    geom, model, omega_p = config.geometry, config.medium, config.principal_resonance
    tau = round_trip_group_delay(geom, model, omega_p)
    summary = {"omega_p_hz": omega_p / TWO_PI, "round_trip_group_delay_s": tau}
    try:
        summary["decay_rate_per_s"] = float(lorentzian_reduction(geom, model, omega_p).decay_rate)
    except DegenerateDelayError:
        summary["decay_rate_per_s"] = None
    return summary


def _sweep_settings(config, span_hz, points):
    span_hz = config.default_span_hz() if span_hz is None else span_hz
    points = config.numerics["points"] if points is None else points
    return float(span_hz), int(points)


def cmd_transmission(config, span_hz=None, points=None, fmt="csv"):
    span_hz, points = _sweep_settings(config, span_hz, points)
    omega_p = config.principal_resonance
    spectrum = transmission_sweep(config.geometry, config.medium, omega_p, TWO_PI * span_hz, points)
    meta = metadata(config, command="transmission", span_hz=span_hz, points=points, **_cavity_summary(config))
    values = spectrum.values
    columns = ["omega_hz", "re_S", "im_S", "abs2_S"]
    text = _emit(fmt, meta, columns, [spectrum.omega / TWO_PI, values.real, values.imag, np.abs(values) ** 2])
    tau = meta["round_trip_group_delay_s"]
    report = [f"principal resonance {meta['omega_p_hz']:.12g} Hz, round-trip group delay {tau:.4g} s"]
    return text, report


def cmd_peaks(config, span_hz=None, points=None, fmt="csv"):
    span_hz, points = _sweep_settings(config, span_hz, points)
    geom, model, omega_p = config.geometry, config.medium, config.principal_resonance
    numerics = config.numerics
    required = satellite_predicate(geom, model, omega_p)
    search_span = numerics.get("search_span_hz")
    roots = find_satellites(
        geom, model, omega_p,
        None if search_span is None else TWO_PI * search_span,
        points=numerics["search_points"],
    )
    spectrum = transmission_sweep(geom, model, omega_p, TWO_PI * span_hz, points)
    peaks = extract_peaks(
        spectrum, omega_p,
        threshold_factor=numerics["peak_threshold_factor"],
        min_points_per_fwhm=numerics["min_points_per_fwhm"],
    )
    summary = _cavity_summary(config)
    tau = summary["round_trip_group_delay_s"]
    satellites_hz = [r / TWO_PI for r in roots]
    meta = metadata(
        config, command="peaks", span_hz=span_hz, points=points,
        satellites_required=required, satellite_detunings_hz=satellites_hz, **summary,
    )
    dicts = [p.to_dict() for p in peaks]
    columns = ["center_hz", "fwhm_hz", "height", "kind"]
    rows = [[d[c] for d in dicts] for c in columns]
    text = _emit(fmt, meta, columns, rows, extra={"peaks": dicts} if fmt == "json" else None)
    verdict = "satellite peaks REQUIRED by causality" if required else "no satellite peaks required"
    report = [f"tau_g^RT = {tau * 1e9:.4g} ns -> {verdict}"]
    if roots:
        report.append("phase roots at detunings (Hz): " + ", ".join(f"{h:.6g}" for h in satellites_hz))
    for d in dicts:
        report.append(f"{d['kind']:>9} peak at {d['center_hz'] - omega_p / TWO_PI:+.6g} Hz, "
                      f"FWHM {d['fwhm_hz']:.4g} Hz, height {d['height']:.4g}")
    return text, report


def ringdown_diagnostics(trace, fsr):
    diag = {"steady_intensity": steady_intensity(trace)}
    ratio, when = overshoot(trace)
    diag["overshoot_ratio"] = ratio
    diag["overshoot_time_s"] = when
    for key, func in (
        ("tail_time_constant_s", lambda: tail_time_constant(trace)),
        ("oscillation_frequency_hz", lambda: dominant_oscillation_frequency(trace, max_frequency=0.5 * fsr / TWO_PI)),
    ):
        try:
            value = func()
            diag[key] = value if math.isfinite(value) else None
        except CavityError:
            diag[key] = None
    return diag


def cmd_ringdown(config, log_intensity=False, fmt="csv"):
    geom, model, omega_p = config.geometry, config.medium, config.principal_resonance
    signal = config.input_signal()
    numerics = config.numerics
    if "t_post_s" in numerics:
        dt = max_time_step(geom)
        n_post = math.ceil(numerics["t_post_s"] / dt)
        t = dt * np.arange(-max(1, math.ceil(0.1 * n_post)), n_post + 1)
    else:
        t = default_time_grid(geom, model, signal, decay_times=numerics["decay_times"], omega_p=omega_p)
    trace = ringdown(geom, model, signal, t, carrier=omega_p)
    diag = ringdown_diagnostics(trace, geom.fsr)
    meta = metadata(config, command="ringdown", samples=int(t.size), dt_s=float(trace.dt),
                    carrier_hz=omega_p / TWO_PI, diagnostics=diag, **_cavity_summary(config))
    intensity = trace.intensity
    columns = ["t_s", "re_E", "im_E", "intensity"]
    rows = [trace.t, trace.field.real, trace.field.imag, intensity]
    if log_intensity:
        columns.append("log10_intensity")
        with np.errstate(divide="ignore"):
            rows.append(np.log10(np.maximum(intensity, 1e-300)))
    text = _emit(fmt, meta, columns, rows)

    def show(value, unit, scale=1.0):
        return "n/a" if value is None else f"{value * scale:.4g} {unit}"

    report = [
        f"initial steady intensity {diag['steady_intensity']:.6g}",
        f"max/steady after turn-off {diag['overshoot_ratio']:.4g} at {diag['overshoot_time_s'] * 1e6:.4g} us",
        f"late-tail time constant {show(diag['tail_time_constant_s'], 'us', 1e6)}",
        f"dominant oscillation {show(diag['oscillation_frequency_hz'], 'MHz', 1e-6)}",
    ]
    return text, report


def run(command, config, span_hz=None, points=None, fmt="csv", log_intensity=False):
    if command == "transmission":
        return cmd_transmission(config, span_hz, points, fmt)
    if command == "peaks":
        return cmd_peaks(config, span_hz, points, fmt)
    if command == "ringdown":
        return cmd_ringdown(config, log_intensity, fmt)
    raise ValueError(f"unknown command {command!r}")


def exit_code_for(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, OscillationThresholdError):
        return EXIT_OSCILLATION
    return EXIT_NUMERICAL


def _parse_sweep(spec):
    try:
        key, rng = spec.split("=", 1)
        start, stop, n = rng.split(":")
        values = np.linspace(float(start), float(stop), int(n))
    except ValueError as exc:
        raise ConfigError([("", f"--sweep expects key=start:stop:n, got {spec!r}")]) from exc
    if int(n) < 1:
        raise ConfigError([("", "--sweep needs at least one point")])
    return key, values


def _sweep_point(args):
    index, data, key, value, command, opts, out = args
    try:
        base = SimulationConfig.from_dict(data)
        node = base.data
        for part in key.split(".")[:-1]:
            node = node.get(part, {}) if isinstance(node, dict) else {}
        current = node.get(key.split(".")[-1]) if isinstance(node, dict) else None
        is_int = isinstance(current, int) and not isinstance(current, bool)
        value = int(round(value)) if is_int else float(value)
        config = base.with_value(key, value)
        text, report = run(command, config, **opts)
        Path(out).write_text(text, encoding="utf-8")
        return index, EXIT_OK, f"{key}={value!r}: wrote {out}"
    except CavityError as exc:
        return index, exit_code_for(exc), f"{key}={value!r}: {exc}"


def _point_path(out, index, count):
    path = Path(out)
    width = max(3, len(str(count - 1)))
    return str(path.with_name(f"{path.stem}_{index:0{width}d}{path.suffix}"))


def build_parser():
    parser = argparse.ArgumentParser(prog="ringcav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("transmission", "complex transmission spectrum about the principal resonance"),
        ("peaks", "satellite-resonance analysis and transmission peak list"),
        ("ringdown", "output field after the drive is switched off"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, metavar="PATH", help="JSON configuration file")
        p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--sweep", metavar="KEY=START:STOP:N",
                       help="run once per value of a dotted config key, e.g. medium.peak_gain=0.1:0.3:5")
        if name != "ringdown":
            p.add_argument("--span-hz", type=float, metavar="F", help="total sweep width in Hz")
            p.add_argument("--points", type=int, metavar="N", help="number of frequency samples")
        else:
            p.add_argument("--log-intensity", action="store_true", help="add a log10_intensity column")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    opts = {"fmt": args.format}
    if args.command == "ringdown":
        opts["log_intensity"] = args.log_intensity
    else:
        opts["span_hz"] = args.span_hz
        opts["points"] = args.points
    try:
        config = parse_config(args.config)
        if args.sweep:
            if not args.out:
                raise ConfigError([("", "--sweep writes one file per point and needs --out")])
            key, values = _parse_sweep(args.sweep)
            jobs = [
                (i, config.data, key, v.item(), args.command, opts, _point_path(args.out, i, values.size))
                for i, v in enumerate(values)
            ]
            with ProcessPoolExecutor() as pool:
                results = sorted(pool.map(_sweep_point, jobs))
            for _, _, message in results:
                print(message, file=sys.stderr)
            return max(code for _, code, _ in results)
        text, report = run(args.command, config, **opts)
    except CavityError as exc:
        print(f"ringcav: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for line in report:
        print(line, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
