"""Command-line interface.

    gamowkit hardy check       --input wf.csv --half-plane lower --tol 1e-6
    gamowkit hardy evolve      --input wf.csv --t 1
    gamowkit titchmarsh eval   --input wf.csv --z 1-0.5j
    gamowkit resonance fit     --input lineshape.csv
    gamowkit resonance evolve  --e-r 2 --gamma 1 --t 2
    gamowkit gamow pair        --input psi.csv --e-r 2 --gamma 1
    gamowkit sim run           --duration 1000 --seed 42
    gamowkit sim detect        --input trace.csv
    gamowkit sim lifetime      --input darkperiods.csv
    gamowkit pipeline full     --seed 42

Every command prints a JSON report, writes it to the output directory
(``--out-dir``, else ``$GAMOWKIT_OUTPUT_DIR``, else the working directory)
together with CSV plot data and PNG figures.  Exit codes: 0 success,
2 invalid input, 3 domain error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np
from scipy import constants

from . import hardy, io, jumps, resonance
from .errors import GamowkitError, InvalidInputError, SchemaError
from .pipeline import PipelineConfig, run_pipeline

LOGGER = logging.getLogger("gamowkit")

OUTPUT_ENV = "GAMOWKIT_OUTPUT_DIR"
COMMON_DESTS = {"out_dir", "config", "figures", "verbose", "group", "action", "handler"}
HBAR_EV_S = constants.hbar / constants.e  # hbar in eV s


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInputError(f"{self.prog}: {message}")


def _complex(text):
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _half_plane(text):
    return hardy.HalfPlane.parse(text)


# --------------------------------------------------------------------------
# helpers


class Context:
    def __init__(self, args, name):
        self.args = args
        self.name = name
        out = args.out_dir or os.environ.get(OUTPUT_ENV) or "."
        self.out_dir = Path(out)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.figures = args.figures
        self.artifacts = {}

    def path(self, suffix):
        return self.out_dir / f"{self.name}_{suffix}"

    def record(self, key, path):
        self.artifacts[key] = str(path)

    def figure(self, key, func, *a, **kw):
        if not self.figures:
            return
        path = self.path(f"{key}.png")
        func(*a, path=path, **kw)
        self.record(f"figure_{key}", path)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise InvalidInputError(f"missing required option(s): {flags}")


def _pole_from_args(args):
    if getattr(args, "pole", None):
        return io.load_pole(args.pole)
    _require(args, "e_r", "gamma")
    return resonance.ResonancePole(args.e_r, args.gamma, complex(args.residue_re, args.residue_im))


def _write_csv(path, header, columns):
    with Path(path).open("w") as handle:
        handle.write(",".join(header) + "\n")
        for row in zip(*columns):
            handle.write(",".join(io.fmt(v) for v in row) + "\n")


# --------------------------------------------------------------------------
# commands


def cmd_hardy_check(ctx):
    args = ctx.args
    _require(args, "input")
    wf = io.load_wavefunction(args.input)
    report = hardy.hardy_residual(wf, args.half_plane, args.tol, complete_tail=not args.no_tail_completion)
    signal = hardy.fourier_to_time(wf, complete_tail=not args.no_tail_completion)
    csv_path = ctx.path("time_signal.csv")
    _write_csv(csv_path, ["tau", "re", "im", "abs"],
               [signal.tau, signal.values.real, signal.values.imag, np.abs(signal.values)])
    ctx.record("time_signal_csv", csv_path)
    from .plotting import plot_time_signal

    ctx.figure("time_signal", plot_time_signal, signal, report.half_plane)
    return {"input": str(args.input), **report.to_dict()}


def cmd_hardy_evolve(ctx):
    args = ctx.args
    _require(args, "input", "t")
    wf = io.load_wavefunction(args.input)
    hp = args.half_plane
    direction = hardy.Direction.STATE if hp is hardy.HalfPlane.LOWER else hardy.Direction.OBSERVABLE
    own = hardy.hardy_residual(wf, hp, args.tol)
    check = hardy.semigroup_check(wf, hp, args.t, args.tol)
    moved = hardy.time_translate(wf, args.t, direction)
    wf_path = ctx.path("translated.csv")
    io.save_wavefunction(wf_path, moved)
    ctx.record("translated_wavefunction", wf_path)
    from .plotting import plot_time_signal

    ctx.figure("time_signal", plot_time_signal, hardy.fourier_to_time(moved, complete_tail=True), hp)
    return {
        "input": str(args.input),
        "t": args.t,
        "direction": direction.value,
        "input_residual": own.to_dict(),
        **check.to_dict(),
    }


def cmd_titchmarsh_eval(ctx):
    args = ctx.args
    _require(args, "input", "z")
    wf = io.load_wavefunction(args.input)
    value = hardy.evaluate_offaxis(wf, args.z, args.half_plane)
    return {
        "input": str(args.input),
        "z": {"re": args.z.real, "im": args.z.imag},
        "half_plane": args.half_plane.value,
        "value": {"re": value.real, "im": value.imag},
        "grid": {"e_min": wf.grid.e_min, "e_max": wf.grid.e_max, "n": wf.grid.n},
    }


def cmd_resonance_fit(ctx):
    args = ctx.args
    _require(args, "input")
    e, y, sigma = io.load_lineshape(args.input)
    fit = resonance.fit_breit_wigner(e, y, sigma, background=args.background, max_iter=args.max_iter)
    pole_path = ctx.path("pole.json")
    io.save_pole(pole_path, fit.pole)
    ctx.record("pole", pole_path)
    order = np.argsort(e)
    fitted = resonance.lineshape(fit.pole, e[order]) + fit.background
    curve = ctx.path("curve.csv")
    _write_csv(curve, ["E", "y", "fit"], [e[order], y[order], fitted])
    ctx.record("curve_csv", curve)
    from .plotting import plot_lineshape_fit

    ctx.figure("fit", plot_lineshape_fit, e[order], y[order],
               None if sigma is None else sigma[order], fitted)
    return {"input": str(args.input), "lifetime": resonance.lifetime(fit.pole), **fit.to_dict()}


def cmd_resonance_evolve(ctx):
    args = ctx.args
    _require(args, "t")
    pole = _pole_from_args(args)
    factor = resonance.gamow_evolution_factor(pole, args.t)
    report = {
        "pole": pole.to_dict(),
        "t": args.t,
        "evolution_factor": {"re": factor.real, "im": factor.imag},
        "survival_probability": resonance.survival_probability(pole, args.t),
        "lifetime": resonance.lifetime(pole),
        "lifetime_quadrature": resonance.lifetime_quadrature(pole),
        "units": args.energy_unit,
    }
    if args.energy_unit == "eV":
        report["lifetime_seconds"] = HBAR_EV_S / pole.gamma
        report["t_seconds"] = HBAR_EV_S * args.t
    t_max = args.t_max if args.t_max is not None else max(args.t, 5.0 / pole.gamma)
    t = np.linspace(0.0, t_max, 401)
    s = resonance.survival_probability(pole, t)
    curve = ctx.path("survival.csv")
    _write_csv(curve, ["t", "survival"], [t, s])
    ctx.record("survival_csv", curve)
    from .plotting import plot_survival

    ctx.figure("survival", plot_survival, t, s)
    return report


def cmd_gamow_pair(ctx):
    args = ctx.args
    _require(args, "input")
    psi = io.load_wavefunction(args.input)
    pole = _pole_from_args(args)
    value = resonance.gamow_pairing(psi, pole, args.tol)
    return {
        "input": str(args.input),
        "pole": pole.to_dict(),
        "pairing": {"re": value.real, "im": value.imag},
        "pairing_abs2": abs(value) ** 2,
        "normalization": resonance.PAIRING_CONVENTION,
    }


def _system_from_args(args):
    if args.system is not None:
        if not isinstance(args.system, dict):
            raise SchemaError("'system' must be a level-system object")
        return jumps.LevelSystem.from_dict(args.system)
    return jumps.barium_ion(
        gamma=args.gamma,
        bright_rate=args.bright_rate,
        shelving_rate=args.shelving_rate,
        detection_efficiency=args.detection_efficiency,
        background_rate=args.background_rate,
    )


def cmd_sim_run(ctx):
    args = ctx.args
    system = _system_from_args(args)
    record = None if args.events else (
        jumps.shelf_transitions(system) if args.system is None else None)
    log = jumps.simulate(system, args.duration, args.seed, record=record)
    trace = jumps.bin_counts(log, args.bin_width)
    trace_path = ctx.path("trace.csv")
    io.save_trace(trace_path, trace)
    ctx.record("trace_csv", trace_path)
    report = {
        "duration": args.duration,
        "seed": args.seed,
        "bin_width": args.bin_width,
        "system": system.to_dict(),
        "n_photons": int(log.photon.sum()),
        "n_recorded_events": len(log),
        "completed_early": log.completed_early,
        "diagnostic": log.diagnostic,
    }
    periods = []
    if args.system is None:
        periods = jumps.true_dark_periods(log, include_open=True)
        truth_path = ctx.path("true_darkperiods.csv")
        io.save_dark_periods(truth_path, periods)
        ctx.record("true_darkperiods_csv", truth_path)
        report["n_true_dark_periods"] = len(periods)
        dark = np.zeros(trace.counts.size, dtype=bool)
        for p in periods:
            dark[int(p.t0 // args.bin_width): int(math.ceil(p.t1 / args.bin_width)) + 1] = True
        bright = trace.counts[~dark]
        report["mean_bright_rate"] = float(bright.mean() / args.bin_width) if bright.size else None
    if args.events:
        events_path = ctx.path("events.csv")
        io.save_events(events_path, log)
        ctx.record("events_csv", events_path)
    from .plotting import plot_trace

    ctx.figure("trace", plot_trace, trace, periods=periods, span=(0.0, min(args.duration, 300.0)))
    return report


def cmd_sim_detect(ctx):
    args = ctx.args
    _require(args, "input")
    trace = io.load_trace(args.input)
    low, high = args.low, args.high
    if low is None or high is None:
        d_low, d_high = jumps.default_thresholds(args.bright_rate, args.background_rate, trace.bin_width)
        low = d_low if low is None else low
        high = d_high if high is None else high
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", jumps.DetectionWarning)
        periods = jumps.detect_dark_periods(trace, low, high, args.min_bins)
    out = ctx.path("darkperiods.csv")
    io.save_dark_periods(out, periods)
    ctx.record("darkperiods_csv", out)
    from .plotting import plot_trace

    ctx.figure("trace", plot_trace, trace, periods=periods,
               span=(trace.t_start, trace.t_start + min(trace.duration, 300.0)))
    return {
        "input": str(args.input),
        "low_threshold": low,
        "high_threshold": high,
        "min_bins": args.min_bins,
        "bin_width": trace.bin_width,
        "n_dark_periods": len(periods),
        "warnings": [str(w.message) for w in caught],
    }


def cmd_sim_lifetime(ctx):
    args = ctx.args
    _require(args, "input")
    durations = jumps.align_onsets(io.load_dark_periods(args.input))
    est = jumps.estimate_lifetime(durations)
    t = np.linspace(0.0, max(durations), 401)
    model = np.exp(-t / est.tau_hat)
    curve = ctx.path("survival.csv")
    _write_csv(curve, ["t", "empirical", "exponential"],
               [t, jumps.empirical_survival(durations, t), model])
    ctx.record("survival_csv", curve)
    from .plotting import plot_survival

    ctx.figure("survival", plot_survival, t, model, durations=durations, label="exp(-t / tau_hat)")
    return {"input": str(args.input), "tau_hat": est.tau_hat, "stderr": est.stderr, "n": est.n}


def cmd_pipeline_full(ctx):
    args = ctx.args
    config = PipelineConfig(
        gamma=args.gamma,
        bright_rate=args.bright_rate,
        shelving_rate=args.shelving_rate,
        detection_efficiency=args.detection_efficiency,
        background_rate=args.background_rate,
        bin_width=args.bin_width,
        low_threshold=args.low,
        high_threshold=args.high,
        min_bins=args.min_bins,
        min_periods=args.min_periods,
        duration=args.duration,
        seed=args.seed,
    )
    result = run_pipeline(config)
    trace_path = ctx.path("trace.csv")
    io.save_trace(trace_path, result.trace)
    ctx.record("trace_csv", trace_path)
    dark_path = ctx.path("darkperiods.csv")
    io.save_dark_periods(dark_path, result.periods)
    ctx.record("darkperiods_csv", dark_path)
    durations = jumps.align_onsets(result.periods)
    t = np.linspace(0.0, max(durations), 401)
    curve = ctx.path("survival.csv")
    _write_csv(curve, ["t", "empirical", "theory"],
               [t, jumps.empirical_survival(durations, t), np.exp(-config.gamma * t)])
    ctx.record("survival_csv", curve)
    from .plotting import plot_survival, plot_trace

    ctx.figure("trace", plot_trace, result.trace, periods=result.periods,
               span=(0.0, min(result.duration, 300.0)))
    ctx.figure("survival", plot_survival, t, np.exp(-config.gamma * t), durations=durations)
    return result.to_dict()


# --------------------------------------------------------------------------
# parser


def _common(parser):
    parser.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_ENV} or .)")
    parser.add_argument("--config", help="JSON file with option values (schema_version '1')")
    parser.add_argument("--no-figures", dest="figures", action="store_false",
                        help="skip PNG figures")
    parser.add_argument("-v", "--verbose", action="store_true")


def _preset_options(parser):
    parser.add_argument("--gamma", type=float, default=jumps.DEFAULT_GAMMA,
                        help="5D5/2 decay rate in 1/s (default 1/30, a placeholder)")
    parser.add_argument("--bright-rate", type=float, default=jumps.DEFAULT_BRIGHT_RATE)
    parser.add_argument("--shelving-rate", type=float, default=jumps.DEFAULT_SHELVING_RATE)
    parser.add_argument("--detection-efficiency", type=float, default=1.0)
    parser.add_argument("--background-rate", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--bin-width", type=float, default=jumps.DEFAULT_BIN_WIDTH)


def _pole_options(parser):
    parser.add_argument("--pole", help="pole JSON {e_r, gamma, residue:{re, im}}")
    parser.add_argument("--e-r", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--residue-re", type=float, default=1.0)
    parser.add_argument("--residue-im", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gamowkit", description="Hardy-space resonance and decay toolkit")
    groups = parser.add_subparsers(dest="group", parser_class=_Parser, required=True)

    def leaf(group, action, handler, help_text):
        if group not in commands:
            commands[group] = groups.add_parser(group).add_subparsers(
                dest="action", parser_class=_Parser, required=True)
        sub = commands[group]
        p = sub.add_parser(action, help=help_text)
        _common(p)
        p.set_defaults(handler=handler)
        return p

    commands = {}

    p = leaf("hardy", "check", cmd_hardy_check, "Paley-Wiener membership test")
    p.add_argument("--input")
    p.add_argument("--half-plane", type=_half_plane, default=hardy.HalfPlane.LOWER)
    p.add_argument("--tol", type=float, default=hardy.DEFAULT_TOL)
    p.add_argument("--no-tail-completion", action="store_true")

    p = leaf("hardy", "evolve", cmd_hardy_evolve, "time-translate and re-test membership")
    p.add_argument("--input")
    p.add_argument("--half-plane", type=_half_plane, default=hardy.HalfPlane.LOWER)
    p.add_argument("--t", type=float)
    p.add_argument("--tol", type=float, default=hardy.DEFAULT_TOL)

    p = leaf("titchmarsh", "eval", cmd_titchmarsh_eval, "evaluate a Hardy function off the axis")
    p.add_argument("--input")
    p.add_argument("--z", type=_complex)
    p.add_argument("--half-plane", type=_half_plane, default=hardy.HalfPlane.LOWER)

    p = leaf("resonance", "fit", cmd_resonance_fit, "fit a Breit-Wigner lineshape")
    p.add_argument("--input")
    p.add_argument("--background", action="store_true")
    p.add_argument("--max-iter", type=int, default=200)

    p = leaf("resonance", "evolve", cmd_resonance_evolve, "Gamow-state decay at time t")
    _pole_options(p)
    p.add_argument("--t", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--energy-unit", choices=["natural", "eV"], default="natural")

    p = leaf("gamow", "pair", cmd_gamow_pair, "pair an observable with a Gamow state")
    p.add_argument("--input")
    _pole_options(p)
    p.add_argument("--tol", type=float, default=hardy.DEFAULT_TOL)

    p = leaf("sim", "run", cmd_sim_run, "simulate the shelving experiment")
    _preset_options(p)
    p.add_argument("--duration", type=float, default=1000.0)
    p.add_argument("--events", action="store_true", help="log and write every transition")
    p.set_defaults(system=None)

    p = leaf("sim", "detect", cmd_sim_detect, "detect dark periods in a trace")
    p.add_argument("--input")
    p.add_argument("--low", type=float)
    p.add_argument("--high", type=float)
    p.add_argument("--min-bins", type=int, default=1)
    p.add_argument("--bright-rate", type=float, default=jumps.DEFAULT_BRIGHT_RATE)
    p.add_argument("--background-rate", type=float, default=0.0)

    p = leaf("sim", "lifetime", cmd_sim_lifetime, "lifetime from dark periods")
    p.add_argument("--input")

    p = leaf("pipeline", "full", cmd_pipeline_full, "simulate -> detect -> estimate vs 1/Gamma")
    _preset_options(p)
    p.add_argument("--low", type=float)
    p.add_argument("--high", type=float)
    p.add_argument("--min-bins", type=int, default=1)
    p.add_argument("--min-periods", type=int, default=203)
    p.add_argument("--duration", type=float)
    return parser


def _leaf_parser(parser, args):
    sub = parser._subparsers._group_actions[0].choices[args.group]
    return sub._subparsers._group_actions[0].choices[args.action]


def _apply_config(parser, argv, args):
    """Re-parse with the config file's values as defaults; flags still win."""
    data = io.load_json(args.config)
    if not isinstance(data, dict):
        raise SchemaError("config must be a JSON object")
    version = data.get("schema_version")
    if version != io.SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}; expected {io.SCHEMA_VERSION!r}")
    leaf = _leaf_parser(parser, args)
    actions = {a.dest: a for a in leaf._actions}
    # option dests plus structured fields such as the sim ``system`` object
    allowed = (set(actions) | set(leaf._defaults)) - COMMON_DESTS - {"help"}
    defaults = {}
    for key, value in data.items():
        if key == "schema_version":
            continue
        dest = key.replace("-", "_")
        if dest not in allowed:
            raise SchemaError(f"unknown config field {key!r} for '{args.group} {args.action}'")
        action = actions.get(dest)
        if action is None:
            defaults[dest] = value
            continue
        if action.type is not None and value is not None and not isinstance(value, (dict, list)):
            try:
                value = action.type(value if action.type in (float, int) else str(value))
            except (TypeError, ValueError, argparse.ArgumentTypeError, InvalidInputError) as exc:
                raise SchemaError(f"config field {key!r}: {exc}") from None
            if action.type is int and isinstance(data[key], float) and data[key] != value:
                raise SchemaError(f"config field {key!r} must be an integer")
        if action.choices is not None and value not in action.choices:
            raise SchemaError(f"config field {key!r} must be one of {list(action.choices)}")
        defaults[dest] = value
    leaf.set_defaults(**defaults)
    return parser.parse_args(argv)


def _validate(args):
    for name in ("tol", "duration", "bin_width", "gamma", "bright_rate", "shelving_rate"):
        value = getattr(args, name, None)
        if value is not None and not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
            raise InvalidInputError(f"--{name.replace('_', '-')} must be positive and finite")


def run_cli(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, argv, args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _validate(args)
        ctx = Context(args, f"{args.group}_{args.action}")
        report = args.handler(ctx)
        report = {"schema_version": io.SCHEMA_VERSION, "command": f"{args.group} {args.action}",
                  **report}
        report_path = ctx.path("report.json")
        report["artifacts"] = {"report": str(report_path), **ctx.artifacts}
        io.save_report(report_path, report)
        print(io.dumps(report))
        return 0
    except GamowkitError as exc:
        _emit_error(exc, exc.exit_code)
        return exc.exit_code
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def _emit_error(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    line = getattr(exc, "line", None)
    if line is not None:
        payload["line"] = line
    if isinstance(exc, GamowkitError) and exc.exit_code == 3:
        payload["category"] = "domain"
    elif exc.exit_code == 4:
        payload["category"] = "numerical"
    else:
        payload["category"] = "validation"
    print(json.dumps(payload), file=sys.stderr)


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
