"""Command-line entry point.

Subcommands: derive, nogo, spectrum, simulate, compare, report.  Options
may come from a config file (INI-style, one section per subcommand, keys
named like the long flags); explicit flags win over the file.  Exit codes:
0 success, 1 runtime failure (for example a BoxOverflow mid-run), 2
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import benchmark
from .algebra import (
    GENERATOR_NAMES,
    OperatorPolynomial,
    ShiftOperatorPresent,
    UnsupportedMixing,
    heisenberg_rhs,
    hybridize,
    nogo_witness,
)
from .expressions import (
    ExpressionError,
    ParameterBinding,
    parse_polynomial,
)
from .grid import (
    AxisSpec,
    BoxOverflow,
    GridSpec,
    NonSplittableTerm,
    OutOfBox,
    UnknownAxis,
    compile_splitting,
    evolve,
    gaussian_state,
    marginal_density,
    save_snapshot,
    set_workers,
)
from .moments import (
    DegreeTooHigh,
    InsufficientData,
    NonlinearDynamics,
    classify_spectrum,
    fit_envelope,
    propagate_moments,
    quadratic_expectation,
)
from .reporting import (
    RunReport,
    aggregate_reports,
    read_csv,
    write_atomic,
    write_csv,
)

__all__ = ["main"]


class ConfigError(Exception):
    pass


_GRID_AXES = {"hybrid": ("x", "y", "q"), "quantum-quantum": ("x", "q")}
_DEFAULT_WIDTH = 1.0 / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Option plumbing.
# ---------------------------------------------------------------------------


def _parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _split_config_list(text: str) -> list[str]:
    parts: list[str] = []
    for chunk in text.replace(";", "\n").splitlines():
        chunk = chunk.strip()
        if chunk:
            parts.append(chunk)
    return parts


def _merge(args: argparse.Namespace, section: configparser.SectionProxy | None):
    """Fill argparse Nones from the config section, in place."""
    if section is None:
        return
    known = vars(args)
    for key in section:
        dest = key.replace("-", "_")
        if dest not in known:
            raise ConfigError(f"unknown config key {key!r} in section [{args.command}]")
        if known[dest] is None:
            args.__setattr__(dest, section[key])
        elif isinstance(known[dest], list) and not known[dest]:
            args.__setattr__(dest, _split_config_list(section[key]))


def _required(args, name, fallback=None):
    value = getattr(args, name.replace("-", "_"))
    if value is None:
        if fallback is None:
            raise ConfigError(f"missing required option --{name}")
        return fallback
    return value


def _as_float(value, name) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--{name} expects a number, got {value!r}") from exc


def _as_int(value, name) -> int:
    try:
        return int(str(value), 10)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--{name} expects an integer, got {value!r}") from exc


def _parse_pairs(items, what) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"{what} must look like name=value, got {item!r}")
        name, value = item.split("=", 1)
        name = name.strip()
        if not name:
            raise ConfigError(f"{what} has an empty name in {item!r}")
        out[name] = value.strip()
    return out


# ---------------------------------------------------------------------------
# Shared assembly.
# ---------------------------------------------------------------------------


def _mode_of(args) -> str:
    mode = _required(args, "mode", "hybrid")
    if mode not in benchmark.MODES:
        raise ConfigError(f"unknown mode {mode!r}; choose from {benchmark.MODES}")
    return mode


def _coupling_of(args) -> Fraction:
    raw = getattr(args, "k", None)
    if raw is None:
        return Fraction(1, 5)
    if isinstance(raw, Fraction):
        return raw
    return _parse_fraction(raw)


def _binding(args, k: Fraction) -> ParameterBinding:
    params = {"k": k}
    for name, value in _parse_pairs(getattr(args, "param", None), "--param").items():
        params[name] = _parse_fraction(value)
    try:
        return ParameterBinding(params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _explicit_generator(args, binding: ParameterBinding) -> OperatorPolynomial | None:
    koop = getattr(args, "koopmanian", None)
    ham = getattr(args, "hamiltonian", None)
    if koop is not None and ham is not None:
        raise ConfigError("give --koopmanian or --hamiltonian, not both")
    if koop is not None:
        return parse_polynomial(koop, binding)
    if ham is not None:
        return hybridize(parse_polynomial(ham, binding))
    return None


def _spectrum_summary(report) -> str:
    parts = []
    for line in report.lines:
        ev = line.eigenvalue
        parts.append(
            f"{ev.real:+.6g}{ev.imag:+.6g}i (alg {line.algebraic}, "
            f"geo {line.geometric}, chain {line.chain})"
        )
    tail = "secular growth" if report.secular else "no secular growth"
    return "; ".join(parts) + "; " + tail


def _observer_list(args, mode: str, k: Fraction, binding: ParameterBinding):
    raw = getattr(args, "observer", None) or []
    if not raw:
        return benchmark.default_observers(mode, k)
    observers = []
    for item in raw:
        label, _, expr = item.partition("=")
        if not expr:
            label, expr = item, item
        observers.append((label.strip(), parse_polynomial(expr.strip(), binding)))
    return observers


def _sample_times(dt: float, t_final: float, stride: int) -> tuple[np.ndarray, int]:
    steps_float = t_final / dt
    steps = int(round(steps_float))
    if steps < 1 or abs(steps_float - steps) > 1e-9:
        raise ConfigError(f"t-final {t_final} is not a whole number of dt {dt} steps")
    marks = [j for j in range(0, steps + 1) if j % stride == 0]
    if marks[-1] != steps:
        marks.append(steps)
    return np.array([j * dt for j in marks]), steps


def _simulation_settings(args):
    mode = _mode_of(args)
    k = _coupling_of(args)
    engine = _required(args, "engine", "moments")
    if engine not in ("moments", "grid", "both"):
        raise ConfigError(f"unknown engine {engine!r}; choose moments, grid, or both")
    dt = _as_float(_required(args, "dt", 0.01), "dt")
    if dt <= 0:
        raise ConfigError("--dt must be positive")
    t_final = _as_float(_required(args, "t-final", 10.0), "t-final")
    if t_final <= 0:
        raise ConfigError("--t-final must be positive")
    stride = _as_int(_required(args, "stride", 10), "stride")
    if stride < 1:
        raise ConfigError("--stride must be >= 1")
    grid_n = _as_int(_required(args, "grid-n", 64), "grid-n")
    grid_l = _as_float(_required(args, "grid-l", 8.0), "grid-l")
    means = {
        name: _as_float(value, "mean")
        for name, value in _parse_pairs(getattr(args, "mean", None), "--mean").items()
    }
    for name in means:
        if name not in ("q", "x", "y"):
            raise ConfigError(f"--mean supports q, x, y; got {name!r}")
    out_dir = _required(args, "out", "hybridlab-run")
    if _parse_bool(_required(args, "deterministic", False)):
        set_workers(1)
    binding = _binding(args, k)
    observers = _observer_list(args, mode, k, binding)
    times, steps = _sample_times(dt, t_final, stride)
    return argparse.Namespace(
        mode=mode,
        k=k,
        engine=engine,
        dt=dt,
        t_final=t_final,
        stride=stride,
        grid_n=grid_n,
        grid_l=grid_l,
        means=means,
        out_dir=out_dir,
        observers=observers,
        times=times,
        steps=steps,
        snapshot=_parse_bool(_required(args, "snapshot", False)),
        config_echo={
            "mode": mode,
            "k": str(k),
            "engine": engine,
            "dt": dt,
            "t_final": t_final,
            "stride": stride,
            "grid_n": grid_n,
            "grid_l": grid_l,
            "means": means,
            "observers": [label for label, _ in observers],
        },
    )


# ---------------------------------------------------------------------------
# Engines.
# ---------------------------------------------------------------------------


def _report_numbers(csv_path: str, labels):
    """Derive the report's numeric claims from the emitted CSV itself."""
    _, columns = read_csv(csv_path)
    t = columns["t"]
    norm_drift = None
    if "norm" in columns:
        norm_drift = float(np.max(np.abs(columns["norm"] - columns["norm"][0])))
    k_drift = None
    if "K" in columns:
        k0 = columns["K"][0]
        drift = float(np.max(np.abs(columns["K"] - k0)))
        k_drift = drift / abs(k0) if k0 != 0 else drift
    envelope = None
    if "q2" in columns:
        try:
            fit = fit_envelope(t, np.sqrt(np.maximum(columns["q2"], 0.0)))
            envelope = {
                "series": "sqrt(q2)",
                "degree": int(fit.degree),
                "coefficients": [float(c) for c in fit.coefficients],
                "relative_residual": float(fit.residual),
            }
        except InsufficientData:
            envelope = None
    return norm_drift, k_drift, envelope


def _write_spectrum(settings, out_dir: str):
    G = benchmark.mode_generator_matrix(settings.mode, settings.k)
    report = classify_spectrum(G)
    path = os.path.join(out_dir, "spectrum.json")
    write_atomic(path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return path, _spectrum_summary(report)


def _run_moments(settings, out_dir: str) -> RunReport:
    t0 = time.perf_counter()
    G = benchmark.mode_generator_matrix(settings.mode, settings.k)
    s0 = benchmark.default_moment_state(settings.means)
    columns = {label: [] for label, _ in settings.observers}
    for t in settings.times:
        state = propagate_moments(G, s0, float(t))
        for label, poly in settings.observers:
            columns[label].append(quadratic_expectation(poly, state))
    csv_path = os.path.join(out_dir, "moments.csv")
    write_csv(
        csv_path,
        ["t"] + list(columns),
        [settings.times] + [np.array(v) for v in columns.values()],
    )
    norm_drift, k_drift, envelope = _report_numbers(csv_path, list(columns))
    spectrum_path, spectrum_summary = _write_spectrum(settings, out_dir)
    report = RunReport(
        config=settings.config_echo,
        engine="moments",
        csv_path=csv_path,
        norm_drift=norm_drift,
        koopmanian_drift=k_drift,
        envelope=envelope,
        spectrum_path=spectrum_path,
        spectrum_summary=spectrum_summary,
        wall_seconds=time.perf_counter() - t0,
    )
    report.write(os.path.join(out_dir, "report-moments.json"))
    return report


def _grid_spec_for(settings) -> GridSpec:
    if settings.mode not in _GRID_AXES:
        raise ConfigError(
            "the grid engine supports hybrid and quantum-quantum runs; "
            "classical-classical moments close exactly, use --engine moments"
        )
    labels = _GRID_AXES[settings.mode]
    return GridSpec(
        tuple(AxisSpec(lbl, settings.grid_l, settings.grid_n) for lbl in labels)
    )


def _run_grid(settings, out_dir: str) -> RunReport:
    t0 = time.perf_counter()
    spec = _grid_spec_for(settings)
    K = benchmark.mode_koopmanian(settings.mode, settings.k)
    means = {lbl: settings.means.get(lbl, 0.0) for lbl in spec.labels}
    widths = {lbl: _DEFAULT_WIDTH for lbl in spec.labels}
    state = gaussian_state(spec, means, widths)
    plan = compile_splitting(K, spec, settings.dt)
    result = evolve(
        state,
        plan,
        settings.t_final,
        observers=settings.observers,
        stride=settings.stride,
    )
    csv_path = os.path.join(out_dir, "grid.csv")
    write_csv(
        csv_path,
        ["t", "norm"] + list(result.labels),
        [result.times, result.norms]
        + [result.values[:, i] for i in range(len(result.labels))],
    )
    if settings.snapshot:
        _write_snapshots(result.final_state, out_dir)
    norm_drift, k_drift, envelope = _report_numbers(csv_path, list(result.labels))
    spectrum_path, spectrum_summary = _write_spectrum(settings, out_dir)
    report = RunReport(
        config=settings.config_echo,
        engine="grid",
        csv_path=csv_path,
        norm_drift=norm_drift,
        koopmanian_drift=k_drift,
        envelope=envelope,
        spectrum_path=spectrum_path,
        spectrum_summary=spectrum_summary,
        wall_seconds=time.perf_counter() - t0,
        extra={"max_imag_residual": float(np.max(result.imag_residuals))
               if result.imag_residuals.size else 0.0},
    )
    report.write(os.path.join(out_dir, "report-grid.json"))
    return report


def _write_snapshots(final_state, out_dir: str) -> None:
    spec = final_state.spec
    for label in spec.labels:
        ax = spec.axis(label)
        data = marginal_density(final_state, (label,))
        save_snapshot(
            os.path.join(out_dir, f"marginal-{label}.bin"),
            [label], [ax.points], [ax.half_extent], data,
        )
    if {"x", "y"} <= set(spec.labels):
        axes = [spec.axis("x"), spec.axis("y")]
        data = marginal_density(final_state, ("x", "y"))
        save_snapshot(
            os.path.join(out_dir, "marginal-xy.bin"),
            ["x", "y"],
            [a.points for a in axes],
            [a.half_extent for a in axes],
            data,
        )


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------


def _cmd_derive(args) -> int:
    k = _coupling_of(args)
    binding = _binding(args, k)
    generator_poly = _explicit_generator(args, binding)
    if generator_poly is None:
        mode = _mode_of(args)
        if mode == "classical-classical":
            raise ConfigError(
                "derive prints Heisenberg equations of an operator generator; "
                "classical-classical has none here (pass --koopmanian explicitly)"
            )
        generator_poly = benchmark.mode_koopmanian(mode, k)
    print(f"K = {generator_poly}")
    for name in GENERATOR_NAMES:
        rhs = heisenberg_rhs(OperatorPolynomial.generator(name), generator_poly)
        print(f"d{name}/dt = {rhs}")
    return 0


def _cmd_nogo(args) -> int:
    k = _coupling_of(args)
    witness = nogo_witness(k)
    if witness.is_zero:
        print("witness = 0: OK")
    else:
        print(
            f"witness = {witness}: FAIL "
            "(-i*k != 0: no Koopmanian yields both target commutators)"
        )
    return 0


def _cmd_spectrum(args) -> int:
    k = _coupling_of(args)
    binding = _binding(args, k)
    explicit = _explicit_generator(args, binding)
    if explicit is not None:
        from .moments import derive_generator

        G = derive_generator(explicit)
    else:
        G = benchmark.mode_generator_matrix(_mode_of(args), k)
    tol = _as_float(_required(args, "tol", 1e-9), "tol")
    report = classify_spectrum(G, tol)
    for line in report.lines:
        ev = line.eigenvalue
        print(
            f"eigenvalue {ev.real:+.12g}{ev.imag:+.12g}i: "
            f"algebraic {line.algebraic}, geometric {line.geometric}, "
            f"Jordan chain {line.chain}"
        )
    print("secular growth:", "yes" if report.secular else "no")
    json_path = getattr(args, "json", None)
    if json_path:
        write_atomic(json_path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        print(f"wrote {json_path}")
    return 0


def _cmd_simulate(args) -> int:
    settings = _simulation_settings(args)
    out_dir = settings.out_dir
    os.makedirs(out_dir, exist_ok=True)
    reports = []
    if settings.engine in ("moments", "both"):
        reports.append(_run_moments(settings, out_dir))
    if settings.engine in ("grid", "both"):
        reports.append(_run_grid(settings, out_dir))
    for report in reports:
        print(f"[{report.engine}] wrote {report.csv_path}")
        if report.norm_drift is not None:
            print(f"[{report.engine}] norm drift {report.norm_drift:.3e}")
        if report.koopmanian_drift is not None:
            print(f"[{report.engine}] K drift {report.koopmanian_drift:.3e}")
        if report.envelope:
            print(
                f"[{report.engine}] sqrt(q2) envelope degree {report.envelope['degree']} "
                f"(residual {report.envelope['relative_residual']:.2e})"
            )
    return 0


def _cmd_compare(args) -> int:
    settings = _simulation_settings(args)
    out_dir = settings.out_dir
    os.makedirs(out_dir, exist_ok=True)
    moments_report = _run_moments(settings, out_dir)
    grid_report = _run_grid(settings, out_dir)
    _, mcols = read_csv(moments_report.csv_path)
    _, gcols = read_csv(grid_report.csv_path)
    if not np.array_equal(mcols["t"], gcols["t"]):
        raise ConfigError("engines sampled different time points; same dt/stride required")
    shared = [name for name in mcols if name != "t" and name in gcols]
    deviations = [float(np.max(np.abs(mcols[name] - gcols[name]))) for name in shared]
    table_path = os.path.join(out_dir, "compare.csv")
    write_atomic(
        table_path,
        "observable,max_abs_deviation\n"
        + "".join(f"{n},{format(d, '.17g')}\n" for n, d in zip(shared, deviations)),
    )
    print(f"{'observable':<12} max |moments - grid|")
    for name, dev in zip(shared, deviations):
        print(f"{name:<12} {dev:.6e}")
    print(f"wrote {table_path}")
    summary = {
        "observables": dict(zip(shared, deviations)),
        "max_deviation": max(deviations) if deviations else 0.0,
        "moments_csv": moments_report.csv_path,
        "grid_csv": grid_report.csv_path,
    }
    write_atomic(
        os.path.join(out_dir, "compare.json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    return 0


def _cmd_report(args) -> int:
    run_dirs = getattr(args, "runs", None) or []
    if not run_dirs:
        raise ConfigError("report needs at least one run directory")
    paths = []
    for d in run_dirs:
        if not os.path.isdir(d):
            raise ConfigError(f"not a directory: {d}")
        found = sorted(
            os.path.join(d, name)
            for name in os.listdir(d)
            if name.startswith("report-") and name.endswith(".json")
        )
        if not found:
            raise ConfigError(f"no report-*.json files in {d}")
        paths.extend(found)
    combined, markdown = aggregate_reports(paths)
    out_dir = _required(args, "out", ".")
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, "summary.json")
    md_path = os.path.join(out_dir, "summary.md")
    write_atomic(json_path, json.dumps(combined, indent=2, sort_keys=True) + "\n")
    write_atomic(md_path, markdown + "\n")
    print(markdown)
    print(f"wrote {json_path} and {md_path}")
    return 0


# ---------------------------------------------------------------------------
# Parser.
# ---------------------------------------------------------------------------


def _add_expression_flags(sub):
    sub.add_argument("--koopmanian", help="evolution generator expression")
    sub.add_argument("--hamiltonian", help="total Hamiltonian to hybridize first")
    sub.add_argument("--param", action="append", default=[],
                     help="bind NAME=VALUE in expressions (repeatable)")


def _add_mode_flags(sub):
    sub.add_argument("--mode", help="classical-classical | quantum-quantum | hybrid")
    sub.add_argument("--k", help="coupling constant (exact: 0.2 or 1/5)")


def _add_sim_flags(sub):
    _add_mode_flags(sub)
    sub.add_argument("--engine", help="moments | grid | both")
    sub.add_argument("--dt", help="time step (default 0.01)")
    sub.add_argument("--t-final", help="total time (default 10)")
    sub.add_argument("--stride", help="sample every N steps (default 10)")
    sub.add_argument("--grid-n", help="points per axis, power of two (default 64)")
    sub.add_argument("--grid-l", help="half extent per axis (default 8)")
    sub.add_argument("--observer", action="append", default=[],
                     help="LABEL=EXPR column (repeatable; default benchmark set)")
    sub.add_argument("--mean", action="append", default=[],
                     help="initial mean, e.g. q=1.0 (repeatable; q, x, y)")
    sub.add_argument("--param", action="append", default=[],
                     help="bind NAME=VALUE in observer expressions (repeatable)")
    sub.add_argument("--out", help="output directory (default hybridlab-run)")
    sub.add_argument("--snapshot", nargs="?", const="true",
                     help="write binary marginal snapshots of the final state")
    sub.add_argument("--deterministic", nargs="?", const="true",
                     help="force single-threaded transforms")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridlab",
        description="Symbolic and numerical laboratory for coupled "
        "classical-quantum oscillator dynamics.",
    )
    parser.add_argument("--config", help="INI config file with per-subcommand sections")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("derive", help="print the Heisenberg equations")
    _add_expression_flags(sub)
    _add_mode_flags(sub)
    sub.set_defaults(func=_cmd_derive)

    sub = commands.add_parser("nogo", help="print the Jacobi obstruction witness")
    sub.add_argument("--k", help="coupling constant")
    sub.set_defaults(func=_cmd_nogo)

    sub = commands.add_parser("spectrum", help="classify the dynamics generator")
    _add_expression_flags(sub)
    _add_mode_flags(sub)
    sub.add_argument("--tol", help="eigenvalue clustering tolerance (default 1e-9)")
    sub.add_argument("--json", help="also write the report as JSON to this path")
    sub.set_defaults(func=_cmd_spectrum)

    sub = commands.add_parser("simulate", help="run the moment and/or grid engine")
    _add_sim_flags(sub)
    sub.set_defaults(func=_cmd_simulate)

    sub = commands.add_parser("compare", help="run both engines and tabulate deviations")
    _add_sim_flags(sub)
    sub.set_defaults(func=_cmd_compare)

    sub = commands.add_parser("report", help="aggregate run directories into a summary")
    sub.add_argument("--runs", action="append", default=[],
                     help="run directory (repeatable)")
    sub.add_argument("--out", help="where to write summary.json / summary.md")
    sub.set_defaults(func=_cmd_report)
    return parser


_CONFIG_EXIT_2 = (
    ConfigError,
    ExpressionError,
    UnsupportedMixing,
    ShiftOperatorPresent,
    NonlinearDynamics,
    DegreeTooHigh,
    NonSplittableTerm,
    UnknownAxis,
    OutOfBox,
    ValueError,
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.config is not None:
            reader = configparser.ConfigParser()
            try:
                with open(args.config) as fh:
                    reader.read_file(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from exc
            except configparser.Error as exc:
                raise ConfigError(f"bad config file: {exc}") from exc
            section = reader[args.command] if reader.has_section(args.command) else None
            _merge(args, section)
        return args.func(args)
    except BoxOverflow as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1
    except _CONFIG_EXIT_2 as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
