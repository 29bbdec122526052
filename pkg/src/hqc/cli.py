"""Command-line surface: spectrum reports, holonomies, oracle runs, gates.

Floats in every emitted file are rendered as %.12e and object keys keep a
fixed order, so identical inputs and tolerances reproduce output files byte
for byte.  Relative output paths are resolved against $HQC_OUTPUT_DIR when
that variable is set.
"""

from __future__ import annotations

import argparse
import math
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import catalog
from .connection import connection_closed_form_along
from .errors import (
    BasePointMismatchError,
    ChartBoundaryError,
    ChartInvalidError,
    HermiticityError,
    HqcError,
    LevelCrossingError,
    ModelFormatError,
    NonUnitaryError,
    OpenLoopError,
    OverlapRankError,
    ParameterCountError,
    SectorTooLargeError,
)
from .frames import frame_path
from .gates import GateSequence, decompose_su_n, positive_root_count
from .holonomy import holonomy_pexp, holonomy_projector, solid_angle
from .matutil import max_abs
from .model import (
    ModelSpec,
    SamplesLoop,
    SphereCircleLoop,
    eigen_decompose,
    evaluate_hamiltonian,
    isospectrality_check,
    load_loop,
    load_model,
    sample_loop,
)
from .oracle import LEAKAGE_TOL_DEFAULT, convergence_sweep, run_oracle

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CHART = 3
EXIT_LEAKAGE = 4

VALIDATION_ERRORS = (
    ModelFormatError,
    HermiticityError,
    ParameterCountError,
    NonUnitaryError,
    SectorTooLargeError,
)
CHART_ERRORS = (
    ChartInvalidError,
    ChartBoundaryError,
    LevelCrossingError,
    OpenLoopError,
    OverlapRankError,
    BasePointMismatchError,
)


@dataclass
class RunConfig:
    """Parsed command-line options for one run."""

    command: str
    model_path: str | None = None
    loop_path: str | None = None
    level: int = 0
    steps: int | None = None
    duration: float | None = None
    cross_check: bool = False
    sweep: str | None = None
    output: str | None = None
    fmt: str = "json"
    method: str = "pexp"
    degeneracy_tol: float | None = None
    chart_threshold: float = 1e-6
    h_fd: float = 1e-6
    leakage_tol: float = LEAKAGE_TOL_DEFAULT
    target_path: str | None = None
    root_count: int | None = None

    def validate(self) -> None:
        if self.steps is not None and self.steps < 3:
            raise ModelFormatError("--steps must be at least 3")
        for name, value in (("--degeneracy-tol", self.degeneracy_tol),
                            ("--chart-threshold", self.chart_threshold),
                            ("--h-fd", self.h_fd),
                            ("--leakage-tol", self.leakage_tol)):
            if value is not None and value <= 0:
                raise ModelFormatError(f"{name} must be positive")
        if self.duration is not None and self.duration <= 0:
            raise ModelFormatError("--duration must be positive")
        if self.level < 0:
            raise ModelFormatError("--level must be nonnegative")


# ---------------------------------------------------------------------------
# deterministic serialization


def format_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return f"{x:.12e}"


def _dump(obj, indent: int) -> str:
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f'{pad}  {json.dumps(str(k))}: {_dump(v, indent + 2)}'
                for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_dump(v, 0) for v in obj) + "]"
        rows = [pad + "  " + _dump(v, indent + 2) for v in obj]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_deterministic(obj) -> str:
    return _dump(obj, 0) + "\n"


def complex_matrix_json(u: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(u)]


def resolve_output(path: str) -> str:
    base = os.environ.get("HQC_OUTPUT_DIR")
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def write_text(path: str, text: str) -> str:
    path = resolve_output(path)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def write_csv(path: str, header: str, rows) -> str:
    lines = [header]
    lines.extend(",".join(cells) for cells in rows)
    return write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# input loading


def load_model_arg(arg: str) -> ModelSpec:
    if os.path.exists(arg):
        return load_model(arg)
    if arg in catalog.BUILTIN_MODELS:
        return catalog.BUILTIN_MODELS[arg]()
    raise ModelFormatError(
        f"model {arg!r} is neither a file nor a builtin "
        f"({', '.join(sorted(catalog.BUILTIN_MODELS))})")


def load_loop_arg(arg: str):
    if os.path.exists(arg):
        return load_loop(arg)
    if arg in catalog.BUILTIN_LOOPS:
        return catalog.BUILTIN_LOOPS[arg]()
    raise ModelFormatError(
        f"loop {arg!r} is neither a file nor a builtin "
        f"({', '.join(sorted(catalog.BUILTIN_LOOPS))})")


def apply_loop_overrides(loop, config: RunConfig):
    if config.steps is not None:
        if isinstance(loop, SamplesLoop):
            raise ModelFormatError(
                "--steps cannot override a loop given as explicit samples")
        loop = replace(loop, samples=int(config.steps))
    if config.duration is not None:
        loop = replace(loop, duration=float(config.duration))
    return loop


# ---------------------------------------------------------------------------
# spectrum


def cmd_spectrum(config: RunConfig) -> int:
    model = load_model_arg(config.model_path)
    loop = None
    if config.loop_path is not None:
        loop = apply_loop_overrides(load_loop_arg(config.loop_path), config)
    # levels at the loop base point when a loop is given: a linear family
    # can be reported degenerate at the all-zero parameter point even
    # though it is gapped everywhere along the loop
    lam0 = (sample_loop(loop).points[0] if loop is not None
            else np.zeros(model.num_params))
    spectral, _ = eigen_decompose(evaluate_hamiltonian(model, lam0),
                                  degeneracy_tol=config.degeneracy_tol)
    gaps = np.diff(np.asarray(spectral.energies))
    omega_min = float(np.min(gaps)) if gaps.size else float("inf")

    report = {
        "n": model.n,
        "form": model.form,
        "num_params": model.num_params,
        "energies": [float(e) for e in spectral.energies],
        "degeneracies": [int(d) for d in spectral.degeneracies],
        "omega_min": omega_min,
        "isospectral": None,
        "max_deviation": None,
    }
    code = EXIT_OK
    if loop is not None:
        iso = isospectrality_check(model, loop)
        report["isospectral"] = bool(iso.passed)
        report["max_deviation"] = float(iso.max_deviation)
        if not iso.passed:
            print(f"spectrum drift: {iso.message}", file=sys.stderr)
            code = EXIT_VALIDATION

    levels = " ".join(
        f"E{k}={e:+.6f}(d={d})"
        for k, (e, d) in enumerate(zip(spectral.energies,
                                       spectral.degeneracies)))
    print(f"n={model.n} form={model.form} {levels} omega_min={omega_min:.6f}")
    if report["isospectral"] is not None:
        print(f"isospectral={report['isospectral']} "
              f"max_deviation={report['max_deviation']:.3e}")

    if config.output:
        if config.fmt == "csv":
            rows = [(str(k), format_float(e), str(d))
                    for k, (e, d) in enumerate(zip(report["energies"],
                                                   report["degeneracies"]))]
            path = write_csv(config.output, "index,energy,degeneracy", rows)
        else:
            path = write_text(config.output, dumps_deterministic(report))
        print(f"wrote {path}")
    return code


# ---------------------------------------------------------------------------
# holonomy


def holonomy_result_dict(hol, loop, cross=None) -> dict:
    gamma = hol.abelian_phase() if hol.degeneracy == 1 else None
    result = {
        "level": hol.level_index,
        "method": hol.method,
        "steps": hol.steps,
        "U": complex_matrix_json(hol.matrix),
        "gamma_abelian": gamma,
        "unitarity_residual": float(hol.unitarity_residual),
        "solid_angle": (solid_angle(loop)
                        if isinstance(loop, SphereCircleLoop) else None),
    }
    if cross is not None:
        result["projector"] = {
            "U": complex_matrix_json(cross.matrix),
            "unitarity_residual": float(cross.unitarity_residual),
            "pre_unitarization_distance":
                float(cross.pre_unitarization_distance),
        }
        result["cross_check_gap"] = float(max_abs(hol.matrix - cross.matrix))
    return result


def connection_trace_rows(model: ModelSpec, path):
    """Connection components at every loop sample, one csv row per entry."""
    times = path.samples.times
    rows = []
    for seg in path.segments:
        sl = slice(seg.start, seg.stop + 1)
        comps, _ = connection_closed_form_along(
            model, path.samples.points[sl], path.energies[sl],
            path.degeneracy, seg.chart)
        for k, t in enumerate(times[sl]):
            for a_dir in range(comps.shape[1]):
                for i in range(comps.shape[2]):
                    for j in range(comps.shape[3]):
                        v = comps[k, a_dir, i, j]
                        rows.append((format_float(float(t)), str(a_dir),
                                     str(i), str(j),
                                     format_float(float(v.real)),
                                     format_float(float(v.imag))))
    return rows


def cmd_holonomy(config: RunConfig) -> int:
    model = load_model_arg(config.model_path)
    if config.loop_path is None:
        raise ModelFormatError("holonomy needs --loop")
    loop = apply_loop_overrides(load_loop_arg(config.loop_path), config)
    path = frame_path(model, loop, config.level,
                      threshold_factor=config.chart_threshold)
    hol = (holonomy_pexp(model, path, config.level, h_fd=config.h_fd)
           if config.method == "pexp"
           else holonomy_projector(model, path, config.level))
    cross = None
    if config.cross_check:
        cross = (holonomy_projector(model, path, config.level)
                 if config.method == "pexp"
                 else holonomy_pexp(model, path, config.level,
                                    h_fd=config.h_fd))
    result = holonomy_result_dict(hol, loop, cross)

    if result["gamma_abelian"] is not None:
        print(f"level={hol.level_index} gamma={result['gamma_abelian']:+.9f} "
              f"(mod 2pi) steps={hol.steps}")
    else:
        print(f"level={hol.level_index} d={hol.degeneracy} "
              f"holonomy computed, steps={hol.steps}")
    print(f"unitarity_residual={hol.unitarity_residual:.3e} "
          f"charts={sorted(set(int(c) for c in path.chart_ids))}")
    if cross is not None:
        print(f"cross_check_gap={result['cross_check_gap']:.3e}")

    if config.output:
        if config.fmt == "csv":
            path_conn = write_csv(config.output, "t,A,a,b,re,im",
                                  connection_trace_rows(model, path))
            stem, ext = os.path.splitext(config.output)
            det_rows = [
                (format_float(float(t)), format_float(float(d.real)),
                 format_float(float(d.imag)), str(int(c)))
                for t, d, c in zip(path.samples.times, path.determinants,
                                   path.chart_ids)
            ]
            path_det = write_csv(stem + ".dets" + (ext or ".csv"),
                                 "t,det_re,det_im,chart_id", det_rows)
            print(f"wrote {path_conn} and {path_det}")
        else:
            out = write_text(config.output, dumps_deterministic(result))
            print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


def oracle_result_dict(res, hol) -> dict:
    gamma = (float(np.angle(res.holonomy[0, 0]))
             if res.holonomy.shape[0] == 1 else None)
    return {
        "level": res.level_index,
        "method": "oracle",
        "steps": res.steps,
        "U": complex_matrix_json(res.holonomy),
        "gamma_abelian": gamma,
        "unitarity_residual": 0.0,
        "T": float(res.duration),
        "energy": float(res.energy),
        "dynamical_phase": [float(res.dynamical_phase.real),
                            float(res.dynamical_phase.imag)],
        "leakage": float(res.leakage),
        "flagged": bool(res.flagged),
        "pre_unitarization_distance": float(res.pre_unitarization_distance),
        "discrepancy_vs_geometry": float(max_abs(res.holonomy - hol.matrix)),
    }


def cmd_oracle(config: RunConfig) -> int:
    model = load_model_arg(config.model_path)
    if config.loop_path is None:
        raise ModelFormatError("oracle needs --loop")
    loop = apply_loop_overrides(load_loop_arg(config.loop_path), config)

    if config.sweep:
        durations = [float(tok) for tok in config.sweep.split(",") if tok]
        if len(durations) < 2:
            raise ModelFormatError("--sweep needs at least two durations")
        sweep = convergence_sweep(model, loop, config.level,
                                  durations, steps=config.steps,
                                  leakage_tol=config.leakage_tol)
        result = {
            "level": config.level,
            "method": "oracle_sweep",
            "durations": [float(t) for t in sweep.durations],
            "discrepancies": [float(x) for x in sweep.discrepancies],
            "leakages": [float(x) for x in sweep.leakages],
            "exponent": float(sweep.exponent),
            "fit_residual": float(sweep.fit_residual),
            "reliable": bool(sweep.reliable),
            "monotone": bool(sweep.monotone),
            "floor": float(sweep.floor),
            "geometry_method": sweep.geometry_method,
        }
        print("T:            " + " ".join(f"{t:.3e}" for t in sweep.durations))
        print("discrepancy:  "
              + " ".join(f"{x:.3e}" for x in sweep.discrepancies))
        print(f"exponent={sweep.exponent:+.4f} monotone={sweep.monotone} "
              f"reliable={sweep.reliable}")
        if config.output:
            if config.fmt == "csv":
                rows = [(format_float(t), format_float(x), format_float(l))
                        for t, x, l in zip(result["durations"],
                                           result["discrepancies"],
                                           result["leakages"])]
                out = write_csv(config.output, "duration,discrepancy,leakage",
                                rows)
            else:
                out = write_text(config.output, dumps_deterministic(result))
            print(f"wrote {out}")
        return EXIT_OK

    res = run_oracle(model, loop, config.level, steps=config.steps,
                     leakage_tol=config.leakage_tol, record_series=True)
    path = frame_path(model, loop, config.level,
                      threshold_factor=config.chart_threshold)
    hol = holonomy_pexp(model, path, config.level, h_fd=config.h_fd)
    result = oracle_result_dict(res, hol)

    print(f"level={res.level_index} T={res.duration:g} "
          f"leakage={res.leakage:.3e} flagged={res.flagged}")
    print(f"discrepancy_vs_geometry={result['discrepancy_vs_geometry']:.3e} "
          f"pre_unitarization_distance={res.pre_unitarization_distance:.3e}")

    if config.output:
        if config.fmt == "csv":
            series = res.series
            rows = [(format_float(float(t)), format_float(float(l)),
                     format_float(float(o)))
                    for t, l, o in zip(series.times, series.leakage,
                                       series.overlap_norm)]
            out = write_csv(config.output, "t,leakage,overlap_norm", rows)
        else:
            out = write_text(config.output, dumps_deterministic(result))
        print(f"wrote {out}")

    if res.flagged:
        print(f"leakage {res.leakage:.3e} above {config.leakage_tol:g}: "
              "results written but flagged", file=sys.stderr)
        return EXIT_LEAKAGE
    return EXIT_OK


# ---------------------------------------------------------------------------
# gates


def load_target_unitary(path: str) -> np.ndarray:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"cannot read target file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"target JSON syntax error at line {exc.lineno}: {exc.msg}"
        ) from exc
    if isinstance(data, dict):
        data = data.get("matrix", data.get("U"))
    if data is None:
        raise ModelFormatError('target file needs a "matrix" field')
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3 and arr.shape[2] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        return arr.astype(complex)
    raise ModelFormatError(
        "target matrix must be square, complex entries as [re, im] pairs")


def cmd_gates(config: RunConfig) -> int:
    if config.root_count is not None:
        if config.root_count < 2:
            raise ModelFormatError("--root-count needs n >= 2")
        count = positive_root_count(config.root_count)
        print(f"positive roots for su({config.root_count}): {count}")
        if config.output:
            out = write_text(config.output, dumps_deterministic(
                {"n": config.root_count, "positive_roots": count}))
            print(f"wrote {out}")
        return EXIT_OK

    if config.target_path is None:
        raise ModelFormatError("gates needs --target FILE or --root-count N")
    target = load_target_unitary(config.target_path)
    seq = decompose_su_n(target)
    residual = float(max_abs(seq.reconstruct() - target))
    result = {
        "n": seq.n,
        "cartan": [float(v) for v in seq.cartan],
        "gates": [{"i": g.i, "j": g.j,
                   "zeta": [float(g.zeta.real), float(g.zeta.imag)]}
                  for g in seq.gates],
        "reconstruction_residual": residual,
    }
    print(f"n={seq.n} gates={len(seq.gates)} "
          f"reconstruction_residual={residual:.3e}")
    if config.output:
        if config.fmt == "csv":
            rows = [("cartan", str(k + 1), "0", format_float(v), "0")
                    for k, v in enumerate(result["cartan"])]
            rows += [("gate", str(g["i"]), str(g["j"]),
                      format_float(g["zeta"][0]), format_float(g["zeta"][1]))
                     for g in result["gates"]]
            out = write_csv(config.output, "kind,i,j,re,im", rows)
        else:
            out = write_text(config.output, dumps_deterministic(result))
        print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hqc",
        description="Berry phases and non-Abelian holonomies for "
                    "finite-level isospectral Hamiltonian families.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_loop=True):
        p.add_argument("--model", required=True,
                       help="model JSON file or builtin name")
        p.add_argument("--loop", required=needs_loop,
                       help="loop JSON file or builtin name")
        p.add_argument("--level", type=int, default=0,
                       help="level index, 0-based, ascending energy")
        p.add_argument("--steps", type=int, default=None,
                       help="override the loop sample count")
        p.add_argument("--duration", type=float, default=None,
                       help="override the loop traversal time")
        p.add_argument("--output", default=None, help="output file path")
        p.add_argument("--format", dest="fmt", choices=("json", "csv"),
                       default="json")
        p.add_argument("--degeneracy-tol", type=float, default=None)
        p.add_argument("--chart-threshold", type=float, default=1e-6,
                       help="relative minor-determinant floor for charts")
        p.add_argument("--h-fd", type=float, default=1e-6,
                       help="finite-difference step for derivatives")
        p.add_argument("--leakage-tol", type=float,
                       default=LEAKAGE_TOL_DEFAULT)

    p_spec = sub.add_parser("spectrum",
                            help="levels, degeneracies, isospectrality")
    common(p_spec, needs_loop=False)

    p_hol = sub.add_parser("holonomy", help="geometric holonomy of a loop")
    common(p_hol)
    p_hol.add_argument("--method", choices=("pexp", "projector"),
                       default="pexp")
    p_hol.add_argument("--cross-check", action="store_true",
                       help="also run the other method and report the gap")

    p_or = sub.add_parser("oracle",
                          help="adiabatic Schrodinger evolution comparison")
    common(p_or)
    p_or.add_argument("--sweep", default=None,
                      help="comma-separated traversal times")

    p_gates = sub.add_parser("gates", help="Cartan-Weyl gate synthesis")
    p_gates.add_argument("--target", default=None,
                         help="JSON file with the target special unitary")
    p_gates.add_argument("--root-count", type=int, default=None,
                         help="print the positive-root count for su(n)")
    p_gates.add_argument("--output", default=None)
    p_gates.add_argument("--format", dest="fmt", choices=("json", "csv"),
                         default="json")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        model_path=getattr(args, "model", None),
        loop_path=getattr(args, "loop", None),
        level=getattr(args, "level", 0),
        steps=getattr(args, "steps", None),
        duration=getattr(args, "duration", None),
        cross_check=getattr(args, "cross_check", False),
        sweep=getattr(args, "sweep", None),
        output=getattr(args, "output", None),
        fmt=getattr(args, "fmt", "json"),
        method=getattr(args, "method", "pexp"),
        degeneracy_tol=getattr(args, "degeneracy_tol", None),
        chart_threshold=getattr(args, "chart_threshold", 1e-6),
        h_fd=getattr(args, "h_fd", 1e-6),
        leakage_tol=getattr(args, "leakage_tol", LEAKAGE_TOL_DEFAULT),
        target_path=getattr(args, "target", None),
        root_count=getattr(args, "root_count", None),
    )


COMMANDS = {
    "spectrum": cmd_spectrum,
    "holonomy": cmd_holonomy,
    "oracle": cmd_oracle,
    "gates": cmd_gates,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = config_from_args(args)
    try:
        config.validate()
        return COMMANDS[config.command](config)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CHART_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHART
    except HqcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
