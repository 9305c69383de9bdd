import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields
from functools import partial
from typing import List, Optional, Sequence

import numpy as np

from .batch import map_ordered
from .config import RunConfig, describe, load_config
from .errors import DiracError, ValidationError, VerificationError, exit_code_for
from .inverse import (
    WeylLineData,
    borg_marchenko_check,
    compare_potentials,
    inverse_pipeline,
    shape_from_header,
    weyl_line_data,
    write_weyl_csv,
)
from .nls import SolutionModel, evolve_R, evolve_weyl
from .potential import (
    PotentialGrid,
    SpectralPoint,
    format_number,
    read_csv_header,
    read_numeric_csv,
)
from .verify import CHECKS, json_ready, report_json, run_suite
from .weyl import constant_weyl_function, pair_representative, weyl_function

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

DEFAULT_OUTPUTS = {
    "direct": "weyl.csv",
    "inverse": "potential.csv",
    "roundtrip": "roundtrip.json",
    "evolve": "evolution.csv",
    "bm-check": "bm.json",
}


def parse_range(text: str, name: str = "range") -> np.ndarray:
    """Parse ``start:stop:count`` into ``count`` evenly spaced values."""
    parts = text.split(":")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        count = 0
    if len(parts) != 3 or count < 1:
        raise ValidationError(
            f"{name} must look like start:stop:count, got '{text}'", module=__name__
        )
    return np.linspace(start, stop, count)


def parse_zgrid(text: str) -> List[complex]:
    """Parse ``re0:re1:nre,im0:im1:nim``; points run over Re z fastest."""
    try:
        real_part, imag_part = text.split(",")
    except ValueError:
        raise ValidationError(
            f"zgrid must look like re0:re1:nre,im0:im1:nim, got '{text}'", module=__name__
        )
    res = parse_range(real_part, "zgrid real part")
    ims = parse_range(imag_part, "zgrid imaginary part")
    return [complex(re, im) for im in ims for re in res]


def parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ValidationError(
            f"cannot read '{text}' as a complex number", module=__name__
        )


def load_potential(path: Optional[str], n: Optional[int] = None) -> PotentialGrid:
    """Potential from a JSON descriptor; ``n`` replaces the descriptor's grid size."""
    if not path:
        raise ValidationError("this subcommand needs --potential", module=__name__)
    try:
        with open(path, "r") as fh:
            descriptor = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read descriptor {path}: {exc}", module=__name__)
    if descriptor.get("kind") == "csv":
        relative = descriptor.get("path")
        if relative and not os.path.isabs(relative):
            base_dir = os.path.dirname(os.path.abspath(path))
            descriptor["path"] = os.path.join(base_dir, relative)
    elif n is not None:
        descriptor["n"] = n
    return PotentialGrid.from_descriptor(descriptor)


def output_path(config: RunConfig) -> str:
    return config.out or DEFAULT_OUTPUTS[config.subcommand]


def write_json(path: str, payload) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(json_ready(payload), indent=2, sort_keys=True) + "\n")


def _direct_point(
    grid: PotentialGrid, target_radius: float, margin: float, z: complex
):
    sample = weyl_function(grid, z, target_radius=target_radius, margin=margin)
    return sample.phi, sample.error_bound, sample.truncated


def run_direct(config: RunConfig) -> int:
    grid = load_potential(config.potential)
    points = parse_zgrid(config.zgrid)
    for index, z in enumerate(points):
        SpectralPoint(z, grid.norm_bound).require_margin(
            config.margin, module=__name__, index=index
        )
    results = map_ordered(
        partial(_direct_point, grid, config.target_radius, config.margin),
        points,
        processes=config.workers,
        desc="direct",
        progress=True,
    )
    truncated = sum(flag for _, _, flag in results)
    if truncated:
        logger.warning(
            f"{truncated} of {len(points)} samples did not reach the target radius"
        )
    path = output_path(config)
    phis = [phi for phi, _, _ in results]
    bounds = [bound for _, bound, _ in results]
    write_weyl_csv(path, points, phis, bounds)
    logger.info(f"Wrote {len(points)} Weyl samples to {path}")
    return 0


def write_potential_csv(
    path: str, x: np.ndarray, v: np.ndarray, low_confidence: np.ndarray
) -> None:
    m1, m2 = v.shape[1:]
    header = ["x"]
    for i in range(m1):
        for k in range(m2):
            header += [f"re_v_{i}_{k}", f"im_v_{i}_{k}"]
    header.append("low_confidence")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for node, block, flag in zip(x, v, low_confidence):
            row = [format_number(node)]
            for entry in block.reshape(-1):
                row += [format_number(entry.real), format_number(entry.imag)]
            row.append("1" if flag else "0")
            writer.writerow(row)


def run_inverse(config: RunConfig) -> int:
    if config.weyl:
        if config.l is None:
            raise ValidationError("inverse --weyl needs --l", module=__name__)
        data = WeylLineData.from_csv(config.weyl, norm_bound=config.norm_bound or 0.0)
        l = config.l
    else:
        grid = load_potential(config.potential, config.n)
        data = weyl_line_data(
            grid,
            eta=config.eta,
            a=config.a,
            xi_step=config.xi_step,
            continuation=config.continuation,
            processes=config.workers,
            progress=True,
        )
        l = grid.l
        weyl_path = os.path.splitext(output_path(config))[0] + ".weyl.csv"
        data.to_csv(weyl_path)
        logger.info(f"Wrote the synthesized Weyl line data to {weyl_path}")
    recovered = inverse_pipeline(
        data,
        l,
        config.n,
        tol_fourier=config.tol_fourier,
        tail_moments=config.tail_moments,
    )
    path = output_path(config)
    write_potential_csv(path, recovered.x, recovered.v, recovered.low_confidence)
    write_json(os.path.splitext(path)[0] + ".diagnostics.json", recovered.diagnostics)
    logger.info(f"Wrote the recovered potential to {path}")
    return 0


def run_roundtrip(config: RunConfig) -> int:
    planted = load_potential(config.potential, config.n)
    data = weyl_line_data(
        planted,
        eta=config.eta,
        a=config.a,
        xi_step=config.xi_step,
        continuation=config.continuation,
        processes=config.workers,
        progress=True,
    )
    recovered = inverse_pipeline(
        data,
        planted.l,
        planted.n,
        tol_fourier=config.tol_fourier,
        tail_moments=config.tail_moments,
    )
    errors = compare_potentials(recovered, planted)
    passed = errors["relative_l2"] <= config.roundtrip_tolerance
    write_json(
        output_path(config),
        {
            "eta": data.eta,
            "a": data.a,
            "n": planted.n,
            "errors": errors,
            "tolerance": config.roundtrip_tolerance,
            "pass": passed,
            "diagnostics": recovered.diagnostics,
        },
    )
    logger.info(
        f"Round trip: max error {errors['max_error']:.3e}, "
        f"relative L2 {errors['relative_l2']:.3e}"
    )
    if not passed:
        raise VerificationError(
            f"relative L2 error {errors['relative_l2']:.3e} "
            f"exceeds {config.roundtrip_tolerance}",
            module=__name__,
        )
    return 0


def build_model(config: RunConfig, m1: int, m2: int) -> SolutionModel:
    if config.model == "zero":
        return SolutionModel.zero(m1, m2)
    if config.model == "plane-wave":
        return SolutionModel.plane_wave(config.amplitude * np.eye(m1, m2))
    if not config.boundary:
        raise ValidationError("the sampled model needs --boundary", module=__name__)
    return SolutionModel.from_boundary_csv(config.boundary, m1, m2)


def initial_weyl(
    config: RunConfig, model: SolutionModel, points: Sequence[complex]
) -> List[np.ndarray]:
    """φ(0, z) per point, from a Weyl CSV or computed from v(., 0)."""
    if config.phi0 != "direct":
        m1, m2 = shape_from_header(read_csv_header(config.phi0))
        rows = read_numeric_csv(config.phi0)
        if rows.shape[0] != len(points):
            raise ValidationError(
                f"{config.phi0} has {rows.shape[0]} rows for {len(points)} z points",
                module=__name__,
            )
        values = rows[:, 2 : 2 + 2 * m1 * m2]
        phi = (values[:, 0::2] + 1j * values[:, 1::2]).reshape(-1, m2, m1)
        for index, z in enumerate(points):
            if abs(complex(rows[index, 0], rows[index, 1]) - z) > 1e-9 * max(1.0, abs(z)):
                raise ValidationError(
                    f"{config.phi0}: z does not match the grid",
                    module=__name__,
                    index=index,
                )
        return list(phi)
    if model.kind == "zero":
        return [np.zeros((model.m2, model.m1), dtype=complex) for _ in points]
    if model.kind == "plane-wave":
        return [constant_weyl_function(model.amplitude, z) for z in points]
    grid = load_potential(config.potential)
    return [
        weyl_function(
            grid, z, target_radius=config.target_radius, margin=config.margin
        ).phi
        for z in points
    ]


def run_evolve(config: RunConfig) -> int:
    m1, m2 = config.m1, config.m2
    if config.potential:
        grid = load_potential(config.potential)
        m1, m2 = grid.m1, grid.m2
    model = build_model(config, m1, m2)
    points = parse_zgrid(config.zgrid)
    starts = initial_weyl(config, model, points)

    path = output_path(config)
    header = ["t", "re_z", "im_z"]
    for i in range(model.m2):
        for k in range(model.m1):
            header += [f"re_phi_{i}_{k}", f"im_phi_{i}_{k}"]
    header.append("cond")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for index, (z, phi0) in enumerate(zip(points, starts)):
            propagator = evolve_R(model, z, config.T, config.nt)
            for step, (t, R) in enumerate(zip(propagator.times, propagator.R)):
                try:
                    state = evolve_weyl(phi0, R, cond_cap=config.cond_cap)
                except DiracError as exc:
                    exc.index = index if exc.index is None else exc.index
                    raise
                row = [format_number(t), format_number(z.real), format_number(z.imag)]
                for entry in state.phi.reshape(-1):
                    row += [format_number(entry.real), format_number(entry.imag)]
                row.append(format_number(state.cond))
                writer.writerow(row)
    logger.info(f"Wrote the evolution of {len(points)} Weyl samples to {path}")
    return 0


def selected_checks(config: RunConfig) -> Optional[List[str]]:
    if config.checks in ("", "all"):
        return None
    return [name.strip() for name in config.checks.split(",") if name.strip()]


def run_verify(config: RunConfig) -> int:
    grid = load_potential(config.potential) if config.potential else None
    z = parse_complex(config.z) if config.z else None
    results = run_suite(
        selected_checks(config),
        seed=config.seed,
        quick=config.quick,
        grid=grid,
        z=z,
        progress=True,
        tol_structural=config.tol_structural,
    )
    report = report_json(results)
    if config.out:
        with open(config.out, "w") as fh:
            fh.write(report)
    else:
        sys.stdout.write(report)
    failed = [result.check for result in results if not result.passed]
    if failed:
        raise VerificationError(f"checks failed: {', '.join(failed)}", module=__name__)
    return 0


def run_bm_check(config: RunConfig) -> int:
    if not config.weyl or not config.weyl_b:
        raise ValidationError("bm-check needs --weyl-a and --weyl-b", module=__name__)
    first, second = load_potential(config.weyl), load_potential(config.weyl_b)
    report = borg_marchenko_check(
        partial(pair_representative, first),
        partial(pair_representative, second),
        ray_c=config.ray_c,
        r_grid=parse_range(config.r_grid, "--r").tolist(),
        heights=parse_range(config.heights, "--heights").tolist(),
    )
    write_json(
        output_path(config),
        {
            "ray_c": report.ray_c,
            "r": report.r_grid,
            "heights": report.heights,
            "statistics": report.statistics.tolist(),
            "agreeing": report.agreeing,
            "growth": report.growth,
            "threshold": report.threshold,
        },
    )
    logger.info(f"Potentials agree up to r = {report.threshold}")
    return 0


COMMANDS = {
    "direct": run_direct,
    "inverse": run_inverse,
    "roundtrip": run_roundtrip,
    "evolve": run_evolve,
    "verify": run_verify,
    "bm-check": run_bm_check,
}


def run(config: RunConfig) -> int:
    """
    Dispatch one subcommand and translate errors into exit codes.

    Returns:
        int: 0 on success, 2 validation, 3 numerical domain, 4 verification.
    """
    print(describe(config))
    try:
        return COMMANDS[config.subcommand](config)
    except (DiracError, OSError, ValueError) as exc:
        logger.error(str(exc))
        return exit_code_for(exc)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=str,
        default=None,
        help="YAML file with RunConfig keys.",
    )
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        help="key=value override, may be repeated.",
    )
    common.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker processes. Defaults to 1.",
    )
    common.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Seed of randomized checks. Defaults to 0.",
    )
    common.add_argument("--out", type=str, default=None, help="Output file.")

    parser = argparse.ArgumentParser(
        description="Direct and inverse Weyl problems for skew-self-adjoint Dirac systems."
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    direct = subparsers.add_parser(
        "direct", parents=[common], help="Weyl function on a z grid."
    )
    direct.add_argument("--potential", type=str, help="Potential descriptor (JSON).")
    direct.add_argument("--zgrid", type=str, help='Grid "re0:re1:nre,im0:im1:nim".')
    direct.add_argument(
        "--target-radius",
        dest="target_radius",
        type=float,
        help="Stop when the ball radius reaches this. Defaults to 1e-8.",
    )
    direct.add_argument(
        "--margin", type=float, help="Required Im z - M. Defaults to 0.25."
    )

    inverse = subparsers.add_parser(
        "inverse", parents=[common], help="Recover v from Weyl line data."
    )
    source = inverse.add_mutually_exclusive_group(required=True)
    source.add_argument(
        "--weyl", type=str, help="CSV of Weyl samples on one line Im z = eta."
    )
    source.add_argument(
        "--from-potential",
        dest="potential",
        type=str,
        help="Synthesize the data from this descriptor.",
    )
    _add_inverse_knobs(inverse)
    inverse.add_argument(
        "--l", type=float, help="Interval length (required with --weyl)."
    )
    inverse.add_argument(
        "--norm-bound",
        dest="norm_bound",
        type=float,
        help="Bound M of the unknown potential.",
    )

    roundtrip = subparsers.add_parser(
        "roundtrip",
        parents=[common],
        help="Direct then inverse, compared with the input.",
    )
    roundtrip.add_argument(
        "--potential", type=str, required=True, help="Planted potential descriptor."
    )
    _add_inverse_knobs(roundtrip)
    roundtrip.add_argument(
        "--tolerance",
        dest="roundtrip_tolerance",
        type=float,
        help="Relative L2 tolerance. Defaults to 5e-2.",
    )

    evolve = subparsers.add_parser(
        "evolve", parents=[common], help="Weyl function of an NLS solution in time."
    )
    evolve.add_argument("--model", type=str, choices=["zero", "plane-wave", "sampled"])
    evolve.add_argument("--amplitude", type=float, help="Plane-wave amplitude.")
    evolve.add_argument("--T", type=float, help="Final time.")
    evolve.add_argument("--nt", type=int, help="Number of time steps.")
    evolve.add_argument("--zgrid", type=str, help='Grid "re0:re1:nre,im0:im1:nim".')
    evolve.add_argument("--phi0", type=str, help='Weyl CSV at t = 0, or "direct".')
    evolve.add_argument(
        "--potential", type=str, help="v(., 0) descriptor for the sampled model."
    )
    evolve.add_argument(
        "--boundary", type=str, help="Boundary CSV of the sampled model."
    )
    evolve.add_argument(
        "--cond-cap",
        dest="cond_cap",
        type=float,
        help="Largest allowed condition number. Defaults to 1e8.",
    )
    evolve.add_argument("--m1", type=int)
    evolve.add_argument("--m2", type=int)

    verify = subparsers.add_parser(
        "verify", parents=[common], help="Run the invariant suite."
    )
    verify.add_argument("--all", action="store_true", help="Run every check.")
    verify.add_argument(
        "--check",
        action="append",
        default=[],
        choices=list(CHECKS),
        help="Check to run, may be repeated.",
    )
    verify.add_argument(
        "--potential",
        type=str,
        help="Potential for the ball-laws, radius, p9, p17 and roundtrip checks.",
    )
    verify.add_argument("--z", type=str, help="Spectral point, e.g. 1+3i.")
    verify.add_argument(
        "--quick", action="store_true", default=None, help="Smaller grids."
    )

    bm = subparsers.add_parser(
        "bm-check", parents=[common], help="Borg-Marchenko decay report."
    )
    bm.add_argument(
        "--weyl-a",
        dest="weyl",
        type=str,
        required=True,
        help="First potential descriptor.",
    )
    bm.add_argument(
        "--weyl-b",
        dest="weyl_b",
        type=str,
        required=True,
        help="Second potential descriptor.",
    )
    bm.add_argument("--ray-c", dest="ray_c", type=float, help="Ray Re z = c Im z.")
    bm.add_argument("--r", dest="r_grid", type=str, help='Rates "r0:r1:nr".')
    bm.add_argument("--heights", type=str, help='Heights "h0:h1:nh".')
    return parser


def _add_inverse_knobs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--eta", type=float, help="Height of the data line. Defaults to M + 1."
    )
    parser.add_argument("--a", type=float, help="Half-width of the xi window.")
    parser.add_argument(
        "--n", type=int, help="Number of cells of the recovered grid."
    )
    parser.add_argument(
        "--xi-step", dest="xi_step", type=float, help="Spacing of xi samples."
    )
    parser.add_argument(
        "--tol-fourier",
        dest="tol_fourier",
        type=float,
        help="Truncation certificate tolerance. Defaults to 0.05.",
    )
    parser.add_argument(
        "--tail-moments",
        dest="tail_moments",
        type=int,
        help="Number of stripped tail moments. Defaults to 2.",
    )
    parser.add_argument(
        "--continuation",
        type=str,
        choices=["constant", "zero"],
        help="Continuation of the potential past l.",
    )


def config_from_args(args: argparse.Namespace) -> RunConfig:
    known = {item.name for item in fields(RunConfig)}
    explicit = {key: value for key, value in vars(args).items() if key in known}
    explicit["subcommand"] = args.subcommand
    if args.subcommand == "verify":
        if args.check and not args.all:
            explicit["checks"] = ",".join(args.check)
        elif args.all:
            explicit["checks"] = "all"
    return load_config(args.config, args.overrides, **explicit)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except DiracError as exc:
        logger.error(str(exc))
        return exit_code_for(exc)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
