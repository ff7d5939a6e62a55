"""Command-line front end: simulate -> moments -> integrate -> reconstruct -> compare -> render."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .fields import RealField
from .forward import (
    PoissonNoise,
    Probe,
    make_bulky_phantom,
    make_defocused_probe,
    make_gaussian_probe,
    make_raster_plan,
    make_siemens_star,
    simulate_scan,
)
from .moments import diff_phase_corrected, diff_phase_naive
from .recon import ReconConfig, MomentumConfig, init_flat, run
from .scanio import (
    ScanIOError,
    read_field,
    read_scan,
    render_pgm,
    write_convergence_csv,
    write_field,
    write_scan,
)
from .wavefront import PhaseMap, build_init_object, fourier_integrate


def _write_run_summary(out_dir: str, subcommand: str, args: argparse.Namespace, path: str | None = None) -> None:
    params = {k: v for k, v in vars(args).items() if k != "func"}
    summary = {
        "subcommand": subcommand,
        "parameters": params,
        "versions": {
            "ptywave": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    if path is None:
        path = os.path.join(out_dir, "run_summary.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")


def _make_phantom(args):
    if args.phantom == "siemens":
        return make_siemens_star(
            grid=args.grid,
            min_transmission=args.min_transmission,
            phase_shift=args.phase_shift,
            spokes=args.spokes,
            inner_radius=args.inner_radius,
        )
    diameter = args.diameter if args.diameter > 0 else 40.0 * args.probe_fwhm
    edge = args.edge_width if args.edge_width > 0 else 4.0 * args.probe_fwhm
    return make_bulky_phantom(
        grid=args.grid,
        diameter=diameter,
        peak_phase=args.peak_phase,
        peak_attenuation=args.peak_attenuation,
        edge_width=edge,
    )


def _make_probe(args):
    if args.defocus_linear != 0.0 or args.defocus_quad != 0.0:
        return make_defocused_probe(
            grid=args.pattern,
            fwhm=args.probe_fwhm,
            linear_phase=(args.defocus_linear, 0.0),
            quadratic_phase=args.defocus_quad,
        )
    return make_gaussian_probe(grid=args.pattern, fwhm=args.probe_fwhm)


def _cmd_simulate(args) -> int:
    obj = _make_phantom(args)
    probe = _make_probe(args)
    n, q, s = args.grid, args.pattern, args.step
    if q >= n:
        raise ValueError(f"pattern size {q} must be smaller than grid {n}")
    count = (n - q) // s + 1
    plan = make_raster_plan(
        rows=count,
        cols=count,
        step_m=float(s),
        origin_m=(float(q // 2), float(q // 2)),
        pattern_shape=(q, q),
        object_shape=(n, n),
        object_pixel_m=1.0,
    )
    noise = PoissonNoise(args.photons, args.seed) if args.photons else None
    stack = simulate_scan(obj, probe, plan, noise)
    os.makedirs(args.out, exist_ok=True)
    write_scan(stack, args.out, provenance={"phantom": args.phantom, "seed": args.seed})
    write_field(probe.field, os.path.join(args.out, "probe.f32"))
    write_field(obj.field, os.path.join(args.out, "object.f32"))
    _write_run_summary(args.out, "simulate", args)
    print(f"simulated {plan.num_positions} positions ({count}x{count} raster) -> {args.out}")
    return 0


def _load_probe(args, scan_dir: str) -> Probe:
    path = args.probe or os.path.join(scan_dir, "probe.f32")
    if not os.path.isfile(path):
        raise ValueError(f"no probe file at {path}; pass --probe")
    return Probe(read_field(path, kind="complex"))


def _moment_metadata(plan) -> dict:
    return {
        "scan_step_m": plan.step_m,
        "raster_shape": list(plan.raster_shape),
        "origin_m": list(plan.origin_m),
        "object_pixel_m": plan.object_pixel_m,
        "object_shape": list(plan.object_shape),
    }


def _cmd_moments(args) -> int:
    stack = read_scan(args.scan)
    if args.corrected:
        probe = _load_probe(args, args.scan)
        maps = diff_phase_corrected(stack, probe)
    else:
        maps = diff_phase_naive(stack)
    os.makedirs(args.out, exist_ok=True)
    write_field(maps.transmission_sq, os.path.join(args.out, "o2.f32"))
    write_field(maps.phi_x, os.path.join(args.out, "phi_x.f32"))
    write_field(maps.phi_y, os.path.join(args.out, "phi_y.f32"))
    meta = _moment_metadata(stack.plan)
    meta["corrected"] = maps.corrected
    with open(os.path.join(args.out, "moments.json"), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_run_summary(args.out, "moments", args)
    print(f"moment maps ({'corrected' if maps.corrected else 'naive'}) -> {args.out}")
    return 0


def _cmd_integrate(args) -> int:
    meta_path = os.path.join(args.moments, "moments.json")
    if not os.path.isfile(meta_path):
        raise ValueError(f"no moments.json in {args.moments}")
    with open(meta_path, encoding="utf-8") as f:
        meta = json.load(f)
    phi_x = read_field(os.path.join(args.moments, "phi_x.f32"), kind="real")
    phi_y = read_field(os.path.join(args.moments, "phi_y.f32"), kind="real")
    o2 = read_field(os.path.join(args.moments, "o2.f32"), kind="real")
    phase = fourier_integrate(phi_x, phi_y, step=meta["scan_step_m"])
    os.makedirs(args.out, exist_ok=True)
    write_field(phase.field, os.path.join(args.out, "phase.f32"))
    write_field(o2, os.path.join(args.out, "o2.f32"))
    with open(os.path.join(args.out, "wavefront.json"), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_run_summary(args.out, "integrate", args)
    print(f"integrated phase map -> {args.out}")
    return 0


def _zero_mean_phase(field: RealField) -> PhaseMap:
    # float32 round trips leave a mean of ~1e-8; re-pin the gauge
    return PhaseMap(RealField(field.data - field.data.mean(), field.pixel_size))


def _wavefront_init(args, stack, probe):
    if getattr(args, "wavefront", None):
        o2 = read_field(os.path.join(args.wavefront, "o2.f32"), kind="real")
        phase = _zero_mean_phase(read_field(os.path.join(args.wavefront, "phase.f32"), kind="real"))
        return build_init_object(o2, phase, stack.plan)
    maps = diff_phase_corrected(stack, probe)
    phase = fourier_integrate(maps.phi_x, maps.phi_y)
    return build_init_object(maps.transmission_sq, phase, stack.plan)


def _recon_config(args) -> ReconConfig:
    momentum = None
    if args.momentum is not None:
        momentum = MomentumConfig(friction=args.momentum, period=args.period)
    return ReconConfig(
        alpha=args.alpha,
        beta=args.beta,
        iterations=args.iters,
        shuffle_seed=args.seed,
        probe_refine=not args.no_probe_refine,
        momentum=momentum,
    )


def _cmd_reconstruct(args) -> int:
    stack = read_scan(args.scan)
    probe = _load_probe(args, args.scan)
    if args.init == "flat":
        init_obj = init_flat(stack.plan.object_shape, stack.plan.object_pixel_m)
    else:
        init_obj = _wavefront_init(args, stack, probe)
    state = run(stack, init_obj, probe, _recon_config(args))
    os.makedirs(args.out, exist_ok=True)
    write_field(state.object.field, os.path.join(args.out, "object.f32"))
    write_field(state.probe.field, os.path.join(args.out, "probe.f32"))
    write_convergence_csv(state.cost_history, os.path.join(args.out, "convergence.csv"))
    _write_run_summary(args.out, "reconstruct", args)
    final = state.cost_history[-1][1]
    print(f"reconstructed {args.iters} sweeps ({args.init} init), final cost {final:.6e} -> {args.out}")
    return 0


def _sweeps_to_threshold(history, threshold: float) -> int | None:
    for sweep, c in history:
        if c <= threshold:
            return sweep
    return None


def _cmd_compare(args) -> int:
    stack = read_scan(args.scan)
    probe = _load_probe(args, args.scan)
    flat_init = init_flat(stack.plan.object_shape, stack.plan.object_pixel_m)
    wave_init = _wavefront_init(args, stack, probe)
    config = _recon_config(args)

    flat_state = run(stack, flat_init, probe, config)
    wave_state = run(stack, wave_init, probe, config)

    os.makedirs(args.out, exist_ok=True)
    write_convergence_csv(flat_state.cost_history, os.path.join(args.out, "convergence_flat.csv"))
    write_convergence_csv(wave_state.cost_history, os.path.join(args.out, "convergence_wavefront.csv"))
    write_field(flat_state.object.field, os.path.join(args.out, "object_flat.f32"))
    write_field(wave_state.object.field, os.path.join(args.out, "object_wavefront.f32"))

    threshold = flat_state.cost_history[-1][1]
    k_flat = _sweeps_to_threshold(flat_state.cost_history, threshold)
    k_wave = _sweeps_to_threshold(wave_state.cost_history, threshold)
    summary = {
        "threshold_cost": threshold,
        "sweeps_to_threshold": {"flat": k_flat, "wavefront": k_wave},
        "final_cost": {
            "flat": flat_state.cost_history[-1][1],
            "wavefront": wave_state.cost_history[-1][1],
        },
        "iterations": args.iters,
    }
    with open(os.path.join(args.out, "compare_summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_run_summary(args.out, "compare", args)
    print(
        f"sweeps to flat-final threshold: flat={k_flat} wavefront={k_wave} -> {args.out}"
    )
    return 0


def _cmd_render(args) -> int:
    field = read_field(args.field)
    vrange = None
    if args.min is not None or args.max is not None:
        if args.min is None or args.max is None:
            raise ValueError("--min and --max must be given together")
        vrange = (args.min, args.max)
    render_pgm(field, args.view, args.out, vrange)
    _write_run_summary("", "render", args, path=args.out + ".run.json")
    print(f"rendered {args.view} view -> {args.out}")
    return 0


def _add_recon_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iters", type=int, default=300, help="number of sweeps")
    p.add_argument("--alpha", type=float, default=1.0, help="object update step")
    p.add_argument("--beta", type=float, default=1.0, help="probe update step")
    p.add_argument("--momentum", type=float, default=None, help="momentum friction (off unless set)")
    p.add_argument("--period", type=int, default=2, help="sweeps between momentum applications")
    p.add_argument("--no-probe-refine", action="store_true", help="hold the probe fixed")
    p.add_argument("--probe", default=None, help="probe field file (default: <scan>/probe.f32)")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptywave", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ptywave {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="simulate a synthetic scan")
    p.add_argument("--phantom", choices=["siemens", "bulky"], default="siemens")
    p.add_argument("--grid", type=int, default=213, help="object grid size (pixels)")
    p.add_argument("--probe-fwhm", type=float, default=7.0, help="probe intensity FWHM (pixels)")
    p.add_argument("--step", type=int, default=2, help="raster step (pixels)")
    p.add_argument("--pattern", type=int, default=32, help="diffraction pattern size (pixels)")
    p.add_argument("--defocus-linear", type=float, default=0.0, help="probe phase tilt (rad/px)")
    p.add_argument("--defocus-quad", type=float, default=0.0, help="probe phase curvature (rad/px^2)")
    p.add_argument("--photons", type=float, default=None, help="Poisson photon budget (noiseless if unset)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spokes", type=int, default=36)
    p.add_argument("--min-transmission", type=float, default=0.8)
    p.add_argument("--phase-shift", type=float, default=-1.2)
    p.add_argument("--inner-radius", type=float, default=4.0)
    p.add_argument("--diameter", type=float, default=0.0, help="bulky diameter (px, 0 = 40*fwhm)")
    p.add_argument("--peak-phase", type=float, default=-30.0)
    p.add_argument("--peak-attenuation", type=float, default=0.5)
    p.add_argument("--edge-width", type=float, default=0.0, help="bulky edge band (px, 0 = 4*fwhm)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("moments", help="transmission and differential-phase maps")
    p.add_argument("--scan", required=True)
    p.add_argument("--corrected", action="store_true", help="subtract virtual-pattern centroids")
    p.add_argument("--probe", default=None, help="probe file for --corrected")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("integrate", help="integrate gradient maps into a phase map")
    p.add_argument("--moments", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_integrate)

    p = sub.add_parser("reconstruct", help="iterative reconstruction")
    p.add_argument("--scan", required=True)
    p.add_argument("--init", choices=["flat", "wavefront"], default="flat")
    p.add_argument("--wavefront", default=None, help="precomputed wavefront dir (o2 + phase)")
    _add_recon_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("compare", help="flat vs wavefront initialization, same seed")
    p.add_argument("--scan", required=True)
    _add_recon_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("render", help="render a field view as PGM")
    p.add_argument("--field", required=True)
    p.add_argument("--view", choices=["modulus", "phase", "real", "imag"], required=True)
    p.add_argument("--min", type=float, default=None)
    p.add_argument("--max", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, ScanIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
