"""``modwave`` command line.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 invalid model
parameters.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import continuum as cont
from . import dispersion as disp
from . import io
from . import mathieu as mth
from . import monodromy as mono
from . import simulate as sim
from .chain import ChainSpec, ModelError
from .integrators import DEFAULT_CONFIG, ConvergenceError, StepConfig

EXIT_USAGE, EXIT_NUMERIC, EXIT_MODEL = 2, 3, 4

CHAIN_FIELDS = ("z", "cells", "k0", "m0", "dk", "dm", "nu")
PROFILE_FIELDS = {"L": "L", "k0": "k0", "dk": "dk", "rho0": "rho0", "drho": "drho", "c": "c"}

# parameters the figures leave open; printed whenever they are used
FIG3_DEPTH = 0.3
FIG3_BRINK_NU = 1.0
FIG3_PERIODS = 20
FIG3_SEED = 1
FIG4_WIDTH_CELLS = 10
FIG4_PERIODS = 30


class UsageError(Exception):
    pass


def parse_range(text, default_count=None):
    """``lo:hi[:count]`` -> ``(lo, hi, count)``; count may be None."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"bad range {text!r}; expected lo:hi[:count]")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        count = int(parts[2]) if len(parts) == 3 else default_count
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected lo:hi[:count]") from None
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise UsageError(f"bad range {text!r}; bounds must be finite")
    if count is not None and count < 2:
        raise UsageError(f"bad range {text!r}; count must be at least 2")
    return lo, hi, count


def _load_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{what} {path} must hold a JSON object")
    return data


def resolve_spec(args):
    """ChainSpec from ``--spec`` merged with individual flags (flags win)."""
    data = _load_json(args.spec, "spec") if args.spec else {}
    for name in CHAIN_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    missing = {"z", "cells"} - set(data)
    if missing:
        raise UsageError(f"chain needs {', '.join(sorted(missing))} (give --spec or flags)")
    return ChainSpec.from_dict(data)


def resolve_profile(args):
    data = _load_json(args.profile, "profile") if args.profile else {}
    for flag, key in PROFILE_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    if "samples" in data and any(getattr(args, f, None) is not None for f in ("k0", "dk", "rho0", "drho")):
        raise UsageError("sinusoid flags conflict with a sampled profile")
    return cont.ContinuumProfile.from_dict(data)


def resolve_config(args):
    return StepConfig(
        steps_per_char=args.steps_per_char or DEFAULT_CONFIG.steps_per_char,
        max_iter=args.max_iter or DEFAULT_CONFIG.max_iter,
        tol=args.tol or DEFAULT_CONFIG.tol,
    )


def _add_chain(p):
    g = p.add_argument_group("chain")
    g.add_argument("--spec", help="chain JSON {z, cells, k0, m0, dk, dm, nu}")
    g.add_argument("--z", type=int)
    g.add_argument("--cells", type=int)
    for name in ("k0", "m0", "dk", "dm", "nu"):
        g.add_argument(f"--{name}", type=float)


def _add_steps(p):
    g = p.add_argument_group("integration")
    g.add_argument("--steps-per-char", type=int)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--tol", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="modwave", description="Waves in progressively modulated chains.")
    parser.add_argument("--version", action="version", version=f"modwave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mathieu-chart", help="trace grid and transition contours")
    p.add_argument("--delta", default="0:8")
    p.add_argument("--epsilon", default="0:6")
    p.add_argument("--nd", type=int)
    p.add_argument("--ne", type=int)
    p.add_argument("--levels", default="1.9999,-1.9999")
    p.add_argument("--out", required=True)
    p.add_argument("--contours")
    p.add_argument("--svg")
    p.add_argument("--manifest")
    _add_steps(p)

    p = sub.add_parser("monodromy", help="monodromy of a chain or one Bloch cell")
    _add_chain(p)
    _add_steps(p)
    p.add_argument("--cell", action="store_true")
    p.add_argument("--Q-index", dest="q_index", type=int)
    p.add_argument("--direct", action="store_true", help="integrate over the whole period")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")

    p = sub.add_parser("dispersion", help="weighted dispersion diagram")
    _add_chain(p)
    _add_steps(p)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--samples-per-tau", type=int, default=disp.DEFAULT_SAMPLES)
    p.add_argument("--window", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--manifest")

    p = sub.add_parser("simulate", help="time-domain field of a finite chain")
    _add_chain(p)
    _add_steps(p)
    p.add_argument("--ic", required=True, help="dirac:SITE | random:SEED | gaussian:CENTER:WIDTH[:Q]")
    p.add_argument("--t-end", required=True, help="time, or a multiple of the period like 40T")
    p.add_argument("--stride", type=int)
    p.add_argument("--scheme", choices=("gl6", "euler"), default="gl6")
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--metrics")
    p.add_argument("--manifest")

    p = sub.add_parser("continuum", help="continuum-limit analysis")
    p.add_argument("--profile", help="profile JSON {L, k0, dk, rho0, drho} or {L, samples}")
    for name in ("L", "k0", "dk", "rho0", "drho", "c"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--omega", default="0:3:61", help="fictitious frequency grid lo:hi[:count]")
    p.add_argument("--out", required=True)
    p.add_argument("--critical", action="store_true")
    p.add_argument("--group-velocities", action="store_true")
    p.add_argument("--report")
    p.add_argument("--manifest")

    p = sub.add_parser("reproduce", help="regenerate a figure's data")
    p.add_argument("figure", choices=("fig2", "fig3", "fig4"))
    p.add_argument("--out-dir", default=".")
    p.add_argument("--quick", action="store_true", help="smaller grids and shorter runs")
    return parser


def parse_cli(argv):
    """Parse and validate ``argv``; raises :class:`UsageError` on bad input."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise UsageError("invalid command line") from None
    if args.command == "mathieu-chart":
        args.delta_range = _merge_count(parse_range(args.delta), args.nd, 800, "--delta", "--nd")
        args.eps_range = _merge_count(parse_range(args.epsilon), args.ne, 80, "--epsilon", "--ne")
        try:
            args.level_list = [float(v) for v in args.levels.split(",")]
        except ValueError:
            raise UsageError(f"bad --levels {args.levels!r}") from None
    elif args.command == "monodromy":
        if args.q_index is not None and not args.cell:
            raise UsageError("--Q-index needs --cell")
        if args.cell and args.direct:
            raise UsageError("--direct applies to the full chain only")
    elif args.command == "continuum":
        args.omega_range = parse_range(args.omega, 61)
    return args


def _merge_count(rng, flag, default, range_name, count_name):
    lo, hi, count = rng
    if flag is not None and count is not None and flag != count:
        raise UsageError(f"{range_name} count {count} conflicts with {count_name} {flag}")
    count = flag if flag is not None else count if count is not None else default
    if count < 2:
        raise UsageError(f"{count_name} must be at least 2")
    return lo, hi, count


def _manifest(args, params, outputs, seed=None):
    if not getattr(args, "manifest", None):
        return
    man = io.RunManifest(args.command, params, __version__, seed)
    for path in outputs:
        if path:
            man.add_output(path)
    man.write(args.manifest)


def cmd_mathieu_chart(args):
    cfg = resolve_config(args)
    (d0, d1, nd), (e0, e1, ne) = args.delta_range, args.eps_range
    grid = mth.trace_grid((d0, d1), (e0, e1), nd, ne, cfg)
    io.emit_csv(args.out, ["delta", "epsilon", "trace"], grid.rows())
    contours = {lv: mth.transition_contours(grid, lv) for lv in args.level_list}
    if args.contours:
        io.emit_json(args.contours, [line.tolist() for lv in args.level_list for line in contours[lv]])
    if args.svg:
        lines = [line for lv in args.level_list for line in contours[lv]]
        io.emit_svg_heatmap(args.svg, np.clip(np.abs(grid.values.T), 0, 4), (d0, d1), (e0, e1),
                            title="|tr M| (clipped at 4)", xlabel="delta", ylabel="epsilon", lines=lines)
    params = {"delta": [d0, d1, nd], "epsilon": [e0, e1, ne], "levels": args.level_list, "cfg": vars(cfg)}
    _manifest(args, params, [args.out, args.contours, args.svg])
    print(json.dumps({"failures": grid.failures, "tongues": mth.count_tongues(grid, tuple(args.level_list))}))


def cmd_monodromy(args):
    spec, cfg = resolve_spec(args), resolve_config(args)
    if args.cell:
        l = args.q_index or 0
        if not 0 <= l < spec.cells:
            raise ModelError(f"Q-index must lie in [0, {spec.cells})")
        bloch = disp.bloch_set(spec)[l][2]
        result = mono.cell_monodromy(spec, bloch, cfg)
    else:
        result = mono.full_monodromy(spec, cfg, direct=args.direct)
    io.emit_json(args.out, result.to_dict())
    _manifest(args, {"spec": spec.to_dict(), "cell": args.cell, "q_index": args.q_index, "cfg": vars(cfg)}, [args.out])


def _dispersion_svg(path, points, title):
    io.emit_svg_scatter(path, [p.q for p in points], [p.omega for p in points], [p.weight for p in points],
                        title=title, xlabel="q", ylabel="omega", xlim=(-math.pi, math.pi))


def _dispersion_rows(points):
    return ([p.q, p.omega, p.weight, p.branch] for p in points)


def cmd_dispersion(args):
    spec, cfg = resolve_spec(args), resolve_config(args)
    points = disp.diagram(spec, cfg, args.threshold, args.samples_per_tau, args.window)
    io.emit_csv(args.out, ["q", "omega", "weight", "branch"], _dispersion_rows(points))
    if args.svg:
        _dispersion_svg(args.svg, points, f"z={spec.z} nu={spec.nu:g}")
    params = {"spec": spec.to_dict(), "threshold": args.threshold, "samples_per_tau": args.samples_per_tau,
              "window": args.window, "cfg": vars(cfg)}
    _manifest(args, params, [args.out, args.svg])


def parse_time(text, spec):
    text = text.strip()
    try:
        if text.endswith("T"):
            if not math.isfinite(spec.period):
                raise UsageError("period multiples need a moving modulation (nu != 0)")
            return float(text[:-1] or 1) * spec.period
        return float(text)
    except ValueError:
        raise UsageError(f"bad time {text!r}; use a number or a multiple like 40T") from None


def _field_rows(traj):
    dens = sim.intensity_field(traj, energy=True)
    amp = sim.intensity_field(traj)
    for i, t in enumerate(traj.times):
        for n in range(traj.spec.n_sites):
            yield t, n, amp[i, n], dens[i, n]


def _field_outputs(traj, out, svg):
    io.emit_csv(out, ["t", "n", "abs_u", "energy"], _field_rows(traj))
    if svg:
        io.emit_svg_heatmap(svg, sim.intensity_field(traj), (0, traj.spec.n_sites), (traj.times[0], traj.times[-1]),
                            title="|u|", xlabel="site", ylabel="time")


def cmd_simulate(args):
    spec, cfg = resolve_spec(args), resolve_config(args)
    try:
        ic = sim.InitialCondition.parse(args.ic, spec.n_sites)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    t_end = parse_time(args.t_end, spec)
    traj = sim.run(spec, sim.make_initial(spec, ic), t_end, cfg, args.stride, args.scheme)
    _field_outputs(traj, args.out, args.svg)
    if args.metrics:
        source = ic.site if ic.kind == "dirac" else int(round(ic.center)) if ic.kind == "gaussian" else None
        try:
            metrics = sim.directionality_metrics(traj, source=source)
        except sim.WraparoundError as exc:
            raise UsageError(f"cannot compute metrics: {exc}") from None
        io.emit_json(args.metrics, metrics)
    params = {"spec": spec.to_dict(), "ic": args.ic, "t_end": t_end, "stride": args.stride,
              "scheme": args.scheme, "cfg": vars(cfg)}
    _manifest(args, params, [args.out, args.svg, args.metrics], seed=ic.seed if ic.kind == "random" else None)


def _band_rows(profile, omegas):
    med = cont.fictitious(profile)
    bands = cont.fictitious_bands(med, omegas)
    rows = []
    for w, q in bands.points:
        ww, qq = cont.shear_map(profile, w, q)
        rows.append([w, q, ww, qq])
    return rows, bands


def continuum_report(profile, critical=False, velocities=False):
    report = {"profile": profile.to_dict()}
    if velocities:
        sp, sm = cont.group_velocities(profile)
        wc = cont.willis_coefficients(profile)
        report.update(s_plus=sp, s_minus=sm, mean_velocity=wc.mean_velocity,
                      velocity_product=wc.velocity_product, one_way=bool(sp * sm > 0))
    if critical:
        try:
            report["critical_speed"] = cont.critical_speed(profile)
        except cont.NoRootError as exc:
            report["critical_speed"] = None
            report["critical_speed_note"] = str(exc)
    return report


def cmd_continuum(args):
    profile = resolve_profile(args)
    lo, hi, count = args.omega_range
    rows, bands = _band_rows(profile, np.linspace(lo, hi, count))
    io.emit_csv(args.out, ["Omega", "Q", "omega", "q"], rows)
    report = continuum_report(profile, args.critical, args.group_velocities)
    report["evanescent_omegas"] = len(bands.evanescent)
    if args.report:
        io.emit_json(args.report, report)
    print(io.dumps(report), end="")
    _manifest(args, {"profile": profile.to_dict(), "omega": [lo, hi, count]}, [args.out, args.report])


# -- figure pipelines --------------------------------------------------------


def _announce(defaults):
    print("defaults for unstated parameters: " + json.dumps(defaults, sort_keys=True))


def reproduce_fig2(out, quick=False):
    nd, ne = (200, 20) if quick else (800, 80)
    grid = mth.trace_grid((0, 8), (0, 6), nd, ne)
    files = {}
    files["chart.csv"] = io.emit_csv(os.path.join(out, "chart.csv"), ["delta", "epsilon", "trace"], grid.rows())
    lines = [l for lv in mth.DEFAULT_LEVELS for l in mth.transition_contours(grid, lv)]
    files["contours.json"] = io.emit_json(os.path.join(out, "contours.json"), [l.tolist() for l in lines])
    files["chart.svg"] = io.emit_svg_heatmap(os.path.join(out, "chart.svg"), np.clip(np.abs(grid.values.T), 0, 4),
                                             (0, 8), (0, 6), title="|tr M|", xlabel="delta", ylabel="epsilon",
                                             lines=lines)
    params = {"delta": [0, 8, nd], "epsilon": [0, 6, ne], "levels": list(mth.DEFAULT_LEVELS)}
    summary = {"tongues": mth.count_tongues(grid), "axis_crossings": mth.axis_crossings(grid)}
    return files, params, summary, None


def fig3_specs(cells=30):
    base = ChainSpec(z=4, cells=cells, k0=1, m0=1)
    return [
        ("homogeneous", base.replace(nu=0.0)),
        ("periodic", base.replace(dk=FIG3_DEPTH, dm=FIG3_DEPTH, nu=0.0)),
        ("modulated", base.replace(dk=FIG3_DEPTH, dm=FIG3_DEPTH, nu=0.4)),
        ("brink", base.replace(dk=FIG3_DEPTH, dm=FIG3_DEPTH, nu=FIG3_BRINK_NU)),
    ]


def reproduce_fig3(out, quick=False):
    defaults = {"dk": FIG3_DEPTH, "dm": FIG3_DEPTH, "brink_nu": FIG3_BRINK_NU,
                "t_end_periods": FIG3_PERIODS, "seed": FIG3_SEED,
                "fields": ["modulated/random", "homogeneous/dirac", "modulated/dirac"]}
    _announce(defaults)
    cells = 10 if quick else 30
    specs = fig3_specs(cells)
    files, summary = {}, {}
    for name, spec in specs:
        pts = disp.diagram(spec)
        files[f"dispersion_{name}.csv"] = io.emit_csv(os.path.join(out, f"dispersion_{name}.csv"),
                                                      ["q", "omega", "weight", "branch"], _dispersion_rows(pts))
        _dispersion_svg(os.path.join(out, f"dispersion_{name}.svg"), pts, name)
        files[f"dispersion_{name}.svg"] = os.path.join(out, f"dispersion_{name}.svg")
        summary[f"asymmetry_{name}"] = disp.asymmetry(pts)
    lookup = dict(specs)
    t_end = (2 if quick else FIG3_PERIODS) * 2 * math.pi / 0.4
    n = specs[0][1].n_sites
    runs = [("modulated", sim.InitialCondition("random", seed=FIG3_SEED)),
            ("homogeneous", sim.InitialCondition("dirac", site=n // 2)),
            ("modulated", sim.InitialCondition("dirac", site=n // 2))]
    for name, ic in runs:
        spec = lookup[name]
        traj = sim.run(spec, sim.make_initial(spec, ic), t_end)
        stem = f"field_{name}_{ic.kind}"
        _field_outputs(traj, os.path.join(out, stem + ".csv"), os.path.join(out, stem + ".svg"))
        files[stem + ".csv"] = os.path.join(out, stem + ".csv")
        files[stem + ".svg"] = os.path.join(out, stem + ".svg")
        if ic.kind == "dirac":
            summary[f"metrics_{name}"] = sim.directionality_metrics(traj, source=ic.site)
    params = {"specs": {k: v.to_dict() for k, v in specs}, "t_end": t_end, **defaults}
    return files, params, summary, FIG3_SEED


FIG4_PROFILE = {"L": 1.0, "k0": 1.0, "dk": 0.95, "rho0": 1.0, "drho": 0.95, "c": 0.6}


def fig4_run(quick=False, z=40, cells=100):
    """Gaussian pulse on the chain discretizing the one-way profile."""
    if quick:
        z, cells = 10, 40
    # period length z gives unit site spacing, so speeds are in sites per unit time
    profile = cont.ContinuumProfile.from_dict({**FIG4_PROFILE, "L": float(z)})
    spec = cont.chain_from_profile(profile, z, cells)
    center = spec.n_sites // 2
    ic = sim.InitialCondition("gaussian", center=center, width=FIG4_WIDTH_CELLS * z if not quick else 2 * z)
    periods = 4 if quick else FIG4_PERIODS
    traj = sim.run(spec, sim.make_initial(spec, ic), periods * spec.period, samples_per_period=2)
    return profile, spec, ic, traj


def reproduce_fig4(out, quick=False):
    defaults = {"gaussian_width_cells": FIG4_WIDTH_CELLS, "t_end_periods": FIG4_PERIODS,
                "omega_grid": [0.0, 3.0, 121], "diagrams": "continuum matricant (exact limit)"}
    _announce(defaults)
    profile = cont.ContinuumProfile.from_dict(FIG4_PROFILE)
    omegas = np.linspace(0.0, 3.0, 41 if quick else 121)[1:]
    files = {}
    still = profile.with_speed(0.0)
    rows, _ = _band_rows(still, omegas)
    files["diagram_original.csv"] = io.emit_csv(os.path.join(out, "diagram_original.csv"),
                                                ["Omega", "Q", "omega", "q"], rows)
    fict = cont.fictitious(profile)
    bands = cont.fictitious_bands(fict, omegas)
    files["diagram_fictitious.csv"] = io.emit_csv(os.path.join(out, "diagram_fictitious.csv"),
                                                  ["Omega", "Q"], bands.points)
    rows, _ = _band_rows(profile, omegas)
    files["diagram_modulated.csv"] = io.emit_csv(os.path.join(out, "diagram_modulated.csv"),
                                                 ["Omega", "Q", "omega", "q"], rows)
    _, spec, ic, traj = fig4_run(quick)
    _field_outputs(traj, os.path.join(out, "field.csv"), os.path.join(out, "field.svg"))
    files["field.csv"] = os.path.join(out, "field.csv")
    files["field.svg"] = os.path.join(out, "field.svg")
    report = continuum_report(profile, critical=True, velocities=True)
    report["center_of_energy_velocity"] = sim.directionality_metrics(traj, source=int(ic.center))[
        "center_of_energy_velocity"]
    try:
        report["ray_slopes"] = sim.ray_slopes(traj, source=int(ic.center))
    except ValueError as exc:
        report["ray_slopes"] = None
        report["ray_slopes_note"] = str(exc)
    files["velocities.json"] = io.emit_json(os.path.join(out, "velocities.json"), report)
    params = {"profile": FIG4_PROFILE, "chain": spec.to_dict(), "ic": vars(ic), **defaults}
    return files, params, report, None


def cmd_reproduce(args):
    os.makedirs(args.out_dir, exist_ok=True)
    fn = {"fig2": reproduce_fig2, "fig3": reproduce_fig3, "fig4": reproduce_fig4}[args.figure]
    man = io.RunManifest(f"reproduce {args.figure}", {"quick": args.quick}, __version__)
    files, params, summary, seed = fn(args.out_dir, args.quick)
    man.params.update(params)
    man.seed = seed
    for path in files.values():
        man.add_output(path)
    man.write(os.path.join(args.out_dir, "manifest.json"))
    print(io.dumps(summary), end="")


COMMANDS = {
    "mathieu-chart": cmd_mathieu_chart,
    "monodromy": cmd_monodromy,
    "dispersion": cmd_dispersion,
    "simulate": cmd_simulate,
    "continuum": cmd_continuum,
    "reproduce": cmd_reproduce,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_cli(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"modwave: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, cont.NoRootError) as exc:
        print(f"modwave: invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"modwave: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except io.EmitError as exc:
        print(f"modwave: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
