"""Command-line interface.

Subcommands: gen-dataset, validate, optimize, crlb-map, compare,
montecarlo, export-plots.  Every run writes exactly one JSON manifest next
to its outputs with the resolved parameters and file digests, so any result
can be reproduced from the manifest alone.

Exit codes: 0 success, 2 flag/parameter validation, 3 file I/O or format,
4 dataset validation, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .crlb import SensingArea, crlb_map, export_crlb_map, upa_crlb_closed_form
from .emdata import (
    DipoleModelParams,
    PortLayout,
    generate_synthetic_dataset,
    load_dataset,
    save_dataset,
    upa_patterns,
    validate_dataset,
)
from .errors import (
    ConfigError,
    CoverageError,
    DatasetFormatError,
    DatasetValidationError,
    EstimationError,
    GridError,
    NumericalError,
    PixelAoAError,
    ScheduleError,
)
from .grid import AngleGrid
from .network import FeedNetworkConfig, overall_patterns
from .optimizer import (
    GAParams,
    SubdivisionSchedule,
    build_codebook,
    codebook_lookup,
    default_initial_config,
    export_trace,
    load_codebook,
    save_codebook,
)
from .simulate import export_report, monte_carlo_rmse

EXIT_OK = 0
EXIT_FLAGS = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_NUMERICAL = 5


# ---------------------------------------------------------------------------
# small parsers
# ---------------------------------------------------------------------------

def _parse_pixels(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError as exc:
        raise ConfigError(f"--pixels expects RxC, got {text!r}") from exc


def _parse_area(text: str) -> SensingArea:
    try:
        t0, t1, p0, p1 = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"--area expects tmin:tmax:pmin:pmax, got {text!r}") from exc
    return SensingArea(t0, t1, p0, p1)


def _parse_angles(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.split(";"):
        th, ph = (float(x) for x in chunk.split(","))
        out.append((th, ph))
    if not out:
        raise ConfigError("--angles is empty")
    return out


def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(command: str, args: argparse.Namespace, inputs, outputs,
                    started: float) -> None:
    outputs = [Path(p) for p in outputs]
    manifest = {
        "command": command,
        "tool_version": __version__,
        "parameters": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "inputs": {str(p): _sha256(Path(p)) for p in inputs if Path(p).exists()},
        "outputs": {str(p): _sha256(p) for p in outputs if p.exists()},
        "seed": getattr(args, "seed", None),
        "duration_s": round(time.time() - started, 3),
    }
    base = outputs[0] if outputs else Path("run")
    path = base.with_suffix(base.suffix + ".manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, default=str)
        fh.write("\n")


def _window_grid(area: SensingArea, step_deg: float, margin_steps: int = 2) -> AngleGrid:
    """Grid covering an area plus a finite-difference margin."""
    m = margin_steps * step_deg
    t0 = max(0.0, area.theta_min_deg - m)
    t1 = min(180.0, area.theta_max_deg + m)
    p0 = max(-180.0, area.phi_min_deg - m)
    p1 = min(180.0, area.phi_max_deg + m)
    return AngleGrid(t0, t1, p0, p1, step_deg)


def _codeword_patterns(dataset, codebook, cw, feednet):
    return overall_patterns(dataset, cw.config, feednet).patterns


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_dataset(args) -> int:
    started = time.time()
    _resolve_out(args, "dataset.json")
    rows, cols = _parse_pixels(args.pixels)
    layout = PortLayout(pixel_rows=rows, pixel_cols=cols, pixel_side_mm=args.pixel_mm,
                        substrate_side_mm=args.substrate_mm, height_mm=args.height_mm,
                        frequency_hz=args.freq_hz)
    grid = AngleGrid(step_deg=args.step_deg)
    params = DipoleModelParams(
        self_reactance_jitter_ohm=args.jitter_ohm,
        feed_resistance_target_ohm=args.target_r_ohm,
        include_sin_theta=not args.literal_measure,
    )
    ds = generate_synthetic_dataset(layout, grid, params, seed=args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {args.out}: {ds.n_ports} ports "
          f"({ds.n_feed} feed + {ds.n_loaded} loaded), {grid.n_points} grid points")
    _write_manifest("gen-dataset", args, [], [args.out], started)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .emdata import ValidationTolerances
    ds = load_dataset(args.dataset, strict=False)
    tol = ValidationTolerances(symmetry_abs_ohm=args.symmetry_tol,
                               passivity_rel=args.passivity_tol)
    report = validate_dataset(ds, tol)
    print(report)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_optimize(args) -> int:
    started = time.time()
    _resolve_out(args, "codebook.json")
    ds = load_dataset(args.dataset)
    space = _parse_area(args.space)
    factors = tuple(int(k) for k in args.schedule.split(","))
    axes = tuple(args.axes.split(",")) if args.axes else ("both",) * len(factors)
    schedule = SubdivisionSchedule(space=space, factors=factors, axes=axes)
    ga = GAParams(population=args.population, generations=args.generations,
                  crossover_prob=args.crossover_prob, mutation_prob=args.mutation_prob,
                  tournament_size=args.tournament, elite_count=args.elite, seed=args.seed)
    feednet = FeedNetworkConfig(source_impedance_ohm=args.z0_ohm)
    cb = build_codebook(
        ds, schedule, ga, snr_linear=_db_to_linear(args.snr_db),
        n_active=args.n_active, max_outer=args.max_outer, feednet=feednet,
        threads=args.threads, fd_step_deg=args.fd_step_deg)
    save_codebook(cb, args.out)
    outputs = [args.out]
    if args.trace:
        from .optimizer import OptimizationTrace
        merged = OptimizationTrace()
        for label in sorted(cb.traces):
            merged.records.extend(cb.traces[label].records)
        export_trace(merged, args.trace)
        outputs.append(args.trace)
    for cw in cb.codewords:
        print(f"{cw.area.label()}: objective {cw.objective:.4g} rad, "
              f"ports {[i + 1 for i in cw.config.feed_ports]}, "
              f"iterations {cw.iterations_used}")
    _write_manifest("optimize", args, [args.dataset], outputs, started)
    return EXIT_OK


def _upa_spec(args):
    ny, nz = _parse_pixels(args.upa)
    return ny, nz


def cmd_crlb_map(args) -> int:
    started = time.time()
    _resolve_out(args, "crlb_map.csv")
    area = _parse_area(args.area)
    snr = _db_to_linear(args.snr_db)
    inputs = []

    if args.upa:
        ny, nz = _upa_spec(args)
        grid = _window_grid(area, args.step_deg,
                            margin_steps=max(1, int(round((args.fd_step_deg or args.step_deg)
                                                          / args.step_deg))))
        pats = upa_patterns(ny, nz, args.spacing, grid, element=args.element)
        numeric = crlb_map(pats, area, snr, fd_step_deg=args.fd_step_deg)
        closed = [upa_crlb_closed_form(ny, nz, args.spacing, (th, ph), snr)
                  for th, ph in zip(numeric.theta_deg, numeric.phi_deg)]
        if args.mode == "numeric":
            export_crlb_map(numeric, args.out)
        elif args.mode == "closed-form":
            rows = [(r.angle_deg[0], r.angle_deg[1], r.matrix[0, 0], r.matrix[0, 1],
                     r.matrix[1, 1], r.objective) for r in closed]
            _write_rows(args.out, rows)
        else:
            # numeric and closed-form columns side by side
            rows = []
            for i, r in enumerate(closed):
                rows.append((numeric.theta_deg[i], numeric.phi_deg[i],
                             numeric.c_tt[i], numeric.c_tp[i], numeric.c_pp[i],
                             numeric.objective[i],
                             r.matrix[0, 0], r.matrix[0, 1], r.matrix[1, 1], r.objective))
            _write_rows(args.out, rows,
                        header="theta_deg,phi_deg,c_tt,c_tp,c_pp,objective,"
                               "c_tt_cf,c_tp_cf,c_pp_cf,objective_cf")
        worst = numeric.worst
    else:
        if not (args.dataset and args.codebook):
            raise ConfigError("crlb-map needs either --upa or --dataset with --codebook")
        ds = load_dataset(args.dataset)
        cb = load_codebook(args.codebook)
        inputs = [args.dataset, args.codebook]
        feednet = FeedNetworkConfig(source_impedance_ohm=args.z0_ohm)
        t_ids, p_ids = area.indices(ds.grid)
        rows = []
        pattern_cache = {}
        worst = 0.0
        for ti in t_ids:
            th = float(ds.grid.theta_deg[ti])
            for pi in p_ids:
                ph = float(ds.grid.phi_deg[pi])
                cw = codebook_lookup(cb, (th, ph))
                key = (cw.config.feed_ports, cw.config.connections)
                pats = pattern_cache.get(key)
                if pats is None:
                    pats = _codeword_patterns(ds, cb, cw, feednet)
                    pattern_cache[key] = pats
                r = crlb_map(pats, SensingArea(th, th, ph, ph), snr,
                             fd_step_deg=args.fd_step_deg)
                rows.append((th, ph, r.c_tt[0], r.c_tp[0], r.c_pp[0], r.objective[0]))
                worst = max(worst, r.objective[0])
        _write_rows(args.out, rows)
    print(f"worst objective over {area.label()}: {worst:.6g} rad")
    _write_manifest("crlb-map", args, inputs, [args.out], started)
    return EXIT_OK


def _fmt_cell(v) -> str:
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_rows(path, rows, header="theta_deg,phi_deg,c_tt,c_tp,c_pp,objective") -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(v) for v in row) + "\n")


def _worst_for_source(ds, cb, area, snr, feednet, fd_step, upa=None, spacing=0.5,
                      element="iso-theta"):
    if upa is not None:
        pats = upa_patterns(upa[0], upa[1], spacing, ds.grid, element=element)
        return crlb_map(pats, area, snr, fd_step_deg=fd_step).worst
    cw = codebook_lookup(cb, (0.5 * (area.theta_min_deg + area.theta_max_deg),
                              0.5 * (area.phi_min_deg + area.phi_max_deg)))
    pats = _codeword_patterns(ds, cb, cw, feednet)
    return crlb_map(pats, area, snr, fd_step_deg=fd_step).worst


def cmd_compare(args) -> int:
    started = time.time()
    _resolve_out(args, "compare.csv")
    ds = load_dataset(args.dataset)
    cb = load_codebook(args.codebook)
    inputs = [args.dataset, args.codebook]
    snr = _db_to_linear(args.snr_db)
    feednet = FeedNetworkConfig(source_impedance_ohm=args.z0_ohm)

    baseline_cb = None
    upa = None
    if args.baseline_codebook:
        baseline_cb = load_codebook(args.baseline_codebook)
        inputs.append(args.baseline_codebook)
    elif args.upa:
        upa = _upa_spec(args)
    else:
        raise ConfigError("compare needs --upa or --baseline-codebook as the baseline")

    rows = []
    for cw in cb.codewords:
        area = cw.area
        hrpa = _worst_for_source(ds, cb, area, snr, feednet, args.fd_step_deg)
        base = _worst_for_source(ds, baseline_cb, area, snr, feednet, args.fd_step_deg,
                                 upa=upa, spacing=args.spacing, element=args.element)
        if math.isinf(base):
            improvement = 1.0 if math.isfinite(hrpa) else 0.0
        elif base == 0.0:
            improvement = 0.0
        else:
            improvement = 1.0 - hrpa / base
        rows.append((area.theta_min_deg, area.theta_max_deg, area.phi_min_deg,
                     area.phi_max_deg, hrpa, base, improvement))
        print(f"{area.label()}: hrpa {hrpa:.4g}, baseline {base:.4g}, "
              f"improvement {improvement:.1%}")
    _write_rows(args.out, rows,
                header="theta_min_deg,theta_max_deg,phi_min_deg,phi_max_deg,"
                       "hrpa_worst,baseline_worst,improvement")
    _write_manifest("compare", args, inputs, [args.out], started)
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    started = time.time()
    _resolve_out(args, "montecarlo.csv")
    angles = _parse_angles(args.angles)
    snr_list = [_db_to_linear(float(x)) for x in args.snr_db_list.split(",")]
    inputs = []

    if args.upa:
        ny, nz = _upa_spec(args)
        lo_t = max(0.0, min(a[0] for a in angles) - args.search_halfwidth_deg - 2 * args.step_deg)
        hi_t = min(180.0, max(a[0] for a in angles) + args.search_halfwidth_deg + 2 * args.step_deg)
        lo_p = max(-180.0, min(a[1] for a in angles) - args.search_halfwidth_deg - 2 * args.step_deg)
        hi_p = min(180.0, max(a[1] for a in angles) + args.search_halfwidth_deg + 2 * args.step_deg)
        grid = AngleGrid(lo_t, hi_t, lo_p, hi_p, args.step_deg)
        pats = upa_patterns(ny, nz, args.spacing, grid, element=args.element)
    else:
        if not (args.dataset and args.codebook):
            raise ConfigError("montecarlo needs either --upa or --dataset with --codebook")
        ds = load_dataset(args.dataset)
        cb = load_codebook(args.codebook)
        inputs = [args.dataset, args.codebook]
        feednet = FeedNetworkConfig(source_impedance_ohm=args.z0_ohm)
        cw = codebook_lookup(cb, angles[0])
        pats = _codeword_patterns(ds, cb, cw, feednet)

    grid = pats.grid
    hw = args.search_halfwidth_deg
    area = SensingArea(
        max(grid.theta_deg[0], min(a[0] for a in angles) - hw),
        min(grid.theta_deg[-1], max(a[0] for a in angles) + hw),
        max(grid.phi_deg[0], min(a[1] for a in angles) - hw),
        min(grid.phi_deg[-1], max(a[1] for a in angles) + hw),
    )
    report = monte_carlo_rmse(pats, angles, snr_list, trials=args.trials, seed=args.seed,
                              search_area=area, refine=not args.no_refine)
    export_report(report, args.out)
    for r in report.records:
        print(f"({r.theta_deg:g},{r.phi_deg:g}) snr {10 * math.log10(r.snr_linear):.0f} dB: "
              f"rmse_theta {r.rmse_theta_rad:.4g} rad (crlb {r.crlb_theta_rad:.4g}), "
              f"rmse_phi {r.rmse_phi_rad:.4g} rad (crlb {r.crlb_phi_rad:.4g})")
    _write_manifest("montecarlo", args, inputs, [args.out], started)
    return EXIT_OK


def cmd_export_plots(args) -> int:
    started = time.time()
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(args.dataset)
    snr = _db_to_linear(args.snr_db)
    feednet = FeedNetworkConfig(source_impedance_ohm=args.z0_ohm)
    inputs = [args.dataset]
    outputs = []

    if args.fig == "area-bars":
        if not (args.codebook and args.upa):
            raise ConfigError("area-bars needs --codebook and --upa")
        cb = load_codebook(args.codebook)
        inputs.append(args.codebook)
        ny, nz = _upa_spec(args)
        rows = []
        for i, cw in enumerate(cb.codewords, 1):
            hrpa = _worst_for_source(ds, cb, cw.area, snr, feednet, args.fd_step_deg)
            upa = _worst_for_source(ds, None, cw.area, snr, feednet, args.fd_step_deg,
                                    upa=(ny, nz), spacing=args.spacing, element=args.element)
            rows.append((i, cw.area.theta_min_deg, cw.area.theta_max_deg,
                         cw.area.phi_min_deg, cw.area.phi_max_deg, hrpa, upa))
        path = outdir / "area_bars.csv"
        _write_rows(path, rows, header="area_index,theta_min_deg,theta_max_deg,"
                                       "phi_min_deg,phi_max_deg,hrpa_worst,upa_worst")
        outputs.append(path)

    elif args.fig == "area-size":
        books = [p for p in args.codebooks.split(",") if p]
        if not books:
            raise ConfigError("area-size needs --codebooks")
        if not args.eval_area:
            raise ConfigError("area-size needs --eval-area")
        area = _parse_area(args.eval_area)
        rows = []
        for p in books:
            cb = load_codebook(p)
            inputs.append(p)
            size = cb.space.theta_max_deg - cb.space.theta_min_deg
            worst = _worst_for_source(ds, cb, area, snr, feednet, args.fd_step_deg)
            rows.append((size, worst))
        rows.sort()
        path = outdir / "area_size_sweep.csv"
        _write_rows(path, rows, header="area_size_deg,worst_objective")
        outputs.append(path)

    elif args.fig == "port-count":
        books = [p for p in args.codebooks.split(",") if p]
        if not books:
            raise ConfigError("port-count needs --codebooks")
        rows = []
        for p in books:
            cb = load_codebook(p)
            inputs.append(p)
            n = len(cb.codewords[0].config.feed_ports)
            worst = max(cw.objective for cw in cb.codewords)
            rows.append((n, worst))
        rows.sort()
        path = outdir / "port_count_tradeoff.csv"
        _write_rows(path, rows, header="n_active,worst_objective")
        outputs.append(path)

    else:
        raise ConfigError(f"unknown figure kind {args.fig!r}")

    for p in outputs:
        print(f"wrote {p}")
    _write_manifest("export-plots", args, inputs, outputs, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _resolve_out(args, default_name: str) -> str:
    """Combine --out and --out-dir; --out defaults to a per-command name."""
    out = getattr(args, "out", None)
    out_dir = getattr(args, "out_dir", None)
    if out is None:
        out = default_name
    path = Path(out)
    if out_dir and not path.is_absolute():
        base = Path(out_dir)
        base.mkdir(parents=True, exist_ok=True)
        path = base / path
    args.out = str(path)
    return args.out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--snr-db", type=float, default=0.0, help="SNR in dB (default 0)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=None, help="directory for outputs")
    p.add_argument("--z0-ohm", type=complex, default=50.0 + 0.0j,
                   help="source impedance of each active RF chain")
    p.add_argument("--fd-step-deg", type=float, default=None,
                   help="finite-difference step (default: grid step)")


def _add_upa_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--upa", default=None, help="baseline array as NYxNZ, e.g. 2x2")
    p.add_argument("--spacing", type=float, default=0.5, help="element spacing over lambda")
    p.add_argument("--element", default="iso-theta", choices=["iso-theta", "iso-dual"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pixelaoa",
                                 description="pixel-antenna AoA sensing toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="generate a synthetic coupled-dipole dataset")
    p.add_argument("--pixels", default="5x5", help="pixel grid RxC (default 5x5)")
    p.add_argument("--pixel-mm", type=float, default=12.0)
    p.add_argument("--substrate-mm", type=float, default=62.5)
    p.add_argument("--height-mm", type=float, default=12.5)
    p.add_argument("--freq-hz", type=float, default=2.4e9)
    p.add_argument("--step-deg", type=float, default=1.0)
    p.add_argument("--jitter-ohm", type=float, default=0.0,
                   help="self-reactance jitter amplitude (seed-dependent when > 0)")
    p.add_argument("--target-r-ohm", type=float, default=50.0)
    p.add_argument("--literal-measure", action="store_true",
                   help="use the literal dtheta*dphi quadrature (no sin theta)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--out-dir", default=None, help="directory for outputs")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("validate", help="physical consistency report for a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--symmetry-tol", type=float, default=1e-9,
                   help="max allowed |Z - Z^T| in ohm")
    p.add_argument("--passivity-tol", type=float, default=1e-10,
                   help="allowed negative eigenvalue of Re(Z), relative to the largest")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("optimize", help="build a geometry codebook over an angular space")
    p.add_argument("--dataset", required=True)
    p.add_argument("--n-active", type=int, default=8, help="active feed ports (default 8)")
    p.add_argument("--space", required=True, help="tmin:tmax:pmin:pmax in degrees")
    p.add_argument("--schedule", default="1", help="subdivision factors, e.g. 1,4,4")
    p.add_argument("--axes", default=None, help="per-stage split axes, e.g. both,both")
    p.add_argument("--population", type=int, default=500)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--crossover-prob", type=float, default=0.9)
    p.add_argument("--mutation-prob", type=float, default=None)
    p.add_argument("--tournament", type=int, default=3)
    p.add_argument("--elite", type=int, default=2)
    p.add_argument("--max-outer", type=int, default=20)
    p.add_argument("--trace", default=None, help="optional trace CSV path")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("crlb-map", help="per-angle CRLB table over an area")
    p.add_argument("--dataset", default=None)
    p.add_argument("--codebook", default=None)
    _add_upa_flags(p)
    p.add_argument("--mode", default="both", choices=["numeric", "closed-form", "both"],
                   help="for --upa: which bound(s) to emit")
    p.add_argument("--area", required=True)
    p.add_argument("--step-deg", type=float, default=1.0, help="grid step for --upa mode")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_crlb_map)

    p = sub.add_parser("compare", help="worst objective per codebook area vs a baseline")
    p.add_argument("--dataset", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--baseline-codebook", default=None)
    _add_upa_flags(p)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("montecarlo", help="empirical RMSE of the ML estimator vs CRLB")
    p.add_argument("--dataset", default=None)
    p.add_argument("--codebook", default=None)
    _add_upa_flags(p)
    p.add_argument("--angles", default="90,0", help="semicolon-separated theta,phi pairs")
    p.add_argument("--snr-db-list", default="0,10,20")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--search-halfwidth-deg", type=float, default=10.0)
    p.add_argument("--step-deg", type=float, default=1.0, help="grid step for --upa mode")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("export-plots", help="plot-ready CSV bundles")
    p.add_argument("--fig", required=True, choices=["area-bars", "area-size", "port-count"])
    p.add_argument("--dataset", required=True)
    p.add_argument("--codebook", default=None)
    p.add_argument("--codebooks", default=None, help="comma-separated codebook files")
    p.add_argument("--eval-area", default=None)
    _add_upa_flags(p)
    p.add_argument("--snr-db", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--z0-ohm", type=complex, default=50.0 + 0.0j)
    p.add_argument("--fd-step-deg", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export_plots)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GridError, ScheduleError, CoverageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except (DatasetFormatError, OSError) as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DatasetValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, EstimationError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PixelAoAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FLAGS


if __name__ == "__main__":
    sys.exit(main())
