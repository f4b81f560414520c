"""Command-line orchestration: sweeps, protocols, fits, CSV/JSON artifacts.

Each run writes one output directory containing manifest.json plus named
CSV files; every CSV references the manifest in its header comment.
Exit codes: 0 success, 2 validation error, 3 numerical non-convergence,
4 physics-contract violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .constants import PH
from .coupled import (Controls, calibrate_effective_delta, solve_coupled,
                      transition_lines, anticrossing, AnticrossingError)
from .dynamics import (DistortionModel, ZERO_DISTORTION, compensate_distortion,
                       run_oscillation_protocol, BASIS_LABELS)
from .fitting import (FitError, SpectroscopySweep, fit_coupler,
                      fit_persistent_current, fit_spectroscopy)
from .params import ParamError, PAPER_SYSTEM, load_system_params_file, serialize_system_params
from .reduction import ReductionInvalidError, reduced_at
from .squid import TargetOutOfRangeError
from .stoquastic import decide_stoquastic, nonstoq_region_map

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_PHYSICS = 4


class ValidationError(ValueError):
    pass


@dataclass
class RunManifest:
    """Reproducibility record written alongside every artifact set."""

    command: str
    config: str
    sweep: dict
    outputs: list
    seed: int
    timestamp: str
    argv: list


def _parse_range(text: str, name: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ValidationError(f"--{name} must be LO:HI:N, got {text!r}")
    if n < 1:
        raise ValidationError(f"--{name}: need at least one point")
    if n == 1 and hi != lo:
        raise ValidationError(f"--{name}: single-point range must have LO == HI")
    return np.linspace(lo, hi, n)


def _load_config(path: str | None):
    if path is None:
        return PAPER_SYSTEM
    return load_system_params_file(path)


def _write_csv(path: Path, header_lines, columns, rows):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def _finish(outdir: Path, manifest: RunManifest, payload_writers) -> list:
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name, writer in payload_writers:
        writer(outdir / name)
        outputs.append(name)
    manifest.outputs = outputs
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return outputs


def _manifest(args, sweep: dict) -> RunManifest:
    return RunManifest(command=args.cmd, config=args.config or "<paper defaults>",
                       sweep=sweep, outputs=[], seed=getattr(args, "seed", 0),
                       timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
                       argv=_sys.argv[1:])


# --- spectrum ----------------------------------------------------------------

def cmd_spectrum(args) -> int:
    sys_params = _load_config(args.config)
    if (args.cjj1_range is None) == (args.m12_range is None):
        raise ValidationError("exactly one of --cjj1-range / --m12-range required")
    bias = args.bias * 1e-3
    k = args.levels
    rows = []
    if args.cjj1_range is not None:
        sweep_vals = _parse_range(args.cjj1_range, "cjj1-range")
        f2 = calibrate_effective_delta(sys_params, 2, args.delta2)
        axis = "phicjj1_phi0"
        def controls(v):
            return Controls(phiq1_x=bias, phiq2_x=bias, phicjj1_x=float(v),
                            phicjj2_x=f2, m12=args.m12 * PH)
    else:
        sweep_vals = _parse_range(args.m12_range, "m12-range")
        f1 = calibrate_effective_delta(sys_params, 1, args.delta1)
        f2 = calibrate_effective_delta(sys_params, 2, args.delta2)
        axis = "m12_pH"
        def controls(v):
            return Controls(phiq1_x=bias, phiq2_x=bias, phicjj1_x=f1,
                            phicjj2_x=f2, m12=float(v) * PH)
    energies = []
    for v in sweep_vals:
        _, _, spec = solve_coupled(sys_params, controls(v), k=k)
        e = spec.energies_ghz()
        energies.append(e)
        dashed = transition_lines(spec, "first-excited")
        rows.append([float(v)] + [float(x) for x in e - e[0]]
                    + [float(x) for x in dashed])
    energies = np.array(energies)
    summary = {}
    for name, (i, j) in {"levels_12": (0, 1), "levels_23": (1, 2), "levels_34": (2, 3)}.items():
        if energies.shape[1] <= j:
            continue
        try:
            ac = anticrossing(sweep_vals, energies[:, j] - energies[:, i])
            summary[name] = {"gap_GHz": ac.gap_ghz, "location": ac.location}
        except AnticrossingError as exc:
            summary[name] = {"error": str(exc)}
    summary["primary"] = "levels_23" if args.cjj1_range is not None else "levels_34"
    manifest = _manifest(args, {"axis": axis, "values": [float(v) for v in sweep_vals],
                                "delta1": args.delta1, "delta2": args.delta2,
                                "bias_mphi0": args.bias, "m12_pH": args.m12})
    cols = [axis] + [f"e{i+1}_rel_GHz" for i in range(energies.shape[1])] \
        + [f"line_e{i+2}_GHz" for i in range(energies.shape[1] - 1)]
    outdir = Path(args.out)
    _finish(outdir, manifest, [
        ("spectrum.csv", lambda p: _write_csv(
            p, [f"manifest: manifest.json; command: spectrum"], cols, rows)),
        ("anticrossing.json", lambda p: Path(p).write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n")),
    ])
    return EXIT_OK


# --- reduce ------------------------------------------------------------------

REDUCE_COLUMNS = ("delta1_GHz", "delta2_GHz", "h1_GHz", "h2_GHz", "Jxx_GHz",
                  "Jyy_GHz", "Jzz_GHz", "Jxz_GHz", "Jzx_GHz", "na_min")


def _reduced_row(red) -> list:
    return [red.delta1, red.delta2, red.h1, red.h2, red.jxx, red.jyy, red.jzz,
            red.jxz, red.jzx, red.na_min]


def _reduce_sweep(sys_params, args):
    bias = args.bias * 1e-3
    if (args.m12_range is None) == (args.cjj_range is None):
        raise ValidationError("exactly one of --m12-range / --cjj-range required")
    if args.m12_range is not None:
        sweep_vals = _parse_range(args.m12_range, "m12-range")
        f1 = calibrate_effective_delta(sys_params, 1, args.delta)
        f2 = calibrate_effective_delta(sys_params, 2, args.delta)
        axis = "M12_pH"
        make = lambda v: Controls(phiq1_x=bias, phiq2_x=bias, phicjj1_x=f1,
                                  phicjj2_x=f2, m12=float(v) * PH)
    else:
        sweep_vals = _parse_range(args.cjj_range, "cjj-range")
        axis = "phicjj_phi0"
        make = lambda v: Controls(phiq1_x=bias, phiq2_x=bias, phicjj1_x=float(v),
                                  phicjj2_x=float(v), m12=args.m12 * PH)
    return axis, sweep_vals, make


def cmd_reduce(args) -> int:
    sys_params = _load_config(args.config)
    axis, sweep_vals, make = _reduce_sweep(sys_params, args)
    rows, flagged = [], 0
    for v in sweep_vals:
        red = reduced_at(sys_params, make(v))      # may raise ReductionInvalidError
        if not red.reliable:
            flagged += 1
        rows.append([float(v)] + _reduced_row(red) + [int(not red.reliable)])
    manifest = _manifest(args, {"axis": axis, "values": [float(v) for v in sweep_vals],
                                "delta": args.delta, "bias_mphi0": args.bias,
                                "m12_pH": args.m12})
    cols = [axis] + list(REDUCE_COLUMNS) + ["flagged"]
    _finish(Path(args.out), manifest, [
        ("reduced.csv", lambda p: _write_csv(
            p, ["manifest: manifest.json; command: reduce",
                f"flagged_points: {flagged} (na_min < 0.95)"], cols, rows)),
    ])
    return EXIT_OK


# --- stoq-map ----------------------------------------------------------------

def cmd_stoq_map(args) -> int:
    sys_params = _load_config(args.config)
    axis, sweep_vals, make = _reduce_sweep(sys_params, args)
    hams, rows = [], []
    for v in sweep_vals:
        red = reduced_at(sys_params, make(v))
        hams.append(red.to_matrix())
    evaluator = lambda v: reduced_at(sys_params, make(v)).to_matrix()
    rmap = nonstoq_region_map(sweep_vals, hams, tol=args.tol, grid_n=args.grid_n,
                              evaluator=evaluator if len(sweep_vals) > 1 else None)
    for v, nonstoq, resid in zip(rmap.controls, rmap.nonstoquastic, rmap.residuals):
        rows.append([float(v), "nonstoquastic" if nonstoq else "stoquastic", float(resid)])
    manifest = _manifest(args, {"axis": axis, "values": [float(v) for v in sweep_vals],
                                "delta": args.delta, "bias_mphi0": args.bias,
                                "m12_pH": args.m12, "tol": args.tol})
    _finish(Path(args.out), manifest, [
        ("stoq_map.csv", lambda p: _write_csv(
            p, ["manifest: manifest.json; command: stoq-map"],
            [axis, "verdict", "residual_GHz"], rows)),
        ("boundaries.csv", lambda p: _write_csv(
            p, ["manifest: manifest.json; command: stoq-map"],
            [axis], [[float(b)] for b in rmap.boundaries])),
    ])
    return EXIT_OK


# --- oscillate ----------------------------------------------------------------

def cmd_oscillate(args) -> int:
    sys_params = _load_config(args.config)
    if args.init not in BASIS_LABELS:
        raise ValidationError(f"--init must be one of {BASIS_LABELS}")
    tracked = args.track or args.init.translate(str.maketrans("ud", "du"))
    if tracked not in BASIS_LABELS:
        raise ValidationError(f"--track must be one of {BASIS_LABELS}")
    m12_vals = _parse_range(args.m12_range, "m12-range")
    if args.dwell_max < 0:
        raise ValidationError("--dwell-max must be non-negative")
    dwell = np.linspace(0.0, args.dwell_max, args.dwell_points) if args.dwell_max > 0 \
        else np.array([0.0])
    bias = (args.final_bias * 1e-3, args.final_bias * 1e-3)
    cols = []
    for m in m12_vals:
        res = run_oscillation_protocol(sys_params, args.init, float(m),
                                       final_bias=bias, dwell_times=dwell,
                                       delta_op=args.delta)
        cols.append(res.populations[:, BASIS_LABELS.index(tracked)])
    grid = np.array(cols).T
    rows = [[float(t)] + [float(x) for x in grid[i]] for i, t in enumerate(dwell)]
    manifest = _manifest(args, {"m12_pH": [float(v) for v in m12_vals],
                                "dwell_max_ns": args.dwell_max,
                                "init": args.init, "tracked": tracked,
                                "final_bias_mphi0": args.final_bias,
                                "delta": args.delta})
    header = [f"manifest: manifest.json; command: oscillate",
              f"init: {args.init}; tracked: {tracked}; "
              f"final_bias_mphi0: {args.final_bias}"]
    _finish(Path(args.out), manifest, [
        ("oscillation_map.csv", lambda p: _write_csv(
            p, header, ["dwell_ns"] + [f"m12_{v:.6g}pH" for v in m12_vals], rows)),
    ])
    return EXIT_OK


# --- compensate ----------------------------------------------------------------

def _parse_distortion(spec_text: str) -> DistortionModel:
    if not spec_text:
        return ZERO_DISTORTION
    terms = []
    for part in spec_text.split(";"):
        bits = part.split(",")
        if len(bits) != 3:
            raise ValidationError(
                "--distortion-spec must be 'amp_mphi0,tau_ns,freq_GHz;...'")
        amp, tau, freq = (float(b) for b in bits)
        terms.append((amp * 1e-3, tau, freq))
    return DistortionModel(terms=tuple(terms))


def cmd_compensate(args) -> int:
    sys_params = _load_config(args.config)
    distortion = _parse_distortion(args.distortion_spec)
    report = compensate_distortion(sys_params, distortion,
                                   target_delta=args.target_delta,
                                   max_iter=args.max_iter)
    rows = []
    for i, tau in enumerate(report.tau_grid):
        row = [float(tau)] + [float(dm[i]) for dm in report.delta_m] \
            + [float(report.correction[i])]
        rows.append(row)
    cols = ["tau_ns"] + [f"delta_m_iter{k+1}_GHz" for k in range(len(report.delta_m))] \
        + ["correction_phi0"]
    manifest = _manifest(args, {"target_delta_GHz": args.target_delta,
                                "distortion": args.distortion_spec,
                                "max_iter": args.max_iter})
    _finish(Path(args.out), manifest, [
        ("compensation.csv", lambda p: _write_csv(
            p, ["manifest: manifest.json; command: compensate",
                f"converged: {report.converged}; iterations: {report.iterations}"],
            cols, rows)),
        ("compensation.json", lambda p: Path(p).write_text(json.dumps(
            {"converged": report.converged, "iterations": report.iterations,
             "max_rel_error": list(report.max_rel_error),
             "target_GHz": report.target_ghz}, indent=2, sort_keys=True) + "\n")),
    ])
    return EXIT_OK if report.converged else EXIT_NONCONVERGENCE


# --- fit ------------------------------------------------------------------------

def _read_data_csv(path: str, n_cols: int) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                rows.append([float(x) for x in row[:n_cols]])
            except ValueError:
                continue    # header row
    if not rows:
        raise ValidationError(f"no numeric rows in {path}")
    return np.array(rows)


def cmd_fit(args) -> int:
    seed = json.loads(args.seed_params) if args.seed_params else None
    if args.fit_kind == "coupler":
        data = _read_data_csv(args.data, 2)
        result = fit_coupler(data[:, 0], data[:, 1] * PH,
                             seed=tuple(seed) if seed else None)
    elif args.fit_kind == "ip":
        data = _read_data_csv(args.data, 2)
        kw = {"seed": tuple(seed)} if seed else {}
        result = fit_persistent_current(data[:, 0], data[:, 1] * 1e-6, **kw)
    elif args.fit_kind == "spectro":
        data = _read_data_csv(args.data, 5)
        sweeps = {}
        for q, partner, f, idx, freq in data:
            sweeps.setdefault((int(q), round(partner, 9)), []).append(
                (float(f), int(idx), float(freq)))
        sweep_objs = [SpectroscopySweep(sweep_qubit=q, partner_phicjj=p,
                                        points=tuple(pts))
                      for (q, p), pts in sorted(sweeps.items())]
        if seed is None:
            raise ValidationError("spectro fit requires --seed-params "
                                  "[c1_fF, c2_fF, c12_fF, lcjj1_pH, lcjj2_pH]")
        known = json.loads(args.known_params) if args.known_params else {}
        result = fit_spectroscopy(
            sweep_objs,
            ic1_uA=known.get("ic1_uA", 3.22697), l1_pH=known.get("l1_pH", 231.633),
            ic2_uA=known.get("ic2_uA", 3.15711), l2_pH=known.get("l2_pH", 238.981),
            seed=tuple(seed))
    else:
        raise ValidationError(f"unknown fit kind {args.fit_kind!r}")
    manifest = _manifest(args, {"fit": args.fit_kind, "data": args.data})
    payload = {"parameters": {k: float(v) for k, v in result.parameters.items()},
               "residual_rms": result.residual_rms,
               "iterations": result.iterations, "converged": result.converged}
    _finish(Path(args.out), manifest, [
        ("fit.json", lambda p: Path(p).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")),
    ])
    return EXIT_OK if result.converged else EXIT_NONCONVERGENCE


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rfsquid",
        description="Coupled rf-SQUID flux-qubit simulator and analysis toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--config", help="system parameter JSON (default: fitted device)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("spectrum", help="coupled-spectrum sweep and anticrossing summary")
    common(p)
    p.add_argument("--cjj1-range", help="phicjj1 sweep LO:HI:N in Phi0 units")
    p.add_argument("--m12-range", help="M12 sweep LO:HI:N in pH")
    p.add_argument("--delta1", type=float, default=1.5,
                   help="effective qubit-1 tunneling (GHz) for M12 sweeps")
    p.add_argument("--delta2", type=float, default=1.5,
                   help="effective qubit-2 tunneling (GHz)")
    p.add_argument("--bias", type=float, default=0.0, help="flux bias, mPhi0, both qubits")
    p.add_argument("--m12", type=float, default=0.0, help="fixed M12 (pH) for cjj sweeps")
    p.add_argument("--levels", type=int, default=6)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("reduce", help="reduced two-qubit parameter tables")
    common(p)
    p.add_argument("--m12-range", help="M12 sweep LO:HI:N in pH")
    p.add_argument("--cjj-range", help="joint phicjj sweep LO:HI:N in Phi0 units")
    p.add_argument("--delta", type=float, default=1.5)
    p.add_argument("--bias", type=float, default=0.0, help="mPhi0")
    p.add_argument("--m12", type=float, default=0.0, help="fixed M12 (pH) for cjj sweeps")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("stoq-map", help="stoquasticity region map")
    common(p)
    p.add_argument("--m12-range")
    p.add_argument("--cjj-range")
    p.add_argument("--delta", type=float, default=1.5)
    p.add_argument("--bias", type=float, default=0.0)
    p.add_argument("--m12", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--grid-n", type=int, default=181)
    p.set_defaults(func=cmd_stoq_map)

    p = sub.add_parser("oscillate", help="coherent-oscillation population maps")
    common(p)
    p.add_argument("--init", required=True, choices=BASIS_LABELS)
    p.add_argument("--track", choices=BASIS_LABELS,
                   help="tracked state (default: init with both spins flipped)")
    p.add_argument("--m12-range", required=True, help="LO:HI:N in pH")
    p.add_argument("--dwell-max", type=float, default=5.0, help="ns")
    p.add_argument("--dwell-points", type=int, default=101)
    p.add_argument("--final-bias", type=float, default=0.0, help="mPhi0")
    p.add_argument("--delta", type=float, default=1.5, help="operating tunneling, GHz")
    p.set_defaults(func=cmd_oscillate)

    p = sub.add_parser("compensate", help="pulse-distortion compensation loop")
    common(p)
    p.add_argument("--target-delta", type=float, default=5.0, help="GHz")
    p.add_argument("--distortion-spec", default="2,1,0",
                   help="'amp_mphi0,tau_ns,freq_GHz;...' ('' for none)")
    p.add_argument("--max-iter", type=int, default=5)
    p.set_defaults(func=cmd_compensate)

    p = sub.add_parser("fit", help="calibration fits")
    common(p)
    p.add_argument("fit_kind", choices=("coupler", "ip", "spectro"))
    p.add_argument("--data", required=True, help="input CSV")
    p.add_argument("--seed-params", help="JSON list of starting parameters")
    p.add_argument("--known-params", help="JSON dict of fixed parameters (spectro)")
    p.set_defaults(func=cmd_fit)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParamError, TargetOutOfRangeError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_VALIDATION
    except ReductionInvalidError as exc:
        print(f"physics-contract violation: {exc}", file=_sys.stderr)
        return EXIT_PHYSICS
    except (FitError, AnticrossingError) as exc:
        print(f"non-convergence: {exc}", file=_sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    raise SystemExit(main())
