"""Command-line front end: simulate scenarios, check points, sweep grids.

Exit codes: 0 success / observability guaranteed, 2 configuration error,
3 simulation error, 4 observability not guaranteed (check).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, SM_KINDS, load_config, scenario_from_config
from .ekf import EkfDivergenceError, SingularInnovationError
from .machines import SingularInductanceError, make_machine
from .profiles import ProfileDomainError
from .observability import (DegenerateFluxError, OBS_THRESHOLD_DEFAULT,
                            im_steady_operating_point, observability_report,
                            sm_operating_point)
from .params import params_from_dict
from .scenarios import run_im_scenario, run_wrsm_scenario
from .summary import summarize
from .trace import json_sanitize, write_summary

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIM = 3
EXIT_NOT_GUARANTEED = 4


def _err(msg: str):
    print(f"driveobs: {msg}", file=sys.stderr)


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(args.config)
        scenario = scenario_from_config(cfg)
        if args.seed is not None:
            scenario.seed = args.seed
            if scenario.noise_std == 0.0:
                scenario.noise_std = 1.0
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _err(f"cannot create output directory: {exc}")
        return EXIT_CONFIG

    t0 = time.perf_counter()
    try:
        if cfg["scenario"]["type"] == "wrsm":
            trace = run_wrsm_scenario(scenario)
        else:
            trace = run_im_scenario(scenario)
    except (EkfDivergenceError, SingularInnovationError,
            SingularInductanceError, ProfileDomainError,
            FloatingPointError) as exc:
        _err(f"simulation failed: {exc}")
        return EXIT_SIM

    output = cfg.get("output", {})
    decimate = args.decimate or output.get("decimate", 1)
    trace.to_csv(out_dir / "trace.csv", decimate=decimate)
    summary = summarize(trace)
    summary["wall_time_s"] = time.perf_counter() - t0
    write_summary(out_dir / "summary.json", summary)
    if output.get("plot_script", True):
        _write_plot_script(out_dir / "plot.gp", trace.meta["machine"])
    print(f"trace: {out_dir / 'trace.csv'} ({len(trace.t[::decimate])} rows)")
    print(f"summary: {out_dir / 'summary.json'}")
    return EXIT_OK


def _write_plot_script(path, machine_kind: str):
    if machine_kind == "wrsm":
        panels = [
            ("position estimation error (rad)", ["theta_err"]),
            ("observability-vector velocity and margin (rad/s)",
             ["omega_o", "margin"]),
            ("rank-condition determinant", ["det_sm"]),
        ]
    else:
        panels = [
            ("flux estimation error (relative)",
             ["spd_flux_err", "sl_flux_err"]),
            ("observability condition (rad/s)", ["im_cond"]),
            ("speed (rad/s)", ["omega_e", "sl_omega_e"]),
        ]
    lines = [
        "# gnuplot script; run next to trace.csv",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 'time (s)'",
        f"set multiplot layout {len(panels)},1",
    ]
    for title, cols in panels:
        plot = ", ".join(
            f"'trace.csv' using 't':'{c}' with lines title '{c}'"
            for c in cols)
        lines.append(f"set title '{title}'")
        lines.append(f"plot {plot}")
    lines.append("unset multiplot")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _check_point(cfg: dict, threshold: float):
    kind = cfg["machine"]["kind"]
    params = params_from_dict(kind, cfg["machine"].get("params", {}))
    machine = make_machine(kind, params)
    block = cfg.get("check", {})
    threshold = block.get("threshold", threshold)
    u_dot = None
    speed_measured = False
    if kind in SM_KINDS:
        x, u = sm_operating_point(
            params, omega=block.get("omega", 0.0),
            i_sd=block.get("i_d", 0.0), i_sq=block.get("i_q", 0.0),
            i_f=block.get("i_f", 0.0 if kind in ("wrsm", "hesm") else None),
            di_sd=block.get("di_d", 0.0), di_sq=block.get("di_q", 0.0),
            di_f=block.get("di_f", 0.0))
    elif kind == "im":
        speed_measured = block.get("mode", "sensorless") == "with_speed"
        x, u, u_dot = im_steady_operating_point(
            params, omega_e=block.get("omega_e", 0.0),
            T_m=block.get("T_m", 0.0), psi_rd=block.get("psi_rd", 0.05))
    else:
        x = np.array([block.get("i_a", 0.0), 0.0, 0.0])
        u = np.zeros(1)
    report = observability_report(machine, x, u, u_dot,
                                  speed_measured=speed_measured,
                                  threshold=threshold)
    return kind, report


def cmd_check(args) -> int:
    try:
        cfg = load_config(args.config)
        if "check" not in cfg:
            raise ConfigError("config has no check block")
        kind, report = _check_point(cfg, args.threshold)
    except (ConfigError, DegenerateFluxError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    out = json_sanitize({"machine": kind, **report.to_dict()})
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK if report.guaranteed else EXIT_NOT_GUARANTEED


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
        if "sweep" not in cfg:
            raise ConfigError("config has no sweep block")
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    kind = cfg["machine"]["kind"]
    params = params_from_dict(kind, cfg["machine"].get("params", {}))
    block = cfg["sweep"]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "sweep.csv"

    def axis(name):
        spec = block[name]
        return np.linspace(spec["min"], spec["max"], int(spec["n"]))

    from .observability import (im_condition, im_steady_determinant,
                                slip_frequency, sm_determinant)

    rows = []
    if kind == "im":
        psi_rd = block.get("psi_rd", 0.05)
        try:
            for T_m in axis("T_m"):
                for omega_e in axis("omega_e"):
                    det = im_steady_determinant(params, omega_e, T_m, psi_rd)
                    omega_s = omega_e + slip_frequency(params, T_m, psi_rd)
                    cond = im_condition(params, omega_e, 0.0, omega_s)
                    rows.append((omega_e, T_m, det, cond))
        except DegenerateFluxError as exc:
            _err(str(exc))
            return EXIT_CONFIG
        header = "omega_e,T_m,determinant,condition"
    else:
        omega = block.get("omega", 0.0)
        i_f = block.get("i_f", 0.0)
        for i_q in axis("i_q"):
            for i_d in axis("i_d"):
                det = sm_determinant(params, omega, i_d, i_q,
                                     i_f if kind in ("wrsm", "hesm") else None)
                rows.append((i_d, i_q, det, omega))
        header = "i_d,i_q,determinant,omega"

    with open(path, "w", encoding="ascii") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, np.asarray(rows), fmt="%.12g", delimiter=",")
    print(f"sweep: {path} ({len(rows)} cells)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driveobs",
        description="Electric-drive observability laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario, write trace/summary")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--decimate", type=int, default=None,
                       help="keep every N-th trace row")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="enable/reseed measurement noise")
    p_sim.set_defaults(func=cmd_simulate)

    p_chk = sub.add_parser("check", help="evaluate observability at one point")
    p_chk.add_argument("--config", required=True)
    p_chk.add_argument("--threshold", type=float,
                       default=OBS_THRESHOLD_DEFAULT)
    p_chk.set_defaults(func=cmd_check)

    p_swp = sub.add_parser("sweep", help="grid sweep of the determinant")
    p_swp.add_argument("--config", required=True)
    p_swp.add_argument("--out", required=True)
    p_swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
