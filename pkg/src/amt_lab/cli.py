"""Command-line front end: sweep | optimize | validate | mission | simulate.

All angles on the command line and in outputs are degrees; lengths m,
speeds m/s, impulses N*s. I2 is the back-wheel (initial)
impact and I4 the front-wheel (final) impact.

Exit status: 0 success, 1 a requested validation failed, 2 bad input,
3 model error (infeasible scenario, no solution), 4 oracle failure
(divergence or timeout). Errors are printed to stderr as JSON.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import os
import sys
from pathlib import Path

from . import __version__
from .errors import AMTError, DivergenceError, ParameterError, SimulationTimeout
from .kinematics import (
    ImpactClosure,
    InitialClosure,
    FinalClosure,
    optimize_landing_angle,
    simulate_landing,
    simultaneous_landing,
    solve_entrance_for_exit,
    sweep_landing_angle,
)
from .mission import (
    MissionConfig,
    check_event_transitions,
    mission_from_mapping,
    mission_to_mapping,
    run_mission,
)
from .model import (
    REFERENCE_SCENARIO,
    LandingScenario,
    load_vehicle_params,
    params_from_mapping,
    params_to_mapping,
    parse_document,
)
from .oracle import OracleConfig, TangentialModel, is_simultaneous, measure_impulses, run_drop
from .serialize import dumps, fmt

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_MODEL, EXIT_ORACLE = 0, 1, 2, 3, 4

SWEEP_HEADER = ["theta_deg", "I2x", "I2y", "I2_norm", "I4x", "I4y", "I4_norm", "Imax", "v4x"]
CONVERGENCE_LIMIT = 0.02


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error({"error": "usage", "message": message})
        raise SystemExit(EXIT_INPUT)


def _emit_error(payload: dict) -> None:
    sys.stderr.write(dumps(payload))


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--vehicle", default=d, help="vehicle parameter document (TOML or JSON); default profile if omitted")
    parser.add_argument("--closure", default=d, choices=[c.value for c in InitialClosure],
                        help="initial-impact closure (default sticking-pivot)")
    parser.add_argument("--phase4", default=d, choices=[c.value for c in FinalClosure],
                        help="final-impact closure (default momentum-conserving)")
    parser.add_argument("--out", default=d, help="output path (directory for mission); stdout if omitted")
    parser.add_argument("--format", default=d, choices=["csv", "json"], help="output format")


def _scenario_flags(p, theta=True):
    p.add_argument("--v0x", type=float, default=REFERENCE_SCENARIO.entrance_speed_x, help="entrance speed, m/s")
    p.add_argument("--height", type=float, default=REFERENCE_SCENARIO.deployment_height, help="deployment CoM height h, m")
    if theta:
        p.add_argument("--theta", type=float, default=math.degrees(REFERENCE_SCENARIO.landing_angle), help="landing angle, deg")


def _range_flags(p, steps):
    p.add_argument("--theta-min", type=float, default=5.0, help="deg")
    p.add_argument("--theta-max", type=float, default=30.0, help="deg")
    p.add_argument("--steps", type=int, default=steps, help="grid points")


def _oracle_flags(p):
    c = OracleConfig()
    p.add_argument("--stiffness", type=float, default=c.contact_stiffness, help="N/m")
    p.add_argument("--damping", type=float, default=c.contact_damping, help="N*s/m")
    p.add_argument("--dt", type=float, default=c.time_step, help="oracle time step, s")
    p.add_argument("--max-time", type=float, default=c.max_sim_time, help="s")
    p.add_argument("--epsilon", type=float, default=c.contact_epsilon, help="episode penetration threshold, m")
    p.add_argument("--tangential", choices=[t.value for t in TangentialModel], default=None,
                   help="contact tangential model (default follows --closure)")
    p.add_argument("--viscous-coefficient", type=float, default=c.viscous_coefficient, help="N*s/m")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="amt-lab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"amt-lab {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="impulse norms over a landing-angle grid (CSV)")
    _common(p, suppress=True)
    _scenario_flags(p, theta=False)
    _range_flags(p, steps=251)

    p = sub.add_parser("optimize", help="landing angle minimizing the larger impact impulse (JSON)")
    _common(p, suppress=True)
    _scenario_flags(p, theta=False)
    _range_flags(p, steps=64)
    p.add_argument("--tolerance", type=float, default=1e-4, help="angle tolerance, deg")
    p.add_argument("--target-exit", type=float, default=None,
                   help="also solve the entrance speed giving this exit speed at the optimum, m/s")

    p = sub.add_parser("simulate", help="four-phase landing chain at one angle")
    _common(p, suppress=True)
    _scenario_flags(p)
    p.add_argument("--oracle", action="store_true",
                   help="run the contact oracle instead (trajectory CSV or episode JSON)")
    _oracle_flags(p)

    p = sub.add_parser("validate", help="analytic impulses against the contact oracle (JSON)")
    _common(p, suppress=True)
    _scenario_flags(p)
    _oracle_flags(p)
    p.add_argument("--tolerance", type=float, default=0.10, help="relative impulse tolerance")
    p.add_argument("--convergence", action="store_true", help="also rerun at half the time step")

    p = sub.add_parser("mission", help="deploy-and-land mission trace and event log")
    _common(p, suppress=True)
    p.add_argument("--mission", default=None,
                   help="mission document with a [mission] table; may also hold the vehicle fields")
    _scenario_flags(p)
    p.add_argument("--disarm-height", type=float, default=REFERENCE_SCENARIO.disarm_height, help="m")
    p.add_argument("--tau", type=float, default=0.5, help="stage 1 tracking time constant, s")
    _oracle_flags(p)
    return parser


# ---------------------------------------------------------------------------
# helpers


def _digest(path: str) -> dict:
    data = Path(path).read_bytes()
    return {"path": str(path), "sha256": hashlib.sha256(data).hexdigest()}


def _closure(args) -> ImpactClosure:
    return ImpactClosure.parse(getattr(args, "closure", None), getattr(args, "phase4", None))


def _scenario(args, theta_deg=None) -> LandingScenario:
    theta = args.theta if theta_deg is None else theta_deg
    if not math.isfinite(theta) or not 0.0 <= theta < 90.0:
        raise ParameterError("landing angle must lie in [0, 90) deg", "theta")
    return LandingScenario(args.v0x, args.height, math.radians(theta))


def _oracle_config(args, closure) -> OracleConfig:
    kw = dict(
        contact_stiffness=args.stiffness,
        contact_damping=args.damping,
        time_step=args.dt,
        max_sim_time=args.max_time,
        contact_epsilon=args.epsilon,
        viscous_coefficient=args.viscous_coefficient,
    )
    if args.tangential:
        kw["tangential_model"] = args.tangential
    return OracleConfig.for_closure(closure, **kw)


def _config_dict(cfg: OracleConfig) -> dict:
    return {
        "contact_stiffness": cfg.contact_stiffness,
        "contact_damping": cfg.contact_damping,
        "time_step": cfg.time_step,
        "max_sim_time": cfg.max_sim_time,
        "contact_epsilon": cfg.contact_epsilon,
        "tangential_model": cfg.tangential_model.value,
        "viscous_coefficient": cfg.viscous_coefficient,
        "settle_window": cfg.settle_window,
        "settle_tolerance": cfg.settle_tolerance,
        "merge_gap": cfg.merge_gap,
    }


def _workers() -> int:
    cap = os.environ.get("AMT_LAB_THREADS")
    n = min(4, os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ParameterError(f"expected an integer, got {cap!r}", "AMT_LAB_THREADS") from exc
    return n


def _vec(v):
    return {"x": v[0], "y": v[1], "norm": math.hypot(*v)}


def _report_dict(rep) -> dict:
    return {
        "I2": _vec(rep.impulse_initial),
        "I4": _vec(rep.impulse_final),
        "Imax": rep.impulse_max,
        "exit_velocity": {"x": rep.exit_velocity[0], "y": rep.exit_velocity[1]},
    }


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


class _Run:
    """Collects the resolved configuration and writes artifacts plus manifest."""

    def __init__(self, args, params, inputs):
        self.args = args
        self.params = params
        self.inputs = inputs
        self.config = {
            "vehicle": params_to_mapping(params),
            "closure": {"initial": _closure(args).initial.value, "final": _closure(args).final.value},
        }

    def manifest(self) -> dict:
        return {
            "command": self.args.command,
            "tool_version": __version__,
            "config": self.config,
            "inputs": self.inputs,
        }

    def write(self, text: str, name: str | None = None) -> None:
        out = getattr(self.args, "out", None)
        if out is None:
            sys.stdout.write(text)
            return
        path = Path(out) / name if name else Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        if name is None:
            Path(str(path) + ".manifest.json").write_text(dumps(self.manifest()))

    def write_manifest_into(self, directory: Path) -> None:
        (directory / "manifest.json").write_text(dumps(self.manifest()))


def _summary(line: str) -> None:
    sys.stderr.write(line + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_sweep(args, run: _Run) -> int:
    closure = _closure(args)
    sc = LandingScenario(args.v0x, args.height, 0.0)
    run.config.update(
        scenario={"entrance_speed_mps": args.v0x, "deployment_height_m": args.height},
        theta_min_deg=args.theta_min, theta_max_deg=args.theta_max, steps=args.steps,
    )
    records = sweep_landing_angle(
        run.params, sc, math.radians(args.theta_min), math.radians(args.theta_max), args.steps,
        closure, workers=_workers(),
    )
    rows = []
    for rec in records:
        r = rec.report
        rows.append([math.degrees(rec.landing_angle), *r.impulse_initial, r.initial_norm,
                     *r.impulse_final, r.final_norm, r.impulse_max, r.exit_velocity[0]])
    best = min(range(len(rows)), key=lambda i: (rows[i][7], i))
    crossings = []
    for a, b in zip(rows, rows[1:]):
        da, db = a[3] - a[6], b[3] - b[6]
        if da == 0.0:
            crossings.append(a[0])
        elif da * db < 0:
            crossings.append(a[0] + (b[0] - a[0]) * da / (da - db))
    if args.format == "json":
        text = dumps({"header": SWEEP_HEADER, "rows": rows, "theta_opt_deg": rows[best][0],
                      "crossings_deg": crossings, "manifest": run.manifest()})
    else:
        text = _csv(rows, SWEEP_HEADER)
    run.write(text)
    cross = ", ".join(f"{c:.4f}" for c in crossings) or "none"
    _summary(f"theta_opt_deg={rows[best][0]:.6g} Imax={rows[best][7]:.6g} (grid argmin); "
             f"I2/I4 crossings at [{cross}] deg")
    return EXIT_OK


def cmd_optimize(args, run: _Run) -> int:
    closure = _closure(args)
    sc = LandingScenario(args.v0x, args.height, 0.0, target_exit_speed=args.target_exit)
    run.config.update(
        scenario={"entrance_speed_mps": args.v0x, "deployment_height_m": args.height,
                  "target_exit_speed_mps": args.target_exit},
        theta_min_deg=args.theta_min, theta_max_deg=args.theta_max, coarse_steps=args.steps,
        tolerance_deg=args.tolerance,
    )
    opt = optimize_landing_angle(
        run.params, sc, math.radians(args.theta_min), math.radians(args.theta_max),
        math.radians(args.tolerance), closure, coarse_points=args.steps,
    )
    # coarse-grid argmin, identical to a sweep over the same grid
    grid = sweep_landing_angle(run.params, sc, math.radians(args.theta_min), math.radians(args.theta_max),
                               max(args.steps, 64), closure)
    i = min(range(len(grid)), key=lambda k: (grid[k].report.impulse_max, k))
    chain = opt.chain
    out = {
        "theta_opt_deg": math.degrees(opt.landing_angle),
        **_report_dict(opt.report),
        "feasibility": chain.feasibility.as_dict(),
        "grid_argmin_deg": math.degrees(grid[i].landing_angle),
        "drop_m": chain.drop,
    }
    if args.target_exit is not None:
        v0 = solve_entrance_for_exit(run.params, sc, opt.landing_angle, closure)
        out["entrance_for_target_exit_mps"] = v0
    if args.format == "csv":
        header = ["theta_opt_deg", "I2x", "I2y", "I2_norm", "I4x", "I4y", "I4_norm", "Imax", "v4x", "feasible"]
        r = opt.report
        row = [out["theta_opt_deg"], *r.impulse_initial, r.initial_norm, *r.impulse_final, r.final_norm,
               r.impulse_max, r.exit_velocity[0], str(chain.feasibility.ok).lower()]
        run.write(_csv([row], header))
    else:
        out["manifest"] = run.manifest()
        run.write(dumps(out))
    _summary(f"theta_opt_deg={out['theta_opt_deg']:.6g} Imax={opt.report.impulse_max:.6g} "
             f"feasible={chain.feasibility.ok}")
    return EXIT_OK


def cmd_simulate(args, run: _Run) -> int:
    closure = _closure(args)
    sc = _scenario(args)
    run.config.update(scenario={"entrance_speed_mps": args.v0x, "deployment_height_m": args.height,
                                "landing_angle_deg": args.theta})
    if args.oracle:
        cfg = _oracle_config(args, closure)
        run.config["oracle"] = _config_dict(cfg)
        res = run_drop(run.params, sc, cfg)
        if args.format == "json":
            payload = {"episodes": [e.as_dict() for e in res.episodes],
                       "impulses": _report_dict(measure_impulses(res.episodes)),
                       "settle_time": res.end_time, "manifest": run.manifest()}
            run.write(dumps(payload))
        else:
            run.write(res.to_csv())
        return EXIT_OK
    chain = simulate_landing(run.params, sc, closure)
    names = {1: "free_fall", 2: "initial_impact", 3: "roll", 4: "final_impact"}
    phases = [
        {"phase": o.phase_index, "name": names[o.phase_index], "vx": o.com_velocity[0], "vy": o.com_velocity[1],
         "pitch_rate": o.pitch_rate, "com_height": o.com_height, "wheel_spin": o.wheel_spin,
         "pitch_deg": math.degrees(o.pitch)}
        for o in chain.outcomes
    ]
    if args.format == "csv":
        header = list(phases[0])
        run.write(_csv([[p[k] for k in header] for p in phases], header))
    else:
        run.write(dumps({"phases": phases, **_report_dict(chain.impulses),
                         "feasibility": chain.feasibility.as_dict(), "drop_m": chain.drop,
                         "manifest": run.manifest()}))
    return EXIT_OK


def _deviation(measured: float, analytic: float) -> float:
    if analytic == 0.0:
        return 0.0 if measured == 0.0 else math.inf
    return abs(measured / analytic - 1.0)


def cmd_validate(args, run: _Run) -> int:
    closure = _closure(args)
    sc = _scenario(args)
    cfg = _oracle_config(args, closure)
    run.config.update(
        scenario={"entrance_speed_mps": args.v0x, "deployment_height_m": args.height, "landing_angle_deg": args.theta},
        oracle=_config_dict(cfg), tolerance=args.tolerance, convergence=args.convergence,
    )
    level = sc.landing_angle == 0.0
    analytic = simultaneous_landing(run.params, sc, closure) if level else simulate_landing(run.params, sc, closure).impulses
    out = {"mode": "simultaneous-contact" if level else "sequential", "analytic": _report_dict(analytic)}
    diagnostics = []

    p = run.params
    static_sag = p.mass_total * p.gravity / (2.0 * cfg.contact_stiffness)
    if static_sag > 0.5 * p.wheel_radius:
        diagnostics.append(
            f"convergence warning: static penetration {static_sag:.3g} m exceeds half the wheel radius; "
            "contact stiffness is too low for an impact comparison"
        )
        out.update(status="fail", diagnostics=diagnostics, manifest=run.manifest())
        run.write(dumps(out))
        return EXIT_FAILED

    def measure(config):
        res = run_drop(p, sc, config)
        if res.max_penetration > 0.5 * p.wheel_radius:
            diagnostics.append(
                f"convergence warning: peak penetration {res.max_penetration:.3g} m exceeds half the wheel radius"
            )
        return res, measure_impulses(res.episodes)

    try:
        res, oracle = measure(cfg)
    except (DivergenceError, SimulationTimeout) as exc:
        out.update(status="oracle-error", error=exc.to_dict(), manifest=run.manifest())
        run.write(dumps(out))
        return EXIT_ORACLE
    out["oracle"] = _report_dict(oracle)
    out["oracle_simultaneous"] = is_simultaneous(res.episodes)
    dev = {
        "I2": _deviation(oracle.initial_norm, analytic.initial_norm),
        "I4": _deviation(oracle.final_norm, analytic.final_norm),
        "Imax": _deviation(oracle.impulse_max, analytic.impulse_max),
    }
    out["relative_deviation"] = dev
    checks = {name: d <= args.tolerance for name, d in dev.items()}
    if level and not out["oracle_simultaneous"]:
        diagnostics.append("level drop but the oracle wheels did not land together")
        checks["simultaneous"] = False
    if args.convergence:
        half = OracleConfig(**{**_config_dict(cfg), "time_step": cfg.time_step / 2})
        try:
            _, fine = measure(half)
        except (DivergenceError, SimulationTimeout) as exc:
            out.update(status="oracle-error", error=exc.to_dict(), manifest=run.manifest())
            run.write(dumps(out))
            return EXIT_ORACLE
        change = max(_deviation(fine.initial_norm, oracle.initial_norm),
                     _deviation(fine.final_norm, oracle.final_norm))
        out["dt_halving_change"] = change
        checks["convergence"] = change < CONVERGENCE_LIMIT
    if diagnostics:
        checks["penetration"] = False
    out["checks"] = checks
    out["diagnostics"] = diagnostics
    out["status"] = "pass" if all(checks.values()) else "fail"
    out["manifest"] = run.manifest()
    run.write(dumps(out))
    _summary(f"validate: {out['status']} (I2 {dev['I2']:.2%}, I4 {dev['I4']:.2%}, tolerance {args.tolerance:.0%})")
    return EXIT_OK if out["status"] == "pass" else EXIT_FAILED


def cmd_mission(args, run: _Run) -> int:
    closure = _closure(args)
    if args.mission:
        doc = parse_document(args.mission)
        mission = mission_from_mapping(doc)
        run.inputs["mission"] = _digest(args.mission)
        if not getattr(args, "vehicle", None) and "mass_total_kg" in doc:
            run.params = params_from_mapping(doc)
            run.config["vehicle"] = params_to_mapping(run.params)
    else:
        sc = LandingScenario(args.v0x, args.height, math.radians(args.theta), disarm_height=args.disarm_height)
        mission = MissionConfig(scenario=sc, tracking_time_constant=args.tau)
    mission.validate_for(run.params)
    cfg = _oracle_config(args, closure)
    run.config.update(mission=mission_to_mapping(mission), oracle=_config_dict(cfg))
    try:
        trace = run_mission(run.params, mission, cfg, closure)
    except SimulationTimeout as exc:
        _emit_error(exc.to_dict())
        return EXIT_ORACLE
    report = check_event_transitions(trace)
    sc = mission.scenario
    analytic = None
    if sc.landing_angle > 0:
        dep = trace.events[0].state_snapshot
        at_deploy = LandingScenario(dep.com_velocity[0], dep.com_position[1], sc.landing_angle)
        analytic = simulate_landing(run.params, at_deploy, closure).impulses
    events = {
        "events": trace.events_json(),
        "transitions": report.as_dict(),
        "touchdown": trace.touchdown_check(),
        "summary": _report_dict(trace.summary) if trace.summary else None,
        "analytic": _report_dict(analytic) if analytic else None,
    }
    out = getattr(args, "out", None)
    if args.format == "json":
        trace_text = dumps({"header": ["t", "stage", "x", "y", "pitch_deg", "vx", "vy", "pitch_rate"],
                            "rows": [[t, st.value, *r] for t, r, st in
                                     zip(trace.times.tolist(), trace.states.tolist(), trace.stages)]})
    else:
        trace_text = trace.to_csv()
    if out is None:
        events["manifest"] = run.manifest()
        sys.stdout.write(dumps(events))
    else:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"trace.{args.format or 'csv'}").write_text(trace_text)
        (d / "events.json").write_text(dumps(events))
        run.write_manifest_into(d)
    td = events["touchdown"]
    _summary(f"mission: transitions {'pass' if report.passed else 'FAIL'}; touchdown vy "
             f"{td['measured_vy']:.6g} vs {td['expected_vy']:.6g} m/s ({td['relative_error']:.3%})")
    return EXIT_OK if report.passed else EXIT_FAILED


COMMANDS = {
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "mission": cmd_mission,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = "csv" if args.command == "sweep" else "json"
        if args.command == "mission":
            args.format = "csv"
    try:
        inputs = {}
        vehicle = getattr(args, "vehicle", None)
        if vehicle:
            inputs["vehicle"] = _digest(vehicle) if Path(vehicle).is_file() else {"path": vehicle}
        params = load_vehicle_params(vehicle)
        run = _Run(args, params, inputs)
        return COMMANDS[args.command](args, run)
    except ParameterError as exc:
        _emit_error(exc.to_dict())
        return EXIT_INPUT
    except (DivergenceError, SimulationTimeout) as exc:
        _emit_error(exc.to_dict())
        return EXIT_ORACLE
    except AMTError as exc:
        _emit_error(exc.to_dict())
        return EXIT_MODEL
    except OSError as exc:
        _emit_error({"error": "io", "message": str(exc)})
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
