"""Command-line entry point (``rl2adn``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .devices import FleetError, load_fleet
from .environment import AdnEnv, evaluate_typical_day
from .grid import CaseError, PowerFlowError, load_case, solve_power_flow
from .llm import LlmError
from .orchestrator import Rl2Abort, run_rl2, write_manifest
from .penalty import BRANCH_FN, VOLTAGE_FN, DslError, ProgramError, parse_program, self_verify
from .sac import load_checkpoint, save_checkpoint, train

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("rl2adn")


class UsageError(Exception):
    """Bad configuration or arguments (exit code 2)."""


def default_program_text(v_min: float, v_max: float, s_max: float) -> str:
    return (
        f"fn {VOLTAGE_FN}(v) = if v < {v_min!r} then 1000 * ({v_min!r} - v)^2 "
        f"else if v > {v_max!r} then 1000 * (v - {v_max!r})^2 else 0\n"
        f"fn {BRANCH_FN}(s) = if s > {s_max!r} then 100 * (s - {s_max!r})^2 else 0\n"
    )


def _read_program(path: str | None, case):
    if path is None:
        text = default_program_text(case.v_min, case.v_max, float(case.capacities.min()))
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read program {path}: {exc.strerror}") from None
    try:
        return parse_program(text)
    except (DslError, ProgramError) as exc:
        raise UsageError(f"invalid penalty program: {exc}") from None


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "episodes", None):
        cfg = replace(cfg, sac=replace(cfg.sac, episodes=args.episodes))
    if getattr(args, "seeds", None):
        cfg = replace(cfg, rl2=replace(cfg.rl2, seeds=tuple(args.seeds)))
    if getattr(args, "iterations", None):
        cfg = replace(cfg, rl2=replace(cfg.rl2, iterations=args.iterations))
    return cfg


def _load_grid(case_ref: str, fleet_ref: str | None = None):
    case = load_case(case_ref)
    fleet = load_fleet(fleet_ref) if fleet_ref else None
    return case, fleet


# commands -------------------------------------------------------------------


def cmd_pf(args) -> int:
    case = load_case(args.case)
    p = -case.p_load
    q = -case.q_load
    if args.loads:
        data = json.loads(Path(args.loads).read_text(encoding="utf-8"))
        p = -np.asarray(data["p_load_mw"], dtype=float)
        q = -np.asarray(data["q_load_mvar"], dtype=float)
        if p.shape != (case.n_bus,) or q.shape != (case.n_bus,):
            raise UsageError(f"loads file must list {case.n_bus} values per quantity")
    sol = solve_power_flow(case, p, q)
    i_min, i_max = int(np.argmin(sol.V)), int(np.argmax(sol.V))
    out = {
        "case": case.name,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "v_min": float(sol.V[i_min]),
        "v_min_bus": i_min + 1,
        "v_max": float(sol.V[i_max]),
        "v_max_bus": i_max + 1,
        "p0_mw": sol.P_0,
        "q0_mvar": sol.Q_0,
        "losses_mw": sol.losses_mw,
        "max_branch_mva": float(sol.S_brch.max()) if sol.S_brch.size else 0.0,
    }
    if args.json:
        print(json.dumps({**out, "V": sol.V.tolist(), "theta": sol.theta.tolist(), "S_brch": sol.S_brch.tolist()}))
    else:
        print(f"case {case.name}: converged in {sol.iterations} iterations, residual {sol.residual:.2e} p.u.")
        print(f"min voltage {out['v_min']:.6f} p.u. at bus {out['v_min_bus']}")
        print(f"max voltage {out['v_max']:.6f} p.u. at bus {out['v_max_bus']}")
        print(f"slack power {sol.P_0:.6f} MW / {sol.Q_0:.6f} MVAr, losses {sol.losses_mw:.6f} MW")
        print(f"max branch apparent power {out['max_branch_mva']:.6f} MVA")
    return EXIT_OK


def cmd_verify(args) -> int:
    case = load_case(args.case)
    try:
        text = Path(args.program).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read program {args.program}: {exc.strerror}") from None
    report = self_verify(text, case.v_min, case.v_max, float(case.capacities.min()))
    print(json.dumps(report.to_dict(), indent=2) if args.json else report.summary())
    return EXIT_OK if report.overall else EXIT_FAIL


def cmd_train(args) -> int:
    cfg = _config(args)
    case, fleet = _load_grid(cfg.case, cfg.fleet)
    program = _read_program(args.program, case)
    report = self_verify(program, case.v_min, case.v_max, float(case.capacities.min()))
    if not report.overall:
        print(report.summary())
        return EXIT_FAIL
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out, "train", {"program": program.canonical_text(), "seed": args.seed})
    (out / "program.dsl").write_text(program.canonical_text(), encoding="utf-8")
    env = AdnEnv(case, fleet, cfg.env, program)

    def progress(ep, row):
        if args.verbose and (ep % 10 == 0 or ep == cfg.sac.episodes - 1):
            log.info("episode %d: cost %.4f vvr %.3e reward %.3f", ep, row["cost"], row["vvr"], row["reward"])

    agent, res = train(env, program, cfg.sac, seed=args.seed, episode_log=out / "episodes.csv", progress=progress)
    save_checkpoint(agent, out / "policy.npz")
    (out / "training.json").write_text(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"trained {cfg.sac.episodes} episodes; converged reward {res.converged_reward:.4f}")
    print(f"checkpoint written to {out / 'policy.npz'}")
    return EXIT_OK


def cmd_test(args) -> int:
    cfg = _config(args)
    case, fleet = _load_grid(cfg.case, cfg.fleet)
    program = _read_program(args.program, case)
    try:
        agent = load_checkpoint(args.checkpoint)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load checkpoint {args.checkpoint}: {exc}") from None
    env = AdnEnv(case, fleet, cfg.env)
    if agent.state_dim != env.state_dim or agent.action_dim != env.action_dim:
        raise UsageError("checkpoint does not match the configured case and fleet")
    rec = evaluate_typical_day(agent.deterministic_policy(), case, fleet, program, cfg.env, log_path=args.log)
    d = rec.to_dict()
    summary = {k: d[k] for k in ("cost", "vvr", "bvr", "voltage_violation_times", "branch_violation_times", "failed_steps")}
    print(json.dumps(summary, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_rl2(args) -> int:
    cfg = _config(args)
    fixtures = args.mock
    if fixtures is None and cfg.llm.kind == "mock" and not cfg.llm.fixtures_dir:
        raise UsageError("mock provider selected but no fixtures directory given (use --mock DIR)")
    out = Path(args.out or cfg.out_dir)
    results = run_rl2(cfg, out, fixtures, jobs=args.jobs)
    for seed, reports in results.items():
        for r in reports:
            print(f"seed {seed} round {r.round}: {r.label}, cost {r.test.cost:.4f}, vvr {r.test.vvr:.3e}, bvr {r.test.bvr:.3e}")
    print(f"results written to {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import plot_run

    written = plot_run(Path(args.run_dir))
    for p in written:
        print(p)
    return EXIT_OK


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rl2adn", description="Penalty-designed safe RL for distribution-network energy management.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("pf", help="solve a power flow and print the voltage range")
    s.add_argument("case", help="case JSON file or bundled name (ieee33, ieee69, tiny4)")
    s.add_argument("--loads", help="JSON with p_load_mw and q_load_mvar arrays replacing the base loads")
    s.add_argument("--json", action="store_true", help="print the full solution as JSON")
    s.set_defaults(func=cmd_pf)

    s = sub.add_parser("verify-penalty", help="self-verify a penalty program")
    s.add_argument("program", help="program file with both penalty functions")
    s.add_argument("--case", required=True, help="case providing the limits")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("train", help="train a SAC policy under a fixed penalty program")
    s.add_argument("--config", help="TOML or JSON run configuration")
    s.add_argument("--program", help="penalty program (default: quadratic outside the case limits)")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--episodes", type=int)
    s.add_argument("--out", help="output directory (default: out_dir of the config)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("test", help="run a trained policy over the typical day")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--config", help="TOML or JSON run configuration")
    s.add_argument("--program", help="penalty program used for the reward terms")
    s.add_argument("--log", help="write the per-step CSV log here")
    s.add_argument("--out", help="write the full test record (JSON) here")
    s.set_defaults(func=cmd_test)

    s = sub.add_parser("rl2", help="run the multi-round LLM penalty design loop")
    s.add_argument("--config", help="TOML or JSON run configuration")
    s.add_argument("--mock", help="directory of scripted round_NN.txt replies (no network)")
    s.add_argument("--out", help="run directory (default: out_dir of the config)")
    s.add_argument("--seeds", type=int, nargs="+")
    s.add_argument("--iterations", type=int, help="number of design rounds K")
    s.add_argument("--episodes", type=int, help="training episodes per round")
    s.add_argument("--jobs", type=int, default=1, help="seeds to run in parallel")
    s.set_defaults(func=cmd_rl2)

    s = sub.add_parser("plot", help="plot training curves and tables of a run directory")
    s.add_argument("run_dir")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError, CaseError, FleetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PowerFlowError, Rl2Abort, LlmError, OSError, RuntimeError, ValueError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
