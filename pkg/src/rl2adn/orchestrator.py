"""Multi-round penalty design loop: design, verify, train, test, feed back."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .devices import load_fleet
from .environment import AdnEnv, StepLogger, TestRecord, evaluate_typical_day
from .grid import NetworkCase, load_case
from .llm import (
    DialogueHistory,
    ExtractionError,
    build_reinforcement_prompt,
    extract_program,
    make_provider,
    regeneration_message,
    system_prompt_for,
)
from .penalty import GRAMMAR_TEXT, PenaltyProgram, self_verify
from .report import GOOD, RoundReport, label_round
from .sac import SacAgent, save_checkpoint, train

log = logging.getLogger(__name__)

TABLE_FIELDS = [
    "round",
    "stage",
    "seeds",
    "cost_mean",
    "cost_std",
    "vvr_mean",
    "vvr_std",
    "bvr_mean",
    "bvr_std",
    "violation_times_mean",
    "violation_times_std",
    "good_fraction",
]


class Rl2Abort(RuntimeError):
    """A round could not produce a usable program; earlier artifacts are kept."""


@dataclass
class SeedRun:
    seed: int
    reports: list[RoundReport]
    history: DialogueHistory
    program: PenaltyProgram | None
    policy: SacAgent | None


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def design_program(
    history: DialogueHistory,
    provider,
    case: NetworkCase,
    max_attempts: int,
) -> tuple[PenaltyProgram, str, dict, int]:
    """Ask for a program until one passes extraction and self-verification.

    Failed attempts and the corrective requests stay in the history, tagged
    ``regeneration``.
    """
    s_max = float(case.capacities.min())
    diagnostic = ""
    for attempt in range(1, max_attempts + 1):
        tag = None if attempt == 1 else "regeneration"
        if attempt > 1:
            history.add("user", regeneration_message(diagnostic), tag="regeneration")
        text = provider.chat(history)
        history.add("assistant", text, tag=tag)
        try:
            program = extract_program(text)
        except ExtractionError as exc:
            diagnostic = str(exc)
            log.info("attempt %d: extraction failed (%s)", attempt, diagnostic)
            continue
        report = self_verify(program, case.v_min, case.v_max, s_max)
        if report.overall:
            return program, text, report.to_dict(), attempt
        diagnostic = "self-verification failed.\n" + report.summary()
        log.info("attempt %d: verification failed", attempt)
    raise Rl2Abort(f"no usable penalty program after {max_attempts} attempt(s); last problem: {diagnostic}")


def _seed_dir(out: Path, seed: int) -> Path:
    return out / f"seed_{seed}"


def run_seed(config: RunConfig, seed: int, out_dir: str | Path, fixtures_dir: str | None = None) -> SeedRun:
    """One dialogue for one seed, following the design/train/test/feedback loop."""
    case = load_case(config.case)
    fleet = load_fleet(config.fleet)
    out = _seed_dir(Path(out_dir), seed)
    out.mkdir(parents=True, exist_ok=True)
    rl2 = config.rl2
    provider = make_provider(config.llm, fixtures_dir)
    history = DialogueHistory()
    history.add("system", system_prompt_for(case, fleet, GRAMMAR_TEXT, rl2.threshold))
    reports: list[RoundReport] = []
    program: PenaltyProgram | None = None
    agent: SacAgent | None = None
    best_cost = float("inf")
    try:
        for k in range(rl2.iterations):
            rdir = out / f"round_{k:02d}"
            rdir.mkdir(exist_ok=True)
            t0 = time.perf_counter()
            program, raw, verification, attempts = design_program(history, provider, case, rl2.max_attempts)
            canonical = program.canonical_text()
            installed = _install(program, canonical)
            (rdir / "program.dsl").write_text(canonical, encoding="utf-8")
            (rdir / "response.txt").write_text(raw, encoding="utf-8")
            _dump(rdir / "verification.json", verification)
            t1 = time.perf_counter()

            env = AdnEnv(case, fleet, config.env, installed)
            agent, training = train(
                env,
                installed,
                config.sac,
                seed=seed,
                episode_log=rdir / "episodes.csv",
            )
            save_checkpoint(agent, rdir / "policy.npz")
            _dump(rdir / "training.json", training.to_dict())
            t2 = time.perf_counter()

            test = evaluate_typical_day(
                agent.deterministic_policy(), case, fleet, installed, config.env, log_path=rdir / "steps.csv"
            )
            label = label_round(test, rl2.threshold)
            _dump(rdir / "test.json", test.to_dict())
            t3 = time.perf_counter()

            report = RoundReport(
                round=k,
                program_text=canonical,
                raw_response=raw,
                label=label,
                converged_reward=training.converged_reward,
                test=test,
                threshold=rl2.threshold,
                verification=verification,
                attempts=attempts,
                training_summary={
                    "first_window_vvr": training.window_mean("episode_vvr", True, config.sac.converged_window),
                    "last_window_vvr": training.window_mean("episode_vvr", False, config.sac.converged_window),
                    "last_window_cost": training.window_mean("episode_costs", False, config.sac.converged_window),
                },
                timings={"design_s": t1 - t0, "train_s": t2 - t1, "test_s": t3 - t2},
            )
            reports.append(report)
            history.add("user", build_reinforcement_prompt(report))
            history.save(rdir / "transcript.jsonl")
            _dump(rdir / "report.json", _report_summary(report))
            _dump(rdir / "timings.json", report.timings)
            log.info("seed %d round %d: %s, cost %.4f, vvr %.3e", seed, k, label, test.cost, test.vvr)
            if rl2.early_stop and label == GOOD and test.cost <= 1.1 * best_cost:
                break
            best_cost = min(best_cost, test.cost)
    finally:
        history.save(out / "transcript.jsonl")
    if program is not None:
        (out / "final_program.dsl").write_text(program.canonical_text(), encoding="utf-8")
    if agent is not None:
        save_checkpoint(agent, out / "final_policy.npz")
    return SeedRun(seed, reports, history, program, agent)


def _install(program: PenaltyProgram, canonical: str) -> PenaltyProgram:
    # The installed program is rebuilt from the recorded canonical text, so
    # training uses exactly the bytes written to program.dsl.
    from .penalty import parse_program

    return parse_program(canonical)


def _report_summary(r: RoundReport) -> dict:
    return {
        "round": r.round,
        "label": r.label,
        "threshold": r.threshold,
        "attempts": r.attempts,
        "converged_reward": r.converged_reward,
        "cost": r.test.cost,
        "vvr": r.test.vvr,
        "bvr": r.test.bvr,
        "voltage_violation_times": r.test.voltage_violation_times,
        "branch_violation_times": r.test.branch_violation_times,
        "training": r.training_summary,
    }


def _stage(k: int, n: int) -> str:
    if k == 0:
        return "initial"
    return "final" if k == n - 1 else "intermediate"


def aggregate_seeds(reports_per_seed: dict[int, list[RoundReport]] | list[list[RoundReport]]) -> list[dict]:
    """Mean and population standard deviation of the test metrics per round."""
    runs = list(reports_per_seed.values()) if isinstance(reports_per_seed, dict) else list(reports_per_seed)
    if not runs:
        raise ValueError("need at least one seed")
    n_rounds = max(len(r) for r in runs)
    rows = []
    for k in range(n_rounds):
        tests: list[TestRecord] = [r[k].test for r in runs if len(r) > k]
        labels = [r[k].label for r in runs if len(r) > k]
        cost = np.array([t.cost for t in tests])
        vvr = np.array([t.vvr for t in tests])
        bvr = np.array([t.bvr for t in tests])
        vt = np.array([t.voltage_violation_times + t.branch_violation_times for t in tests], dtype=float)
        rows.append(
            {
                "round": k,
                "stage": _stage(k, n_rounds),
                "seeds": len(tests),
                "cost_mean": float(cost.mean()),
                "cost_std": float(cost.std()),
                "vvr_mean": float(vvr.mean()),
                "vvr_std": float(vvr.std()),
                "bvr_mean": float(bvr.mean()),
                "bvr_std": float(bvr.std()),
                "violation_times_mean": float(vt.mean()),
                "violation_times_std": float(vt.std()),
                "good_fraction": labels.count(GOOD) / len(labels),
            }
        )
    return rows


def table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.6e}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def write_manifest(config: RunConfig, out: Path, command: str, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config_file": config.source,
        "config": config.to_dict(),
        "version": __version__,
        "seeds": list(config.rl2.seeds),
        "decisions": {
            "violation_threshold": config.rl2.threshold,
            "iterations": config.rl2.iterations,
            "max_attempts": config.rl2.max_attempts,
            "violation_times_unit": "bus-steps plus branch-steps",
            "label_rule": "bad iff violation times > threshold",
        },
        "started": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **(extra or {}),
    }
    _dump(out / "manifest.json", manifest)


def _run_seed_job(args):
    config, seed, out_dir, fixtures = args
    run = run_seed(config, seed, out_dir, fixtures)
    return seed, run.reports


def run_rl2(
    config: RunConfig,
    out_dir: str | Path | None = None,
    fixtures_dir: str | None = None,
    jobs: int = 1,
    command: str = "rl2",
) -> dict[int, list[RoundReport]]:
    """Run every configured seed, then write the aggregated table."""
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(config, out, command, {"fixtures_dir": fixtures_dir or config.llm.fixtures_dir})
    results: dict[int, list[RoundReport]] = {}
    jobs_args = [(config, s, str(out), fixtures_dir) for s in config.rl2.seeds]
    if jobs > 1 and len(jobs_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for seed, reports in pool.map(_run_seed_job, jobs_args):
                results[seed] = reports
    else:
        for a in jobs_args:
            seed, reports = _run_seed_job(a)
            results[seed] = reports
    ordered = {s: results[s] for s in config.rl2.seeds}
    (out / "table3.csv").write_text(table_csv(aggregate_seeds(ordered)), encoding="utf-8")
    return ordered


def load_reports(run_dir: str | Path) -> dict[int, list[dict]]:
    """Read per-round report summaries back from a run directory."""
    run_dir = Path(run_dir)
    out: dict[int, list[dict]] = {}
    for sdir in sorted(run_dir.glob("seed_*"), key=lambda p: int(p.name.split("_")[1])):
        seed = int(sdir.name.split("_")[1])
        rounds = []
        for rdir in sorted(sdir.glob("round_*")):
            rp = rdir / "report.json"
            if rp.exists():
                rounds.append(json.loads(rp.read_text(encoding="utf-8")))
        out[seed] = rounds
    return out


__all__ = [
    "Rl2Abort",
    "SeedRun",
    "StepLogger",
    "aggregate_seeds",
    "design_program",
    "label_round",
    "load_reports",
    "run_rl2",
    "run_seed",
    "table_csv",
    "write_manifest",
]
