"""End-to-end acceptance checks, one per criterion.

Each test records a ``PASS``/``FAIL`` line that is printed in the terminal
summary (see ``conftest.py``) and fails on ``FAIL``. Criterion 7 trains three
full-size rounds and takes most of the suite's runtime.
"""

import json
import time

import numpy as np
import pytest

import gradcheck
from conftest import ROOT, case_dict, fleet_dict, record
from fuzz_corpus import invalid_corpus, valid_programs
from oracles import backward_forward_sweep, count_violations, dp_dispatch, gauss_seidel, soc_next
from rl2adn.cli import default_program_text
from rl2adn.config import load_config
from rl2adn.devices import load_fleet, project_setpoints, setpoints_to_raw, step_soc
from rl2adn.environment import AdnEnv, compute_bvr, compute_vvr, evaluate_typical_day, typical_day
from rl2adn.grid import load_case, solve_power_flow
from rl2adn.llm import DialogueHistory
from rl2adn.orchestrator import run_rl2
from rl2adn.penalty import parse_program, self_verify
from rl2adn.report import BAD, GOOD, label_round
from rl2adn.sac import train
from test_devices import _random_state
from test_environment import constructed_solutions


def verdict(n, ok, detail):
    record(n, ok, detail)
    assert ok, f"criterion {n}: {detail}"


def test_criterion_1_power_flow():
    worst, worst_it, worst_res, elapsed = 0.0, 0, 0.0, 0.0
    for name, oracle in (("ieee33", gauss_seidel), ("ieee69", backward_forward_sweep)):
        case = load_case(name)
        p, q = -case.p_load, -case.q_load
        t0 = time.perf_counter()
        sol = solve_power_flow(case, p, q)
        elapsed += time.perf_counter() - t0
        kw = {"tol": 1e-13} if oracle is gauss_seidel else {}
        V, _ = oracle(case_dict(name), p, q, **kw)
        worst = max(worst, float(np.max(np.abs(sol.V - np.abs(V)))))
        worst_it, worst_res = max(worst_it, sol.iterations), max(worst_res, sol.residual)
    ok = worst_it <= 10 and worst_res < 1e-8 and worst <= 1e-6 and elapsed < 1.0
    verdict(1, ok, f"iterations {worst_it}, residual {worst_res:.1e}, max |dV| {worst:.1e}, NR time {elapsed:.3f} s")


def test_criterion_2_gradients():
    t0 = time.perf_counter()
    c_err, p_err = gradcheck.run(n=100, seed=2024)
    elapsed = time.perf_counter() - t0
    ok = c_err < 1e-5 and p_err < 1e-5 and elapsed < 60
    verdict(2, ok, f"max rel error critic {c_err:.1e}, policy {p_err:.1e} over 100 problems, {elapsed:.1f} s")


def _capability_ok(fleet, sp, pr, soc, pv, dt):
    for k, p in enumerate(fleet.pvs):
        if pv[k] ** 2 + sp.q_pv[k] ** 2 > p.s_max**2 * (1 + 1e-12):
            return False
    for k, d in enumerate(fleet.dgs):
        if not (d.p_min <= sp.p_dg[k] <= d.p_max and d.q_min <= sp.q_dg[k] <= d.q_max):
            return False
        if not pr.p_dg[k] - d.ramp_down - 1e-12 <= sp.p_dg[k] <= pr.p_dg[k] + d.ramp_up + 1e-12:
            return False
    for k, b in enumerate(fleet.besss):
        nxt = step_soc(soc[k], sp.p_bess[k], dt, b.eta, b.soc_min, b.soc_max)
        if nxt.clamped and abs(nxt.soc - soc_next(soc[k], sp.p_bess[k], dt, b.eta)) >= 1e-12:
            return False
    return True


def _flat(sp):
    return np.concatenate([sp.p_dg, sp.p_bess, sp.q_dg, sp.q_pv])


def test_criterion_3_device_physics():
    eta, dt, energy = 0.9, 0.25, 0.4
    stored = step_soc(1.0, -energy / dt, dt, eta).soc
    p_out = (stored - 1.0) * eta / dt
    back = step_soc(stored, p_out, dt, eta).soc
    loss = p_out * dt / energy
    round_trip = abs(loss - 0.81) <= 1e-15 and abs(back - 1.0) <= 1e-15

    fleet = load_fleet("ieee33")
    rng = np.random.default_rng(0)
    cap = idem = 0
    worst = 0.0
    for _ in range(10_000):
        pr, soc, pv = _random_state(rng, fleet)
        sp = project_setpoints(rng.uniform(-1.5, 1.5, fleet.action_dim), fleet, pr, soc, pv, dt)
        cap += _capability_ok(fleet, sp, pr, soc, pv, dt)
    for _ in range(10_000):
        pr, soc, pv = _random_state(rng, fleet)
        sp = project_setpoints(rng.uniform(-1, 1, fleet.action_dim), fleet, pr, soc, pv, dt)
        again = project_setpoints(setpoints_to_raw(sp, fleet, pr, soc, pv, dt), fleet, pr, soc, pv, dt)
        err = float(np.max(np.abs(_flat(sp) - _flat(again))))
        worst = max(worst, err)
        idem += err < 1e-12
    ok = round_trip and cap == 10_000 and idem == 10_000
    verdict(
        3,
        ok,
        f"round trip returns {loss:.15f} E, capability {cap}/10000, idempotence {idem}/10000 (max {worst:.1e})",
    )


def test_criterion_4_metrics():
    cases = list(constructed_solutions())
    agree = 0
    for v, s, caps in cases:
        nv, nb = count_violations(v, 0.95, 1.05, s, caps)
        agree += compute_vvr(v, 0.95, 1.05) == nv / v.size and compute_bvr(s, caps) == nb / s.size
    v = np.ones(33)
    v[[4, 10, 20]] = [0.94, 1.06, 0.90]
    s = np.full(32, 4.0)
    s[[1, 7]] = 5.2
    named = compute_vvr(v, 0.95, 1.05) == 3 / 33 and compute_bvr(s, np.full(32, 5.0)) == 2 / 32
    ok = agree == 50 and named
    verdict(4, ok, f"{agree}/50 constructed solutions agree, 3/33 and 2/32 cases {named}")


def test_criterion_5_dsl():
    corpus = invalid_corpus(200)
    rejected = round_trip = 0
    for _, text in corpus:
        prog = parse_program(text)
        rejected += not self_verify(prog, 0.95, 1.05, 5.0).overall
        again = parse_program(prog.canonical_text())
        round_trip += again.voltage.ast == prog.voltage.ast and again.branch.ast == prog.branch.ast
    shipped = sorted((ROOT / "programs").glob("*.dsl"))
    shipped_ok = sum(self_verify(p.read_text(), 0.95, 1.05, 5.0).overall for p in shipped)
    valid_ok = sum(self_verify(t, 0.95, 1.05, 5.0).overall for t in valid_programs())
    kinds = sorted({k for k, _ in corpus})
    ok = rejected == 200 and round_trip == 200 and shipped_ok == len(shipped) and valid_ok == 20
    verdict(
        5,
        ok,
        f"rejected {rejected}/200 ({', '.join(kinds)}), round trip {round_trip}/200, "
        f"shipped {shipped_ok}/{len(shipped)}, generated valid {valid_ok}/20",
    )


def test_criterion_6_tiny_case_optimality():
    cfg = load_config(ROOT / "configs" / "tiny4.toml")
    case, fleet = load_case(cfg.case), load_fleet(cfg.fleet)
    prof = typical_day(cfg.env, case, fleet)
    t0 = time.perf_counter()
    dp = dp_dispatch(
        case_dict("tiny4"), fleet_dict("tiny4"), prof.load_mult, prof.pv_avail[:, 0],
        prof.prices.buy, prof.prices.sell, cfg.env.dt,
    )
    program = parse_program(default_program_text(case.v_min, case.v_max, float(case.capacities.min())))
    ratios = []
    for seed in cfg.rl2.seeds:
        env = AdnEnv(case, fleet, cfg.env, program)
        agent, _ = train(env, program, cfg.sac, seed=seed)
        rec = evaluate_typical_day(agent.deterministic_policy(), case, fleet, program, cfg.env)
        ratios.append(rec.cost / dp["cost"])
    elapsed = time.perf_counter() - t0
    wins = sum(r <= 1.1 for r in ratios)
    ok = wins >= 4 and elapsed < 300
    detail = ", ".join(f"{r:.3f}" for r in ratios)
    verdict(6, ok, f"{wins}/5 seeds within 10% of DP cost {dp['cost']:.4f} (ratios {detail}), {elapsed:.0f} s")


@pytest.mark.slow
def test_criterion_7_three_round_trend(tmp_path_factory):
    cfg = load_config(ROOT / "configs" / "full33.toml")
    out = tmp_path_factory.mktemp("full33")
    t0 = time.perf_counter()
    reports = run_rl2(cfg, out, str(ROOT / "fixtures" / "3round"))[cfg.rl2.seeds[0]]
    elapsed = time.perf_counter() - t0
    vvr = [r.test.vvr for r in reports]
    cost = [r.test.cost for r in reports]
    monotone = len(vvr) == 3 and all(b <= a for a, b in zip(vvr, vvr[1:])) and vvr[-1] < vvr[0]
    ok = monotone and vvr[-1] <= 1.4e-2 and cost[-1] <= 1.25 * cost[0]
    (out / "criterion7.json").write_text(json.dumps({"vvr": vvr, "cost": cost, "seconds": elapsed}))
    verdict(
        7,
        ok,
        "VVR " + " > ".join(f"{v:.2e}" for v in vvr)
        + f", final cost {cost[-1]:.3f} = {cost[-1] / cost[0]:.3f} x round 0, {elapsed / 60:.1f} min",
    )


def _quick_run(out):
    cfg = load_config(ROOT / "configs" / "quick.toml")
    t0 = time.perf_counter()
    reports = run_rl2(cfg, out, str(ROOT / "fixtures" / "3round"))[1]
    return cfg, reports, time.perf_counter() - t0


def test_criterion_8_algorithm_fidelity(tmp_path):
    cfg, first, t1 = _quick_run(tmp_path / "a")
    _, second, t2 = _quick_run(tmp_path / "b")
    history = DialogueHistory.load(tmp_path / "a" / "seed_1" / "transcript.jsonl")
    seq_ok = [m.role for m in history] == ["system"] + ["assistant", "user"] * 3
    labels_ok = all(r.label_is_consistent() for r in first)

    def rec(vt):
        from rl2adn.environment import TestRecord

        return TestRecord(cost=1.0, vvr=0.0, bvr=0.0, voltage_violation_times=vt, branch_violation_times=0, steps=96)

    boundary_ok = [label_round(rec(n), 10) for n in (0, 10, 11)] == [GOOD, GOOD, BAD]
    files = ("test.json", "training.json", "steps.csv", "program.dsl")
    identical = all(
        (tmp_path / "a" / f"seed_1/round_{k:02d}" / f).read_bytes()
        == (tmp_path / "b" / f"seed_1/round_{k:02d}" / f).read_bytes()
        for k in range(3)
        for f in files
    ) and [r.to_dict()["test"] for r in first] == [r.to_dict()["test"] for r in second]
    ok = len(first) == 3 and seq_ok and labels_ok and boundary_ok and identical and max(t1, t2) < 120
    verdict(
        8,
        ok,
        f"{len(first)} reports, history {'ok' if seq_ok else 'wrong'}, labels {[r.label for r in first]}, "
        f"boundary {boundary_ok}, bit-identical {identical}, {cfg.sac.episodes}-episode run {max(t1, t2):.0f} s",
    )
