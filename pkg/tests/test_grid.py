import copy

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import case_dict
from oracles import admittance_matrix, backward_forward_sweep, branch_apparent_power, gauss_seidel
from rl2adn.grid import (
    CaseError,
    PowerFlowError,
    build_admittance,
    case_from_dict,
    case_to_dict,
    load_case,
    mismatch,
    solve_power_flow,
)
from rl2adn.grid import kernels


def two_bus(r, x):
    return case_from_dict(
        {
            "name": "two",
            "base_mva": 1.0,
            "v_min": 0.95,
            "v_max": 1.05,
            "buses": [
                {"id": 0, "kind": "slack", "p_load_mw": 0, "q_load_mvar": 0},
                {"id": 1, "kind": "pq", "p_load_mw": 0, "q_load_mvar": 0},
            ],
            "branches": [{"from": 0, "to": 1, "r_pu": r, "x_pu": x, "capacity_mva": 1.0}],
        }
    )


def base_injections(case):
    return -case.p_load, -case.q_load


def test_bundled_case_shapes():
    c33 = load_case("ieee33")
    assert (c33.n_bus, c33.n_branch) == (33, 32)
    assert np.all(c33.capacities == 5.0)
    c69 = load_case("ieee69.json")
    assert c69.n_bus == 69
    assert np.all(c69.capacities == 4.7)


def test_case_round_trips_through_dict():
    c = load_case("ieee33")
    assert case_from_dict(case_to_dict(c)) == c


def test_two_slack_buses_rejected():
    d = case_dict("tiny4")
    d["buses"][2]["kind"] = "slack"
    with pytest.raises(CaseError, match="slack"):
        case_from_dict(d)


@pytest.mark.parametrize(
    "mutate, msg",
    [
        (lambda d: d["branches"].pop(), "disconnected"),
        (lambda d: d["branches"][0].update(r_pu=0.0, x_pu=0.0), "zero impedance"),
        (lambda d: d["branches"][0].update(capacity_mva=0.0), "capacity"),
        (lambda d: d.update(v_min=1.1), "v_min"),
        (lambda d: d["buses"][1].update(id=7), "contiguous"),
    ],
)
def test_schema_violations(mutate, msg):
    d = case_dict("tiny4")
    mutate(d)
    with pytest.raises(CaseError, match=msg):
        case_from_dict(d)


def test_pure_reactance_admittance():
    Y = build_admittance(two_bus(0.0, 0.5))
    assert Y[0, 1] == pytest.approx(2.0j)
    assert Y[0, 0] == pytest.approx(-2.0j)


def test_series_admittance_division():
    Y = build_admittance(two_bus(0.1, 0.2))
    assert Y[0, 1] == pytest.approx(-2.0 + 4.0j)


def test_admittance_matches_oracle_and_absent_branches_are_zero():
    c = load_case("ieee33")
    Y = build_admittance(c)
    assert np.allclose(Y, admittance_matrix(case_to_dict(c)), atol=1e-12)
    assert Y[0, 20] == 0
    np.testing.assert_allclose(Y.sum(axis=1), 0, atol=1e-9)


def test_no_load_flat_solution():
    c = load_case("ieee33")
    sol = solve_power_flow(c, np.zeros(c.n_bus), np.zeros(c.n_bus))
    assert np.all(sol.V == 1.0) and np.all(sol.theta == 0.0)
    assert sol.P_0 == 0.0 and np.all(sol.S_brch == 0.0)


@pytest.mark.parametrize(
    "name, oracle",
    [("ieee33", gauss_seidel), ("tiny4", gauss_seidel), ("ieee33", backward_forward_sweep), ("ieee69", backward_forward_sweep)],
)
def test_base_loads_match_reference_solver(name, oracle):
    c = load_case(name)
    p, q = base_injections(c)
    sol = solve_power_flow(c, p, q)
    assert sol.converged and sol.iterations <= 10 and sol.residual < 1e-8
    V, _ = oracle(case_to_dict(c), p, q, tol=1e-12)
    np.testing.assert_allclose(sol.V, np.abs(V), atol=1e-6)
    np.testing.assert_allclose(sol.theta, np.angle(V), atol=1e-6)
    np.testing.assert_allclose(sol.S_brch, branch_apparent_power(case_to_dict(c), V), rtol=1e-5, atol=1e-6)
    assert sol.V[c.slack] == 1.0 and sol.theta[c.slack] == 0.0
    assert mismatch(c, sol, p, q).max() < 1e-8


def test_losses_equal_slack_minus_net_load():
    c = load_case("ieee33")
    p, q = base_injections(c)
    sol = solve_power_flow(c, p, q)
    assert sol.P_0 + p.sum() == pytest.approx(sol.losses_mw, abs=1e-5)  # residual tolerance times base power
    assert sol.losses_mw > 0


def test_heavy_load_does_not_converge():
    c = load_case("ieee33")
    p, q = base_injections(c)
    with pytest.raises(PowerFlowError) as info:
        solve_power_flow(c, 1000 * p, 1000 * q)
    assert not info.value.solution.converged


def test_renumbering_buses_permutes_the_solution():
    d = case_dict("ieee33")
    rng = np.random.default_rng(3)
    perm = np.concatenate([[0], 1 + rng.permutation(32)])  # new id of old bus i is perm[i]
    e = copy.deepcopy(d)
    buses = [None] * 33
    for old, b in enumerate(d["buses"]):
        buses[perm[old]] = {**b, "id": int(perm[old])}
    e["buses"] = buses
    for br in e["branches"]:
        br["from"], br["to"] = int(perm[br["from"]]), int(perm[br["to"]])
    c1, c2 = case_from_dict(d), case_from_dict(e)
    s1 = solve_power_flow(c1, *base_injections(c1))
    s2 = solve_power_flow(c2, *base_injections(c2))
    np.testing.assert_allclose(s2.V[perm], s1.V, atol=1e-10)
    np.testing.assert_allclose(s2.S_brch, s1.S_brch, atol=1e-10)


def test_capacity_scaling_leaves_voltages_alone():
    c = load_case("ieee33")
    s1 = solve_power_flow(c, *base_injections(c))
    c2 = c.with_capacities(2.0)
    s2 = solve_power_flow(c2, *base_injections(c2))
    assert np.all(c2.capacities == 10.0)
    np.testing.assert_array_equal(s1.V, s2.V)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.6), st.floats(0.05, 1.6), st.integers(0, 10_000))
def test_random_loadings_agree_with_gauss_seidel(p_scale, q_scale, seed):
    c = load_case("tiny4")
    rng = np.random.default_rng(seed)
    p = -c.p_load * p_scale * rng.uniform(0.5, 1.5, c.n_bus)
    q = -c.q_load * q_scale * rng.uniform(0.5, 1.5, c.n_bus)
    sol = solve_power_flow(c, p, q)
    V, _ = gauss_seidel(case_to_dict(c), p, q, tol=1e-13)
    np.testing.assert_allclose(sol.V, np.abs(V), atol=1e-8)


@pytest.mark.skipif("compiled" not in kernels.available_backends(), reason="extension not built")
def test_backends_agree():
    c = load_case("ieee69")
    from rl2adn.grid import PowerFlowModel

    m = PowerFlowModel(c)
    rng = np.random.default_rng(0)
    vm = rng.uniform(0.9, 1.05, c.n_bus)
    va = rng.uniform(-0.1, 0.1, c.n_bus)
    p, q = base_injections(c)
    outs = []
    for name in ("compiled", "python"):
        be = kernels.load_backend(name)
        F = np.empty(2 * m.pq.size)
        J = np.empty((2 * m.pq.size,) * 2)
        r = be.newton_system(m.G, m.B, vm, va, p / c.base_mva, q / c.base_mva, m.pq, F, J)
        outs.append((r, F.copy(), J.copy()))
    assert outs[0][0] == pytest.approx(outs[1][0], rel=1e-12)
    np.testing.assert_allclose(outs[0][1], outs[1][1], atol=1e-12)
    np.testing.assert_allclose(outs[0][2], outs[1][2], atol=1e-11)
