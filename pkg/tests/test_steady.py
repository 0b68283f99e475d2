import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import STEADY_NETWORKS
from gasjitter import (
    DomainError,
    InfeasibleError,
    check_bounds,
    compute_tree_flows,
    pressure_after,
    solve_steady,
)
from gasjitter.network import Compressor, GasProperties, Network, Node, Pipe
from gasjitter.synthetic import REFERENCE_GAS, single_pipe, star_network
from oracles import integrate_network, integrate_pipe, nodal_balance_flows


def path3(qs):
    nodes = [Node(n, q) for n, q in zip("ABC", qs)]
    pipes = [Pipe("AB", "A", "B", 50e3, 0.9144), Pipe("BC", "B", "C", 50e3, 0.9144)]
    return Network(REFERENCE_GAS, nodes, pipes, slack="A", slack_pressure=5.5e6)


# flows ---------------------------------------------------------------------------


def test_series_path_carries_throughput():
    f = compute_tree_flows(path3([10.0, 0.0, -10.0]))
    assert f["AB"] == 10.0
    assert f["BC"] == 10.0


def test_star_leaves_feed_centre():
    net = star_network(3, leaf_supply=10.0)
    f = compute_tree_flows(net)
    assert all(f[p.id] == 10.0 for p in net.pipes)  # every pipe stored leaf -> centre


def test_flow_reversal_at_central_load():
    net = path3([10.0, -20.0, 10.0])
    f = compute_tree_flows(net)
    assert f["AB"] == 10.0
    assert f["BC"] == -10.0  # stored B -> C, flows C -> B
    oracle = nodal_balance_flows(net)
    assert f["AB"] == pytest.approx(oracle["AB"])
    assert f["BC"] == pytest.approx(oracle["BC"])


def test_unbalanced_flows_refused():
    with pytest.raises(DomainError):
        compute_tree_flows(path3([10.0, 0.0, -9.0]))


@st.composite
def balanced_trees(draw):
    n = draw(st.integers(2, 12))
    qs = draw(st.lists(st.floats(-200, 200, allow_nan=False), min_size=n - 1, max_size=n - 1))
    qs.append(-math.fsum(qs))
    nodes = [Node(f"N{i}", q) for i, q in enumerate(qs)]
    pipes = []
    for k in range(1, n):
        j = draw(st.integers(0, k - 1))
        a, b = (f"N{j}", f"N{k}") if draw(st.booleans()) else (f"N{k}", f"N{j}")
        pipes.append(Pipe(f"P{k}", a, b, draw(st.floats(1e3, 1e5)), draw(st.floats(0.3, 1.5))))
    slack = f"N{draw(st.integers(0, n - 1))}"
    return Network(REFERENCE_GAS, nodes, pipes, slack=slack, slack_pressure=8e6)


@settings(max_examples=100, deadline=None)
@given(balanced_trees())
def test_nodal_balance_is_exact(net):
    f = compute_tree_flows(net)
    res = f.nodal_residual(net)
    scale = max(abs(n.q) for n in net.nodes)
    assert max(abs(v) for v in res.values()) <= 8 * np.finfo(float).eps * max(scale, 1.0) * len(net.nodes)


@settings(max_examples=50, deadline=None)
@given(balanced_trees(), st.data())
def test_reversing_a_pipe_negates_flow_and_keeps_pressures(net, data):
    k = data.draw(st.integers(0, len(net.pipes) - 1))
    p = net.pipes[k]
    flipped = net.replace(pipes=tuple(
        Pipe(q.id, q.to_node, q.from_node, q.length, q.diameter) if q.id == p.id else q
        for q in net.pipes))
    f1, f2 = compute_tree_flows(net), compute_tree_flows(flipped)
    assert f2[p.id] == -f1[p.id]
    try:
        s1 = solve_steady(net, flows=f1)
    except InfeasibleError:
        return
    s2 = solve_steady(flipped, flows=f2)
    for n in net.nodes:
        assert s2.node_pressure[n.id] == pytest.approx(s1.node_pressure[n.id], rel=1e-12)


# single pipe profile -------------------------------------------------------------


def test_zero_flow_profile_is_flat(pipe100):
    pipe = pipe100.pipes[0]
    for x in (0.0, 3e4, 1e5):
        assert pressure_after(5.5e6, pipe, 0.0, x, REFERENCE_GAS) == 5.5e6


def test_reference_pipe_end_pressure(pipe100):
    pipe = pipe100.pipes[0]
    p = pressure_after(5.5e6, pipe, 150.0, pipe.length, REFERENCE_GAS)
    assert p == pytest.approx(4.755e6, rel=1e-3)
    assert p == pytest.approx(integrate_pipe(pipe100, pipe, 150.0, 5.5e6), rel=1e-6)


def test_reference_pipe_collapses_at_double_flow(pipe100):
    pipe = pipe100.pipes[0]
    with pytest.raises(InfeasibleError) as exc:
        pressure_after(5.5e6, pipe, 300.0, pipe.length, REFERENCE_GAS)
    assert exc.value.location == "P1"
    # the oracle sees the same sign change: p**2 falls below zero inside the pipe
    K = REFERENCE_GAS.beta / (pipe.diameter * pipe.area**2)
    assert 5.5e6**2 - K * pipe.length * 300.0**2 < 0


def test_pressure_after_domain():
    pipe = Pipe("P", "A", "B", 1e3, 0.5)
    with pytest.raises(DomainError):
        pressure_after(0.0, pipe, 1.0, 10.0, REFERENCE_GAS)
    with pytest.raises(DomainError):
        pressure_after(1e6, pipe, 1.0, 2e3, REFERENCE_GAS)


# network solve -----------------------------------------------------------------


def test_zero_flow_network_sits_at_slack_pressure():
    net = path3([0.0, 0.0, 0.0])
    ss = solve_steady(net)
    assert set(ss.node_pressure.values()) == {5.5e6}


def test_two_node_solve_matches_integration(pipe100):
    ss = solve_steady(pipe100)
    assert ss.node_pressure["B"] == pytest.approx(4.755e6, rel=1e-3)
    assert ss.node_pressure["B"] == pytest.approx(integrate_network(pipe100)["B"], rel=1e-9)


def test_compressor_boosts_inlet():
    net = single_pipe(compressor=(1.0, 1.5))
    ss = solve_steady(net, {"C1": 1.1})
    pipe = net.pipes[0]
    K = REFERENCE_GAS.beta / (pipe.diameter * pipe.area**2)
    assert ss.inlet("P1") == pytest.approx(1.1 * 5.5e6, rel=1e-15)
    expected = math.sqrt((1.1 * 5.5e6) ** 2 - K * pipe.length * 150.0**2)
    assert ss.node_pressure["B"] == pytest.approx(expected, rel=1e-14)


def test_receiving_station_divides():
    # station at B on a pipe flowing B -> A: the slack sits at A downstream
    nodes = [Node("A", -50.0), Node("B", 50.0)]
    pipes = [Pipe("P", "A", "B", 40e3, 0.9)]
    net = Network(REFERENCE_GAS, nodes, pipes, [Compressor("c", "P", "B", 1.0, 1.5)],
                  slack="A", slack_pressure=5e6)
    ss = solve_steady(net, {"c": 1.25})
    assert ss.node_pressure["B"] * 1.25 == pytest.approx(ss.end_pressure[("P", "B")], rel=1e-15)
    assert ss.node_pressure["B"] == pytest.approx(integrate_network(net, {"c": 1.25})["B"], rel=1e-9)


@pytest.mark.parametrize("name", sorted(STEADY_NETWORKS))
def test_pressures_match_ode_integration(name):
    net, ratios = STEADY_NETWORKS[name]()
    ss = solve_steady(net, ratios)
    ref = integrate_network(net, ratios)
    for nid, p in ref.items():
        assert ss.node_pressure[nid] == pytest.approx(p, rel=1e-6)


@pytest.mark.parametrize("name", sorted(STEADY_NETWORKS))
def test_profile_residual(name):
    net, ratios = STEADY_NETWORKS[name]()
    ss = solve_steady(net, ratios)
    for p in net.pipes:
        x, pr = ss.sample(p.id, 101)
        phi = ss.flows[p.id]
        flux = phi / p.area
        beta = net.beta(p)
        p_in = ss.inlet(p.id)
        res = pr**2 - p_in**2 + beta * x / p.diameter * flux * abs(flux)
        assert np.max(np.abs(res)) <= 1e-9 * p_in**2


def test_infeasible_pipe_named():
    net = single_pipe(flow=300.0)
    with pytest.raises(InfeasibleError, match="P1") as exc:
        solve_steady(net)
    assert exc.value.location == "P1"


def test_ratio_outside_bounds_refused():
    net = single_pipe(compressor=(1.0, 1.2))
    with pytest.raises(DomainError):
        solve_steady(net, {"C1": 1.3})
    with pytest.raises(DomainError):
        solve_steady(net, {"nope": 1.1})
    solve_steady(net, {"C1": 1.3}, enforce_bounds=False)


# bounds ---------------------------------------------------------------------------


def test_no_violations_inside_bounds():
    ss = solve_steady(single_pipe(p_min=4.0e6, p_max=6e6))
    assert check_bounds(ss) == []


def test_deficit_at_far_end():
    ss = solve_steady(single_pipe(p_min=5.0e6))
    viol = check_bounds(ss)
    nodes = [v for v in viol if v.x is None]
    assert len(nodes) == 1
    v = nodes[0]
    assert (v.location, v.kind) == ("B", "min")
    assert v.amount == pytest.approx(0.245e6, rel=1e-2)
    assert v.amount == pytest.approx(5.0e6 - ss.node_pressure["B"], rel=1e-12)


def test_monotone_profile_extremes_at_pipe_ends():
    ss = solve_steady(single_pipe(p_min=5.0e6))
    pipe_viol = [v for v in check_bounds(ss, samples=101) if v.x is not None]
    assert all(v.x in (0.0, 100e3) for v in pipe_viol)


def test_boost_above_envelope_flagged():
    net = single_pipe(p_max=5.8e6, compressor=(1.0, 1.2))
    ss = solve_steady(net, {"C1": 1.1})
    viol = check_bounds(ss)
    assert any(v.location == "P1" and v.kind == "max" and v.x == 0.0 for v in viol)
    assert not any(v.x is None for v in viol)


def test_check_bounds_uses_slack_nodal_value():
    gas = GasProperties(366.0, 0.01)
    nodes = [Node("A", 10.0, 5.0e6, 5.4e6), Node("B", -10.0)]
    net = Network(gas, nodes, [Pipe("P", "A", "B", 1e4, 0.9)], slack="A", slack_pressure=5.5e6)
    viol = check_bounds(solve_steady(net), samples=0)
    assert [(v.location, v.kind) for v in viol] == [("A", "max")]
