import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from conftest import two_supply_path
from gasjitter import (
    DomainError,
    diffusion_coefficient,
    dispatch,
    edge_constants,
    exceedance_probability,
    fluctuation_strength,
    normalize_D,
    pressure_pdf,
    solve_steady,
    zeta_profile,
)
from gasjitter.jitter import (
    FluctuationStrength,
    mainline_mileposts,
    node_exceedance,
    uniform_sources_strength,
    pipe_mileposts,
    reference_D,
    zeta_profiles,
)
from gasjitter.network import Node
from gasjitter.synthetic import canonical_transco, compressor_cascade, path_network, single_pipe
from gasjitter.units import MILE, P0, PSI, T0
from oracles import integrate_network


@pytest.fixture(scope="module")
def canonical_gp():
    return dispatch(canonical_transco(), "gp")


def noisy_pipe(sigma=5.0):
    return single_pipe(sigma_load=sigma)


# zero mode --------------------------------------------------------------------------


def test_zero_flow_zeta_is_one():
    ss = solve_steady(single_pipe(flow=0.0))
    zp = zeta_profile(ss, "P1")
    assert np.all(zp.z == 1.0)


def test_reference_pipe_zeta_ends():
    net = single_pipe()
    ends = integrate_network(net)
    zp = zeta_profile(solve_steady(net), "P1")
    mean = 0.5 * (ends["A"] + ends["B"])
    assert zp.start == pytest.approx(0.932, abs=1e-3)
    assert zp.end == pytest.approx(1.078, abs=1e-3)
    assert zp.start == pytest.approx(mean / ends["A"], rel=1e-9)
    assert zp.end == pytest.approx(mean / ends["B"], rel=1e-9)


@pytest.mark.parametrize("flow", [0.0, 50.0, 150.0, 200.0])
def test_zeta_mean_is_one(flow):
    zp = zeta_profile(solve_steady(single_pipe(flow=flow)), "P1")
    val, _ = quad(zp, 0.0, zp.length, epsabs=0, epsrel=1e-12)
    assert val / zp.length == pytest.approx(1.0, abs=1e-6)


def _networks_for_invariants():
    out = [solve_steady(single_pipe()), solve_steady(two_supply_path())]
    cascade = compressor_cascade(n=3, length=80e3)
    out.append(solve_steady(cascade, {"C0": 1.1, "C1": 1.25, "C2": 1.05}))
    return out


@pytest.mark.parametrize("k", range(3))
def test_zeta_satisfies_its_ode(k):
    ss = _networks_for_invariants()[k]
    for p in ss.net.pipes:
        zp = zeta_profile(ss, p.id, 1001)
        x, z = zp.x, zp.z
        dz = np.gradient(z, x, edge_order=2)
        phi = ss.flows[p.id]
        flux = phi / p.area
        prof = ss.profile(p.id, x)
        rhs = ss.net.beta(p) / (2 * p.diameter) * flux * abs(flux) / prof**2 * z
        assert np.max(np.abs(dz - rhs)) * p.length <= 1e-6 * z.max()
        if phi != 0:
            assert np.all(np.sign(np.diff(z)) == np.sign(phi))


def test_canonical_zeta_mean_and_ode(canonical_gp):
    ss = canonical_gp.steady
    for p in ss.net.pipes:
        zp = zeta_profile(ss, p.id)
        val, _ = quad(zp, 0.0, zp.length, epsrel=1e-12)
        assert val / zp.length == pytest.approx(1.0, abs=1e-6)


# edge constants ---------------------------------------------------------------------


def test_single_pipe_constant_is_one():
    ss = solve_steady(single_pipe())
    assert edge_constants(ss.net, ss).c == {"P1": 1.0}


def test_series_pipes_matching():
    net = path_network([0.0, 100.0], [50e3, 50e3])
    ss = solve_steady(net)
    c = edge_constants(net, ss).c
    z1, z2 = zeta_profile(ss, "P1"), zeta_profile(ss, "P2")
    assert c["P1"] == 1.0
    assert c["P2"] / c["P1"] == pytest.approx(z1.end / z2.start, rel=1e-12)


@pytest.mark.parametrize("fixture", ["canonical", "cascade", "two_supply"])
def test_nodal_matching_everywhere(fixture, canonical_gp):
    if fixture == "canonical":
        ss = canonical_gp.steady
    elif fixture == "cascade":
        ss = _networks_for_invariants()[2]
    else:
        ss = solve_steady(two_supply_path())
    net = ss.net
    consts = edge_constants(net, ss)
    prof = zeta_profiles(ss)
    for n in net.nodes:
        vals = []
        for p in net.pipes:
            if n.id not in (p.from_node, p.to_node):
                continue
            alpha = net.end_ratio(ss.ratios, p.id, n.id)
            vals.append(consts.c[p.id] * prof[p.id].at_node(p, n.id) / alpha)
        assert max(vals) - min(vals) <= 1e-9 * max(vals)
        assert vals[0] == pytest.approx(consts.nodal[n.id], rel=1e-9)
    assert all(v > 0 for v in consts.c.values())


def test_station_jump_is_alpha_squared(canonical_gp):
    jp = diffusion_coefficient(canonical_gp.steady)
    net = jp.net
    checked = 0
    for comp in net.compressors:
        alpha = canonical_gp.ratios[comp.id]
        out_pipe = net.pipe(comp.pipe)
        d_out = jp.at(out_pipe.id, 0.0 if comp.node == out_pipe.from_node else out_pipe.length)
        assert d_out == pytest.approx(alpha**2 * jp.node_D(comp.node), rel=1e-9)
        for p in net.pipes:
            if p.id != comp.pipe and comp.node in (p.from_node, p.to_node) and \
                    net.compressor_at(p.id, comp.node) is None:
                d_in = jp.at(p.id, p.length if p.to_node == comp.node else 0.0)
                assert d_out / d_in == pytest.approx(alpha**2, rel=1e-9)
                checked += 1
    assert checked > 0


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-6, 1e6))
def test_scale_free_edge_constants(lam):
    ss = solve_steady(two_supply_path())
    consts = edge_constants(ss.net, ss)
    base = diffusion_coefficient(ss, consts=consts)
    scaled = diffusion_coefficient(ss, consts=consts.scaled(lam))
    for pid, d in base.D.items():
        assert np.max(np.abs(scaled.D[pid] - d) / d) <= 1e-12


def test_cycle_rejected():
    from test_network import triangle
    net = triangle()
    with pytest.raises(DomainError):
        edge_constants(net, None)


# fluctuation strength -----------------------------------------------------------------


def test_quiet_network_has_zero_strength():
    s = fluctuation_strength(single_pipe())
    assert s.S == 0.0
    assert s.tau_eff == T0


def test_seventy_uniform_sources():
    s = uniform_sources_strength(20.0, 70)
    assert s.S == pytest.approx(3111, abs=1)
    assert s.S == pytest.approx((20 / 3) ** 2 * 70, rel=1e-15)


def test_doubling_sigma_quadruples_strength():
    net = canonical_transco()
    doubled = net.with_nodes(Node(n.id, n.q, n.p_min, n.p_max, 2 * n.noise_sigma, n.noise_tau)
                             for n in net.nodes)
    assert fluctuation_strength(doubled).S == pytest.approx(4 * fluctuation_strength(net).S,
                                                            rel=1e-14)


def test_tau_eff_is_twice_variance_weighted_tau():
    net = path_network([5.0, 5.0], [1e4, 1e4], noise={1: 1.0, 2: 2.0})
    net = net.with_nodes([net.nodes[0], Node("N1", -5.0, noise_sigma=1.0, noise_tau=100.0),
                          Node("N2", -5.0, noise_sigma=2.0, noise_tau=400.0)])
    s = fluctuation_strength(net)
    assert s.S == 5.0
    assert s.tau_eff == pytest.approx(2 * (1 * 100 + 4 * 400) / 5)


def test_strength_domain():
    with pytest.raises(DomainError):
        FluctuationStrength(-1.0, 1.0)
    with pytest.raises(DomainError):
        FluctuationStrength(1.0, 0.0)


# diffusion coefficient -------------------------------------------------------------------


def test_quiet_network_has_zero_D():
    jp = diffusion_coefficient(solve_steady(single_pipe()))
    assert all(np.all(d == 0) for d in jp.D.values())


def test_D_proportional_to_cZ_squared():
    ss = _networks_for_invariants()[2]
    ss = solve_steady(ss.net.with_nodes(
        Node(n.id, n.q, n.p_min, n.p_max, 3.0, n.noise_tau) for n in ss.net.nodes), ss.ratios)
    jp = diffusion_coefficient(ss)
    ratios = [jp.D[p.id] / (jp.consts.c[p.id] * jp.zeta[p.id].z) ** 2 for p in ss.net.pipes]
    flat = np.concatenate(ratios)
    assert np.ptp(flat) <= 1e-12 * flat.max()
    assert np.all(flat >= 0)


def test_D_grows_along_uniform_flow():
    net = path_network([0.0, 0.0, 120.0], [50e3, 50e3, 50e3], noise={3: 5.0})
    jp = diffusion_coefficient(solve_steady(net))
    series = np.concatenate([jp.D[f"P{i}"] for i in (1, 2, 3)])
    # junction samples repeat the same value up to rounding
    assert np.all(np.diff(series) >= -1e-12 * series.max())
    assert series[-1] > series[0]


def test_D_peaks_at_flow_reversal():
    net = two_supply_path()
    ss = solve_steady(net)
    flows = ss.flows
    reversal = [n.id for n in net.nodes
                if all(_into(net, flows, p, n.id) > 0 for p in net.pipes if n.id in (p.from_node, p.to_node))]
    assert reversal == ["N4"]
    jp = diffusion_coefficient(ss)
    best = max(((pid, i) for pid, d in jp.D.items() for i in range(len(d))),
               key=lambda k: jp.D[k[0]][k[1]])
    pipe = net.pipe(best[0])
    x = jp.zeta[best[0]].x[best[1]]
    at = pipe.from_node if x == 0.0 else pipe.to_node if x == pipe.length else None
    assert at == "N4"
    assert jp.peak_node() == "N4"


def _into(net, flows, pipe, node):
    return flows[pipe.id] if pipe.to_node == node else -flows[pipe.id]


# normalisation, density, exceedance ---------------------------------------------------------


def test_reference_D_values():
    assert reference_D() == pytest.approx((P0 / 3) ** 2 / T0)
    assert P0 == pytest.approx(5.5e6, rel=3e-3)
    assert normalize_D(0.0) == 0.0
    with pytest.raises(DomainError):
        reference_D(0.0, 1.0)


@pytest.mark.parametrize("ratio, psi", [(1.0, 266), (0.1, 84)])
def test_normalised_spread_in_psi(ratio, psi):
    D = ratio * reference_D()
    assert normalize_D(D) == pytest.approx(ratio)
    w = 40 * math.sqrt(T0 * D)
    var, _ = quad(lambda d: d * d * pressure_pdf(D, T0, d), -w, w, points=[0.0], limit=200)
    assert math.sqrt(var) / PSI == pytest.approx(psi, abs=1.0)


def test_pdf_peak_and_moments():
    D, t = 2e7, 3600.0
    assert pressure_pdf(D, t, 0.0) == pytest.approx((2 * math.pi * t * D) ** -0.5, rel=1e-15)
    w = 40 * math.sqrt(t * D)
    mass, _ = quad(lambda d: pressure_pdf(D, t, d), -w, w, points=[0.0], epsabs=1e-13, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-9)
    var, _ = quad(lambda d: d * d * pressure_pdf(D, t, d), -w, w, points=[0.0], epsrel=1e-12,
                  limit=200)
    assert var == pytest.approx(t * D, rel=1e-6)


@pytest.mark.parametrize("bad", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_pdf_domain(bad):
    with pytest.raises(DomainError):
        pressure_pdf(bad[0], bad[1], 0.0)
    with pytest.raises(DomainError):
        exceedance_probability(bad[0], bad[1], 0.0)


def test_exceedance_table_values():
    D, t = 1e7, 900.0
    s = math.sqrt(t * D)
    assert exceedance_probability(D, t, 0.0) == 1.0
    assert exceedance_probability(D, t, s) == pytest.approx(0.3173, abs=1e-4)
    assert exceedance_probability(D, t, 3 * s) == pytest.approx(2.70e-3, abs=1e-5)
    assert exceedance_probability(D, t, 2 * s) == pytest.approx(2 * norm.sf(2), rel=1e-12)
    with pytest.raises(DomainError):
        exceedance_probability(D, t, -1.0)


def test_node_exceedance_uses_nearest_bound():
    net = single_pipe(p_min=4.5e6, p_max=6e6, sigma_load=5.0)
    jp = diffusion_coefficient(solve_steady(net))
    table = node_exceedance(jp, 10 * T0)
    margin, prob = table["B"]
    pB = jp.steady.node_pressure["B"]
    assert margin == pytest.approx(pB - 4.5e6)
    assert prob == pytest.approx(exceedance_probability(jp.node_D("B"), 10 * T0, margin))


# mainline distance -----------------------------------------------------------------------


def test_mileposts_monotone_and_total(canonical_gp):
    net = canonical_gp.steady.net
    pos, on_line = mainline_mileposts(net)
    main = [f"M{i:02d}" for i in range(72)]
    vals = [pos[m] for m in main]
    assert vals[0] == 0.0
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(sum(net.pipe(p).length for p in on_line))
    assert vals[-1] / MILE == pytest.approx(2000.0)
    # spur nodes inherit their attachment point
    spur = net.pipe("SNC")
    assert pos["NC"] == pos[spur.from_node]
    x = np.linspace(0, spur.length, 5)
    assert np.all(pipe_mileposts(net, "SNC", x) == pos[spur.from_node])
