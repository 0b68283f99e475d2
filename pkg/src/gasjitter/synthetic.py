"""Synthetic test networks, including a long two-supply transmission line
shaped like a Gulf-to-Northeast mainline."""

from __future__ import annotations

import math

from .network import Compressor, GasProperties, Network, Node, Pipe
from .units import MILE, P0, PSI, T0

REFERENCE_GAS = GasProperties(sound_speed=366.0, friction=0.01)


def single_pipe(length=100e3, diameter=0.9144, flow=150.0, p0=5.5e6, p_min=0.0,
                p_max=math.inf, gas=REFERENCE_GAS, sigma_load=0.0, tau=T0,
                compressor=None):
    """A -> B with supply at A (slack) and the matching load at B.

    ``compressor`` = (alpha_min, alpha_max) puts a station at A.
    """
    nodes = [Node("A", flow, 0.0, p_max), Node("B", -flow, p_min, p_max, sigma_load, tau)]
    pipes = [Pipe("P1", "A", "B", length, diameter)]
    comps = []
    if compressor is not None:
        comps = [Compressor("C1", "P1", "A", compressor[0], compressor[1])]
    return Network(gas, nodes, pipes, comps, slack="A", slack_pressure=p0, name="single_pipe")


def path_network(loads, lengths, diameter=0.9144, p0=5.5e6, p_min=0.0, p_max=math.inf,
                 gas=REFERENCE_GAS, stations=(), alpha_max=1.5, noise=None, tau=T0):
    """Path N0 - N1 - ... with N0 the slack supplying the sum of ``loads``.

    ``loads[k]`` is the consumption at node k+1; ``stations`` lists node
    indices carrying a station on their downstream pipe. ``noise`` maps node
    index -> sigma.
    """
    noise = noise or {}
    total = math.fsum(loads)
    qs = [total] + [-l for l in loads]
    nodes = [Node(f"N{i}", q, 0.0 if i == 0 else p_min, p_max, noise.get(i, 0.0), tau)
             for i, q in enumerate(qs)]
    pipes = [Pipe(f"P{i + 1}", f"N{i}", f"N{i + 1}", L, diameter) for i, L in enumerate(lengths)]
    comps = [Compressor(f"C{i}", f"P{i + 1}", f"N{i}", 1.0, alpha_max) for i in stations]
    return Network(gas, nodes, pipes, comps, slack="N0", slack_pressure=p0, name="path")


def star_network(n_leaves=5, length=50e3, diameter=0.9144, leaf_supply=10.0, p0=5.5e6,
                 gas=REFERENCE_GAS):
    """Centre C consuming everything its leaves inject; slack at the first leaf."""
    nodes = [Node(f"L{i}", leaf_supply) for i in range(n_leaves)]
    nodes.append(Node("C", -leaf_supply * n_leaves))
    pipes = [Pipe(f"P{i}", f"L{i}", "C", length * (1 + 0.1 * i), diameter) for i in range(n_leaves)]
    return Network(gas, nodes, pipes, slack="L0", slack_pressure=p0, name="star")


def branched_tree(p0=5.5e6, gas=REFERENCE_GAS):
    """Slack S feeding two branches, one of which splits again; one pipe
    stored against the flow direction."""
    nodes = [Node("S", 120.0), Node("A", -10.0), Node("B", -20.0), Node("C", -30.0),
             Node("D", -25.0), Node("E", -35.0)]
    pipes = [Pipe("SA", "S", "A", 80e3, 0.9), Pipe("AB", "A", "B", 60e3, 0.7),
             Pipe("CA", "C", "A", 40e3, 0.6),  # stored against the flow
             Pipe("SD", "S", "D", 90e3, 0.8), Pipe("DE", "D", "E", 70e3, 0.6)]
    return Network(gas, nodes, pipes, slack="S", slack_pressure=p0, name="branched")


def compressor_cascade(n=3, length=100e3, diameter=0.9144, flow=150.0, p0=5.5e6,
                       p_min=4.8e6, p_max=7.0e6, alpha_max=1.3, gas=REFERENCE_GAS):
    """Identical pipes in series, each with a station at its inlet."""
    loads = [0.0] * (n - 1) + [flow]
    return path_network(loads, [length] * n, diameter, p0, p_min, p_max, gas,
                        stations=range(n), alpha_max=alpha_max)


def scaled_cascade(p_max=6e6, p0_sq=0.8, delta_sq=0.25, p_min_sq=0.35, alpha_max_sq=1.8,
                   n=3, flow=100.0, length=50e3, diameter=0.9144, gas=REFERENCE_GAS):
    """Cascade specified in units of p_max**2: slack p0**2, per-pipe drop,
    floor and the squared maximum ratio."""
    scale = p_max**2
    K = gas.beta / (diameter * (math.pi * diameter**2 / 4) ** 2)
    # pick the flow giving the requested drop on the given geometry
    flow = math.sqrt(delta_sq * scale / (K * length))
    net = path_network([0.0] * (n - 1) + [flow], [length] * n, diameter,
                       math.sqrt(p0_sq * scale), math.sqrt(p_min_sq * scale), p_max, gas,
                       stations=range(n), alpha_max=math.sqrt(alpha_max_sq))
    return net


# canonical long line ------------------------------------------------------------

TRANSCO_NODES = 72
TRANSCO_MILES = 2000.0


def canonical_transco(n_nodes=TRANSCO_NODES, total_miles=TRANSCO_MILES, diameter=2.0,
                      small_load=8.0, nc_load=150.0, ny_load=350.0, nj_loads=(120.0, 100.0),
                      marcellus=300.0, station_every=2, alpha_max=1.3, tau=T0,
                      gas=GasProperties()):
    """Gulf-to-Northeast mainline with a supply at each end.

    Node M00 (mile 0) is the Gulf supply and slack at 800 psi; M71 (mile
    2000) is a northern supply. The largest load sits near mile 1771 where
    flows from both ends meet; a large southern load hangs off a spur near
    mile 1319. Stations sit on every ``station_every``-th node of the
    southern part, boosting flow northward. Consumption nodes carry noise
    with sigma = |q| / 3; supplies are quiet.
    """
    spacing = total_miles * MILE / (n_nodes - 1)
    ids = [f"M{i:02d}" for i in range(n_nodes)]
    pos_mi = [i * total_miles / (n_nodes - 1) for i in range(n_nodes)]
    nearest = lambda mile: min(range(n_nodes), key=lambda i: abs(pos_mi[i] - mile))
    i_nc, i_ny = nearest(1319.0), nearest(1771.0)
    loads = {i: small_load for i in range(1, n_nodes - 1)}
    loads[i_nc] = 0.0  # served through the spur
    loads[i_ny] = ny_load
    loads[i_ny - 1] = nj_loads[0]
    loads[i_ny + 1] = nj_loads[1]

    p_lo, p_hi = 500.0 * PSI, 800.0 * PSI
    nodes = []
    north_supply = marcellus
    total_load = math.fsum(loads.values()) + nc_load + 2 * small_load
    gulf = total_load - north_supply
    for i, nid in enumerate(ids):
        if i == 0:
            q = gulf
        elif i == n_nodes - 1:
            q = north_supply
        else:
            q = -loads[i]
        sigma = abs(q) / 3.0 if q < 0 else 0.0
        nodes.append(Node(nid, q, p_lo, p_hi, sigma, tau))
    nodes.append(Node("NC", -nc_load, p_lo, p_hi, nc_load / 3.0, tau))
    nodes.append(Node("SP1", -small_load, p_lo, p_hi, small_load / 3.0, tau))
    nodes.append(Node("SP2", -small_load, p_lo, p_hi, small_load / 3.0, tau))

    pipes = [Pipe(f"L{i:02d}", ids[i], ids[i + 1], spacing, diameter) for i in range(n_nodes - 1)]
    pipes.append(Pipe("SNC", ids[i_nc], "NC", 60e3, 1.2))
    pipes.append(Pipe("SS1", ids[nearest(500.0)], "SP1", 40e3, 0.6))
    pipes.append(Pipe("SS2", ids[nearest(1000.0)], "SP2", 40e3, 0.6))

    comps = [Compressor(f"CS{i:02d}", f"L{i:02d}", ids[i], 1.0, alpha_max)
             for i in range(0, i_ny - 2, station_every)]
    return Network(gas, nodes, pipes, comps, slack=ids[0], slack_pressure=P0,
                   mainline=(ids[0], ids[-1]), name="canonical_transco")
