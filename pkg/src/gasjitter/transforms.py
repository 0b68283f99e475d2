"""Scenario transforms on networks: load scaling, supply shifts, load
redistribution and branch aggregation. All return new networks and leave
pipes and compressors untouched (except aggregation, which prunes)."""

from __future__ import annotations

import math
from dataclasses import replace

from .errors import DomainError
from .network import require_tree


def scale_loads(net, factor):
    """Multiply every nodal injection/consumption by ``factor``."""
    if not factor > 0:
        raise DomainError("scale factor must be positive")
    return net.with_nodes(replace(n, q=n.q * factor) for n in net.nodes)


def _check_ids(net, ids, what):
    ids = list(dict.fromkeys(ids))
    if not ids:
        raise DomainError(f"{what} is empty")
    for nid in ids:
        net.node(nid)
    return ids


def shift_supply(net, from_nodes, to_nodes, fraction):
    """Move ``fraction`` of the total injection at ``from_nodes`` to ``to_nodes``.

    The moved mass is taken pro rata to each source's injection and added pro
    rata to each target's injection (equal split if targets inject nothing).
    """
    if fraction < 0:
        raise DomainError("fraction must be >= 0")
    src = _check_ids(net, from_nodes, "from_nodes")
    dst = _check_ids(net, to_nodes, "to_nodes")
    if set(src) & set(dst):
        raise DomainError("from_nodes and to_nodes overlap")
    supply = {nid: max(net.node(nid).q, 0.0) for nid in src}
    total = math.fsum(supply.values())
    amount = fraction * total
    if fraction > 1.0:
        raise DomainError(
            f"shift of {amount:.6g} kg/s exceeds the {total:.6g} kg/s injected at from_nodes"
        )
    if amount == 0.0:
        return net
    target = {nid: max(net.node(nid).q, 0.0) for nid in dst}
    ttotal = math.fsum(target.values())
    delta = {}
    for nid, s in supply.items():
        delta[nid] = -amount * s / total
    for nid, t in target.items():
        share = t / ttotal if ttotal > 0 else 1.0 / len(dst)
        delta[nid] = amount * share
    return net.with_nodes(replace(n, q=n.q + delta.get(n.id, 0.0)) for n in net.nodes)


def redistribute_load(net, from_nodes, to_nodes, fraction):
    """Move ``fraction`` of the consumption at ``from_nodes`` to ``to_nodes``.

    Consumption is removed pro rata and split equally among the targets.
    """
    if not 0 <= fraction <= 1:
        raise DomainError("fraction must be in [0, 1]")
    src = _check_ids(net, from_nodes, "from_nodes")
    dst = _check_ids(net, to_nodes, "to_nodes")
    if set(src) & set(dst):
        raise DomainError("from_nodes and to_nodes overlap")
    loads = {nid: max(-net.node(nid).q, 0.0) for nid in src}
    amount = fraction * math.fsum(loads.values())
    if amount == 0.0:
        return net
    delta = {nid: fraction * l for nid, l in loads.items()}  # consumption removed
    for nid in dst:
        delta[nid] = -amount / len(dst)
    return net.with_nodes(replace(n, q=n.q + delta.get(n.id, 0.0)) for n in net.nodes)


def aggregate_branches(net, start=None, end=None):
    """Collapse every subtree hanging off the mainline into its attachment node.

    The attachment node receives the subtree's net injection; noise variances
    add (independent nodes) and correlation times are variance weighted.
    Returns a path network from ``start`` to ``end``.
    """
    if start is None or end is None:
        if net.mainline is None:
            raise DomainError("mainline endpoints not specified")
        start, end = net.mainline
    for nid in (start, end):
        if nid not in net.node_index:
            raise DomainError(f"mainline endpoint '{nid}' not in network")
    require_tree(net, balanced=False)
    path_nodes, path_pipes = net.tree_path(start, end)
    on_path = set(path_nodes)
    if net.slack not in on_path:
        raise DomainError(f"slack node '{net.slack}' lies off the mainline")

    # attach each node to the first mainline node on its way to the mainline
    _, parent = net.bfs_tree(start)
    attach = {}
    for n in net.nodes:
        u = n.id
        while u not in on_path:
            u = parent[u][1]
        attach[n.id] = u

    q = {nid: 0.0 for nid in path_nodes}
    var = {nid: 0.0 for nid in path_nodes}
    vartau = {nid: 0.0 for nid in path_nodes}
    for n in net.nodes:
        a = attach[n.id]
        q[a] += n.q
        var[a] += n.noise_sigma**2
        vartau[a] += n.noise_sigma**2 * n.noise_tau
    new_nodes = []
    for n in net.nodes:
        if n.id not in on_path:
            continue
        tau = vartau[n.id] / var[n.id] if var[n.id] > 0 else n.noise_tau
        new_nodes.append(replace(n, q=q[n.id], noise_sigma=math.sqrt(var[n.id]), noise_tau=tau))
    keep = set(path_pipes)
    pipes = tuple(p for p in net.pipes if p.id in keep)
    comps = tuple(c for c in net.compressors if c.pipe in keep)
    return replace(net, nodes=tuple(new_nodes), pipes=pipes, compressors=comps,
                   mainline=(start, end))
