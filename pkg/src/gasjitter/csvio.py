"""CSV emitters. Every file starts with '#'-prefixed metadata lines followed
by a header row; floats are written with repr so reruns are byte-identical."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .jitter import (
    exceedance_probability,
    mainline_mileposts,
    node_exceedance,
    normalize_D,
    pipe_mileposts,
)
from .units import MILE, format_float


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def render_csv(header, rows, metadata=None):
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}={_cell(value)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, metadata=None):
    text = render_csv(header, rows, metadata)
    if path is None:
        return text
    Path(path).write_text(text)
    return text


def read_csv(path):
    """(metadata dict, header, rows as lists of strings)."""
    meta, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        else:
            lines.append(line)
    rows = list(csv.reader(lines))
    return meta, rows[0], rows[1:]


# tables ------------------------------------------------------------------------


def steady_node_rows(ss):
    pos, _ = mainline_mileposts(ss.net)
    return (["node_id", "q_kg_s", "p_Pa", "milepost_equivalent"],
            [[n.id, n.q, ss.node_pressure[n.id], pos[n.id] / MILE] for n in ss.net.nodes])


def steady_profile_rows(ss, samples):
    rows = []
    for p in ss.net.pipes:
        x, pr = ss.sample(p.id, samples)
        phi = ss.flows[p.id]
        rows.extend([p.id, xi, pi, phi] for xi, pi in zip(x, pr))
    return ["pipe_id", "x_m", "p_Pa", "phi_kg_s"], rows


def dispatch_rows(res):
    rows = [["compressor", cid, "alpha", a] for cid, a in sorted(res.ratios.items())]
    rows += [["node", nid, "p_Pa", p] for nid, p in res.node_pressure.items()]
    rows.append(["total", "power", "W", res.power])
    return ["kind", "id", "quantity", "value"], rows


def dispatch_trace_rows(res):
    d = res.diagnostics
    rows = []
    if "history" in d:
        for i, (t, k, obj, gap) in enumerate(d["history"]):
            rows.append(["barrier", i, t, k, obj, gap])
    for i, obj in enumerate(d.get("trace", [])):
        rows.append(["condensation", i, "", "", obj, ""])
    for i, (cid, what) in enumerate(d.get("decisions", [])):
        rows.append(["greedy", i, cid, what, "", ""])
    return ["stage", "iteration", "t", "newton_steps", "objective", "gap"], rows


def jitter_rows(jp, p0, t0):
    rows = []
    net = jp.net
    for p in net.pipes:
        zp = jp.zeta[p.id]
        miles = pipe_mileposts(net, p.id, zp.x) / MILE
        D = jp.D[p.id]
        Dn = normalize_D(D, p0, t0)
        rows.extend([p.id, x, m, z, d, dn] for x, m, z, d, dn in zip(zp.x, miles, zp.z, D, Dn))
    return ["pipe_id", "x_m", "milepost_equivalent", "Z", "D_Pa2_per_s", "D_over_D0"], rows


def comparison_rows(jp_a, jp_b):
    rows = []
    net = jp_a.net
    for p in net.pipes:
        zp = jp_a.zeta[p.id]
        miles = pipe_mileposts(net, p.id, zp.x) / MILE
        for x, m, da, db in zip(zp.x, miles, jp_a.D[p.id], jp_b.D[p.id]):
            ratio = da / db if db > 0 else (math.nan if da > 0 else 1.0)
            rows.append([p.id, x, m, da, db, ratio])
    return ["pipe_id", "x_m", "milepost_equivalent", "D_greedy", "D_gp", "greedy_over_gp"], rows


def exceedance_rows(jp, t, margin=None):
    rows = []
    table = node_exceedance(jp, t)
    for n in jp.net.nodes:
        m, prob = table[n.id]
        D = jp.node_D(n.id)
        if margin is not None:
            m = margin
            prob = exceedance_probability(D, t, m) if D > 0 else float(m == 0)
        rows.append([n.id, jp.steady.node_pressure[n.id], m, D, prob])
    return ["node_id", "p_Pa", "margin_Pa", "D_Pa2_per_s", "probability"], rows
