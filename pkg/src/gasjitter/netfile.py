"""Reader and writer for the sectioned network text format.

Grammar (see docs/network_format.md for the full description)::

    document  := { blank | comment | header | line }
    comment   := '#' text
    header    := '[' name ']'
    line      := key '=' value              (in [gas] and [network])
               | id { token } { key '=' q } (in row sections)
    q         := number [unit]

Row sections: [nodes], [pipes], [compressors], [noise].
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

from .errors import DomainError, NetworkParseError, NetworkReferenceError
from .network import (
    DEFAULT_ALPHA_MAX,
    DEFAULT_EXPONENT,
    DEFAULT_FRICTION,
    DEFAULT_SOUND_SPEED,
    Compressor,
    GasProperties,
    Network,
    Node,
    Pipe,
)
from .units import P0, T0, format_float, parse_quantity

log = logging.getLogger(__name__)

KEYVALUE_SECTIONS = ("gas", "network")
ROW_SECTIONS = ("nodes", "pipes", "compressors", "noise")

_HEADER = re.compile(r"^\[\s*([A-Za-z_][\w-]*)\s*\]$")


@dataclass
class Row:
    line: int
    positional: list[str]
    options: dict[str, tuple[str, int]] = field(default_factory=dict)


@dataclass
class Document:
    """Tokenised sectioned document; shared by network and scenario files."""

    keyvalues: dict[str, dict[str, tuple[str, int]]] = field(default_factory=dict)
    rows: dict[str, list[Row]] = field(default_factory=dict)


def tokenize(text, keyvalue_sections, row_sections):
    doc = Document()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            section = m.group(1).lower()
            if section not in keyvalue_sections and section not in row_sections:
                raise NetworkParseError(f"unknown section [{section}]", line=lineno)
            if section in keyvalue_sections:
                doc.keyvalues.setdefault(section, {})
            else:
                doc.rows.setdefault(section, [])
            continue
        if section is None:
            raise NetworkParseError("content before the first section header", line=lineno)
        if section in keyvalue_sections:
            if "=" not in line:
                raise NetworkParseError("expected 'key = value'", line=lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if not key or not value:
                raise NetworkParseError("empty key or value", line=lineno, field=key or None)
            key = key.lower()
            if key in doc.keyvalues[section]:
                raise NetworkParseError("duplicate key", line=lineno, field=key)
            doc.keyvalues[section][key] = (value, lineno)
        else:
            row = Row(lineno, [])
            for tok in line.split():
                if "=" in tok:
                    key, value = tok.split("=", 1)
                    key = key.lower()
                    if not key or not value:
                        raise NetworkParseError("empty option", line=lineno, field=key or tok)
                    if key in row.options:
                        raise NetworkParseError("duplicate option", line=lineno, field=key)
                    row.options[key] = (value, lineno)
                elif row.options:
                    raise NetworkParseError(
                        f"positional token {tok!r} after key=value options", line=lineno
                    )
                else:
                    row.positional.append(tok)
            doc.rows[section].append(row)
    return doc


def _quantity(value, dimension, lineno, key):
    try:
        return parse_quantity(value, dimension)
    except ValueError as exc:
        raise NetworkParseError(str(exc), line=lineno, field=key) from None


class _Options:
    """Consumes a row's options; unknown leftovers are an error."""

    def __init__(self, row, section):
        self.row = row
        self.section = section
        self.left = dict(row.options)
        self.defaulted = []

    def get(self, key, dimension, default):
        if key in self.left:
            value, lineno = self.left.pop(key)
            return _quantity(value, dimension, lineno, key)
        self.defaulted.append(key)
        return default

    def text(self, key, default=None):
        if key in self.left:
            return self.left.pop(key)[0]
        return default

    def finish(self):
        if self.left:
            key = next(iter(self.left))
            raise NetworkParseError(
                f"unknown option in [{self.section}]", line=self.left[key][1], field=key
            )


def _kv(doc, section, key, dimension, default, defaulted):
    entries = doc.keyvalues.get(section, {})
    if key in entries:
        value, lineno = entries[key]
        return _quantity(value, dimension, lineno, key)
    defaulted.append(f"{section}.{key}")
    return default


def parse_network(text, name="network"):
    """Parse a network document into a :class:`Network`.

    Raises NetworkParseError (with line/field) for malformed input and
    NetworkReferenceError for references to undeclared nodes or pipes.
    """
    doc = tokenize(text, KEYVALUE_SECTIONS, ROW_SECTIONS)
    defaulted = []

    for section, allowed in (("gas", {"sound_speed", "friction"}),
                             ("network", {"slack", "slack_pressure", "mainline", "name"})):
        for key, (_, lineno) in doc.keyvalues.get(section, {}).items():
            if key not in allowed:
                raise NetworkParseError(f"unknown key in [{section}]", line=lineno, field=key)

    gas = GasProperties(
        sound_speed=_kv(doc, "gas", "sound_speed", "speed", DEFAULT_SOUND_SPEED, defaulted),
        friction=_kv(doc, "gas", "friction", "none", DEFAULT_FRICTION, defaulted),
    )

    node_rows = doc.rows.get("nodes", [])
    if not node_rows:
        raise NetworkParseError("no [nodes] declared")
    nodes = {}
    node_lines = {}
    for row in node_rows:
        if len(row.positional) != 1:
            raise NetworkParseError("node row needs exactly one id", line=row.line)
        nid = row.positional[0]
        if nid in nodes:
            raise NetworkParseError(f"duplicate node '{nid}'", line=row.line)
        opts = _Options(row, "nodes")
        q = opts.get("q", "massflow", 0.0)
        p_min = opts.get("p_min", "pressure", 0.0)
        p_max = opts.get("p_max", "pressure", math.inf)
        opts.finish()
        nodes[nid] = dict(id=nid, q=q, p_min=p_min, p_max=p_max)
        node_lines[nid] = row.line

    noise_seen = set()
    for row in doc.rows.get("noise", []):
        if len(row.positional) != 1:
            raise NetworkParseError("noise row needs exactly one node id", line=row.line)
        nid = row.positional[0]
        if nid not in nodes:
            raise NetworkReferenceError(nid, "node", line=row.line)
        if nid in noise_seen:
            raise NetworkParseError(f"duplicate noise entry for '{nid}'", line=row.line)
        noise_seen.add(nid)
        opts = _Options(row, "noise")
        sigma = opts.get("sigma", "massflow", None)
        tau = opts.get("tau", "time", None)
        opts.finish()
        if sigma is not None:
            nodes[nid]["noise_sigma"] = sigma
        if tau is not None:
            nodes[nid]["noise_tau"] = tau
    node_objs = []
    for nid, kw in nodes.items():
        if "noise_sigma" not in kw:
            kw["noise_sigma"] = abs(kw["q"]) / 3.0
            defaulted.append(f"noise.{nid}.sigma")
        kw.setdefault("noise_tau", T0)
        try:
            node_objs.append(Node(**kw))
        except DomainError as exc:
            raise NetworkParseError(str(exc), line=node_lines[nid]) from None

    pipes = []
    pipe_ids = set()
    for row in doc.rows.get("pipes", []):
        if len(row.positional) != 3:
            raise NetworkParseError("pipe row needs: id from to", line=row.line)
        pid, a, b = row.positional
        for end in (a, b):
            if end not in nodes:
                raise NetworkReferenceError(end, "node", line=row.line)
        if pid in pipe_ids:
            raise NetworkParseError(f"duplicate pipe '{pid}'", line=row.line)
        pipe_ids.add(pid)
        opts = _Options(row, "pipes")
        if "length" not in row.options:
            raise NetworkParseError("pipe needs a length", line=row.line, field="length")
        if "diameter" not in row.options:
            raise NetworkParseError("pipe needs a diameter", line=row.line, field="diameter")
        length = opts.get("length", "length", None)
        diameter = opts.get("diameter", "length", None)
        friction = opts.get("friction", "none", None)
        opts.finish()
        try:
            pipes.append(Pipe(pid, a, b, length, diameter, friction))
        except DomainError as exc:
            raise NetworkParseError(str(exc), line=row.line) from None

    pipe_map = {p.id: p for p in pipes}
    compressors = []
    for row in doc.rows.get("compressors", []):
        if len(row.positional) != 1:
            raise NetworkParseError("compressor row needs exactly one id", line=row.line)
        cid = row.positional[0]
        opts = _Options(row, "compressors")
        pid = opts.text("pipe")
        at = opts.text("node")
        if pid is None:
            raise NetworkParseError("compressor needs pipe=", line=row.line, field="pipe")
        if at is None:
            raise NetworkParseError("compressor needs node=", line=row.line, field="node")
        if pid not in pipe_map:
            raise NetworkReferenceError(pid, "pipe", line=row.line)
        if at not in nodes:
            raise NetworkReferenceError(at, "node", line=row.line)
        kw = dict(
            alpha_min=opts.get("alpha_min", "none", 1.0),
            alpha_max=opts.get("alpha_max", "none", DEFAULT_ALPHA_MAX),
            efficiency=opts.get("efficiency", "none", 1.0),
            cost=opts.get("cost", "none", 1.0),
            exponent=opts.get("exponent", "none", DEFAULT_EXPONENT),
        )
        opts.finish()
        try:
            compressors.append(Compressor(cid, pid, at, **kw))
        except DomainError as exc:
            raise NetworkParseError(str(exc), line=row.line) from None

    netkv = doc.keyvalues.get("network", {})
    if "slack" in netkv:
        slack, lineno = netkv["slack"]
        if slack not in nodes:
            raise NetworkReferenceError(slack, "node", line=lineno)
    else:
        slack = node_objs[0].id
        defaulted.append("network.slack")
    slack_pressure = _kv(doc, "network", "slack_pressure", "pressure", P0, defaulted)
    mainline = None
    if "mainline" in netkv:
        value, lineno = netkv["mainline"]
        ends = value.split()
        if len(ends) != 2:
            raise NetworkParseError("mainline needs two node ids", line=lineno, field="mainline")
        for end in ends:
            if end not in nodes:
                raise NetworkReferenceError(end, "node", line=lineno)
        mainline = tuple(ends)
    if "name" in netkv:
        name = netkv["name"][0]

    try:
        net = Network(gas, tuple(node_objs), tuple(pipes), tuple(compressors),
                      slack=slack, slack_pressure=slack_pressure, mainline=mainline,
                      name=name)
    except DomainError as exc:
        raise NetworkParseError(str(exc)) from None

    if defaulted:
        log.info("defaults applied for: %s", ", ".join(defaulted))
    per_pipe = {}
    for c in compressors:
        per_pipe.setdefault(c.pipe, []).append(c.id)
    for pid, cs in per_pipe.items():
        if len(cs) > 1:
            log.warning("pipe %s carries two compressors (%s)", pid, ", ".join(cs))
    return net


def read_network(path):
    from pathlib import Path

    path = Path(path)
    return parse_network(path.read_text(), name=path.stem)


def serialize_network(net):
    """Write ``net`` in the document format; ``parse_network`` inverts it exactly."""
    f = format_float
    out = [
        "[gas]",
        f"sound_speed = {f(net.gas.sound_speed)} m/s",
        f"friction = {f(net.gas.friction)}",
        "",
        "[network]",
        f"name = {net.name}",
        f"slack = {net.slack}",
        f"slack_pressure = {f(net.slack_pressure)} Pa",
    ]
    if net.mainline is not None:
        out.append(f"mainline = {net.mainline[0]} {net.mainline[1]}")
    out += ["", "[nodes]"]
    for n in net.nodes:
        out.append(f"{n.id} q={f(n.q)} p_min={f(n.p_min)}Pa p_max={f(n.p_max)}Pa")
    out += ["", "[pipes]"]
    for p in net.pipes:
        line = f"{p.id} {p.from_node} {p.to_node} length={f(p.length)}m diameter={f(p.diameter)}m"
        if p.friction is not None:
            line += f" friction={f(p.friction)}"
        out.append(line)
    if net.compressors:
        out += ["", "[compressors]"]
        for c in net.compressors:
            out.append(
                f"{c.id} pipe={c.pipe} node={c.node} alpha_min={f(c.alpha_min)} "
                f"alpha_max={f(c.alpha_max)} efficiency={f(c.efficiency)} "
                f"cost={f(c.cost)} exponent={f(c.exponent)}"
            )
    out += ["", "[noise]"]
    for n in net.nodes:
        out.append(f"{n.id} sigma={f(n.noise_sigma)} tau={f(n.noise_tau)}s")
    return "\n".join(out) + "\n"


def write_network(net, path):
    from pathlib import Path

    Path(path).write_text(serialize_network(net))
