"""Declarative scenarios: a base network, transforms applied in order, the
dispatch methods to compare, jitter settings and an optional Monte-Carlo
check. Scenario documents use the same sectioned syntax as networks::

    [scenario]
    name = scale_1.2
    network = canonical_transco.net      # relative to the scenario file
    methods = greedy gp
    p0 = 800 psi
    t0 = 900 s

    [transforms]
    scale factor=1.2
    shift from=M00 to=M71 fraction=0.2
    redistribute from=M63 to=M67 fraction=1.0

    [simulation]
    horizon = 90000 s
    trajectories = 200
    probes = L62:45km
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import csvio
from .dispatch import METHODS, dispatch
from .errors import GasJitterError, NetworkParseError
from .jitter import FluctuationStrength, diffusion_coefficient, fluctuation_strength
from .netfile import _quantity, read_network, tokenize
from .network import require_tree
from .sim import simulate, variance_growth
from .steady import DEFAULT_SAMPLES, compute_tree_flows
from .transforms import redistribute_load, scale_loads, shift_supply
from .units import P0, T0

log = logging.getLogger(__name__)

TRANSFORMS = ("scale", "shift", "redistribute")


class StageError(GasJitterError):
    """Failure inside one pipeline stage; the message carries the stage name."""

    def __init__(self, stage, error):
        self.stage = stage
        self.error = error
        super().__init__(f"[{stage}] {type(error).__name__}: {error}")


@dataclass
class Transform:
    kind: str
    params: dict

    def apply(self, net):
        p = self.params
        if self.kind == "scale":
            return scale_loads(net, p["factor"])
        if self.kind == "shift":
            return shift_supply(net, p["from"], p["to"], p["fraction"])
        return redistribute_load(net, p["from"], p["to"], p["fraction"])


@dataclass
class SimulationSettings:
    horizon: float = 100 * T0
    dt: float | None = None
    dx: float = 5e3
    trajectories: int = 200
    seed: int = 0
    stride: int | None = None
    probes: list = field(default_factory=list)  # [(pipe id, x)]


@dataclass
class Scenario:
    name: str
    network_path: Path
    transforms: list = field(default_factory=list)
    methods: tuple = ("gp",)
    p0: float = P0
    t0: float = T0
    samples: int = DEFAULT_SAMPLES
    tau_eff: float | None = None
    simulation: SimulationSettings | None = None


def _ids(value):
    return [s for s in value.replace(",", " ").split() if s]


def parse_scenario(text, base_dir=".", name="scenario"):
    doc = tokenize(text, ("scenario", "simulation"), ("transforms",))
    kv = doc.keyvalues.get("scenario", {})
    allowed = {"name", "network", "methods", "p0", "t0", "samples", "tau_eff"}
    for key, (_, line) in kv.items():
        if key not in allowed:
            raise NetworkParseError("unknown key in [scenario]", line=line, field=key)
    if "network" not in kv:
        raise NetworkParseError("[scenario] needs network = <path>", field="network")
    if "methods" in kv and not _ids(kv["methods"][0]):
        raise NetworkParseError("methods is empty", line=kv["methods"][1], field="methods")
    sc = Scenario(kv["name"][0] if "name" in kv else name,
                  Path(base_dir) / kv["network"][0])
    if "methods" in kv:
        value, line = kv["methods"]
        methods = tuple(_ids(value))
        for m in methods:
            if m not in METHODS:
                raise NetworkParseError(f"unknown method '{m}'", line=line, field="methods")
        sc.methods = methods
    for key, dim in (("p0", "pressure"), ("t0", "time"), ("tau_eff", "time")):
        if key in kv:
            setattr(sc, key, _quantity(kv[key][0], dim, kv[key][1], key))
    if "samples" in kv:
        sc.samples = int(_quantity(kv["samples"][0], "none", kv["samples"][1], "samples"))

    for row in doc.rows.get("transforms", []):
        if len(row.positional) != 1 or row.positional[0] not in TRANSFORMS:
            raise NetworkParseError(
                f"transform row must start with one of {', '.join(TRANSFORMS)}", line=row.line
            )
        kind = row.positional[0]
        opts = {k: v for k, (v, _) in row.options.items()}
        need = {"factor"} if kind == "scale" else {"from", "to", "fraction"}
        if set(opts) != need:
            raise NetworkParseError(
                f"'{kind}' takes exactly: {', '.join(sorted(need))}", line=row.line
            )
        params = {}
        for k, v in opts.items():
            if k in ("from", "to"):
                params[k] = _ids(v)
            else:
                params[k] = _quantity(v, "none", row.line, k)
        sc.transforms.append(Transform(kind, params))

    if "simulation" in doc.keyvalues:
        s = SimulationSettings()
        for key, (value, line) in doc.keyvalues["simulation"].items():
            if key == "horizon":
                s.horizon = _quantity(value, "time", line, key)
            elif key == "dt":
                s.dt = _quantity(value, "time", line, key)
            elif key == "dx":
                s.dx = _quantity(value, "length", line, key)
            elif key in ("trajectories", "seed", "stride"):
                setattr(s, key, int(_quantity(value, "none", line, key)))
            elif key == "probes":
                s.probes = [parse_probe(tok, line) for tok in value.split()]
            else:
                raise NetworkParseError("unknown key in [simulation]", line=line, field=key)
        sc.simulation = s
    return sc


def parse_probe(text, line=None):
    """'PIPE:X' with X a length (e.g. 'L62:45km')."""
    pid, sep, x = text.partition(":")
    if not sep or not pid:
        raise NetworkParseError(f"probe {text!r} must look like PIPE:X", line=line, field="probes")
    return pid, _quantity(x, "length", line, "probes")


def read_scenario(path):
    path = Path(path)
    return parse_scenario(path.read_text(), base_dir=path.parent, name=path.stem)


@dataclass
class ScenarioReport:
    scenario: Scenario
    network: object
    steady: object
    dispatches: dict
    jitter: dict
    variance: list = field(default_factory=list)
    files: dict = field(default_factory=dict)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except (GasJitterError, ValueError, OSError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class DispatchComparison:
    results: dict  # method -> DispatchResult
    jitter: dict  # method -> JitterProfile

    @property
    def power(self):
        return {m: r.power for m, r in self.results.items()}

    def rows(self):
        return csvio.comparison_rows(self.jitter["greedy"], self.jitter["gp"])


def compare_dispatch(net, flows=None, strength=None, samples=DEFAULT_SAMPLES):
    """Greedy and GP dispatch side by side with their diffusion profiles."""
    flows = flows if flows is not None else compute_tree_flows(net)
    strength = strength or fluctuation_strength(net)
    results, jitter = {}, {}
    for m in ("greedy", "gp"):
        results[m] = dispatch(net, m, flows)
        jitter[m] = diffusion_coefficient(results[m].steady, strength=strength, n=samples)
    return DispatchComparison(results, jitter)


def build_network(sc):
    net = _stage("load", read_network, sc.network_path)
    for tr in sc.transforms:
        net = _stage(f"transform {tr.kind}", tr.apply, net)
    _stage("validate", require_tree, net)
    return net


def run_scenario(sc, out_dir=None, seed=None):
    """Run every stage; write CSVs under ``out_dir/<name>`` when given."""
    net = build_network(sc)
    flows = _stage("steady", compute_tree_flows, net)
    strength = fluctuation_strength(net)
    if sc.tau_eff is not None:
        strength = FluctuationStrength(strength.S, sc.tau_eff)
    dispatches, jitters = {}, {}
    for m in sc.methods:
        res = _stage(f"dispatch {m}", dispatch, net, m, flows)
        dispatches[m] = res
        jitters[m] = _stage(f"jitter {m}", diffusion_coefficient, res.steady,
                            strength=strength, n=sc.samples)
    # pressures depend on the ratios, so the reported steady state is the
    # one produced by the first listed method
    report = ScenarioReport(sc, net, dispatches[sc.methods[0]].steady, dispatches, jitters)

    if sc.simulation is not None:
        s = sc.simulation
        method = sc.methods[0]
        probes = s.probes or [(p.id, 0.5 * p.length) for p in net.pipes]
        ens = _stage("simulate", simulate, net, dispatches[method].ratios, s.horizon, s.dt, s.dx,
                     s.trajectories, s.seed if seed is None else seed, s.stride, probes,
                     dispatches[method].steady)
        jp = jitters[method]
        for i, (pid, x) in enumerate(probes):
            fit = _stage("simulate", variance_growth, ens, i)
            report.variance.append((pid, x, fit, float(jp.at(pid, x))))

    if out_dir is not None:
        _stage("output", _write, report, Path(out_dir) / sc.name)
    return report


def _write(report, folder):
    folder.mkdir(parents=True, exist_ok=True)
    sc = report.scenario
    meta = {"scenario": sc.name, "network": report.network.name}
    files = {}

    def emit(key, fname, table, extra=None):
        path = folder / fname
        csvio.write_csv(path, table[0], table[1], {**meta, **(extra or {})})
        files[key] = path

    ss = report.steady
    emit("steady_nodes", "steady_nodes.csv", csvio.steady_node_rows(ss), {"ratios": sc.methods[0]})
    emit("steady_profiles", "steady_profiles.csv", csvio.steady_profile_rows(ss, sc.samples))
    for m, res in report.dispatches.items():
        emit(f"dispatch_{m}", f"dispatch_{m}.csv", csvio.dispatch_rows(res), {"method": m})
        jp = report.jitter[m]
        emit(f"jitter_{m}", f"jitter_{m}.csv", csvio.jitter_rows(jp, sc.p0, sc.t0),
             {"method": m, "p0_Pa": sc.p0, "t0_s": sc.t0, "S_kg2_s2": jp.strength.S,
              "tau_eff_s": jp.strength.tau_eff})
    if "greedy" in report.dispatches and "gp" in report.dispatches:
        cmp = DispatchComparison(report.dispatches, report.jitter)
        emit("comparison", "comparison.csv", cmp.rows(),
             {"power_greedy_W": report.dispatches["greedy"].power,
              "power_gp_W": report.dispatches["gp"].power})
    if report.variance:
        rows = [[pid, x, f.slope, f.stderr, f.r2, D, f.slope / D if D > 0 else float("nan"),
                 f.t_min, f.t_max] for pid, x, f, D in report.variance]
        emit("variance", "variance_growth.csv",
             (["pipe_id", "x_m", "slope_Pa2_per_s", "stderr", "r2", "D_Pa2_per_s",
               "slope_over_D", "t_min_s", "t_max_s"], rows))
    report.files = files
    return files
