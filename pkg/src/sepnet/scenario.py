"""Scenario JSON loading and result serialization.

Scenario schema:
{
  "nodes": [1, 2],
  "edges": [{"from": 1, "to": 2,
             "channel": {"type": "dmc", "kernel": [[...], ...]}
                      | {"type": "pipe", "rate": 0.5}}],
  "sources": {"type": "iid", "alphabet_sizes": [...], "pmf": [...]}
           | {"type": "markov", "alphabet_sizes": [...],
              "initial": [...], "transition": [[...], ...]},
  "demands": [{"a": 1, "b": 2, "distortion_matrix": [[...], ...]}],
  "code": {"name": "uncoded_relay", "params": {...}},
  "experiment": "simulate" | "stack-check" | ...,
  ... experiment-specific keys ...
}
"""

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .netmodel import (BitPipe, DmcChannel, Edge, IidJoint, MarkovJoint,
                       NetworkSpec, validate_spec)
from .probkit import Kernel

SCHEMA_VERSION = "sepnet/v1"


class ScenarioError(ValueError):
    pass


def parse_channel(obj):
    kind = obj.get("type")
    if kind == "dmc":
        return DmcChannel(Kernel(obj["kernel"]))
    if kind == "pipe":
        return BitPipe(float(obj["rate"]))
    raise ScenarioError("unknown channel type %r" % kind)


def parse_sources(obj):
    kind = obj.get("type")
    sizes = obj["alphabet_sizes"]
    if kind == "iid":
        return IidJoint(sizes, obj["pmf"])
    if kind == "markov":
        return MarkovJoint(sizes, obj["initial"], obj["transition"])
    raise ScenarioError("unknown source type %r" % kind)


def parse_network(obj):
    nodes = tuple(obj["nodes"])
    edges = tuple(Edge(e["from"], e["to"], parse_channel(e["channel"]))
                  for e in obj.get("edges", []))
    demands = {(d["a"], d["b"]): np.asarray(d["distortion_matrix"], dtype=float)
               for d in obj.get("demands", [])}
    return NetworkSpec(nodes, edges, demands, parse_sources(obj["sources"]))


@dataclass
class Scenario:
    net: NetworkSpec
    experiment: str
    code_name: str = None
    code_params: dict = field(default_factory=dict)
    trials: int = 1000
    seed: int = 0
    output_path: str = None
    extra: dict = field(default_factory=dict)


_KNOWN = {"nodes", "edges", "sources", "demands", "code", "experiment",
          "trials", "seed", "output_path"}


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    net = parse_network(obj)
    diags = validate_spec(net)
    if diags:
        raise ScenarioError("; ".join(str(d) for d in diags))
    code = obj.get("code") or {}
    return Scenario(
        net=net,
        experiment=obj.get("experiment", "simulate"),
        code_name=code.get("name"),
        code_params=code.get("params", {}),
        trials=int(obj.get("trials", 1000)),
        seed=int(obj.get("seed", 0)),
        output_path=obj.get("output_path"),
        extra={k: v for k, v in obj.items() if k not in _KNOWN})


def write_json_atomic(obj, path):
    """Write a result file via temp-and-rename, with an embedded schema tag."""
    obj = dict(obj)
    obj.setdefault("schema", SCHEMA_VERSION)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dump_trace_csv(trace, edge_idx, path):
    """Per-edge trace dump: columns t, x, y."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,x,y\n")
        for t, (x, y) in enumerate(trace.edge_io[edge_idx]):
            fh.write("%d,%s,%s\n" % (t, x, y))
    return path
