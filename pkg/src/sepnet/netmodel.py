"""Directed network of DMC / bit-pipe edges with jointly distributed sources,
causal coding policies, a time-stepped execution engine, and Monte Carlo
distortion estimation.

Timing model: at each step t (0-based) every node computes its channel inputs
simultaneously from outputs observed at strictly earlier steps. DMC outputs
produced at step t become visible to encoders from step t+1 on. Bit-pipe
payloads are delivered at the step they are sent (visible from t+1) unless
pipe_delay=1, in which case they surface one step later.
"""

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .probkit import Kernel, ProbVector, sample_many


class ArityMismatch(ValueError):
    pass


class BudgetOverflow(RuntimeError):
    """An encoder wrote more bits into a pipe than floor(t * rate) allows."""


@dataclass(frozen=True)
class DmcChannel:
    kernel: Kernel


@dataclass(frozen=True)
class BitPipe:
    rate: float  # bits per network use

    def budget(self, steps):
        """Whole bits deliverable within the first `steps` uses."""
        return int(np.floor(steps * self.rate + 1e-12))


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    channel: object  # DmcChannel | BitPipe


class IidJoint:
    """Jointly i.i.d. per-symbol source law over the product alphabet."""

    def __init__(self, alphabet_sizes, pmf):
        self.alphabet_sizes = tuple(int(a) for a in alphabet_sizes)
        self.pmf = pmf if isinstance(pmf, ProbVector) else ProbVector(pmf)
        if self.pmf.size != int(np.prod(self.alphabet_sizes)):
            raise ValueError("pmf size does not match product alphabet")

    def draw_block(self, length, rng):
        u = rng.uniform(length)
        joint = sample_many(self.pmf.probs, u)
        return np.stack(np.unravel_index(joint, self.alphabet_sizes), axis=1)


class MarkovJoint:
    """A single Markov chain over the product alphabet; each node observes
    its own coordinate. The chain must be irreducible and aperiodic."""

    def __init__(self, alphabet_sizes, initial, transition):
        self.alphabet_sizes = tuple(int(a) for a in alphabet_sizes)
        self.initial = initial if isinstance(initial, ProbVector) else ProbVector(initial)
        self.transition = transition if isinstance(transition, Kernel) else Kernel(transition)
        k = int(np.prod(self.alphabet_sizes))
        if self.initial.size != k or self.transition.input_size != k \
                or self.transition.output_size != k:
            raise ValueError("chain dimensions do not match product alphabet")
        g = nx.DiGraph((i, j) for i in range(k) for j in range(k)
                       if self.transition.matrix[i, j] > 0)
        if g.number_of_nodes() < k or not nx.is_strongly_connected(g):
            raise ValueError("transition matrix is not irreducible")
        if not nx.is_aperiodic(g):
            raise ValueError("transition matrix is periodic")

    def draw_many(self, length, count, rng):
        """count independent chains of the given length, vectorized.

        Returns an array of shape (count, length, num_nodes).
        """
        u = rng.uniform((count, length))
        k = self.initial.size
        cums = np.cumsum(self.transition.matrix, axis=1)
        cum0 = np.cumsum(self.initial.probs)
        states = np.empty((count, length), dtype=np.int64)
        s = np.minimum(np.searchsorted(cum0, u[:, 0] * cum0[-1], side="right"),
                       k - 1)
        states[:, 0] = s
        for i in range(1, length):
            rows = cums[s]
            s = np.minimum((u[:, i, None] * rows[:, -1:] >= rows).sum(axis=1),
                           k - 1)
            states[:, i] = s
        coords = np.unravel_index(states.reshape(-1), self.alphabet_sizes)
        return np.stack(coords, axis=1).reshape(count, length, -1)

    def draw_block(self, length, rng):
        u = rng.uniform(length)
        states = np.empty(length, dtype=np.int64)
        cum0 = np.cumsum(self.initial.probs)
        cums = np.cumsum(self.transition.matrix, axis=1)
        s = min(int(np.searchsorted(cum0, u[0] * cum0[-1], side="right")),
                self.initial.size - 1)
        states[0] = s
        for i in range(1, length):
            row = cums[s]
            s = min(int(np.searchsorted(row, u[i] * row[-1], side="right")),
                    row.size - 1)
            states[i] = s
        return np.stack(np.unravel_index(states, self.alphabet_sizes), axis=1)


@dataclass(frozen=True)
class CodeParameters:
    L: int  # source symbols per block
    n: int  # channel uses per block

    def __post_init__(self):
        if self.L < 1 or self.n < 1:
            raise ValueError("L and n must be positive integers")

    @property
    def kappa(self):
        return self.L / self.n


@dataclass
class CodingPolicy:
    """Per-node encoders and per-demand decoders.

    Encoders implement emit(t, u_block, received, rng) -> {edge_idx: symbol
    or bit tuple}; decoders implement decode(u_block_b, received, rng) ->
    reconstruction array of length L. `received` maps incoming edge index to
    the list of outputs observed so far (engine-truncated for causality).
    """
    encoders: dict
    decoders: dict


@dataclass(frozen=True)
class NetworkSpec:
    nodes: tuple                      # node ids, order fixes matrix indexing
    edges: tuple                      # Edge instances
    demands: dict                     # (a, b) -> distortion matrix (ndarray)
    sources: object                   # IidJoint | MarkovJoint

    def node_index(self, node_id):
        return self.nodes.index(node_id)

    def in_edges(self, node_id):
        return [i for i, e in enumerate(self.edges) if e.head == node_id]

    def out_edges(self, node_id):
        return [i for i, e in enumerate(self.edges) if e.tail == node_id]

    @property
    def d_max(self):
        if not self.demands:
            return 0.0
        return max(float(np.asarray(d).max()) for d in self.demands.values())


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    detail: dict

    def __str__(self):
        return "%s %r" % (self.kind, self.detail)


def validate_spec(net):
    """Machine-readable diagnostics; empty list iff the spec is well formed."""
    out = []
    ids = set(net.nodes)
    for i, e in enumerate(net.edges):
        if e.tail not in ids or e.head not in ids:
            out.append(Diagnostic("BadEndpoint", {"edge": i}))
        if e.tail == e.head:
            out.append(Diagnostic("SelfLoop", {"edge": i}))
        if isinstance(e.channel, DmcChannel):
            rows = np.asarray(e.channel.kernel.matrix)
            bad = np.where(np.abs(rows.sum(axis=1) - 1.0) > 1e-9)[0]
            for r in bad:
                out.append(Diagnostic("InvalidKernel", {"edge": i, "row": int(r)}))
        elif isinstance(e.channel, BitPipe):
            if not e.channel.rate > 0:
                out.append(Diagnostic("NonPositiveRate", {"edge": i}))
    g = nx.DiGraph()
    g.add_nodes_from(net.nodes)
    g.add_edges_from((e.tail, e.head) for e in net.edges)
    for (a, b), d in net.demands.items():
        d = np.asarray(d, dtype=float)
        if not np.all(np.isfinite(d)):
            out.append(Diagnostic("InfiniteDistortion", {"demand": (a, b)}))
        if np.any(d < 0):
            out.append(Diagnostic("NegativeDistortion", {"demand": (a, b)}))
        if a not in ids or b not in ids:
            out.append(Diagnostic("BadEndpoint", {"demand": (a, b)}))
        elif a != b and not nx.has_path(g, a, b):
            out.append(Diagnostic("UnreachableDemand", {"a": a, "b": b}))
    return out


def _make_kernel_loader(kernel):
    cums = np.cumsum(kernel.matrix, axis=1)
    out_hi = kernel.output_size - 1

    def draw(x, u):
        row = cums[x]
        return min(int(np.searchsorted(row, u * row[-1], side="right")), out_hi)

    return draw


@dataclass
class TraceRecord:
    u: dict                 # node id -> source block array
    edge_io: dict           # edge idx -> list over t of (x, y)
    recon: dict             # (a, b) -> reconstruction array
    distortion: dict        # (a, b) -> per-block average distortion


def _block_distortion(d, u_block, recon):
    d = np.asarray(d, dtype=float)
    return float(d[np.asarray(u_block), np.asarray(recon)].mean())


def run_block(net, code, params, rng, pipe_delay=0, edge_time_map=None,
              u_block=None):
    """Execute one coding block of n network uses and decode.

    edge_time_map maps engine step t to a (layer, base_time) pair used to key
    per-use channel noise; the default keys noise by (edge, t) with layer 0.
    Used by the stacking machinery to couple noise draws between a stacked
    run and its interleaved single-layer equivalent.
    """
    L, n = params.L, params.n
    if edge_time_map is None:
        edge_time_map = lambda t: (0, t)
    if u_block is None:
        raw = net.sources.draw_block(L, rng.child("src"))
        u_block = {a: raw[:, i].copy() for i, a in enumerate(net.nodes)}

    drawers = {i: _make_kernel_loader(e.channel.kernel)
               for i, e in enumerate(net.edges)
               if isinstance(e.channel, DmcChannel)}
    rx = {i: [] for i in range(len(net.edges))}   # receiver-visible outputs
    edge_io = {i: [] for i in range(len(net.edges))}
    pipe_sent = {i: 0 for i in range(len(net.edges))}
    pending = {i: None for i in range(len(net.edges))}  # delayed pipe payloads

    for t in range(n):
        emissions = {}
        for a in net.nodes:
            enc = code.encoders.get(a)
            if enc is None:
                continue
            visible = {i: rx[i][:t] for i in net.in_edges(a)}
            em = enc.emit(t, u_block[a], visible, rng.child("node", a))
            for i in em:
                if net.edges[i].tail != a:
                    raise ArityMismatch("node %r emitted on edge %d it does "
                                        "not feed" % (a, i))
            emissions[a] = em
        for i, e in enumerate(net.edges):
            x = emissions.get(e.tail, {}).get(i)
            if isinstance(e.channel, DmcChannel):
                if x is None:
                    raise ArityMismatch("no input for DMC edge %d at t=%d" % (i, t))
                layer, base_t = edge_time_map(t)
                u = rng.child("edge", i, base_t).uniform(layer + 1)[layer]
                y = drawers[i](int(x), u)
                edge_io[i].append((int(x), y))
                rx[i].append(y)
            else:
                bits = tuple(int(b) for b in (x or ()))
                pipe_sent[i] += len(bits)
                if pipe_sent[i] > e.channel.budget(t + 1):
                    raise BudgetOverflow("edge %d exceeded floor(t*rate) bits "
                                         "by t=%d" % (i, t + 1))
                edge_io[i].append((bits, bits))
                if pipe_delay:
                    rx[i].append(pending[i] if pending[i] is not None else ())
                    pending[i] = bits
                else:
                    rx[i].append(bits)

    recon, dist = {}, {}
    for (a, b), dec in code.decoders.items():
        full = {i: list(rx[i]) for i in net.in_edges(b)}
        recon[a, b] = np.asarray(dec.decode(u_block[b], full,
                                            rng.child("dec", a, b)))
        if len(recon[a, b]) != L:
            raise ArityMismatch("decoder for %r returned wrong block length"
                                % ((a, b),))
        dist[a, b] = _block_distortion(net.demands[(a, b)], u_block[a],
                                       recon[a, b])
    return TraceRecord(u_block, edge_io, recon, dist)


@dataclass
class DistortionMatrix:
    values: np.ndarray      # m x m, indexed by position in net.nodes
    stderr: np.ndarray
    trials: int
    nodes: tuple = field(default=())

    def entry(self, a, b):
        i, j = self.nodes.index(a), self.nodes.index(b)
        return float(self.values[i, j]), float(self.stderr[i, j])

    def to_json(self):
        return {"nodes": list(self.nodes),
                "matrix": self.values.tolist(),
                "stderr": self.stderr.tolist(),
                "trials": self.trials}


def estimate_distortion(net, code, params, trials, rng, pipe_delay=0):
    """Mean per-demand block distortion over independent trials, with
    standard errors. Non-demanded pairs are identically zero."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m = len(net.nodes)
    sums = np.zeros((m, m))
    sqs = np.zeros((m, m))
    for j in range(trials):
        tr = run_block(net, code, params, rng.child("trial", j),
                       pipe_delay=pipe_delay)
        for (a, b), v in tr.distortion.items():
            ia, ib = net.node_index(a), net.node_index(b)
            sums[ia, ib] += v
            sqs[ia, ib] += v * v
    mean = sums / trials
    var = np.maximum(sqs / trials - mean ** 2, 0.0)
    stderr = np.sqrt(var / max(trials - 1, 1))
    return DistortionMatrix(mean, stderr, trials, tuple(net.nodes))
