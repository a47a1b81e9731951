"""Stacked-network machinery: build the N-fold network, run stacked codes,
lift a single-layer code to N independent layers, de-stack an N-layer code
into an interleaved single-layer equivalent, and the even/odd layer split
for sources with memory.

Layer/time indexing is 0-based throughout. The interleaving schedule maps
(layer l, stacked time t) to single-layer time tau = t*N + l, so every
stacked-time-(t-1) observation lands strictly before every stacked-time-t
emission.

Noise coupling: a DMC edge at stacked time t draws the N per-layer uniforms
from the stream child("edge", e, t); the de-stacked single-layer run draws
the layer-l entry of that same stream, so coupled seeds reproduce the
stacked run's channel realizations bit for bit.
"""

from dataclasses import dataclass

import numpy as np

from .netmodel import (ArityMismatch, BitPipe, BudgetOverflow, CodeParameters,
                       CodingPolicy, DmcChannel, Edge, NetworkSpec,
                       TraceRecord, _block_distortion)


@dataclass(frozen=True)
class InterleaveSchedule:
    """Bijection between (layer, stacked time) and single-layer time."""
    N: int
    n: int

    @property
    def total_time(self):
        return self.N * self.n

    def to_single(self, t, layer):
        if not (0 <= t < self.n and 0 <= layer < self.N):
            raise ValueError("schedule index out of range")
        return t * self.N + layer

    def to_stacked(self, tau):
        if not 0 <= tau < self.total_time:
            raise ValueError("schedule index out of range")
        return tau // self.N, tau % self.N

    def check(self):
        """Exhaustive bijectivity + dependency-preservation check."""
        seen = set()
        for t in range(self.n):
            for l in range(self.N):
                tau = self.to_single(t, l)
                assert self.to_stacked(tau) == (t, l)
                seen.add(tau)
        assert seen == set(range(self.total_time))
        # every period-(t-1) observation precedes every period-t emission
        for t in range(1, self.n):
            latest_obs = max(self.to_single(t - 1, l) for l in range(self.N))
            earliest_em = min(self.to_single(t, l) for l in range(self.N))
            assert latest_obs < earliest_em
        return True


@dataclass
class StackedCode:
    """An N-layer code: encoders see all layers' outputs at earlier stacked
    times plus the full length-N*L source block; decoders see all layers.

    Stacked encoders implement emit(t, u_full, received_all, rng) ->
    {edge_idx: length-N symbol vector | list of N bit payloads | payload},
    where received_all[e] is the list over earlier stacked times of per-layer
    output vectors. Decoders implement decode(u_full_b, received_all, rng).
    """
    encoders: dict
    decoders: dict
    N: int
    params: CodeParameters  # per-layer block parameters


def stack_network(net, N):
    """N copies of the network: every node and edge replicated N times.

    Nodes are relabeled (node_id, layer); replicated edges are independent
    channel instances. Mostly useful for structural checks; the stacked
    execution engine keeps the per-layer structure implicit.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    nodes = tuple((a, l) for a in net.nodes for l in range(N))
    edges = tuple(Edge((e.tail, l), (e.head, l), e.channel)
                  for e in net.edges for l in range(N))
    demands = {((a, 0), (b, 0)): d for (a, b), d in net.demands.items()}
    return NetworkSpec(nodes, edges, demands, net.sources)


# ---------------------------------------------------------------------------
# stacked execution engine

class _RawDmcLink:
    def __init__(self, e_idx, edge, N):
        self.e = e_idx
        self.N = N
        self.cums = np.cumsum(edge.channel.kernel.matrix, axis=1)
        self.hi = edge.channel.kernel.output_size - 1

    def transmit(self, rng, t, x_vec):
        x = np.asarray(x_vec, dtype=np.int64)
        if x.shape != (self.N,):
            raise ArityMismatch("DMC edge %d expects %d layer inputs"
                                % (self.e, self.N))
        u = rng.child("edge", self.e, t).uniform(self.N)
        rows = self.cums[x]
        y = np.minimum((u[:, None] * rows[:, -1:] >= rows).sum(axis=1), self.hi)
        return x, y, y


class _RawPipeLink:
    def __init__(self, e_idx, edge, N):
        self.e = e_idx
        self.N = N
        self.pipe = edge.channel
        self.sent = [0] * N

    def transmit(self, rng, t, payloads):
        if payloads is None:
            payloads = [()] * self.N
        if len(payloads) != self.N:
            raise ArityMismatch("pipe edge %d expects %d layer payloads"
                                % (self.e, self.N))
        out = []
        for l, p in enumerate(payloads):
            bits = tuple(int(b) for b in (p or ()))
            self.sent[l] += len(bits)
            if self.sent[l] > self.pipe.budget(t + 1):
                raise BudgetOverflow("pipe edge %d layer %d over budget at "
                                     "t=%d" % (self.e, l, t + 1))
            out.append(bits)
        return list(out), list(out), list(out)


def _default_handler(e_idx, edge, N):
    if isinstance(edge.channel, DmcChannel):
        return _RawDmcLink(e_idx, edge, N)
    return _RawPipeLink(e_idx, edge, N)


@dataclass
class StackedConfig:
    """A base network, layer count, and per-edge link behaviors.

    behaviors maps edge index to an object exposing make_handler(e_idx,
    edge, N); missing entries get the raw per-layer channel.
    """
    net: NetworkSpec
    N: int
    behaviors: dict = None
    pipe_delay: int = 0

    def handler(self, e_idx):
        beh = (self.behaviors or {}).get(e_idx)
        edge = self.net.edges[e_idx]
        if beh is None:
            return _default_handler(e_idx, edge, self.N)
        return beh.make_handler(e_idx, edge, self.N)


def run_stacked_block(config, code, rng, u_block=None):
    """Execute one stacked coding block: n uses of the N-layer network."""
    net, N = config.net, config.N
    if code.N != N:
        raise ArityMismatch("code has %d layers, config has %d" % (code.N, N))
    L, n = code.params.L, code.params.n
    if u_block is None:
        raw = net.sources.draw_block(N * L, rng.child("src"))
        u_block = {a: raw[:, i].copy() for i, a in enumerate(net.nodes)}

    handlers = {i: config.handler(i) for i in range(len(net.edges))}
    rx = {i: [] for i in range(len(net.edges))}
    edge_io = {i: [] for i in range(len(net.edges))}
    pending = {i: None for i in range(len(net.edges))}

    for t in range(n):
        emissions = {}
        for a in net.nodes:
            enc = code.encoders.get(a)
            if enc is None:
                continue
            visible = {i: rx[i][:t] for i in net.in_edges(a)}
            emissions[a] = enc.emit(t, u_block[a], visible,
                                    rng.child("node", a))
        for i, e in enumerate(net.edges):
            x = emissions.get(e.tail, {}).get(i)
            x_rec, y_rec, delivered = handlers[i].transmit(rng, t, x)
            edge_io[i].append((x_rec, y_rec))
            if config.pipe_delay and isinstance(e.channel, BitPipe):
                rx[i].append(pending[i] if pending[i] is not None
                             else [()] * N)
                pending[i] = delivered
            else:
                rx[i].append(delivered)

    recon, dist = {}, {}
    for (a, b), dec in code.decoders.items():
        full = {i: list(rx[i]) for i in net.in_edges(b)}
        recon[a, b] = np.asarray(dec.decode(u_block[b], full,
                                            rng.child("dec", a, b)))
        if len(recon[a, b]) != N * L:
            raise ArityMismatch("stacked decoder for %r returned wrong "
                                "block length" % ((a, b),))
        dist[a, b] = _block_distortion(net.demands[(a, b)], u_block[a],
                                       recon[a, b])
    return TraceRecord(u_block, edge_io, recon, dist)


def estimate_stacked_distortion(config, code, trials, rng):
    per_trial = {k: [] for k in code.decoders}
    for j in range(trials):
        tr = run_stacked_block(config, code, rng.child("trial", j))
        for k, v in tr.distortion.items():
            per_trial[k].append(v)
    out = {}
    for k, vals in per_trial.items():
        arr = np.asarray(vals)
        out[k] = (float(arr.mean()),
                  float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1
                  else 0.0)
    return out


# ---------------------------------------------------------------------------
# lifting: one independent code copy per layer

class LiftedEncoder:
    """Runs an independent copy of a single-layer encoder in each layer."""

    def __init__(self, base, L, N):
        self.base = base
        self.L = L
        self.N = N

    def emit(self, t, u_full, received_all, rng):
        out = {}
        for l in range(self.N):
            u_l = u_full[l * self.L:(l + 1) * self.L]
            vis_l = {e: [self._layer_view(obs, l) for obs in seq]
                     for e, seq in received_all.items()}
            em = self.base.emit(t, u_l, vis_l, rng.child("layer", l))
            for e, v in em.items():
                out.setdefault(e, [None] * self.N)[l] = v
        return {e: (np.asarray(v) if np.all([isinstance(x, (int, np.integer))
                                             for x in v]) else v)
                for e, v in out.items()}

    @staticmethod
    def _layer_view(obs, l):
        return obs[l]


class LiftedDecoder:
    def __init__(self, base, L, N):
        self.base = base
        self.L = L
        self.N = N

    def decode(self, u_full, received_all, rng):
        recon = np.empty(self.N * self.L, dtype=np.int64)
        for l in range(self.N):
            u_l = u_full[l * self.L:(l + 1) * self.L]
            vis_l = {e: [obs[l] for obs in seq]
                     for e, seq in received_all.items()}
            recon[l * self.L:(l + 1) * self.L] = \
                self.base.decode(u_l, vis_l, rng.child("layer", l))
        return recon


def lift_code(code, params, N):
    """Run the same single-layer code independently
    in each of the N layers, on the l-th source sub-block."""
    return StackedCode(
        encoders={a: LiftedEncoder(enc, params.L, N)
                  for a, enc in code.encoders.items()},
        decoders={k: LiftedDecoder(dec, params.L, N)
                  for k, dec in code.decoders.items()},
        N=N, params=params)


# ---------------------------------------------------------------------------
# de-stacking: the interleaved single-layer equivalent

class DestackedEncoder:
    """Replays layer-l stacked-time-t emissions at single-layer time t*N+l.

    Outputs observed during the current period are buffered but never read;
    the stacked encoder only ever sees full earlier periods, which is what
    makes the interleaving legal.
    """

    def __init__(self, stacked_enc, schedule):
        self.enc = stacked_enc
        self.sched = schedule

    def emit(self, tau, u_full, received_single, rng):
        t, layer = self.sched.to_stacked(tau)
        N = self.sched.N
        received_all = {}
        for e, seq in received_single.items():
            per_t = []
            for tp in range(t):
                chunk = seq[tp * N:(tp + 1) * N]
                per_t.append(self._pack(chunk))
            received_all[e] = per_t
        em = self.enc.emit(t, u_full, received_all, rng)
        return {e: v[layer] for e, v in em.items()}

    @staticmethod
    def _pack(chunk):
        if chunk and isinstance(chunk[0], (int, np.integer)):
            return np.asarray(chunk, dtype=np.int64)
        return list(chunk)


class DestackedDecoder:
    def __init__(self, stacked_dec, schedule):
        self.dec = stacked_dec
        self.sched = schedule

    def decode(self, u_full, received_single, rng):
        N, n = self.sched.N, self.sched.n
        received_all = {}
        for e, seq in received_single.items():
            received_all[e] = [DestackedEncoder._pack(seq[t * N:(t + 1) * N])
                               for t in range(n)]
        return self.dec.decode(u_full, received_all, rng)


@dataclass
class DestackedPolicy(CodingPolicy):
    schedule: InterleaveSchedule = None

    def edge_time_map(self, tau):
        t, layer = self.sched_pair(tau)
        return layer, t

    def sched_pair(self, tau):
        return self.schedule.to_stacked(tau)


def destack_code(stacked):
    """The interleaved single-layer equivalent of an N-layer code.

    Returns a policy over blocks of N*L source symbols and N*n channel uses;
    kappa is preserved exactly. Run it through run_destacked_block so channel
    noise streams couple with the stacked run.
    """
    sched = InterleaveSchedule(stacked.N, stacked.params.n)
    policy = DestackedPolicy(
        encoders={a: DestackedEncoder(enc, sched)
                  for a, enc in stacked.encoders.items()},
        decoders={k: DestackedDecoder(dec, sched)
                  for k, dec in stacked.decoders.items()},
        schedule=sched)
    params = CodeParameters(stacked.N * stacked.params.L,
                            stacked.N * stacked.params.n)
    return policy, params


def run_destacked_block(net, policy, params, rng, pipe_delay=0, u_block=None):
    from .netmodel import run_block
    return run_block(net, policy, params, rng, pipe_delay=pipe_delay,
                     edge_time_map=policy.edge_time_map, u_block=u_block)


def _sym_equal(a, b):
    if isinstance(a, (tuple, list)) or isinstance(b, (tuple, list)):
        return tuple(a) == tuple(b)
    return int(a) == int(b)


def traces_match(stacked_trace, single_trace, schedule):
    """True iff per-edge (x, y) sequences agree exactly under the schedule."""
    for e, seq in stacked_trace.edge_io.items():
        flat = single_trace.edge_io[e]
        for t, (xv, yv) in enumerate(seq):
            for l in range(schedule.N):
                x1, y1 = flat[schedule.to_single(t, l)]
                if not (_sym_equal(xv[l], x1) and _sym_equal(yv[l], y1)):
                    return False
    return True


# ---------------------------------------------------------------------------
# even/odd layer split for mixing sources

class _ParityEncoder:
    def __init__(self, inner, L, N_inner):
        self.inner = inner
        self.L = L
        self.Ni = N_inner

    def emit(self, t, u_full, received_all, rng):
        N2 = 2 * self.Ni
        out = {}
        for c in (0, 1):
            u_c = np.concatenate([
                u_full[(2 * j + c) * self.L:(2 * j + c + 1) * self.L]
                for j in range(self.Ni)])
            vis_c = {e: [np.asarray(obs)[c::2] for obs in seq]
                     for e, seq in received_all.items()}
            em = self.inner.emit(t, u_c, vis_c, rng.child("class", c))
            for e, v in em.items():
                out.setdefault(e, [None] * N2)[c::2] = list(np.asarray(v))
        return {e: np.asarray(v) for e, v in out.items()}


class _ParityDecoder:
    def __init__(self, inner, L, N_inner):
        self.inner = inner
        self.L = L
        self.Ni = N_inner

    def decode(self, u_full, received_all, rng):
        recon = np.empty(2 * self.Ni * self.L, dtype=np.int64)
        for c in (0, 1):
            u_c = np.concatenate([
                u_full[(2 * j + c) * self.L:(2 * j + c + 1) * self.L]
                for j in range(self.Ni)])
            vis_c = {e: [np.asarray(obs)[c::2] for obs in seq]
                     for e, seq in received_all.items()}
            r_c = self.inner.decode(u_c, vis_c, rng.child("class", c))
            for j in range(self.Ni):
                recon[(2 * j + c) * self.L:(2 * j + c + 1) * self.L] = \
                    r_c[j * self.L:(j + 1) * self.L]
        return recon


def even_odd_split(stacked, source):
    """Code even-numbered layers together and odd-numbered layers together.

    The given N-layer code is instantiated once per parity class; class c
    carries source blocks c, c+2, c+4, ... and sees only its own layers'
    history. Returns a 2N-layer code. Requires a source with memory (the
    construction is the identity statistically for i.i.d. sources).
    """
    if stacked.N < 1:
        raise ValueError("need at least one layer per class")
    L, Ni = stacked.params.L, stacked.N
    return StackedCode(
        encoders={a: _ParityEncoder(enc, L, Ni)
                  for a, enc in stacked.encoders.items()},
        decoders={k: _ParityDecoder(dec, L, Ni)
                  for k, dec in stacked.decoders.items()},
        N=2 * Ni, params=stacked.params)


def parity_class_dependence_tv(source, L, num_blocks=4, samples=20000,
                               rng=None, node=0):
    """Dependence left inside one parity class, as a total variation.

    Takes the first source symbol of each of `num_blocks` consecutive
    even-class blocks (blocks 0, 2, 4, ...), estimates their joint law by
    Monte Carlo, and returns its TV distance to the product of the estimated
    marginals. Near 0 when blocks of length L have mixed; large when L is
    too short for the chain's memory.
    """
    length = (2 * (num_blocks - 1)) * L + 1
    draws = source.draw_many(length, samples, rng.child("mixing"))
    positions = [2 * j * L for j in range(num_blocks)]
    symbols = draws[:, positions, node]  # (samples, num_blocks)
    k = source.alphabet_sizes[node]
    flat = np.ravel_multi_index(tuple(symbols.T), (k,) * num_blocks)
    joint = np.bincount(flat, minlength=k ** num_blocks) / samples
    marg = [np.bincount(symbols[:, j], minlength=k) / samples
            for j in range(num_blocks)]
    prod = marg[0]
    for mj in marg[1:]:
        prod = np.multiply.outer(prod, mj)
    return 0.5 * float(np.abs(joint - prod.reshape(-1)).sum())
