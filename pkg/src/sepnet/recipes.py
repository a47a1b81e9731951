"""Named coding-policy constructors referenced by scenario files.

Encoders here are deterministic functions of (time, source block, history);
any randomized recipe must derive per-time children from the rng it is
handed so repeated evaluation replays identically (the de-stacking transform
re-evaluates encoders).
"""

import numpy as np

from .netmodel import CodeParameters, CodingPolicy


class SendSourceSymbol:
    """Transmit u[t] on every outgoing edge at time t."""

    def __init__(self, out_edges):
        self.out_edges = list(out_edges)

    def emit(self, t, u_block, received, rng):
        return {e: int(u_block[t]) for e in self.out_edges}


class EchoLastOutput:
    """Transmit the most recent symbol observed on a chosen incoming edge."""

    def __init__(self, out_edges, listen_edge, idle=0):
        self.out_edges = list(out_edges)
        self.listen = listen_edge
        self.idle = idle

    def emit(self, t, u_block, received, rng):
        hist = received.get(self.listen, [])
        sym = int(hist[-1]) if hist else self.idle
        return {e: sym for e in self.out_edges}


class FeedbackXorEncoder:
    """Adaptive: sends u[t] offset by the running sum of feedback symbols.

    Genuinely history-dependent, which is what the de-stacking equivalence
    tests need; decodability is not the point.
    """

    def __init__(self, out_edges, feedback_edge, alphabet=2):
        self.out_edges = list(out_edges)
        self.fb = feedback_edge
        self.k = alphabet

    def emit(self, t, u_block, received, rng):
        fb_sum = int(np.sum(received.get(self.fb, [])[:t])) if t else 0
        sym = (int(u_block[t]) + fb_sum) % self.k
        return {e: sym for e in self.out_edges}


class ForwardDecoder:
    """Reconstruction = the symbols received on one edge, in order."""

    def __init__(self, edge, L):
        self.edge = edge
        self.L = L

    def decode(self, u_block, received, rng):
        hist = received[self.edge]
        return np.asarray([int(s) for s in hist[:self.L]], dtype=np.int64)


class ConstantDecoder:
    def __init__(self, symbol, L):
        self.symbol = int(symbol)
        self.L = L

    def decode(self, u_block, received, rng):
        return np.full(self.L, self.symbol, dtype=np.int64)


class DifferenceDecoder:
    """Undoes FeedbackXorEncoder assuming the receiver echoed its own
    observations: u_hat[t] = y[t] - sum of its own earlier echoes."""

    def __init__(self, edge, L, alphabet=2):
        self.edge = edge
        self.L = L
        self.k = alphabet

    def decode(self, u_block, received, rng):
        hist = [int(s) for s in received[self.edge][:self.L]]
        out = []
        for t, y in enumerate(hist):
            out.append((y - sum(hist[:max(t - 1, 0)])) % self.k)
        return np.asarray(out, dtype=np.int64)


def uncoded_relay(net, L=1, a=None, b=None):
    """Point-to-point: send the source symbol, decode the received symbol."""
    (a, b) = next(iter(net.demands)) if a is None else (a, b)
    e = net.out_edges(a)[0]
    params = CodeParameters(L, L)
    policy = CodingPolicy(
        encoders={a: SendSourceSymbol([e])},
        decoders={(a, b): ForwardDecoder(e, L)})
    return policy, params


def constant_guess(net, L=1, symbol=0):
    (a, b) = next(iter(net.demands))
    e = net.out_edges(a)[0]
    params = CodeParameters(L, L)
    policy = CodingPolicy(
        encoders={a: SendSourceSymbol([e])},
        decoders={(a, b): ConstantDecoder(symbol, L)})
    return policy, params


def adaptive_feedback(net, L=2):
    """Two-node, two-edge (a->b, b->a) adaptive code: node a offsets its
    transmission by accumulated feedback, node b echoes what it hears."""
    (a, b) = next(iter(net.demands))
    fwd = [i for i in net.out_edges(a) if net.edges[i].head == b][0]
    back = [i for i in net.out_edges(b) if net.edges[i].head == a][0]
    k = net.edges[fwd].channel.kernel.input_size
    params = CodeParameters(L, L)
    policy = CodingPolicy(
        encoders={a: FeedbackXorEncoder([fwd], back, k),
                  b: EchoLastOutput([back], fwd)},
        decoders={(a, b): DifferenceDecoder(fwd, L, k)})
    return policy, params


RECIPES = {
    "uncoded_relay": uncoded_relay,
    "constant_guess": constant_guess,
    "adaptive_feedback": adaptive_feedback,
}


def build_recipe(name, net, **params):
    if name not in RECIPES:
        raise KeyError("unknown code recipe %r" % name)
    return RECIPES[name](net, **params)
