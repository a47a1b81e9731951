"""Per-link constructions for the noisy-link / bit-pipe equivalence: random
block channel codes that make a DMC emulate a bit-pipe, and likelihood-encoder
channel synthesis that makes a bit-pipe emulate a DMC in empirical
distribution.
"""

from dataclasses import dataclass, field

import numpy as np

from .infosolvers import blahut_capacity
from .netmodel import BitPipe, DmcChannel
from .probkit import (JointPmf, Kernel, ProbVector, empirical_type,
                      mutual_information, sample_many)

CODEBOOK_CAP_BITS = 22
DEFAULT_MARGIN = 0.05


class RateOutOfRange(ValueError):
    pass


class CodebookCapExceeded(ValueError):
    pass


def _log_kernel(matrix):
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(matrix, 1e-300))


def bits_to_index(bits):
    """Pack a bit tuple big-endian into a message index."""
    idx = 0
    for b in bits:
        idx = (idx << 1) | (int(b) & 1)
    return idx


def index_to_bits(idx, width):
    return tuple((idx >> (width - 1 - i)) & 1 for i in range(width))


@dataclass
class ChannelCode:
    """Random block code with maximum-likelihood decoding over the codebook."""
    N: int
    rate: float
    codebook: np.ndarray          # 2^ceil(N*rate) x N input symbols
    channel: Kernel
    input_law: ProbVector

    @property
    def msg_bits(self):
        return int(np.ceil(self.N * self.rate - 1e-12))

    @property
    def payload_bits(self):
        """Whole bits per stacked use a rate-R pipe would carry."""
        return int(np.floor(self.N * self.rate + 1e-12))

    def encode(self, msg):
        return self.codebook[msg]

    def decode(self, y):
        """ML message index; ties broken toward the lowest index."""
        logw = _log_kernel(self.channel.matrix)
        ll = logw[self.codebook, np.asarray(y)[None, :]].sum(axis=1)
        return int(ll.argmax())

    def decode_batch(self, ys):
        logw = _log_kernel(self.channel.matrix)
        out = np.empty(ys.shape[0], dtype=np.int64)
        step = max(1, int(2 ** 24 // max(self.codebook.size, 1)))
        for i in range(0, ys.shape[0], step):
            chunk = ys[i:i + step]
            ll = logw[self.codebook[None, :, :], chunk[:, None, :]].sum(axis=2)
            out[i:i + step] = ll.argmax(axis=1)
        return out


def build_channel_code(channel, N, R, rng, margin=DEFAULT_MARGIN,
                       cap_bits=CODEBOOK_CAP_BITS):
    """Codewords drawn i.i.d. per symbol from the capacity-achieving input
    law; requires R below capacity by the declared margin."""
    cap = blahut_capacity(channel, tol=1e-9)
    if R > cap.capacity - margin:
        raise RateOutOfRange("R=%g above capacity %.6f minus margin %g"
                             % (R, cap.capacity, margin))
    bits = int(np.ceil(N * R - 1e-12))
    if bits > cap_bits:
        raise CodebookCapExceeded("ceil(N*R)=%d exceeds cap %d" % (bits, cap_bits))
    m = 2 ** bits
    u = rng.child("codebook").uniform((m, N))
    codebook = sample_many(cap.optimal_input.probs, u.reshape(-1)) \
        .reshape(m, N).astype(np.int64)
    return ChannelCode(N, R, codebook, channel, cap.optimal_input)


def estimate_error_prob(code, trials, rng):
    """Monte Carlo block error probability of the code on its own channel."""
    m = code.codebook.shape[0]
    g = rng.child("pe").generator()
    msgs = g.integers(0, m, size=trials)
    x = code.codebook[msgs]
    cums = np.cumsum(code.channel.matrix, axis=1)
    u = g.random(x.shape)
    rows = cums[x]
    y = np.minimum((u[..., None] * rows[..., -1:] >= rows).sum(axis=-1),
                   code.channel.output_size - 1)
    dec = code.decode_batch(y)
    errs = (dec != msgs).astype(float)
    p_e = float(errs.mean())
    stderr = float(errs.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return p_e, stderr


@dataclass
class LinkCodeReport:
    p_e: dict                       # edge idx -> estimated block error prob
    p_e_stderr: dict
    n_edges: int
    d_max: float

    @property
    def p_e_max(self):
        return max(self.p_e.values()) if self.p_e else 0.0

    @property
    def excess_bound(self):
        return self.n_edges * self.p_e_max * self.d_max

    def to_json(self):
        return {"p_e": {str(k): v for k, v in self.p_e.items()},
                "p_e_max": self.p_e_max, "n_edges": self.n_edges,
                "d_max": self.d_max, "excess_bound": self.excess_bound}


@dataclass
class SynthesisCode:
    """Soft-covering codebook with a likelihood (posterior-weighting) encoder.

    Codewords are output sequences drawn i.i.d. from the target output
    marginal; the encoder picks index w with probability proportional to
    prod_i P(x_i | y_i(w)).
    """
    N: int
    rate: float
    codebook: np.ndarray           # 2^ceil(N*rate) x N output symbols
    target_input: ProbVector
    channel: Kernel

    @property
    def msg_bits(self):
        return int(np.ceil(self.N * self.rate - 1e-12))

    def target_joint(self):
        return JointPmf.from_input_channel(self.target_input, self.channel)

    def _log_posterior(self):
        joint = self.target_joint().table          # p(x) p(y|x)
        q_y = joint.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            post = np.where(q_y[None, :] > 0, joint / np.maximum(q_y, 1e-300),
                            0.0)
        return _log_kernel(post.T)                  # indexed [y, x]

    def encoder_weights(self, x):
        """Normalized index-selection weights for an input sequence."""
        logpost = self._log_posterior()
        ll = logpost[self.codebook, np.asarray(x)[None, :]].sum(axis=1)
        w = np.exp(ll - ll.max())
        return w / w.sum()

    def encode(self, x, rng):
        """Stochastic index selection; one uniform draw per call."""
        w = self.encoder_weights(x)
        cum = np.cumsum(w)
        i = int(np.searchsorted(cum, rng.uniform() * cum[-1], side="right"))
        return min(i, w.size - 1)

    def synthesize(self, x, rng):
        """Map an input sequence to the selected codeword's output sequence."""
        return self.codebook[self.encode(x, rng)]


def build_synthesis_code(target_input, channel, N, R, rng,
                         margin=DEFAULT_MARGIN, cap_bits=CODEBOOK_CAP_BITS,
                         enforce_margin=True):
    """Codebook drawn i.i.d. from the output marginal of the target joint.

    enforce_margin=False permits deliberately undersized rates for converse
    (below-mutual-information) experiments.
    """
    mi = mutual_information(target_input, channel)
    if enforce_margin and R < mi + margin:
        raise RateOutOfRange("R=%g below I=%.6f plus margin %g"
                             % (R, mi, margin))
    bits = int(np.ceil(N * R - 1e-12))
    if bits > cap_bits:
        raise CodebookCapExceeded("ceil(N*R)=%d exceeds cap %d" % (bits, cap_bits))
    m = 2 ** bits
    q_y = JointPmf.from_input_channel(target_input, channel).marginal_y()
    u = rng.child("codebook").uniform((m, N))
    codebook = sample_many(q_y.probs, u.reshape(-1)).reshape(m, N) \
        .astype(np.int64)
    return SynthesisCode(N, R, codebook, target_input, channel)


def synthesized_type_tv(code, rng, samples=64):
    """Mean TV between the synthesized empirical type and the target joint
    over fresh i.i.d. input sequences."""
    target = code.target_joint()
    tvs = []
    for j in range(samples):
        r = rng.child("sample", j)
        x = sample_many(code.target_input.probs, r.child("x").uniform(code.N))
        y = code.synthesize(x, r.child("w"))
        et = empirical_type(np.stack([x, y], axis=1),
                            shape=target.table.shape)
        tvs.append(et.tv_to(target))
    arr = np.asarray(tvs)
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(len(arr)))


# ---------------------------------------------------------------------------
# stacked-engine link behaviors

class _CodedLinkHandler:
    """N DMC copies driven by a block channel code: the edge presents a
    bit-pipe interface of payload_bits whole bits per stacked use."""

    def __init__(self, e_idx, edge, code):
        self.e = e_idx
        self.code = code
        self.cums = np.cumsum(code.channel.matrix, axis=1)
        self.hi = code.channel.output_size - 1
        self.errors = 0
        self.uses = 0

    def transmit(self, rng, t, payload):
        bits = tuple(int(b) for b in (payload or ()))
        if len(bits) > self.code.payload_bits:
            raise RateOutOfRange("payload of %d bits exceeds %d on edge %d"
                                 % (len(bits), self.code.payload_bits, self.e))
        if not bits:
            return (), (), ()
        msg = bits_to_index(bits)
        x = self.code.encode(msg)
        u = rng.child("edge", self.e, t).uniform(self.code.N)
        rows = self.cums[x]
        y = np.minimum((u[:, None] * rows[:, -1:] >= rows).sum(axis=1), self.hi)
        dec = self.code.decode(y)
        out = index_to_bits(dec % (1 << len(bits)), len(bits))
        self.uses += 1
        self.errors += int(out != bits)
        return bits, out, out


@dataclass
class CodedLinkBehavior:
    code: ChannelCode

    def make_handler(self, e_idx, edge, N):
        if not isinstance(edge.channel, DmcChannel):
            raise ValueError("channel coding applies to DMC edges")
        if self.code.N != N:
            raise ValueError("code blocklength %d != layer count %d"
                             % (self.code.N, N))
        return _CodedLinkHandler(e_idx, edge, self.code)


class _SynthLinkHandler:
    """A bit-pipe (N copies) emulating a DMC: the N layer inputs at each
    stacked time are jointly encoded to an index, which selects the output
    codeword. Codes for distinct stacked times must be independent."""

    def __init__(self, e_idx, edge, N, code_for_time):
        self.e = e_idx
        self.N = N
        self.pipe = edge.channel
        self.code_for_time = code_for_time

    def transmit(self, rng, t, x_vec):
        code = self.code_for_time(t)
        if code.N != self.N:
            raise ValueError("synthesis code blocklength mismatch")
        if code.msg_bits > int(np.floor(self.N * self.pipe.rate + 1e-12)):
            raise RateOutOfRange("pipe rate %g cannot carry %d bits per use"
                                 % (self.pipe.rate, code.msg_bits))
        x = np.asarray(x_vec, dtype=np.int64)
        w = code.encode(x, rng.child("synthenc", self.e, t))
        y = code.codebook[w]
        return x, y, y


@dataclass
class SynthLinkBehavior:
    """code_for_time maps stacked time t to the SynthesisCode used at t."""
    code_for_time: object
    audit: dict = field(default_factory=dict)

    def make_handler(self, e_idx, edge, N):
        if not isinstance(edge.channel, BitPipe):
            raise ValueError("synthesis applies to bit-pipe edges")
        return _SynthLinkHandler(e_idx, edge, N, self._audited)

    def _audited(self, t):
        code = self.code_for_time(t)
        prev = self.audit.setdefault(t, id(code))
        for other_t, other_id in self.audit.items():
            if other_t != t and other_id == id(code):
                raise RuntimeError("synthesis code reused across stacked "
                                   "times %d and %d" % (other_t, t))
        return code


def emulate_pipe_over_dmc(config, e_idx, code, pe_trials=10000, rng=None):
    """Replace the N copies of a DMC edge with an internally channel-coded
    virtual bit-pipe. Returns the transformed config and a LinkCodeReport."""
    behaviors = dict(config.behaviors or {})
    behaviors[e_idx] = CodedLinkBehavior(code)
    new_cfg = type(config)(config.net, config.N, behaviors, config.pipe_delay)
    p_e, se = estimate_error_prob(code, pe_trials, rng.child("pe", e_idx))
    report = LinkCodeReport({e_idx: p_e}, {e_idx: se},
                            n_edges=1, d_max=config.net.d_max)
    return new_cfg, report


def emulate_dmc_over_pipe(config, e_idx, code_for_time):
    """Replace a bit-pipe edge with a synthesized DMC interface."""
    behaviors = dict(config.behaviors or {})
    behaviors[e_idx] = SynthLinkBehavior(code_for_time)
    return type(config)(config.net, config.N, behaviors, config.pipe_delay)


class _AggregatePipeHandler:
    """N rate-R pipe copies presented as one noiseless floor(N*R)-bits-per-use
    interface, the same surface a coded DMC link exposes."""

    def __init__(self, e_idx, edge, N):
        self.e = e_idx
        self.per_use = int(np.floor(N * edge.channel.rate + 1e-12))
        self.sent = 0
        self.uses = 0

    def transmit(self, rng, t, payload):
        bits = tuple(int(b) for b in (payload or ()))
        self.sent += len(bits)
        if self.sent > self.per_use * (t + 1):
            raise RateOutOfRange("aggregate pipe edge %d over budget at t=%d"
                                 % (self.e, t + 1))
        return bits, bits, bits


@dataclass
class AggregatePipeBehavior:
    def make_handler(self, e_idx, edge, N):
        if not isinstance(edge.channel, BitPipe):
            raise ValueError("aggregate pipe behavior needs a BitPipe edge")
        return _AggregatePipeHandler(e_idx, edge, N)


def combine_reports(reports, d_max):
    p_e = {}
    se = {}
    for r in reports:
        p_e.update(r.p_e)
        se.update(r.p_e_stderr)
    return LinkCodeReport(p_e, se, n_edges=len(p_e), d_max=d_max)
