import numpy as np
import pytest

from sepnet.netmodel import (ArityMismatch, BitPipe, BudgetOverflow,
                             CodeParameters, CodingPolicy, DmcChannel, Edge,
                             IidJoint, MarkovJoint, NetworkSpec,
                             estimate_distortion, run_block, validate_spec)
from sepnet.probkit import Kernel, RngStream
from sepnet.recipes import build_recipe, uncoded_relay

HAMMING = np.array([[0.0, 1.0], [1.0, 0.0]])


def line_net(channel, nodes=(0, 1)):
    return NetworkSpec(nodes, (Edge(nodes[0], nodes[1], channel),),
                       {(nodes[0], nodes[1]): HAMMING},
                       IidJoint((2, 1), [0.5, 0.5]))


# ---------------------------------------------------------------------------
# sources

def test_iid_joint_validates_and_draws():
    with pytest.raises(ValueError):
        IidJoint((2, 2), [0.5, 0.5])
    src = IidJoint((2, 3), [0.1, 0.2, 0.3, 0.1, 0.2, 0.1])
    block = src.draw_block(1000, RngStream(0))
    assert block.shape == (1000, 2)
    assert block[:, 0].max() <= 1 and block[:, 1].max() <= 2


def test_markov_joint_rejects_reducible_chain():
    with pytest.raises(ValueError):
        MarkovJoint((2,), [0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        MarkovJoint((2,), [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]])


def test_markov_joint_marginal_frequencies():
    chain = MarkovJoint((2,), [0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]])
    block = chain.draw_block(20000, RngStream(3))
    # symmetric chain: stationary marginal is uniform
    assert abs(block.mean() - 0.5) < 0.03
    # sticky transitions: consecutive symbols agree about 90% of the time
    agree = (block[1:, 0] == block[:-1, 0]).mean()
    assert abs(agree - 0.9) < 0.02


def test_markov_draw_many_matches_draw_block():
    chain = MarkovJoint((2,), [0.5, 0.5], [[0.7, 0.3], [0.2, 0.8]])
    rng1 = RngStream(9)
    many = chain.draw_many(16, 5, rng1)
    assert many.shape[0] == 5


# ---------------------------------------------------------------------------
# validation

def test_validate_spec_clean():
    assert validate_spec(line_net(DmcChannel(Kernel.bsc(0.1)))) == []


def test_validate_spec_diagnostics():
    bad_kernel = Kernel.bsc(0.1)
    bad_kernel.matrix.flags.writeable = True
    bad_kernel.matrix[0, 0] = 0.5  # row 0 now sums to 0.6
    net = NetworkSpec(
        (0, 1, 2),
        (Edge(0, 0, BitPipe(0.5)),
         Edge(0, 9, BitPipe(-1.0)),
         Edge(0, 1, DmcChannel(bad_kernel))),
        {(0, 2): HAMMING, (0, 1): np.array([[0.0, np.inf], [-1.0, 0.0]])},
        IidJoint((2, 1, 1), [0.5, 0.5]))
    kinds = sorted(d.kind for d in validate_spec(net))
    assert kinds == ["BadEndpoint", "InfiniteDistortion", "InvalidKernel",
                     "NegativeDistortion", "NonPositiveRate", "SelfLoop",
                     "UnreachableDemand"]


def test_d_max():
    net = line_net(DmcChannel(Kernel.bsc(0.1)))
    assert net.d_max == 1.0


# ---------------------------------------------------------------------------
# run_block semantics

def test_noiseless_relay_zero_distortion():
    net = line_net(DmcChannel(Kernel.identity(2)))
    policy, params = uncoded_relay(net, L=32)
    tr = run_block(net, policy, params, RngStream(5))
    assert tr.distortion[(0, 1)] == 0.0
    assert np.array_equal(tr.recon[(0, 1)], tr.u[0])


def test_bsc_relay_matches_crossover():
    net = line_net(DmcChannel(Kernel.bsc(0.11)))
    policy, params = uncoded_relay(net, L=16)
    dm = estimate_distortion(net, policy, params, 3000, RngStream(1))
    val, se = dm.entry(0, 1)
    assert abs(val - 0.11) <= 3 * se
    assert dm.entry(1, 0) == (0.0, 0.0)


def test_constant_decoder_analytic():
    net = line_net(DmcChannel(Kernel.bsc(0.11)))
    policy, params = build_recipe("constant_guess", net, L=16)
    dm = estimate_distortion(net, policy, params, 3000, RngStream(1))
    val, se = dm.entry(0, 1)
    # guessing 0 against Bern(1/2): expected Hamming distortion 1/2
    assert abs(val - 0.5) <= 3 * se


def test_replay_is_bit_identical():
    net = line_net(DmcChannel(Kernel.bsc(0.3)))
    policy, params = uncoded_relay(net, L=64)
    t1 = run_block(net, policy, params, RngStream(77))
    t2 = run_block(net, policy, params, RngStream(77))
    assert t1.edge_io == t2.edge_io
    assert np.array_equal(t1.recon[(0, 1)], t2.recon[(0, 1)])


def test_causality_encoder_sees_strict_past():
    seen = []

    class Probe:
        def emit(self, t, u_block, received, rng):
            seen.append(len(received[1]))
            return {0: int(u_block[t])}

    class Sink:
        def decode(self, u_block, received, rng):
            return np.zeros(4, dtype=np.int64)

    net = NetworkSpec((0, 1),
                      (Edge(0, 1, DmcChannel(Kernel.identity(2))),
                       Edge(1, 0, DmcChannel(Kernel.identity(2)))),
                      {(0, 1): HAMMING}, IidJoint((2, 1), [0.5, 0.5]))

    class Echo:
        def emit(self, t, u_block, received, rng):
            return {1: int(received[0][-1]) if received[0] else 0}

    policy = CodingPolicy(encoders={0: Probe(), 1: Echo()},
                          decoders={(0, 1): Sink()})
    run_block(net, policy, CodeParameters(4, 4), RngStream(0))
    assert seen == [0, 1, 2, 3]


def test_edges_draw_independent_noise():
    class Both:
        def emit(self, t, u_block, received, rng):
            return {0: 0, 1: 0}

    class Sink:
        def decode(self, u_block, received, rng):
            return np.zeros(64, dtype=np.int64)

    net = NetworkSpec((0, 1),
                      (Edge(0, 1, DmcChannel(Kernel.bsc(0.5))),
                       Edge(0, 1, DmcChannel(Kernel.bsc(0.5)))),
                      {(0, 1): HAMMING}, IidJoint((2, 1), [0.5, 0.5]))
    policy = CodingPolicy(encoders={0: Both()}, decoders={(0, 1): Sink()})
    tr = run_block(net, policy, CodeParameters(64, 64), RngStream(8))
    y0 = [y for _, y in tr.edge_io[0]]
    y1 = [y for _, y in tr.edge_io[1]]
    assert y0 != y1


def test_encoder_cannot_emit_on_foreign_edge():
    class Rogue:
        def emit(self, t, u_block, received, rng):
            return {0: 0, 1: 0}

    net = NetworkSpec((0, 1, 2),
                      (Edge(0, 1, DmcChannel(Kernel.identity(2))),
                       Edge(1, 2, DmcChannel(Kernel.identity(2)))),
                      {(0, 2): HAMMING}, IidJoint((2, 1, 1), [0.5, 0.5]))
    policy = CodingPolicy(encoders={0: Rogue()}, decoders={})
    with pytest.raises(ArityMismatch):
        run_block(net, policy, CodeParameters(2, 2), RngStream(0))


def test_silent_dmc_edge_is_an_error():
    net = line_net(DmcChannel(Kernel.identity(2)))
    policy = CodingPolicy(encoders={}, decoders={})
    with pytest.raises(ArityMismatch):
        run_block(net, policy, CodeParameters(2, 2), RngStream(0))


def test_decoder_block_length_checked():
    class Short:
        def decode(self, u_block, received, rng):
            return np.zeros(3, dtype=np.int64)

    net = line_net(DmcChannel(Kernel.identity(2)))
    policy, params = uncoded_relay(net, L=8)
    policy = CodingPolicy(encoders=policy.encoders,
                          decoders={(0, 1): Short()})
    with pytest.raises(ArityMismatch):
        run_block(net, policy, params, RngStream(0))


# ---------------------------------------------------------------------------
# bit pipes

class PipeTalker:
    def __init__(self, bits_per_use):
        self.k = bits_per_use

    def emit(self, t, u_block, received, rng):
        return {0: tuple([1] * self.k)}


class PipeListener:
    def __init__(self, L):
        self.L = L

    def decode(self, u_block, received, rng):
        flat = [b for payload in received[0] for b in payload]
        flat += [0] * self.L
        return np.asarray(flat[:self.L], dtype=np.int64)


def test_pipe_budget_is_cumulative_floor():
    net = line_net(BitPipe(0.5))
    policy = CodingPolicy(encoders={0: PipeTalker(1)},
                          decoders={(0, 1): PipeListener(4)})
    with pytest.raises(BudgetOverflow):
        # 1 bit per use exceeds floor(t * 0.5) immediately
        run_block(net, policy, CodeParameters(4, 4), RngStream(0))

    class HalfRate:
        def emit(self, t, u_block, received, rng):
            return {0: (1,) if t % 2 else ()}

    policy = CodingPolicy(encoders={0: HalfRate()},
                          decoders={(0, 1): PipeListener(4)})
    tr = run_block(net, policy, CodeParameters(4, 8), RngStream(0))
    assert sum(len(x) for x, _ in tr.edge_io[0]) == 4


def test_pipe_delivers_same_step_by_default():
    net = line_net(BitPipe(1.0))
    policy = CodingPolicy(encoders={0: PipeTalker(1)},
                          decoders={(0, 1): PipeListener(4)})
    tr = run_block(net, policy, CodeParameters(4, 4), RngStream(0))
    assert np.array_equal(tr.recon[(0, 1)], [1, 1, 1, 1])


def test_pipe_delay_shifts_delivery():
    net = line_net(BitPipe(1.0))

    class Probe:
        def __init__(self):
            self.log = []

        def emit(self, t, u_block, received, rng):
            self.log.append(tuple(received.get(0, [])))
            return {0: (1,)}

    # receiver-side encoder would be needed to observe rx timing; instead
    # decode and check the delayed stream starts empty
    class TailListener:
        def decode(self, u_block, received, rng):
            flat = [b for payload in received[0] for b in payload]
            return np.asarray((flat + [0] * 4)[:4], dtype=np.int64)

    policy = CodingPolicy(encoders={0: PipeTalker(1)},
                          decoders={(0, 1): TailListener()})
    tr = run_block(net, policy, CodeParameters(4, 4), RngStream(0),
                   pipe_delay=1)
    # 4 sends, but the last payload is still in flight at decode time
    assert np.array_equal(tr.recon[(0, 1)], [1, 1, 1, 0])


def test_estimate_distortion_rejects_zero_trials():
    net = line_net(DmcChannel(Kernel.identity(2)))
    policy, params = uncoded_relay(net, L=2)
    with pytest.raises(ValueError):
        estimate_distortion(net, policy, params, 0, RngStream(0))
