"""Experiment harness: the end-to-end separation experiment, the stacking and
link-replacement verification suites, the conditional-independence (random
code) verifier, and tidy plot-data export.

Every experiment is a pure function of its parameters and a master seed, so
rerunning with the stored seed reproduces the result object exactly.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .infosolvers import (blahut_capacity, blahut_rate_distortion,
                          invert_rate_distortion)
from .linkcodes import (AggregatePipeBehavior, CodedLinkBehavior,
                        LinkCodeReport, build_channel_code,
                        build_synthesis_code, estimate_error_prob,
                        synthesized_type_tv)
from .netmodel import (BitPipe, CodeParameters, DmcChannel, Edge, IidJoint,
                       MarkovJoint, NetworkSpec, estimate_distortion)
from .probkit import Kernel, ProbVector, RngStream, sample_many
from .recipes import build_recipe
from .stacking import (InterleaveSchedule, StackedConfig, destack_code,
                       estimate_stacked_distortion, lift_code,
                       parity_class_dependence_tv, run_destacked_block,
                       run_stacked_block, traces_match)


def worker_count():
    try:
        return max(1, int(os.environ.get("SEPNET_WORKERS", "1")))
    except ValueError:
        return 1


def _map_indexed(fn, args_list):
    """Order-preserving map, fanned out to a process pool when
    SEPNET_WORKERS > 1. Merges are index-ordered so the worker count never
    changes the output."""
    w = worker_count()
    if w <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, args_list))


# ---------------------------------------------------------------------------
# solver commands

def capacity_report(kernel, tol=1e-9):
    res = blahut_capacity(kernel, tol=tol)
    return {"experiment": "capacity",
            "value": res.capacity, "gap": res.gap,
            "iterations": res.iterations,
            "optimizer": res.optimal_input.to_json()}


def rd_report(source, distortion_matrix, target_d, tol=1e-9):
    res = blahut_rate_distortion(source, distortion_matrix, target_d, tol=tol)
    return {"experiment": "rd",
            "value": res.rate, "gap": abs(res.distortion - target_d),
            "iterations": res.iterations,
            "optimizer": res.test_channel.to_json()}


# ---------------------------------------------------------------------------
# generic simulation + stack check

def simulate(net, code_name, code_params, trials, seed, pipe_delay=0):
    policy, params = build_recipe(code_name, net, **code_params)
    dm = estimate_distortion(net, policy, params, trials, RngStream(seed),
                             pipe_delay=pipe_delay)
    out = dm.to_json()
    out.update({"experiment": "simulate", "seed": seed})
    return out


def stack_check(net, code_name, code_params, N, trials, seed):
    """Layered-equivalence check: lifted N-layer run vs its de-stacked single-layer
    equivalent under coupled seeding; exact_match demands bit equality of
    every per-edge (x, y) sequence, schedule-permuted."""
    policy, params = build_recipe(code_name, net, **code_params)
    stacked = lift_code(policy, params, N)
    destacked, dparams = destack_code(stacked)
    sched = InterleaveSchedule(N, params.n)
    sched.check()
    cfg = StackedConfig(net, N)
    rng = RngStream(seed)
    exact = True
    s_vals, d_vals = [], []
    key = next(iter(net.demands))
    for j in range(trials):
        r = rng.child("trial", j)
        tr_s = run_stacked_block(cfg, stacked, r)
        tr_d = run_destacked_block(net, destacked, dparams, r)
        exact = exact and traces_match(tr_s, tr_d, sched)
        s_vals.append(tr_s.distortion[key])
        d_vals.append(tr_d.distortion[key])
    s_arr, d_arr = np.asarray(s_vals), np.asarray(d_vals)
    se = float(np.sqrt(s_arr.var(ddof=1) + d_arr.var(ddof=1)) /
               np.sqrt(trials)) if trials > 1 else 0.0
    return {"experiment": "stack-check", "N": N, "trials": trials,
            "seed": seed,
            "stacked_distortion": float(s_arr.mean()),
            "destacked_distortion": float(d_arr.mean()),
            "exact_match": bool(exact), "stderr": se}


# ---------------------------------------------------------------------------
# link replacement: line network, coded links vs bit-pipes

class BitChunkEncoder:
    """Sends consecutive chunks of the node's source bits over one virtual
    bit-pipe edge, per_use bits per stacked use."""

    def __init__(self, edge, total_bits, per_use):
        self.edge = edge
        self.total = total_bits
        self.per_use = per_use

    def emit(self, t, u_full, received_all, rng):
        lo = min(t * self.per_use, self.total)
        hi = min(lo + self.per_use, self.total)
        return {self.edge: tuple(int(b) for b in u_full[lo:hi])}


class BitRelayEncoder:
    """Forwards bits received on one edge, in order, per_use at a time."""

    def __init__(self, in_edge, out_edge, per_use):
        self.in_edge = in_edge
        self.out_edge = out_edge
        self.per_use = per_use

    def emit(self, t, u_full, received_all, rng):
        rx = received_all.get(self.in_edge, [])
        cum = [0]
        for payload in rx:
            cum.append(cum[-1] + len(payload))
        # bits forwarded before t are a pure function of the history, so
        # recompute rather than keeping state across emits
        sent = 0
        for tp in range(min(t, len(cum) - 1)):
            sent += max(0, min(self.per_use, cum[tp] - sent))
        avail_now = cum[-1]
        flat = [b for payload in rx for b in payload]
        chunk = flat[sent:min(sent + self.per_use, avail_now)]
        return {self.out_edge: tuple(chunk)}


class BitSinkDecoder:
    def __init__(self, edge, total_bits):
        self.edge = edge
        self.total = total_bits

    def decode(self, u_full_b, received_all, rng):
        bits = []
        for payload in received_all[self.edge]:
            bits.extend(payload)
        bits = bits[:self.total]
        bits += [0] * (self.total - len(bits))
        return np.asarray(bits, dtype=np.int64)


def _line_network(channel_for_link):
    ham = np.array([[0.0, 1.0], [1.0, 0.0]])
    edges = (Edge(0, 1, channel_for_link), Edge(1, 2, channel_for_link))
    src = IidJoint((2, 1, 1), [0.5, 0.5])
    return NetworkSpec((0, 1, 2), edges, {(0, 2): ham}, src)


def _bit_forward_code(N, per_use, n):
    total = N  # one source bit per layer (L = 1)
    from .stacking import StackedCode
    return StackedCode(
        encoders={0: BitChunkEncoder(0, total, per_use),
                  1: BitRelayEncoder(0, 1, per_use)},
        decoders={(0, 2): BitSinkDecoder(1, total)},
        N=N, params=CodeParameters(1, n))


def link_replacement_experiment(p=0.11, N=24, R=0.4, trials=10000, seed=0,
                           pe_trials=20000):
    """Run the same bit-forwarding scheme over (a) a two-link line of
    bit-pipes and (b) the same line with each pipe realized by channel
    coding across the N layers of a BSC(p), and compare distortions against
    the |E| * P_e,max * d_max excess bound."""
    rng = RngStream(seed)
    per_use = int(np.floor(N * R + 1e-12))
    n = 4  # enough uses for the relay to flush all N bits
    code_tx = build_channel_code(Kernel.bsc(p), N, R, rng.child("code", 0))
    code_rx = build_channel_code(Kernel.bsc(p), N, R, rng.child("code", 1))

    net_noisy = _line_network(DmcChannel(Kernel.bsc(p)))
    cap = blahut_capacity(Kernel.bsc(p)).capacity
    net_pipe = _line_network(BitPipe(cap))

    scheme = _bit_forward_code(N, per_use, n)
    cfg_noisy = StackedConfig(net_noisy, N,
                              {0: CodedLinkBehavior(code_tx),
                               1: CodedLinkBehavior(code_rx)})
    cfg_pipe = StackedConfig(net_pipe, N, {0: AggregatePipeBehavior(),
                                           1: AggregatePipeBehavior()})

    d_noisy = estimate_stacked_distortion(cfg_noisy, scheme, trials,
                                          rng.child("noisy"))[(0, 2)]
    d_pipe = estimate_stacked_distortion(cfg_pipe, scheme, trials,
                                         rng.child("pipe"))[(0, 2)]

    # per-link block error probability: any of the n codeword uses failing
    pe0, se0 = estimate_error_prob(code_tx, pe_trials, rng.child("pe", 0))
    pe1, se1 = estimate_error_prob(code_rx, pe_trials, rng.child("pe", 1))
    uses = 3  # each link actually carries bits in 3 of the n uses
    link_pe = {0: 1.0 - (1.0 - pe0) ** uses, 1: 1.0 - (1.0 - pe1) ** uses}
    link_se = {0: uses * se0, 1: uses * se1}
    report = LinkCodeReport(link_pe, link_se, n_edges=2,
                            d_max=net_noisy.d_max)
    pooled_se = float(np.hypot(d_noisy[1], d_pipe[1]))
    return {"experiment": "link-replacement", "seed": seed, "N": N, "R": R,
            "trials": trials,
            "distortion_noisy": d_noisy[0], "stderr_noisy": d_noisy[1],
            "distortion_pipe": d_pipe[0], "stderr_pipe": d_pipe[1],
            "excess": d_noisy[0] - d_pipe[0],
            "excess_bound": report.excess_bound,
            "pooled_stderr": pooled_se,
            "link_report": report.to_json()}


# ---------------------------------------------------------------------------
# sweeps

def chancode_sweep(channel, Ns, R, trials=10000, seed=0, batches=1):
    rows = []
    for b in range(batches):
        for N in Ns:
            rng = RngStream(seed).child("batch", b, "N", N)
            code = build_channel_code(channel, N, R, rng.child("code"))
            pe, se = estimate_error_prob(code, trials, rng.child("pe"))
            rows.append({"N": N, "R": R, "pe_mean": pe, "pe_stderr": se,
                         "seed_batch": b})
    return {"experiment": "chancode-sweep", "seed": seed, "rows": rows}


def _synth_batch(args):
    (channel_matrix, input_probs, N, R, seed, b, codebooks, samples,
     enforce) = args
    channel = Kernel(channel_matrix)
    p = ProbVector(input_probs)
    rng = RngStream(seed).child("batch", b, "N", N)
    tvs = []
    for c in range(codebooks):
        code = build_synthesis_code(p, channel, N, R, rng.child("code", c),
                                    enforce_margin=enforce)
        mean, _ = synthesized_type_tv(code, rng.child("tv", c),
                                      samples=samples)
        tvs.append(mean)
    arr = np.asarray(tvs)
    se = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return {"N": N, "R": R, "tv_mean": float(arr.mean()), "tv_stderr": se,
            "seed_batch": b}


def synth_sweep(channel, input_law, Ns, R, batches=30, codebooks=8,
                samples=16, seed=0, enforce_margin=True):
    args = [(channel.to_json(), input_law.to_json(), N, R, seed, b,
             codebooks, samples, enforce_margin)
            for b in range(batches) for N in Ns]
    rows = _map_indexed(_synth_batch, args)
    return {"experiment": "synth-sweep", "seed": seed, "rows": rows}


# ---------------------------------------------------------------------------
# conditional-independence verifier (random codes at successive times)

@dataclass
class Lemma1Report:
    cells: dict                 # (x_prev, y_prev, x_cur) -> cell stats
    z_scores: list = field(default_factory=list)
    min_cell_samples: int = 100
    z_crit: float = 2.58
    share_allowed: float = 0.05

    @property
    def exceedances(self):
        return sum(1 for z in self.z_scores if abs(z) > self.z_crit)

    @property
    def inconclusive(self):
        return not self.z_scores

    @property
    def passed(self):
        if self.inconclusive:
            return False
        allowed = max(1, int(np.floor(self.share_allowed
                                      * len(self.z_scores))))
        return self.exceedances <= allowed

    def to_json(self):
        return {"cells": {repr(k): v for k, v in self.cells.items()},
                "z_scores": [float(z) for z in self.z_scores],
                "exceedances": self.exceedances,
                "num_z": len(self.z_scores),
                "passed": bool(self.passed),
                "inconclusive": bool(self.inconclusive)}


def lemma1_samples(channel, N, R, trials, seed, n_times=3, reuse=False):
    """Layer-1 records (x_{t-1}, y_{t-1}, x_t, y_t) from a stacked
    point-to-point link whose outputs are produced by per-time synthesis
    codes. The same input vector is re-sent at every time, so reusing the
    time-(t-1) code randomness at time t makes y_t collapse onto y_{t-1}."""
    p = ProbVector.uniform(channel.input_size)
    rng = RngStream(seed)
    records = {t: [] for t in range(1, n_times)}
    for j in range(trials):
        r = rng.child("trial", j)
        x = sample_many(p.probs, r.child("x").uniform(N))
        ys = []
        for t in range(n_times):
            key = 0 if reuse else t
            code = build_synthesis_code(p, channel, N, R,
                                        r.child("code", key))
            ys.append(code.synthesize(x, r.child("w", key)))
        for t in range(1, n_times):
            records[t].append((int(x[0]), int(ys[t - 1][0]),
                               int(x[0]), int(ys[t][0])))
    return records


def lemma1_report(records, out_size, min_cell=100, z_crit=2.58,
                  share_allowed=0.05):
    """Compare, per conditioning cell, the conditional law of y_t against
    the law pooled from same-x_t samples outside the cell."""
    cells = {}
    z_all = []
    for t, recs in records.items():
        arr = np.asarray(recs, dtype=np.int64)
        for xp in np.unique(arr[:, 0]):
            for yp in np.unique(arr[:, 1]):
                for xc in np.unique(arr[:, 2]):
                    in_cell = (arr[:, 0] == xp) & (arr[:, 1] == yp) & \
                              (arr[:, 2] == xc)
                    rest = (arr[:, 2] == xc) & ~in_cell
                    n1, n2 = int(in_cell.sum()), int(rest.sum())
                    if n1 < min_cell or n2 < min_cell:
                        continue
                    lhs = np.bincount(arr[in_cell, 3], minlength=out_size) / n1
                    rhs = np.bincount(arr[rest, 3], minlength=out_size) / n2
                    zs = []
                    for y in range(out_size):
                        pool = (lhs[y] * n1 + rhs[y] * n2) / (n1 + n2)
                        var = pool * (1 - pool) * (1 / n1 + 1 / n2)
                        z = 0.0 if var <= 0 else \
                            (lhs[y] - rhs[y]) / np.sqrt(var)
                        zs.append(float(z))
                    cells[(t, int(xp), int(yp), int(xc))] = {
                        "lhs": lhs.tolist(), "rhs": rhs.tolist(),
                        "samples": n1, "z": zs}
                    z_all.extend(zs)
    return Lemma1Report(cells, z_all, min_cell, z_crit, share_allowed)


def verify_lemma1(channel, N=8, R=0.8, trials=8000, seed=0, n_times=3):
    """Positive control (independent per-time codes) and negative control
    (code randomness reused across times) under the same pass criterion."""
    pos = lemma1_report(lemma1_samples(channel, N, R, trials, seed,
                                       n_times, reuse=False),
                        channel.output_size)
    neg = lemma1_report(lemma1_samples(channel, N, R, trials, seed,
                                       n_times, reuse=True),
                        channel.output_size)
    return {"experiment": "lemma1", "seed": seed, "N": N, "R": R,
            "trials": trials,
            "positive": pos.to_json(), "negative": neg.to_json(),
            "positive_passed": bool(pos.passed),
            "negative_failed": bool(not neg.passed)}


# ---------------------------------------------------------------------------
# two-step induction check (synthesis codes at successive times)

def two_step_induction(channel=None, N=24, R=0.6, trials=256, replicates=8,
                       seed=0):
    """n = 2 point-to-point scenario: x1 i.i.d. uniform, y1 from a synthesis
    code, x2 = x1 xor y1, y2 from an independent second synthesis code.
    Compares the pooled empirical law of (x1, y1, x2, y2) against the true
    network's Monte Carlo law at the same sample budget."""
    if channel is None:
        channel = Kernel.bsc(0.2)
    p = ProbVector.uniform(channel.input_size)
    rng = RngStream(seed)
    k = channel.input_size

    synth_counts = np.zeros(k ** 2 * channel.output_size ** 2)
    true_counts = np.zeros_like(synth_counts)
    shape = (k, channel.output_size, k, channel.output_size)
    cums = np.cumsum(channel.matrix, axis=1)

    def tally(counts, x1, y1, x2, y2):
        flat = np.ravel_multi_index((x1, y1, x2, y2), shape)
        counts += np.bincount(flat, minlength=counts.size)

    for rep in range(replicates):
        r = rng.child("rep", rep)
        code1 = build_synthesis_code(p, channel, N, R, r.child("code", 0))
        code2 = build_synthesis_code(p, channel, N, R, r.child("code", 1))
        for j in range(trials):
            rj = r.child("trial", j)
            x1 = sample_many(p.probs, rj.child("x").uniform(N))
            y1 = code1.synthesize(x1, rj.child("w", 0))
            x2 = (x1 + y1) % k
            y2 = code2.synthesize(x2, rj.child("w", 1))
            tally(synth_counts, x1, y1, x2, y2)
            # true network at matched sample count
            u = rj.child("true").uniform((2, N))
            rows1 = cums[x1]
            ty1 = np.minimum((u[0][:, None] * rows1[:, -1:] >= rows1)
                             .sum(axis=1), channel.output_size - 1)
            tx2 = (x1 + ty1) % k
            rows2 = cums[tx2]
            ty2 = np.minimum((u[1][:, None] * rows2[:, -1:] >= rows2)
                             .sum(axis=1), channel.output_size - 1)
            tally(true_counts, x1, ty1, tx2, ty2)

    synth_law = synth_counts / synth_counts.sum()
    true_law = true_counts / true_counts.sum()
    tv = 0.5 * float(np.abs(synth_law - true_law).sum())
    return {"experiment": "two-step-induction", "seed": seed, "N": N,
            "R": R, "trials": trials, "replicates": replicates,
            "tv": tv, "samples": int(synth_counts.sum())}


# ---------------------------------------------------------------------------
# separation experiment

def _hamming_quantize(u, codebook, chunk=256):
    """Minimum-Hamming-distance index per row of u."""
    out = np.empty(u.shape[0], dtype=np.int64)
    for i in range(0, u.shape[0], chunk):
        d = (u[i:i + chunk, None, :] != codebook[None, :, :]).sum(axis=2)
        out[i:i + chunk] = d.argmin(axis=1)
    return out


def separation_experiment(p=0.11, kappa=1.0, quantizer_bits=(6, 8, 10),
                          trials=10000, seed=0, link_rate=0.4):
    """The separated scheme (random quantizer + link transport) over the
    true BSC(p) with a channel code versus over a capacity bit-pipe."""
    ham = np.array([[0.0, 1.0], [1.0, 0.0]])
    src = ProbVector([0.5, 0.5])
    cap = blahut_capacity(Kernel.bsc(p)).capacity
    d_star = invert_rate_distortion(src, ham, cap / kappa)
    rng = RngStream(seed)
    rows = []
    for k_bits in quantizer_bits:
        L = int(round(k_bits / link_rate))
        r = rng.child("size", k_bits)
        # quantizer codebook from the R(D)-optimal output marginal (uniform
        # for the binary symmetric problem), minimum-distortion encoding
        qcb = (r.child("qcb").uniform((2 ** k_bits, L)) < 0.5).astype(np.int64)
        cc = build_channel_code(Kernel.bsc(p), L, k_bits / L,
                                r.child("ccode"))
        u = (r.child("u").uniform((trials, L)) < 0.5).astype(np.int64)
        w = _hamming_quantize(u, qcb)
        d_pipe_t = (u != qcb[w]).mean(axis=1)

        x = cc.codebook[w]
        noise = (r.child("noise").uniform(x.shape) < p).astype(np.int64)
        y = x ^ noise
        dec = cc.decode_batch(y)
        d_noisy_t = (u != qcb[dec % qcb.shape[0]]).mean(axis=1)
        pe_t = (dec != w).astype(float)

        def mean_se(a):
            return float(a.mean()), float(a.std(ddof=1) / np.sqrt(len(a)))

        d_pipe, se_pipe = mean_se(d_pipe_t)
        d_noisy, se_noisy = mean_se(d_noisy_t)
        pe, se_pe = mean_se(pe_t)
        rows.append({"quantizer_bits": k_bits, "block_length": L,
                     "D_pipe": d_pipe, "stderr_pipe": se_pipe,
                     "D_noisy": d_noisy, "stderr_noisy": se_noisy,
                     "p_e": pe, "p_e_stderr": se_pe,
                     "excess_bound": pe * 1.0,  # |E| = 1, d_max = 1
                     "pooled_stderr": float(np.hypot(se_pipe, se_noisy))})
    return {"experiment": "separation", "seed": seed, "p": p, "kappa": kappa,
            "trials": trials, "capacity": cap, "D_target": d_star,
            "rows": rows}


# ---------------------------------------------------------------------------
# mixing demonstration

def mixing_demo(flip=0.4, L=64, samples=20000, seed=0, num_blocks=4):
    chain = MarkovJoint((2,), [0.5, 0.5],
                        [[1 - flip, flip], [flip, 1 - flip]])
    tv = parity_class_dependence_tv(chain, L, num_blocks=num_blocks,
                                    samples=samples, rng=RngStream(seed))
    return {"experiment": "mixing", "seed": seed, "flip": flip, "L": L,
            "samples": samples, "tv": tv}


# ---------------------------------------------------------------------------
# plot data export

_PLOT_SCHEMAS = {
    "synth-sweep": ("synth_sweep.csv",
                    ["N", "R", "tv_mean", "tv_stderr", "seed_batch"]),
    "chancode-sweep": ("chancode_sweep.csv",
                       ["N", "R", "pe_mean", "pe_stderr", "seed_batch"]),
    "separation": ("separation.csv",
                   ["quantizer_bits", "block_length", "D_pipe",
                    "stderr_pipe", "D_noisy", "stderr_noisy", "p_e",
                    "p_e_stderr", "excess_bound", "pooled_stderr"]),
}


def emit_plotdata(result, outdir):
    """Tidy CSV export, one row per (sweep point, seed batch)."""
    tag = result.get("experiment")
    if tag not in _PLOT_SCHEMAS:
        raise KeyError("no plot schema for experiment %r" % tag)
    fname, cols = _PLOT_SCHEMAS[tag]
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, fname)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in result.get("rows", []):
            fh.write(",".join(repr(row[c]) for c in cols) + "\n")
    return path
