"""End-to-end acceptance suite.

Each test is one pass/fail criterion. Result-producing runs are cached at
module scope; the final determinism criterion reruns every one of them from
its stored seed and demands bit-identical output.
"""

import json
import math
import time

import numpy as np
import pytest

from sepnet.experiments import (link_replacement_experiment, mixing_demo,
                                separation_experiment, stack_check,
                                synth_sweep, two_step_induction,
                                verify_lemma1)
from sepnet.infosolvers import blahut_capacity, blahut_rate_distortion
from sepnet.netmodel import DmcChannel, Edge, IidJoint, NetworkSpec
from sepnet.probkit import Kernel, ProbVector

HAMMING = np.array([[0.0, 1.0], [1.0, 0.0]])

RELAY_NET = NetworkSpec((0, 1), (Edge(0, 1, DmcChannel(Kernel.bsc(0.11))),),
                        {(0, 1): HAMMING}, IidJoint((2, 1), [0.5, 0.5]))
FEEDBACK_NET = NetworkSpec((0, 1),
                           (Edge(0, 1, DmcChannel(Kernel.bsc(0.11))),
                            Edge(1, 0, DmcChannel(Kernel.bsc(0.1)))),
                           {(0, 1): HAMMING},
                           IidJoint((2, 2), [0.25, 0.25, 0.25, 0.25]))


def h2(p):
    if p in (0.0, 1.0):
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def run_capacity_grids():
    out = {"bsc": [], "bec": []}
    for p in np.arange(0.0, 0.501, 0.05):
        out["bsc"].append([float(p),
                           blahut_capacity(Kernel.bsc(float(p))).capacity])
    for eps in np.arange(0.0, 0.901, 0.1):
        out["bec"].append([float(eps),
                           blahut_capacity(Kernel.bec(float(eps))).capacity])
    return out


def run_rd_grid():
    src = ProbVector([0.5, 0.5])
    return [[float(d), blahut_rate_distortion(src, HAMMING, float(d)).rate]
            for d in np.linspace(0.02, 0.48, 20)]


def run_stack_checks():
    return {
        "relay": stack_check(RELAY_NET, "uncoded_relay", {"L": 3},
                             8, 1000, 42),
        "adaptive": stack_check(FEEDBACK_NET, "adaptive_feedback", {"L": 3},
                                8, 1000, 43),
    }


def run_link_replacement():
    return link_replacement_experiment(p=0.11, N=24, R=0.4, trials=10000,
                                       seed=3)


def run_soft_covering():
    above = synth_sweep(Kernel.bsc(0.2), ProbVector([0.5, 0.5]), (8, 16, 24),
                        0.6, batches=30, codebooks=8, samples=16, seed=11)
    below = synth_sweep(Kernel.bsc(0.2), ProbVector([0.5, 0.5]), (8, 16, 24),
                        0.1, batches=30, codebooks=8, samples=16, seed=11,
                        enforce_margin=False)
    return {"above": above, "below": below}


def run_induction():
    return two_step_induction(channel=Kernel.bsc(0.2), N=24, R=0.6,
                              trials=256, replicates=8, seed=4)


def run_lemma1_seeds():
    return {str(seed): verify_lemma1(Kernel.bsc(0.2), N=8, R=0.8,
                                     trials=8000, seed=seed)
            for seed in range(10)}


def run_separation():
    return separation_experiment(p=0.11, kappa=1.0,
                                 quantizer_bits=(6, 8, 10),
                                 trials=10000, seed=21, link_rate=0.4)


def run_mixing():
    return {"mixed": mixing_demo(flip=0.4, L=64, samples=20000, seed=6),
            "sticky": mixing_demo(flip=0.01, L=1, samples=20000, seed=6)}


RUNNERS = {
    "capacity": (run_capacity_grids, 1.0),
    "rd": (run_rd_grid, 1.0),
    "stacking": (run_stack_checks, 30.0),
    "link_replacement": (run_link_replacement, 300.0),
    "soft_covering": (run_soft_covering, 300.0),
    "induction": (run_induction, 300.0),
    "lemma1": (run_lemma1_seeds, 120.0),
    "separation": (run_separation, 600.0),
    "mixing": (run_mixing, 60.0),
}

_cache = {}


def result(name):
    if name not in _cache:
        fn, limit = RUNNERS[name]
        t0 = time.time()
        _cache[name] = fn()
        elapsed = time.time() - t0
        assert elapsed < limit, \
            "%s took %.1fs, budget %.0fs" % (name, elapsed, limit)
    return _cache[name]


def test_criterion_01_capacity_solver_exactness():
    grids = result("capacity")
    for p, cap in grids["bsc"]:
        assert cap == pytest.approx(1 - h2(p), abs=1e-6)
    for eps, cap in grids["bec"]:
        assert cap == pytest.approx(1 - eps, abs=1e-6)


def test_criterion_02_rate_distortion_exactness():
    for d, rate in result("rd"):
        assert rate == pytest.approx(1 - h2(d), abs=1e-6)


def test_criterion_03_layered_equivalence_bit_exact():
    checks = result("stacking")
    for name, r in checks.items():
        assert r["exact_match"] is True, name
        assert r["stacked_distortion"] == r["destacked_distortion"]


def test_criterion_04_coded_links_match_bit_pipes():
    r = result("link_replacement")
    assert r["excess"] <= r["excess_bound"] + 3 * r["pooled_stderr"]


def test_criterion_05_soft_covering_trends():
    res = result("soft_covering")
    by_batch = {}
    for row in res["above"]["rows"]:
        by_batch.setdefault(row["seed_batch"], {})[row["N"]] = row["tv_mean"]
    decreasing = sum(1 for b in by_batch.values() if b[8] > b[16] > b[24])
    assert decreasing >= 27, "only %d/30 batches strictly decreasing" \
        % decreasing
    pooled = {}
    for row in res["below"]["rows"]:
        pooled.setdefault(row["N"], []).append(row["tv_mean"])
    for N, vals in pooled.items():
        assert float(np.mean(vals)) > 0.1, "below-rate TV too small at N=%d" % N


def test_criterion_06_two_step_induction():
    assert result("induction")["tv"] <= 0.1


def test_criterion_07_conditional_independence_verifier():
    for seed, r in result("lemma1").items():
        assert r["positive_passed"], "positive control failed at seed %s" % seed
        assert r["negative_failed"], "negative control passed at seed %s" % seed


def test_criterion_08_separation_coherence():
    r = result("separation")
    assert r["D_target"] == pytest.approx(0.110, abs=1e-3)
    rows = r["rows"]
    for row in rows:
        assert row["D_pipe"] >= r["D_target"] - 3 * row["stderr_pipe"]
        assert row["D_noisy"] >= r["D_target"] - 3 * row["stderr_noisy"]
        gap = abs(row["D_noisy"] - row["D_pipe"])
        assert gap <= row["excess_bound"] + 3 * row["pooled_stderr"]
    for prev, cur in zip(rows, rows[1:]):
        tol = 3 * math.hypot(prev["pooled_stderr"], cur["pooled_stderr"])
        assert cur["D_pipe"] <= prev["D_pipe"] + tol
        assert cur["D_noisy"] <= prev["D_noisy"] + tol


def test_criterion_09_interleaving_mixes_the_source():
    r = result("mixing")
    assert r["mixed"]["tv"] < 0.05
    assert r["sticky"]["tv"] > 0.5


def test_criterion_10_every_run_is_deterministic():
    for name, (fn, _) in RUNNERS.items():
        first = json.dumps(result(name), sort_keys=True)
        again = json.dumps(fn(), sort_keys=True)
        assert first == again, "%s did not rerun bit-identically" % name
