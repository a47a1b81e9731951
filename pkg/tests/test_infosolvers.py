import math

import numpy as np
import pytest

from sepnet.infosolvers import (InfeasibleTarget, blahut_capacity,
                                blahut_rate_distortion,
                                invert_rate_distortion)
from sepnet.probkit import Kernel, ProbVector, entropy, mutual_information

HAMMING = np.array([[0.0, 1.0], [1.0, 0.0]])
UNIFORM2 = ProbVector([0.5, 0.5])


def h2(p):
    if p in (0.0, 1.0):
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


# ---------------------------------------------------------------------------
# capacity

def test_capacity_bsc_closed_form():
    for p in np.arange(0.0, 0.501, 0.05):
        res = blahut_capacity(Kernel.bsc(float(p)))
        assert res.capacity == pytest.approx(1 - h2(float(p)), abs=1e-6)
        assert res.gap <= 1e-9
        assert res.converged


def test_capacity_bec_closed_form():
    for eps in np.arange(0.0, 0.901, 0.1):
        res = blahut_capacity(Kernel.bec(float(eps)))
        assert res.capacity == pytest.approx(1 - float(eps), abs=1e-6)


def test_capacity_certificate_brackets_truth():
    res = blahut_capacity(Kernel.bsc(0.11), tol=1e-6)
    truth = 1 - h2(0.11)
    assert res.capacity <= truth + 1e-12
    assert res.capacity + res.gap >= truth - 1e-12


def test_capacity_optimizer_achieves_value():
    k = Kernel([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8], [0.4, 0.5, 0.1]])
    res = blahut_capacity(k)
    assert mutual_information(res.optimal_input, k) == \
        pytest.approx(res.capacity, abs=1e-9)


def test_capacity_permutation_invariance():
    k = Kernel([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8], [0.4, 0.5, 0.1]])
    c0 = blahut_capacity(k).capacity
    perm_rows = Kernel(k.matrix[[2, 0, 1]])
    perm_cols = Kernel(k.matrix[:, [1, 2, 0]])
    assert blahut_capacity(perm_rows).capacity == pytest.approx(c0, abs=1e-8)
    assert blahut_capacity(perm_cols).capacity == pytest.approx(c0, abs=1e-8)


def test_capacity_bounds_and_degenerate():
    assert blahut_capacity(Kernel.identity(4)).capacity == \
        pytest.approx(2.0, abs=1e-6)
    # useless channel: all rows identical
    res = blahut_capacity(Kernel([[0.3, 0.7], [0.3, 0.7]]))
    assert res.capacity == pytest.approx(0.0, abs=1e-9)


def test_capacity_rejects_bad_tol():
    with pytest.raises(ValueError):
        blahut_capacity(Kernel.bsc(0.1), tol=0.0)


# ---------------------------------------------------------------------------
# rate-distortion

def test_rd_binary_hamming_closed_form():
    for dd in np.linspace(0.02, 0.48, 20):
        res = blahut_rate_distortion(UNIFORM2, HAMMING, float(dd))
        assert res.rate == pytest.approx(1 - h2(float(dd)), abs=1e-6)


def test_rd_endpoints():
    res0 = blahut_rate_distortion(UNIFORM2, HAMMING, 0.0)
    assert res0.rate == pytest.approx(1.0, abs=1e-9)
    assert res0.distortion == 0.0
    res1 = blahut_rate_distortion(UNIFORM2, HAMMING, 0.5)
    assert res1.rate == 0.0
    assert res1.distortion == pytest.approx(0.5)


def test_rd_zero_distortion_rate_is_pushforward_entropy():
    src = ProbVector([0.2, 0.3, 0.5])
    d = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
    res = blahut_rate_distortion(src, d, 0.0)
    # symbols 1 and 2 share a zero-distortion reproduction
    assert res.rate == pytest.approx(entropy([0.2, 0.8]), abs=1e-9)


def test_rd_monotone_and_convex():
    grid = np.linspace(0.05, 0.45, 9)
    rates = [blahut_rate_distortion(UNIFORM2, HAMMING, float(dd)).rate
             for dd in grid]
    assert all(r1 >= r2 - 1e-9 for r1, r2 in zip(rates, rates[1:]))
    # midpoint convexity on the grid
    for i in range(1, len(grid) - 1):
        assert rates[i] <= 0.5 * (rates[i - 1] + rates[i + 1]) + 1e-7


def test_rd_test_channel_consistency():
    res = blahut_rate_distortion(UNIFORM2, HAMMING, 0.2)
    cond = res.test_channel.matrix
    dist = float((UNIFORM2.probs[:, None] * cond * HAMMING).sum())
    assert dist == pytest.approx(res.distortion, abs=1e-9)
    assert np.allclose(cond.sum(axis=1), 1.0)


def test_rd_infeasible_targets():
    with pytest.raises(InfeasibleTarget):
        blahut_rate_distortion(UNIFORM2, HAMMING, -0.1)
    with pytest.raises(InfeasibleTarget):
        blahut_rate_distortion(UNIFORM2, HAMMING, 1.5)
    with pytest.raises(ValueError):
        blahut_rate_distortion(UNIFORM2, np.array([[0.0, 1.0]]), 0.1)
    with pytest.raises(ValueError):
        blahut_rate_distortion(UNIFORM2, np.array([[0.0, -1.0], [1.0, 0.0]]),
                               0.1)


def test_invert_rd_round_trip():
    for rate in (0.2, 0.5, 0.8):
        dd = invert_rate_distortion(UNIFORM2, HAMMING, rate)
        back = blahut_rate_distortion(UNIFORM2, HAMMING, dd).rate
        assert back == pytest.approx(rate, abs=1e-6)


def test_invert_rd_extremes():
    assert invert_rate_distortion(UNIFORM2, HAMMING, 0.0) == \
        pytest.approx(0.5)
    assert invert_rate_distortion(UNIFORM2, HAMMING, 2.0) == \
        pytest.approx(0.0)


def test_invert_rd_matches_closed_form():
    # D with 1 - h(D) = 1 - h(0.11) is D = 0.11
    c = 1 - h2(0.11)
    assert invert_rate_distortion(UNIFORM2, HAMMING, c) == \
        pytest.approx(0.11, abs=1e-6)
