"""Iterative solvers for channel capacity and the rate-distortion function.

Both solvers are alternating-maximization (Blahut-Arimoto style) iterations
with certified stopping bounds; all rates are in bits.
"""

from dataclasses import dataclass

import numpy as np

from .probkit import Kernel, ProbVector, entropy

_EPS = 1e-300


class InfeasibleTarget(ValueError):
    pass


@dataclass(frozen=True)
class CapacityResult:
    capacity: float          # bits per channel use (certified lower bound)
    optimal_input: ProbVector
    iterations: int
    gap: float               # upper minus lower capacity bound
    converged: bool = True


@dataclass(frozen=True)
class RdResult:
    rate: float              # bits per source symbol
    distortion: float
    test_channel: Kernel
    iterations: int


def _relative_entropies(w, q):
    """Per-input-row D( w(.|x) || q ) in bits; rows with w=0 contribute 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * (np.log2(np.maximum(w, _EPS)) -
                                     np.log2(np.maximum(q, _EPS))[None, :]), 0.0)
    return terms.sum(axis=1)


def blahut_capacity(channel, tol=1e-9, max_iters=100000):
    """Maximize I(X;Y) over the input law for a fixed kernel.

    Returns a CapacityResult whose `capacity` is the achieved mutual
    information and whose `gap` bounds the distance to the true maximum:
    I(r) <= C <= max_x D(p(.|x)||q).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = channel.matrix
    k = channel.input_size
    r = np.full(k, 1.0 / k)
    lower = upper = 0.0
    iters = 0
    for iters in range(1, max_iters + 1):
        q = r @ w
        d = _relative_entropies(w, q)
        active = r > 0
        lower = float((r[active] * d[active]).sum())
        upper = float(d[active].max())
        if upper - lower <= tol:
            return CapacityResult(lower, ProbVector(r), iters, upper - lower)
        # zero-probability inputs are retained but never revived
        growth = np.where(active, np.exp2(d - upper), 0.0)
        r = r * growth
        r = r / r.sum()
    return CapacityResult(lower, ProbVector(r), iters, upper - lower,
                          converged=False)


def _rd_point(p, d, s, tol=1e-12, max_iters=100000):
    """Rate-distortion point at slope parameter s >= 0 (bits, distortion)."""
    a = np.exp2(-s * d)  # |X| x |Xhat|
    q = np.full(d.shape[1], 1.0 / d.shape[1])
    iters = 0
    for iters in range(1, max_iters + 1):
        denom = a @ q
        # certified stopping bound on the slope-s Lagrangian (Blahut)
        c = (p / denom) @ a  # c_j = sum_x p_x a[x,j] / denom_x
        if np.log2(np.maximum(c, _EPS).max()) <= tol:
            break
        q = q * c
        q = q / q.sum()
    denom = a @ q
    cond = a * q[None, :] / denom[:, None]  # test channel p(xhat|x)
    dist = float((p[:, None] * cond * d).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        kl = np.where(cond > 0,
                      cond * (np.log2(np.maximum(cond, _EPS)) -
                              np.log2(np.maximum(q, _EPS))[None, :]), 0.0)
    rate = float((p[:, None] * kl).sum())
    return max(rate, 0.0), dist, cond, iters


def blahut_rate_distortion(source, distortion_fn, target_d, tol=1e-9,
                           max_iters=100000):
    """R(D) for a finite source at a target expected distortion.

    The convex curve is traced by its slope parameter; a bisection on the
    slope pins the achieved distortion to target_d.
    """
    p = source.probs if isinstance(source, ProbVector) else ProbVector(source).probs
    d = np.asarray(distortion_fn, dtype=float)
    if d.ndim != 2 or d.shape[0] != p.size:
        raise ValueError("distortion matrix shape does not match source")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ValueError("distortion matrix must be finite and nonnegative")

    d_min = float((p * d.min(axis=1)).sum())
    d_floor = float((p @ d).min())  # zero-rate distortion
    if target_d < d_min - tol or target_d > d.max() + tol:
        raise InfeasibleTarget("target distortion %r outside [%r, %r]"
                               % (target_d, d_min, d.max()))

    if target_d >= d_floor - tol:
        j = int((p @ d).argmin())
        cond = np.zeros_like(d)
        cond[:, j] = 1.0
        return RdResult(0.0, d_floor, Kernel(cond), 0)

    if target_d <= d_min + tol:
        # deterministic minimum-distortion assignment (ties broken low)
        j_star = d.argmin(axis=1)
        cond = np.zeros_like(d)
        cond[np.arange(p.size), j_star] = 1.0
        push = np.zeros(d.shape[1])
        np.add.at(push, j_star, p)
        return RdResult(entropy(push), d_min, Kernel(cond), 0)

    s_lo, s_hi = 0.0, 1.0
    while _rd_point(p, d, s_hi)[1] > target_d:
        s_hi *= 2.0
        if s_hi > 1e9:
            raise InfeasibleTarget("slope search diverged")
    total_iters = 0
    rate = dist = 0.0
    cond = None
    for _ in range(200):
        s = 0.5 * (s_lo + s_hi)
        rate, dist, cond, it = _rd_point(p, d, s)
        total_iters += it
        if abs(dist - target_d) <= tol * 1e-2:
            break
        if dist > target_d:
            s_lo = s
        else:
            s_hi = s
    # first-order correction along the supporting line of slope -s
    rate = max(rate + s * (dist - target_d), 0.0)
    return RdResult(rate, dist, Kernel(cond), total_iters)


def invert_rate_distortion(source, distortion_fn, target_rate, tol=1e-9):
    """Distortion D with R(D) = target_rate, by bisection on D."""
    p = source.probs if isinstance(source, ProbVector) else ProbVector(source).probs
    d = np.asarray(distortion_fn, dtype=float)
    d_min = float((p * d.min(axis=1)).sum())
    d_floor = float((p @ d).min())
    lo, hi = d_min, d_floor
    if target_rate <= 0:
        return d_floor
    r_min = blahut_rate_distortion(source, distortion_fn, d_min, tol).rate
    if target_rate >= r_min:
        return d_min
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        r = blahut_rate_distortion(source, distortion_fn, mid, tol).rate
        if r > target_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
