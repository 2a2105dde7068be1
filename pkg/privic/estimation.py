"""
Estimating the true distribution from obfuscated reports.

ibu_run is the EM iteration for the maximum-likelihood input distribution
given a known channel and the empirical distribution of the reports.
mle_oracle is a slow direct maximizer used to check it on small spaces.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import MLE_ORACLE_MAX_CELLS
from .errors import CapabilityError, DomainError
from .prob import Channel, Pmf, SampleSet, check_dist, uniform_pmf
from .settings import IbuConfig

logger = logging.getLogger(__name__)

# Largest lattice evaluated by mle_oracle before refinement
_ORACLE_LATTICE_POINTS = 200_000
_ORACLE_FINEST_RESOLUTION = 1e-3
_ORACLE_MAX_SWEEPS = 500
_TIE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class IbuResult:
    estimate: Pmf
    iterations_used: int
    converged: bool
    trajectory: Optional[List[Pmf]] = None
    loglik_trajectory: List[float] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class MleResult:
    estimate: Pmf
    log_likelihood: float
    unique: bool
    resolution: float


@dataclass(frozen=True, eq=False)
class DualityTrace:
    """Marginals of the BA recursion next to the IBU estimates under the exponential kernel."""
    ba_marginals: List[Pmf]
    ibu_estimates: List[Pmf]
    gaps: List[float]

    @property
    def max_gap(self) -> float:
        return max(self.gaps)


def empirical_pmf(samples: SampleSet, m: Optional[int] = None) -> Pmf:
    """Relative frequency of each cell among the samples."""
    m = samples.m if m is None else m
    if m != samples.m:
        raise DomainError(f"samples over {samples.m} cells, asked for {m}")
    if samples.n == 0:
        raise DomainError("empirical PMF of an empty sample set")
    return Pmf(samples.counts() / samples.n)


def _ibu_update(theta: np.ndarray, kernel: np.ndarray, q: np.ndarray) -> np.ndarray:
    # theta'(x) = theta(x) * sum_y kernel[x][y] q(y) / sum_z theta(z) kernel[z][y], over q(y) > 0
    observed = q > 0
    columns = kernel[:, observed]
    denominator = theta @ columns
    if np.any(denominator <= 0):
        raise DomainError("a reported cell has zero probability under the current estimate")
    return theta * (columns @ (q[observed] / denominator))


def log_likelihood(theta: Pmf, channel: Channel, q: Pmf) -> float:
    """sum_y q(y) ln (theta C)(y); -inf when an observed cell is impossible."""
    observed = q.p > 0
    output = (theta.p @ channel.c)[observed]
    if np.any(output <= 0):
        return -math.inf
    return float(q.p[observed] @ np.log(output))


def _check_inputs(theta: Pmf, channel: Channel, q: Pmf):
    if not theta.m == channel.m == q.m:
        raise DomainError(f"dimension mismatch: theta {theta.m}, channel {channel.m}, q {q.m}")


def ibu_step(theta: Pmf, channel: Channel, q: Pmf) -> Pmf:
    _check_inputs(theta, channel, q)
    return Pmf(_ibu_update(theta.p, channel.c, q.p))


def ibu_run(theta0: Pmf, channel: Channel, q: Pmf, cfg: IbuConfig) -> IbuResult:
    """
    Iterate ibu_step from theta0 until the L1 change between successive
    estimates drops below cfg.tol, or for exactly cfg.max_iters steps when
    cfg.fixed_count is set.
    """
    _check_inputs(theta0, channel, q)
    theta = theta0.p
    trajectory = [theta0] if cfg.record_trajectory else None
    loglik = [log_likelihood(theta0, channel, q)]
    change = math.inf
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        updated = _ibu_update(theta, channel.c, q.p)
        change = float(np.abs(updated - theta).sum())
        theta = updated
        estimate = Pmf(theta)
        loglik.append(log_likelihood(estimate, channel, q))
        if trajectory is not None:
            trajectory.append(estimate)
        if not cfg.fixed_count and change < cfg.tol:
            break

    converged = change < cfg.tol
    if not converged and not cfg.fixed_count:
        logger.warning("IBU did not converge in %d iterations (change=%.3g)", cfg.max_iters, change)
    logger.debug("IBU finished after %d iterations, last change %.3g", iterations, change)
    return IbuResult(Pmf(theta), iterations, converged, trajectory, loglik)


def _oracle_lattice_size(m: int) -> int:
    # finest k with at most _ORACLE_LATTICE_POINTS weak compositions of k into m parts
    limit = int(round(1.0 / _ORACLE_FINEST_RESOLUTION))
    k = 1
    while k < limit and math.comb(k + 1 + m - 1, m - 1) <= _ORACLE_LATTICE_POINTS:
        k += 1
    return k


def _lattice(m: int, k: int) -> np.ndarray:
    # weak compositions of k into m parts, lexicographically ascending
    if m == 1:
        return np.array([[k]])
    bars = np.array(list(combinations(range(k + m - 1), m - 1)))
    padded = np.column_stack([np.full(len(bars), -1), bars, np.full(len(bars), k + m - 1)])
    return np.diff(padded, axis=1) - 1


def _objective(theta: np.ndarray, c: np.ndarray, q: np.ndarray) -> float:
    output = theta @ c
    observed = q > 0
    with np.errstate(divide='ignore'):
        return float(q[observed] @ np.log(output[observed]))


def _refine(theta: np.ndarray, c: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Pairwise mass transfers, each optimized by bounded golden-section search."""
    m = theta.size
    theta = theta.copy()
    best = _objective(theta, c, q)
    for _ in range(_ORACLE_MAX_SWEEPS):
        start = best
        for i, j in combinations(range(m), 2):
            low, high = -theta[i], theta[j]
            if high - low <= 0:
                continue

            def negative(t, i=i, j=j):
                moved = theta.copy()
                moved[i] += t
                moved[j] -= t
                return -_objective(np.clip(moved, 0.0, None), c, q)

            found = minimize_scalar(negative, bounds=(low, high), method='bounded',
                                    options={'xatol': 1e-13})
            if -found.fun > best:
                theta[i] += found.x
                theta[j] -= found.x
                np.clip(theta, 0.0, None, out=theta)
                best = -found.fun
        if best - start < 1e-15:
            break
    return theta / theta.sum()


def mle_oracle(channel: Channel, q: Pmf) -> MleResult:
    """
    Maximize sum_y q(y) ln (theta C)(y) over the simplex by lattice search
    followed by pairwise refinement. Ties on the lattice go to the
    lexicographically smallest point. `unique` is set when the channel has full
    rank, in which case the likelihood is strictly concave in theta.
    """
    m = channel.m
    if m > MLE_ORACLE_MAX_CELLS:
        raise CapabilityError(f"mle_oracle supports at most {MLE_ORACLE_MAX_CELLS} cells, got {m}")
    if q.m != m:
        raise DomainError(f"channel over {m} cells, q over {q.m}")

    k = _oracle_lattice_size(m)
    points = _lattice(m, k) / k
    observed = q.p > 0
    with np.errstate(divide='ignore'):
        values = np.log(points @ channel.c[:, observed]) @ q.p[observed]
    best = values.max()
    start = points[int(np.argmax(values >= best - _TIE_TOLERANCE))]

    theta = _refine(start, channel.c, q.p)
    estimate = Pmf(theta)
    unique = bool(np.linalg.matrix_rank(channel.c) == m)
    logger.debug("MLE oracle: lattice 1/%d, unique=%s", k, unique)
    return MleResult(estimate, log_likelihood(estimate, channel, q), unique, 1.0 / k)


def duality_trace(prior: Pmf, beta: float, dist, steps: int) -> DualityTrace:
    """
    Run the BA marginal recursion and IBU under the kernel exp(-beta d) with
    `prior` as the observed distribution, both from the uniform PMF, and
    record the per-step L1 gap between them.
    """
    if not prior.full_support:
        raise DomainError("duality trace needs a full-support prior")
    if beta < 0:
        raise DomainError("beta must be non-negative")
    m = prior.m
    dist = check_dist(dist, m)
    kernel = np.exp(-beta * dist)

    marginal = uniform_pmf(m).p
    estimate = uniform_pmf(m).p
    ba_marginals = [Pmf(marginal)]
    ibu_estimates = [Pmf(estimate)]
    gaps = [0.0]
    for _ in range(steps):
        # BA: channel rows proportional to c(y) exp(-beta d(x, y)), then the output marginal
        rows = marginal[None, :] * kernel
        rows = rows / rows.sum(axis=1, keepdims=True)
        marginal = prior.p @ rows
        estimate = _ibu_update(estimate, kernel.T, prior.p)
        ba_marginals.append(Pmf(marginal))
        ibu_estimates.append(Pmf(estimate))
        gaps.append(float(np.abs(marginal - estimate).sum()))
    return DualityTrace(ba_marginals, ibu_estimates, gaps)
