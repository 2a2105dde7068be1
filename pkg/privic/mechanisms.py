"""
Obfuscation channels: Blahut-Arimoto synthesis, the grid Laplace baseline and
privacy audits of a given channel.

BA iterates and output marginals are carried in the log domain. Channel
entries below the smallest normal float are stored as that float, so a
channel built here never has a zero entry and its ratio audit stays finite.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError
from .metrics import avg_distortion, mutual_information
from .prob import Channel, Pmf, check_dist, push_forward, uniform_channel
from .settings import BaConfig

logger = logging.getLogger(__name__)

# Cap on the number of (x, x', y) triples held in memory by verify_geo_ind
_AUDIT_CHUNK = 4_000_000
_TINY = np.finfo(float).tiny


@dataclass(frozen=True, eq=False)
class BaResult:
    channel: Channel
    iterations_used: int
    converged: bool
    achieved_avg_distortion: float
    achieved_mi: float
    beta: float


@dataclass(frozen=True, eq=False)
class ElasticReport:
    """
    Fixed-point defect of a channel against the elastic form
    C[x][y] proportional to c[y] * exp(-beta * d(x, y)).

    row_spread[x] is max_y - min_y of ln C[x][y] - ln c[y] + beta * d(x, y)
    over the reported cells with c[y] > 0; it is zero for an exact elastic row.
    """
    residual: float
    row_spread: np.ndarray
    marginal: Pmf

    @property
    def max_row_spread(self) -> float:
        return float(self.row_spread.max()) if self.row_spread.size else 0.0


def _log_kernel_rows(log_weights: np.ndarray, scale: float, dist: np.ndarray) -> np.ndarray:
    # ln of rows proportional to exp(log_weights[y] - scale * d(x, y))
    logits = log_weights[None, :] - scale * dist
    return logits - logsumexp(logits, axis=1, keepdims=True)


def _materialize(log_rows: np.ndarray) -> np.ndarray:
    # clamping preserves every ratio bound: max(a, t) / max(b, t) lies between 1 and a / b
    return np.maximum(np.exp(log_rows), _TINY)


def _kernel_rows(log_weights: np.ndarray, scale: float, dist: np.ndarray) -> np.ndarray:
    return _materialize(_log_kernel_rows(log_weights, scale, dist))


def _log_channel(channel: Channel) -> np.ndarray:
    return np.log(np.maximum(channel.c, _TINY))


def _log_marginal(prior: Pmf, log_rows: np.ndarray) -> np.ndarray:
    # ln c(y) = ln sum_x p(x) C[x][y], without forming c in linear space
    with np.errstate(divide='ignore'):
        log_p = np.log(prior.p)
    return logsumexp(log_p[:, None] + log_rows, axis=0)


def _check_ba(prior: Pmf, m: int, beta: float):
    if prior.m != m:
        raise DomainError(f"prior over {prior.m} cells, channel over {m}")
    if not prior.full_support:
        raise DomainError("Blahut-Arimoto needs a full-support prior")
    if beta < 0 or not math.isfinite(beta):
        raise DomainError("beta must be finite and non-negative")


def _ba_log_step(prior: Pmf, log_rows: np.ndarray, beta: float, dist: np.ndarray) -> np.ndarray:
    return _log_kernel_rows(_log_marginal(prior, log_rows), beta, dist)


def ba_step(prior: Pmf, channel: Channel, beta: float, dist) -> Channel:
    """One Blahut-Arimoto update: marginal of the current channel, then the exponential re-weighting."""
    _check_ba(prior, channel.m, beta)
    dist = check_dist(dist, prior.m)
    return Channel(_materialize(_ba_log_step(prior, _log_channel(channel), beta, dist)))


def _max_row_l1(a: Channel, b: Channel) -> float:
    return float(np.abs(a.c - b.c).sum(axis=1).max())


def ba_run(prior: Pmf, init: Channel, cfg: BaConfig, dist) -> BaResult:
    """
    Iterate ba_step from `init` until the largest row L1 change drops below
    cfg.tol, or for exactly cfg.max_iters steps when cfg.fixed_count is set.
    """
    _check_ba(prior, init.m, cfg.beta)
    dist = check_dist(dist, prior.m)
    channel = init
    log_rows = _log_channel(init)
    change = math.inf
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        log_rows = _ba_log_step(prior, log_rows, cfg.beta, dist)
        updated = Channel(_materialize(log_rows))
        change = _max_row_l1(updated, channel)
        channel = updated
        if not cfg.fixed_count and change < cfg.tol:
            break

    converged = change < cfg.tol
    if not converged and not cfg.fixed_count:
        logger.warning("BA did not converge in %d iterations (beta=%g, change=%.3g)",
                       cfg.max_iters, cfg.beta, change)
    logger.debug("BA finished after %d iterations, last change %.3g", iterations, change)
    return BaResult(
        channel=channel,
        iterations_used=iterations,
        converged=converged,
        achieved_avg_distortion=avg_distortion(prior, channel, dist),
        achieved_mi=mutual_information(prior, channel),
        beta=cfg.beta,
    )


def laplace_channel(epsilon: float, dist) -> Channel:
    """Grid-restricted exponential mechanism: C[x][y] proportional to exp(-epsilon * d(x, y))."""
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise DomainError("distance table must be square")
    return Channel(_kernel_rows(np.zeros(dist.shape[0]), epsilon, dist))


def geo_ind_epsilon(beta: float) -> float:
    """Geo-indistinguishability level guaranteed by the limiting BA channel with loss beta."""
    return 2.0 * beta


def rank_one_channel(m: int, target: int) -> Channel:
    """Mechanism reporting `target` whatever the true cell; it carries no statistical utility."""
    return Channel.point_mass_channel(m, target)


def verify_geo_ind(channel: Channel, dist) -> float:
    """
    Smallest epsilon with C[x][y] <= exp(epsilon * d(x, x')) * C[x'][y] for all
    x, x', y with d(x, x') > 0. A channel with a zero entry has no finite
    epsilon and yields math.inf.
    """
    m = channel.m
    dist = check_dist(dist, m)
    if not channel.positive:
        return math.inf
    log_c = np.log(channel.c)

    worst = 0.0
    chunk = max(1, _AUDIT_CHUNK // (m * m))
    for start in range(0, m, chunk):
        block = log_c[start:start + chunk]
        # gap[i, x'] = max_y ln C[x][y] - ln C[x'][y] for x = start + i
        gap = (block[:, None, :] - log_c[None, :, :]).max(axis=2)
        d = dist[start:start + chunk]
        positive = d > 0
        if np.any(positive):
            worst = max(worst, float((gap[positive] / d[positive]).max()))
    return worst


def elastic_residual(channel: Channel, prior: Pmf, beta: float, dist) -> ElasticReport:
    """
    Compare `channel` with the elastic row form built from its own output
    marginal c = push_forward(prior, channel). residual is the largest
    absolute entry-wise difference.
    """
    dist = check_dist(dist, channel.m)
    marginal = push_forward(prior, channel)
    with np.errstate(divide='ignore'):
        log_rows = np.log(channel.c)
        log_c = _log_marginal(prior, log_rows)
    target = np.exp(_log_kernel_rows(log_c, beta, dist))
    residual = float(np.abs(channel.c - target).max())

    # entries at the storage floor carry no ratio information; exact zeros in a reported column do
    support = (marginal.p > 0)[None, :]
    usable = support & (channel.c > _TINY)
    with np.errstate(invalid='ignore'):
        shifted = np.where(usable, log_rows - log_c[None, :] + beta * dist, np.nan)
    row_spread = np.zeros(channel.m)
    rows = usable.any(axis=1)
    row_spread[rows] = np.nanmax(shifted[rows], axis=1) - np.nanmin(shifted[rows], axis=1)
    row_spread[(support & (channel.c == 0)).any(axis=1)] = math.inf
    return ElasticReport(residual, row_spread, marginal)


@dataclass(frozen=True)
class RatePoint:
    beta: float
    avg_distortion_km: float
    mi_nats: float
    iterations: int
    converged: bool


def rate_distortion_curve(prior: Pmf, dist, betas: Sequence[float],
                          cfg: Optional[BaConfig] = None) -> List[RatePoint]:
    """Achieved (distortion, rate) pairs of the limiting BA channel for each beta."""
    cfg = cfg or BaConfig()
    points = []
    for beta in betas:
        result = ba_run(prior, uniform_channel(prior.m), cfg.model_copy(update={'beta': beta}), dist)
        points.append(RatePoint(beta, result.achieved_avg_distortion, result.achieved_mi,
                                result.iterations_used, result.converged))
    return points
