"""
Privacy and utility functionals over PMFs and channels.

Mutual information is measured in nats, distances and transport costs in the
units of the distance table (km for grids built by privic.geo).
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import ot
from scipy.special import logsumexp

from .errors import DomainError
from .prob import Channel, Pmf, check_dist

logger = logging.getLogger(__name__)

# Network simplex iteration cap; the default of POT is too low for 400+ cell grids
EMD_MAX_ITERS = 2_000_000
MASS_TOLERANCE = 1e-10


def _check_dims(m: int, *others: int):
    for other in others:
        if other != m:
            raise DomainError(f"dimension mismatch: {m} vs {other}")


def mutual_information(prior: Pmf, channel: Channel) -> float:
    """I(X;Y) in nats for X ~ prior and Y | X ~ channel, with 0 ln 0 := 0."""
    _check_dims(prior.m, channel.m)
    with np.errstate(divide='ignore'):
        log_rows = np.log(channel.c)
        log_joint = np.log(prior.p)[:, None] + log_rows
        log_marginal = np.broadcast_to(logsumexp(log_joint, axis=0), log_joint.shape)
    mask = np.isfinite(log_joint)
    # ln p(x, y) - ln p(x) - ln c(y) = ln C[x][y] - ln c(y)
    value = float(np.sum(np.exp(log_joint[mask]) * (log_rows[mask] - log_marginal[mask])))
    return max(value, 0.0)


def avg_distortion(prior: Pmf, channel: Channel, dist) -> float:
    """Expected distance between the true and the reported cell."""
    _check_dims(prior.m, channel.m)
    dist = check_dist(dist, prior.m)
    return float(prior.p @ (channel.c * dist).sum(axis=1))


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Optimal coupling; plan[x][y] is the mass moved from x to y."""
    plan: np.ndarray
    cost: float


def _mass(pmf: Pmf, label: str) -> np.ndarray:
    total = pmf.p.sum()
    if abs(total - 1.0) > MASS_TOLERANCE:
        logger.warning("Renormalizing %s before EMD, mass was %.15g", label, total)
    return pmf.p / total


def emd(p1: Pmf, p2: Pmf, dist) -> Tuple[float, TransportPlan]:
    """
    Exact earth mover's distance by the network simplex solver of POT.

    The transport problem is solved on the supports of p1 and p2 only; the
    returned plan is embedded back into the full m x m space.
    """
    _check_dims(p1.m, p2.m)
    dist = check_dist(dist, p1.m)
    a = _mass(p1, 'source')
    b = _mass(p2, 'target')
    rows = np.flatnonzero(a > 0)
    cols = np.flatnonzero(b > 0)

    cost_matrix = np.ascontiguousarray(dist[np.ix_(rows, cols)])
    sub_plan, log = ot.emd(np.ascontiguousarray(a[rows]), np.ascontiguousarray(b[cols]),
                           cost_matrix, numItermax=EMD_MAX_ITERS, log=True)
    if log.get('warning'):
        logger.warning("EMD solver: %s", log['warning'])

    plan = np.zeros((p1.m, p1.m))
    plan[np.ix_(rows, cols)] = sub_plan
    cost = float(np.sum(sub_plan * cost_matrix))
    return cost, TransportPlan(plan, cost)


def tv_distance(p1: Pmf, p2: Pmf) -> float:
    _check_dims(p1.m, p2.m)
    return 0.5 * float(np.abs(p1.p - p2.p).sum())


def statistical_utility(estimate: Pmf, truth: Pmf, dist) -> float:
    """EMD between an estimate and the true distribution (lower is better)."""
    return emd(estimate, truth, dist)[0]
