"""
PRIVIC as a finite Markov chain on a discretized probability simplex.

States are the full-support PMFs whose entries are multiples of 1/k. One
PRIVIC cycle started at a state yields an estimate that is projected back to
the mesh; repeating this gives a Monte-Carlo estimate of the transition
matrix. The checks in this module are statistical evidence about the chain,
not proofs.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .constants import MESH_MAX_CELLS, MESH_MAX_GRANULARITY
from .errors import CapabilityError, DomainError
from .geo import GridSpace, line_grid
from .prob import Pmf, derive_seed, make_rng
from .privic_loop import observe_and_estimate, synthesize_channel
from .samplers import PmfSampler
from .settings import PrivicConfig

logger = logging.getLogger(__name__)

PROJECTION_TIE = 1e-12
POWER_TOL = 1e-12
POWER_MAX_ITERS = 1_000_000


@dataclass(frozen=True, eq=False)
class SimplexMesh:
    m: int
    k: int
    # numerators[i] / k is state i; rows in lexicographic order
    numerators: np.ndarray

    @property
    def states(self) -> np.ndarray:
        return self.numerators / self.k

    @property
    def K(self) -> int:
        return len(self.numerators)

    def pmf(self, index: int) -> Pmf:
        return Pmf(self.states[index])

    def label(self, index: int) -> str:
        return '(' + ','.join(f"{n}/{self.k}" for n in self.numerators[index]) + ')'


@dataclass(frozen=True, eq=False)
class TransitionEstimate:
    phi: np.ndarray
    trials_per_state: int
    seed: Optional[int] = None

    @property
    def K(self) -> int:
        return self.phi.shape[0]

    @property
    def min_entry(self) -> float:
        return float(self.phi.min())

    @property
    def positive(self) -> bool:
        return bool(np.all(self.phi > 0))


@dataclass(frozen=True, eq=False)
class StationaryResult:
    """psi is None when the chain has more than one communicating class."""
    psi: Optional[Pmf]
    unique: bool
    components: int
    iterations: int = 0
    residual: float = float('nan')


@dataclass(frozen=True)
class HittingTimeRow:
    state: int
    psi: float
    expected_tau: float
    inv_expected_tau: float
    sigma: float
    excursions: int

    @property
    def gap(self) -> float:
        return abs(self.psi - self.inv_expected_tau)

    @property
    def consistent(self) -> bool:
        return self.gap <= 3.0 * self.sigma + PROJECTION_TIE


@dataclass(frozen=True, eq=False)
class OccupancyReport:
    tv: float
    steps: int
    occupancy: np.ndarray


def _matrix(phi: Union[TransitionEstimate, np.ndarray]) -> np.ndarray:
    matrix = phi.phi if isinstance(phi, TransitionEstimate) else np.asarray(phi, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError("transition matrix must be square")
    if np.abs(matrix.sum(axis=1) - 1.0).max() > 1e-9:
        raise DomainError("transition matrix rows must sum to 1")
    return matrix


def enumerate_simplex(m: int, k: int) -> SimplexMesh:
    """All compositions of k into m positive parts, divided by k, in lexicographic order."""
    if m < 1 or k < 1:
        raise DomainError("m and k must be at least 1")
    if m > MESH_MAX_CELLS or k > MESH_MAX_GRANULARITY:
        raise CapabilityError(f"mesh limited to m <= {MESH_MAX_CELLS} and k <= {MESH_MAX_GRANULARITY}")
    if m > k:
        raise DomainError(f"no full-support PMF on {m} cells with granularity 1/{k}")
    cuts = list(combinations(range(1, k), m - 1))
    bounded = np.array([[0, *c, k] for c in cuts])
    return SimplexMesh(m, k, np.diff(bounded, axis=1))


def project_to_mesh(pmf: Pmf, mesh: SimplexMesh) -> int:
    """Index of the closest mesh state in L1; ties go to the lexicographically smallest state."""
    if pmf.m != mesh.m:
        raise DomainError(f"PMF over {pmf.m} cells, mesh over {mesh.m}")
    gaps = np.abs(mesh.states - pmf.p[None, :]).sum(axis=1)
    return int(np.argmax(gaps <= gaps.min() + PROJECTION_TIE))


def _transition_row(index: int, mesh: SimplexMesh, cfg: PrivicConfig, sampler: PmfSampler,
                    grid: GridSpace, trials: int, seed: int) -> np.ndarray:
    theta = mesh.pmf(index)
    # BA depends on the state only, so one channel serves every trial
    channel = synthesize_channel(theta, cfg, grid).channel
    counts = np.zeros(mesh.K)
    for trial in range(trials):
        _, ibu, *_ = observe_and_estimate(theta, channel, sampler, cfg, derive_seed(seed, index, trial))
        counts[project_to_mesh(ibu.estimate, mesh)] += 1
    logger.debug("State %s: %d distinct successors", mesh.label(index), int((counts > 0).sum()))
    return counts / trials


def estimate_transition(mesh: SimplexMesh, cfg: PrivicConfig, truth: Pmf, trials: int, seed: int,
                        grid: Optional[GridSpace] = None, workers: int = 1) -> TransitionEstimate:
    """
    Monte-Carlo transition matrix of one PRIVIC cycle on the mesh. Without a
    grid the cells are placed on a line 1 km apart.
    """
    if truth.m != mesh.m:
        raise DomainError(f"truth over {truth.m} cells, mesh over {mesh.m}")
    if trials < 1:
        raise DomainError("trials must be at least 1")
    if grid is None:
        grid = line_grid(mesh.m)
    sampler = PmfSampler(truth)

    def row(index: int) -> np.ndarray:
        return _transition_row(index, mesh, cfg, sampler, grid, trials, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, range(mesh.K)))
    else:
        rows = [row(i) for i in range(mesh.K)]
    phi = np.vstack(rows)
    logger.info("Estimated %dx%d transition matrix from %d trials per state (min entry %.4g)",
                mesh.K, mesh.K, trials, phi.min())
    return TransitionEstimate(phi, trials, seed)


def communicating_classes(phi: Union[TransitionEstimate, np.ndarray]) -> int:
    matrix = _matrix(phi)
    count, _ = connected_components(csr_matrix(matrix > 0), directed=True, connection='strong')
    return int(count)


def stationary_distribution(phi: Union[TransitionEstimate, np.ndarray],
                            start: Optional[np.ndarray] = None) -> StationaryResult:
    """
    Left fixed vector of an irreducible transition matrix by power iteration
    on the lazy chain (phi + I) / 2, which has the same fixed vectors and is
    aperiodic.
    """
    matrix = _matrix(phi)
    components = communicating_classes(matrix)
    if components > 1:
        logger.warning("Transition matrix has %d communicating classes; stationary distribution not unique",
                       components)
        return StationaryResult(None, False, components)

    size = matrix.shape[0]
    lazy = (matrix + np.eye(size)) / 2.0
    psi = np.full(size, 1.0 / size) if start is None else np.asarray(start, dtype=float) / np.sum(start)
    iterations = 0
    for iterations in range(1, POWER_MAX_ITERS + 1):
        updated = psi @ lazy
        updated /= updated.sum()
        change = np.abs(updated - psi).sum()
        psi = updated
        if change < POWER_TOL:
            break
    else:
        logger.warning("Power iteration stopped after %d iterations", POWER_MAX_ITERS)
    residual = float(np.abs(psi @ matrix - psi).sum())
    return StationaryResult(Pmf(psi), True, 1, iterations, residual)


def _cdf_rows(matrix: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(matrix, axis=1)
    return cdf / cdf[:, -1:]


def simulate_chain(phi: Union[TransitionEstimate, np.ndarray], start: int, steps: int, seed: int) -> np.ndarray:
    """Path of `steps` transitions from `start`, including the start state."""
    matrix = _matrix(phi)
    cdf = _cdf_rows(matrix)
    u = make_rng(seed).random(steps)
    path = np.empty(steps + 1, dtype=np.int64)
    path[0] = state = start
    for t in range(steps):
        state = int(np.searchsorted(cdf[state], u[t], side='right'))
        path[t + 1] = state
    return path


def occupancy_check(phi: Union[TransitionEstimate, np.ndarray], psi: Pmf, steps: int, seed: int,
                    start: int = 0) -> OccupancyReport:
    """TV distance between the visit frequencies of a long run and psi."""
    path = simulate_chain(phi, start, steps, seed)
    occupancy = np.bincount(path[1:], minlength=psi.m) / steps
    tv = 0.5 * float(np.abs(occupancy - psi.p).sum())
    return OccupancyReport(tv, steps, occupancy)


def _return_times(cdf: np.ndarray, state: int, excursions: int, rng: np.random.Generator) -> np.ndarray:
    times = np.empty(excursions)
    current, length, done = state, 0, 0
    while done < excursions:
        for u in rng.random(4096):
            current = int(np.searchsorted(cdf[current], u, side='right'))
            length += 1
            if current == state:
                times[done] = length
                done += 1
                length = 0
                if done == excursions:
                    break
    return times


def hitting_time_check(phi: Union[TransitionEstimate, np.ndarray], seed: int, excursions: int = 10_000,
                       psi: Optional[Pmf] = None) -> List[HittingTimeRow]:
    """
    Compare psi(s) with 1 / E[first return time to s] for every state, using
    `excursions` simulated returns per state. sigma is the delta-method
    standard error of 1 / E[tau].
    """
    matrix = _matrix(phi)
    if communicating_classes(matrix) > 1:
        raise DomainError("return times need an irreducible chain")
    if psi is None:
        psi = stationary_distribution(matrix).psi
    cdf = _cdf_rows(matrix)

    rows = []
    for state in range(matrix.shape[0]):
        times = _return_times(cdf, state, excursions, make_rng(derive_seed(seed, state)))
        mean = float(times.mean())
        sigma = float(times.std(ddof=1)) / np.sqrt(excursions) / mean ** 2 if excursions > 1 else float('inf')
        rows.append(HittingTimeRow(state, float(psi.p[state]), mean, 1.0 / mean, sigma, excursions))
    return rows
