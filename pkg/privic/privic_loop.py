"""
The PRIVIC loop.

Every cycle synthesizes a BA channel from the current estimate (always
starting from the uniform channel), obfuscates a batch of true locations with
it and re-estimates the distribution with IBU, starting from the current
estimate. With mechanism laplace the channel is the fixed Laplace kernel at
epsilon = 2 beta instead, which gives a non-adaptive baseline.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import MECHANISM_LAPLACE
from .errors import DomainError
from .estimation import IbuResult, empirical_pmf, ibu_run
from .geo import GridSpace
from .mechanisms import BaResult, ba_run, geo_ind_epsilon, laplace_channel, verify_geo_ind
from .metrics import avg_distortion, emd, mutual_information
from .prob import Channel, Pmf, derive_seed, obfuscate, uniform_channel, uniform_pmf
from .samplers import TruthSampler
from .settings import PrivicConfig

logger = logging.getLogger(__name__)

SAMPLE_STREAM = 0
NOISE_STREAM = 1

# Relative size of an EMD increase that counts as a trend inversion
TREND_TOLERANCE = 0.05


@dataclass(frozen=True, eq=False)
class CycleRecord:
    cycle: int
    beta: float
    epsilon_audit: float
    avg_distortion_km: float
    mi_nats: float
    ba_iterations: int
    ibu_iterations: int
    ibu_converged: bool
    estimate: Pmf
    cycle_seed: int
    sample_seed: int
    noise_seed: int
    n_samples: int
    # EMD of the estimate the cycle starts from and of the one it produces
    emd_start: Optional[float] = None
    emd_to_truth: Optional[float] = None
    channel: Optional[Channel] = field(default=None, repr=False)
    q: Optional[Pmf] = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class PrivicTrace:
    config: PrivicConfig
    theta0: Pmf
    records: List[CycleRecord]

    @property
    def final_estimate(self) -> Pmf:
        return self.records[-1].estimate

    def emd_series(self) -> List[Optional[float]]:
        return [r.emd_to_truth for r in self.records]

    def table_rows(self, round_index: int) -> List[Dict[str, object]]:
        """One row per cycle N with the EMD of the estimate entering cycle N."""
        return [{'N': r.cycle, 'round': round_index, 'beta': r.beta, 'emd_km': r.emd_start}
                for r in self.records]


def synthesize_channel(theta: Pmf, cfg: PrivicConfig, grid: GridSpace) -> BaResult:
    if cfg.mechanism == MECHANISM_LAPLACE:
        # baseline: the same fixed channel every cycle, no BA steps
        channel = laplace_channel(geo_ind_epsilon(cfg.beta), grid.dist)
        return BaResult(channel, 0, True, avg_distortion(theta, channel, grid.dist),
                        mutual_information(theta, channel), cfg.beta)
    return ba_run(theta, uniform_channel(theta.m), cfg.ba_cfg, grid.dist)


def observe_and_estimate(theta_prev: Pmf, channel: Channel, truth_sampler: TruthSampler,
                         cfg: PrivicConfig, cycle_seed: int) -> Tuple[Pmf, IbuResult, int, int, int]:
    """Draw true cells, obfuscate them with `channel` and run IBU from theta_prev."""
    sample_seed = derive_seed(cycle_seed, SAMPLE_STREAM)
    noise_seed = derive_seed(cycle_seed, NOISE_STREAM)
    true_cells = truth_sampler.draw(cfg.n_per_cycle, sample_seed)
    reports = obfuscate(true_cells, channel, noise_seed)
    q = empirical_pmf(reports, channel.m)
    result = ibu_run(theta_prev, channel, q, cfg.ibu_cfg)
    return q, result, sample_seed, noise_seed, true_cells.n


def privic_cycle(theta_prev: Pmf, truth_sampler: TruthSampler, cfg: PrivicConfig, grid: GridSpace,
                 cycle_seed: int, cycle: int = 1, truth: Optional[Pmf] = None,
                 emd_start: Optional[float] = None) -> Tuple[Pmf, CycleRecord]:
    ba = synthesize_channel(theta_prev, cfg, grid)
    q, ibu, sample_seed, noise_seed, n = observe_and_estimate(theta_prev, ba.channel, truth_sampler, cfg, cycle_seed)
    estimate = ibu.estimate

    emd_to_truth = None
    if truth is not None:
        if emd_start is None:
            emd_start = emd(theta_prev, truth, grid.dist)[0]
        emd_to_truth = emd(estimate, truth, grid.dist)[0]

    record = CycleRecord(
        cycle=cycle,
        beta=cfg.beta,
        epsilon_audit=verify_geo_ind(ba.channel, grid.dist),
        avg_distortion_km=ba.achieved_avg_distortion,
        mi_nats=ba.achieved_mi,
        ba_iterations=ba.iterations_used,
        ibu_iterations=ibu.iterations_used,
        ibu_converged=ibu.converged,
        estimate=estimate,
        cycle_seed=cycle_seed,
        sample_seed=sample_seed,
        noise_seed=noise_seed,
        n_samples=n,
        emd_start=emd_start,
        emd_to_truth=emd_to_truth,
        channel=ba.channel,
        q=q,
    )
    return estimate, record


def privic_run(theta0: Optional[Pmf], truth_sampler: TruthSampler, cfg: PrivicConfig, grid: GridSpace,
               truth: Optional[Pmf] = None) -> PrivicTrace:
    if theta0 is None:
        theta0 = uniform_pmf(grid.m)
    theta = theta0
    emd_start = None
    records = []
    for cycle in range(1, cfg.cycles + 1):
        cycle_seed = derive_seed(cfg.seed, cycle)
        theta, record = privic_cycle(theta, truth_sampler, cfg, grid, cycle_seed,
                                     cycle=cycle, truth=truth, emd_start=emd_start)
        records.append(record)
        emd_start = record.emd_to_truth
        logger.info("PRIVIC beta=%g seed=%d cycle %d/%d: emd=%s", cfg.beta, cfg.seed, cycle, cfg.cycles,
                    'n/a' if record.emd_to_truth is None else f"{record.emd_to_truth:.5f} km")
    return PrivicTrace(cfg, theta0, records)


def median_emd_series(traces: Sequence[PrivicTrace]) -> List[float]:
    """Median over runs of the EMD entering each cycle N, N = 1..cycles."""
    if not traces:
        raise DomainError("no traces to summarize")
    cycles = min(len(t.records) for t in traces)
    series = []
    for index in range(cycles):
        values = [t.records[index].emd_start for t in traces]
        if any(v is None for v in values):
            raise DomainError("EMD series needs runs with a known truth")
        series.append(float(np.median(values)))
    return series


def trend_inversions(series: Sequence[float], start_cycle: int = 2, rel: float = TREND_TOLERANCE) -> int:
    """
    Count cycle-to-cycle increases from start_cycle on that exceed
    rel times the value at start_cycle. Small increases are noise.
    """
    if len(series) < start_cycle:
        return 0
    base = series[start_cycle - 1]
    tail = np.asarray(series[start_cycle - 1:], dtype=float)
    return int(np.count_nonzero(np.diff(tail) > rel * base))
