"""
Acceptance Suite for PRIVIC

This script runs the end-to-end acceptance checks on the synthetic Paris-like
prior (and, when available, on the Gowalla check-in dump):

1. Geo-indistinguishability audit of BA channels
2. Elastic fixed point of BA, non-elasticity of Laplace
3. BA/IBU duality trace
4. IBU against the MLE oracle
5. EMD against a linear program, EMD metric axioms
6. BA versus Laplace statistical utility
7. PRIVIC convergence trend
8. Gowalla record counts and first-cycle EMD (needs PRIVIC_GOWALLA)
9. Markov-chain suite
10. Rate-distortion monotonicity

Usage:
    # All checks
    python acceptance_suite.py

    # A subset
    python acceptance_suite.py --only 1,2,3

Output:
    - Summary table with measured values and bounds
"""

import argparse
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
from scipy.optimize import linprog

from privic import experiments
from privic.default_settings import COMPARE_SETTINGS, MARKOV_SETTINGS, PARIS_BBOX, PARIS_CYCLE1_EMD_KM, \
    PARIS_GRID, PARIS_RECORDS, PARIS_SETTINGS, SF_BBOX, SF_CYCLE1_EMD_KM, SF_GRID, SF_RECORDS
from privic.estimation import duality_trace, empirical_pmf, ibu_run, mle_oracle
from privic.geo import BoundingBox, build_grid, checkins_to_samples, ingest_checkins
from privic.markov import enumerate_simplex, estimate_transition, hitting_time_check, occupancy_check, \
    stationary_distribution
from privic.mechanisms import ba_run, elastic_residual, geo_ind_epsilon, laplace_channel, rate_distortion_curve, \
    verify_geo_ind
from privic.metrics import emd
from privic.privic_loop import TREND_TOLERANCE, trend_inversions
from privic.prob import Pmf, push_forward, uniform_channel, uniform_pmf
from privic.reports import format_table
from privic.settings import BaConfig, DatasetSpec, IbuConfig
from privic.synthetic import parse_prior_spec

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)
logger = logging.getLogger(__name__)

PRECISE_IBU = IbuConfig(max_iters=200_000, tol=1e-13)
TREND_SEEDS = [0, 1, 2, 3, 4]


@dataclass
class AcceptanceResult:
    """Outcome of one acceptance check."""
    check: int
    name: str
    passed: bool
    measured: str
    bound: str
    duration_seconds: float = 0.0
    skipped: bool = False

    @property
    def status(self) -> str:
        if self.skipped:
            return 'SKIP'
        return 'PASS' if self.passed else 'FAIL'


def paris_grid():
    return build_grid(BoundingBox.of(PARIS_BBOX), *PARIS_GRID)


def paris_prior(grid) -> Pmf:
    return experiments.full_support(parse_prior_spec('paris', grid))


def _random_instance(rng: np.random.Generator, m: int, scale: float):
    points = rng.random((m, 2)) * scale
    diff = points[:, None, :] - points[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    return (dist + dist.T) / 2.0, Pmf.from_weights(rng.random(m) + 0.05)


def check_geo_ind() -> AcceptanceResult:
    grid = paris_grid()
    prior = paris_prior(grid)
    worst = -np.inf
    for beta in (0.5, 1.0, 2.0):
        channel = ba_run(prior, uniform_channel(grid.m), BaConfig(beta=beta), grid.dist).channel
        worst = max(worst, verify_geo_ind(channel, grid.dist) - geo_ind_epsilon(beta))
    return AcceptanceResult(1, 'BA geo-indistinguishability', worst <= 1e-6,
                            f"max(audit - 2 beta) = {worst:.3g}", '<= 1e-6')


def check_elastic() -> AcceptanceResult:
    grid = paris_grid()
    prior = paris_prior(grid)
    ba = ba_run(prior, uniform_channel(grid.m), BaConfig(beta=1.0), grid.dist)
    ba_residual = elastic_residual(ba.channel, prior, 1.0, grid.dist).residual

    square = build_grid(BoundingBox(0.0, 0.02, 0.0, 0.02), 2, 2)
    skewed = Pmf(np.array([0.9, 0.05, 0.03, 0.02]))
    laplace = laplace_channel(1.0, square.dist)
    laplace_residual = elastic_residual(laplace, skewed, 1.0, square.dist).residual

    passed = ba.converged and ba_residual < 1e-6 and laplace_residual > 0.01
    return AcceptanceResult(2, 'Elastic fixed point', passed,
                            f"BA {ba_residual:.3g}, Laplace {laplace_residual:.3g}", 'BA < 1e-6, Laplace > 0.01')


def check_duality() -> AcceptanceResult:
    rng = np.random.default_rng(3)
    worst = 0.0
    for m in (3, 5, 10):
        dist, prior = _random_instance(rng, m, 3.0)
        for beta in (0.5, 1.0, 2.0):
            worst = max(worst, duality_trace(prior, beta, dist, steps=50).max_gap)
    return AcceptanceResult(3, 'BA/IBU duality', worst < 1e-10, f"max gap {worst:.3g}", '< 1e-10')


def check_unique_mle() -> AcceptanceResult:
    rng = np.random.default_rng(4)
    worst = 0.0
    for instance in range(20):
        m = 2 + instance % 5
        dist, prior = _random_instance(rng, m, 5.0)
        channel = ba_run(prior, uniform_channel(m), BaConfig(beta=2.0), dist).channel
        q = push_forward(Pmf.from_weights(rng.random(m) + 0.05), channel)
        oracle = mle_oracle(channel, q).estimate

        peaked = np.full(m, 0.1 / (m - 1))
        peaked[instance % m] = 0.9
        for start in (uniform_pmf(m), Pmf.from_weights(rng.random(m) + 0.05), Pmf(peaked)):
            estimate = ibu_run(start, channel, q, PRECISE_IBU).estimate
            worst = max(worst, float(np.abs(estimate.p - oracle.p).sum()))
    return AcceptanceResult(4, 'IBU reaches the unique MLE', worst < 1e-4, f"max L1 {worst:.3g}", '< 1e-4')


def _transport_lp(a: np.ndarray, b: np.ndarray, dist: np.ndarray) -> float:
    m = a.size
    rows = np.kron(np.eye(m), np.ones((1, m)))
    cols = np.kron(np.ones((1, m)), np.eye(m))
    result = linprog(dist.ravel(), A_eq=np.vstack([rows, cols]), b_eq=np.concatenate([a, b]),
                     bounds=(0, None), method='highs')
    return float(result.fun)


def check_emd() -> AcceptanceResult:
    rng = np.random.default_rng(5)
    lp_gap = 0.0
    for _ in range(200):
        m = int(rng.integers(2, 5))
        dist, a = _random_instance(rng, m, 1.0)
        b = Pmf.from_weights(rng.random(m) + 0.05)
        lp_gap = max(lp_gap, abs(emd(a, b, dist)[0] - _transport_lp(a.p, b.p, dist)))

    grid = build_grid(BoundingBox.of(PARIS_BBOX), 6, 8)
    violations = 0
    for _ in range(200):
        p, q, r = (Pmf.from_weights(rng.random(grid.m)) for _ in range(3))
        pq, qp = emd(p, q, grid.dist)[0], emd(q, p, grid.dist)[0]
        if abs(pq - qp) > 1e-9 or pq > emd(p, r, grid.dist)[0] + emd(r, q, grid.dist)[0] + 1e-9 \
                or emd(p, p, grid.dist)[0] > 1e-12:
            violations += 1
    return AcceptanceResult(5, 'EMD oracle and metric axioms', lp_gap < 1e-9 and violations == 0,
                            f"LP gap {lp_gap:.3g}, violations {violations}", 'gap < 1e-9, 0 violations')


def check_utility_ordering() -> AcceptanceResult:
    low_betas = [0.2, 0.4, 0.6]
    with tempfile.TemporaryDirectory() as tmp:
        spec = COMPARE_SETTINGS.model_copy(update={'betas': low_betas + [5.0], 'output_dir': tmp,
                                                   'dataset': DatasetSpec()})
        rows = experiments.cmd_compare_mechanisms(spec).details

    def median(mechanism: str, beta: float) -> float:
        return float(np.median([r['emd_km'] for r in rows if r['mechanism'] == mechanism and r['beta'] == beta]))

    margins = [median('laplace', b) - median('ba', b) for b in low_betas]
    high_gap = abs(median('ba', 5.0) - median('laplace', 5.0))
    passed = min(margins) > 0 and high_gap < 0.05
    return AcceptanceResult(6, 'BA beats Laplace at high privacy', passed,
                            f"min LAP-BA margin {min(margins):.4f} km, gap at beta=5 {high_gap:.4f} km",
                            'margin > 0, gap < 0.05 km')


def check_privic_trend() -> AcceptanceResult:
    with tempfile.TemporaryDirectory() as tmp:
        spec = PARIS_SETTINGS.model_copy(update={'betas': [1.0], 'seeds': TREND_SEEDS, 'output_dir': tmp,
                                                  'dataset': DatasetSpec()})
        table = experiments.cmd_privic(spec).details

    series = [float(np.median([r['emd_km'] for r in table if r['N'] == cycle]))
              for cycle in range(1, spec.cycles + 1)]
    inversions = trend_inversions(series, start_cycle=2, rel=TREND_TOLERANCE)
    first, second, last = series[0], series[1], series[-1]
    passed = second < 0.25 * first and last < 0.6 * second and inversions <= 1
    return AcceptanceResult(7, 'PRIVIC convergence trend', passed,
                            f"EMD N=1 {first:.4f}, N=2 {second:.4f}, N={spec.cycles} {last:.4f} km, "
                            f"{inversions} inversions",
                            'N=2 < 25% N=1, last < 60% N=2, at most 1 inversion > 5% of N=2')


def check_gowalla() -> AcceptanceResult:
    path = os.getenv('PRIVIC_GOWALLA')
    if not path or not os.path.exists(path):
        logger.warning("Gowalla dump not available (set PRIVIC_GOWALLA); skipping the dataset check")
        return AcceptanceResult(8, 'Gowalla records and first-cycle EMD', True, 'dataset absent', '-', skipped=True)

    measured = []
    passed = True
    for bbox, (rows, cols), records, emd_km, tolerance in (
            (PARIS_BBOX, PARIS_GRID, PARIS_RECORDS, PARIS_CYCLE1_EMD_KM, 0.02),
            (SF_BBOX, SF_GRID, SF_RECORDS, SF_CYCLE1_EMD_KM, 0.05)):
        grid = build_grid(BoundingBox.of(bbox), rows, cols)
        ingested = ingest_checkins(path, grid.bbox)
        truth = empirical_pmf(checkins_to_samples(ingested, grid))
        first = emd(uniform_pmf(grid.m), truth, grid.dist)[0]
        passed = passed and ingested.count == records and abs(first - emd_km) <= tolerance
        measured.append(f"{ingested.count} records, EMD {first:.5f}")
    return AcceptanceResult(8, 'Gowalla records and first-cycle EMD', passed, '; '.join(measured),
                            f"{PARIS_RECORDS}/{PARIS_CYCLE1_EMD_KM}, {SF_RECORDS}/{SF_CYCLE1_EMD_KM}")


def check_markov() -> AcceptanceResult:
    spec = MARKOV_SETTINGS
    params = spec.markov
    seed = spec.seeds[0]
    mesh = enumerate_simplex(params.m, params.k)
    estimate = estimate_transition(mesh, spec.privic_config(spec.betas[0], seed), uniform_pmf(params.m),
                                   params.trials, seed)
    stationary = stationary_distribution(estimate)
    if not stationary.unique:
        return AcceptanceResult(9, 'Markov suite', False, f"{stationary.components} classes", 'irreducible')

    occupancy = occupancy_check(estimate, stationary.psi, params.occupancy_steps, seed + 1)
    hitting = hitting_time_check(estimate, seed + 2, params.excursions, stationary.psi)
    kac = all(row.consistent for row in hitting)
    passed = estimate.positive and stationary.residual < 1e-10 and occupancy.tv < 0.02 and kac
    return AcceptanceResult(9, 'Markov suite', passed,
                            f"min phi {estimate.min_entry:.4f}, residual {stationary.residual:.2g}, "
                            f"TV {occupancy.tv:.4f}, Kac {kac}",
                            'phi > 0, residual < 1e-10, TV < 0.02, Kac within 3 sigma')


def check_trade_off() -> AcceptanceResult:
    grid = paris_grid()
    curve = rate_distortion_curve(paris_prior(grid), grid.dist, [0.1, 0.5, 1.0, 2.0, 5.0])
    distortion = [p.avg_distortion_km for p in curve]
    rate = [p.mi_nats for p in curve]
    passed = all(b <= a + 1e-9 for a, b in zip(distortion, distortion[1:])) and \
        all(b >= a - 1e-9 for a, b in zip(rate, rate[1:]))
    return AcceptanceResult(10, 'Rate-distortion monotonicity', passed,
                            'AvgD ' + ', '.join(f"{d:.3f}" for d in distortion), 'AvgD down, MI up in beta')


CHECKS: Dict[int, Callable[[], AcceptanceResult]] = {
    1: check_geo_ind,
    2: check_elastic,
    3: check_duality,
    4: check_unique_mle,
    5: check_emd,
    6: check_utility_ordering,
    7: check_privic_trend,
    8: check_gowalla,
    9: check_markov,
    10: check_trade_off,
}


def run_check(number: int) -> AcceptanceResult:
    logger.info("Running acceptance check %d: %s", number, CHECKS[number].__name__)
    start_time = time.time()
    result = CHECKS[number]()
    result.duration_seconds = round(time.time() - start_time, 2)
    logger.info("Check %d %s in %.1f s", number, result.status, result.duration_seconds)
    return result


def print_results_table(results: List[AcceptanceResult]):
    rows = [{'#': r.check, 'check': r.name, 'status': r.status, 'measured': r.measured, 'bound': r.bound,
             'seconds': r.duration_seconds} for r in results]
    print(format_table(rows, floatfmt='.2f'))


def run_acceptance(only: Optional[List[int]] = None) -> Tuple[bool, List[AcceptanceResult]]:
    numbers = only or sorted(CHECKS)
    results = [run_check(n) for n in numbers]
    print_results_table(results)
    return all(r.passed for r in results), results


def main():
    parser = argparse.ArgumentParser(
        description="PRIVIC acceptance suite",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    parser.add_argument(
        "--only", type=str, default=None,
        help="Comma-separated check numbers to run, e.g. 1,2,3"
    )
    args = parser.parse_args()

    only = [int(n) for n in args.only.split(',')] if args.only else None
    all_passed, _ = run_acceptance(only)
    sys.exit(0 if all_passed else 1)


if __name__ == "__main__":
    main()
