"""
Experiment commands behind run_privic.py.

Each command takes a validated ExperimentSpec, writes its report files into
spec.output_dir and returns an ExperimentResult. Seeded runs are independent
and may be fanned out over a thread pool; results are always gathered in
seed order so the written files do not depend on scheduling.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from .constants import MECHANISM_BA, MECHANISM_LAPLACE, UNIT_KM, UNIT_NATS, UNIT_NONE, UNIT_PER_KM
from .errors import DataError, DomainError
from .estimation import empirical_pmf, ibu_run
from .geo import BoundingBox, GridSpace, build_grid, checkins_to_samples, ingest_checkins, plant_island
from .markov import enumerate_simplex, estimate_transition, hitting_time_check, occupancy_check, \
    stationary_distribution
from .mechanisms import ba_run, elastic_residual, geo_ind_epsilon, laplace_channel, rate_distortion_curve, \
    verify_geo_ind
from .metrics import avg_distortion, mutual_information, statistical_utility
from .privic_loop import PrivicTrace, median_emd_series, privic_run, trend_inversions
from .prob import Channel, Pmf, derive_seed, obfuscate, uniform_channel, uniform_pmf
from .report_models import IngestReport, MarkovReport
from .reports import format_table, grid_report, heatmap_rows, pmf_rows, trace_cycle_rows, trace_report, \
    write_csv, write_json
from .results import ExperimentResult
from .samplers import DatasetSampler, PmfSampler, TruthSampler
from .settings import BaConfig, ExperimentSpec, IbuConfig
from .synthetic import parse_prior_spec

logger = logging.getLogger(__name__)

T = TypeVar('T')

# Weight of the uniform component mixed into priors with empty cells before BA
SUPPORT_FLOOR = 1e-6


def _fan_out(tasks: Sequence[Callable[[], T]], workers: int) -> List[T]:
    if workers <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [future.result() for future in futures]


def _output_path(spec: ExperimentSpec, filename: str) -> str:
    return os.path.join(spec.output_dir, filename)


def _beta_label(beta: float) -> str:
    return f"{beta:g}"


def build_space(spec: ExperimentSpec) -> GridSpace:
    return build_grid(BoundingBox.of(spec.dataset.bbox), spec.dataset.rows, spec.dataset.cols)


def _synthetic(spec: ExperimentSpec, grid: GridSpace) -> Tuple[TruthSampler, Pmf, str]:
    text = spec.dataset.synthetic or 'paris'
    prior = parse_prior_spec(text, grid)
    return PmfSampler(prior), prior, f"synthetic-{text.split(':')[0]}"


def load_truth(spec: ExperimentSpec, grid: GridSpace, fallback: bool = False) -> Tuple[TruthSampler, Pmf, str]:
    """
    Source of true locations for a run: the ingested dataset when a path is
    configured, otherwise the synthetic prior. With `fallback`, an unreadable
    or empty dataset falls back to the synthetic prior with a warning.
    """
    path = spec.dataset.path
    if not path:
        return _synthetic(spec, grid)
    try:
        if not os.path.exists(path):
            raise DataError(f"dataset not found: {path}")
        ingested = ingest_checkins(path, grid.bbox)
        if ingested.count == 0:
            raise DataError(f"no check-ins of {path} fall inside {grid.bbox.as_tuple()}")
    except DataError as e:
        if not fallback:
            raise
        logger.warning("%s; falling back to the synthetic prior", e)
        return _synthetic(spec, grid)
    samples = checkins_to_samples(ingested, grid)
    return DatasetSampler(samples, resample=spec.dataset.resample), empirical_pmf(samples), spec.dataset.name


def full_support(pmf: Pmf) -> Pmf:
    """pmf itself, or a mixture with a tiny uniform component when some cell is empty."""
    if pmf.full_support:
        return pmf
    logger.info("Prior has %d empty cells; mixing in %.0e uniform mass for BA", int((pmf.p == 0).sum()),
                SUPPORT_FLOOR)
    return Pmf((1.0 - SUPPORT_FLOOR) * pmf.p + SUPPORT_FLOOR / pmf.m)


def kernel_scale(mechanism: str, beta: float) -> float:
    """Exponent scale of a mechanism's distance kernel: beta for BA, epsilon = 2 beta for Laplace."""
    return beta if mechanism == MECHANISM_BA else geo_ind_epsilon(beta)


def limiting_ba(spec: ExperimentSpec, beta: float) -> BaConfig:
    """BA settings that run to tolerance, whatever the loop iteration count is."""
    if spec.ba.fixed_count:
        return BaConfig(beta=beta, max_iters=spec.limit_ba_iters)
    return spec.ba.model_copy(update={'beta': beta, 'max_iters': max(spec.ba.max_iters, spec.limit_ba_iters)})


def converging_ibu(spec: ExperimentSpec) -> IbuConfig:
    return IbuConfig() if spec.ibu.fixed_count else spec.ibu


def cmd_ingest(spec: ExperimentSpec) -> ExperimentResult:
    """Ingest a check-in dump, export the grid and the empirical distribution."""
    if not spec.dataset.path:
        raise DataError("ingest needs a dataset path")
    grid = build_space(spec)
    ingested = ingest_checkins(spec.dataset.path, grid.bbox)
    if ingested.count == 0:
        raise DataError(f"no check-ins of {spec.dataset.path} fall inside {grid.bbox.as_tuple()}")
    samples = checkins_to_samples(ingested, grid)
    pmf = empirical_pmf(samples)

    name = spec.dataset.name
    summary_path = write_json(IngestReport(path=spec.dataset.path, grid=grid_report(grid), **ingested.summary()),
                              _output_path(spec, f"ingest_{name}.json"))
    pmf_path = write_csv(pmf_rows(pmf, grid), _output_path(spec, f"ingest_{name}_pmf.csv"))
    summary = {**ingested.summary(), 'empty_cells': int((pmf.p == 0).sum()), 'cell_count': grid.m}
    return ExperimentResult('ingest', [summary_path, pmf_path], summary)


def _estimate_utility(truth: Pmf, sampler: TruthSampler, channel: Channel, spec: ExperimentSpec,
                      grid: GridSpace, sample_seed: int, noise_seed: int) -> float:
    true_cells = sampler.draw(spec.n, sample_seed)
    q = empirical_pmf(obfuscate(true_cells, channel, noise_seed))
    estimate = ibu_run(uniform_pmf(grid.m), channel, q, converging_ibu(spec)).estimate
    return statistical_utility(estimate, truth, grid.dist)


def cmd_compare_mechanisms(spec: ExperimentSpec) -> ExperimentResult:
    """
    Statistical utility of BA against the Laplace baseline at matched
    geo-indistinguishability (epsilon = 2 beta), per beta and seed.
    """
    grid = build_space(spec)
    sampler, truth, dataset = load_truth(spec, grid, fallback=True)
    prior = full_support(truth)

    channels: Dict[Tuple[str, float], Channel] = {}
    audits: Dict[Tuple[str, float], float] = {}
    for beta in spec.betas:
        epsilon = geo_ind_epsilon(beta)
        ba = ba_run(prior, uniform_channel(grid.m), limiting_ba(spec, beta), grid.dist)
        channels[MECHANISM_BA, beta] = ba.channel
        channels[MECHANISM_LAPLACE, beta] = laplace_channel(epsilon, grid.dist)
        for mechanism in (MECHANISM_BA, MECHANISM_LAPLACE):
            audits[mechanism, beta] = verify_geo_ind(channels[mechanism, beta], grid.dist)

    def run_seed(seed: int) -> List[Dict[str, object]]:
        rows = []
        for beta_index, beta in enumerate(spec.betas):
            # both mechanisms obfuscate the same true batch
            sample_seed = derive_seed(seed, beta_index, 0)
            for mechanism_index, mechanism in enumerate((MECHANISM_BA, MECHANISM_LAPLACE)):
                emd_km = _estimate_utility(truth, sampler, channels[mechanism, beta], spec, grid,
                                           sample_seed, derive_seed(seed, beta_index, mechanism_index + 1))
                rows.append({'dataset': dataset, 'mechanism': mechanism, 'beta': beta,
                             'epsilon': geo_ind_epsilon(beta), 'epsilon_audit': audits[mechanism, beta],
                             'seed': seed, 'n': spec.n, 'emd_km': emd_km})
        logger.info("Compared mechanisms for seed %d", seed)
        return rows

    per_seed = _fan_out([lambda s=seed: run_seed(s) for seed in spec.seeds], spec.workers)
    rows = [row for seed_rows in per_seed for row in seed_rows]
    path = write_csv(rows, _output_path(spec, f"compare_{dataset}.csv"))

    summary_rows = []
    for beta in spec.betas:
        medians = {m: float(np.median([r['emd_km'] for r in rows if r['mechanism'] == m and r['beta'] == beta]))
                   for m in (MECHANISM_BA, MECHANISM_LAPLACE)}
        summary_rows.append({'beta': beta, 'median_emd_km_ba': medians[MECHANISM_BA],
                             'median_emd_km_laplace': medians[MECHANISM_LAPLACE]})
    logger.info("Median EMD per beta:\n%s", format_table(summary_rows))
    summary = {'dataset': dataset, 'rows': len(rows), 'betas': len(spec.betas), 'seeds': len(spec.seeds)}
    return ExperimentResult('compare', [path], summary, rows)


def default_cells(prior: Pmf, grid: GridSpace) -> Tuple[int, int]:
    """
    Vulnerable cell: the south-west cell one island radius inside the border.
    Strong cell: the most probable cell of the prior.
    """
    vulnerable = grid.cell_index(min(1, grid.rows - 1), min(1, grid.cols - 1))
    strong = int(np.argmax(prior.p))
    if strong == vulnerable:
        strong = int(np.argsort(prior.p)[-2]) if grid.m > 1 else vulnerable
    return vulnerable, strong


def cmd_elastic_demo(spec: ExperimentSpec, vulnerable: Optional[int] = None,
                     strong: Optional[int] = None) -> ExperimentResult:
    """
    Plant an island at the vulnerable cell and dump the obfuscation rows of the
    vulnerable and the strong cell for BA and Laplace at each epsilon.
    """
    grid = build_space(spec)
    _, truth, dataset = load_truth(spec, grid, fallback=True)
    default_vulnerable, default_strong = default_cells(truth, grid)
    vulnerable = spec.elastic.vulnerable if vulnerable is None else vulnerable
    strong = spec.elastic.strong if strong is None else strong
    vulnerable = default_vulnerable if vulnerable is None else vulnerable
    strong = default_strong if strong is None else strong
    for cell in (vulnerable, strong):
        if not 0 <= cell < grid.m:
            raise DomainError(f"cell {cell} outside [0, {grid.m})")

    island = plant_island(truth, grid, vulnerable, spec.elastic.radius_cells)
    prior = full_support(island)

    rows = []
    details = []
    for epsilon in spec.elastic.epsilons:
        beta = epsilon / 2.0
        ba = ba_run(prior, uniform_channel(grid.m), limiting_ba(spec, beta), grid.dist)
        if not ba.converged:
            logger.warning("BA at epsilon=%g stopped after %d iterations without converging", epsilon,
                           ba.iterations_used)
        channels = {MECHANISM_BA: (ba.channel, ba.converged, ba.iterations_used),
                    MECHANISM_LAPLACE: (laplace_channel(epsilon, grid.dist), True, 0)}
        for mechanism, (channel, converged, iterations) in channels.items():
            residual = elastic_residual(channel, prior, kernel_scale(mechanism, beta), grid.dist)
            for point, cell in (('A', vulnerable), ('B', strong)):
                row = channel.c[cell]
                rows.extend(heatmap_rows(row, grid, mechanism=mechanism, epsilon=epsilon, point=point,
                                         source_cell=cell))
                details.append({'mechanism': mechanism, 'epsilon': epsilon, 'point': point, 'source_cell': cell,
                                'argmax_cell': int(np.argmax(row)), 'self_probability': float(row[cell]),
                                'row_sum': float(row.sum()), 'elastic_residual': residual.residual,
                                'converged': converged, 'ba_iterations': iterations})

    heatmap_path = write_csv(rows, _output_path(spec, f"elastic_{dataset}.csv"))
    prior_path = write_csv(pmf_rows(island, grid), _output_path(spec, f"elastic_{dataset}_prior.csv"))
    logger.info("Elastic demo rows:\n%s", format_table(details, floatfmt='.4g'))
    summary = {'dataset': dataset, 'vulnerable': vulnerable, 'strong': strong,
               'epsilons': len(spec.elastic.epsilons)}
    return ExperimentResult('elastic', [heatmap_path, prior_path], summary, details)


def cmd_privic(spec: ExperimentSpec) -> ExperimentResult:
    """Run PRIVIC for every (beta, seed) and write per-run traces plus the cycle table."""
    grid = build_space(spec)
    sampler, truth, dataset = load_truth(spec, grid)

    # round index is the position in spec.seeds, so repeated seeds keep distinct rounds
    runs = [(beta, round_index, seed)
            for beta in spec.betas for round_index, seed in enumerate(spec.seeds, start=1)]
    tasks = [lambda b=beta, s=seed: privic_run(None, sampler, spec.privic_config(b, s), grid, truth)
             for beta, _, seed in runs]
    traces: List[PrivicTrace] = _fan_out(tasks, spec.workers)

    files = []
    table = []
    long_rows = []
    utility = []
    prefix = 'privic' if spec.mechanism == MECHANISM_BA else f"{spec.mechanism}_ibu"
    for (beta, round_index, seed), trace in zip(runs, traces):
        stem = f"{prefix}_{dataset}_beta{_beta_label(beta)}_round{round_index}_seed{seed}"
        rows = trace.table_rows(round_index)
        files.append(write_csv(rows, _output_path(spec, f"{stem}.csv"), columns=['N', 'round', 'beta', 'emd_km']))
        files.append(write_json(trace_report(trace, dataset), _output_path(spec, f"{stem}.json")))
        table.extend(rows)
        long_rows.extend(trace_cycle_rows(trace, dataset))
        utility.append({'beta': beta, 'round': round_index, 'seed': seed, 'cycles': len(trace.records),
                        'final_emd_km': trace.records[-1].emd_to_truth})

    files.append(write_csv(table, _output_path(spec, f"{prefix}_{dataset}_table.csv"),
                           columns=['N', 'round', 'beta', 'emd_km']))
    files.append(write_csv(long_rows, _output_path(spec, f"{prefix}_{dataset}_cycles.csv")))
    files.append(write_csv(utility, _output_path(spec, f"{prefix}_{dataset}_utility.csv")))

    summary: Dict[str, object] = {'dataset': dataset, 'mechanism': spec.mechanism, 'runs': len(runs),
                                  'cycles': spec.cycles}
    for beta in spec.betas:
        finals = [u['final_emd_km'] for u in utility if u['beta'] == beta]
        summary[f"median_final_emd_km_beta_{_beta_label(beta)}"] = float(np.median(finals))
        series = median_emd_series([t for (b, _, _), t in zip(runs, traces) if b == beta])
        summary[f"trend_inversions_beta_{_beta_label(beta)}"] = trend_inversions(series)
    logger.info("Final EMD per run:\n%s", format_table(utility))
    return ExperimentResult('privic', files, summary, table)


def cmd_markov(spec: ExperimentSpec) -> ExperimentResult:
    """Mesh, Monte-Carlo transition matrix, stationary distribution and return-time checks."""
    params = spec.markov
    mesh = enumerate_simplex(params.m, params.k)
    truth = Pmf.from_weights(params.truth) if params.truth else uniform_pmf(params.m)
    seed = spec.seeds[0]
    beta = spec.betas[0]
    cfg = spec.privic_config(beta, seed)

    estimate = estimate_transition(mesh, cfg, truth, params.trials, seed, workers=spec.workers)
    stationary = stationary_distribution(estimate)
    report = MarkovReport(
        m=mesh.m, k=mesh.k, beta=beta, n_per_cycle=spec.n, trials_per_state=params.trials, seed=seed,
        states=mesh.states.tolist(), labels=[mesh.label(i) for i in range(mesh.K)],
        phi=estimate.phi.tolist(), phi_min_entry=estimate.min_entry,
        communicating_classes=stationary.components, psi_unique=stationary.unique,
    )

    files = []
    details = []
    if stationary.unique:
        occupancy = occupancy_check(estimate, stationary.psi, params.occupancy_steps, derive_seed(seed, 1))
        hitting = hitting_time_check(estimate, derive_seed(seed, 2), params.excursions, stationary.psi)
        details = [{'state': row.state, 'label': mesh.label(row.state), 'psi': row.psi,
                    'inv_expected_tau': row.inv_expected_tau, 'sigma': row.sigma,
                    'expected_tau': row.expected_tau, 'consistent': row.consistent} for row in hitting]
        report = report.model_copy(update={
            'psi': stationary.psi.p.tolist(), 'psi_residual': stationary.residual,
            'occupancy_tv': occupancy.tv, 'kac_consistent': all(row.consistent for row in hitting)})
        files.append(write_csv(details, _output_path(spec, 'markov_hitting.csv')))
    else:
        logger.warning("Estimated chain is reducible; skipping occupancy and return-time checks")
    files.insert(0, write_json(report, _output_path(spec, 'markov.json')))

    summary = {'states': mesh.K, 'phi_min_entry': estimate.min_entry, 'psi_unique': stationary.unique,
               'occupancy_tv': report.occupancy_tv, 'kac_consistent': report.kac_consistent}
    return ExperimentResult('markov', files, summary, details)


def cmd_metrics(spec: ExperimentSpec) -> ExperimentResult:
    """MI, average distortion, epsilon audit and elastic residual of BA and Laplace per beta."""
    grid = build_space(spec)
    _, truth, dataset = load_truth(spec, grid, fallback=True)
    prior = full_support(truth)

    rows = []

    def emit(metric: str, value: float, units: str, mechanism: str, beta: float):
        rows.append({'metric': metric, 'value': value, 'units': units, 'mechanism': mechanism, 'beta': beta,
                     'cycle': None, 'dataset': dataset, 'seed': None})

    for beta in spec.betas:
        epsilon = geo_ind_epsilon(beta)
        ba = ba_run(prior, uniform_channel(grid.m), limiting_ba(spec, beta), grid.dist)
        channels = {MECHANISM_BA: ba.channel, MECHANISM_LAPLACE: laplace_channel(epsilon, grid.dist)}
        for mechanism, channel in channels.items():
            emit('mutual_information', mutual_information(prior, channel), UNIT_NATS, mechanism, beta)
            emit('avg_distortion', avg_distortion(prior, channel, grid.dist), UNIT_KM, mechanism, beta)
            emit('epsilon_audit', verify_geo_ind(channel, grid.dist), UNIT_PER_KM, mechanism, beta)
            residual = elastic_residual(channel, prior, kernel_scale(mechanism, beta), grid.dist).residual
            emit('elastic_residual', residual, UNIT_NONE, mechanism, beta)

    metrics_path = write_csv(rows, _output_path(spec, f"metrics_{dataset}.csv"))
    curve = rate_distortion_curve(prior, grid.dist, spec.betas, limiting_ba(spec, spec.betas[0]))
    curve_rows = [{'beta': p.beta, 'avg_distortion_km': p.avg_distortion_km, 'mi_nats': p.mi_nats,
                   'iterations': p.iterations, 'converged': p.converged} for p in curve]
    curve_path = write_csv(curve_rows, _output_path(spec, f"rate_distortion_{dataset}.csv"))
    logger.info("Rate-distortion points:\n%s", format_table(curve_rows))
    return ExperimentResult('metrics', [metrics_path, curve_path], {'dataset': dataset, 'rows': len(rows)}, rows)
