"""
CSV and JSON writers for experiment outputs.

CSV files are written with pandas and a fixed float format so that re-runs
with the same seeds produce byte-identical files. Column names carry their
units (_km, _nats) unless the file has an explicit units column.
"""
import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel
from tabulate import tabulate

from .geo import GridSpace, grid_summary
from .privic_loop import CycleRecord, PrivicTrace
from .prob import Pmf
from .report_models import CycleReport, GridReport, TraceReport

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_csv(rows: List[Dict[str, object]], path: str, columns: Optional[Sequence[str]] = None) -> str:
    frame = pd.DataFrame(rows, columns=list(columns) if columns else None)
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def write_json(model: BaseModel, path: str) -> str:
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    with open(path, 'w', encoding='utf-8') as f:
        f.write(model.model_dump_json(indent=2))
        f.write('\n')
    logger.info("Wrote %s", path)
    return path


def format_table(rows: List[Dict[str, object]], floatfmt: str = '.5f') -> str:
    if not rows:
        return '(no rows)'
    return tabulate(rows, headers='keys', floatfmt=floatfmt, tablefmt='github')


def pmf_rows(pmf: Pmf, grid: GridSpace) -> List[Dict[str, object]]:
    """One row per cell: index, grid position, centroid and probability."""
    rows = []
    for index, probability in enumerate(pmf.p):
        row, col = grid.cell_rc(index)
        lat, lon = grid.centroid_latlon(index)
        rows.append({'cell': index, 'row': row, 'col': col, 'lat': lat, 'lon': lon,
                     'probability': float(probability)})
    return rows


def heatmap_rows(values: np.ndarray, grid: GridSpace, **labels) -> List[Dict[str, object]]:
    """Channel row laid out on the grid, tagged with `labels` (mechanism, epsilon, ...)."""
    rows = []
    for index, value in enumerate(values):
        row, col = grid.cell_rc(index)
        rows.append({**labels, 'cell': index, 'row': row, 'col': col, 'probability': float(value)})
    return rows


def grid_report(grid: GridSpace) -> GridReport:
    return GridReport(**grid_summary(grid))


def cycle_report(record: CycleRecord) -> CycleReport:
    return CycleReport(
        cycle=record.cycle,
        beta=record.beta,
        epsilon_audit=record.epsilon_audit,
        avg_distortion_km=record.avg_distortion_km,
        mi_nats=record.mi_nats,
        ba_iterations=record.ba_iterations,
        ibu_iterations=record.ibu_iterations,
        ibu_converged=record.ibu_converged,
        emd_start_km=record.emd_start,
        emd_to_truth_km=record.emd_to_truth,
        cycle_seed=record.cycle_seed,
        sample_seed=record.sample_seed,
        noise_seed=record.noise_seed,
        n_samples=record.n_samples,
        estimate=record.estimate.p.tolist(),
    )


def trace_report(trace: PrivicTrace, dataset: str) -> TraceReport:
    cfg = trace.config
    return TraceReport(dataset=dataset, mechanism=cfg.mechanism, beta=cfg.beta, seed=cfg.seed,
                       cycles=cfg.cycles, n_per_cycle=cfg.n_per_cycle, theta0=trace.theta0.p.tolist(),
                       records=[cycle_report(r) for r in trace.records])


def trace_cycle_rows(trace: PrivicTrace, dataset: str) -> List[Dict[str, object]]:
    """Per-cycle channel summary rows for the long-form trace CSV."""
    return [{'dataset': dataset, 'seed': trace.config.seed, 'cycle': r.cycle, 'beta': r.beta,
             'epsilon_audit': r.epsilon_audit, 'avg_distortion_km': r.avg_distortion_km,
             'mi_nats': r.mi_nats, 'emd_start_km': r.emd_start, 'emd_to_truth_km': r.emd_to_truth,
             'ba_iterations': r.ba_iterations, 'ibu_iterations': r.ibu_iterations}
            for r in trace.records]
