"""
JSON report models for channels, estimates, traces and Markov analyses.
"""
from typing import List, Optional

from pydantic import BaseModel, Field


class CycleReport(BaseModel):
    cycle: int
    beta: float
    epsilon_audit: float
    avg_distortion_km: float
    mi_nats: float
    ba_iterations: int
    ibu_iterations: int
    ibu_converged: bool
    emd_start_km: Optional[float] = None
    emd_to_truth_km: Optional[float] = None
    cycle_seed: int
    sample_seed: int
    noise_seed: int
    n_samples: int
    estimate: List[float]


class TraceReport(BaseModel):
    """A full PRIVIC run; per-cycle epsilon only, no composition across cycles."""

    dataset: str
    mechanism: str
    beta: float
    seed: int
    cycles: int
    n_per_cycle: int
    theta0: List[float]
    records: List[CycleReport]


class GridReport(BaseModel):
    rows: int
    cols: int
    cell_count: int
    bbox: List[float]
    cell_km: List[float] = Field(..., description="Cell height and width in km")


class IngestReport(BaseModel):
    path: str
    records: int
    skipped: int
    outside_bbox: int
    grid: GridReport


class MarkovReport(BaseModel):
    """Monte-Carlo analysis of the PRIVIC chain; statistical evidence only."""

    evidence: str = Field(default='monte-carlo', description="How the transition matrix was obtained")
    m: int
    k: int
    beta: float
    n_per_cycle: int
    trials_per_state: int
    seed: int
    states: List[List[float]]
    labels: List[str]
    phi: List[List[float]]
    phi_min_entry: float
    communicating_classes: int
    psi_unique: bool
    psi: Optional[List[float]] = None
    psi_residual: Optional[float] = None
    occupancy_tv: Optional[float] = None
    kac_consistent: Optional[bool] = None
