"""
Configuration models for channel synthesis, estimation and experiments.

All models are pydantic models so that profile files, --config files and
command-line overrides are validated the same way.
"""
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .constants import MECHANISM_BA


class BaConfig(BaseModel):
    """Blahut-Arimoto iteration settings."""
    model_config = ConfigDict(frozen=True)

    beta: float = Field(default=1.0, ge=0.0, description="Loss parameter in 1/km")
    max_iters: int = Field(default=500, ge=1, description="Iteration cap")
    tol: float = Field(default=1e-10, gt=0.0, description="Max row L1 change between successive channels")
    fixed_count: bool = Field(default=False, description="Run exactly max_iters steps, ignoring tol")


class IbuConfig(BaseModel):
    """Iterative Bayesian update settings."""
    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(default=1000, ge=1, description="Iteration cap")
    tol: float = Field(default=1e-10, gt=0.0, description="L1 change between successive estimates")
    fixed_count: bool = Field(default=False, description="Run exactly max_iters steps, ignoring tol")
    record_trajectory: bool = Field(default=False, description="Keep every intermediate estimate")


class PrivicConfig(BaseModel):
    """Inputs of one PRIVIC run."""
    model_config = ConfigDict(frozen=True)

    beta: float = Field(default=1.0, ge=0.0)
    cycles: int = Field(default=15, ge=1, description="Number of cycles N")
    n_per_cycle: int = Field(default=10_000, ge=1, description="Fresh samples drawn per cycle")
    ba_cfg: BaConfig = Field(default_factory=BaConfig)
    ibu_cfg: IbuConfig = Field(default_factory=IbuConfig)
    seed: int = Field(default=0, ge=0)
    mechanism: Literal['ba', 'laplace'] = Field(
        default=MECHANISM_BA,
        description="Channel of every cycle: BA from the current estimate, or the fixed Laplace baseline")

    @model_validator(mode='before')
    @classmethod
    def _sync_beta(cls, data):
        # The loop's beta is authoritative for BA
        if not isinstance(data, dict):
            return data
        data = dict(data)
        beta = data.get('beta', 1.0)
        ba_cfg = data.get('ba_cfg')
        if ba_cfg is None:
            data['ba_cfg'] = BaConfig(beta=beta)
        elif isinstance(ba_cfg, BaConfig):
            data['ba_cfg'] = ba_cfg.model_copy(update={'beta': beta})
        else:
            data['ba_cfg'] = {**ba_cfg, 'beta': beta}
        return data


class DatasetSpec(BaseModel):
    """Where the true locations come from and how the map is discretized."""

    path: Optional[str] = Field(default=None, description="Gowalla-format check-in file")
    bbox: Tuple[float, float, float, float] = Field(
        default=(48.8286, 48.8798, 2.2855, 2.3909),
        description="lat_min, lat_max, lon_min, lon_max in degrees")
    rows: int = Field(default=12, ge=1, description="Cells along latitude")
    cols: int = Field(default=16, ge=1, description="Cells along longitude")
    synthetic: Optional[str] = Field(default='paris', description="Synthetic prior spec used when no path is given")
    resample: bool = Field(default=True, description="Resample ingested check-ins each cycle")
    name: str = Field(default='paris')

    @field_validator('bbox')
    @classmethod
    def _check_bbox(cls, value):
        lat_min, lat_max, lon_min, lon_max = value
        if not (lat_min < lat_max and lon_min < lon_max):
            raise ValueError("bbox must satisfy lat_min < lat_max and lon_min < lon_max")
        return value


class ElasticSpec(BaseModel):
    vulnerable: Optional[int] = Field(default=None, ge=0, description="Cell index of the planted island")
    strong: Optional[int] = Field(default=None, ge=0, description="Cell index of the dense location")
    radius_cells: int = Field(default=1, ge=1)
    epsilons: List[float] = Field(default_factory=lambda: [0.4, 1.2, 1.6, 2.0])


class MarkovSpec(BaseModel):
    m: int = Field(default=2, ge=1)
    k: int = Field(default=4, ge=1)
    trials: int = Field(default=2000, ge=1)
    excursions: int = Field(default=10_000, ge=1)
    occupancy_steps: int = Field(default=100_000, ge=1)
    truth: Optional[List[float]] = Field(default=None, description="True PMF; uniform when omitted")


class ExperimentSpec(BaseModel):
    """A complete, declarative experiment description."""

    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    mechanism: Literal['ba', 'laplace'] = MECHANISM_BA
    betas: List[float] = Field(default_factory=lambda: [0.5, 1.0], min_length=1)
    cycles: int = Field(default=15, ge=1)
    n: int = Field(default=10_000, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    output_dir: str = Field(default='results')
    ba: BaConfig = Field(default_factory=BaConfig)
    limit_ba_iters: int = Field(default=20_000, ge=1,
                                description="BA iteration cap for the runs that go to tolerance (compare, elastic)")
    ibu: IbuConfig = Field(default_factory=IbuConfig)
    elastic: ElasticSpec = Field(default_factory=ElasticSpec)
    markov: MarkovSpec = Field(default_factory=MarkovSpec)
    workers: int = Field(default=1, ge=1)

    @field_validator('betas')
    @classmethod
    def _check_betas(cls, value):
        if any(b < 0 for b in value):
            raise ValueError("betas must be non-negative")
        return value

    def privic_config(self, beta: float, seed: int) -> PrivicConfig:
        return PrivicConfig(beta=beta, cycles=self.cycles, n_per_cycle=self.n,
                            ba_cfg=self.ba, ibu_cfg=self.ibu, seed=seed, mechanism=self.mechanism)
