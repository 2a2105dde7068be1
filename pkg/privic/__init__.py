from .prob import Channel, Pmf, SampleSet
from .geo import GridSpace, build_grid
from .settings import BaConfig, ExperimentSpec, IbuConfig, PrivicConfig
from .privic_loop import PrivicTrace, privic_run
from .results import ExperimentResult
