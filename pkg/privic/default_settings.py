from .settings import BaConfig, DatasetSpec, ExperimentSpec, IbuConfig, MarkovSpec

PARIS_BBOX = (48.8286, 48.8798, 2.2855, 2.3909)
PARIS_GRID = (12, 16)
PARIS_RECORDS = 10_260
PARIS_CYCLE1_EMD_KM = 2.02262

SF_BBOX = (37.7228, 37.7946, -122.5153, -122.3789)
SF_GRID = (17, 24)
SF_RECORDS = 123_108
SF_CYCLE1_EMD_KM = 7.37595

# Beta sweep of the mechanism comparison (epsilon = 2 * beta runs 0.4 .. 10)
COMPARE_BETAS = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 3.0, 4.0, 5.0]
UTILITY_VS_BETA = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0]

DEFAULT_SETTINGS = ExperimentSpec()

PARIS_SETTINGS = ExperimentSpec(
    dataset=DatasetSpec(bbox=PARIS_BBOX, rows=PARIS_GRID[0], cols=PARIS_GRID[1], synthetic='paris', resample=False,
                        name='paris'),
    betas=[0.5, 1.0],
    cycles=15,
    output_dir='results/paris',
    ba=BaConfig(max_iters=8, fixed_count=True),
    ibu=IbuConfig(max_iters=10, fixed_count=True),
)

SF_SETTINGS = ExperimentSpec(
    dataset=DatasetSpec(bbox=SF_BBOX, rows=SF_GRID[0], cols=SF_GRID[1], synthetic='sf', resample=False, name='sf'),
    betas=[0.5, 1.0],
    cycles=8,
    output_dir='results/sf',
    ba=BaConfig(max_iters=5, fixed_count=True),
    ibu=IbuConfig(max_iters=5, fixed_count=True),
)

COMPARE_SETTINGS = ExperimentSpec(betas=COMPARE_BETAS, output_dir='results/compare')

UTILITY_SETTINGS = PARIS_SETTINGS.model_copy(update={'betas': UTILITY_VS_BETA, 'output_dir': 'results/utility'})

MARKOV_SETTINGS = ExperimentSpec(
    betas=[1.0],
    n=50,
    seeds=[0],
    output_dir='results/markov',
    ibu=IbuConfig(max_iters=10, fixed_count=True),
    markov=MarkovSpec(m=2, k=4, trials=2000),
)

BUILTIN_PROFILES = {
    'default': DEFAULT_SETTINGS,
    'paris': PARIS_SETTINGS,
    'sf': SF_SETTINGS,
    'compare': COMPARE_SETTINGS,
    'utility': UTILITY_SETTINGS,
    'markov': MARKOV_SETTINGS,
}
