from abc import ABC, abstractmethod

from .errors import DomainError
from .estimation import empirical_pmf
from .prob import Pmf, SampleSet, make_rng, sample


class TruthSampler(ABC):
    '''
    Black-box source of true locations.
    The PRIVIC loop only ever asks for a batch of cells; subclasses decide
    where the cells come from.
    '''

    @property
    @abstractmethod
    def m(self) -> int:
        pass

    @abstractmethod
    def draw(self, n: int, seed: int) -> SampleSet:
        """
        Draw a batch of true cells.

        Args:
            n: Requested batch size
            seed: Seed of this batch

        Returns:
            SampleSet over the m cells
        """
        pass

    @abstractmethod
    def truth(self) -> Pmf:
        """Distribution the batches are drawn from, used for EMD reporting."""
        pass


class PmfSampler(TruthSampler):
    """I.i.d. draws from a known (synthetic) PMF."""

    def __init__(self, pmf: Pmf):
        self.pmf = pmf

    @property
    def m(self) -> int:
        return self.pmf.m

    def draw(self, n: int, seed: int) -> SampleSet:
        return sample(self.pmf, n, seed)

    def truth(self) -> Pmf:
        return self.pmf

    def __repr__(self) -> str:
        return f"PmfSampler(m={self.m})"


class DatasetSampler(TruthSampler):
    """
    Ingested check-ins. With resample=True every batch is n draws with
    replacement from the dataset; with resample=False every batch is the
    whole dataset and n is ignored.
    """

    def __init__(self, samples: SampleSet, resample: bool = True):
        if samples.n == 0:
            raise DomainError("dataset sampler needs at least one sample")
        self.samples = samples
        self.resample = resample
        self._truth = empirical_pmf(samples)

    @property
    def m(self) -> int:
        return self.samples.m

    def draw(self, n: int, seed: int) -> SampleSet:
        if not self.resample:
            return SampleSet(self.samples.indices, self.m, seed=seed, source='dataset')
        picks = make_rng(seed).integers(0, self.samples.n, size=n)
        return SampleSet(self.samples.indices[picks], self.m, seed=seed, source='resampled')

    def truth(self) -> Pmf:
        return self._truth

    def __repr__(self) -> str:
        return f"DatasetSampler(n={self.samples.n}, m={self.m}, resample={self.resample})"
