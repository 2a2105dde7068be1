"""
Synthetic location priors used when no check-in dump is available.

A prior is a mixture of isotropic Gaussian bumps evaluated on cell indices
(row, col), so a bump's sigma is measured in cells.
"""
from typing import List, NamedTuple

import numpy as np

from .errors import ConfigError
from .geo import GridSpace
from .prob import Pmf, uniform_pmf


class Bump(NamedTuple):
    row: float
    col: float
    sigma: float
    weight: float


# Presets in grid fractions: (row, col, sigma as a fraction of the shorter side, weight).
# The south-west quadrant stays sparse so an island can be planted there.
_PRESETS = {
    'paris': [(0.55, 0.50, 0.14, 0.50), (0.75, 0.78, 0.10, 0.30), (0.40, 0.22, 0.08, 0.20)],
    'sf': [(0.70, 0.80, 0.12, 0.55), (0.45, 0.62, 0.10, 0.30), (0.75, 0.30, 0.08, 0.15)],
}


def gaussian_mixture_pmf(grid: GridSpace, bumps: List[Bump]) -> Pmf:
    if not bumps:
        raise ConfigError("a mixture needs at least one bump")
    rows, cols = np.meshgrid(np.arange(grid.rows), np.arange(grid.cols), indexing='ij')
    weights = np.zeros(grid.m)
    for bump in bumps:
        if bump.sigma <= 0 or bump.weight < 0:
            raise ConfigError(f"invalid bump {bump}")
        sq = (rows - bump.row) ** 2 + (cols - bump.col) ** 2
        kernel = np.exp(-sq / (2.0 * bump.sigma ** 2)).ravel()
        weights += bump.weight * kernel / kernel.sum()
    return Pmf.from_weights(weights)


def preset_bumps(name: str, grid: GridSpace) -> List[Bump]:
    if name not in _PRESETS:
        raise ConfigError(f"unknown synthetic preset '{name}'")
    short_side = min(grid.rows, grid.cols)
    return [Bump(r * (grid.rows - 1), c * (grid.cols - 1), max(s * short_side, 0.5), w)
            for r, c, s, w in _PRESETS[name]]


def parse_prior_spec(text: str, grid: GridSpace) -> Pmf:
    """
    Build a prior from a spec string:

        uniform | paris | sf | mixture:row,col,sigma,weight;row,col,sigma,weight;...
    """
    text = (text or '').strip().lower()
    if text == 'uniform':
        return uniform_pmf(grid.m)
    if text in _PRESETS:
        return gaussian_mixture_pmf(grid, preset_bumps(text, grid))
    if text.startswith('mixture:'):
        bumps = []
        for part in filter(None, text[len('mixture:'):].split(';')):
            try:
                row, col, sigma, weight = (float(v) for v in part.split(','))
            except ValueError as e:
                raise ConfigError(f"malformed mixture bump '{part}'") from e
            bumps.append(Bump(row, col, sigma, weight))
        return gaussian_mixture_pmf(grid, bumps)
    raise ConfigError(f"unknown prior spec '{text}'")
