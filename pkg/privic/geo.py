"""
Discrete location space: bounding boxes, rectangular grids and check-in ingestion.

Coordinates are projected to planar kilometres with an equirectangular
projection about the bounding-box centre (longitudes scaled by the cosine of
the mid latitude). At city scale the error against great-circle distances is
well below 0.1%.
"""
import csv
import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterator, Union

import numpy as np
import pandas as pd

from .constants import EARTH_RADIUS_KM
from .errors import DataError, DomainError
from .prob import Pmf, SampleSet

logger = logging.getLogger(__name__)

KM_PER_DEGREE = EARTH_RADIUS_KM * math.pi / 180.0

CHECKIN_COLUMNS = ['user_id', 'timestamp', 'lat', 'lon', 'poi_id']


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise DomainError(f"invalid bounding box {self.as_tuple()}")

    @classmethod
    def of(cls, values) -> 'BoundingBox':
        lat_min, lat_max, lon_min, lon_max = (float(v) for v in values)
        return cls(lat_min, lat_max, lon_min, lon_max)

    def as_tuple(self):
        return (self.lat_min, self.lat_max, self.lon_min, self.lon_max)

    @property
    def mid_lat(self) -> float:
        return (self.lat_min + self.lat_max) / 2.0

    @property
    def mid_lon(self) -> float:
        return (self.lon_min + self.lon_max) / 2.0

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max

    def to_km(self, lat, lon):
        """Equirectangular projection about the box centre; accepts scalars or arrays."""
        x = (np.asarray(lon, dtype=float) - self.mid_lon) * KM_PER_DEGREE * math.cos(math.radians(self.mid_lat))
        y = (np.asarray(lat, dtype=float) - self.mid_lat) * KM_PER_DEGREE
        return x, y

    @property
    def width_km(self) -> float:
        return (self.lon_max - self.lon_min) * KM_PER_DEGREE * math.cos(math.radians(self.mid_lat))

    @property
    def height_km(self) -> float:
        return (self.lat_max - self.lat_min) * KM_PER_DEGREE


@dataclass(frozen=True, eq=False)
class GridSpace:
    """
    Rectangular grid over a bounding box.

    Cells are indexed row-major; row 0 is the southern-most row and column 0
    the western-most column. `dist` holds Euclidean centroid distances in km.
    """
    bbox: BoundingBox
    rows: int
    cols: int
    lat_edges: np.ndarray
    lon_edges: np.ndarray
    centroids: np.ndarray
    dist: np.ndarray

    @property
    def m(self) -> int:
        return self.rows * self.cols

    @property
    def cell_km(self):
        """(height, width) of one cell in km."""
        return self.bbox.height_km / self.rows, self.bbox.width_km / self.cols

    def cell_index(self, row: int, col: int) -> int:
        return row * self.cols + col

    def cell_rc(self, index: int):
        if not 0 <= index < self.m:
            raise DomainError(f"cell {index} outside [0, {self.m})")
        return divmod(index, self.cols)

    def centroid_latlon(self, index: int):
        row, col = self.cell_rc(index)
        lat = (self.lat_edges[row] + self.lat_edges[row + 1]) / 2.0
        lon = (self.lon_edges[col] + self.lon_edges[col + 1]) / 2.0
        return lat, lon


@dataclass(frozen=True)
class CheckinRecord:
    user_id: str
    timestamp: str
    lat: float
    lon: float
    poi_id: str


@dataclass(frozen=True, eq=False)
class IngestResult:
    """Check-ins kept inside the bounding box, in file order."""
    frame: pd.DataFrame
    skipped: int
    outside: int

    @property
    def count(self) -> int:
        return len(self.frame)

    def records(self) -> Iterator[CheckinRecord]:
        for row in self.frame.itertuples(index=False):
            yield CheckinRecord(row.user_id, row.timestamp, float(row.lat), float(row.lon), row.poi_id)

    def summary(self) -> Dict[str, int]:
        return {'records': self.count, 'skipped': self.skipped, 'outside_bbox': self.outside}


def _read(path: Union[str, os.PathLike], bad_lines: list) -> pd.DataFrame:
    def on_bad_line(fields):
        bad_lines.append(fields)
        return None

    try:
        return pd.read_csv(path, sep='\t', header=None, names=CHECKIN_COLUMNS, dtype=str,
                           engine='python', on_bad_lines=on_bad_line, quoting=csv.QUOTE_NONE,
                           keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=CHECKIN_COLUMNS)
    except OSError as e:
        raise DataError(f"cannot read check-in file {path}: {e}") from e


def ingest_checkins(path, bbox: BoundingBox) -> IngestResult:
    """
    Read a tab-separated Gowalla dump (user, timestamp, lat, lon, poi) and keep
    the records strictly inside `bbox`. Malformed rows are skipped and counted.
    """
    bad_lines = []
    frame = _read(path, bad_lines)
    if frame.empty:
        logger.info("No check-ins read from %s", path)
        return IngestResult(pd.DataFrame(columns=CHECKIN_COLUMNS), len(bad_lines), 0)

    lat = pd.to_numeric(frame['lat'], errors='coerce')
    lon = pd.to_numeric(frame['lon'], errors='coerce')
    well_formed = np.isfinite(lat) & np.isfinite(lon) & frame['poi_id'].notna()
    skipped = len(bad_lines) + int((~well_formed).sum())

    inside = (well_formed
              & (lat > bbox.lat_min) & (lat < bbox.lat_max)
              & (lon > bbox.lon_min) & (lon < bbox.lon_max))
    outside = int(well_formed.sum() - inside.sum())

    kept = frame.loc[inside, CHECKIN_COLUMNS].copy()
    kept['lat'] = lat[inside].astype(float)
    kept['lon'] = lon[inside].astype(float)
    kept = kept.reset_index(drop=True)

    if skipped:
        logger.warning("Skipped %d malformed rows in %s", skipped, path)
    logger.info("Ingested %d check-ins inside %s (%d outside)", len(kept), bbox.as_tuple(), outside)
    return IngestResult(kept, skipped, outside)


def build_grid(bbox: BoundingBox, rows: int, cols: int) -> GridSpace:
    """Equal rectangular cells; distances between cell centroids in km."""
    if rows < 1 or cols < 1:
        raise DomainError("rows and cols must be at least 1")
    lat_edges = np.linspace(bbox.lat_min, bbox.lat_max, rows + 1)
    lon_edges = np.linspace(bbox.lon_min, bbox.lon_max, cols + 1)
    lat_centres = (lat_edges[:-1] + lat_edges[1:]) / 2.0
    lon_centres = (lon_edges[:-1] + lon_edges[1:]) / 2.0

    lat_grid, lon_grid = np.meshgrid(lat_centres, lon_centres, indexing='ij')
    x, y = bbox.to_km(lat_grid.ravel(), lon_grid.ravel())
    centroids = np.column_stack([x, y])

    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)

    for array in (lat_edges, lon_edges, centroids, dist):
        array.setflags(write=False)
    return GridSpace(bbox, rows, cols, lat_edges, lon_edges, centroids, dist)


def _axis_index(edges: np.ndarray, values) -> np.ndarray:
    # Cells are (low, high] with the first cell closed: a point on an interior
    # boundary belongs to the lower-index cell
    index = np.searchsorted(edges, values, side='left') - 1
    return np.clip(index, 0, edges.size - 2)


def locate(grid: GridSpace, lat: float, lon: float) -> int:
    """
    Row-major index of the cell enclosing (lat, lon).

    Cells are half-open (low, high] along each axis, except the first which is
    closed, so a point on a shared edge goes to the lower-index cell and the
    south-west corner of the box maps to cell 0.
    """
    if not grid.bbox.contains(lat, lon):
        raise DomainError(f"point ({lat}, {lon}) outside bounding box {grid.bbox.as_tuple()}")
    row = int(_axis_index(grid.lat_edges, lat))
    col = int(_axis_index(grid.lon_edges, lon))
    return grid.cell_index(row, col)


def locate_many(grid: GridSpace, lat, lon) -> np.ndarray:
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    b = grid.bbox
    if np.any((lat < b.lat_min) | (lat > b.lat_max) | (lon < b.lon_min) | (lon > b.lon_max)):
        raise DomainError("some points lie outside the bounding box")
    return _axis_index(grid.lat_edges, lat) * grid.cols + _axis_index(grid.lon_edges, lon)


def checkins_to_samples(ingested: IngestResult, grid: GridSpace) -> SampleSet:
    indices = locate_many(grid, ingested.frame['lat'].to_numpy(), ingested.frame['lon'].to_numpy())
    return SampleSet(indices, grid.m, seed=None, source='ingested')


def plant_island(pmf: Pmf, grid: GridSpace, target: int, radius_cells: int = 1) -> Pmf:
    """
    Move all mass within Chebyshev distance `radius_cells` of `target` onto
    `target`, leaving every other cell untouched.
    """
    if pmf.m != grid.m:
        raise DomainError(f"PMF over {pmf.m} cells, grid has {grid.m}")
    if radius_cells < 1:
        raise DomainError("radius_cells must be at least 1")
    row, col = grid.cell_rc(target)

    p = pmf.p.copy()
    r0, r1 = max(0, row - radius_cells), min(grid.rows, row + radius_cells + 1)
    c0, c1 = max(0, col - radius_cells), min(grid.cols, col + radius_cells + 1)
    block = p.reshape(grid.rows, grid.cols)[r0:r1, c0:c1]
    moved = block.sum() - p[target]
    block[...] = 0.0
    p[target] = pmf.p[target] + moved
    return Pmf(p)


def grid_summary(grid: GridSpace) -> Dict[str, object]:
    height, width = grid.cell_km
    return {
        'rows': grid.rows,
        'cols': grid.cols,
        'cell_count': grid.m,
        'bbox': list(grid.bbox.as_tuple()),
        'cell_km': [height, width],
    }


def line_grid(m: int, spacing_km: float = 1.0) -> GridSpace:
    """One row of m cells along the equator, centroids `spacing_km` apart."""
    if spacing_km <= 0:
        raise DomainError("spacing_km must be positive")
    half_height = spacing_km / KM_PER_DEGREE / 2.0
    bbox = BoundingBox(-half_height, half_height, 0.0, m * spacing_km / KM_PER_DEGREE)
    return build_grid(bbox, 1, m)
