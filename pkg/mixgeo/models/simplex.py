"""
Simplex points, the standard chart, interior grids and the projection Π.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Sequence, Tuple

import numpy as np

from ..utils.errors import BadConfig, OutOfDomain

logger = logging.getLogger(__name__)

SUM_TOL = 1e-12


@dataclass(frozen=True)
class SimplexPoint:
    """A probability vector on n outcomes."""
    coords: Tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        object.__setattr__(self, 'coords', coords)
        if len(coords) < 2:
            raise OutOfDomain("a simplex point needs at least two coordinates", coords=coords)
        if any(not np.isfinite(c) or c < 0.0 for c in coords):
            raise OutOfDomain("simplex coordinates must be finite and nonnegative", coords=coords)
        if abs(sum(coords) - 1.0) > SUM_TOL:
            raise OutOfDomain("simplex coordinates must sum to 1", coords=coords, sum=sum(coords))

    @property
    def n(self) -> int:
        return len(self.coords)

    def is_interior(self, margin: float = 0.0) -> bool:
        return all(c >= margin for c in self.coords) and all(c > 0.0 for c in self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {"coords": list(self.coords)}

    def __repr__(self):
        return f"<SimplexPoint {self.coords}>"


@dataclass(frozen=True)
class ChartPoint:
    """Coordinates t of the standard chart domain, t_i > 0 and Σt_i < 1."""
    t: Tuple[float, ...]
    n: int

    def __post_init__(self):
        t = tuple(float(x) for x in np.atleast_1d(self.t))
        object.__setattr__(self, 't', t)
        if self.n < 2 or len(t) != self.n - 1:
            raise OutOfDomain(f"chart point for n={self.n} needs {self.n - 1} coordinates", t=t)
        if any(not np.isfinite(x) or x <= 0.0 for x in t) or sum(t) >= 1.0:
            raise OutOfDomain("chart point outside the open chart domain", t=t)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.t, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {"t": list(self.t), "n": self.n}

    def __repr__(self):
        return f"<ChartPoint n={self.n} t={self.t}>"


def std_chart(t: ChartPoint) -> SimplexPoint:
    """Φ_std(t) = (t_1, ..., t_{n-1}, 1 - Σt_i)."""
    if not isinstance(t, ChartPoint):
        raise OutOfDomain("std_chart expects a ChartPoint")
    return SimplexPoint(t.t + (1.0 - sum(t.t),))


def chart_inverse(p: SimplexPoint) -> ChartPoint:
    """Inverse of the standard chart: drop the last coordinate."""
    return ChartPoint(p.coords[:-1], p.n)


def std_chart_array(points: np.ndarray) -> np.ndarray:
    """Vectorized Φ_std on an (N, n-1) array, returning (N, n)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    last = 1.0 - points.sum(axis=1, keepdims=True)
    return np.hstack([points, last])


def check_interior(points: np.ndarray) -> None:
    """Raise OutOfDomain on the first point outside the open chart domain."""
    points = np.atleast_2d(points)
    bad = (points <= 0.0).any(axis=1) | (points.sum(axis=1) >= 1.0) | ~np.isfinite(points).all(axis=1)
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        raise OutOfDomain("point outside the open chart domain",
                          index=index, point=points[index].tolist())


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    # lexicographic over the leading entries
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


def lattice(n: int, resolution: int, margin: float) -> np.ndarray:
    """Interior grid as an (N, n-1) array of chart coordinates.

    Args:
        n: Number of outcomes.
        resolution: Points per axis, including both ends.
        margin: Smallest allowed simplex coordinate ε.

    Returns:
        Chart coordinates in lexicographic order of the lattice indices.
    """
    if n < 2:
        raise BadConfig(f"outcome count must be at least 2, got {n}")
    if resolution < 3:
        raise BadConfig(f"resolution must be at least 3, got {resolution}")
    if not (0.0 < margin < 1.0 / (2 * n)):
        raise BadConfig(f"margin must lie in (0, {1.0 / (2 * n)}), got {margin}")

    m = resolution - 1
    step = (1.0 - n * margin) / m
    if n == 2:
        k = np.arange(resolution, dtype=float)
        return (margin + k * step).reshape(-1, 1)

    indices = np.array(list(_compositions(m, n)), dtype=float)
    points = margin + indices[:, :-1] * step
    logger.debug(f"lattice n={n} resolution={resolution} margin={margin}: {len(points)} points")
    return points


def interior_grid(n: int, resolution: int, margin: float) -> List[ChartPoint]:
    """Interior grid of the chart domain as ChartPoints (see `lattice`)."""
    return [ChartPoint(tuple(row), n) for row in lattice(n, resolution, margin)]


def project_pi(y: Sequence[float]) -> np.ndarray:
    """Π: drop the last coordinate."""
    y = np.asarray(y, dtype=float)
    return y[..., :-1].copy()
