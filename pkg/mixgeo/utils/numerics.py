"""
Numerical helpers: boundary limits, minimizer refinement, symmetric pencils
and interval quadrature.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from .errors import PencilSingular, QuadratureFailure

logger = logging.getLogger(__name__)


def halving_offsets(margin: float, steps: int = 7) -> np.ndarray:
    """Distances ε·2^-k, k = 0..steps-1, from a boundary point."""
    return margin * 2.0 ** -np.arange(steps, dtype=float)


def extrapolate_limit(samples: Sequence[float], growth: float = 0.10, order: int = 3) -> float:
    """Limit of a sequence sampled at halving distances from a boundary.

    The sequence is declared divergent (±inf) when every step grows by more
    than `growth` or when its increments keep the same sign without
    contracting. It is declared to vanish when every step shrinks by more than
    `growth`. Otherwise a Richardson table with first-order leading error is
    built up to `order`.

    Args:
        samples: Values at distances ε, ε/2, ε/4, ...
        growth: Relative growth threshold.
        order: Highest Richardson column.

    Returns:
        The extrapolated limit, possibly infinite.
    """
    f = np.asarray(samples, dtype=float)
    if f.size < 2:
        raise ValueError("need at least two samples")
    if not np.isfinite(f).all():
        finite = f[np.isfinite(f)]
        sign = np.sign(finite[-1]) if finite.size and finite[-1] != 0 else 1.0
        return math.copysign(math.inf, sign)

    mags = np.abs(f)
    if (mags > 0).all():
        ratios = mags[1:] / mags[:-1]
        if (ratios > 1.0 + growth).all():
            return math.copysign(math.inf, f[-1])
        if (ratios < 1.0 - growth).all():
            return 0.0

    deltas = np.diff(f)
    scale = 1e-12 * (1.0 + mags.max())
    if (np.abs(deltas) > scale).all() and (np.sign(deltas) == np.sign(deltas[0])).all():
        contraction = np.abs(deltas[1:]) / np.abs(deltas[:-1])
        if (contraction >= 1.0 - growth).all():
            return math.copysign(math.inf, deltas[-1])

    order = min(order, f.size - 1)
    table = [list(f)]
    for j in range(1, order + 1):
        prev = table[-1]
        factor = 2.0 ** j - 1.0
        table.append([prev[k] + (prev[k] - prev[k - 1]) / factor for k in range(1, len(prev))])
    return float(table[-1][-1])


@dataclass(frozen=True)
class RefinedMinimum:
    """Result of refining a grid minimum."""
    index: int
    t: float
    value: float
    grid_t: float
    grid_value: float
    refined: bool
    at_edge: bool


def refine_minimum(fn: Callable[[float], float], ts: np.ndarray, values: np.ndarray,
                   xtol: float = 1e-10) -> RefinedMinimum:
    """Golden-section refinement around the first grid minimizer.

    Refinement runs only when the neighbours strictly bracket the minimum,
    and is discarded when it leaves the bracketing cell or does not improve
    on the grid value.
    """
    values = np.asarray(values, dtype=float)
    index = int(np.argmin(values))
    grid_t, grid_value = float(ts[index]), float(values[index])
    at_edge = index == 0 or index == len(values) - 1
    if at_edge:
        return RefinedMinimum(index, grid_t, grid_value, grid_t, grid_value, False, True)

    a, b, c = float(ts[index - 1]), grid_t, float(ts[index + 1])
    if not (values[index] < values[index - 1] and values[index] < values[index + 1]):
        return RefinedMinimum(index, grid_t, grid_value, grid_t, grid_value, False, False)
    try:
        result = optimize.minimize_scalar(fn, bracket=(a, b, c), method='golden',
                                          options={'xtol': xtol})
    except ValueError as e:
        logger.debug(f"Golden-section bracket rejected at t={grid_t}: {e}")
        return RefinedMinimum(index, grid_t, grid_value, grid_t, grid_value, False, False)

    moved = abs(result.x - b)
    cell = max(b - a, c - b)
    if not np.isfinite(result.fun) or moved > cell or result.fun > grid_value:
        logger.warning(f"Refinement moved {moved:.3g} from grid minimizer {grid_t}; keeping grid value")
        return RefinedMinimum(index, grid_t, grid_value, grid_t, grid_value, False, False)
    return RefinedMinimum(index, float(result.x), float(result.fun), grid_t, grid_value, True, False)


def pencil_eigenvalues(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Generalized eigenvalues of symmetric pencils (A, B) with B positive definite.

    B = L Lᵀ by Cholesky, then the eigenvalues of L⁻¹ A L⁻ᵀ. Batched over
    the leading axis.

    Returns:
        Eigenvalues sorted ascending, shape (N, m).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        chol = np.linalg.cholesky(b)
    except np.linalg.LinAlgError:
        lowest = np.linalg.eigvalsh(0.5 * (b + np.swapaxes(b, -1, -2)))[..., 0]
        index = int(np.flatnonzero(np.atleast_1d(lowest <= 0.0))[0]) if np.any(lowest <= 0.0) else 0
        raise PencilSingular("reference form is not positive definite", index=index)
    chol_inv = np.linalg.inv(chol)
    reduced = chol_inv @ a @ np.swapaxes(chol_inv, -1, -2)
    reduced = 0.5 * (reduced + np.swapaxes(reduced, -1, -2))
    return np.linalg.eigvalsh(reduced)


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def segment_integrals(fn: Callable[[np.ndarray], np.ndarray], starts, ends,
                      epsabs: float = 1e-13, epsrel: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Signed ∫_{start}^{end} fn for many segments, adapted together.

    fn must accept an array of abscissae, one per segment.

    Returns:
        Tuple (integrals, error estimates), one entry per segment.
    """
    starts = np.atleast_1d(np.asarray(starts, dtype=float))
    widths = np.atleast_1d(np.asarray(ends, dtype=float)) - starts

    def integrand(x):
        return fn(starts + x * widths) * widths

    with np.errstate(all='ignore'):
        integrals, error, info = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel,
                                                    norm='max', full_output=True)
    integrals = np.atleast_1d(integrals)
    if not info.success or not np.isfinite(integrals).all():
        raise QuadratureFailure(f"adaptive quadrature did not converge: {info.message}",
                                error=float(np.max(np.atleast_1d(error))))
    return integrals, np.atleast_1d(error)


def interval_integrals(fn: Callable[[np.ndarray], np.ndarray], knots: np.ndarray,
                       **tolerances) -> Tuple[np.ndarray, np.ndarray]:
    """∫ fn over each consecutive knot interval."""
    knots = np.asarray(knots, dtype=float)
    return segment_integrals(fn, knots[:-1], knots[1:], **tolerances)


def negative_directions(rng: np.random.Generator, count: int, n: int, low: float = 0.05) -> np.ndarray:
    """Random directions in the open negative orthant."""
    return -rng.uniform(low, 1.0, size=(count, n))


def ordered_map(fn: Callable, items: Sequence, threads: int = 1) -> List:
    """Map fn over items with at most `threads` workers, results in input order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
