"""
`profile`: a geometric quantity tabulated over the interior grid.
"""
import logging
from typing import Callable, Dict, Tuple

import click
import numpy as np

from .common import build_run_config, emit, handle_errors, load_base, load_loss, run_options
from ..engine import convex, geom2, geomn
from ..engine.losses import require_proper
from ..utils.errors import DimMismatch
from ..utils.serializers import profile_csv

logger = logging.getLogger(__name__)

BINARY_ONLY = ('curvature', 'weight', 'quotient')
QUANTITIES = BINARY_ONLY + ('pencil_min_eig', 'bayes_risk', 'eta')


def _eta(h, base, points):
    if h.n == 2 and base.name == 'log':
        return geom2.pointwise_mixability(h, points)
    return geomn.pencil_profile(h, points, base)


PROFILES: Dict[str, Callable] = {
    'curvature': lambda h, base, points: geom2.curvature_profile(h, points),
    'weight': lambda h, base, points: geom2.weight_profile(h, points),
    'quotient': lambda h, base, points: geom2.quotient_profile(h, base, points),
    'pencil_min_eig': lambda h, base, points: geomn.pencil_profile(h, points, base),
    'bayes_risk': lambda h, base, points: convex.bayes_risk_profile(h, points)[0],
    'eta': _eta,
}


def compute_profile(h, base, quantity: str, settings) -> Tuple[np.ndarray, np.ndarray]:
    """Grid points and the profile values of `quantity`.

    Raises:
        DimMismatch: For a binary-only quantity on n ≥ 3 outcomes.
    """
    if quantity in BINARY_ONLY and h.n != 2:
        raise DimMismatch(f"{quantity} profiles are binary, loss has n={h.n}")
    if quantity in ('pencil_min_eig', 'quotient', 'eta'):
        require_proper(h, settings)
    points = geomn.grid_points(h.n, settings)
    values = PROFILES[quantity](h, base, points)
    logger.info(f"{quantity} profile of {h.name}: {len(points)} points, min {np.min(values):.6g}")
    return points, np.asarray(values, dtype=float)


@click.command('profile')
@run_options
@click.option('--quantity', required=True, type=click.Choice(QUANTITIES), help="Quantity to tabulate.")
@handle_errors('profile')
def profile_cmd(quantity, **flags):
    """Tabulate a quantity over the grid (CSV by default)."""
    cfg = build_run_config(**flags)
    h = load_loss(cfg)
    base = load_base(cfg)
    points, values = compute_profile(h, base, quantity, cfg.settings)
    result = {
        "loss": h.name,
        "quantity": quantity,
        "points": points.tolist(),
        "values": values.tolist(),
        "min": float(np.min(values)),
        "max": float(np.max(values)),
    }
    lines = [f"{quantity} of {h.name} over {len(points)} points",
             f"min {result['min']!r}, max {result['max']!r}"]
    emit('profile', cfg, result, lines, csv_text=profile_csv(points, values), default_format='csv')
