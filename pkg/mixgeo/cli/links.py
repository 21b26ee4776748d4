"""
`canonical-link`: solve ψ′ = w and tabulate the link on the binary grid.
"""
import logging

import click
import numpy as np

from .common import build_run_config, emit, handle_errors, load_loss, mark, run_options
from ..engine import geom2
from ..utils.serializers import profile_csv

logger = logging.getLogger(__name__)


@click.command('canonical-link')
@run_options
@handle_errors('canonical-link')
def canonical_link_cmd(**flags):
    """Canonical link of a binary proper loss, with its validation verdict."""
    cfg = build_run_config(**flags)
    h = load_loss(cfg)
    link = geom2.canonical_link(h, config=cfg.settings)
    verdict = geom2.validate_link(h, link, config=cfg.settings)
    ts = geom2.binary_grid(cfg.settings)
    psi = link.forward(ts)
    result = {
        "loss": h.name,
        "link": link.to_dict(),
        "validation": verdict.to_dict(),
        "t": ts.tolist(),
        "psi": psi.tolist(),
    }
    lines = [
        f"canonical link of {h.name}: psi(1/2) = 0",
        f"range ({link.valid_range[0]:.6g}, {link.valid_range[1]:.6g}) over {len(link.knots_t)} knots",
        f"valid {mark(verdict.valid)} (ratio error {verdict.max_ratio_error:.3g})",
        f"psi at t=0.25, 0.75: {float(link.forward(np.array([0.25]))[0]):.6g},"
        f" {float(link.forward(np.array([0.75]))[0]):.6g}",
    ]
    emit('canonical-link', cfg, result, lines, csv_text=profile_csv(ts, psi))
