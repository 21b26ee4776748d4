"""
`decompose` and `slide-check`: the superprediction-set view of mixability.
"""
import logging

import click

from .common import build_run_config, emit, handle_errors, load_base, load_loss, mark, run_options
from ..engine import convex
from ..utils.errors import BadConfig

logger = logging.getLogger(__name__)


@click.command('decompose')
@run_options
@handle_errors('decompose')
def decompose_cmd(**flags):
    """Split the log loss as eta*·loss + residual and check the residual."""
    cfg = build_run_config(**flags)
    h = load_loss(cfg)
    report = convex.decompose_log(h, config=cfg.settings)
    result = {"loss": h.name, "decomposition": report.to_dict()}
    lines = [
        f"log = {report.eta_star:.6g}·{h.name} + residual",
        f"degenerate {mark(report.degenerate)}",
        f"nonnegative {mark(report.nonnegative)}, aligned {mark(report.aligned)}",
        f"min curvature {report.min_curvature:.3g}, semidefinite at {len(report.semidefinite_points)} point(s)",
    ]
    emit('decompose', cfg, result, lines)


@click.command('slide-check')
@run_options
@handle_errors('slide-check')
def slide_check_cmd(**flags):
    """Whether eta·spr(loss) slides freely inside spr(base)."""
    cfg = build_run_config(**flags)
    if cfg.eta is None:
        raise BadConfig("slide-check needs --eta")
    h = load_loss(cfg)
    outer = load_base(cfg)
    verdict = convex.slides_freely(h, outer, cfg.eta, config=cfg.settings)
    result = {"inner": h.name, "outer": outer.name, "verdict": verdict.to_dict(), "residual": None}
    if verdict.slides_freely:
        residual = convex.summand_residual(outer, h, cfg.eta, config=cfg.settings)
        result["residual"] = {"label": residual.label, **residual.checks}
    lines = [
        f"{cfg.eta:g}·spr({h.name}) inside spr({outer.name})",
        f"slides freely {mark(verdict.slides_freely)} (margin {verdict.convexity_margin:.3g}"
        f" at {verdict.worst_point})",
    ]
    emit('slide-check', cfg, result, lines)
