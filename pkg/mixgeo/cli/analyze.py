"""
`analyze`: one-shot report of properness, fairness, η*, fundamentality and
the slide-freely verdict at η*.
"""
import logging
from typing import Any, Dict, List

import click

from .common import build_run_config, emit, handle_errors, load_base, load_loss, mark, run_options
from ..engine import convex, geom2, geomn
from ..engine.losses import check_proper, fairness_check
from ..utils.errors import NotProper

logger = logging.getLogger(__name__)


def analyze_loss(h, base, settings) -> Dict[str, Any]:
    """Every analysis of `analyze` for one loss, as a plain dictionary.

    Raises:
        NotProper: With the failing grid point as witness.
    """
    verdict = check_proper(h, config=settings)
    if not verdict.proper:
        raise NotProper(f"{h.name} is not proper ({verdict.failure})",
                        witness=verdict.witness, failure=verdict.failure)
    result: Dict[str, Any] = {"loss": h.to_dict(), "base": base.name, "properness": verdict.to_dict()}

    fair = None
    if h.n == 2:
        fairness = fairness_check(h, settings)
        fair = fairness.fair
        result["fairness"] = fairness.to_dict()
        mixability = geom2.mixability_constant_binary(h, base, config=settings)
    else:
        mixability = geomn.mixability_constant_multi(h, base, config=settings)
    result["mixability"] = mixability.to_dict()

    if h.n == 2 and fair:
        result["fundamentality"] = geom2.fundamentality(h, base, config=settings).to_dict()
    else:
        result["fundamentality"] = None

    if mixability.mixable:
        slide = convex.slides_freely(h, base, mixability.eta_star, config=settings)
        result["slides_freely_at_eta_star"] = slide.to_dict()
    else:
        result["slides_freely_at_eta_star"] = None
    return result


def summary_lines(result: Dict[str, Any], tol_route: float) -> List[str]:
    mixability = result["mixability"]
    routes = len(mixability["routes"])
    agree = all(d <= tol_route for d in mixability["deltas"].values())
    lines = [
        f"loss: {result['loss']['name']} (n={result['loss']['n']}, base {result['base']})",
        f"proper {mark(result['properness']['proper'])}",
    ]
    if "fairness" in result:
        lines.append(f"fair {mark(result['fairness']['fair'])}")
    lines.append(f"eta* = {mixability['eta_star']:.6g} ({routes} routes{' agree' if agree else ''})"
                 f" at {mixability['argmin']}")
    fundamentality = result["fundamentality"]
    if fundamentality is not None:
        lines.append(f"fundamental {mark(fundamentality['fundamental'])}"
                     f" (B1={fundamentality['B1']:.6g}, B2={fundamentality['B2']:.6g})")
    slide = result["slides_freely_at_eta_star"]
    if slide is not None:
        lines.append(f"slides freely at eta* {mark(slide['slides_freely'])}"
                     f" (margin {slide['convexity_margin']:.3g})")
    return lines


@click.command('analyze')
@run_options
@handle_errors('analyze')
def analyze_cmd(**flags):
    """Properness, fairness, mixability, fundamentality and sliding freely."""
    cfg = build_run_config(**flags)
    h = load_loss(cfg)
    base = load_base(cfg)
    logger.info(f"Analyzing {h.name} against {base.name}")
    result = analyze_loss(h, base, cfg.settings)
    emit('analyze', cfg, result, summary_lines(result, cfg.settings.TOL_ROUTE))
