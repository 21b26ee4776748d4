"""
`verify`: cross-checks between independent computations of the same quantity.

Each check returns a CheckResult with its measured delta. Checks are
independent and run on a bounded thread pool; results keep submission order.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import click
import numpy as np

from .common import build_run_config, emit, handle_errors, load_base, load_loss, run_options
from ..config.config import Config
from ..engine import convex, geom2, geomn
from ..engine.losses import add, is_log_loss, log_loss, require_proper, translate
from ..models.loss import LossHandle
from ..models.reports import CheckResult, MixabilityReport
from ..models.simplex import std_chart_array
from ..utils.errors import MixgeoError, RouteDisagreement
from ..utils.numerics import negative_directions, ordered_map

logger = logging.getLogger(__name__)

LADDER = (0.5, 0.9, 0.99, 1.01, 1.1, 1.5)
DUALITY_TOL = 1e-8
LINK_WEIGHT_TOL = 1e-4
SUPPORT_TOL = 1e-12
INVERSE_TOL = 1e-8
SAMPLE_POINTS = 5


@dataclass
class VerifyContext:
    h: LossHandle
    base: LossHandle
    settings: Config
    mixability: Optional[MixabilityReport]
    route_error: Optional[str]
    eta: Optional[float]

    @property
    def log_base(self) -> bool:
        return is_log_loss(self.base)

    def sample_points(self, count: int = SAMPLE_POINTS) -> np.ndarray:
        points = geomn.grid_points(self.h.n, self.settings)
        return points[np.linspace(0, len(points) - 1, count + 2).astype(int)[1:-1]]


def _relative(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.abs(a), np.abs(b))
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(scale > 0.0, np.abs(a - b) / scale, 0.0)


def _exp_verdict(ctx: VerifyContext, eta: float) -> bool:
    if ctx.h.n == 2:
        return geom2.exp_projection_curvature(ctx.h, eta, config=ctx.settings).convex
    return geomn.exp_projection_convexity(ctx.h, eta, config=ctx.settings).convex


# --- checks ---

def check_quotient_weight_duality(ctx: VerifyContext) -> CheckResult:
    ts = geom2.binary_grid(ctx.settings)
    quotient = geom2.quotient_profile(ctx.h, ctx.base, ts)
    ratio = geom2.weight_profile(ctx.base.std_view(), ts) / geom2.weight_profile(ctx.h.std_view(), ts)
    delta = float(np.max(_relative(quotient, ratio)))
    return CheckResult('quotient_weight_duality', delta <= DUALITY_TOL, delta)


def check_weight_bayes_identity(ctx: VerifyContext) -> CheckResult:
    ts = geom2.binary_grid(ctx.settings).reshape(-1, 1)
    w = geom2.weight_profile(ctx.h.std_view(), ts)
    second = convex.bayes_risk_profile(ctx.h, ts)[1][:, 0, 0]
    delta = float(np.max(np.abs(w + second) / (1.0 + np.abs(w))))
    return CheckResult('weight_bayes_identity', delta <= DUALITY_TOL, delta)


def check_mixability_routes(ctx: VerifyContext) -> CheckResult:
    if ctx.mixability is None:
        return CheckResult('mixability_routes', False, math.inf, ctx.route_error or '')
    deltas = ctx.mixability.deltas
    delta = max(deltas.values()) if deltas else 0.0
    detail = ', '.join(f"{name}={value!r}" for name, value in ctx.mixability.routes.items())
    return CheckResult('mixability_routes', delta <= ctx.settings.TOL_ROUTE, delta, detail)


def check_equivalence_ladder(ctx: VerifyContext) -> CheckResult:
    """Pencil, bridge and (against log) E_η verdicts agree along a ladder of η."""
    if ctx.mixability is None or not ctx.mixability.mixable:
        return CheckResult('equivalence_ladder', False, math.inf, "no positive eta*")
    eta_star = ctx.mixability.eta_star
    disagreements = []
    for factor in LADDER:
        eta = factor * eta_star
        expected = factor < 1.0
        verdicts = {'bridge': convex.slides_freely(ctx.h, ctx.base, eta, config=ctx.settings).slides_freely}
        if ctx.log_base:
            verdicts['exp_projection'] = _exp_verdict(ctx, eta)
        for name, verdict in verdicts.items():
            if verdict != expected:
                disagreements.append(f"{name}@{factor}")
    detail = ', '.join(disagreements) or f"eta* = {eta_star!r}"
    return CheckResult('equivalence_ladder', not disagreements, float(len(disagreements)), detail)


def _eta_star_against_log(ctx: VerifyContext) -> Optional[float]:
    if ctx.log_base:
        return None if ctx.mixability is None else ctx.mixability.eta_star
    base = log_loss(ctx.h.n)
    if ctx.h.n == 2:
        return geom2.mixability_constant_binary(ctx.h, base, config=ctx.settings).eta_star
    return geomn.mixability_constant_multi(ctx.h, base, config=ctx.settings).eta_star


def check_exp_projection_at_eta(ctx: VerifyContext) -> CheckResult:
    """E_η convexity is a statement about log, so η is compared with η* against log."""
    eta_star = _eta_star_against_log(ctx)
    if eta_star is None:
        return CheckResult('exp_projection_at_eta', False, math.inf, ctx.route_error or '')
    expected = ctx.eta <= eta_star * (1.0 + ctx.settings.TOL_ROUTE)
    convex_ = _exp_verdict(ctx, ctx.eta)
    detail = f"eta={ctx.eta!r} eta*={eta_star!r} convex={convex_}"
    return CheckResult('exp_projection_at_eta', convex_ == expected, ctx.eta - eta_star, detail)


def check_canonical_link_weight(ctx: VerifyContext) -> CheckResult:
    link = geom2.canonical_link(ctx.h, config=ctx.settings)
    ts = geom2.binary_grid(ctx.settings)
    ts = ts[(ts >= 0.01) & (ts <= 0.99)][::10]
    v = link.forward(ts)
    w = geom2.weight_profile(geom2.composite(ctx.h.std_view(), link), v)
    delta = float(np.max(np.abs(w - 1.0)))
    return CheckResult('canonical_link_weight', delta <= LINK_WEIGHT_TOL, delta, link.name)


def check_sff_routes(ctx: VerifyContext) -> CheckResult:
    delta = 0.0
    for s in ctx.sample_points():
        k_std = geomn.sff(ctx.h, s, 'std', config=ctx.settings).principal_curvatures
        k_graph = geomn.sff(ctx.h, s, 'graph', config=ctx.settings).principal_curvatures
        delta = max(delta, float(np.max(_relative(k_std, k_graph))))
    return CheckResult('sff_routes', delta <= ctx.settings.TOL_SPECTRUM, delta)


def check_support_laws(ctx: VerifyContext) -> CheckResult:
    """Homogeneity, additivity and translation covariance of support functions."""
    rng = np.random.default_rng(ctx.settings.SEED)
    n = ctx.h.n
    u = negative_directions(rng, ctx.settings.RANDOM_DIRECTIONS, n)
    c = rng.uniform(0.0, 1.0, size=n)
    field = convex.SupportField.of(ctx.h)
    sigma = field(u)
    scale = 1.0 + np.abs(sigma)
    errors = {
        'homogeneity': max(float(np.max(np.abs(field(k * u) - k * sigma) / (k * scale))) for k in (0.5, 2.0)),
        'additivity': float(np.max(np.abs(convex.SupportField.of(add(ctx.h, log_loss(n)))(u)
                                          - sigma - convex.SupportField.of(log_loss(n))(u)) / scale)),
        'translation': float(np.max(np.abs(convex.SupportField.of(translate(ctx.h, c))(u)
                                           - sigma - u @ c) / scale)),
    }
    delta = max(errors.values())
    detail = ', '.join(f"{k}={v:.3g}" for k, v in errors.items())
    return CheckResult('support_laws', delta <= SUPPORT_TOL, delta, detail)


def check_inverse_loss(ctx: VerifyContext) -> CheckResult:
    delta = 0.0
    for t in ctx.sample_points():
        p = convex.inverse_loss(ctx.h, t, config=ctx.settings).as_array()
        delta = max(delta, float(np.max(np.abs(p - std_chart_array(t)[0]))))
    return CheckResult('inverse_loss_roundtrip', delta <= INVERSE_TOL, delta)


def _guarded(check: Callable[[VerifyContext], CheckResult], ctx: VerifyContext) -> CheckResult:
    name = check.__name__.replace('check_', '')
    try:
        return check(ctx)
    except MixgeoError as e:
        logger.warning(f"Check {name} raised {type(e).__name__}: {e.message}")
        return CheckResult(name, False, math.inf, f"{type(e).__name__}: {e.message}")


def checks_for(ctx: VerifyContext) -> List[Callable[[VerifyContext], CheckResult]]:
    checks = [check_mixability_routes, check_equivalence_ladder]
    if ctx.h.n == 2:
        checks = [check_quotient_weight_duality, check_weight_bayes_identity] + checks
        checks.append(check_canonical_link_weight)
    else:
        checks.insert(0, check_sff_routes)
    if ctx.eta is not None:
        checks.append(check_exp_projection_at_eta)
    checks += [check_support_laws, check_inverse_loss]
    return checks


def run_checks(h: LossHandle, base: LossHandle, settings: Config, eta: Optional[float] = None) -> List[CheckResult]:
    """Run every check that applies to h.

    Raises:
        NotProper: When h or base fails check_proper.
    """
    require_proper(h, settings)
    require_proper(base, settings)
    mixability, route_error = None, None
    try:
        if h.n == 2:
            mixability = geom2.mixability_constant_binary(h, base, config=settings)
        else:
            mixability = geomn.mixability_constant_multi(h, base, config=settings)
    except RouteDisagreement as e:
        route_error = e.message
    ctx = VerifyContext(h, base, settings, mixability, route_error, eta)
    checks = checks_for(ctx)
    logger.info(f"Running {len(checks)} checks on {h.name} with {settings.THREADS} thread(s)")
    return ordered_map(lambda check: _guarded(check, ctx), checks, settings.THREADS)


@click.command('verify')
@run_options
@handle_errors('verify')
def verify_cmd(**flags):
    """Consistency checks between independent routes; exit 1 if any fails."""
    cfg = build_run_config(**flags)
    h = load_loss(cfg)
    base = load_base(cfg)
    results = run_checks(h, base, cfg.settings, cfg.eta)
    passed = all(r.passed for r in results)
    result = {"loss": h.name, "base": base.name, "passed": passed,
              "checks": [dict(r.to_dict(), status=r.status) for r in results]}
    lines = [f"{r.status:4}  {r.name}  delta={r.delta:.3g}  {r.detail}".rstrip() for r in results]
    emit('verify', cfg, result, lines)
    if not passed:
        failed = [r.name for r in results if not r.passed]
        logger.error(f"verify failed for {h.name}: {', '.join(failed)}")
        click.get_current_context().exit(1)
