"""
Differential geometry of binary loss curves.

A binary loss traces the curve t ↦ ℓ̃(t) in the plane. Everything here is
computed from exact jets: the signed curvature κ⁺ w.r.t. the normal
pointing into the nonnegative orthant, the weight w = |ℓ̃₁′/Φ₂|, curvature
quotients against a base loss, the mixability constant, boundary limits of
the quotient (fundamentality) and links.
"""
import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from .losses import fairness_check, is_log_loss, log_loss, require_proper, risk_hessians
from ..config.config import Config, get_config
from ..models.link import LinkFunction
from ..models.loss import CompositeLoss, LossHandle, as_points
from ..models.reports import (CurvatureSample, ExpCurvatureVerdict, FundamentalityReport, LinkVerdict,
                              MixabilityReport, QuotientSample, WeightSample)
from ..models.simplex import lattice
from ..utils.errors import (BadParams, DegenerateVelocity, DimMismatch, EvalError, NonMonotoneLink,
                            NotFair, NotProperHere, QuadratureFailure, RouteDisagreement)
from ..utils.numerics import (extrapolate_limit, halving_offsets, interval_integrals, refine_minimum,
                              segment_integrals)

logger = logging.getLogger(__name__)

MIN_SPEED = 1e-12
ROUNDTRIP_TOL = 1e-8


def _binary(h: LossHandle) -> None:
    if h.n != 2:
        raise DimMismatch(f"binary geometry needs n=2, got n={h.n}")


def binary_grid(config: Config) -> np.ndarray:
    """Standard-chart t values of the configured binary grid."""
    return lattice(2, config.BINARY_RESOLUTION, config.MARGIN)[:, 0]


# --- Curvature ---

def _curvature_arrays(h: LossHandle, points) -> Dict[str, np.ndarray]:
    points = as_points(points, 1)
    jets = h.jets(points)
    d1 = jets.grad[:, :, 0]
    d2 = jets.hess[:, :, 0, 0]
    speed = np.hypot(d1[:, 0], d1[:, 1])
    if np.any(speed < MIN_SPEED):
        index = int(np.flatnonzero(speed < MIN_SPEED)[0])
        raise DegenerateVelocity(f"{h.name} has a stationary point", index=index,
                                 t=float(points[index, 0]))
    kappa_c = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed ** 3
    normal_c = np.stack([-d1[:, 1], d1[:, 0]], axis=1) / speed[:, None]
    # flip toward the orthant: sign of ⟨n_c, (1, 1)⟩
    side = np.where(normal_c.sum(axis=1) < 0.0, -1.0, 1.0)
    return {
        "t": points[:, 0],
        "point": jets.value,
        "normal": normal_c * side[:, None],
        "kappa_plus": kappa_c * side,
        "kappa_c": kappa_c,
    }


def curvature_plus(h: LossHandle, t) -> CurvatureSample:
    """Signed curvature of the loss curve at chart coordinate t.

    Raises:
        DegenerateVelocity: If ‖ℓ̃′(t)‖ vanishes.
    """
    _binary(h)
    arrays = _curvature_arrays(h, t)
    return CurvatureSample(
        t=float(arrays["t"][0]),
        point=tuple(float(x) for x in arrays["point"][0]),
        normal=tuple(float(x) for x in arrays["normal"][0]),
        kappa_plus=float(arrays["kappa_plus"][0]),
        kappa_c=float(arrays["kappa_c"][0]),
    )


def curvature_profile(h: LossHandle, points) -> np.ndarray:
    _binary(h)
    return _curvature_arrays(h, points)["kappa_plus"]


# --- Weights ---

def _weight_arrays(h: LossHandle, points) -> Tuple[np.ndarray, np.ndarray]:
    points = as_points(points, 1)
    d1 = h.jets(points).grad[:, :, 0]
    phi = h.chart.frame(points).phi
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.abs(d1[:, 0] / phi[:, 1]), np.abs(d1[:, 1] / phi[:, 0])


def _weight_consistent(w: np.ndarray, check: np.ndarray, tol: float) -> np.ndarray:
    return np.abs(w - check) <= tol * np.maximum(np.abs(w), np.abs(check))


def weight(h: LossHandle, t, chart: Optional[LinkFunction] = None,
           config: Optional[Config] = None) -> WeightSample:
    """Weight of a binary loss at t, in the handle's chart or after reparametrizing by `chart`.

    Raises:
        NotProperHere: When |ℓ̃₁′/Φ₂| and |ℓ̃₂′/Φ₁| disagree.
    """
    _binary(h)
    cfg = config or get_config()
    if chart is not None:
        h = composite(h.std_view(), chart)
    w, check = _weight_arrays(h, t)
    if not _weight_consistent(w, check, cfg.TOL_WEIGHT)[0]:
        raise NotProperHere(f"{h.name} violates the first-order properness identity",
                            t=float(as_points(t, 1)[0, 0]), w=float(w[0]), w_check=float(check[0]))
    return WeightSample(float(as_points(t, 1)[0, 0]), float(w[0]), float(check[0]), h.chart.name)


def weight_profile(h: LossHandle, points) -> np.ndarray:
    _binary(h)
    return _weight_arrays(h, points)[0]


# --- Quotients ---

def _matched_std(h: LossHandle, t) -> np.ndarray:
    """Standard-chart coordinates of chart points of h."""
    return h.chart.to_std(as_points(t, 1))


def _quotient_arrays(h: LossHandle, base: LossHandle, std_points) -> Tuple[np.ndarray, np.ndarray]:
    hs, bs = h.std_view(), base.std_view()
    kappa_h = _curvature_arrays(hs, std_points)["kappa_plus"]
    kappa_b = _curvature_arrays(bs, std_points)["kappa_plus"]
    w_h = _weight_arrays(hs, std_points)[0]
    w_b = _weight_arrays(bs, std_points)[0]
    with np.errstate(divide='ignore', invalid='ignore'):
        return kappa_h / kappa_b, w_b / w_h


def curvature_quotient(h: LossHandle, base: LossHandle, t,
                       config: Optional[Config] = None) -> QuotientSample:
    """κ⁺_h/κ⁺_base at matched simplex points, with the weight ratio w_base/w_h alongside."""
    _binary(h)
    _binary(base)
    cfg = config or get_config()
    std_points = _matched_std(h, t)
    quotient, ratio = _quotient_arrays(h, base, std_points)
    q, r = float(quotient[0]), float(ratio[0])
    delta = abs(q - r) / max(abs(q), abs(r), 1e-300)
    if delta > cfg.TOL_WEIGHT:
        logger.warning(f"Curvature quotient {q} and weight ratio {r} differ by {delta:.3g} at t={t}")
    return QuotientSample(float(std_points[0, 0]), q, r, delta)


def quotient_profile(h: LossHandle, base: LossHandle, points) -> np.ndarray:
    _binary(h)
    return _quotient_arrays(h, base, _matched_std(h, points))[0]


def pointwise_mixability(h: LossHandle, points) -> np.ndarray:
    """η(t) = |(ℓ̃₁′ℓ̃₂″ − ℓ̃₂′ℓ̃₁″)/(ℓ̃₁′ℓ̃₂′(ℓ̃₁′ − ℓ̃₂′))| in the standard chart."""
    _binary(h)
    jets = h.std_view().jets(points)
    d1 = jets.grad[:, :, 0]
    d2 = jets.hess[:, :, 0, 0]
    numerator = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    denominator = d1[:, 0] * d1[:, 1] * (d1[:, 0] - d1[:, 1])
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.abs(numerator / denominator)


def _pencil_route(h: LossHandle, base: LossHandle, points) -> np.ndarray:
    """D²L̃_base/D²L̃_h, the n=2 generalized eigenvalue."""
    hs, bs = h.std_view(), base.std_view()
    with np.errstate(divide='ignore', invalid='ignore'):
        return risk_hessians(bs, points)[:, 0, 0] / risk_hessians(hs, points)[:, 0, 0]


# --- Mixability and fundamentality ---

def _relative(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def mixability_constant_binary(h: LossHandle, base: Optional[LossHandle] = None,
                               config: Optional[Config] = None) -> MixabilityReport:
    """Mixability constant of a binary proper loss w.r.t. `base` (default log).

    The grid infimum of the pointwise constant is refined by golden-section
    search. A minimum on the grid edge is followed toward the boundary; when
    it keeps decreasing, the extrapolated limit is reported instead.

    Raises:
        NotProper: When h or base fails check_proper.
        RouteDisagreement: When the formula, quotient and pencil routes disagree.
    """
    _binary(h)
    cfg = config or get_config()
    base = base if base is not None else log_loss(2)
    _binary(base)
    require_proper(h, cfg)
    if base is not log_loss(2):
        require_proper(base, cfg)

    formula_available = is_log_loss(base.std_view())
    route = 'formula' if formula_available else 'quotient'

    def primary(ts):
        ts = np.atleast_1d(ts)
        if formula_available:
            return pointwise_mixability(h, ts)
        return _quotient_arrays(h, base, ts.reshape(-1, 1))[0]

    ts = binary_grid(cfg)
    values = primary(ts)
    best = refine_minimum(lambda x: float(primary(x)[0]), ts, values, cfg.GOLDEN_XTOL)
    eta_star, t_star, boundary = best.value, best.t, None

    if best.at_edge:
        side = '0' if best.index == 0 else '1'
        offsets = halving_offsets(cfg.MARGIN, cfg.BOUNDARY_STEPS)
        probe = offsets if side == '0' else 1.0 - offsets
        try:
            limit = extrapolate_limit(primary(probe), cfg.BOUNDARY_GROWTH, cfg.RICHARDSON_ORDER)
        except EvalError as e:
            logger.warning(f"Boundary trend of {h.name} not evaluable: {e.message}")
            limit = math.inf
        if limit < best.grid_value * (1.0 - cfg.TOL_ROUTE):
            eta_star, t_star, boundary = max(limit, 0.0), float(probe[-1]), side
            logger.info(f"{h.name}: pointwise mixability decreases toward t={side}, limit {limit}")

    at = np.array([t_star])
    routes = {'quotient': float(_quotient_arrays(h, base, at.reshape(-1, 1))[0][0]),
              'pencil': float(_pencil_route(h, base, at)[0])}
    if formula_available:
        routes['formula'] = float(pointwise_mixability(h, at)[0])
    reference = routes[route]
    deltas = {name: _relative(value, reference) for name, value in routes.items() if name != route}
    for name, delta in deltas.items():
        logger.debug(f"{h.name}: route {name} differs from {route} by {delta:.3g}")
        if delta > cfg.TOL_ROUTE:
            raise RouteDisagreement(f"route {name} disagrees with {route} for {h.name}",
                                    t=t_star, routes=routes, delta=delta)

    logger.info(f"{h.name}: eta* = {eta_star} at t = {t_star} (route {route}, base {base.name})")
    return MixabilityReport(
        eta_star=float(eta_star),
        argmin=(float(t_star),),
        route=route,
        routes=routes,
        deltas=deltas,
        grid={'resolution': cfg.BINARY_RESOLUTION, 'margin': cfg.MARGIN, 'points': len(ts),
              'grid_min': best.grid_value, 'grid_argmin': best.grid_t, 'base': base.name},
        refined=best.refined,
        mixable=bool(eta_star > 0.0),
        boundary=boundary,
    )


def _reciprocal(limit: float) -> float:
    if limit == 0.0:
        return math.inf
    return 0.0 if math.isinf(limit) else 1.0 / limit


def fundamentality(h: LossHandle, base: Optional[LossHandle] = None,
                   config: Optional[Config] = None) -> FundamentalityReport:
    """Boundary behaviour of the curvature quotient κ⁺_h/κ⁺_base.

    B₁ and B₂ are the reciprocals of the quotient limits at t → 0⁺ and
    t → 1⁻. The loss is fundamental w.r.t. base when both limits are finite
    and positive and the quotient stays bounded and bounded away from 0 on the grid.

    Raises:
        NotProper: When h or base is not proper.
        NotFair: When h or base is not fair.
    """
    _binary(h)
    cfg = config or get_config()
    base = base if base is not None else log_loss(2)
    _binary(base)
    for loss in (h, base):
        require_proper(loss, cfg)
        fairness = fairness_check(loss, cfg)
        if not fairness.fair:
            raise NotFair(f"{loss.name} is not fair", limits=[fairness.limit_first, fairness.limit_second])

    ts = binary_grid(cfg)
    quotient = _quotient_arrays(h, base, ts.reshape(-1, 1))[0]
    offsets = halving_offsets(cfg.MARGIN, cfg.BOUNDARY_STEPS)

    def limit_at(probe):
        try:
            samples = _quotient_arrays(h, base, probe.reshape(-1, 1))[0]
        except EvalError as e:
            logger.warning(f"Quotient of {h.name} not evaluable near the boundary: {e.message}")
            return math.inf
        return extrapolate_limit(samples, cfg.BOUNDARY_GROWTH, cfg.RICHARDSON_ORDER)

    limit_0 = limit_at(offsets)
    limit_1 = limit_at(1.0 - offsets)
    sup_q = float(np.max(quotient)) if np.isfinite(quotient).all() else math.inf
    inf_q = float(np.min(quotient))
    limits_ok = all(math.isfinite(x) and x > 0.0 for x in (limit_0, limit_1))
    fundamental = limits_ok and math.isfinite(sup_q) and inf_q > 0.0
    logger.info(f"{h.name} vs {base.name}: quotient limits ({limit_0}, {limit_1}), fundamental={fundamental}")
    return FundamentalityReport(
        B1=_reciprocal(limit_0),
        B2=_reciprocal(limit_1),
        limit_0=float(limit_0),
        limit_1=float(limit_1),
        sup_quotient=sup_q,
        inf_quotient=inf_q,
        fundamental=bool(fundamental),
        base=base.name,
    )


# --- Links ---

def composite(h: LossHandle, link: LinkFunction) -> LossHandle:
    """The loss ϱ̂ = ϱ̃ ∘ ψ⁻¹ expressed in the link's chart."""
    if not isinstance(link, LinkFunction):
        raise BadParams("composite needs a LinkFunction")
    return CompositeLoss(h, link)


def validate_link(h: LossHandle, link: LinkFunction, config: Optional[Config] = None) -> LinkVerdict:
    """Check ψ⁻¹(v) = ϱ̃₂′/(ϱ̃₂′ − ϱ̃₁′) at u = ψ⁻¹(v) and the round trip ψ(ψ⁻¹(v)) = v."""
    _binary(h)
    cfg = config or get_config()
    low, high = link.valid_range
    with np.errstate(invalid='ignore'):
        v = link.forward(binary_grid(cfg))
    v = v[np.isfinite(v) & (v > low) & (v < high)]
    if v.size == 0:
        return LinkVerdict(False, math.inf, math.inf, None, 0)

    u = link.inverse(v)
    inside = (u > 0.0) & (u < 1.0)
    d1 = np.full((v.size, 2), np.nan)
    if inside.any():
        d1[inside] = h.std_view().jets(u[inside]).grad[:, :, 0]
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = d1[:, 1] / (d1[:, 1] - d1[:, 0])
        ratio_error = np.abs(ratio - u)
        roundtrip = np.abs(link.forward(np.where(inside, u, 0.5)) - v) / (1.0 + np.abs(v))
    ratio_error = np.where(np.isfinite(ratio_error), ratio_error, np.inf)
    roundtrip = np.where(inside & np.isfinite(roundtrip), roundtrip, np.inf)

    bad = (ratio_error > cfg.TOL_LINK) | (roundtrip > ROUNDTRIP_TOL)
    witness = float(v[np.flatnonzero(bad)[0]]) if bad.any() else None
    logger.info(f"Link {link.name} for {h.name}: valid={not bad.any()}")
    return LinkVerdict(
        valid=not bad.any(),
        max_ratio_error=float(ratio_error.max()),
        max_roundtrip_error=float(roundtrip.max()),
        witness_v=witness,
        samples=int(v.size),
    )


def _integrate_weight(w_fn, knots: np.ndarray, anchor: float, max_trim: int = 4):
    part = knots
    for trim in range(max_trim + 1):
        try:
            integrals, error = interval_integrals(w_fn, part)
            return part, integrals, error, trim
        except (QuadratureFailure, EvalError) as e:
            smaller = part[1:-1]
            if trim == max_trim or not smaller[0] < anchor < smaller[-1]:
                raise QuadratureFailure(f"weight integral failed near the boundary: {e.message}",
                                        valid_range=[float(part[0]), float(part[-1])])
            logger.warning(f"Quadrature failed on [{part[0]}, {part[-1]}]; trimming end intervals")
            part = smaller


def canonical_link(h: LossHandle, config: Optional[Config] = None) -> LinkFunction:
    """The link ψ with ψ′ = w and ψ(1/2) = 0, tabulated on the binary grid.

    Knot values come from adaptive quadrature of the weight over the knot
    intervals. Forward evaluation integrates from the nearest knot; the
    inverse starts from a monotone-cubic interpolant and is polished by
    Newton steps, and its derivatives are 1/w and −w′/w³.

    Raises:
        NotProper: When h is not proper.
        QuadratureFailure: When the weight cannot be integrated.
    """
    _binary(h)
    cfg = config or get_config()
    hs = h.std_view()
    require_proper(hs, cfg)

    def w_jets(t):
        jets = hs.jets(np.asarray(t, dtype=float).reshape(-1, 1))
        return jets.grad[:, 0, 0], jets.hess[:, 0, 0, 0]

    def w_fn(t):
        d1, _ = w_jets(t)
        return np.abs(d1 / (1.0 - np.asarray(t, dtype=float).reshape(-1)))

    grid = binary_grid(cfg)
    knots = np.union1d(grid[np.abs(grid - 0.5) > 1e-9], [0.5])
    if np.any(w_fn(knots) <= 0.0):
        raise NonMonotoneLink(f"weight of {hs.name} vanishes on the grid")
    knots, integrals, error, trim = _integrate_weight(w_fn, knots, 0.5)
    cumulative = np.concatenate([[0.0], np.cumsum(integrals)])
    psi = cumulative - cumulative[int(np.flatnonzero(knots == 0.5)[0])]
    initial = PchipInterpolator(psi, knots, extrapolate=False)

    def forward(t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).reshape(-1)
        index = np.clip(np.searchsorted(knots, flat), 1, len(knots) - 1)
        nearest = np.where(np.abs(flat - knots[index - 1]) <= np.abs(knots[index] - flat), index - 1, index)
        values = psi[nearest] + segment_integrals(w_fn, knots[nearest], flat)[0]
        return values.reshape(t.shape)

    def inverse_jet(v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        u = initial(v)
        for _ in range(2):
            step = u - (forward(u) - v) / w_fn(u)
            u = np.where((step > 0.0) & (step < 1.0), step, u)
        d1, d2 = w_jets(u)
        w = np.abs(d1) / (1.0 - u)
        dw = np.sign(d1) * (d2 * (1.0 - u) + d1) / (1.0 - u) ** 2
        return u, 1.0 / w, -dw / w ** 3

    link = LinkFunction(
        name=f"canonical({hs.name})",
        knots_t=knots,
        knots_v=psi,
        forward_fn=forward,
        inverse_jet_fn=inverse_jet,
        valid_range=(float(psi[0]), float(psi[-1])),
        metadata={'anchor': 0.5, 'max_quadrature_error': float(np.max(error)), 'trimmed_intervals': trim},
    )
    logger.info(f"Canonical link of {hs.name}: range ({psi[0]:.6g}, {psi[-1]:.6g}), {len(knots)} knots")
    return link


# --- Exponential projection ---

def exp_projection_curvature(h: LossHandle, eta: float, config: Optional[Config] = None) -> ExpCurvatureVerdict:
    """Sign test for the curvature of t ↦ (e^{−ηℓ̃₁}, e^{−ηℓ̃₂}).

    The projected curve bends the right way at t iff
    ηℓ̃₁′ℓ̃₂′(ℓ̃₁′ − ℓ̃₂′) + (ℓ̃₁′ℓ̃₂″ − ℓ̃₂′ℓ̃₁″) ≤ 0; the bracket is normalized
    by the magnitude of its two terms before comparing with the tolerance.
    """
    _binary(h)
    eta = float(eta)
    if not (math.isfinite(eta) and eta > 0.0):
        raise BadParams(f"eta must be positive, got {eta}")
    cfg = config or get_config()
    ts = binary_grid(cfg)
    jets = h.std_view().jets(ts)
    d1 = jets.grad[:, :, 0]
    d2 = jets.hess[:, :, 0, 0]
    first = eta * d1[:, 0] * d1[:, 1] * (d1[:, 0] - d1[:, 1])
    second = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    with np.errstate(divide='ignore', invalid='ignore'):
        bracket = (first + second) / (np.abs(first) + np.abs(second))
    bracket = np.nan_to_num(bracket, nan=0.0)
    worst = int(np.argmax(bracket))
    convex = bool(bracket[worst] <= cfg.TOL_PSD_FACTOR)
    logger.info(f"{h.name}: exp projection at eta={eta} convex={convex}")
    return ExpCurvatureVerdict(eta, float(bracket[worst]), convex, float(ts[worst]))
