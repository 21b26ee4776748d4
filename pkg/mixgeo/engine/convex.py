"""
Convex-geometry view of losses: Bayes risks, support functions of
superprediction sets, sliding freely, summand residuals and the log-loss
decomposition.

The superprediction set spr(ℓ) = ℓ(Δⁿ) + ℝⁿ≥0 is never built explicitly.
Its support function on the open negative orthant is
σ(u) = ⟨ℓ(p_u), u⟩ with p_u = −u/‖u‖₁, so containments and summands
reduce to inequalities between Bayes risks.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, optimize

from . import geom2, geomn
from .losses import (check_proper, fairness_check, log_loss, require_proper, risk_hessians, scale,
                     subtract)
from ..config.config import Config, get_config
from ..models.loss import LossHandle, as_points
from ..models.reports import (DecompositionReport, MembershipVerdict, RiskEval, SandwichVerdict,
                              SlideVerdict)
from ..models.simplex import SimplexPoint, check_interior, lattice, std_chart_array
from ..utils.errors import (BadDirection, BadParams, DegenerateVelocity, DimMismatch, NotASummand,
                            NotFair, NotMixable, NotProper, ResidualImproper)
from ..utils.numerics import negative_directions, symmetrize

logger = logging.getLogger(__name__)

BRUTE_FORCE_RESOLUTION = 501
MEMBERSHIP_TOL = 1e-12
HOMOGENEITY_TOL = 1e-12
ROUNDTRIP_TOL = 1e-8
ZERO_TOL = 1e-10
MAX_REPORTED_POINTS = 20

SimplexLike = Union[SimplexPoint, Sequence[float], np.ndarray]


def _simplex_array(p: SimplexLike, n: int) -> np.ndarray:
    p = p.as_array() if isinstance(p, SimplexPoint) else np.asarray(p, dtype=float)
    p = np.atleast_2d(p)
    if p.shape[1] != n:
        raise DimMismatch(f"expected {n} simplex coordinates, got {p.shape[1]}")
    return p


# --- Bayes risk ---

def _bayes_hessians(h: LossHandle, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """L̄(t) = ⟨ℓ̃(t), Φ_std(t)⟩ and its chart Hessian, without assuming properness."""
    jets = h.jets(points)
    phi = std_chart_array(points)
    m = points.shape[1]
    bayes = np.einsum('ak,ak->a', jets.value, phi)
    # ∂_jΦ_k is δ_kj for k < n and −1 for k = n
    cross = jets.grad[:, :m, :] - jets.grad[:, m:, :]
    cross = np.swapaxes(cross, 1, 2)
    hess = risk_hessians(h, points) + cross + np.swapaxes(cross, 1, 2)
    return bayes, symmetrize(hess)


def bayes_risk_profile(h: LossHandle, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Bayes risk and its standard-chart Hessian over a grid of chart points."""
    hs = h.std_view()
    return _bayes_hessians(hs, np.atleast_2d(points))


def bayes_risk(h: LossHandle, p: SimplexLike, q: Optional[SimplexLike] = None,
               brute_force: bool = False, config: Optional[Config] = None) -> RiskEval:
    """Conditional risk ⟨ℓ(q), p⟩ and Bayes risk L̄(p).

    With `brute_force`, L̄(p) is the minimum of the conditional risk over a
    q-grid and the minimizer is reported as q; otherwise L̄(p) = ⟨ℓ(p), p⟩.
    """
    cfg = config or get_config()
    hs = h.std_view()
    p = _simplex_array(p, h.n)[0]
    t = p[:-1].reshape(1, -1)
    check_interior(t)
    bayes, hess = _bayes_hessians(hs, t)

    if brute_force:
        resolution = BRUTE_FORCE_RESOLUTION if h.n == 2 else cfg.resolution_for(h.n)
        grid = lattice(h.n, resolution, cfg.MARGIN)
        risks = hs.values(grid) @ p
        best = int(np.argmin(risks))
        minimizer = std_chart_array(grid[best])[0]
        value = float(risks[best])
        q_arr = minimizer if q is None else _simplex_array(q, h.n)[0]
    else:
        value = float(bayes[0])
        q_arr = p if q is None else _simplex_array(q, h.n)[0]
    risk = float(hs.values(q_arr[:-1].reshape(1, -1))[0] @ p)
    return RiskEval(tuple(p), tuple(float(x) for x in q_arr), risk, value, hess[0], brute_force)


# --- Support functions ---

def _directions(u, n: int) -> np.ndarray:
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] != n:
        raise DimMismatch(f"expected {n}-dimensional directions, got {u.shape[1]}")
    bad = ~np.isfinite(u).all(axis=1) | (u >= 0.0).any(axis=1)
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        raise BadDirection("support directions must lie in the open negative orthant",
                           index=index, u=u[index].tolist())
    return u


def _support_values(h: LossHandle, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """σ(u) and the touching points ℓ(p_u) for a batch of directions."""
    p = -u / np.abs(u).sum(axis=1, keepdims=True)
    values = h.std_view().values(p[:, :-1])
    return np.einsum('ak,ak->a', values, u), values


def support(h: LossHandle, u) -> float:
    """σ_{spr(ℓ)}(u) = ⟨ℓ(p_u), u⟩ for u in the open negative orthant.

    Raises:
        BadDirection: If some u_i ≥ 0.
    """
    return float(_support_values(h, _directions(u, h.n))[0][0])


class SupportField:
    """Support function Σ_i c_i·σ_{spr(ℓ_i)} of a signed combination of losses.

    A single loss gives the support function of its superprediction set; a
    difference gives the candidate residual of a Minkowski summand. Values
    are cached per direction.
    """

    def __init__(self, terms: Sequence[Tuple[float, LossHandle]], label: Optional[str] = None):
        terms = [(float(c), h) for c, h in terms]
        if not terms:
            raise BadParams("a support field needs at least one term")
        n = {h.n for _, h in terms}
        if len(n) != 1:
            raise DimMismatch(f"support field terms have different outcome counts {sorted(n)}")
        self.terms = terms
        self.n = n.pop()
        self.label = label or " + ".join(f"{c:g}·{h.name}" for c, h in terms)
        self.checks: Dict[str, float] = {}
        self._cache: Dict[Tuple[float, ...], Tuple[float, np.ndarray]] = {}

    @classmethod
    def of(cls, h: LossHandle) -> 'SupportField':
        return cls([(1.0, h)], label=h.name)

    def _evaluate(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        keys = [tuple(row) for row in u]
        missing = [i for i, key in enumerate(keys) if key not in self._cache]
        if missing:
            sub = u[missing]
            total = np.zeros(len(sub))
            points = np.zeros((len(sub), self.n))
            for c, h in self.terms:
                values, touching = _support_values(h, sub)
                total += c * values
                points += c * touching
            for j, i in enumerate(missing):
                self._cache[keys[i]] = (float(total[j]), points[j])
        values = np.array([self._cache[key][0] for key in keys])
        gradients = np.array([self._cache[key][1] for key in keys])
        return values, gradients

    def __call__(self, u) -> Union[float, np.ndarray]:
        u_arr = _directions(u, self.n)
        values = self._evaluate(u_arr)[0]
        return float(values[0]) if np.ndim(u) == 1 else values

    def boundary_points(self, directions) -> np.ndarray:
        """∇σ at each direction: the boundary point of the set with outer normal u."""
        return self._evaluate(_directions(directions, self.n))[1]

    def contains(self, y, directions) -> bool:
        """⟨y, u⟩ ≤ σ(u) on every sampled direction."""
        u = _directions(directions, self.n)
        y = np.asarray(y, dtype=float)
        values = self._evaluate(u)[0]
        return bool(np.all(u @ y <= values + ZERO_TOL * (1.0 + np.abs(values))))

    def __repr__(self):
        return f"<SupportField {self.label} n={self.n}>"


# --- Sliding freely ---

def slides_freely(inner: LossHandle, outer: Optional[LossHandle] = None, eta: float = 1.0,
                  config: Optional[Config] = None) -> SlideVerdict:
    """Convexity of η·L̄^inner − L̄^outer over the interior grid.

    Raises:
        NotProper: When either loss fails check_proper.
    """
    eta = float(eta)
    if not (math.isfinite(eta) and eta > 0.0):
        raise BadParams(f"eta must be positive, got {eta}")
    cfg = config or get_config()
    outer = outer if outer is not None else log_loss(inner.n)
    if outer.n != inner.n:
        raise DimMismatch(f"cannot compare n={inner.n} with n={outer.n}")
    require_proper(inner, cfg)
    require_proper(outer, cfg)

    points = geomn.grid_points(inner.n, cfg)
    _, hess_inner = bayes_risk_profile(inner, points)
    _, hess_outer = bayes_risk_profile(outer, points)
    d = symmetrize(eta * hess_inner - hess_outer)
    lowest = np.linalg.eigvalsh(d)[:, 0]
    tol = cfg.TOL_PSD_FACTOR * (1.0 + np.trace(np.abs(d), axis1=1, axis2=2))
    worst = int(np.argmin(lowest + tol))
    verdict = bool(np.all(lowest >= -tol))
    logger.info(f"{inner.name} inside {outer.name} at eta={eta}: slides freely={verdict}")
    return SlideVerdict(
        eta=eta,
        convexity_margin=float(lowest.min()),
        slides_freely=verdict,
        worst_point=tuple(float(x) for x in std_chart_array(points[worst])[0]),
    )


def _segment_directions(n: int, cfg: Config, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs of negative-orthant directions: neighbouring grid points, then random pairs."""
    grid = -std_chart_array(geomn.grid_points(n, cfg))
    starts = [grid[:-1]]
    ends = [grid[1:]]
    starts.append(negative_directions(rng, cfg.RANDOM_SEGMENTS, n))
    ends.append(negative_directions(rng, cfg.RANDOM_SEGMENTS, n))
    return np.vstack(starts), np.vstack(ends)


def summand_residual(outer: LossHandle, inner: LossHandle, eta: float,
                     config: Optional[Config] = None, seed: Optional[int] = None) -> SupportField:
    """σ_M = σ_{spr(outer)} − η·σ_{spr(inner)}, checked to be a support function.

    The check covers positive homogeneity and convexity along segments
    between directions (second differences at the midpoint).

    Raises:
        NotASummand: When σ_M is not sublinear on the sampled directions.
    """
    eta = float(eta)
    if not (math.isfinite(eta) and eta > 0.0):
        raise BadParams(f"eta must be positive, got {eta}")
    if outer.n != inner.n:
        raise DimMismatch(f"cannot compare n={inner.n} with n={outer.n}")
    cfg = config or get_config()
    rng = np.random.default_rng(cfg.SEED if seed is None else seed)
    field = SupportField([(1.0, outer), (-eta, inner)], label=f"{outer.name} - {eta:g}·{inner.name}")
    outer_field = SupportField.of(outer)

    u = negative_directions(rng, cfg.RANDOM_DIRECTIONS, outer.n)
    base = field(u)
    magnitude = np.abs(outer_field(u)) + eta * np.abs(SupportField.of(inner)(u))
    homogeneity = 0.0
    for c in (0.5, 2.0):
        error = np.abs(field(c * u) - c * base) / (c * (1.0 + magnitude))
        homogeneity = max(homogeneity, float(error.max()))

    starts, ends = _segment_directions(outer.n, cfg, rng)
    left, right, middle = field(starts), field(ends), field(0.5 * (starts + ends))
    second = left + right - 2.0 * middle
    size = np.abs(outer_field(starts)) + np.abs(outer_field(ends))
    convexity = float(np.min(second / (1.0 + size)))

    field.checks = {'homogeneity': homogeneity, 'convexity': convexity, 'segments': len(starts)}
    if homogeneity > HOMOGENEITY_TOL or convexity < -MEMBERSHIP_TOL:
        index = int(np.argmin(second / (1.0 + size)))
        raise NotASummand(f"{eta:g}·spr({inner.name}) is not a summand of spr({outer.name})",
                          homogeneity=homogeneity, convexity=convexity,
                          segment=[starts[index].tolist(), ends[index].tolist()])
    logger.info(f"Residual {field.label} is a support function on {len(starts)} segments")
    return field


# --- Decomposition ---

def _mixability(h: LossHandle, cfg: Config):
    if h.n == 2:
        return geom2.mixability_constant_binary(h, config=cfg)
    return geomn.mixability_constant_multi(h, config=cfg)


def decompose_log(h: LossHandle, config: Optional[Config] = None) -> DecompositionReport:
    """Split the log loss as log = η*·h + ℓ* and check the residual ℓ*.

    The residual is checked for nonnegativity, first-order alignment and a
    positive semidefinite second fundamental form. Points where the form is
    only semidefinite are reported; an identically zero residual is flagged
    as degenerate.

    Raises:
        NotProper: When h is not proper.
        NotFair: When a binary h is not fair.
        NotMixable: When η* = 0.
        ResidualImproper: When the residual fails its checks.
    """
    cfg = config or get_config()
    hs = h.std_view()
    require_proper(hs, cfg)
    if hs.n == 2:
        fairness = fairness_check(hs, cfg)
        if not fairness.fair:
            raise NotFair(f"{h.name} is not fair", limits=[fairness.limit_first, fairness.limit_second])
    report = _mixability(hs, cfg)
    eta_star = report.eta_star
    if not report.mixable:
        raise NotMixable(f"{h.name} is not mixable", boundary=report.boundary)

    log = log_loss(hs.n)
    residual = subtract(log, scale(hs, eta_star))
    points = geomn.grid_points(hs.n, cfg)
    values = residual.values(points)
    reference = np.abs(log.values(points)).max(axis=1)
    degenerate = bool(np.all(np.abs(values) <= ZERO_TOL * (1.0 + reference[:, None])))
    nonnegative = bool(np.all(values >= -ZERO_TOL * (1.0 + reference[:, None])))

    verdict = check_proper(residual, grid=points, config=cfg)
    aligned = verdict.worst_alignment <= cfg.TOL_ALIGN

    d2 = risk_hessians(residual, points)
    phi = std_chart_array(points)
    form = d2 / np.linalg.norm(phi, axis=1)[:, None, None]
    lowest = np.linalg.eigvalsh(form)[:, 0]
    tol = cfg.TOL_PSD_FACTOR * (1.0 + np.linalg.norm(risk_hessians(log, points), axis=(1, 2)))
    semidefinite: List[Tuple[float, ...]] = []
    if not degenerate:
        flat = np.flatnonzero(lowest <= tol)
        semidefinite = [tuple(float(x) for x in phi[i]) for i in flat[:MAX_REPORTED_POINTS]]
        if flat.size:
            logger.warning(f"Residual of {h.name} is only semidefinite at {flat.size} grid points")

    min_curvature = float(lowest.min())
    if not (nonnegative and aligned and np.all(lowest >= -tol)):
        raise ResidualImproper(f"residual log - {eta_star:g}·{h.name} is not an admissible loss",
                               nonnegative=nonnegative, aligned=aligned, min_curvature=min_curvature)
    logger.info(f"log = {eta_star:g}·{h.name} + residual (degenerate={degenerate})")
    return DecompositionReport(
        eta_star=eta_star,
        residual=residual,
        degenerate=degenerate,
        nonnegative=nonnegative,
        aligned=bool(aligned),
        min_curvature=min_curvature,
        semidefinite_points=semidefinite,
    )


# --- Superprediction membership ---

def spr_membership(h: LossHandle, y, config: Optional[Config] = None) -> MembershipVerdict:
    """Whether y ∈ spr(ℓ): some q has ℓ_i(q) ≤ y_i for every i.

    The gap max_i(ℓ_i(q) − y_i) is minimized over the grid and then refined
    locally around the best grid witness.
    """
    cfg = config or get_config()
    hs = h.std_view()
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != h.n:
        raise DimMismatch(f"expected {h.n} coordinates, got {y.shape[0]}")

    grid = geomn.grid_points(h.n, cfg)
    gaps = (hs.values(grid) - y).max(axis=1)
    best = int(np.argmin(gaps))
    witness, gap = grid[best].copy(), float(gaps[best])

    def objective(t):
        t = np.atleast_1d(t)
        if np.any(t <= 0.0) or t.sum() >= 1.0:
            return np.inf
        return float((hs.values(t.reshape(1, -1))[0] - y).max())

    if gap > MEMBERSHIP_TOL:
        if h.n == 2:
            ts = grid[:, 0]
            low = ts[max(best - 1, 0)]
            high = ts[min(best + 1, len(ts) - 1)]
            result = optimize.minimize_scalar(objective, bounds=(low, high), method='bounded',
                                              options={'xatol': cfg.GOLDEN_XTOL})
        else:
            result = optimize.minimize(objective, witness, method='Nelder-Mead',
                                       options={'xatol': cfg.GOLDEN_XTOL, 'fatol': MEMBERSHIP_TOL})
        if np.isfinite(result.fun) and result.fun < gap:
            witness, gap = np.atleast_1d(result.x).astype(float), float(result.fun)

    q = std_chart_array(witness)[0]
    return MembershipVerdict(bool(gap <= MEMBERSHIP_TOL), tuple(float(x) for x in q), gap)


# --- Inverse loss ---

def inverse_loss(h: LossHandle, t, config: Optional[Config] = None) -> SimplexPoint:
    """The simplex point whose loss vector has the orthant normal at ℓ̃(t).

    Raises:
        NotProper: When the loss is not proper, the normal leaves the
            positive orthant or the round trip to Φ(t) fails.
    """
    cfg = config or get_config()
    require_proper(h, cfg)
    points = as_points(t, h.dim)
    jets = h.jets(points)
    tangents = jets.grad[0]
    normal = linalg.null_space(tangents.T)
    if normal.shape[1] != 1:
        raise DegenerateVelocity(f"tangent frame of {h.name} is degenerate", t=points[0].tolist())
    u = normal[:, 0] * np.sign(normal[:, 0].sum())
    if np.any(u <= 0.0):
        raise NotProper(f"normal of {h.name} leaves the positive orthant", t=points[0].tolist(),
                        normal=u.tolist())
    p = u / u.sum()
    expected = h.chart.simplex(points)[0]
    if np.max(np.abs(p - expected)) > ROUNDTRIP_TOL:
        raise NotProper(f"normal of {h.name} does not point back to its simplex point",
                        t=points[0].tolist(), inverse=p.tolist(), expected=expected.tolist())
    return SimplexPoint(tuple(p / p.sum()))


# --- Fundamentality sandwich ---

def fundamentality_sandwich(h: LossHandle, eta: float, gamma: float, base: Optional[LossHandle] = None,
                            points: int = 10, directions: int = 100, seed: Optional[int] = None,
                            config: Optional[Config] = None) -> SandwichVerdict:
    """spr(ηℓ + x_p) ⊆ spr(λ) ⊆ spr(γℓ + y_p) at random p, by support-function dominance.

    The translations x_p = λ(p) − ηℓ(p) and y_p = λ(p) − γℓ(p) make both
    translated sets touch λ(p).
    """
    if not (eta > 0.0 and gamma > 0.0):
        raise BadParams("eta and gamma must be positive")
    cfg = config or get_config()
    base = base if base is not None else log_loss(h.n)
    if base.n != h.n:
        raise DimMismatch(f"cannot compare n={h.n} with n={base.n}")
    rng = np.random.default_rng(cfg.SEED if seed is None else seed)

    shrink = 0.05
    ps = (1.0 - h.n * shrink) * rng.dirichlet(np.ones(h.n), size=points) + shrink
    u = negative_directions(rng, directions, h.n)
    sigma_h, _ = _support_values(h, u)
    sigma_base, _ = _support_values(base, u)
    at_h = h.std_view().values(ps[:, :-1])
    at_base = base.std_view().values(ps[:, :-1])

    worst_inner = worst_outer = math.inf
    holds = True
    for i in range(points):
        x_p = at_base[i] - eta * at_h[i]
        y_p = at_base[i] - gamma * at_h[i]
        inner_gap = sigma_base - eta * sigma_h - u @ x_p
        outer_gap = gamma * sigma_h + u @ y_p - sigma_base
        tol = ZERO_TOL * (1.0 + np.abs(sigma_base))
        holds = holds and bool(np.all(inner_gap >= -tol) and np.all(outer_gap >= -tol))
        worst_inner = min(worst_inner, float(inner_gap.min()))
        worst_outer = min(worst_outer, float(outer_gap.min()))
    logger.info(f"Sandwich of {base.name} between {eta:g}·{h.name} and {gamma:g}·{h.name}: {holds}")
    return SandwichVerdict(float(eta), float(gamma), holds, worst_inner, worst_outer, points, directions)
