"""
Geometry of loss surfaces for any number of outcomes.

All computations run in the standard chart. Near a point ℓ̃(s) the loss
surface is the graph of a function f over the first n-1 loss coordinates
x = Π(ℓ̃(s)); properness fixes Df = −s/Φ_n, and D²f follows from the chain
rule. The η-mixability test compares the scalar second fundamental form of
the loss with the closed form of the log loss at the same simplex point.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np

from .losses import check_proper, log_loss, require_proper, risk_hessians
from ..config.config import Config, get_config
from ..models.loss import LossHandle, as_points
from ..models.reports import ExpProjVerdict, GraphPatch, MixabilityReport, SFFSample
from ..models.simplex import ChartPoint, lattice, std_chart_array
from ..utils.errors import BadParams, NotProper, SingularJacobian, SpectrumMismatch
from ..utils.numerics import pencil_eigenvalues, refine_minimum, symmetrize

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12


def _points(s, n: int) -> np.ndarray:
    if isinstance(s, ChartPoint):
        if s.n != n:
            raise BadParams(f"chart point for n={s.n} used with an n={n} loss")
    return as_points(s, n - 1)


def grid_points(n: int, config: Config) -> np.ndarray:
    return lattice(n, config.resolution_for(n), config.MARGIN)


def conditional_risk_hessian(h: LossHandle, s) -> np.ndarray:
    """[D²L̃]_ij(s) = Σ_k ∂²_{ij}ℓ̃_k(s)·Φ_k(s) in the standard chart."""
    hs = h.std_view()
    return risk_hessians(hs, _points(s, h.n))[0]


# --- Graph representation ---

def _graph_arrays(h: LossHandle, points: np.ndarray):
    """x*, f, Df, D²f over a batch of standard-chart points."""
    hs = h.std_view()
    jets = hs.jets(points)
    phi = std_chart_array(points)
    m = points.shape[1]
    jacobian = jets.grad[:, :m, :]  # ∂x_k/∂s_j
    cond = np.linalg.cond(jacobian)
    if not np.all(np.isfinite(cond) & (cond < COND_LIMIT)):
        index = int(np.flatnonzero(~(np.isfinite(cond) & (cond < COND_LIMIT)))[0])
        raise SingularJacobian(f"Π∘ℓ̃ is not invertible for {hs.name}", index=index,
                               point=points[index].tolist())
    grad_f = -phi[:, :m] / phi[:, m:]
    # D²ℓ̃_n − Σ_k ∂_k f·D²ℓ̃_k = Jᵀ D²f J
    inner = jets.hess[:, m] - np.einsum('ak,akij->aij', grad_f, jets.hess[:, :m])
    inverse = np.linalg.inv(jacobian)
    hess_f = symmetrize(np.swapaxes(inverse, 1, 2) @ inner @ inverse)
    return jets.value[:, :m], jets.value[:, m], grad_f, hess_f


def graph_patch(h: LossHandle, s) -> GraphPatch:
    """Local graph (x, f(x)) of the loss surface around ℓ̃(s).

    Raises:
        SingularJacobian: When x = Π(ℓ̃(s)) is not a local coordinate.
    """
    x_star, f_value, grad_f, hess_f = _graph_arrays(h, _points(s, h.n))
    return GraphPatch(x_star[0], float(f_value[0]), grad_f[0], hess_f[0])


def _graph_sff(grad_f: np.ndarray, hess_f: np.ndarray) -> np.ndarray:
    norm = np.sqrt(1.0 + np.einsum('ak,ak->a', grad_f, grad_f))
    return hess_f / norm[:, None, None]


def _log_sff(points: np.ndarray) -> np.ndarray:
    phi = std_chart_array(points)
    m = points.shape[1]
    s = phi[:, :m]
    h = np.einsum('ak,km->akm', s, np.eye(m)) + np.einsum('ak,am->akm', s, s) / phi[:, m:, None]
    return h / np.linalg.norm(phi, axis=1)[:, None, None]


def log_sff(s) -> np.ndarray:
    """h^log_km = (δ_km s_k + s_k s_m/(1 − Σs))/‖Φ(s)‖ in graph coordinates."""
    points = as_points(s, len(s.t) if isinstance(s, ChartPoint) else np.atleast_1d(s).shape[-1])
    return _log_sff(points)[0]


# --- Second fundamental form ---

def _spectrum(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    return pencil_eigenvalues(h, g)


def sff(h: LossHandle, s, chart: str = 'std', config: Optional[Config] = None) -> SFFSample:
    """Metric, second fundamental form and principal curvatures at s.

    The standard-chart route is h_ij = [D²L̃]_ij/‖Φ‖ with g_ij = ⟨∂_iℓ̃, ∂_jℓ̃⟩;
    the graph route uses the graph patch. Both are always computed and their
    principal curvatures compared; `chart` selects which forms are returned.

    Raises:
        NotProper: When the loss is not proper at s.
        SpectrumMismatch: When the two routes disagree.
    """
    if chart not in ('std', 'graph'):
        raise BadParams(f"unknown chart {chart!r}")
    cfg = config or get_config()
    hs = h.std_view()
    points = _points(s, h.n)
    verdict = check_proper(hs, grid=points, config=cfg)
    if not verdict.proper:
        raise NotProper(f"{h.name} is not proper at {verdict.witness}", failure=verdict.failure)

    jets = hs.jets(points)
    phi = std_chart_array(points)
    h_std = risk_hessians(hs, points) / np.linalg.norm(phi, axis=1)[:, None, None]
    g_std = symmetrize(np.einsum('aki,akj->aij', jets.grad, jets.grad))

    _, _, grad_f, hess_f = _graph_arrays(hs, points)
    h_graph = _graph_sff(grad_f, hess_f)
    g_graph = np.eye(points.shape[1]) + np.einsum('ai,aj->aij', grad_f, grad_f)

    k_std = _spectrum(h_std, g_std)[0]
    k_graph = _spectrum(h_graph, g_graph)[0]
    delta = float(np.max(np.abs(k_std - k_graph)) / max(np.max(np.abs(k_std)), 1e-300))
    logger.debug(f"{h.name}: std and graph principal curvatures differ by {delta:.3g}")
    if delta > cfg.TOL_SPECTRUM:
        raise SpectrumMismatch(f"principal curvatures disagree for {h.name}",
                               std=k_std.tolist(), graph=k_graph.tolist(), delta=delta)

    base = tuple(float(x) for x in points[0])
    if chart == 'std':
        return SFFSample('std', base, g_std[0], h_std[0], k_std)
    return SFFSample('graph', base, g_graph[0], h_graph[0], k_graph)


# --- Mixability ---

def pencil_profile(h: LossHandle, points: np.ndarray, base: Optional[LossHandle] = None) -> np.ndarray:
    """Smallest generalized eigenvalue of (h^ℓ, h^base) at each point."""
    points = as_points(points, h.n - 1)
    _, _, grad_f, hess_f = _graph_arrays(h, points)
    h_loss = _graph_sff(grad_f, hess_f)
    if base is None:
        h_base = _log_sff(points)
    else:
        _, _, grad_b, hess_b = _graph_arrays(base, points)
        h_base = _graph_sff(grad_b, hess_b)
    return pencil_eigenvalues(h_loss, h_base)[:, 0]


def _bridge_profile(h: LossHandle, base: LossHandle, points: np.ndarray) -> np.ndarray:
    """λ_min(D²L̃_base, D²L̃_h), the same quantity from the conditional-risk Hessians."""
    return pencil_eigenvalues(risk_hessians(base.std_view(), points),
                              risk_hessians(h.std_view(), points))[:, 0]


def mixability_constant_multi(h: LossHandle, base: Optional[LossHandle] = None,
                              config: Optional[Config] = None) -> MixabilityReport:
    """Grid infimum of the pencil's smallest eigenvalue.

    Raises:
        NotProper: When h fails check_proper.
        PencilSingular: When the base form loses definiteness.
    """
    cfg = config or get_config()
    require_proper(h, cfg)
    base_given = base is not None
    if base_given:
        if base.n != h.n:
            raise BadParams(f"base loss has n={base.n}, loss has n={h.n}")
        require_proper(base, cfg)
    base = base if base_given else log_loss(h.n)

    points = grid_points(h.n, cfg)
    values = pencil_profile(h, points, base if base_given else None)
    index = int(np.argmin(values))
    eta_star, argmin, refined = float(values[index]), points[index], False

    if h.n == 2:
        best = refine_minimum(
            lambda x: float(pencil_profile(h, np.array([[x]]), base if base_given else None)[0]),
            points[:, 0], values, cfg.GOLDEN_XTOL)
        eta_star, argmin, refined = best.value, np.array([best.t]), best.refined

    at = argmin.reshape(1, -1)
    bridge = float(_bridge_profile(h, base, at)[0])
    delta = abs(bridge - eta_star) / max(abs(eta_star), abs(bridge), 1e-300)
    logger.debug(f"{h.name}: pencil and risk-Hessian routes differ by {delta:.3g}")
    logger.info(f"{h.name}: pencil eta* = {eta_star} over {len(points)} grid points")
    return MixabilityReport(
        eta_star=max(eta_star, 0.0),
        argmin=tuple(float(x) for x in argmin),
        route='pencil',
        routes={'pencil': eta_star, 'risk_hessian': bridge},
        deltas={'risk_hessian': delta},
        grid={'resolution': cfg.resolution_for(h.n), 'margin': cfg.MARGIN, 'points': len(points),
              'grid_min': float(values[index]), 'base': base.name},
        refined=refined,
        mixable=bool(eta_star > 0.0),
    )


def _exp_projection_min_eigs(h: LossHandle, eta: float, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    _, _, grad_f, hess_f = _graph_arrays(h, points)
    # Hessian of the exponentiated graph: −δ_km ∂_k f + ∂_k f ∂_m f
    exp_hess = -np.einsum('ak,km->akm', grad_f, np.eye(points.shape[1])) + np.einsum('ak,am->akm', grad_f, grad_f)
    a = symmetrize(hess_f - eta * exp_hess)
    eigs = np.linalg.eigvalsh(a)
    # A cancels to zero for log at eta=1; scale by the size of the terms being subtracted
    tol = (1.0 + np.trace(np.abs(hess_f), axis1=1, axis2=2)
           + eta * np.trace(np.abs(exp_hess), axis1=1, axis2=2))
    return eigs[:, 0], tol


def exp_projection_convexity(h: LossHandle, eta: float, config: Optional[Config] = None) -> ExpProjVerdict:
    """PSD test of A = D²f − η(−diag(Df) + Df Dfᵀ) over the grid.

    Raises:
        NotProper: When h fails check_proper.
    """
    eta = float(eta)
    if not (math.isfinite(eta) and eta > 0.0):
        raise BadParams(f"eta must be positive, got {eta}")
    cfg = config or get_config()
    require_proper(h, cfg)
    points = grid_points(h.n, cfg)
    lowest, scale = _exp_projection_min_eigs(h, eta, points)
    margin = lowest + cfg.TOL_PSD_FACTOR * scale
    worst = int(np.argmin(margin))
    convex = bool(margin[worst] >= 0.0)
    logger.info(f"{h.name}: exp projection at eta={eta} convex={convex}")
    return ExpProjVerdict(
        eta=eta,
        min_eigenvalues=lowest,
        convex=convex,
        worst_point=tuple(float(x) for x in points[worst]),
        margin=float(lowest[worst]),
    )
