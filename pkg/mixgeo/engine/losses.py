"""
Loss registry, loss algebra and the properness and fairness verdicts.
"""
import functools
import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from marshmallow import EXCLUDE, Schema, ValidationError, fields, validate, validates_schema

from .lossdsl import MAX_OUTCOMES, compile_exprs
from ..config.config import Config, get_config
from ..models.loss import (ExpressionLoss, LossHandle, ScaledLoss, SumLoss, TranslatedLoss,
                           as_points)
from ..models.reports import FairnessVerdict, PropernessVerdict
from ..models.simplex import ChartPoint
from ..utils.errors import BadParams, DimMismatch, EvalError, NotProper, UnknownLoss
from ..utils.numerics import extrapolate_limit, halving_offsets, symmetrize

logger = logging.getLogger(__name__)

BUILTINS = ('log', 'brier', 'spherical')


# --- Built-in losses ---

def _coordinates(n: int) -> List[str]:
    """Source text of p_1..p_n in the standard chart."""
    chart = [f"t{i}" for i in range(1, n)]
    last = "(1 - " + " - ".join(chart) + ")"
    return chart + [last]


def _log_exprs(n: int) -> List[str]:
    return [f"-ln({p})" for p in _coordinates(n)]


def _brier_exprs(n: int) -> List[str]:
    p = _coordinates(n)
    exprs = []
    for i in range(n):
        terms = [f"(1 - {p[j]})^2" if j == i else f"{p[j]}^2" for j in range(n)]
        exprs.append(" + ".join(terms))
    return exprs


def _spherical_exprs(n: int) -> List[str]:
    p = _coordinates(n)
    norm = "sqrt(" + " + ".join(f"{x}^2" for x in p) + ")"
    return [f"1 - {x}/{norm}" for x in p]


_BUILTIN_EXPRS = {
    'log': _log_exprs,
    'brier': _brier_exprs,
    'spherical': _spherical_exprs,
}


@functools.lru_cache(maxsize=64)
def _builtin(name: str, n: int) -> ExpressionLoss:
    texts = _BUILTIN_EXPRS[name](n)
    return ExpressionLoss(name, n, compile_exprs(texts, n), kind='builtin', params={'n': n})


def builtin(name: str, params: Optional[Mapping[str, Any]] = None) -> LossHandle:
    """Look up a built-in loss.

    Args:
        name: One of log, brier, spherical.
        params: Optional parameters; only `n` (default 2) is recognised.

    Returns:
        The loss handle.

    Raises:
        UnknownLoss: For names outside the registry.
        BadParams: For unknown parameters or an outcome count outside [2, 10].
    """
    if name not in BUILTINS:
        raise UnknownLoss(f"unknown built-in loss {name!r}", known=list(BUILTINS))
    params = dict(params or {})
    extra = sorted(set(params) - {'n'})
    if extra:
        raise BadParams(f"built-in {name} takes only 'n', got {extra}")
    n = params.get('n', 2)
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 2 <= n <= MAX_OUTCOMES:
        raise BadParams(f"n must be an integer in [2, {MAX_OUTCOMES}], got {n!r}")
    return _builtin(name, int(n))


def log_loss(n: int = 2) -> LossHandle:
    return builtin('log', {'n': n})


def is_log_loss(h: LossHandle) -> bool:
    return isinstance(h, ExpressionLoss) and h.kind == 'builtin' and h.name == 'log'


def from_dsl(exprs: Sequence[str], n: int, name: str = 'dsl') -> LossHandle:
    """Loss whose partial i is the parsed expression i.

    Raises:
        DimMismatch: When the number of expressions differs from n.
        ParseError: Passed through, tagged with the partial index.
    """
    exprs = list(exprs)
    if len(exprs) != n:
        raise DimMismatch(f"expected {n} partial expressions, got {len(exprs)}")
    return ExpressionLoss(name, n, compile_exprs(exprs, n), kind='dsl')


# --- Algebra ---

def scale(h: LossHandle, a: float) -> LossHandle:
    """a·ℓ for a > 0."""
    a = float(a)
    if not (math.isfinite(a) and a > 0.0):
        raise BadParams(f"scale factor must be positive and finite, got {a}")
    return ScaledLoss(h, a)


def translate(h: LossHandle, c: Sequence[float]) -> LossHandle:
    """ℓ + c for a constant vector c."""
    c = tuple(float(x) for x in c)
    if not all(math.isfinite(x) for x in c):
        raise BadParams("translation vector must be finite")
    return TranslatedLoss(h, c)


def add(h1: LossHandle, h2: LossHandle) -> LossHandle:
    return SumLoss(h1, h2, 1.0)


def subtract(h1: LossHandle, h2: LossHandle) -> LossHandle:
    """h1 − h2; the result may leave the nonnegative orthant."""
    return SumLoss(h1, h2, -1.0)


# --- Specification files ---

class LossSpecSchema(Schema):
    """Loss specification validation."""
    name = fields.String(required=True)
    n = fields.Integer(load_default=2, validate=validate.Range(min=2, max=MAX_OUTCOMES))
    kind = fields.String(required=True, validate=validate.OneOf(['builtin', 'dsl', 'derived']))
    exprs = fields.List(fields.String(), load_default=list)
    params = fields.Dict(keys=fields.String(), load_default=dict)
    op = fields.String(load_default=None, allow_none=True,
                       validate=validate.OneOf(['scale', 'translate', 'add', 'subtract']))
    operands = fields.List(fields.Nested(lambda: LossSpecSchema()), load_default=list)

    class Meta:
        unknown = EXCLUDE

    @validates_schema
    def validate_kind(self, data, **kwargs):
        kind = data.get('kind')
        if kind == 'dsl' and len(data.get('exprs', [])) != data.get('n', 2):
            raise ValidationError("dsl specs need one expression per outcome", 'exprs')
        if kind == 'derived':
            op = data.get('op')
            if op is None:
                raise ValidationError("derived specs need an op", 'op')
            arity = 2 if op in ('add', 'subtract') else 1
            if len(data.get('operands', [])) != arity:
                raise ValidationError(f"op {op} takes {arity} operand(s)", 'operands')
            if op == 'scale' and 'a' not in data.get('params', {}):
                raise ValidationError("scale needs params.a", 'params')
            if op == 'translate' and 'c' not in data.get('params', {}):
                raise ValidationError("translate needs params.c", 'params')


def _build(data: Dict[str, Any]) -> LossHandle:
    kind = data['kind']
    if kind == 'builtin':
        return builtin(data['name'], {'n': data['n'], **data['params']})
    if kind == 'dsl':
        return from_dsl(data['exprs'], data['n'], name=data['name'])

    operands = [_build(op) for op in data['operands']]
    op = data['op']
    try:
        if op == 'scale':
            return scale(operands[0], data['params']['a'])
        if op == 'translate':
            return translate(operands[0], data['params']['c'])
    except (TypeError, ValueError) as e:
        raise BadParams(f"bad parameters for {op}: {e}")
    if op == 'add':
        return add(*operands)
    return subtract(*operands)


def from_spec(spec: Mapping[str, Any]) -> LossHandle:
    """Build a loss from a JSON-style specification.

    Raises:
        BadParams: When the specification does not validate.
    """
    try:
        data = LossSpecSchema().load(dict(spec))
    except ValidationError as e:
        logger.warning(f"Loss specification rejected: {e.messages}")
        raise BadParams("invalid loss specification", errors=e.messages)
    return _build(data)


# --- Verdicts ---

def _grid(h: LossHandle, grid, cfg: Config) -> np.ndarray:
    if grid is None:
        return h.chart.grid(cfg.resolution_for(h.n), cfg.MARGIN)
    if isinstance(grid, (list, tuple)) and grid and isinstance(grid[0], ChartPoint):
        return np.array([g.as_array() for g in grid])
    return as_points(grid, h.dim)


def risk_hessians(h: LossHandle, points: np.ndarray) -> np.ndarray:
    """[D²L̃]_ij(s) = Σ_k ∂²_{ij}ℓ̃_k(s)·Φ_k(s) in the handle's chart, shape (N, m, m)."""
    points = as_points(points, h.dim)
    jets = h.jets(points)
    phi = h.chart.frame(points).phi
    return symmetrize(np.einsum('akij,ak->aij', jets.hess, phi))


def check_proper(h: LossHandle, grid=None, config: Optional[Config] = None) -> PropernessVerdict:
    """Decide properness on a grid by the first- and second-order conditions.

    Args:
        h: Loss handle.
        grid: ChartPoints or an (N, n-1) array in the handle's chart; defaults to the
            configured interior grid.
        config: Settings; defaults to `get_config()`.

    Returns:
        The verdict, with the first failing grid point as witness.
    """
    cfg = config or get_config()
    points = _grid(h, grid, cfg)
    jets = h.jets(points)
    phi = h.chart.frame(points).phi

    alignment = np.abs(np.einsum('aki,ak->ai', jets.grad, phi)).max(axis=1)
    norms = 1.0 + np.linalg.norm(jets.grad, axis=(1, 2)) * np.linalg.norm(phi, axis=1)
    alignment = alignment / norms

    d2 = symmetrize(np.einsum('akij,ak->aij', jets.hess, phi))
    lowest = np.linalg.eigvalsh(d2)[:, 0]
    tol_pd = cfg.TOL_PD_FACTOR * (1.0 + np.linalg.norm(d2, axis=(1, 2)))

    bad_align = alignment > cfg.TOL_ALIGN
    bad_pd = lowest <= tol_pd
    bad = bad_align | bad_pd
    witness, failure = None, None
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        witness = tuple(float(x) for x in points[index])
        failure = 'alignment' if bad_align[index] else 'second_order'
        logger.info(f"{h.name} is not proper: {failure} fails at {witness}")
    else:
        logger.info(f"{h.name} is proper on {len(points)} grid points")

    return PropernessVerdict(
        proper=not bad.any(),
        worst_alignment=float(alignment.max()),
        min_second_order=float(lowest.min()),
        witness=witness,
        failure=failure,
        grid_size=len(points),
        tol_align=cfg.TOL_ALIGN,
    )


def _boundary_limit(h: LossHandle, ts: np.ndarray, k: int, cfg: Config) -> float:
    try:
        samples = h.values(ts)[:, k]
    except EvalError as e:
        logger.warning(f"{h.name}: partial {k + 1} does not evaluate near the boundary ({e.message})")
        return math.inf
    return extrapolate_limit(samples, cfg.BOUNDARY_GROWTH, cfg.RICHARDSON_ORDER)


def fairness_check(h: LossHandle, config: Optional[Config] = None) -> FairnessVerdict:
    """Boundary limits of ℓ̃₁ as t → 1⁻ and ℓ̃₂ as t → 0⁺.

    A fair loss has zero loss on the outcome that was predicted with certainty.
    """
    if h.n != 2:
        raise DimMismatch(f"fairness_check is binary, got n={h.n}")
    cfg = config or get_config()
    hs = h.std_view()
    offsets = halving_offsets(cfg.MARGIN, cfg.BOUNDARY_STEPS)
    first = _boundary_limit(hs, 1.0 - offsets, 0, cfg)
    second = _boundary_limit(hs, offsets, 1, cfg)
    fair = abs(first) <= cfg.TOL_FAIR and abs(second) <= cfg.TOL_FAIR
    logger.info(f"{h.name}: fairness limits ({first}, {second}), fair={fair}")
    return FairnessVerdict(fair, first, second, cfg.TOL_FAIR)


def require_proper(h: LossHandle, config: Optional[Config] = None) -> PropernessVerdict:
    """check_proper, raising NotProper with the witness when it fails."""
    verdict = check_proper(h, config=config)
    if not verdict.proper:
        raise NotProper(f"{h.name} is not proper ({verdict.failure})",
                        witness=verdict.witness, failure=verdict.failure)
    return verdict
