"""
Result records returned by the analysis modules.
"""
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


def plain(value: Any) -> Any:
    """Convert numpy values and nested records to JSON-friendly Python values."""
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    return value


class Report:
    """Mixin giving dataclass reports a `to_dict()`."""

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: plain(getattr(self, f.name)) for f in fields(self) if f.repr}


# --- losses ---

@dataclass(frozen=True)
class PropernessVerdict(Report):
    proper: bool
    worst_alignment: float
    min_second_order: float
    witness: Optional[Tuple[float, ...]]
    failure: Optional[str]
    grid_size: int
    tol_align: float

    def __bool__(self):
        return bool(self.proper)


@dataclass(frozen=True)
class FairnessVerdict(Report):
    fair: bool
    limit_first: float   # ℓ̃₁ as t → 1⁻
    limit_second: float  # ℓ̃₂ as t → 0⁺
    tol_fair: float

    def __bool__(self):
        return bool(self.fair)


# --- binary geometry ---

@dataclass(frozen=True)
class CurvatureSample(Report):
    t: float
    point: Tuple[float, float]
    normal: Tuple[float, float]
    kappa_plus: float
    kappa_c: float


@dataclass(frozen=True)
class WeightSample(Report):
    t: float
    w: float
    w_check: float
    chart: str


@dataclass(frozen=True)
class QuotientSample(Report):
    t: float
    value: float
    weight_ratio: float
    delta: float

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class MixabilityReport(Report):
    eta_star: float
    argmin: Tuple[float, ...]
    route: str
    routes: Dict[str, float]
    deltas: Dict[str, float]
    grid: Dict[str, Any]
    refined: bool
    mixable: bool
    boundary: Optional[str] = None

    @property
    def argmin_t(self) -> float:
        return float(self.argmin[0])


@dataclass(frozen=True)
class FundamentalityReport(Report):
    B1: float
    B2: float
    limit_0: float
    limit_1: float
    sup_quotient: float
    inf_quotient: float
    fundamental: bool
    base: str


@dataclass(frozen=True)
class LinkVerdict(Report):
    valid: bool
    max_ratio_error: float
    max_roundtrip_error: float
    witness_v: Optional[float]
    samples: int

    def __bool__(self):
        return bool(self.valid)


@dataclass(frozen=True)
class ExpCurvatureVerdict(Report):
    eta: float
    max_bracket: float
    convex: bool
    worst_t: float


# --- multi-class geometry ---

@dataclass(frozen=True)
class SFFSample(Report):
    chart: str
    base: Tuple[float, ...]
    g: np.ndarray
    h: np.ndarray
    principal_curvatures: np.ndarray


@dataclass(frozen=True)
class GraphPatch(Report):
    x_star: np.ndarray
    f_value: float
    grad_f: np.ndarray
    hess_f: np.ndarray


@dataclass(frozen=True)
class ExpProjVerdict(Report):
    eta: float
    min_eigenvalues: np.ndarray = field(repr=False)
    convex: bool
    worst_point: Tuple[float, ...]
    margin: float

    def to_dict(self):
        out = super().to_dict()
        out["grid_size"] = int(len(self.min_eigenvalues))
        return out


# --- convex geometry ---

@dataclass(frozen=True)
class RiskEval(Report):
    p: Tuple[float, ...]
    q: Tuple[float, ...]
    L: float
    bayes: float
    hess_bayes: np.ndarray
    brute_force: bool


@dataclass(frozen=True)
class SlideVerdict(Report):
    eta: float
    convexity_margin: float
    slides_freely: bool
    worst_point: Tuple[float, ...]

    def __bool__(self):
        return bool(self.slides_freely)


@dataclass(frozen=True)
class MembershipVerdict(Report):
    member: bool
    witness: Tuple[float, ...]
    gap: float

    def __bool__(self):
        return bool(self.member)


@dataclass(frozen=True)
class DecompositionReport(Report):
    eta_star: float
    residual: Any = field(repr=False)
    degenerate: bool
    nonnegative: bool
    aligned: bool
    min_curvature: float
    semidefinite_points: List[Tuple[float, ...]]

    def to_dict(self):
        out = super().to_dict()
        out["residual"] = self.residual.to_dict()
        return out


@dataclass(frozen=True)
class SandwichVerdict(Report):
    eta: float
    gamma: float
    holds: bool
    worst_inner_gap: float
    worst_outer_gap: float
    points: int
    directions: int

    def __bool__(self):
        return bool(self.holds)


# --- consistency checks ---

@dataclass(frozen=True)
class CheckResult(Report):
    name: str
    passed: bool
    delta: float
    detail: str = ''

    @property
    def status(self) -> str:
        return "pass" if self.passed else "FAIL"