"""
Loss handles: a loss ℓ: Δⁿ → ℝⁿ with exact chart derivatives.

Every handle evaluates in its own chart. Expression, scaled, translated and
summed losses live in the standard chart; composite losses live in the
chart of a link function. `std_view()` returns the same loss expressed in
the standard chart, which is where the multi-class and convex analyses run.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from .jets import Jet2, JetN
from .link import LinkFunction
from .simplex import ChartPoint, check_interior, lattice, std_chart_array
from ..utils.errors import BadParams, DimMismatch, OutOfDomain

logger = logging.getLogger(__name__)

PointLike = Union[ChartPoint, float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class LossJets:
    """Partial-loss jets over a batch of chart points.

    Shapes: value (N, n), grad (N, n, m), hess (N, n, m, m) with m = dim of the chart.
    """
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    def __len__(self):
        return self.value.shape[0]

    @property
    def n(self) -> int:
        return self.value.shape[1]

    def scaled(self, a: float) -> 'LossJets':
        return LossJets(a * self.value, a * self.grad, a * self.hess)

    def shifted(self, c: np.ndarray) -> 'LossJets':
        return LossJets(self.value + c, self.grad, self.hess)

    def plus(self, other: 'LossJets', sign: float = 1.0) -> 'LossJets':
        return LossJets(self.value + sign * other.value,
                        self.grad + sign * other.grad,
                        self.hess + sign * other.hess)

    def partial(self, k: int, index: int = 0) -> JetN:
        """Jet of partial loss k (0-based) at sample `index`."""
        return JetN(float(self.value[index, k]), self.grad[index, k].copy(), self.hess[index, k].copy())

    def jet2(self, k: int, index: int = 0) -> Jet2:
        return Jet2(float(self.value[index, k]), float(self.grad[index, k, 0]),
                    float(self.hess[index, k, 0, 0]))


@dataclass(frozen=True)
class ChartFrame:
    """Φ and its first two derivatives over a batch of chart points."""
    phi: np.ndarray      # (N, n)
    dphi: np.ndarray     # (N, n, m)
    d2phi: np.ndarray    # (N, n, m, m)


class Chart(ABC):
    """Local parametrization of the simplex interior."""
    n: int
    name: str

    @property
    def dim(self) -> int:
        return self.n - 1

    @abstractmethod
    def check(self, points: np.ndarray) -> None:
        """Raise OutOfDomain for points outside the chart domain."""

    @abstractmethod
    def frame(self, points: np.ndarray) -> ChartFrame:
        pass

    def simplex(self, points: np.ndarray) -> np.ndarray:
        return self.frame(points).phi

    @abstractmethod
    def locate(self, p: np.ndarray) -> np.ndarray:
        """Chart coordinates of simplex points, shape (N, m)."""

    @abstractmethod
    def to_std(self, points: np.ndarray) -> np.ndarray:
        """Standard-chart coordinates of chart points."""

    def grid(self, resolution: int, margin: float) -> np.ndarray:
        """Interior grid in this chart's coordinates."""
        return self.locate(std_chart_array(lattice(self.n, resolution, margin)))

    def same_as(self, other: 'Chart') -> bool:
        return self is other or (type(self) is type(other) and self.n == other.n and self.name == other.name)


class StdChart(Chart):
    """Φ_std(t) = (t_1, ..., t_{n-1}, 1 - Σt_i)."""

    def __init__(self, n: int):
        self.n = n
        self.name = 'std'

    def check(self, points):
        check_interior(points)

    def frame(self, points):
        points = np.atleast_2d(points)
        count, m = points.shape
        phi = std_chart_array(points)
        dphi = np.zeros((count, self.n, m))
        dphi[:, :m, :] = np.eye(m)
        dphi[:, m, :] = -1.0
        return ChartFrame(phi, dphi, np.zeros((count, self.n, m, m)))

    def locate(self, p):
        return np.atleast_2d(p)[:, :-1].copy()

    def to_std(self, points):
        return np.atleast_2d(points)

    def __repr__(self):
        return f"<StdChart n={self.n}>"


class LinkChart(Chart):
    """Binary chart v ↦ (ψ⁻¹(v), 1 - ψ⁻¹(v))."""

    def __init__(self, link: LinkFunction):
        self.n = 2
        self.link = link
        self.name = f"link:{link.name}"

    def check(self, points):
        self.link.check(np.atleast_2d(points)[:, 0])

    def frame(self, points):
        points = np.atleast_2d(points)
        u, du, d2u = self.link.inverse_jet(points[:, 0])
        phi = np.stack([u, 1.0 - u], axis=1)
        dphi = np.stack([du, -du], axis=1)[:, :, None]
        d2phi = np.stack([d2u, -d2u], axis=1)[:, :, None, None]
        return ChartFrame(phi, dphi, d2phi)

    def locate(self, p):
        return self.link.forward(np.atleast_2d(p)[:, 0]).reshape(-1, 1)

    def to_std(self, points):
        return self.link.inverse(np.atleast_2d(points)[:, 0]).reshape(-1, 1)

    def same_as(self, other):
        return isinstance(other, LinkChart) and other.link is self.link

    def __repr__(self):
        return f"<LinkChart {self.link.name}>"


def as_points(t: PointLike, dim: int) -> np.ndarray:
    """Normalize chart input (ChartPoint, scalar, vector or batch) to shape (N, dim)."""
    if isinstance(t, ChartPoint):
        arr = t.as_array().reshape(1, -1)
    else:
        arr = np.asarray(t, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.shape[1] != dim:
        raise DimMismatch(f"expected {dim} chart coordinates, got {arr.shape[1]}")
    return arr


class LossHandle(ABC):
    """A loss on n outcomes with exact first and second chart derivatives."""
    name: str
    n: int

    @property
    def dim(self) -> int:
        return self.n - 1

    @property
    @abstractmethod
    def chart(self) -> Chart:
        pass

    @property
    @abstractmethod
    def provenance(self) -> Dict[str, Any]:
        pass

    @abstractmethod
    def _jets(self, points: np.ndarray) -> LossJets:
        pass

    def jets(self, t: PointLike) -> LossJets:
        """Jets of all partial losses at one or more chart points."""
        points = as_points(t, self.dim)
        self.chart.check(points)
        return self._jets(points)

    def values(self, t: PointLike) -> np.ndarray:
        return self.jets(t).value

    def partials(self, t: PointLike) -> List[Union[Jet2, JetN]]:
        """Per-outcome jets at a single chart point (Jet2 when n=2)."""
        jets = self.jets(t)
        if self.n == 2:
            return [jets.jet2(k) for k in range(self.n)]
        return [jets.partial(k) for k in range(self.n)]

    def at_simplex(self, p: np.ndarray) -> LossJets:
        """Jets at simplex points, located in this handle's chart."""
        return self.jets(self.chart.locate(np.atleast_2d(p)))

    def std_view(self) -> 'LossHandle':
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "n": self.n, "chart": self.chart.name, "provenance": self.provenance}

    def __repr__(self):
        return f"<Loss {self.name} n={self.n}>"


@dataclass(frozen=True, eq=False, repr=False)
class ExpressionLoss(LossHandle):
    """Partial losses given by parsed expressions in the standard chart."""
    name: str
    n: int
    exprs: Tuple[Any, ...]
    kind: str = 'dsl'
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.exprs) != self.n:
            raise DimMismatch(f"loss {self.name} needs {self.n} partials, got {len(self.exprs)}")
        object.__setattr__(self, '_chart', StdChart(self.n))

    @property
    def chart(self):
        return self._chart

    @property
    def provenance(self):
        return {"kind": self.kind, "exprs": [e.text or str(e) for e in self.exprs], "params": dict(self.params)}

    def _jets(self, points):
        # local import keeps models free of an engine import at load time
        from ..engine.lossdsl import expr_jets
        parts = [expr_jets(e, points) for e in self.exprs]
        return LossJets(np.stack([p[0] for p in parts], axis=1),
                        np.stack([p[1] for p in parts], axis=1),
                        np.stack([p[2] for p in parts], axis=1))


@dataclass(frozen=True, eq=False, repr=False)
class ScaledLoss(LossHandle):
    base: LossHandle
    a: float

    def __post_init__(self):
        object.__setattr__(self, 'name', f"scale({self.base.name}, {self.a!r})")
        object.__setattr__(self, 'n', self.base.n)

    @property
    def chart(self):
        return self.base.chart

    @property
    def provenance(self):
        return {"kind": "derived", "op": "scale", "a": self.a, "operands": [self.base.provenance]}

    def _jets(self, points):
        return self.base._jets(points).scaled(self.a)

    def std_view(self):
        base = self.base.std_view()
        return self if base is self.base else ScaledLoss(base, self.a)


@dataclass(frozen=True, eq=False, repr=False)
class TranslatedLoss(LossHandle):
    base: LossHandle
    c: Tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in self.c)
        if len(c) != self.base.n:
            raise DimMismatch(f"translation needs {self.base.n} components, got {len(c)}")
        object.__setattr__(self, 'c', c)
        object.__setattr__(self, 'name', f"translate({self.base.name}, {list(c)})")
        object.__setattr__(self, 'n', self.base.n)

    @property
    def chart(self):
        return self.base.chart

    @property
    def provenance(self):
        return {"kind": "derived", "op": "translate", "c": list(self.c), "operands": [self.base.provenance]}

    def _jets(self, points):
        return self.base._jets(points).shifted(np.asarray(self.c))

    def std_view(self):
        base = self.base.std_view()
        return self if base is self.base else TranslatedLoss(base, self.c)


@dataclass(frozen=True, eq=False, repr=False)
class SumLoss(LossHandle):
    """left + sign·right, pointwise."""
    left: LossHandle
    right: LossHandle
    sign: float = 1.0

    def __post_init__(self):
        if self.left.n != self.right.n:
            raise DimMismatch(f"cannot combine n={self.left.n} with n={self.right.n}")
        if not self.left.chart.same_as(self.right.chart):
            raise BadParams(f"cannot combine losses in charts {self.left.chart.name} and {self.right.chart.name}")
        op = '+' if self.sign > 0 else '-'
        object.__setattr__(self, 'name', f"({self.left.name} {op} {self.right.name})")
        object.__setattr__(self, 'n', self.left.n)

    @property
    def chart(self):
        return self.left.chart

    @property
    def provenance(self):
        op = "add" if self.sign > 0 else "subtract"
        return {"kind": "derived", "op": op, "operands": [self.left.provenance, self.right.provenance]}

    def _jets(self, points):
        return self.left._jets(points).plus(self.right._jets(points), self.sign)

    def std_view(self):
        left, right = self.left.std_view(), self.right.std_view()
        if left is self.left and right is self.right:
            return self
        return SumLoss(left, right, self.sign)


@dataclass(frozen=True, eq=False, repr=False)
class CompositeLoss(LossHandle):
    """Binary loss expressed in the chart of a link: ϱ̂ = ϱ̃ ∘ ψ⁻¹."""
    base: LossHandle
    link: LinkFunction

    def __post_init__(self):
        if self.base.n != 2:
            raise DimMismatch("composite losses are binary")
        object.__setattr__(self, 'base', self.base.std_view())
        object.__setattr__(self, 'name', f"composite({self.base.name}, {self.link.name})")
        object.__setattr__(self, 'n', 2)
        object.__setattr__(self, '_chart', LinkChart(self.link))

    @property
    def chart(self):
        return self._chart

    @property
    def provenance(self):
        return {"kind": "derived", "op": "composite", "link": self.link.name,
                "operands": [self.base.provenance]}

    def _jets(self, points):
        u, du, d2u = self.link.inverse_jet(points[:, 0])
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            index = int(np.flatnonzero((u <= 0.0) | (u >= 1.0))[0])
            raise OutOfDomain("link inverse left (0, 1)", index=index, v=float(points[index, 0]))
        inner = self.base._jets(u.reshape(-1, 1))
        d1 = inner.grad[:, :, 0]
        d2 = inner.hess[:, :, 0, 0]
        grad = (d1 * du[:, None])[:, :, None]
        hess = (d2 * (du * du)[:, None] + d1 * d2u[:, None])[:, :, None, None]
        return LossJets(inner.value, grad, hess)

    def std_view(self):
        return self.base
