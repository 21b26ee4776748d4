"""
Link functions ψ: (0,1) → ℝ used to reparametrize binary losses.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..utils.errors import NonMonotoneLink, OutOfDomain

logger = logging.getLogger(__name__)

InverseJet = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True, eq=False)
class LinkFunction:
    """A strictly monotone link with tabulated knots and an inverse jet.

    `inverse_jet(v)` returns (u, du/dv, d²u/dv²) with u = ψ⁻¹(v).
    """
    name: str
    knots_t: np.ndarray
    knots_v: np.ndarray
    forward_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    inverse_jet_fn: Callable[[np.ndarray], InverseJet] = field(repr=False)
    valid_range: Tuple[float, float] = (-np.inf, np.inf)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.knots_t, dtype=float)
        v = np.asarray(self.knots_v, dtype=float)
        object.__setattr__(self, 'knots_t', t)
        object.__setattr__(self, 'knots_v', v)
        if t.shape != v.shape or t.size < 2:
            raise NonMonotoneLink("link tabulation needs matching knot arrays of length ≥ 2")
        if np.any(np.diff(t) <= 0.0):
            raise NonMonotoneLink("link knots must be strictly increasing in t")
        dv = np.diff(v)
        if not (np.all(dv > 0.0) or np.all(dv < 0.0)):
            index = int(np.flatnonzero(np.sign(dv) != np.sign(dv[0]))[0]) if dv[0] != 0 else 0
            raise NonMonotoneLink(f"link {self.name} is not strictly monotone",
                                  t=float(t[index]), index=index)

    @property
    def increasing(self) -> bool:
        return bool(self.knots_v[-1] > self.knots_v[0])

    def forward(self, t) -> np.ndarray:
        """ψ(t)."""
        return np.asarray(self.forward_fn(np.asarray(t, dtype=float)), dtype=float)

    def check(self, v) -> None:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        low, high = self.valid_range
        bad = ~np.isfinite(v) | (v <= low) | (v >= high)
        if bad.any():
            index = int(np.flatnonzero(bad)[0])
            raise OutOfDomain(f"v={v[index]} outside the range of link {self.name}",
                              index=index, valid_range=[low, high])

    def inverse(self, v) -> np.ndarray:
        """ψ⁻¹(v)."""
        return self.inverse_jet(v)[0]

    def inverse_jet(self, v) -> InverseJet:
        self.check(v)
        u, du, d2u = self.inverse_jet_fn(np.asarray(v, dtype=float))
        return np.asarray(u, dtype=float), np.asarray(du, dtype=float), np.asarray(d2u, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "valid_range": list(self.valid_range),
            "knots": len(self.knots_t),
            "increasing": self.increasing,
            **self.metadata,
        }

    def __repr__(self):
        return f"<LinkFunction {self.name} knots={len(self.knots_t)}>"


def identity_link(knots: int = 101) -> LinkFunction:
    """ψ(t) = t."""
    t = np.linspace(0.0, 1.0, knots)

    def inverse_jet(v):
        return v, np.ones_like(v), np.zeros_like(v)

    return LinkFunction('identity', t, t.copy(), lambda x: x, inverse_jet, valid_range=(0.0, 1.0))


def logit_link(knots: int = 101) -> LinkFunction:
    """ψ(t) = ln(t/(1-t)), inverse the logistic sigmoid."""
    t = np.linspace(0.01, 0.99, knots)

    def forward(x):
        return np.log(x) - np.log1p(-x)

    def inverse_jet(v):
        u = 0.5 * (1.0 + np.tanh(0.5 * v))
        du = u * (1.0 - u)
        return u, du, du * (1.0 - 2.0 * u)

    return LinkFunction('logit', t, forward(t), forward, inverse_jet)


def tabulated_link(knots_t, knots_v, name: str = 'tabulated') -> LinkFunction:
    """Monotone-cubic link through user knots; derivatives come from the interpolant."""
    knots_t = np.asarray(knots_t, dtype=float)
    knots_v = np.asarray(knots_v, dtype=float)
    if knots_t.size < 2 or np.any(np.diff(knots_t) <= 0.0):
        raise NonMonotoneLink("link knots must be strictly increasing in t")
    dv = np.diff(knots_v)
    if not (np.all(dv > 0.0) or np.all(dv < 0.0)):
        raise NonMonotoneLink(f"link {name} is not strictly monotone")

    forward = PchipInterpolator(knots_t, knots_v, extrapolate=False)
    order = np.argsort(knots_v)
    inverse = PchipInterpolator(knots_v[order], knots_t[order], extrapolate=False)
    d_inverse = inverse.derivative(1)
    d2_inverse = inverse.derivative(2)

    def inverse_jet(v):
        return inverse(v), d_inverse(v), d2_inverse(v)

    return LinkFunction(name, knots_t, knots_v, forward, inverse_jet,
                        valid_range=(float(knots_v.min()), float(knots_v.max())))
