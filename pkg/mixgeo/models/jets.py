"""
Second-order truncated Taylor arithmetic.

A `Taylor` carries (v, d1, d2) of a scalar function along one direction,
with numpy arrays so a whole grid is swept in one pass. `Jet2` and `JetN`
are the per-point results handed to callers.
"""
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from ..utils.errors import EvalError


def _first_bad(mask) -> int:
    return int(np.flatnonzero(np.atleast_1d(mask))[0])


class Taylor:
    """Truncated Taylor polynomial v + d1·h + d2·h²/2."""
    __slots__ = ('v', 'd1', 'd2')

    def __init__(self, v, d1=0.0, d2=0.0):
        self.v = np.asarray(v, dtype=float)
        self.d1 = np.asarray(d1, dtype=float)
        self.d2 = np.asarray(d2, dtype=float)

    @classmethod
    def constant(cls, c, like=None):
        if like is None:
            return cls(c, 0.0, 0.0)
        return cls(np.full_like(like.v, c), np.zeros_like(like.v), np.zeros_like(like.v))

    @classmethod
    def variable(cls, x, direction=1.0):
        x = np.asarray(x, dtype=float)
        return cls(x, np.full_like(x, direction), np.zeros_like(x))

    def __str__(self):
        return f"{self.v} + {self.d1} h + {self.d2} h^2/2"

    def __add__(self, other):
        if isinstance(other, Taylor):
            return Taylor(self.v + other.v, self.d1 + other.d1, self.d2 + other.d2)
        return Taylor(self.v + other, self.d1, self.d2)

    __radd__ = __add__

    def __neg__(self):
        return Taylor(-self.v, -self.d1, -self.d2)

    def __sub__(self, other):
        if isinstance(other, Taylor):
            return Taylor(self.v - other.v, self.d1 - other.d1, self.d2 - other.d2)
        return Taylor(self.v - other, self.d1, self.d2)

    def __rsub__(self, other):
        return Taylor(other - self.v, -self.d1, -self.d2)

    def __mul__(self, other):
        if isinstance(other, Taylor):
            return Taylor(self.v * other.v,
                          self.d1 * other.v + self.v * other.d1,
                          self.d2 * other.v + 2.0 * self.d1 * other.d1 + self.v * other.d2)
        return Taylor(self.v * other, self.d1 * other, self.d2 * other)

    __rmul__ = __mul__

    def reciprocal(self):
        if np.any(self.v == 0.0):
            raise EvalError("division by zero", index=_first_bad(self.v == 0.0))
        inv = 1.0 / self.v
        return self._compose(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Taylor):
            return self * other.reciprocal()
        if other == 0:
            raise EvalError("division by zero")
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def _compose(self, f0, f1, f2):
        # chain rule for φ(a): (φ, φ'·a', φ''·a'^2 + φ'·a'')
        return Taylor(f0, f1 * self.d1, f2 * self.d1 * self.d1 + f1 * self.d2)

    def exp(self):
        e = np.exp(self.v)
        if not np.all(np.isfinite(e)):
            raise EvalError("exp overflow", index=_first_bad(~np.isfinite(e)))
        return self._compose(e, e, e)

    def log(self):
        if np.any(self.v <= 0.0):
            raise EvalError("ln of a non-positive value", index=_first_bad(self.v <= 0.0))
        inv = 1.0 / self.v
        return self._compose(np.log(self.v), inv, -inv * inv)

    def sqrt(self):
        if np.any(self.v <= 0.0):
            raise EvalError("sqrt of a non-positive value", index=_first_bad(self.v <= 0.0))
        r = np.sqrt(self.v)
        return self._compose(r, 0.5 / r, -0.25 / (r * self.v))

    def __pow__(self, c):
        c = float(c)
        if c == 0.0:
            return Taylor.constant(1.0, like=self)
        if c == 1.0:
            return self
        if c == 2.0:
            return self * self
        if float(c).is_integer() and c > 0:
            v = self.v
            return self._compose(v ** c, c * v ** (c - 1.0), c * (c - 1.0) * v ** (c - 2.0))
        if float(c).is_integer():
            if np.any(self.v == 0.0):
                raise EvalError("division by zero in negative power", index=_first_bad(self.v == 0.0))
        elif np.any(self.v <= 0.0):
            raise EvalError("fractional power of a non-positive value", index=_first_bad(self.v <= 0.0))
        v = self.v
        return self._compose(v ** c, c * v ** (c - 1.0), c * (c - 1.0) * v ** (c - 2.0))


@dataclass(frozen=True)
class Jet2:
    """Value, first and second derivative w.r.t. the single chart coordinate."""
    v: float
    d1: float
    d2: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.v, self.d1, self.d2)

    def to_dict(self) -> Dict[str, Any]:
        return {"v": self.v, "d1": self.d1, "d2": self.d2}


@dataclass(frozen=True)
class JetN:
    """Value, gradient and Hessian w.r.t. the n-1 chart coordinates."""
    v: float
    grad: np.ndarray
    hess: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {"v": self.v, "grad": self.grad.tolist(), "hess": self.hess.tolist()}

    def restrict(self) -> Jet2:
        """The one-dimensional jet of an n=2 function."""
        return Jet2(float(self.v), float(self.grad[0]), float(self.hess[0, 0]))
