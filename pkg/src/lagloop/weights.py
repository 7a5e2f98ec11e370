"""Symmetric submultiplicative weights on the Fourier lattice.

A weight ``w`` assigns a positive size ``w(k)`` to every integer frequency
``k`` and must satisfy ``w(k + l) <= w(k) * w(l)`` together with the
symmetry ``w(-k) = w(k)``.  Weighted Wiener norms are built on top of
these (see :mod:`lagloop.loops`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams


@dataclass(frozen=True)
class Weight:
    """Weight function on integer Fourier indices.

    Two families are available:

    * ``polynomial``: ``w(k) = (1 + |k|)**a`` with exponent ``a >= 0``;
    * ``gevrey``: ``w(k) = exp(t * |k|**s)`` with scale ``t > 0`` and
      order ``0 < s < 1``.

    Both are symmetric, submultiplicative, satisfy ``w(0) = 1`` and are of
    non-analytic type (``w(n)**(1/n) -> 1``).
    """

    kind: str = "polynomial"
    a: float = 1.0
    t: float = 1.0
    s: float = 0.5

    def __post_init__(self):
        if self.kind == "polynomial":
            if self.a < 0:
                raise InvalidParams("polynomial weight needs exponent a >= 0")
        elif self.kind == "gevrey":
            if self.t <= 0:
                raise InvalidParams("gevrey weight needs scale t > 0")
            if not 0 < self.s < 1:
                raise InvalidParams("gevrey weight needs order 0 < s < 1")
        else:
            raise InvalidParams(f"unknown weight kind {self.kind!r}")

    def __call__(self, k):
        """Evaluate the weight at integer index ``k`` (scalar or array)."""
        k = np.abs(np.asarray(k, dtype=float))
        if self.kind == "polynomial":
            return (1.0 + k) ** self.a
        return np.exp(self.t * k**self.s)

    @staticmethod
    def polynomial(a: float = 1.0) -> "Weight":
        return Weight(kind="polynomial", a=a)

    @staticmethod
    def gevrey(t: float = 1.0, s: float = 0.5) -> "Weight":
        return Weight(kind="gevrey", t=t, s=s)


#: Default weight used throughout the package.
DEFAULT_WEIGHT = Weight.polynomial(1.0)
