"""Brute-force Gaussian moment oracle.

Random variables are held as explicit polynomials in ``D`` independent
standard Gaussians ``W_1..W_D``.  Expectations factor over coordinates and use
``E[W^k] = (k-1)!!`` (the number of Wick pairings of k points), so nothing
here relies on contraction or chaos formulas.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import hermite_e
from scipy import signal

from .errors import CapExceededError

MAX_DEGREE = 12
MAX_DIM = 4


def gaussian_moment(k: int) -> float:
    """``E[Z^k]`` for ``Z ~ N(0, 1)``."""
    if k % 2:
        return 0.0
    return float(math.prod(range(k - 1, 0, -2)))


class GaussianPolynomial:
    """Dense polynomial ``sum_k c_k W^k`` over multi-exponents ``k``."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        coef = np.asarray(coef, dtype=float)
        if coef.ndim == 0 or len(set(coef.shape)) != 1:
            raise ValueError("coefficient array must have shape (deg+1,)*D")
        self.coef = coef

    @property
    def dim(self) -> int:
        return self.coef.ndim

    @property
    def degree(self) -> int:
        nz = np.argwhere(self.coef != 0)
        return int(nz.sum(axis=1).max()) if nz.size else 0

    @classmethod
    def constant(cls, c: float, dim: int) -> "GaussianPolynomial":
        return cls(np.full((1,) * dim, float(c)))

    @classmethod
    def variable(cls, i: int, dim: int) -> "GaussianPolynomial":
        coef = np.zeros((2,) * dim)
        idx = [0] * dim
        idx[i] = 1
        coef[tuple(idx)] = 1.0
        return cls(coef)

    @classmethod
    def linear(cls, weights) -> "GaussianPolynomial":
        """``sum_i weights[i] W_i``."""
        weights = np.asarray(weights, dtype=float)
        coef = np.zeros((2,) * weights.size)
        for i, w in enumerate(weights):
            idx = [0] * weights.size
            idx[i] = 1
            coef[tuple(idx)] = w
        return cls(coef)

    @classmethod
    def hermite_product(cls, alpha, size: int | None = None) -> "GaussianPolynomial":
        """``prod_i H_{alpha_i}(W_i)``."""
        size = size or sum(alpha) + 1
        out = np.ones(())
        for a in alpha:
            unit = np.zeros(a + 1)
            unit[a] = 1.0
            c = np.zeros(size)
            c[: a + 1] = hermite_e.herme2poly(unit)
            out = np.multiply.outer(out, c)
        return cls(out)

    def _padded(self, size: int) -> np.ndarray:
        pad = size - self.coef.shape[0]
        return np.pad(self.coef, [(0, pad)] * self.dim) if pad > 0 else self.coef

    def __add__(self, other):
        if not isinstance(other, GaussianPolynomial):
            other = GaussianPolynomial.constant(other, self.dim)
        size = max(self.coef.shape[0], other.coef.shape[0])
        return GaussianPolynomial(self._padded(size) + other._padded(size))

    __radd__ = __add__

    def __neg__(self):
        return GaussianPolynomial(-self.coef)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, GaussianPolynomial):
            return GaussianPolynomial(self.coef * float(other))
        if self.degree + other.degree > MAX_DEGREE:
            raise CapExceededError(f"product degree exceeds {MAX_DEGREE}")
        a, b = self.trimmed().coef, other.trimmed().coef
        return GaussianPolynomial(signal.convolve(a, b, method="direct"))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = GaussianPolynomial.constant(1.0, self.dim)
        for _ in range(k):
            out = out * self
        return out

    def trimmed(self) -> "GaussianPolynomial":
        size = self.degree + 1
        return GaussianPolynomial(self.coef[(slice(0, size),) * self.dim])

    def derivative(self, i: int) -> "GaussianPolynomial":
        """``d/dW_i``."""
        c = np.moveaxis(self.coef, i, 0)
        k = np.arange(1, c.shape[0]).reshape((-1,) + (1,) * (self.dim - 1))
        d = np.zeros_like(c)
        d[:-1] = c[1:] * k
        return GaussianPolynomial(np.moveaxis(d, 0, i))

    def gradient(self) -> list["GaussianPolynomial"]:
        return [self.derivative(i) for i in range(self.dim)]

    def expectation(self) -> float:
        moments = np.array([gaussian_moment(k) for k in range(self.coef.shape[0])])
        out = self.coef
        for _ in range(self.dim):
            out = np.tensordot(out, moments, axes=([0], [0]))
        return float(out)

    def __call__(self, w) -> np.ndarray:
        """Evaluate at points ``w`` of shape ``(..., D)``."""
        w = np.asarray(w, dtype=float)
        powers = [w[..., i, None] ** np.arange(self.coef.shape[0]) for i in range(self.dim)]
        letters = "abcdefgh"[: self.dim]
        spec = letters + "," + ",".join("..." + c for c in letters) + "->..."
        return np.einsum(spec, self.coef, *powers)


def expectation_of_product(*factors: GaussianPolynomial) -> float:
    """``E[prod factors]``."""
    dims = {f.dim for f in factors}
    if len(dims) != 1:
        raise ValueError("factors live on different Gaussian dimensions")
    dim = dims.pop()
    if dim > MAX_DIM:
        raise CapExceededError(f"oracle dimension {dim} exceeds {MAX_DIM}")
    if sum(f.degree for f in factors) > MAX_DEGREE:
        raise CapExceededError(f"total degree exceeds {MAX_DEGREE}")
    out = GaussianPolynomial.constant(1.0, dim)
    for f in factors:
        out = out * f
    return out.expectation()
