"""Probabilists' Hermite polynomials and Hermite expansions of functions of a
standard Gaussian vector."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e

from .errors import CapExceededError, ConfigError, QuadratureError, RankUndeterminedError

DEFAULT_MAX_ORDER = 20
RANK_TOLERANCE = 1e-9
CONVERGENCE_TOLERANCE = 1e-8
_HALF_WIDTH = 16.0
_TENSOR_CAP = 1 << 22


def hermite_eval(j: int, x):
    """``H_j(x)`` via ``H_{j+1} = x H_j - j H_{j-1}``."""
    x = np.asarray(x, dtype=float)
    if j < 0:
        raise ValueError("Hermite degree must be non-negative")
    prev, cur = np.ones_like(x), x.copy()
    if j == 0:
        return prev if prev.ndim else float(prev)
    for k in range(1, j):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def hermite_table(order: int, x) -> np.ndarray:
    """Array ``out[..., j] = H_j(x)`` for ``0 <= j <= order``."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (order + 1,))
    out[..., 0] = 1.0
    if order >= 1:
        out[..., 1] = x
    for k in range(1, order):
        out[..., k + 1] = x * out[..., k] - k * out[..., k - 1]
    return out


def _factorials(order: int) -> np.ndarray:
    return np.array([math.factorial(k) for k in range(order + 1)], dtype=float)


def _multi_factorial(order: int, d: int) -> np.ndarray:
    """``alpha!`` on the grid ``(order+1,)*d``."""
    f = _factorials(order)
    out = f
    for _ in range(d - 1):
        out = np.multiply.outer(out, f)
    return out.reshape((order + 1,) * d)


def _degree_grid(order: int, d: int) -> np.ndarray:
    """``|alpha|`` on the grid ``(order+1,)*d``."""
    return np.indices((order + 1,) * d).sum(axis=0)


@dataclass(frozen=True, eq=False)
class HermiteExpansion:
    """Hermite coefficients of a centered function ``f`` of ``X ~ N_d(0, I)``.

    ``coefficients`` is a dense array over multi-indices ``alpha`` with
    ``alpha_i <= max_order``; entries with ``|alpha| > max_order`` and the
    constant term are zero.  The removed constant is kept in ``mean``.
    """

    d: int
    coefficients: np.ndarray
    mean: float
    rank: int
    max_order: int
    energy_by_order: np.ndarray
    total_energy: float
    energy_tail: float
    function: Callable | None = field(default=None, repr=False)
    name: str = "custom"

    def coefficient(self, alpha) -> float:
        alpha = (alpha,) if np.isscalar(alpha) else tuple(alpha)
        if len(alpha) != self.d:
            raise ConfigError(f"multi-index {alpha} does not have length {self.d}")
        if sum(alpha) > self.max_order:
            return 0.0
        return float(self.coefficients[alpha])

    def as_dict(self, tol: float = 0.0) -> dict[tuple, float]:
        idx = np.argwhere(np.abs(self.coefficients) > tol)
        return {tuple(int(v) for v in a): float(self.coefficients[tuple(a)]) for a in idx}

    def b_tensor(self, m: int) -> np.ndarray:
        """Symmetric order-``m`` tensor ``b_t = a_{type(t)} type(t)! / m!``.

        ``m! sum_t b_t^2`` equals ``E[f_m(X)^2]``.
        """
        if self.d**m > _TENSOR_CAP:
            raise CapExceededError(f"b tensor with d^m = {self.d}^{m} entries exceeds cap")
        if m > self.max_order:
            return np.zeros((self.d,) * m)
        if self.d == 1:
            return np.full((1,) * m, self.coefficients[m])
        idx = np.indices((self.d,) * m).reshape(m, -1)
        counts = np.stack([(idx == i).sum(axis=0) for i in range(self.d)])
        fact = _factorials(m)
        weights = np.prod(fact[counts], axis=0) / math.factorial(m)
        vals = self.coefficients[tuple(counts)] * weights
        return vals.reshape((self.d,) * m)

    def _masked(self, lo: int, hi: int) -> np.ndarray:
        deg = _degree_grid(self.max_order, self.d)
        return np.where((deg >= lo) & (deg <= hi), self.coefficients, 0.0)

    def _evaluate(self, coef: np.ndarray, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d == 1:
            return hermite_table(self.max_order, x) @ coef
        if x.shape[-1] != self.d:
            raise ConfigError(f"points must have trailing dimension {self.d}")
        letters = "abcdefghijklmnop"[: self.d]
        tables = [hermite_table(self.max_order, x[..., i]) for i in range(self.d)]
        spec = letters + "," + ",".join("..." + c for c in letters) + "->..."
        return np.einsum(spec, coef, *tables)

    def project(self, m: int) -> Callable:
        """The order-``m`` component ``f_m``; the zero function if empty."""
        if m < 0:
            raise ConfigError("order must be non-negative")
        if m > self.max_order or self.energy_by_order[m] == 0.0:
            return lambda x: np.zeros(np.shape(x) if self.d == 1 else np.shape(x)[:-1])
        coef = self._masked(m, m)
        return lambda x: self._evaluate(coef, x)

    def truncated(self, N: int) -> Callable:
        """``sum_{m=q}^{N} f_m``."""
        coef = self._masked(self.rank, min(N, self.max_order))
        return lambda x: self._evaluate(coef, x)

    def __call__(self, x):
        """Centered ``f(x) - E f(X)``; falls back to the truncated series."""
        if self.function is None:
            return self.truncated(self.max_order)(x)
        return np.asarray(self.function(x), dtype=float) - self.mean


def _finish(
    coef: np.ndarray,
    d: int,
    max_order: int,
    second_moment: float | None,
    function: Callable | None,
    name: str,
    rank_tolerance: float,
    tail_tolerance: float,
) -> HermiteExpansion:
    coef = np.array(coef, dtype=float)
    deg = _degree_grid(max_order, d)
    coef[deg > max_order] = 0.0
    mean = float(coef[(0,) * d])
    coef[(0,) * d] = 0.0
    fact = _multi_factorial(max_order, d)
    scaled = np.abs(coef) * np.sqrt(fact)
    # quadrature noise below the rank tolerance is treated as an exact zero
    coef[scaled <= rank_tolerance] = 0.0
    energy = np.bincount(deg.ravel(), weights=(coef**2 * fact).ravel(), minlength=max_order + 1)
    energy = energy[: max_order + 1]
    captured = float(energy.sum())
    if second_moment is None:
        total, tail = captured, 0.0
    else:
        total = second_moment - mean**2
        tail = total - captured
        if tail < tail_tolerance * max(1.0, total):
            tail = 0.0
    rank = None
    for m in range(1, max_order + 1):
        if scaled[deg == m].max() > rank_tolerance:
            rank = m
            break
    if rank is None:
        raise RankUndeterminedError(
            f"all Hermite coefficients of {name} up to order {max_order} are below tolerance"
        )
    energy[:rank] = 0.0
    coef[(deg < rank)] = 0.0
    return HermiteExpansion(
        d=d,
        coefficients=coef,
        mean=mean,
        rank=rank,
        max_order=max_order,
        energy_by_order=energy,
        total_energy=total,
        energy_tail=tail,
        function=function,
        name=name,
    )


def from_coefficients(
    coefficients: dict, d: int = 1, max_order: int = DEFAULT_MAX_ORDER, name: str = "series"
) -> HermiteExpansion:
    """Exact expansion from ``{alpha: a_alpha}`` (alpha an int when d=1).

    Terms above ``max_order`` are dropped from the stored series but their
    energy is kept in ``energy_tail``.
    """
    top = max([max_order] + [sum(_as_alpha(a, d)) for a in coefficients])
    full = np.zeros((top + 1,) * d)
    for alpha, value in coefficients.items():
        full[_as_alpha(alpha, d)] += value
    fact = _multi_factorial(top, d)
    deg = _degree_grid(top, d)
    beyond = float(np.sum((full**2 * fact)[deg > max_order]))
    coef = full[(slice(0, max_order + 1),) * d]
    exp = _finish(coef, d, max_order, None, None, name, RANK_TOLERANCE, 0.0)
    if beyond:
        exp = replace(exp, total_energy=exp.total_energy + beyond, energy_tail=beyond)
    return exp


def _as_alpha(alpha, d: int) -> tuple:
    alpha = (int(alpha),) if np.isscalar(alpha) else tuple(int(a) for a in alpha)
    if len(alpha) != d or min(alpha) < 0:
        raise ConfigError(f"bad multi-index {alpha} for d={d}")
    return alpha


def _gauss_rule(nodes: int, breakpoints) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights approximating ``E[g(Z)]``, ``Z ~ N(0, 1)``."""
    if not breakpoints:
        x, w = hermite_e.hermegauss(nodes)
        return x, w / math.sqrt(2 * math.pi)
    # piecewise Gauss-Legendre split at the discontinuities of g
    cuts = sorted(float(b) for b in breakpoints)
    edges = [min(-_HALF_WIDTH, cuts[0] - 8.0)] + cuts + [max(_HALF_WIDTH, cuts[-1] + 8.0)]
    t, v = np.polynomial.legendre.leggauss(nodes)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        half = 0.5 * (b - a)
        x = 0.5 * (a + b) + half * t
        xs.append(x)
        ws.append(half * v * np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi))
    return np.concatenate(xs), np.concatenate(ws)


def _quadrature_moments(f, d, max_order, nodes, breakpoints):
    x, w = _gauss_rule(nodes, breakpoints)
    if d == 1:
        vals = np.asarray(f(x), dtype=float)
        weighted = w * vals
        proj = weighted @ hermite_table(max_order, x)
        second = float(np.sum(w * vals**2))
    else:
        if len(x) ** d > _TENSOR_CAP:
            raise CapExceededError(f"tensor quadrature grid {len(x)}^{d} exceeds cap")
        grid = np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1)
        vals = np.asarray(f(grid), dtype=float)
        wgrid = w
        for _ in range(d - 1):
            wgrid = np.multiply.outer(wgrid, w)
        second = float(np.sum(wgrid * vals**2))
        proj = wgrid * vals
        H = hermite_table(max_order, x)
        for _ in range(d):
            proj = np.tensordot(proj, H, axes=([0], [0]))
    return proj / _multi_factorial(max_order, d), second


def expand(
    f,
    d: int = 1,
    max_order: int = DEFAULT_MAX_ORDER,
    quadrature_nodes: int | None = None,
    breakpoints=None,
    rank_tolerance: float = RANK_TOLERANCE,
    convergence_tolerance: float = CONVERGENCE_TOLERANCE,
    name: str | None = None,
) -> HermiteExpansion:
    """Hermite expansion of ``f`` up to total order ``max_order``.

    ``f`` is a vectorized callable (scalar argument for d=1, trailing axis of
    length d otherwise) or a builtin spec: a name or ``{"name": ..., "params":
    {...}}``.  Coefficients come from tensorized Gauss-Hermite quadrature, or
    from Gauss-Legendre pieces split at ``breakpoints`` for functions with
    kinks or jumps.  The node count is doubled once and the coefficients must
    agree to ``convergence_tolerance`` on the energy scale.
    """
    if isinstance(f, (str, dict)):
        return builtin(f, d=d, max_order=max_order, quadrature_nodes=quadrature_nodes)
    if max_order < 1:
        raise ConfigError("max_order must be >= 1")
    if breakpoints and d != 1:
        raise ConfigError("breakpoints are only supported for d=1")
    if quadrature_nodes is None:
        quadrature_nodes = (80 if breakpoints else 100) if d == 1 else 32
    lo, _ = _quadrature_moments(f, d, max_order, quadrature_nodes, breakpoints)
    hi, second = _quadrature_moments(f, d, max_order, 2 * quadrature_nodes, breakpoints)
    drift = float(np.max(np.abs(hi - lo) * np.sqrt(_multi_factorial(max_order, d))))
    if not np.isfinite(drift) or drift > convergence_tolerance:
        raise QuadratureError(
            f"Hermite coefficients moved by {drift:.3g} when doubling nodes to "
            f"{2 * quadrature_nodes}; f is too rough for max_order={max_order} "
            "(pass breakpoints for kinks or jumps)"
        )
    return _finish(
        hi,
        d,
        max_order,
        second,
        f,
        name or getattr(f, "__name__", "custom"),
        rank_tolerance,
        convergence_tolerance,
    )


def _poly_function(herme_coef):
    return lambda x: hermite_e.hermeval(np.asarray(x, dtype=float), herme_coef)


def builtin(spec, d: int = 1, max_order: int = DEFAULT_MAX_ORDER, quadrature_nodes=None):
    """Expansion of a named function.

    Names: ``hermite`` (``q`` for d=1, or multi-index ``alpha``),
    ``hermite_sum`` (``terms``: list of ``{"alpha", "coef"}``), ``polynomial``
    (monomial ``coeffs``, d=1), ``abs``, ``sign``, ``indicator`` (``z``; the
    function ``1{x <= z}``).
    """
    if isinstance(spec, str):
        name, params = spec, {}
    else:
        name, params = spec.get("name"), dict(spec.get("params", {}))
    label = function_label(name, params)
    if name == "hermite":
        alpha = params.get("alpha", params.get("q"))
        if alpha is None:
            raise ConfigError("hermite needs q (d=1) or alpha")
        exp = from_coefficients({_as_alpha(alpha, d): 1.0}, d, max_order, label)
        return _with_function(exp)
    if name == "hermite_sum":
        terms = {}
        for term in params.get("terms", []):
            a = _as_alpha(term["alpha"], d)
            terms[a] = terms.get(a, 0.0) + float(term.get("coef", 1.0))
        return _with_function(from_coefficients(terms, d, max_order, label))
    if d != 1:
        raise ConfigError(f"builtin {name!r} is only defined for d=1")
    if name == "polynomial":
        herme = hermite_e.poly2herme(np.asarray(params["coeffs"], dtype=float))
        exp = from_coefficients(dict(enumerate(herme)), 1, max_order, label)
        # keep the constant so that the callable is the original polynomial
        return replace(exp, function=_poly_function(herme))
    if name == "abs":
        return expand(np.abs, 1, max_order, quadrature_nodes, [0.0], name=label)
    if name == "sign":
        return expand(np.sign, 1, max_order, quadrature_nodes, [0.0], name=label)
    if name == "indicator":
        z = float(params.get("z", 0.0))
        return expand(lambda x: (np.asarray(x) <= z).astype(float), 1, max_order,
                      quadrature_nodes, [z], name=label)
    raise ConfigError(f"unknown builtin function {name!r}")


def _with_function(exp: HermiteExpansion) -> HermiteExpansion:
    # exact series: the truncated series is the function itself
    return replace(exp, function=None)


def function_label(name, params) -> str:
    if not params:
        return str(name)
    inner = ",".join(f"{k}={params[k]}" for k in sorted(params))
    return f"{name}({inner})"


def multi_indices(d: int, m: int):
    """All multi-indices of length ``d`` with ``|alpha| = m``."""
    for combo in itertools.combinations_with_replacement(range(d), m):
        yield tuple(combo.count(i) for i in range(d))
