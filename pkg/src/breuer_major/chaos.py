"""Finite-dimensional Wiener chaos calculus.

The Hilbert space is ``R^D`` with its canonical basis ``e_1..e_D`` and
``W(e_i) = W_i`` independent standard Gaussians.  A symmetric kernel of order
``m`` is a dense symmetric array of shape ``(D,)*m`` and ``I_m`` maps it to a
polynomial in ``W``.  The moment oracle in :mod:`breuer_major.isserlis` checks
the contraction-based identities against brute-force expansion.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import comb, factorial
from typing import NamedTuple

import numpy as np

from . import bounds
from .covariance import DEFAULT_MAX_LAG, CovarianceModel, DependenceCoefficients, theta_sequence
from .errors import CapExceededError, ConfigError
from .hermite import HermiteExpansion, multi_indices
from .isserlis import MAX_DEGREE, MAX_DIM, GaussianPolynomial

STORAGE_CAP = 1 << 22
EMBEDDING_CAP = 256


def symmetrize(arr) -> np.ndarray:
    """Average of ``arr`` over all permutations of its axes."""
    arr = np.asarray(arr, dtype=float)
    k = arr.ndim
    if k <= 1:
        return arr.copy()
    out = np.zeros_like(arr)
    for perm in itertools.permutations(range(k)):
        out += np.transpose(arr, perm)
    return out / factorial(k)


class SymmetricKernel:
    """Element of the ``m``-th symmetric tensor power of ``R^D``."""

    __slots__ = ("array",)

    def __init__(self, array, symmetric: bool = False):
        array = np.asarray(array, dtype=float)
        if array.ndim and len(set(array.shape)) != 1:
            raise ConfigError("kernel array must have shape (D,)*m")
        if array.size > STORAGE_CAP:
            raise CapExceededError(f"kernel with {array.size} entries exceeds storage cap")
        self.array = array if symmetric else symmetrize(array)

    @property
    def order(self) -> int:
        return self.array.ndim

    @property
    def dim(self) -> int:
        return self.array.shape[0] if self.array.ndim else 0

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.array**2)))

    def inner(self, other: "SymmetricKernel") -> float:
        return float(np.sum(self.array * other.array))

    def __add__(self, other):
        return SymmetricKernel(self.array + other.array, symmetric=True)

    def __mul__(self, c: float):
        return SymmetricKernel(self.array * float(c), symmetric=True)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymmetricKernel(order={self.order}, dim={self.dim}, norm={self.norm():.6g})"

    @classmethod
    def tensor(cls, *vectors) -> "SymmetricKernel":
        """``sym(v_1 (x) ... (x) v_m)``."""
        out = np.ones(())
        for v in vectors:
            out = np.multiply.outer(out, np.asarray(v, dtype=float))
        return cls(out)

    @classmethod
    def random(cls, order: int, dim: int, rng: np.random.Generator, density: float = 0.6):
        """Sparse random kernel: Gaussian entries kept with probability ``density``."""
        shape = (dim,) * order
        arr = rng.standard_normal(shape) * (rng.random(shape) < density)
        return cls(arr)


def basis(i: int, dim: int) -> np.ndarray:
    """Canonical basis vector ``e_i`` (0-based)."""
    v = np.zeros(dim)
    v[i] = 1.0
    return v


def _arr(k):
    return k.array if isinstance(k, SymmetricKernel) else np.asarray(k, dtype=float)


def contract(f, g, r: int) -> np.ndarray:
    """``f (x)_r g``: pair the last ``r`` slots of ``f`` with those of ``g``.

    The result has order ``p + s - 2r`` and is not symmetric in general.
    """
    f, g = _arr(f), _arr(g)
    p, s = f.ndim, g.ndim
    if not 0 <= r <= min(p, s):
        raise ConfigError(f"contraction order {r} outside [0, min({p}, {s})]")
    if p and s and f.shape[0] != g.shape[0]:
        raise ConfigError("kernels live on different index dimensions")
    size = (f.shape[0] if p else 1) ** (p + s - 2 * r)
    if size > STORAGE_CAP:
        raise CapExceededError(f"contraction with {size} entries exceeds storage cap")
    axes = (list(range(p - r, p)), list(range(s - r, s)))
    return np.tensordot(f, g, axes=axes)


def contract_sym(f, g, r: int) -> SymmetricKernel:
    """``f (x~)_r g``, the symmetrized contraction."""
    return SymmetricKernel(contract(f, g, r))


class ChaosVector:
    """``F = sum_m I_m(g_m)`` with finitely many orders; order 0 is ``E[F]``."""

    def __init__(self, kernels: dict[int, SymmetricKernel] | None = None, dim: int | None = None):
        self.kernels: dict[int, SymmetricKernel] = {}
        dims = {k.dim for m, k in (kernels or {}).items() if m > 0}
        if len(dims) > 1:
            raise ConfigError("kernels live on different index dimensions")
        self.dim = dim if dim is not None else (dims.pop() if dims else 1)
        for m, k in (kernels or {}).items():
            self._accumulate(m, k if isinstance(k, SymmetricKernel) else SymmetricKernel(k))

    @classmethod
    def single(cls, kernel: SymmetricKernel) -> "ChaosVector":
        return cls({kernel.order: kernel}, dim=kernel.dim if kernel.order else None)

    def _accumulate(self, m: int, k: SymmetricKernel):
        self.kernels[m] = self.kernels[m] + k if m in self.kernels else k

    @property
    def orders(self) -> list[int]:
        return sorted(self.kernels)

    def mean(self) -> float:
        return float(self.kernels[0].array) if 0 in self.kernels else 0.0

    def second_moment(self) -> float:
        """``E[F^2] = sum_m m! ||g_m||^2``."""
        return float(sum(factorial(m) * k.norm() ** 2 for m, k in self.kernels.items()))

    def variance(self) -> float:
        return self.second_moment() - self.mean() ** 2

    def __add__(self, other: "ChaosVector") -> "ChaosVector":
        out = ChaosVector(dict(self.kernels), dim=self.dim)
        for m, k in other.kernels.items():
            out._accumulate(m, k)
        return out

    def to_polynomial(self, dim: int | None = None) -> GaussianPolynomial:
        """Explicit polynomial in ``W_1..W_D``.

        ``I_m(g) = sum_{|alpha|=m} (m!/alpha!) g_{t(alpha)} prod_i H_{alpha_i}(W_i)``
        where ``t(alpha)`` repeats index ``i`` ``alpha_i`` times.
        """
        dim = dim or self.dim
        if dim > MAX_DIM:
            raise CapExceededError(f"oracle dimension {dim} exceeds {MAX_DIM}")
        top = max(self.orders, default=0)
        out = GaussianPolynomial(np.zeros((top + 1,) * dim))
        for m, k in self.kernels.items():
            if m == 0:
                out = out + float(k.array)
                continue
            for alpha in multi_indices(dim, m):
                t = tuple(i for i, a in enumerate(alpha) for _ in range(a))
                c = factorial(m) / math.prod(factorial(a) for a in alpha) * k.array[t]
                if c:
                    out = out + GaussianPolynomial.hermite_product(alpha, top + 1) * c
        return out

    def __repr__(self):
        return f"ChaosVector(orders={self.orders}, dim={self.dim})"


def multiply(F: ChaosVector, G: ChaosVector) -> ChaosVector:
    """Product formula
    ``I_p(f) I_q(g) = sum_r r! C(p,r) C(q,r) I_{p+q-2r}(f (x~)_r g)``,
    extended bilinearly over the orders of ``F`` and ``G``."""
    out = ChaosVector(dim=F.dim)
    for p, f in F.kernels.items():
        for q, g in G.kernels.items():
            for r in range(min(p, q) + 1):
                w = factorial(r) * comb(p, r) * comb(q, r)
                out._accumulate(p + q - 2 * r, contract_sym(f, g, r) * w)
    return out


def _as_polynomial(x, dim=None) -> GaussianPolynomial:
    if isinstance(x, GaussianPolynomial):
        return x
    if isinstance(x, SymmetricKernel):
        x = ChaosVector.single(x)
    return x.to_polynomial(dim)


def isserlis_moment(*factors, dim: int | None = None) -> float:
    """Exact ``E[F_1 F_2 ...]`` by brute-force Gaussian moments.

    Factors may be chaos vectors, symmetric kernels (read as ``I_m(g)``) or
    explicit polynomials.  Total degree at most 12 and ``D <= 4``.
    """
    if dim is None:
        dims = [f.dim for f in factors if not isinstance(f, GaussianPolynomial)]
        dims += [f.dim for f in factors if isinstance(f, GaussianPolynomial)]
        dim = max(dims)
    polys = [_as_polynomial(f, dim) for f in factors]
    if sum(p.degree for p in polys) > MAX_DEGREE:
        raise CapExceededError(f"total degree exceeds {MAX_DEGREE}")
    out = GaussianPolynomial.constant(1.0, dim)
    for p in polys:
        out = out * p
    return out.expectation()


def malliavin_derivative(F) -> list[GaussianPolynomial]:
    """``DF`` as its coordinates ``<DF, e_a>``, from the polynomial gradient."""
    return _as_polynomial(F).gradient()


def variance_identity_rhs(g: SymmetricKernel) -> float:
    """Contraction side:
    ``s^-2 sum_{l=1}^{s-1} l^2 l!^2 C(s,l)^4 (2s-2l)! ||g (x~)_l g||^2``."""
    s = g.order
    total = 0.0
    for l in range(1, s):
        w = l * l * factorial(l) ** 2 * comb(s, l) ** 4 * factorial(2 * s - 2 * l)
        total += w * contract_sym(g, g, l).norm() ** 2
    return total / (s * s)


def variance_identity_lhs(g: SymmetricKernel) -> float:
    """Oracle side: ``Var[s^-1 ||D I_s(g)||^2]`` from explicit polynomials."""
    s = g.order
    if s < 1:
        raise ConfigError("order must be >= 1")
    if 4 * (s - 1) > MAX_DEGREE or g.dim > MAX_DIM:
        raise CapExceededError("kernel too large for the moment oracle")
    grad = malliavin_derivative(g)
    P = sum((d * d for d in grad), GaussianPolynomial.constant(0.0, g.dim)) * (1.0 / s)
    return (P * P).expectation() - P.expectation() ** 2


class Bound(NamedTuple):
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def holds(self, rel: float = 1e-12) -> bool:
        """``lhs <= rhs`` up to floating round-off of relative size ``rel``."""
        return self.lhs <= self.rhs + rel * max(abs(self.rhs), abs(self.lhs), 1e-300)


def cross_inner_bound(h: SymmetricKernel, g: SymmetricKernel) -> Bound:
    """Both sides of the bound on ``E[(s^-1 <DF, DG>)^2]`` for ``F = I_p(h)``,
    ``G = I_s(g)``, ``p < s``.  The left side comes from the moment oracle."""
    p, s = h.order, g.order
    if not 1 <= p < s:
        raise ConfigError(f"need 1 <= p < s, got p={p}, s={s}")
    if 2 * (p + s - 2) > MAX_DEGREE or max(h.dim, g.dim) > MAX_DIM:
        raise CapExceededError("kernels too large for the moment oracle")
    dim = max(h.dim, g.dim)
    dF, dG = malliavin_derivative(h), malliavin_derivative(g)
    inner = sum((a * b for a, b in zip(dF, dG)), GaussianPolynomial.constant(0.0, dim))
    inner = inner * (1.0 / s)
    lhs = (inner * inner).expectation()

    EF2 = factorial(p) * h.norm() ** 2
    rhs = (
        factorial(p) * comb(s - 1, p - 1) ** 2 * factorial(s - p) * EF2
        * float(np.linalg.norm(contract(g, g, s - p)))
    )
    for l in range(1, p):
        w = factorial(l - 1) ** 2 * comb(p - 1, l - 1) ** 2 * comb(s - 1, l - 1) ** 2
        w *= factorial(p + s - 2 * l)
        hh = float(np.sum(contract(h, h, p - l) ** 2))
        gg = float(np.sum(contract(g, g, s - l) ** 2))
        rhs += 0.5 * p * p * w * (hh + gg)
    return Bound(lhs, rhs)


def embedding_vectors(model: CovarianceModel, n: int) -> np.ndarray:
    """Rows ``u_{k,i}`` (row ``k*d + i``) with ``<u_{k,i}, u_{k',l}> =
    r^{(i,l)}(k'-k)``, from a factorization of the block-Toeplitz covariance
    of ``(X_1, ..., X_n)``."""
    d = model.d
    if n * d > EMBEDDING_CAP:
        raise CapExceededError(f"n*d = {n * d} exceeds embedding cap {EMBEDDING_CAP}")
    cov = block_toeplitz(model, n)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-10 * max(1.0, vals.max()):
            raise ConfigError(
                f"covariance of {model.label} over {n} steps is not positive semi-definite"
            ) from None
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def block_toeplitz(model: CovarianceModel, n: int) -> np.ndarray:
    """``Cov[X_k^{(i)}, X_{k'}^{(l)}] = r^{(i,l)}(k'-k)`` as an ``nd x nd`` matrix."""
    d = model.d
    lags = np.arange(-(n - 1), n)
    mats = model.matrix(lags)
    k = np.arange(n)
    blocks = mats[(k[None, :] - k[:, None]) + (n - 1)]  # (n, n, d, d)
    return blocks.transpose(0, 2, 1, 3).reshape(n * d, n * d)


def build_kernel(model: CovarianceModel, expansion: HermiteExpansion, m: int, n: int) -> SymmetricKernel:
    """Kernel ``g_m^n`` with ``I_m(g_m^n) = n^{-1/2} sum_{k<=n} f_m(X_k)``.

    ``g_m^n = n^{-1/2} sum_k sum_t b_t u_{k,t_1} (x) ... (x) u_{k,t_m}`` on the
    index space ``R^{nd}``.
    """
    if model.d != expansion.d:
        raise ConfigError("model and expansion dimensions differ")
    D = n * model.d
    if D**m > STORAGE_CAP:
        raise CapExceededError(f"kernel with D^m = {D}^{m} entries exceeds storage cap")
    L = embedding_vectors(model, n)
    b = expansion.b_tensor(m)
    total = np.zeros((D,) * m)
    for k in range(n):
        U = L[k * model.d : (k + 1) * model.d]
        term = b
        for _ in range(m):
            term = np.tensordot(term, U, axes=([0], [0]))
        total += term
    return SymmetricKernel(total / math.sqrt(n), symmetric=True)


@dataclass
class KernelCheck:
    """An inequality ``lhs <= rhs``; ``rhs_window`` restricts the lag series to
    ``|j| < n``, the only lags the kernel can see, and is a sharper bound."""

    name: str
    m: int
    e: int | None
    n: int
    lhs: float
    rhs: float
    rhs_window: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def margin_window(self) -> float:
        return self.rhs_window - self.lhs

    def holds(self, rel: float = 1e-12) -> bool:
        slack = rel * max(abs(self.lhs), 1e-300)
        return self.lhs <= self.rhs + slack and self.lhs <= self.rhs_window + slack


def _dependence(model, expansion, n, dependence=None, max_lag=DEFAULT_MAX_LAG):
    # non-strict: theta may be infinite, which makes the full-series bound vacuous
    full = dependence or theta_sequence(model, max(n, max_lag), expansion.rank, strict=False)
    q = full.q
    window = float(full.theta_of_j[0] ** q + 2 * np.sum(full.theta_of_j[1:n] ** q))
    return full, window


def kernel_contraction_bound_check(
    model: CovarianceModel,
    expansion: HermiteExpansion,
    m: int,
    e: int,
    n: int,
    dependence: DependenceCoefficients | None = None,
) -> KernelCheck:
    """``||g_m^n (x)_e g_m^n|| <= (d^m/m!) E[f_m^2] gamma_{n,m,e}``."""
    if not 1 <= e <= m - 1:
        raise ConfigError(f"need 1 <= e <= m-1, got e={e}, m={m}")
    g = build_kernel(model, expansion, m, n)
    lhs = float(np.linalg.norm(contract(g, g, e)))
    full, window = _dependence(model, expansion, n, dependence)
    scale = model.d**m / factorial(m) * float(expansion.energy_by_order[m])
    rhs = scale * bounds.gamma(full, m, e, n)
    rhs_w = scale * bounds.gamma(full, m, e, n, theta=window)
    return KernelCheck("kernel_contraction", m, e, n, lhs, rhs, rhs_w)


def kernel_norm_bound_check(
    model: CovarianceModel,
    expansion: HermiteExpansion,
    m: int,
    n: int,
    dependence: DependenceCoefficients | None = None,
) -> KernelCheck:
    """``m! ||g_m^n||^2 <= E[f_m^2] (2K + d^q theta)``."""
    g = build_kernel(model, expansion, m, n)
    lhs = factorial(m) * g.norm() ** 2
    full, window = _dependence(model, expansion, n, dependence)
    K = full.K if full.K is not None else math.inf
    dq = model.d**expansion.rank
    energy = float(expansion.energy_by_order[m])
    rhs = energy * (2 * K + dq * full.theta)
    rhs_w = energy * (2 * K + dq * window)
    return KernelCheck("kernel_norm", m, None, n, lhs, rhs, rhs_w)


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def product_formula_error(F: ChaosVector, G: ChaosVector) -> float:
    """Relative discrepancy between the product formula and brute force.

    Compares polynomial coefficients of ``F G`` and the second moment
    ``E[(F G)^2]``.
    """
    prod = multiply(F, G)
    dim = max(F.dim, G.dim)
    direct = F.to_polynomial(dim) * G.to_polynomial(dim)
    via = prod.to_polynomial(dim)
    size = max(direct.coef.shape[0], via.coef.shape[0])
    a, b = direct._padded(size), via._padded(size)
    coef_err = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
    moment_err = _rel(prod.second_moment(), isserlis_moment(F, G, F, G, dim=dim))
    return max(coef_err, moment_err)


@dataclass
class SweepReport:
    """Outcome of :func:`verify_sweep`.

    Equalities report the largest relative error; inequalities the smallest
    relative margin ``(rhs - lhs) / max(|rhs|, |lhs|)``.
    """

    product_max_rel: float
    variance_max_rel: float
    canonical: tuple[float, float]
    cross_min_margin: float
    contraction_min_margin: float
    contraction_min_margin_window: float
    norm_min_margin: float
    norm_min_margin_window: float
    checks: int

    def passed(self, equality_tol: float = 1e-9) -> bool:
        eq = max(self.product_max_rel, self.variance_max_rel) <= equality_tol
        eq = eq and abs(self.canonical[0] - self.canonical[1]) <= equality_tol * 8
        ineq = min(
            self.cross_min_margin,
            self.contraction_min_margin,
            self.contraction_min_margin_window,
            self.norm_min_margin,
            self.norm_min_margin_window,
        )
        return eq and ineq >= -1e-12


def _rel_margin(b) -> float:
    lhs, rhs = b
    if math.isinf(rhs):
        return math.inf
    return (rhs - lhs) / max(abs(rhs), abs(lhs), 1e-300)


def verify_sweep(
    seed: int = 0,
    count: int = 200,
    max_order: int = 3,
    max_dim: int = 3,
    hursts=(0.5, 0.6, 0.75),
    q: int = 2,
    n_max: int = 16,
) -> SweepReport:
    """Seeded sweep of the product formula, the variance identity, the cross
    inner-product bound and the kernel bounds for fractional noise."""
    if max_order > 3 or max_dim > MAX_DIM:
        raise CapExceededError("sweep caps: order <= 3 and dimension <= 4")
    rng = np.random.default_rng(seed)
    prod_err = var_err = 0.0
    cross = math.inf
    checks = 0
    for _ in range(count):
        D = int(rng.integers(1, max_dim + 1))
        p, s = (int(v) for v in rng.integers(1, max_order + 1, size=2))
        F = ChaosVector.single(SymmetricKernel.random(p, D, rng))
        G = ChaosVector.single(SymmetricKernel.random(s, D, rng))
        prod_err = max(prod_err, product_formula_error(F, G))
        g = SymmetricKernel.random(int(rng.integers(2, 4)), D, rng)
        var_err = max(var_err, _rel(variance_identity_lhs(g), variance_identity_rhs(g)))
        lo, hi = sorted(int(v) for v in rng.choice(np.arange(1, 5), size=2, replace=False))
        if 2 * (lo + hi - 2) <= MAX_DEGREE:
            h, k = SymmetricKernel.random(lo, D, rng), SymmetricKernel.random(hi, D, rng)
            cross = min(cross, _rel_margin(cross_inner_bound(h, k)))
        checks += 3
    e1 = SymmetricKernel.tensor(basis(0, 2), basis(0, 2))
    canonical = (variance_identity_lhs(e1), variance_identity_rhs(e1))

    from .covariance import fgn
    from .hermite import builtin

    exp = builtin({"name": "hermite", "params": {"q": q}}, d=1, max_order=q)
    c_m = c_w = n_m = n_w = math.inf
    for H in hursts:
        model = fgn(H)
        dep = theta_sequence(model, DEFAULT_MAX_LAG, q, strict=False)
        for n in range(2, n_max + 1):
            for e in range(1, q):
                c = kernel_contraction_bound_check(model, exp, q, e, n, dependence=dep)
                c_m = min(c_m, _rel_margin((c.lhs, c.rhs)))
                c_w = min(c_w, _rel_margin((c.lhs, c.rhs_window)))
            k = kernel_norm_bound_check(model, exp, q, n, dependence=dep)
            n_m = min(n_m, _rel_margin((k.lhs, k.rhs)))
            n_w = min(n_w, _rel_margin((k.lhs, k.rhs_window)))
            checks += q
    return SweepReport(prod_err, var_err, canonical, cross, c_m, c_w, n_m, n_w, checks)
