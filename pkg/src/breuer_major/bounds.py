"""Explicit error bounds for the normal approximation of
``S_n = n^{-1/2} sum_{k<=n} f(X_k)``.

All lag series are finite sums over ``|j| <= n`` plus certified tails taken
from the covariance model, so every reported number is a genuine upper bound
up to floating-point round-off.  Combinatorial weights are assembled from
exact integers before conversion to float.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Callable, NamedTuple

import numpy as np
from scipy import special

from .covariance import (
    DEFAULT_MAX_LAG,
    CovarianceModel,
    DependenceCoefficients,
    VarianceDecomposition,
    sigma2_order,
    sigma2_total,
    theta_sequence,
)
from .errors import ConditionError, ConfigError
from .hermite import HermiteExpansion, builtin

C2 = "C2"
LIPSCHITZ = "LIPSCHITZ"
KOLMOGOROV = "KOLMOGOROV"
BOUND_KINDS = (C2, LIPSCHITZ, KOLMOGOROV)
SCHEMA_VERSION = "bm-bound/1"
_MAX_ORDER_CAP = 60


def _dependence(source, n: int, q: int | None, max_lag: int = DEFAULT_MAX_LAG) -> DependenceCoefficients:
    if isinstance(source, DependenceCoefficients):
        if n > source.truncation_lag:
            raise ConfigError(f"n={n} exceeds the truncation lag {source.truncation_lag}")
        return source
    if q is None:
        raise ConfigError("the Hermite rank q is needed to build theta from a model")
    return theta_sequence(source, max(max_lag, n), q)


def gamma(source, m: int, e: int, n: int, q: int | None = None, theta: float | None = None) -> float:
    """``sqrt(2 theta n^-1 sum_{|j|<=n} theta(j)^e sum_{|j|<=n} theta(j)^{m-e})``.

    ``source`` is a :class:`DependenceCoefficients` or a covariance model (then
    ``q`` is required).  ``theta`` overrides the series ``sum_j theta(j)^q``.
    """
    if not 1 <= e <= m - 1:
        raise ConfigError(f"need 1 <= e <= m-1, got e={e}, m={m}")
    if n < 1:
        raise ConfigError("n must be >= 1")
    dep = _dependence(source, n, q)
    th = dep.theta if theta is None else theta
    # product of the two window sums first, so that e and m-e give identical results
    sums = dep.window_sum(n, e) * dep.window_sum(n, m - e)
    return math.sqrt(2.0 * th / n * sums)


def _sqrt_int(k: int) -> float:
    return math.sqrt(k)


class ATerms(NamedTuple):
    A1: float
    A2: float
    A3: float
    A4: float
    A5: float


class _Context:
    """Shared quantities for one ``(model, expansion, n)``."""

    def __init__(self, dep: DependenceCoefficients, expansion: HermiteExpansion, n: int):
        self.dep, self.exp, self.n = dep, expansion, n
        self.q = expansion.rank
        self.d = dep.d
        if dep.K is None:
            raise ConditionError(
                f"K is not determined within {dep.truncation_lag} lags; bounds cannot be certified"
            )
        self.K = dep.K
        if n <= self.K:
            raise ConditionError(f"the bounds are stated for every n > K; got n={n} <= K={self.K}")
        self.dq = self.d**self.q
        self.Ef2 = expansion.total_energy
        self.spread = 2 * self.K + self.dq * dep.theta
        self._gamma: dict[tuple[int, int], float] = {}

    def gamma(self, m: int, e: int) -> float:
        key = (m, e)
        if key not in self._gamma:
            self._gamma[key] = gamma(self.dep, m, e, self.n)
        return self._gamma[key]

    def A1(self) -> float:
        q, n = self.q, self.n
        inner = self.dep.weighted_window_sum(n, q) + self.dep.outside_sum(n, q)
        return self.Ef2 / 2.0 * (2.0 * self.K**2 / n + self.dq * inner)

    def energy_above(self, N: int) -> float:
        e = self.exp
        return float(np.sum(e.energy_by_order[N + 1 :])) + e.energy_tail

    def A2(self, N: int) -> float:
        above = self.energy_above(N)
        if above == 0.0:
            return 0.0
        return 2.0 * self.spread * math.sqrt(self.Ef2 * above)

    def a3_order(self, m: int) -> float:
        """Order-m summand of the third term, without the E[f^2]/2 factor."""
        total = 0.0
        for l in range(1, m):
            w = Fraction(self.d**m * l * factorial(l) * comb(m, l) ** 2, m * factorial(m))
            total += float(w) * _sqrt_int(factorial(2 * m - 2 * l)) * self.gamma(m, l)
        return total

    def a4_pair(self, p: int, s: int) -> float:
        w = Fraction((p + s) * comb(s - 1, p - 1), p)
        ratio = factorial(s) // factorial(p)
        return (
            float(w)
            * self.d ** (s / 2)
            / _sqrt_int(ratio)
            * _sqrt_int(factorial(s - p))
            * math.sqrt(self.gamma(s, s - p))
        )

    def a5_pair(self, p: int, s: int) -> float:
        total = 0.0
        for l in range(1, p):
            w = factorial(l - 1) * comb(p - 1, l - 1) * comb(s - 1, l - 1)
            g = float(Fraction(self.d**s, factorial(s))) * self.gamma(s, s - l)
            g += float(Fraction(self.d**p, factorial(p))) * self.gamma(p, p - l)
            total += w * _sqrt_int(factorial(p + s - 2 * l)) * g
        return (p + s) * total

    def series(self, N_max: int) -> dict[str, dict[int, float]]:
        """A1 and A2..A5 for every ``N`` in ``q..N_max`` (cumulative in N)."""
        q = self.q
        out = {"A1": self.A1(), "A2": {}, "A3": {}, "A4": {}, "A5": {}}
        a3 = a4 = a5 = 0.0
        for N in range(q, N_max + 1):
            a3 += self.a3_order(N)
            for p in range(q, N):
                a4 += self.a4_pair(p, N)
                a5 += self.a5_pair(p, N)
            out["A2"][N] = self.A2(N)
            out["A3"][N] = self.Ef2 / 2.0 * a3
            out["A4"][N] = self.Ef2 * math.sqrt(self.spread) / 2.0 * a4
            out["A5"][N] = self.Ef2 / (2.0 * math.sqrt(2.0)) * a5
        return out


def A_terms(
    model_or_dep,
    expansion: HermiteExpansion,
    n: int,
    N: int,
    max_lag: int = DEFAULT_MAX_LAG,
) -> ATerms:
    """``(A1, A2, A3, A4, A5)`` at sample size ``n`` and chaos cut-off ``N``."""
    if N < expansion.rank:
        raise ConfigError(f"N={N} is below the Hermite rank {expansion.rank}")
    dep = _dependence(model_or_dep, n, expansion.rank, max_lag)
    ctx = _Context(dep, expansion, n)
    s = ctx.series(N)
    return ATerms(s["A1"], s["A2"][N], s["A3"][N], s["A4"][N], s["A5"][N])


@dataclass
class BoundReport:
    """Coefficients and the three bounds for one sample size ``n``.

    ``bound_C2`` multiplies ``||h''||``, ``bound_lipschitz`` multiplies
    ``||h'||``; ``bound_kolmogorov`` bounds ``sup_z |P(S_n<=z) - P(S<=z)|``.
    """

    n: int
    kind: str
    model: str
    function: str
    q: int
    d: int
    K: int
    theta: float
    sigma2: float
    sigma2_by_order: dict[int, float]
    energy: float
    N_max: int
    N_star: int
    N_star_lipschitz: int | None
    gamma: dict[tuple[int, int], float]
    A1: float
    A2: dict[int, float]
    A3: dict[int, float]
    A4: dict[int, float]
    A5: dict[int, float]
    bound_C2: float
    bound_lipschitz: float
    bound_kolmogorov: float
    bound_kolmogorov_rescaled: float
    A1_plain: float | None = None
    tail_flags: dict[str, float] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    def bound(self, kind: str) -> float:
        return {C2: self.bound_C2, LIPSCHITZ: self.bound_lipschitz, KOLMOGOROV: self.bound_kolmogorov}[
            kind.upper()
        ]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schema"] = SCHEMA_VERSION
        out["gamma"] = {f"{m},{e}": v for (m, e), v in self.gamma.items()}
        return out

    def csv_row(self) -> dict:
        N = self.N_star
        return {
            "schema": SCHEMA_VERSION,
            "n": self.n,
            "kind": self.kind,
            "model": self.model,
            "function": self.function,
            "q": self.q,
            "K": self.K,
            "theta": self.theta,
            "sigma2": self.sigma2,
            "N_star": N,
            "A1": self.A1,
            "A2": self.A2.get(N, 0.0),
            "A3": self.A3.get(N, 0.0),
            "A4": self.A4.get(N, 0.0),
            "A5": self.A5.get(N, 0.0),
            "bound_C2": self.bound_C2,
            "bound_lipschitz": self.bound_lipschitz,
            "bound_kolmogorov": self.bound_kolmogorov,
            "bound_kolmogorov_rescaled": self.bound_kolmogorov_rescaled,
        }


def bound_theorem(
    model: CovarianceModel,
    expansion: HermiteExpansion,
    n: int,
    N_max: int | None = None,
    max_lag: int = DEFAULT_MAX_LAG,
    dependence: DependenceCoefficients | None = None,
    variance: VarianceDecomposition | None = None,
) -> BoundReport:
    """General bounds for ``d_C``-type, Lipschitz and Kolmogorov test functions.

    The infimum over the chaos cut-off ``N`` is a minimum over
    ``q..N_max``.  The Lipschitz and Kolmogorov bounds minimize the whole
    bracket over ``N`` because the cut-off enters all of its terms.
    """
    q = expansion.rank
    N_max = min(expansion.max_order, N_max or expansion.max_order)
    if N_max > _MAX_ORDER_CAP:
        raise ConfigError(f"N_max above {_MAX_ORDER_CAP} is not supported")
    if N_max < q:
        raise ConfigError(f"N_max={N_max} is below the Hermite rank {q}")
    dep = dependence or theta_sequence(model, max(max_lag, n), q)
    ctx = _Context(_dependence(dep, n, q), expansion, n)
    var = variance or sigma2_total(model, expansion, N_max, max_lag, dependence=dep)
    s = ctx.series(N_max)
    A1 = s["A1"]
    orders = range(q, N_max + 1)

    c2_inner = {N: s["A2"][N] + s["A3"][N] + s["A4"][N] + s["A5"][N] for N in orders}
    N_star = min(orders, key=lambda N: (c2_inner[N], N))
    bound_c2 = A1 + c2_inner[N_star]

    diagnostics = []
    sigma2 = var.sigma2_total
    sigma = math.sqrt(sigma2) if sigma2 > 0 else 0.0
    if sigma2 <= 0:
        diagnostics.append("sigma^2 = 0: degenerate limit, Lipschitz/Kolmogorov bounds are infinite")
        lip = kol = kol_r = math.inf
        N_lip = None
    else:
        a2_weight = 1.0 / sigma + 1.0 / math.sqrt(ctx.spread * ctx.Ef2)
        bracket = {}
        partial = 0.0
        for N in orders:
            partial += var.sigma2_by_order[N]
            rest = A1 + s["A3"][N] + s["A4"][N] + s["A5"][N]
            bracket[N] = s["A2"][N] * a2_weight + (4.0 * rest / math.sqrt(partial) if partial > 0 else math.inf)
        N_lip = min(orders, key=lambda N: (bracket[N], N))
        inner = bracket[N_lip]
        lip = 0.5 * inner
        kol = math.sqrt(2.0) / sigma * math.sqrt(inner)
        kol_r = math.sqrt(2.0 * inner / sigma)

    tails = {
        "theta_tail": dep.tail_bound,
        "sigma2_tail": var.tail_estimate,
        "energy_tail": expansion.energy_tail,
    }
    return BoundReport(
        n=n,
        kind="theorem",
        model=model.label,
        function=expansion.name,
        q=q,
        d=model.d,
        K=ctx.K,
        theta=dep.theta,
        sigma2=sigma2,
        sigma2_by_order=var.sigma2_by_order,
        energy=ctx.Ef2,
        N_max=N_max,
        N_star=N_star,
        N_star_lipschitz=N_lip,
        gamma=dict(ctx._gamma),
        A1=A1,
        A2=s["A2"],
        A3=s["A3"],
        A4=s["A4"],
        A5=s["A5"],
        bound_C2=bound_c2,
        bound_lipschitz=lip,
        bound_kolmogorov=kol,
        bound_kolmogorov_rescaled=kol_r,
        tail_flags=tails,
        diagnostics=diagnostics,
    )


def bound_hermite_case(
    model: CovarianceModel,
    q: int,
    n: int,
    max_lag: int = DEFAULT_MAX_LAG,
    dependence: DependenceCoefficients | None = None,
) -> BoundReport:
    """Simplified bounds for ``d = 1`` and ``f = H_q``.

    ``A1 = (q!/2) theta (sum_{|j|<=n} |r(j)|^q |j|/n + sum_{|j|>n} |r(j)|^q)``
    includes the factor ``theta``; ``A1_plain`` omits it.  The Lipschitz and
    Kolmogorov bounds are both ``(2/sigma)(A1 + A3)`` since the Stein solution
    for indicators has ``||s_z'|| <= 1``.
    """
    if model.d != 1:
        raise ConfigError("the Hermite-case bounds need a one-dimensional model")
    if q < 1:
        raise ConfigError("q must be >= 1")
    expansion = builtin({"name": "hermite", "params": {"q": q}}, d=1, max_order=q)
    dep = _dependence(dependence or theta_sequence(model, max(max_lag, n), q), n, q)
    ctx = _Context(dep, expansion, n)
    lag_part = dep.weighted_window_sum(n, q) + dep.outside_sum(n, q)
    A1_plain = factorial(q) / 2.0 * lag_part
    A1 = A1_plain * dep.theta
    A3 = ctx.a3_order(q) * factorial(q) / 2.0
    sigma2, tail = sigma2_order(model, expansion, q, max(max_lag, n), return_tail=True)
    core = A1 + A3
    diagnostics = []
    if sigma2 <= 0:
        diagnostics.append("sigma^2 = 0: degenerate limit")
        lip = kol = math.inf
    else:
        lip = kol = 2.0 / math.sqrt(sigma2) * core
    return BoundReport(
        n=n,
        kind="hermite",
        model=model.label,
        function=expansion.name,
        q=q,
        d=1,
        K=ctx.K,
        theta=dep.theta,
        sigma2=sigma2,
        sigma2_by_order={q: sigma2},
        energy=float(factorial(q)),
        N_max=q,
        N_star=q,
        N_star_lipschitz=q,
        gamma=dict(ctx._gamma),
        A1=A1,
        A2={q: 0.0},
        A3={q: A3},
        A4={q: 0.0},
        A5={q: 0.0},
        bound_C2=core,
        bound_lipschitz=lip,
        bound_kolmogorov=kol,
        bound_kolmogorov_rescaled=kol,
        A1_plain=A1_plain,
        tail_flags={"theta_tail": dep.tail_bound, "sigma2_tail": tail},
        diagnostics=diagnostics,
    )


def bound_series(
    model: CovarianceModel,
    expansion: HermiteExpansion | None,
    ns,
    q: int | None = None,
    N_max: int | None = None,
    max_lag: int = DEFAULT_MAX_LAG,
) -> list[BoundReport]:
    """Reports over a grid of ``n``; ``expansion=None`` selects the
    Hermite-case bounds for ``f = H_q``."""
    ns = [int(n) for n in ns]
    top = max(max_lag, max(ns))
    if expansion is None:
        dep = theta_sequence(model, top, q)
        return [bound_hermite_case(model, q, n, top, dependence=dep) for n in ns]
    dep = theta_sequence(model, top, expansion.rank)
    var = sigma2_total(model, expansion, N_max, max_lag, dependence=dep)
    return [bound_theorem(model, expansion, n, N_max, top, dependence=dep, variance=var) for n in ns]


# --- Stein equation for indicators -------------------------------------------------

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def stein_solution(z: float, x):
    """``(s_z(x), s_z'(x))`` for ``s' - x s = 1{x <= z} - Phi(z)``.

    ``s_z(x) = sqrt(2 pi) e^{x^2/2} Phi(min(x,z)) (1 - Phi(max(x,z)))``,
    evaluated with the scaled complementary error function
    ``e^{x^2/2} Phi(x) = erfcx(-x/sqrt2)/2``.  The derivative is the analytic
    derivative of that expression, not the equation itself.
    """
    x = np.asarray(x, dtype=float)
    Phi_z = special.ndtr(z)
    below = x <= z
    u = np.where(below, -x, x) / _SQRT2
    ex = special.erfcx(u)
    c = np.where(below, 1.0 - Phi_z, Phi_z)
    s = _SQRT2PI * c * 0.5 * ex
    # d/dx erfcx(u) = (2u erfcx(u) - 2/sqrt(pi)) du/dx, du/dx = -+1/sqrt2
    du = np.where(below, -1.0, 1.0) / _SQRT2
    ds = _SQRT2PI * c * 0.5 * (2.0 * u * ex - 2.0 / math.sqrt(math.pi)) * du
    if s.ndim == 0:
        return float(s), float(ds)
    return s, ds


# --- rate tables ---------------------------------------------------------------------


@dataclass
class RatePrediction:
    regime: str
    exponent: float
    interval: tuple[float, float]
    source: str


def _reject_boundaries(a: float, q: int):
    if q < 1:
        raise ConfigError("q must be >= 1")
    if a >= -1.0 / q:
        raise ConditionError(f"a={a:g} violates the summability requirement a < -1/q = {-1.0 / q:g}")
    for e in range(1, q):
        if math.isclose(a * e, -1.0, rel_tol=0, abs_tol=1e-12):
            raise ConfigError(f"a={a:g} is a boundary case (a*e = -1 for e={e})")


def predict_rate(a: float, q: int) -> RatePrediction:
    """Predicted exponent of ``n`` for ``|r(k)| = |k|^a l(|k|)`` and ``f = H_q``."""
    _reject_boundaries(a, q)
    if a < -1:
        return RatePrediction("short memory", -0.5, (-math.inf, -1.0), "polynomial decay")
    upper_mid = -1.0 / (q - 1) if q > 1 else -1.0
    if a < upper_mid:
        return RatePrediction("intermediate", a / 2.0, (-1.0, upper_mid), "polynomial decay")
    return RatePrediction("long memory", (a * q + 1) / 2.0, (upper_mid, -1.0 / q), "polynomial decay")


def predict_rate_fgn(hurst: float, q: int) -> RatePrediction:
    """Same table for fractional Gaussian noise, ``a = 2H - 2`` (closed intervals)."""
    if q < 2:
        raise ConfigError("the fractional noise table is stated for q >= 2")
    a = 2.0 * hurst - 2.0
    if hurst == 0.5 or a <= -1:
        return RatePrediction("short memory", -0.5, (-2.0, -1.0), "fractional Gaussian noise")
    if a >= -1.0 / q:
        raise ConditionError(f"H={hurst:g} violates H < 1 - 1/(2q)")
    upper_mid = -1.0 / (q - 1)
    if a <= upper_mid:
        return RatePrediction("intermediate", a / 2.0, (-1.0, upper_mid), "fractional Gaussian noise")
    return RatePrediction("long memory", (a * q + 1) / 2.0, (upper_mid, -1.0 / q), "fractional Gaussian noise")


@dataclass
class GammaDecay:
    n_grid: list[int]
    values: list[float]

    @property
    def ratio(self) -> float:
        """last / first."""
        return self.values[-1] / self.values[0]

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.values, self.values[1:]))


def check_gamma_decay(source, m: int, e: int, n_grid) -> GammaDecay:
    """``n^{-1+e/m} sum_{|k|<=n} a_k^e`` on a grid of ``n``.

    ``source`` is a covariance model (``a_k = theta(k)``) or a vectorized
    callable ``k -> a_k`` for ``k >= 0``.
    """
    if not 1 <= e <= m - 1:
        raise ConfigError(f"need 1 <= e <= m-1, got e={e}, m={m}")
    n_grid = [int(n) for n in n_grid]
    top = max(n_grid)
    k = np.arange(top + 1)
    a = source.theta(k) if isinstance(source, CovarianceModel) else np.asarray(source(k), dtype=float)
    c = np.cumsum(a**e)
    values = [float(n ** (-1.0 + e / m) * (2.0 * c[n] - c[0])) for n in n_grid]
    return GammaDecay(n_grid, values)

