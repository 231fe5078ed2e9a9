"""Stationary matrix covariance functions and the dependence coefficients
built from them.

A model describes ``r^{(i,l)}(j) = E[X_1^{(i)} X_{1+j}^{(l)}]`` for a
standardized ``d``-dimensional stationary Gaussian sequence.  Every infinite
lag series computed here is truncated at a finite lag and returned together
with a certified over-estimate of the neglected tail.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np
from scipy import special

from .errors import ConditionError, ConfigError

if TYPE_CHECKING:
    from .hermite import HermiteExpansion

FGN = "fgn"
POLY_DECAY = "poly_decay"
TABLE = "table"
CUSTOM = "custom"
KINDS = (FGN, POLY_DECAY, TABLE, CUSTOM)

DEFAULT_MAX_LAG = 1_000_000
_SERIES_FROM = 16
_SERIES_TERMS = 10


def fgn_autocovariance(hurst: float, lags) -> np.ndarray:
    """Autocovariance of unit-variance fractional Gaussian noise.

    Uses the binomial series ``sum_i C(2H, 2i) k^(2H-2i)`` for ``|k| >= 16`` so
    that the second difference does not cancel catastrophically at large lags.
    """
    k = np.abs(np.asarray(lags, dtype=float))
    two_h = 2.0 * hurst
    out = np.empty_like(k)
    near = k < _SERIES_FROM
    kn = k[near]
    out[near] = 0.5 * (np.abs(kn + 1) ** two_h - 2 * kn**two_h + np.abs(kn - 1) ** two_h)
    kf = k[~near]
    if kf.size:
        acc = np.zeros_like(kf)
        # smallest terms first
        for i in range(_SERIES_TERMS, 0, -1):
            acc += special.binom(two_h, 2 * i) * kf ** (two_h - 2 * i)
        out[~near] = acc
    return out


def _zeta_tail(power: float, start: int) -> float:
    """Upper bound for sum_{i >= start} i**power, power < -1, start >= 1."""
    return start**power + start ** (power + 1) / (-(power + 1))


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Standardized stationary covariance ``j -> r(j)`` (a ``d x d`` matrix).

    Build instances with :func:`fgn`, :func:`poly_decay`, :func:`table` or
    :func:`custom` rather than directly.
    """

    kind: str
    d: int
    params: dict
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    support: int | None = None
    tail: Callable[[int, float], float] | None = field(default=None, repr=False)
    summability_order: int | None = None

    def matrix(self, lags) -> np.ndarray:
        """Covariance matrices for integer ``lags``; shape ``lags.shape + (d, d)``
        (a scalar lag gives shape ``(1, d, d)``)."""
        lags = np.atleast_1d(np.asarray(lags, dtype=np.int64))
        shape = lags.shape
        lags = lags.ravel()
        out = np.zeros((lags.size, self.d, self.d))
        nonneg = lags >= 0
        if np.any(nonneg):
            out[nonneg] = self._eval(lags[nonneg])
        if np.any(~nonneg):
            out[~nonneg] = np.swapaxes(self._eval(-lags[~nonneg]), 1, 2)
        return out.reshape(shape + (self.d, self.d))

    def _eval(self, lags: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.func(lags), dtype=float)
        vals = vals.reshape(lags.size, self.d, self.d)
        if self.support is not None:
            vals = np.where((lags > self.support)[:, None, None], 0.0, vals)
        return vals

    def scalar(self, lags) -> np.ndarray:
        """``r(j)`` for a one-dimensional model."""
        if self.d != 1:
            raise ConfigError("scalar() needs a one-dimensional model")
        return self.matrix(lags)[..., 0, 0]

    def theta(self, lags) -> np.ndarray:
        """``max_{i,l} |r^{(i,l)}(j)|`` for each lag."""
        return np.abs(self.matrix(lags)).max(axis=(-2, -1))

    def evaluate(self, i: int, l: int, j: int) -> float:
        """Single entry ``r^{(i,l)}(j)`` with 1-based coordinates."""
        return float(self.matrix([j])[0, i - 1, l - 1])

    @property
    def decay_exponent(self) -> float | None:
        """``a`` with ``|r(k)| ~ c |k|^a``; ``None`` when r vanishes eventually."""
        if self.kind == FGN:
            h = self.params["hurst"]
            return None if h == 0.5 else 2 * h - 2
        if self.kind == POLY_DECAY:
            return self.params["exponent"]
        return None

    def tail_bound(self, lag: int, power: float) -> float:
        """Certified upper bound of ``sum_{|j| > lag} theta(j)**power``."""
        if self.support is not None and lag >= self.support:
            return 0.0
        if self.kind == FGN:
            h = self.params["hurst"]
            c = h * abs(2 * h - 1)
            if c == 0.0:
                return 0.0
            a = 2 * h - 2
            if a * power >= -1:
                return math.inf
            # |r(k)| <= H|2H-1| (k-1)^(2H-2) by the mean value theorem on k^(2H)
            return 2 * c**power * _zeta_tail(a * power, max(lag, 1))
        if self.kind == POLY_DECAY:
            a, c = self.params["exponent"], self.params["scale"]
            if a * power >= -1:
                return math.inf
            lag = max(lag, 1)
            return 2 * c**power * lag ** (a * power + 1) / (-(a * power + 1))
        if self.tail is not None:
            return float(self.tail(lag, power))
        return math.inf

    def check_summability(self, q: int) -> None:
        """Raise :class:`ConditionError` unless ``sum_j |r(j)|^q`` converges."""
        a = self.decay_exponent
        if a is not None and a * q >= -1:
            raise ConditionError(
                f"covariance summability sum_j |r(j)|^q < inf fails for q={q}: "
                f"decay exponent a={a:g} gives a*q={a * q:g} >= -1"
            )
        if self.kind == CUSTOM and self.support is None and self.tail is None:
            raise ConditionError(
                "covariance summability cannot be certified for a custom model "
                "without a finite support or a tail bound"
            )

    def to_dict(self) -> dict:
        if self.kind == CUSTOM:
            raise ConfigError("custom covariance models are not serializable")
        return {"kind": self.kind, "d": self.d, "params": self.params}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @property
    def label(self) -> str:
        if self.kind == FGN:
            return f"fgn(H={self.params['hurst']:g})"
        if self.kind == POLY_DECAY:
            return f"poly_decay(a={self.params['exponent']:g},c={self.params['scale']:g})"
        if self.kind == TABLE:
            return f"table(d={self.d},L={self.support})"
        return f"custom(d={self.d})"


def _check_standardized(model: CovarianceModel) -> CovarianceModel:
    r0 = model.matrix([0])[0]
    if not np.allclose(r0, np.eye(model.d), rtol=0, atol=1e-12):
        raise ConfigError("covariance must be standardized: r(0) = I_d")
    return model


def fgn(hurst: float) -> CovarianceModel:
    """Fractional Gaussian noise with Hurst index ``hurst``."""
    hurst = float(hurst)
    if not 0.0 < hurst < 1.0:
        raise ConfigError(f"Hurst index must lie in (0, 1), got {hurst}")
    return CovarianceModel(
        kind=FGN,
        d=1,
        params={"hurst": hurst},
        func=lambda lags: fgn_autocovariance(hurst, lags),
        support=0 if hurst == 0.5 else None,
    )


def poly_decay(exponent: float, scale: float = 1.0) -> CovarianceModel:
    """``r(0) = 1`` and ``r(k) = scale * |k|^exponent`` for ``k != 0``."""
    exponent, scale = float(exponent), float(scale)
    if exponent >= 0:
        raise ConfigError("polynomial decay needs a negative exponent")
    if not 0.0 < scale <= 1.0:
        raise ConfigError("scale must lie in (0, 1] to keep |r| <= 1")

    def func(lags):
        k = np.asarray(lags, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(k == 0, 1.0, scale * np.abs(k) ** exponent)

    return CovarianceModel(
        kind=POLY_DECAY, d=1, params={"exponent": exponent, "scale": scale}, func=func
    )


def table(lags) -> CovarianceModel:
    """Finite lag table: ``lags[j]`` is ``r(j)`` (a number when d=1, else a
    ``d x d`` matrix); ``r(j) = 0`` beyond the last row and
    ``r(-j) = r(j)^T``."""
    arr = np.asarray(lags, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None, None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2] or arr.shape[0] == 0:
        raise ConfigError("table rows must all be scalars or all be d x d matrices")
    d = arr.shape[1]
    if not np.allclose(arr[0], arr[0].T, atol=1e-14):
        raise ConfigError("r(0) must be symmetric")
    support = arr.shape[0] - 1

    def func(ls):
        ls = np.asarray(ls, dtype=np.int64)
        out = np.zeros((ls.size, d, d))
        inside = ls <= support
        out[inside] = arr[ls[inside]]
        return out

    params = {"lags": arr[:, 0, 0].tolist() if d == 1 else arr.tolist()}
    return _check_standardized(
        CovarianceModel(kind=TABLE, d=d, params=params, func=func, support=support)
    )


def custom(
    func: Callable[[np.ndarray], np.ndarray],
    d: int = 1,
    support: int | None = None,
    tail: Callable[[int, float], float] | None = None,
) -> CovarianceModel:
    """User callback ``func(lags) -> (len(lags), d, d)`` for lags >= 0.

    ``tail(J, p)`` must return an upper bound of ``sum_{|j|>J} theta(j)^p``;
    without it (or a finite ``support``) bounds cannot be certified.
    """
    return _check_standardized(
        CovarianceModel(kind=CUSTOM, d=int(d), params={}, func=func, support=support, tail=tail)
    )


def from_dict(spec: dict) -> CovarianceModel:
    """Inverse of :meth:`CovarianceModel.to_dict`."""
    try:
        kind = spec["kind"].lower()
        params = dict(spec.get("params", {}))
    except (KeyError, AttributeError) as exc:
        raise ConfigError(f"bad covariance spec {spec!r}") from exc
    if kind == FGN:
        model = fgn(params["hurst"])
    elif kind == POLY_DECAY:
        model = poly_decay(params["exponent"], params.get("scale", 1.0))
    elif kind == TABLE:
        model = table(params["lags"])
    else:
        raise ConfigError(f"unknown or non-serializable covariance kind {kind!r}")
    if "d" in spec and spec["d"] != model.d:
        raise ConfigError(f"declared d={spec['d']} but model has d={model.d}")
    return model


def from_json(text: str) -> CovarianceModel:
    return from_dict(json.loads(text))


@dataclass
class DependenceCoefficients:
    """theta(j) for 0 <= j <= truncation_lag, K, and theta = sum_j theta(j)^q.

    ``theta`` includes ``tail_bound``, so it over-estimates the infinite series.
    """

    theta_of_j: np.ndarray
    K: int | None
    K_determined: bool
    theta: float
    truncation_lag: int
    tail_bound: float
    q: int
    d: int
    model: CovarianceModel = field(repr=False)
    _cumsums: dict = field(default_factory=dict, repr=False)

    def at(self, j: int) -> float:
        return float(self.theta_of_j[abs(j)])

    def _cum(self, e: float) -> np.ndarray:
        if e not in self._cumsums:
            self._cumsums[e] = np.cumsum(self.theta_of_j**e)
        return self._cumsums[e]

    def window_sum(self, n: int, e: float) -> float:
        """``sum_{|j| <= n} theta(j)^e``."""
        if n > self.truncation_lag:
            raise ConfigError(f"lag window {n} exceeds truncation lag {self.truncation_lag}")
        c = self._cum(e)
        return float(2.0 * c[n] - c[0])

    def weighted_window_sum(self, n: int, e: float) -> float:
        """``sum_{|j| <= n} theta(j)^e |j| / n``."""
        if n > self.truncation_lag:
            raise ConfigError(f"lag window {n} exceeds truncation lag {self.truncation_lag}")
        j = np.arange(1, n + 1)
        return float(2.0 * np.sum(self.theta_of_j[1 : n + 1] ** e * j) / n)

    def outside_sum(self, n: int, e: float) -> float:
        """Certified ``sum_{|j| > n} theta(j)^e``."""
        if n > self.truncation_lag:
            raise ConfigError(f"lag window {n} exceeds truncation lag {self.truncation_lag}")
        c = self._cum(e)
        inner = 2.0 * (c[-1] - c[n])
        return float(inner + self.model.tail_bound(self.truncation_lag, e))


def theta_sequence(
    model: CovarianceModel, max_lag: int = DEFAULT_MAX_LAG, q: int = 1, strict: bool = True
) -> DependenceCoefficients:
    """theta(j), K and theta for lags up to ``max_lag``.

    With ``strict`` a divergent ``sum_j theta(j)^q`` raises
    :class:`ConditionError`; otherwise ``theta`` is ``inf``.
    """
    if max_lag < 1:
        raise ConfigError("max_lag must be >= 1")
    if strict:
        model.check_summability(q)
    lags = np.arange(max_lag + 1)
    th = model.theta(lags)
    d = model.d
    tail = model.tail_bound(max_lag, q)
    theta = float(2.0 * np.sum(th[1:] ** q) + th[0] ** q) + tail
    if strict and not math.isfinite(theta):
        raise ConditionError(f"sum_j theta(j)^{q} is not finite for {model.label}")

    over = np.nonzero(th > 1.0 / d + 1e-14)[0]
    K = int(over[-1]) + 1 if over.size else 0
    # no single theta(j) beyond max_lag can exceed the whole tail sum
    determined = d == 1 or model.tail_bound(max_lag, 1) <= 1.0 / d
    return DependenceCoefficients(
        theta_of_j=th,
        K=K if determined else None,
        K_determined=determined,
        theta=theta,
        truncation_lag=max_lag,
        tail_bound=tail,
        q=q,
        d=d,
        model=model,
    )


def _b_tensor_lag_term(b: np.ndarray, R: np.ndarray) -> float:
    """``<b, R^{(x)m} b>`` for a symmetric tensor ``b`` of order m."""
    m = b.ndim
    out = b
    for _ in range(m):
        # contract the leading axis with R and move the result to the back
        out = np.tensordot(out, R, axes=([0], [0]))
    return float(np.sum(b * out))


def lag_covariance(model: CovarianceModel, expansion: "HermiteExpansion", m: int, lags) -> np.ndarray:
    """``E[f_m(X_1) f_m(X_{1+j})]`` for each lag ``j``."""
    lags = np.atleast_1d(np.asarray(lags, dtype=np.int64))
    energy = expansion.energy_by_order[m] if m <= expansion.max_order else 0.0
    if model.d == 1:
        return energy * model.scalar(lags) ** m
    b = expansion.b_tensor(m)
    fact = math.factorial(m)
    return np.array([fact * _b_tensor_lag_term(b, R) for R in model.matrix(lags)])


def _effective_lag(model: CovarianceModel, max_lag: int) -> int:
    return max_lag if model.support is None else min(max_lag, model.support)


def sigma2_order(
    model: CovarianceModel,
    expansion: "HermiteExpansion",
    m: int,
    max_lag: int = DEFAULT_MAX_LAG,
    return_tail: bool = False,
):
    """Truncated ``sigma_m^2 = sum_{|k| <= max_lag} E[f_m(X_1) f_m(X_{1+k})]``.

    For d=1 this is ``a_m^2 m! sum_k r(k)^m``.  With ``return_tail`` the pair
    ``(value, tail)`` is returned, ``tail`` bounding the neglected lags.
    """
    if not expansion.rank <= m <= expansion.max_order:
        raise ConfigError(f"order {m} outside [{expansion.rank}, {expansion.max_order}]")
    J = _effective_lag(model, max_lag)
    c = lag_covariance(model, expansion, m, np.arange(J + 1))
    value = float(c[0] + 2.0 * np.sum(c[1:]))
    energy = expansion.energy_by_order[m]
    tail = 0.0 if energy == 0.0 else energy * model.d**m * model.tail_bound(max_lag, m)
    return (value, tail) if return_tail else value


@dataclass
class VarianceDecomposition:
    sigma2_by_order: dict[int, float]
    sigma2_total: float
    truncation_order: int
    lag_truncation: int
    tail_estimate: float

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.sigma2_total, 0.0))


def sigma2_total(
    model: CovarianceModel,
    expansion: "HermiteExpansion",
    N_max: int | None = None,
    max_lag: int = DEFAULT_MAX_LAG,
    dependence: DependenceCoefficients | None = None,
) -> VarianceDecomposition:
    """``sigma^2 = sum_{m=q}^{N_max} sigma_m^2`` with a combined tail estimate.

    The tail adds the per-order lag tails and the Hermite energy above
    ``N_max`` multiplied by ``2K + d^q theta``.
    """
    q = expansion.rank
    N_max = expansion.max_order if N_max is None else min(N_max, expansion.max_order)
    if N_max < q:
        raise ConfigError(f"N_max={N_max} is below the Hermite rank {q}")
    by_order, lag_tail = {}, 0.0
    for m in range(q, N_max + 1):
        v, t = sigma2_order(model, expansion, m, max_lag, return_tail=True)
        by_order[m] = v
        lag_tail += t
    energy_above = float(np.sum(expansion.energy_by_order[N_max + 1 :])) + expansion.energy_tail
    if energy_above > 0.0:
        dep = dependence or theta_sequence(model, max_lag, q, strict=False)
        K = dep.K if dep.K is not None else math.inf
        lag_tail += energy_above * (2 * K + model.d**q * dep.theta)
    return VarianceDecomposition(
        sigma2_by_order=by_order,
        sigma2_total=float(sum(by_order.values())),
        truncation_order=N_max,
        lag_truncation=max_lag,
        tail_estimate=lag_tail,
    )


def finite_n_variance(
    model: CovarianceModel, expansion: "HermiteExpansion", n: int, m: int | None = None
) -> float:
    """Exact ``Var[n^{-1/2} sum_{k<=n} f_m(X_k)]`` (all captured orders if
    ``m`` is None): ``sum_{|j|<n} (1 - |j|/n) E[f_m(X_1) f_m(X_{1+j})]``."""
    orders = range(expansion.rank, expansion.max_order + 1) if m is None else [m]
    j = np.arange(n)
    w = 1.0 - j / n
    total = 0.0
    for order in orders:
        if expansion.energy_by_order[order] == 0.0:
            continue
        c = lag_covariance(model, expansion, order, j)
        total += float(c[0] + 2.0 * np.sum(w[1:] * c[1:]))
    return total


def karamata_ratio(a: float, n: int) -> float:
    """Ratio of a power partial (a > -1) or tail (a < -1) sum to its
    regular-variation asymptote; tends to 1 as n grows."""
    if a == -1:
        raise ConfigError("a = -1 is the logarithmic case and is not supported")
    if a >= 0 and a != 0:
        raise ConfigError("karamata_ratio needs a < 0 (or a = 0)")
    if a > -1:
        k = np.arange(1, n + 1, dtype=float)
        return float(np.sum(k**a) / (n ** (a + 1) / (a + 1)))
    # Hurwitz zeta gives the exact tail sum_{k >= n} k^a
    return float(special.zeta(-a, n) / (-(n ** (a + 1)) / (a + 1)))
