"""Monte Carlo estimates of distances between the law of ``S_n`` and
``N(0, sigma^2)``, and log-log fits of convergence rates."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e
from scipy import special, stats

from .covariance import CovarianceModel
from .errors import ConfigError
from .hermite import HermiteExpansion
from .simulate import partial_sums, stream_rng

KOL = "KOL"
W = "W"
DC = "C"
H = "H"
BOOTSTRAP_RESAMPLES = 200
# bootstrap draws use a stream far above any replication index
BOOTSTRAP_STREAM = 2**62
MIN_REPLICATIONS = 1000
_GH_NODES, _GH_WEIGHTS = hermite_e.hermegauss(80)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2 * math.pi)


@dataclass
class DistanceEstimate:
    kind: str
    estimate: float
    se: float
    R: int
    n: int | None
    seed: int | None
    test: str | None = None
    bound: float | None = None
    verdict: bool | None = None
    lower_bound_only: bool = False
    notes: dict = field(default_factory=dict)

    def compare(self, bound: float) -> "DistanceEstimate":
        """Attach ``bound`` and the verdict ``estimate <= bound + 3 SE``."""
        self.bound = float(bound)
        self.verdict = bool(self.estimate <= self.bound + 3.0 * self.se)
        return self

    def to_row(self, experiment: str = "", N: float | None = None) -> dict:
        row = asdict(self)
        row.pop("notes")
        row["experiment"] = experiment
        row["N"] = "inf" if N is None else N
        return row


# --- test functions ---------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """``h`` with declared sup-norms of ``h'`` and ``h''`` (``None`` if unknown
    or infinite)."""

    __test__ = False  # not a pytest class

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    d1: float | None = None
    d2: float | None = None
    gaussian_mean: Callable[[float], float] | None = None

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def expectation(self, sigma: float) -> float:
        """``E[h(N(0, sigma^2))]``, by Gauss-Hermite quadrature unless a
        closed form is attached."""
        if self.gaussian_mean is not None:
            return float(self.gaussian_mean(sigma))
        return float(np.dot(_GH_WEIGHTS, self.func(sigma * _GH_NODES)))


def _bump(center: float, width: float, scale: float = 1.0) -> Callable:
    # ||h''|| = scale for scale * width^2 * exp(-(x-c)^2 / (2 width^2))
    return lambda x: scale * width**2 * np.exp(-0.5 * ((x - center) / width) ** 2)


def indicator(z: float) -> TestFunction:
    return TestFunction(
        f"indicator({z:g})",
        lambda x: (x <= z).astype(float),
        gaussian_mean=lambda s: special.ndtr(z / s),
    )


REGISTRY: dict[str, TestFunction] = {
    "cos": TestFunction("cos", np.cos, 1.0, 1.0),
    "square": TestFunction("square", np.square, None, 2.0, gaussian_mean=lambda s: s * s),
    "gauss_bump": TestFunction("gauss_bump", _bump(0.0, 1.0), math.exp(-0.5), 1.0),
    "constant": TestFunction("constant", lambda x: np.ones_like(x), 0.0, 0.0, gaussian_mean=lambda s: 1.0),
}


def test_function(name: str) -> TestFunction:
    """Look up a registered test function; ``indicator(z)`` is parsed."""
    if name in REGISTRY:
        return REGISTRY[name]
    if name.startswith("indicator(") and name.endswith(")"):
        try:
            return indicator(float(name[len("indicator(") : -1]))
        except ValueError as exc:
            raise ConfigError(f"bad indicator level in {name!r}") from exc
    raise ConfigError(f"unknown test function {name!r}; known: {sorted(REGISTRY)} and indicator(z)")


def dC_family(C: float = 1.0) -> list[TestFunction]:
    """Twelve functions with ``||h''|| <= C``: ``cos(wx)/w^2`` and
    ``sin(wx)/w^2`` for ``w`` in {0.5, 1, 2}, and bumps with ``||h''|| = C``
    centred at -1, 0, 1 with widths 0.5 and 1."""
    fam = []
    for w in (0.5, 1.0, 2.0):
        fam.append(TestFunction(f"cos({w:g}x)", lambda x, w=w: C * np.cos(w * x) / w**2, C / w, C))
        fam.append(TestFunction(f"sin({w:g}x)", lambda x, w=w: C * np.sin(w * x) / w**2, C / w, C))
    for c in (-1.0, 0.0, 1.0):
        for s in (0.5, 1.0):
            fam.append(TestFunction(f"bump({c:g},{s:g})", _bump(c, s, C), C * s * math.exp(-0.5), C))
    return fam


# --- statistics on samples --------------------------------------------------------


def kolmogorov_statistic(samples, sigma: float) -> float:
    """Exact ``sup_z |ECDF(z) - Phi(z/sigma)|``."""
    x = np.sort(np.asarray(samples, dtype=float))
    R = x.size
    F = special.ndtr(x / sigma)
    i = np.arange(1, R + 1)
    return float(max(np.max(i / R - F), np.max(F - (i - 1) / R)))


def wasserstein_statistic(samples, sigma: float) -> float:
    """Exact ``int_0^1 |Q_R(u) - sigma Phi^{-1}(u)| du``.

    On ``((i-1)/R, i/R]`` the empirical quantile is the ``i``-th order
    statistic; the integral of ``sigma Phi^{-1}`` has antiderivative
    ``-sigma phi(Phi^{-1}(u))``.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    R = x.size
    u = np.arange(R + 1) / R

    def Q(v):
        return -sigma * stats.norm.pdf(special.ndtri(v))

    a, b = u[:-1], u[1:]
    c = np.clip(special.ndtr(x / sigma), a, b)
    total = x * (2 * c - a - b) + Q(a) + Q(b) - 2 * Q(c)
    return float(np.sum(total))


def testfn_statistic(samples, sigma: float, h: TestFunction) -> tuple[float, float]:
    """``|mean h(S) - E h(N(0, sigma^2))|`` and its SE ``sd/sqrt(R)``."""
    vals = h(samples)
    diff = abs(float(np.mean(vals)) - h.expectation(sigma))
    se = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.inf
    return diff, se


def dC_statistic(samples, sigma: float, family: list[TestFunction]) -> tuple[float, str]:
    best, arg = -1.0, ""
    for h in family:
        v = abs(float(np.mean(h(samples))) - h.expectation(sigma))
        if v > best:
            best, arg = v, h.name
    return best, arg


def bootstrap_se(samples, statistic: Callable[[np.ndarray], float], seed: int, B: int = BOOTSTRAP_RESAMPLES) -> float:
    """Seeded nonparametric bootstrap standard error of ``statistic``."""
    x = np.asarray(samples, dtype=float)
    rng = stream_rng(0 if seed is None else seed, BOOTSTRAP_STREAM)
    reps = np.empty(B)
    for b in range(B):
        reps[b] = statistic(x[rng.integers(0, x.size, x.size)])
    return float(np.std(reps, ddof=1))


def _check(sigma: float, R: int):
    if not sigma > 0:
        raise ConfigError("sigma must be positive; the limit law is degenerate")
    if R < MIN_REPLICATIONS:
        raise ConfigError(f"R must be at least {MIN_REPLICATIONS}")


def _samples(model, expansion, n, R, seed, threads, samples):
    if samples is not None:
        return np.asarray(samples, dtype=float)
    return partial_sums(model, expansion, n, R, seed, threads=threads)


def estimate_kolmogorov(
    model: CovarianceModel | None,
    expansion: HermiteExpansion | None,
    n: int | None,
    sigma: float,
    R: int,
    seed: int,
    threads: int = 1,
    samples=None,
) -> DistanceEstimate:
    """Kolmogorov distance between the law of ``S_n`` and ``N(0, sigma^2)``.

    ``samples`` short-circuits the simulation.  The DKW half-width at 99%
    is kept in ``notes``.
    """
    _check(sigma, R)
    x = _samples(model, expansion, n, R, seed, threads, samples)[:R]
    est = kolmogorov_statistic(x, sigma)
    se = bootstrap_se(x, lambda y: kolmogorov_statistic(y, sigma), seed)
    dkw = math.sqrt(math.log(2 / 0.01) / (2 * x.size))
    return DistanceEstimate(KOL, est, se, x.size, n, seed, notes={"dkw_99": dkw})


def estimate_wasserstein(
    model: CovarianceModel | None,
    expansion: HermiteExpansion | None,
    n: int | None,
    sigma: float,
    R: int,
    seed: int,
    threads: int = 1,
    samples=None,
) -> DistanceEstimate:
    """Wasserstein-1 distance to ``N(0, sigma^2)`` by quantile coupling."""
    _check(sigma, R)
    x = _samples(model, expansion, n, R, seed, threads, samples)[:R]
    est = wasserstein_statistic(x, sigma)
    se = bootstrap_se(x, lambda y: wasserstein_statistic(y, sigma), seed)
    return DistanceEstimate(W, est, se, x.size, n, seed)


def estimate_testfn(
    model: CovarianceModel | None,
    expansion: HermiteExpansion | None,
    n: int | None,
    sigma: float,
    h: TestFunction | str,
    R: int,
    seed: int,
    threads: int = 1,
    samples=None,
) -> DistanceEstimate:
    """``|E h(S_n) - E h(N(0, sigma^2))|`` for one test function."""
    h = test_function(h) if isinstance(h, str) else h
    _check(sigma, R)
    x = _samples(model, expansion, n, R, seed, threads, samples)[:R]
    est, se = testfn_statistic(x, sigma, h)
    return DistanceEstimate(H, est, se, x.size, n, seed, test=h.name, notes={"d1": h.d1, "d2": h.d2})


def estimate_dC(
    model: CovarianceModel | None,
    expansion: HermiteExpansion | None,
    n: int | None,
    sigma: float,
    R: int,
    seed: int,
    C: float = 1.0,
    threads: int = 1,
    samples=None,
) -> DistanceEstimate:
    """Lower estimate of ``d_C``: the largest discrepancy over
    :func:`dC_family`.  The true supremum is at least this value."""
    _check(sigma, R)
    fam = dC_family(C)
    x = _samples(model, expansion, n, R, seed, threads, samples)[:R]
    est, arg = dC_statistic(x, sigma, fam)
    se = bootstrap_se(x, lambda y: dC_statistic(y, sigma, fam)[0], seed)
    return DistanceEstimate(
        DC, est, se, x.size, n, seed, test=f"dC_family(C={C:g})", lower_bound_only=True, notes={"argmax": arg}
    )


# --- rate fitting -----------------------------------------------------------------


@dataclass
class RateFit:
    ns: list[int]
    values: list[float]
    slope: float
    intercept: float
    slope_se: float
    predicted: float | None = None
    tolerance: float | None = None

    @property
    def verdict(self) -> bool | None:
        if self.predicted is None or self.tolerance is None:
            return None
        return abs(self.slope - self.predicted) <= self.tolerance

    def to_row(self) -> dict:
        row = asdict(self)
        row["verdict"] = self.verdict
        return row


def fit_rate(ns, values, predicted: float | None = None, tolerance: float | None = None) -> RateFit:
    """Ordinary least squares of ``log value`` on ``log n``."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.size < 4:
        raise ConfigError("fit_rate needs at least 4 (n, value) pairs")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise ConfigError("fit_rate needs finite positive values")
    res = stats.linregress(np.log(ns), np.log(values))
    return RateFit(
        [int(v) for v in ns],
        values.tolist(),
        float(res.slope),
        float(res.intercept),
        float(res.stderr),
        predicted,
        tolerance,
    )
