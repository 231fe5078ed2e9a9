"""Exact sampling of stationary Gaussian sequences and their partial sums.

Every replication draws from its own Philox stream derived from
``SeedSequence(seed, spawn_key=(stream,))``.  Work is split into chunks of a
fixed size, and each row of a chunk uses only its own stream, so results do not
depend on the number of worker threads.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .covariance import CovarianceModel
from .errors import CapExceededError, ConditionError, ConfigError, NumericalError
from .hermite import HermiteExpansion

CIRCULANT = "CIRCULANT"
CHOLESKY = "CHOLESKY"
EIGEN_TOLERANCE = 1e-12
CHOLESKY_CAP = 4096
CHUNK = 256


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for replication ``stream`` under master ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


@dataclass
class GaussianPathSample:
    """One path ``X_1..X_n``; ``values`` has shape ``(n, d)``."""

    n: int
    d: int
    values: np.ndarray
    seed: int
    stream: int
    method: str

    @property
    def x(self) -> np.ndarray:
        """The path as a flat array when ``d = 1``."""
        if self.d != 1:
            raise ConfigError("x is only defined for one-dimensional paths")
        return self.values[:, 0]


@dataclass
class PartialSumSample:
    value: float
    n: int
    N: float
    replication: int
    seed: int
    stream: int


class _Sampler:
    """Precomputed square root of the covariance for one ``(model, n)``."""

    def __init__(self, model: CovarianceModel, n: int, method: str | None = None, allow_fallback: bool = True):
        if n < 1:
            raise ConfigError("n must be >= 1")
        self.model, self.n, self.d = model, n, model.d
        method = (method or (CIRCULANT if model.d == 1 else CHOLESKY)).upper()
        if method not in (CIRCULANT, CHOLESKY):
            raise ConfigError(f"unknown sampling method {method!r}")
        if method == CIRCULANT and model.d != 1:
            raise ConfigError("circulant embedding needs d = 1; use CHOLESKY")
        if method == CIRCULANT:
            if n == 1:
                self.sqrt_eigs = np.ones(1)
                self.M = 1
            else:
                eigs = self._embedding_spectrum(model, n)
                if eigs.min() < -EIGEN_TOLERANCE:
                    if not allow_fallback:
                        raise NumericalError(
                            f"circulant embedding has eigenvalue {eigs.min():.3g} below -{EIGEN_TOLERANCE:g}"
                        )
                    method = CHOLESKY
                else:
                    self.M = eigs.size
                    self.sqrt_eigs = np.sqrt(np.clip(eigs, 0.0, None) / self.M)
        if method == CHOLESKY:
            self.factor = self._cholesky(model, n)
        self.method = method

    @staticmethod
    def _embedding_spectrum(model: CovarianceModel, n: int) -> np.ndarray:
        M = 1 << max(1, math.ceil(math.log2(2 * (n - 1))))
        half = M // 2
        r = model.scalar(np.arange(half + 1))
        c = np.concatenate([r, r[1:half][::-1]])
        return np.fft.fft(c).real

    @staticmethod
    def _cholesky(model: CovarianceModel, n: int) -> np.ndarray:
        from .chaos import block_toeplitz

        if n * model.d > CHOLESKY_CAP:
            raise CapExceededError(f"n*d = {n * model.d} exceeds the Cholesky cap {CHOLESKY_CAP}")
        cov = block_toeplitz(model, n)
        try:
            return np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            vals, vecs = np.linalg.eigh(cov)
            if vals.min() < -1e-10 * max(1.0, vals.max()):
                raise ConditionError(f"covariance of {model.label} over {n} steps is not positive semi-definite") from None
            return vecs * np.sqrt(np.clip(vals, 0.0, None))

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        """One path of shape ``(n, d)``."""
        if self.method == CHOLESKY:
            z = rng.standard_normal(self.n * self.d)
            return (self.factor @ z).reshape(self.n, self.d)
        if self.M == 1:
            return rng.standard_normal((1, 1))
        z = rng.standard_normal(2 * self.M)
        w = self.sqrt_eigs * (z[: self.M] + 1j * z[self.M :])
        return np.fft.fft(w).real[: self.n, None]


@lru_cache(maxsize=16)
def _cached_sampler(model: CovarianceModel, n: int, method: str | None, allow_fallback: bool) -> _Sampler:
    return _Sampler(model, n, method, allow_fallback)


def sampler(model: CovarianceModel, n: int, method: str | None = None, allow_fallback: bool = True) -> _Sampler:
    return _cached_sampler(model, int(n), method, allow_fallback)


def sample_path(
    model: CovarianceModel,
    n: int,
    seed: int,
    stream: int = 0,
    method: str | None = None,
    allow_fallback: bool = True,
) -> GaussianPathSample:
    """Exact stationary sample ``X_1..X_n``, deterministic in ``(seed, stream)``."""
    s = sampler(model, n, method, allow_fallback)
    values = s.draw(stream_rng(seed, stream))
    return GaussianPathSample(n, model.d, values, int(seed), int(stream), s.method)


def _evaluator(f, N: float | None, d: int) -> Callable[[np.ndarray], np.ndarray]:
    """Map paths of shape ``(..., n, d)`` to per-step values ``(..., n)``."""
    if N is not None and math.isfinite(N):
        if not isinstance(f, HermiteExpansion):
            raise ConfigError("a finite order cap N needs a HermiteExpansion")
        g = f.truncated(int(N))
    elif callable(f):
        g = f
    else:
        raise ConfigError("f must be a HermiteExpansion or a callable")
    if d == 1:
        return lambda x: np.asarray(g(x[..., 0]), dtype=float)
    return lambda x: np.asarray(g(x), dtype=float)


def partial_sum(path: GaussianPathSample, f, N: float | None = None, replication: int = 0) -> PartialSumSample:
    """``S_n = n^{-1/2} sum_k (f(X_k) - E f)``, or the chaos-truncated
    ``S_{n,N} = n^{-1/2} sum_k sum_{m=q}^N f_m(X_k)`` when ``N`` is finite.

    A :class:`HermiteExpansion` evaluates to the centered function; a plain
    callable must already be centered.
    """
    vals = _evaluator(f, N, path.d)(path.values)
    value = float(np.sum(vals) / math.sqrt(path.n))
    return PartialSumSample(value, path.n, math.inf if N is None else N, replication, path.seed, path.stream)


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        return 1
    threads = int(threads)
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


def _run_chunks(task: Callable[[int, int], np.ndarray], R: int, threads: int) -> np.ndarray:
    starts = list(range(0, R, CHUNK))
    spans = [(a, min(a + CHUNK, R)) for a in starts]
    if threads == 1 or len(spans) == 1:
        parts = [task(a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: task(*ab), spans))
    return np.concatenate(parts) if parts else np.empty(0)


def sample_paths(
    model: CovarianceModel,
    n: int,
    R: int,
    seed: int,
    threads: int | None = 1,
    first_stream: int = 0,
    method: str | None = None,
) -> np.ndarray:
    """``R`` independent paths, shape ``(R, n, d)``; row ``i`` uses stream
    ``first_stream + i``."""
    s = sampler(model, n, method)

    def task(a, b):
        return np.stack([s.draw(stream_rng(seed, first_stream + i)) for i in range(a, b)])

    return _run_chunks(task, int(R), _resolve_threads(threads)).reshape(int(R), n, model.d)


def partial_sums(
    model: CovarianceModel,
    f,
    n: int,
    R: int,
    seed: int,
    N: float | None = None,
    threads: int | None = 1,
    first_stream: int = 0,
    method: str | None = None,
) -> np.ndarray:
    """``R`` replications of ``S_n`` (or ``S_{n,N}``) as a float array.

    Paths are generated and reduced chunk by chunk, so memory stays at
    ``CHUNK * n * d`` floats.
    """
    if R < 1:
        raise ConfigError("R must be >= 1")
    s = sampler(model, n, method)
    ev = _evaluator(f, N, model.d)
    scale = 1.0 / math.sqrt(n)

    def task(a, b):
        paths = np.stack([s.draw(stream_rng(seed, first_stream + i)) for i in range(a, b)])
        return ev(paths).sum(axis=1) * scale

    return _run_chunks(task, int(R), _resolve_threads(threads))


def dump_partial_sums(path: str | Path, values: np.ndarray, n: int, N: float | None, seed: int, first_stream: int = 0) -> None:
    """Write raw replications as CSV: replication, n, N, value, seed, stream."""
    with open(path, "w", newline="") as fh:
        write_partial_sums(fh, values, n, N, seed, first_stream)


def write_partial_sums(fh, values, n, N, seed, first_stream=0) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["replication", "n", "N", "value", "seed", "stream"])
    N_label = "inf" if N is None or not math.isfinite(N) else int(N)
    for i, v in enumerate(values):
        w.writerow([i, n, N_label, repr(float(v)), seed, first_stream + i])
