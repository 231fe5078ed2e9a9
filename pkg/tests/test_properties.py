"""Property tests over randomized models, functions and seeds."""
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from breuer_major import bounds as b
from breuer_major import covariance as cv
from breuer_major import hermite as hm
from breuer_major import montecarlo as mc
from breuer_major import simulate as sim

hursts = st.floats(0.05, 0.95)
short_memory = st.floats(0.3, 0.7)


@given(hursts, st.integers(1, 1000))
def test_fgn_telescoping(H, n):
    model = cv.fgn(H)
    j = np.arange(-(n - 1), n)
    total = float(np.sum((n - np.abs(j)) * model.scalar(j)))
    assert total == pytest.approx(n ** (2 * H), rel=1e-10)


@given(hursts, st.integers(-500, 500))
def test_fgn_standardized_and_symmetric(H, j):
    model = cv.fgn(H)
    assert model.scalar(np.array([0]))[0] == 1.0
    r = model.scalar(np.array([j, -j]))
    assert r[0] == r[1]
    assert abs(r[0]) <= 1.0


nonconstant = st.lists(st.floats(-2, 2), min_size=2, max_size=6).filter(lambda c: max(map(abs, c[1:])) > 0.05)


@given(nonconstant)
def test_parseval_equality_for_polynomials(coeffs):
    exp = hm.builtin({"name": "polynomial", "params": {"coeffs": coeffs}}, max_order=8)
    x, w = np.polynomial.hermite_e.hermegauss(30)
    p = np.polyval(coeffs[::-1], x)
    mean = np.sum(w * p) / math.sqrt(2 * math.pi)
    var = np.sum(w * (p - mean) ** 2) / math.sqrt(2 * math.pi)
    assert exp.total_energy == pytest.approx(var, rel=1e-9, abs=1e-12)
    assert exp.mean == pytest.approx(mean, rel=1e-9, abs=1e-12)


@given(nonconstant)
def test_recentering_removes_mean(coeffs):
    exp = hm.builtin({"name": "polynomial", "params": {"coeffs": coeffs}}, max_order=6)
    again = hm.expand(exp, max_order=6)
    assert abs(again.mean) < 1e-12


@settings(max_examples=10)
@given(short_memory, st.integers(8, 400), st.sampled_from(["abs", "sign"]))
def test_bound_terms_nonnegative_and_monotone(H, n, name):
    assume(name == "abs" or H < 0.48)
    rep = b.bound_theorem(cv.fgn(H), hm.builtin(name, max_order=8), n)
    Ns = sorted(rep.A3)
    assert rep.A1 >= 0
    for key in ("A2", "A3", "A4", "A5"):
        assert all(v >= 0 for v in getattr(rep, key).values())
    for key in ("A3", "A4", "A5"):
        vals = [getattr(rep, key)[N] for N in Ns]
        assert all(x <= y for x, y in zip(vals, vals[1:]))
    inner = [rep.A2[N] + rep.A3[N] + rep.A4[N] + rep.A5[N] for N in Ns]
    assert rep.bound_C2 == rep.A1 + min(inner)
    assert rep.bound_kolmogorov == pytest.approx(
        math.sqrt(2) / math.sqrt(rep.sigma2) * math.sqrt(2 * rep.bound_lipschitz), rel=1e-13
    )


@settings(max_examples=10)
@given(st.floats(0.05, 0.7), st.integers(2, 4))
def test_corollary_bound_shrinks_with_n(H, q):
    assume(H < 1 - 1 / (2 * q) - 0.02)
    reps = b.bound_series(cv.fgn(H), None, [64, 1024, 16384], q=q)
    vals = [r.bound_C2 for r in reps]
    assert all(x > y for x, y in zip(vals, vals[1:]))


@given(st.floats(-0.99, -0.01), st.integers(1, 4))
def test_predicted_exponent_in_case_table(a, q):
    assume(a < -1 / q)
    assume(all(abs(a * e + 1) > 1e-9 for e in range(1, q + 1)))
    pred = b.predict_rate(a, q)
    assert pred.exponent in (-0.5, a / 2, (a * q + 1) / 2)


@given(st.integers(0, 2**32), st.floats(0.3, 3.0))
def test_distance_estimates_nonnegative_and_order_free(seed, sigma):
    x = np.random.default_rng(seed).standard_normal(300)
    for stat in (mc.kolmogorov_statistic, mc.wasserstein_statistic):
        value = stat(x, sigma)
        assert value >= 0
        assert value == pytest.approx(stat(x[::-1].copy(), sigma), rel=1e-12, abs=1e-15)


@given(st.floats(-2, 0.5), st.floats(0.1, 10))
def test_fit_rate_recovers_power_law(slope, scale):
    ns = [2**k for k in range(4, 12)]
    fit = mc.fit_rate(ns, [scale * n**slope for n in ns], predicted=slope, tolerance=1e-9)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert fit.verdict


@settings(max_examples=8)
@given(st.integers(0, 2**63), st.integers(1, 4), st.integers(257, 700))
def test_partial_sums_independent_of_threads(seed, threads, R):
    f = hm.builtin({"name": "hermite", "params": {"q": 2}}, max_order=2)
    one = sim.partial_sums(cv.fgn(0.7), f, 32, R, seed, threads=1)
    many = sim.partial_sums(cv.fgn(0.7), f, 32, R, seed, threads=threads)
    assert one.tobytes() == many.tobytes()
