import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import hermite_e

from breuer_major import hermite as hm
from breuer_major.errors import ConfigError, QuadratureError, RankUndeterminedError


def test_low_order_values():
    x = np.linspace(-3, 3, 7)
    np.testing.assert_array_equal(hm.hermite_eval(0, x), np.ones_like(x))
    np.testing.assert_array_equal(hm.hermite_eval(1, x), x)
    assert hm.hermite_eval(2, 3.0) == 8.0
    assert hm.hermite_eval(4, 0.0) == 3.0


@given(st.integers(0, 15), st.floats(-6, 6))
def test_recurrence_matches_numpy(j, x):
    unit = np.zeros(j + 1)
    unit[j] = 1
    assert hm.hermite_eval(j, x) == pytest.approx(hermite_e.hermeval(x, unit), rel=1e-10, abs=1e-8)


def test_table_rows():
    x = np.array([0.3, -1.2])
    T = hm.hermite_table(5, x)
    for j in range(6):
        np.testing.assert_allclose(T[:, j], hm.hermite_eval(j, x))


def test_h3_expansion():
    exp = hm.expand(lambda x: x**3 - 3 * x)
    assert exp.rank == 3
    assert exp.coefficient(3) == pytest.approx(1.0, abs=1e-8)
    others = np.delete(exp.coefficients, 3)
    assert np.max(np.abs(others)) < 1e-8


def test_abs_and_sign_coefficients():
    ab = hm.builtin({"name": "abs"})
    assert ab.rank == 2
    assert ab.coefficient(2) == pytest.approx(math.sqrt(2 / math.pi) / 2, abs=1e-12)
    assert ab.mean == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
    sg = hm.builtin("sign")
    assert sg.rank == 1
    assert sg.coefficient(1) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)


def test_abs_closed_form_coefficients():
    # a_{2k} of |x|: E[|X| H_{2k}(X)] / (2k)! = 2 phi(0) (-1)^{k+1} (2k-3)!! ... checked against mpmath-free recursion
    ab = hm.builtin({"name": "abs"}, max_order=12)
    phi0 = 1 / math.sqrt(2 * math.pi)
    for k in range(1, 7):
        # E[|X| H_n(X)] = 2 phi(0) H_{n-2}(0) for even n >= 2
        want = 2 * phi0 * hm.hermite_eval(2 * k - 2, 0.0) / math.factorial(2 * k)
        assert ab.coefficient(2 * k) == pytest.approx(want, abs=1e-12)


def test_indicator_rank_and_coefficients():
    z = 0.5
    ind = hm.builtin({"name": "indicator", "params": {"z": z}})
    phi = math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
    # E[1{X<=z} H_n(X)] = -phi(z) H_{n-1}(z)
    for n in (1, 2, 3, 6):
        want = -phi * hm.hermite_eval(n - 1, z) / math.factorial(n)
        assert ind.coefficient(n) == pytest.approx(want, abs=1e-10)
    assert ind.rank == 1


def test_project():
    x2 = hm.builtin({"name": "polynomial", "params": {"coeffs": [0, 0, 1]}})
    x = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(x2.project(2)(x), x**2 - 1, atol=1e-14)
    ab = hm.builtin("abs")
    assert ab.project(2)(0.0) == pytest.approx(-0.398942, abs=1e-6)
    np.testing.assert_array_equal(ab.project(3)(x), 0.0)


def test_centering_and_call():
    x2 = hm.builtin({"name": "polynomial", "params": {"coeffs": [1, 0, 1]}})
    assert x2.mean == pytest.approx(2.0)
    assert x2(2.0) == pytest.approx(3.0)
    again = hm.expand(lambda x: x2(x))
    assert abs(again.mean) < 1e-12


def test_parseval_polynomial():
    coeffs = [0.5, -1.0, 0.3, 0.0, 0.2]
    exp = hm.builtin({"name": "polynomial", "params": {"coeffs": coeffs}}, max_order=6)
    num = hm.expand(lambda x: np.polyval(coeffs[::-1], x), max_order=6)
    assert exp.total_energy == pytest.approx(num.total_energy, rel=1e-10)
    assert exp.energy_tail == 0.0
    assert float(exp.energy_by_order.sum()) == pytest.approx(exp.total_energy, rel=1e-12)


def test_parseval_inequality_for_rough_function():
    ab = hm.builtin("abs", max_order=10)
    assert float(ab.energy_by_order.sum()) <= ab.total_energy + 1e-12
    assert ab.total_energy == pytest.approx(1 - 2 / math.pi, abs=1e-10)


def test_rank_undetermined():
    with pytest.raises(RankUndeterminedError):
        hm.expand(lambda x: np.ones_like(x))


def test_non_convergent_quadrature_flagged():
    with pytest.raises(QuadratureError):
        hm.expand(np.abs, max_order=20)


def test_multivariate_rank_and_permutation():
    f = lambda x: x[..., 0] * x[..., 1] + x[..., 1] ** 2 - 1
    exp = hm.expand(f, d=2, max_order=4)
    swapped = hm.expand(lambda x: f(x[..., ::-1]), d=2, max_order=4)
    assert exp.rank == swapped.rank == 2
    assert exp.coefficient((1, 1)) == pytest.approx(1.0, abs=1e-10)
    assert exp.coefficient((0, 2)) == pytest.approx(1.0, abs=1e-10)
    assert swapped.coefficient((2, 0)) == pytest.approx(1.0, abs=1e-10)


def test_b_tensor_energy():
    exp = hm.from_coefficients({(2, 0): 0.7, (1, 1): -0.4, (0, 2): 0.1}, d=2, max_order=3)
    b = exp.b_tensor(2)
    np.testing.assert_allclose(b, b.T)
    assert math.factorial(2) * np.sum(b**2) == pytest.approx(exp.energy_by_order[2], rel=1e-14)


def test_from_coefficients_tail():
    exp = hm.from_coefficients({1: 1.0, 5: 0.5}, max_order=3)
    assert exp.energy_tail == pytest.approx(0.25 * 120)
    assert exp.total_energy == pytest.approx(1 + 30)


def test_bad_multi_index():
    with pytest.raises(ConfigError):
        hm.from_coefficients({(1,): 1.0}, d=2)
