"""Polynomial algebra and the all-roots finder."""

import numpy as np
import pytest

from app.lti.poly import Polynomial, roots
from app.utils.errors import ZeroPolynomial


def _sorted(values: list[complex]) -> list[complex]:
    return sorted(values, key=lambda r: (round(r.real, 9), round(r.imag, 9)))


def test_first_order_observer_pole() -> None:
    # z - (1 - alpha g T_s) with alpha = 1, g = 1000, T_s = 5e-4
    p = Polynomial([-(1 - 1000 * 5e-4), 1.0])
    assert roots(p) == [pytest.approx(0.5)]


def test_repeated_roots_keep_multiplicity() -> None:
    p = Polynomial.from_roots([1.0, 1.0, -0.3])
    found = roots(p)
    assert len(found) == 3
    np.testing.assert_allclose(
        np.array(found), np.array([-0.3, 1.0, 1.0]), atol=1e-6
    )


def test_origin_roots_are_exact() -> None:
    p = Polynomial([0.0, 0.0, -2.0, 1.0])
    found = roots(p)
    assert found[:2] == [0j, 0j]
    assert found[2] == pytest.approx(2.0)


def test_complex_pair() -> None:
    found = _sorted(roots(Polynomial([1.0, 0.0, 1.0])))
    assert found[0] == pytest.approx(-1j, abs=1e-12)
    assert found[1] == pytest.approx(1j, abs=1e-12)


def test_constant_has_no_roots() -> None:
    assert roots(Polynomial([3.0])) == []


def test_zero_polynomial_raises() -> None:
    zero = Polynomial([0.0, 0.0])
    assert zero.is_zero
    assert zero.degree == -1
    with pytest.raises(ZeroPolynomial):
        roots(zero)
    with pytest.raises(ZeroPolynomial):
        zero.monic()


@pytest.mark.parametrize("degree", [2, 3, 5, 8, 12])
def test_roots_satisfy_polynomial(degree: int) -> None:
    rng = np.random.default_rng(degree)
    coeffs = rng.standard_normal(degree + 1)
    p = Polynomial(coeffs)
    found = roots(p)
    assert len(found) == degree
    for r in found:
        scale = float(np.sum(np.abs(coeffs) * np.abs(r) ** np.arange(degree + 1)))
        assert abs(p(r)) <= 1e-9 * scale


def test_roots_sorted_by_real_then_imag() -> None:
    found = roots(Polynomial.from_roots([3.0, -1.0, 0.5 + 2j, 0.5 - 2j]))
    reals = [r.real for r in found]
    assert reals == sorted(reals)


def test_degree_of_product_and_sum() -> None:
    p = Polynomial([1.0, 2.0, 3.0])
    q = Polynomial([-1.0, 1.0])
    assert (p * q).degree == p.degree + q.degree
    # top coefficients cancel
    assert (q + Polynomial([0.0, -1.0])).degree == 0
    assert (p - p).is_zero


def test_arithmetic_with_scalars() -> None:
    p = Polynomial([1.0, 1.0])
    assert (2 * p).allclose(Polynomial([2.0, 2.0]))
    assert (p + 1).allclose(Polynomial([2.0, 1.0]))
    assert (1 - p).allclose(Polynomial([0.0, -1.0]))


def test_evaluate_scalar_and_array() -> None:
    p = Polynomial([1.0, 0.0, 1.0])
    assert p(2.0) == 5.0
    np.testing.assert_allclose(p(np.array([0.0, 1j])), [1.0, 0.0])


def test_derivative_and_monic() -> None:
    p = Polynomial([4.0, 2.0, 2.0])
    assert p.derivative().allclose(Polynomial([2.0, 4.0]))
    assert p.monic().lead == 1.0
    assert Polynomial([7.0]).derivative().is_zero


def test_is_real() -> None:
    assert Polynomial([1.0, 2.0]).is_real()
    assert not Polynomial([1.0, 2j]).is_real()
