"""Rational transfer functions, loop closure and frequency grids."""

import math

import numpy as np
import pytest

from app.lti.xfer import (
    Domain,
    RationalTF,
    log_grid,
    parallel,
    sensitivity_from_open_loop,
    series,
)
from app.utils.errors import (
    DegenerateLoop,
    DomainMismatch,
    ImproperTF,
    PoleHit,
    ZeroPolynomial,
)

T_S = 5e-4
Z = Domain.discrete(T_S)
S = Domain.continuous()


def tf(num: list[float], den: list[float], domain: Domain = Z) -> RationalTF:
    return RationalTF.from_coeffs(num, den, domain)


def inner_loop(alpha_g_t: float) -> RationalTF:
    return tf([alpha_g_t], [-1.0, 1.0])


def test_domain_validation() -> None:
    with pytest.raises(ValueError):
        Domain(kind="z")
    with pytest.raises(ValueError):
        Domain(kind="s", sample_time=1e-3)
    assert Z.nyquist == pytest.approx(math.pi / T_S)
    assert str(S) == "s"


def test_zero_denominator_rejected() -> None:
    with pytest.raises(ZeroPolynomial):
        tf([1.0], [0.0])


def test_evaluate_and_pole_hit() -> None:
    h = tf([1.0], [-1.0, 1.0])
    assert h(2.0) == pytest.approx(1.0)
    with pytest.raises(PoleHit):
        h(1.0)


def test_sensitivity_plus_complementary_is_one() -> None:
    loop = sensitivity_from_open_loop(inner_loop(0.5))
    for point in (0.3 + 0.4j, -2.0, 1j, 5.0):
        total = loop.sensitivity(point) + loop.complementary(point)
        assert total == pytest.approx(1.0)


def test_closed_loop_pole_of_inner_loop() -> None:
    loop = sensitivity_from_open_loop(inner_loop(0.5))
    assert loop.sensitivity.poles() == [pytest.approx(0.5)]
    assert loop.sensitivity.zeros() == [pytest.approx(1.0)]


@pytest.mark.parametrize(
    ("alpha_g_t", "unstable"),
    [
        (-1.0, True),
        (-0.1, True),
        (0.1, False),
        (1.0, False),
        (1.9, False),
        (2.1, True),
        (3.0, True),
    ],
)
def test_unstable_poles_follow_alpha_g_t(alpha_g_t: float, unstable: bool) -> None:
    loop = sensitivity_from_open_loop(inner_loop(alpha_g_t))
    assert bool(loop.sensitivity.unstable_poles()) is unstable


def test_marginal_pole_is_not_unstable() -> None:
    loop = sensitivity_from_open_loop(inner_loop(2.0))
    assert loop.sensitivity.unstable_poles() == []
    assert loop.sensitivity.marginal_poles() == [pytest.approx(-1.0)]


def test_degenerate_loop() -> None:
    with pytest.raises(DegenerateLoop):
        sensitivity_from_open_loop(RationalTF.constant(-1.0, Z))


def test_frequency_response_conjugate_symmetry() -> None:
    h = sensitivity_from_open_loop(inner_loop(0.5)).sensitivity
    omega = np.array([10.0, 100.0, 1000.0])
    response = h.frequency_response(omega)
    for w, value in zip(omega, response.values):
        mirrored = h(np.exp(-1j * w * T_S))
        assert value == pytest.approx(np.conj(mirrored))


def test_frequency_response_grid_checks() -> None:
    h = inner_loop(0.5)
    with pytest.raises(ValueError):
        h.frequency_response([10.0, 5.0])
    with pytest.raises(ValueError):
        h.frequency_response([10.0, 2 * Z.nyquist])
    with pytest.raises(ValueError):
        h.frequency_response([0.0, 10.0])


def test_frequency_response_flags_pole_hits() -> None:
    integrator = tf([1.0], [0.0, 1.0], S)
    response = integrator.frequency_response([0.0, 1.0])
    assert response.pole_hits.tolist() == [True, False]
    assert np.isnan(response.values[0])
    assert response.magnitude[1] == pytest.approx(1.0)


def test_phase_is_unwrapped() -> None:
    lag = tf([1.0], [1.0, 3.0, 3.0, 1.0], S)  # 1/(s+1)^3
    response = lag.frequency_response(np.geomspace(0.01, 100.0, 400))
    assert response.phase_deg[-1] == pytest.approx(-270.0, abs=2.0)


def test_limits_at_infinity() -> None:
    biproper = tf([1.0, 2.0], [3.0, 1.0], S)
    assert biproper.limit_L_at_infinity() == pytest.approx(2.0)
    with pytest.raises(ImproperTF):
        biproper.limit_sL_at_infinity()

    first_order = tf([5.0], [1.0, 1.0], S)
    assert first_order.limit_L_at_infinity() == 0
    assert first_order.limit_sL_at_infinity() == pytest.approx(5.0)
    assert tf([1.0], [0.0, 0.0, 1.0], S).limit_sL_at_infinity() == 0.0

    with pytest.raises(ImproperTF):
        tf([0.0, 0.0, 1.0], [1.0, 1.0], S).limit_L_at_infinity()


def test_series_and_parallel() -> None:
    a = tf([1.0], [-0.5, 1.0])
    b = tf([2.0], [0.0, 1.0])
    point = 0.7 + 0.2j
    assert series(a, b)(point) == pytest.approx(a(point) * b(point))
    assert parallel(a, b)(point) == pytest.approx(a(point) + b(point))
    assert (a * b)(point) == pytest.approx(a(point) * b(point))
    assert (-a)(point) == pytest.approx(-a(point))


def test_series_keeps_common_factors() -> None:
    a = tf([-0.5, 1.0], [-0.2, 1.0])
    b = tf([1.0], [-0.5, 1.0])
    product = series(a, b)
    assert product.den.degree == 2
    reduced = product.minreal()
    assert reduced.poles() == [pytest.approx(0.2)]
    assert reduced.zeros() == []


def test_minreal_keeps_gain() -> None:
    h = RationalTF.from_coeffs(
        [0.1, -0.7, 1.0], [0.45, -1.4, 1.0], Z
    )  # (z-0.5)(z-0.2) / ((z-0.5)(z-0.9))
    reduced = h.minreal()
    assert reduced.zeros() == [pytest.approx(0.2)]
    assert reduced.poles() == [pytest.approx(0.9)]
    assert reduced(0.3) == pytest.approx(h(0.3))


def test_domain_mismatch() -> None:
    with pytest.raises(DomainMismatch):
        series(tf([1.0], [1.0, 1.0], S), inner_loop(0.5))
    with pytest.raises(DomainMismatch):
        parallel(inner_loop(0.5), tf([1.0], [-1.0, 1.0], Domain.discrete(1e-3)))


def test_impulse_and_step_response() -> None:
    h = tf([0.5], [-0.5, 1.0])  # 0.5 / (z - 0.5)
    np.testing.assert_allclose(h.impulse_response(4), [0.0, 0.5, 0.25, 0.125])
    np.testing.assert_allclose(h.step_response(3), [0.0, 0.5, 0.75])
    with pytest.raises(ValueError):
        tf([1.0], [1.0, 1.0], S).step_response(3)


def test_log_grid() -> None:
    grid = log_grid(Z, points=50)
    assert grid.size == 50
    assert grid[-1] == pytest.approx(Z.nyquist)
    assert np.all(np.diff(grid) > 0)
    assert log_grid(Z, points=0).size == 0
    assert log_grid(S, points=1).tolist() == [pytest.approx(1e5)]
    with pytest.raises(ValueError):
        log_grid(S, points=10, omega_min=10.0, omega_max=1.0)
