"""Loop construction from physical parameters."""

from collections.abc import Callable

import numpy as np
import pytest

from app.dobmodels import (
    DEFAULT_PARAMS,
    LOOP_FAMILIES,
    DobParams,
    alpha,
    closed_loop_maps_discrete,
    inner_loop_continuous,
    inner_loop_discrete,
    inner_loop_maps_continuous,
    inner_loop_maps_discrete,
    observer_factor,
    outer_loop_continuous,
    outer_loop_discrete,
    pd_factor,
    probed_observer_loop,
    zoh_double_integrator,
)
from app.lti.xfer import LoopSet
from app.utils.errors import ConfigError


@pytest.fixture
def params() -> DobParams:
    return DEFAULT_PARAMS


def test_alpha_from_plant_and_model() -> None:
    p = DEFAULT_PARAMS.model_copy(update={"J_mn": 0.02, "K_tau_n": 0.5})
    assert alpha(p) == pytest.approx(4.0)
    assert DEFAULT_PARAMS.alpha == 1.0


def test_with_alpha_rescales_nominal_inertia(params: DobParams) -> None:
    scaled = params.with_alpha(2.5)
    assert scaled.alpha == pytest.approx(2.5)
    assert scaled.J_m == params.J_m
    with pytest.raises(ConfigError):
        params.with_alpha(0.0)


def test_params_are_validated() -> None:
    with pytest.raises(ValueError):
        DEFAULT_PARAMS.with_sample_time(-1.0)
    with pytest.raises(ValueError):
        DobParams(J_m=0.0, J_mn=1, K_tau=1, K_tau_n=1, g_dob=1, T_s=1e-3)
    with pytest.raises(ValueError):
        DobParams.model_validate({**DEFAULT_PARAMS.model_dump(), "bogus": 1})


@pytest.mark.parametrize("g", [200.0, 1000.0, 3000.0])
def test_inner_discrete_closed_loop_pole(params: DobParams, g: float) -> None:
    loop = inner_loop_discrete(params.with_bandwidth(g))
    assert loop.sensitivity.poles() == [pytest.approx(1 - g * params.T_s)]
    assert loop.label == "inner-discrete"


def test_inner_continuous_closed_loop_pole(params: DobParams) -> None:
    loop = inner_loop_continuous(params.with_alpha(2.0).with_bandwidth(500.0))
    assert loop.sensitivity.poles() == [pytest.approx(-1000.0)]
    assert loop.sensitivity.zeros() == [0j]


def test_observer_off(params: DobParams) -> None:
    off = params.with_bandwidth(0.0)
    with pytest.raises(ConfigError, match="params.g_dob"):
        inner_loop_discrete(off)
    loop = inner_loop_discrete(off, allow_observer_off=True)
    assert loop.open_loop.num.is_zero
    assert loop.sensitivity(0.5) == pytest.approx(1.0)
    loop = inner_loop_continuous(off, allow_observer_off=True)
    assert loop.complementary(1j) == 0


def test_discrete_inner_loop_approaches_continuous(params: DobParams) -> None:
    p = params.with_bandwidth(1000.0).with_sample_time(1e-6)
    omega = np.array([10.0, 100.0, 1000.0])
    discrete = inner_loop_discrete(p).sensitivity.frequency_response(omega)
    continuous = inner_loop_continuous(p).sensitivity.frequency_response(omega)
    np.testing.assert_allclose(discrete.magnitude, continuous.magnitude, rtol=1e-3)


def test_discrete_inner_loop_gap_shrinks_with_sample_time(params: DobParams) -> None:
    omega = np.array([10.0, 100.0, 1000.0])
    p = params.with_bandwidth(1000.0)
    continuous = inner_loop_continuous(p).sensitivity.frequency_response(omega)
    gaps = []
    for T_s in (1e-3, 1e-4, 1e-5):
        loop = inner_loop_discrete(p.with_sample_time(T_s))
        discrete = loop.sensitivity.frequency_response(omega)
        gaps.append(float(np.max(np.abs(discrete.magnitude - continuous.magnitude))))
    assert gaps[1] < 0.2 * gaps[0]
    assert gaps[2] < 0.2 * gaps[1]


@pytest.mark.parametrize("builder", [inner_loop_continuous, inner_loop_discrete])
@pytest.mark.parametrize("c", [0.5, 2.0, 8.0])
def test_inner_loop_depends_on_alpha_g_only(
    params: DobParams, builder: Callable[[DobParams], LoopSet], c: float
) -> None:
    reference = builder(params.with_alpha(1.5).with_bandwidth(400.0))
    scaled = builder(params.with_alpha(1.5 * c).with_bandwidth(400.0 / c))
    for name in ("open_loop", "sensitivity", "complementary"):
        a, b = getattr(reference, name), getattr(scaled, name)
        assert a.den.monic().allclose(b.den.monic())
        assert (a.num * (1 / a.den.lead)).allclose(b.num * (1 / b.den.lead))


def test_observer_factor_pole_and_dc_gain(params: DobParams) -> None:
    factor = observer_factor(params)
    assert factor.poles() == [pytest.approx(0.5)]
    # alpha (1 + gT - 1) / (1 - 1 + alpha g T) = 1 at z = 1
    assert factor(1.0) == pytest.approx(1.0)


def test_observer_factor_tends_to_alpha(params: DobParams) -> None:
    p = params.with_alpha(1.7).with_bandwidth(0.0)
    assert observer_factor(p)(0.3) == pytest.approx(1.7)
    tiny = params.with_alpha(1.7).with_bandwidth(1e-6)
    assert observer_factor(tiny)(-0.4) == pytest.approx(1.7, rel=1e-6)


def test_zoh_double_integrator(params: DobParams) -> None:
    h = zoh_double_integrator(params.T_s)
    np.testing.assert_allclose(
        h.impulse_response(4), np.array([0.0, 0.5, 1.5, 2.5]) * params.T_s**2
    )


def test_pd_factor(params: DobParams) -> None:
    factor = pd_factor(params)
    assert factor(1.0) == pytest.approx(params.K_P)
    assert factor.poles() == [0j]
    proportional = pd_factor(params.model_copy(update={"K_D": 0.0}))
    assert proportional.den.degree == 0


def test_outer_open_loop_denominator(params: DobParams) -> None:
    loop = outer_loop_discrete(params)
    poles = loop.open_loop.poles()
    np.testing.assert_allclose(
        np.array(poles), np.array([0.0, 0.5, 1.0, 1.0]), atol=1e-6
    )
    assert loop.open_loop.relative_degree == 1


def test_outer_loop_needs_gains(params: DobParams) -> None:
    idle = params.model_copy(update={"K_P": 0.0, "K_D": 0.0})
    with pytest.raises(ConfigError):
        outer_loop_discrete(idle)
    with pytest.raises(ConfigError):
        outer_loop_continuous(idle)


def test_outer_loop_without_observer(params: DobParams) -> None:
    loop = outer_loop_discrete(params.with_bandwidth(0.0))
    assert len(loop.sensitivity.poles()) == 4


def test_continuous_outer_loop_characteristic(params: DobParams) -> None:
    # alpha = 1: (s + g)(s^2 + K_D s + K_P)
    g = 2000.0
    loop = outer_loop_continuous(params.with_bandwidth(g))
    closed = loop.sensitivity.den
    expected = np.polynomial.polynomial.polymul([g, 1.0], [5000.0, 25.0, 1.0])
    np.testing.assert_allclose(closed.coeffs.real, expected)


def test_probe_loop_has_one_unstable_open_loop_pole(params: DobParams) -> None:
    loop = probed_observer_loop(params.with_bandwidth(6000.0))
    assert loop.open_loop.unstable_poles() == [pytest.approx(-2.0)]
    assert loop.sensitivity.unstable_poles() == []
    np.testing.assert_allclose(
        sorted(abs(p) for p in loop.sensitivity.poles()),
        [np.sqrt(0.5), np.sqrt(0.5)],
    )


def test_closed_loop_maps(params: DobParams) -> None:
    maps = closed_loop_maps_discrete(params)
    assert maps.reference(1.0) == pytest.approx(1.0)
    assert maps.auxiliary is maps.reference
    # constant disturbances are rejected through both sensitivity factors
    assert maps.outer.sensitivity(1.0) == 0
    assert maps.inner.sensitivity(1.0) == 0
    # the inner-loop pole stays in the disturbance map uncancelled
    assert maps.disturbance.den.degree == (
        maps.outer.sensitivity.den.degree + maps.inner.sensitivity.den.degree
    )
    assert maps.noise.domain == maps.reference.domain


def test_inner_loop_maps(params: DobParams) -> None:
    continuous = inner_loop_maps_continuous(params)
    assert continuous.reference(0j) == pytest.approx(1.0)
    assert continuous.noise(1j) == pytest.approx(-continuous.inner.complementary(1j))

    discrete = inner_loop_maps_discrete(params)
    # velocity response to a unit acceleration is T_s / (z - 1) at low frequency
    z = np.exp(1j * 1e-3 * params.T_s)
    assert discrete.reference(z) == pytest.approx(params.T_s / (z - 1), rel=1e-3)
    # disturbance velocity settles to -1/(J_m alpha g)
    assert discrete.disturbance(1.0 + 1e-9) == pytest.approx(
        -1.0 / (params.J_m * params.g_dob), rel=1e-5
    )


def test_loop_families_cover_builders() -> None:
    assert set(LOOP_FAMILIES) == {
        "inner-continuous",
        "inner-discrete",
        "outer-continuous",
        "outer-discrete",
        "observer-probe",
    }
    for name, builder in LOOP_FAMILIES.items():
        assert builder(DEFAULT_PARAMS).label == name
