"""Loop objects of the DOB-based position controller, built from physical parameters.

Every transfer function the analyses use is assembled here from its printed
factors, so the other modules never write a coefficient list of their own.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field

from app.lti.xfer import (
    Domain,
    LoopSet,
    RationalTF,
    parallel,
    sensitivity_from_open_loop,
    series,
)
from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_PARAMS",
    "LOOP_FAMILIES",
    "ClosedLoopMaps",
    "DobParams",
    "InnerLoopMaps",
    "LoopSet",
    "alpha",
    "closed_loop_maps_discrete",
    "inner_loop_continuous",
    "inner_loop_discrete",
    "inner_loop_maps_continuous",
    "inner_loop_maps_discrete",
    "observer_factor",
    "outer_loop_continuous",
    "outer_loop_discrete",
    "pd_factor",
    "probed_observer_loop",
    "zoh_double_integrator",
]


class DobParams(BaseModel):
    """Physical and controller scalars of one DOB configuration.

    ``alpha`` is always derived from the four plant/model parameters.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    J_m: float = Field(gt=0, description="motor inertia [kg m^2]")
    J_mn: float = Field(gt=0, description="nominal inertia [kg m^2]")
    K_tau: float = Field(gt=0, description="torque coefficient [N m/A]")
    K_tau_n: float = Field(gt=0, description="nominal torque coefficient [N m/A]")
    g_dob: float = Field(ge=0, description="observer bandwidth [rad/s]")
    T_s: float = Field(gt=0, description="sample time [s]")
    K_P: float = Field(default=0.0, ge=0)
    K_D: float = Field(default=0.0, ge=0)

    @property
    def alpha(self) -> float:
        return (self.J_mn * self.K_tau) / (self.J_m * self.K_tau_n)

    def _replace(self, **changes: float) -> DobParams:
        return DobParams.model_validate({**self.model_dump(), **changes})

    def with_bandwidth(self, g_dob: float) -> DobParams:
        return self._replace(g_dob=g_dob)

    def with_sample_time(self, T_s: float) -> DobParams:
        return self._replace(T_s=T_s)

    def with_alpha(self, value: float) -> DobParams:
        """Same plant with the nominal inertia rescaled so that alpha == ``value``."""
        if value <= 0:
            raise ConfigError("alpha must be > 0", key="alpha")
        return self._replace(J_mn=value * self.J_m * self.K_tau_n / self.K_tau)


DEFAULT_PARAMS = DobParams(
    J_m=0.01,
    J_mn=0.01,
    K_tau=1.0,
    K_tau_n=1.0,
    g_dob=1000.0,
    T_s=5e-4,
    K_P=5000.0,
    K_D=25.0,
)


def alpha(params: DobParams) -> float:
    """(J_mn K_tau) / (J_m K_tau_n)."""
    return params.alpha


def _require_bandwidth(params: DobParams) -> None:
    if params.g_dob <= 0:
        raise ConfigError("observer bandwidth must be > 0", key="params.g_dob")


def _require_gains(params: DobParams) -> None:
    if params.K_P == 0 and params.K_D == 0:
        raise ConfigError("K_P and K_D cannot both be zero", key="params.K_P")


def _tf(num: list[float], den: list[float], domain: Domain) -> RationalTF:
    return RationalTF.from_coeffs(num, den, domain)


# Inner loop


def inner_loop_continuous(
    params: DobParams, allow_observer_off: bool = False
) -> LoopSet:
    """L = alpha g / s; S = s/(s + alpha g), T = alpha g/(s + alpha g)."""
    domain = Domain.continuous()
    if params.g_dob == 0 and allow_observer_off:
        return sensitivity_from_open_loop(
            RationalTF.constant(0.0, domain), label="inner-continuous"
        )
    _require_bandwidth(params)
    open_loop = _tf([params.alpha * params.g_dob], [0.0, 1.0], domain)
    return sensitivity_from_open_loop(open_loop, label="inner-continuous")


def inner_loop_discrete(
    params: DobParams, allow_observer_off: bool = False
) -> LoopSet:
    """L = alpha g T_s / (z - 1); the closed-loop pole sits at 1 - alpha g T_s."""
    domain = Domain.discrete(params.T_s)
    if params.g_dob == 0 and allow_observer_off:
        return sensitivity_from_open_loop(
            RationalTF.constant(0.0, domain), label="inner-discrete"
        )
    _require_bandwidth(params)
    open_loop = _tf([params.alpha * params.g_dob * params.T_s], [-1.0, 1.0], domain)
    return sensitivity_from_open_loop(open_loop, label="inner-discrete")


# Factors of the discrete outer loop


def pd_factor(params: DobParams) -> RationalTF:
    """K_P + K_D (z - 1)/(T_s z); a bare constant when K_D == 0."""
    domain = Domain.discrete(params.T_s)
    proportional = RationalTF.constant(params.K_P, domain)
    if params.K_D == 0:
        return proportional
    derivative = _tf([-params.K_D, params.K_D], [0.0, params.T_s], domain)
    return parallel(proportional, derivative)


def observer_factor(params: DobParams) -> RationalTF:
    """Acceleration-reference path through the observer.

    alpha((1 + g T_s) z - 1) / (z - (1 - alpha g T_s)); tends to alpha as g -> 0.
    """
    a, g, t = params.alpha, params.g_dob, params.T_s
    return _tf(
        [-a, a * (1.0 + g * t)], [-(1.0 - a * g * t), 1.0], Domain.discrete(t)
    )


def zoh_double_integrator(T_s: float) -> RationalTF:
    """Exact zero-order-hold sampling of 1/s^2: (T_s^2/2)(z + 1)/(z - 1)^2."""
    half = T_s**2 / 2.0
    return _tf([half, half], [1.0, -2.0, 1.0], Domain.discrete(T_s))


def outer_loop_discrete(params: DobParams) -> LoopSet:
    """L_PC = PD * observer path * ZoH plant, closed into S_PC and T_PC."""
    _require_gains(params)
    open_loop = series(
        pd_factor(params), observer_factor(params), zoh_double_integrator(params.T_s)
    )
    return sensitivity_from_open_loop(open_loop, label="outer-discrete")


def outer_loop_continuous(params: DobParams) -> LoopSet:
    """(K_P + K_D s) * alpha (s + g)/(s + alpha g) * 1/s^2."""
    _require_gains(params)
    domain = Domain.continuous()
    a, g = params.alpha, params.g_dob
    open_loop = series(
        _tf([params.K_P, params.K_D], [1.0], domain),
        _tf([a * g, a], [a * g, 1.0], domain),
        _tf([1.0], [0.0, 0.0, 1.0], domain),
    )
    return sensitivity_from_open_loop(open_loop, label="outer-continuous")


def probed_observer_loop(params: DobParams, gain: float = -0.5) -> LoopSet:
    """The observer path closed through ``gain``/z.

    Its only unstable open-loop pole is the observer pole 1 - alpha g T_s, so
    with alpha g T_s > 2 this is a stable loop around an unstable factor.
    """
    domain = Domain.discrete(params.T_s)
    open_loop = series(observer_factor(params), _tf([gain], [0.0, 1.0], domain))
    return sensitivity_from_open_loop(open_loop, label="observer-probe")


# Exogenous-input maps


@dataclass(frozen=True)
class ClosedLoopMaps:
    """Position responses of the outer loop to each exogenous input."""

    reference: RationalTF
    disturbance: RationalTF
    noise: RationalTF
    auxiliary: RationalTF
    outer: LoopSet
    inner: LoopSet


@dataclass(frozen=True)
class InnerLoopMaps:
    """Velocity responses of the inner loop to acceleration reference,
    disturbance torque and velocity noise."""

    reference: RationalTF
    disturbance: RationalTF
    noise: RationalTF
    inner: LoopSet


def closed_loop_maps_discrete(params: DobParams) -> ClosedLoopMaps:
    """Reference, disturbance, noise and auxiliary-input maps of the outer loop.

    The disturbance map (1/J_m) S_DOB S_PC and the Tustin-form noise path are
    kept in exactly that factored form.
    """
    outer = outer_loop_discrete(params)
    inner = inner_loop_discrete(params)
    domain = outer.domain
    tustin = _tf(
        [params.T_s / 2.0, params.T_s / 2.0], [-1.0, 1.0], domain
    )
    return ClosedLoopMaps(
        reference=outer.complementary,
        disturbance=series(
            RationalTF.constant(1.0 / params.J_m, domain),
            inner.sensitivity,
            outer.sensitivity,
        ),
        noise=series(inner.complementary, outer.complementary, tustin),
        auxiliary=outer.complementary,
        outer=outer,
        inner=inner,
    )


def inner_loop_maps_continuous(params: DobParams) -> InnerLoopMaps:
    inner = inner_loop_continuous(params)
    domain = inner.domain
    a, g = params.alpha, params.g_dob
    return InnerLoopMaps(
        reference=_tf([a * g, a], [a * g, 1.0], domain),
        disturbance=series(
            inner.sensitivity, _tf([-1.0 / params.J_m], [0.0, 1.0], domain)
        ),
        noise=-inner.complementary,
        inner=inner,
    )


def inner_loop_maps_discrete(params: DobParams) -> InnerLoopMaps:
    inner = inner_loop_discrete(params)
    domain = inner.domain
    integrator = _tf([params.T_s], [-1.0, 1.0], domain)
    return InnerLoopMaps(
        reference=series(observer_factor(params), integrator),
        disturbance=series(
            RationalTF.constant(-1.0 / params.J_m, domain),
            inner.sensitivity,
            integrator,
        ),
        noise=-inner.complementary,
        inner=inner,
    )


LoopBuilder = Callable[[DobParams], LoopSet]

LOOP_FAMILIES: dict[str, LoopBuilder] = {
    "inner-continuous": inner_loop_continuous,
    "inner-discrete": inner_loop_discrete,
    "outer-continuous": outer_loop_continuous,
    "outer-discrete": outer_loop_discrete,
    "observer-probe": probed_observer_loop,
}
