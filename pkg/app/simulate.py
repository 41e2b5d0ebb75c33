"""Fixed-step simulation of the digital DOB-based position controller.

Per sample: the PD turns the position error into an acceleration reference,
the observer adds its disturbance estimate to the torque command, and the
double-integrator plant is advanced over one sample under a zero-order hold.
The recorded sample k holds the state at t_k = k T_s, before that sample's
update.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import ClassVar, Literal

import numpy as np
from opentelemetry import trace
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.dobmodels import DobParams

logger = logging.getLogger(__name__)
tracer = trace.get_tracer(__name__)

ObserverScheme = Literal["implicit", "explicit"]


class SignalSpec(BaseModel):
    """Reference or disturbance signal: none, step, ramp or sinusoid.

    ``frequency`` is in rad/s; ``amplitude`` is a slope for ramps.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["none", "step", "ramp", "sinusoid"] = "none"
    amplitude: float = 0.0
    onset: float = Field(default=0.0, ge=0)
    frequency: float = Field(default=0.0, ge=0)

    def value(self, t: float) -> float:
        if self.kind == "none" or t < self.onset:
            return 0.0
        if self.kind == "step":
            return self.amplitude
        if self.kind == "ramp":
            return self.amplitude * (t - self.onset)
        return self.amplitude * math.sin(self.frequency * (t - self.onset))


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    params: DobParams
    duration: float = Field(gt=0)
    reference: SignalSpec = SignalSpec(kind="step", amplitude=1.0)
    disturbance: SignalSpec = SignalSpec()
    noise_std: float = Field(default=0.0, ge=0)
    noise_seed: int = 0
    divergence_bound: float | None = Field(default=None, gt=0)
    observer_scheme: ObserverScheme = "implicit"
    encoder_noise_std: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _check_onsets(self) -> Scenario:
        for name in ("reference", "disturbance"):
            if getattr(self, name).onset > self.duration:
                raise ValueError(f"{name} onset lies beyond the scenario duration")
        return self

    @property
    def bound(self) -> float:
        """|q| cut-off: the explicit bound, else 1e3 * max(1, |reference amplitude|)."""
        if self.divergence_bound is not None:
            return self.divergence_bound
        return 1e3 * max(1.0, abs(self.reference.amplitude))

    @property
    def samples(self) -> int:
        return int(math.floor(self.duration / self.params.T_s + 1e-9)) + 1


@dataclass(frozen=True)
class SimTrace:
    time: np.ndarray
    q_ref: np.ndarray
    q: np.ndarray
    q_dot: np.ndarray
    tau_cmd: np.ndarray
    tau_dis_hat: np.ndarray
    tau_d: np.ndarray
    diverged_at: int | None = None

    COLUMNS: ClassVar[tuple[str, ...]] = (
        "time",
        "q_ref",
        "q",
        "q_dot",
        "tau_cmd",
        "tau_dis_hat",
        "tau_d",
    )

    def __len__(self) -> int:
        return int(self.time.size)

    @property
    def tracking_error(self) -> np.ndarray:
        return self.q_ref - self.q

    def columns(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in self.COLUMNS]


def step_plant(
    state: tuple[float, float], torque_net: float, J_m: float, T_s: float
) -> tuple[float, float]:
    """Exact zero-order-hold update of the double integrator q'' = torque/J_m."""
    q, q_dot = state
    accel = torque_net / J_m
    return q + q_dot * T_s + accel * T_s * T_s / 2.0, q_dot + accel * T_s


def step_pd(
    e_prev: float, q_ref: float, q_measured: float, params: DobParams
) -> tuple[float, float]:
    """Backward-difference PD on e = q_ref - q_measured; returns (e, accel_des)."""
    e = q_ref - q_measured
    return e, params.K_P * e + params.K_D * (e - e_prev) / params.T_s


def step_dob(
    state: float,
    q_dot_measured: float,
    tau_cmd: float,
    params: DobParams,
    scheme: ObserverScheme = "implicit",
) -> tuple[float, float]:
    """Advance the observer low-pass; returns (new state, disturbance estimate).

    The filter input is tau_cmd + g J_mn q_dot and the estimate is the filter
    output minus g J_mn q_dot. ``explicit`` integrates the low-pass with forward
    Euler and reads the estimate from the old state; ``implicit`` uses backward
    Euler and reads the new state. Both close the loop L = alpha g T_s/(z - 1).
    """
    gT = params.g_dob * params.T_s
    velocity_term = params.g_dob * params.J_mn * q_dot_measured
    drive = tau_cmd + velocity_term
    if scheme == "explicit":
        return state + gT * (drive - state), state - velocity_term
    new_state = (state + gT * drive) / (1.0 + gT)
    return new_state, new_state - velocity_term


def observer_command(
    state: float,
    accel_des: float,
    q_dot_measured: float,
    params: DobParams,
    scheme: ObserverScheme = "implicit",
) -> tuple[float, float, float]:
    """Compensated torque command J_mn accel_des + estimate.

    For the implicit scheme the estimate depends on the command itself; the
    loop is solved in closed form. Returns (tau_cmd, tau_dis_hat, new state),
    consistent with :func:`step_dob` applied to that command.
    """
    gT = params.g_dob * params.T_s
    velocity_term = params.g_dob * params.J_mn * q_dot_measured
    new_state = state + gT * params.J_mn * accel_des
    if scheme == "explicit":
        estimate = state - velocity_term
    else:
        estimate = new_state - velocity_term
    return params.J_mn * accel_des + estimate, estimate, new_state


def run(scenario: Scenario) -> SimTrace:
    """Simulate ``scenario``; divergence truncates the trace instead of raising."""
    params = scenario.params
    T_s = params.T_s
    n = scenario.samples
    gain_ratio = params.K_tau / params.K_tau_n
    bound = scenario.bound

    rng = np.random.Generator(np.random.PCG64(scenario.noise_seed))
    velocity_noise = rng.standard_normal(n) * scenario.noise_std
    encoder_noise = rng.standard_normal(n) * scenario.encoder_noise_std

    record = np.zeros((7, n))
    q = q_dot = observer_state = e_prev = 0.0
    diverged_at = None
    with tracer.start_as_current_span("simulate.run") as span:
        for k in range(n):
            t = k * T_s
            q_ref = scenario.reference.value(t)
            tau_d = scenario.disturbance.value(t)
            q_dot_measured = q_dot + velocity_noise[k]
            e_prev, accel_des = step_pd(e_prev, q_ref, q + encoder_noise[k], params)
            tau_cmd, estimate, next_state = observer_command(
                observer_state,
                accel_des,
                q_dot_measured,
                params,
                scenario.observer_scheme,
            )
            record[:, k] = (t, q_ref, q, q_dot, tau_cmd, estimate, tau_d)
            if not (math.isfinite(q) and math.isfinite(q_dot)) or abs(q) > bound:
                diverged_at = k
                break
            q, q_dot = step_plant(
                (q, q_dot), gain_ratio * tau_cmd - tau_d, params.J_m, T_s
            )
            observer_state = next_state

        kept = n if diverged_at is None else diverged_at + 1
        span.set_attribute("samples", kept)
        span.set_attribute("diverged_at", -1 if diverged_at is None else diverged_at)
    if diverged_at is not None:
        logger.warning(
            f"simulation diverged at sample {diverged_at} "
            f"(t={diverged_at * T_s:.4g} s, g_dob={params.g_dob:g})"
        )
    return SimTrace(*record[:, :kept], diverged_at=diverged_at)


def run_many(
    scenarios: Sequence[Scenario], max_workers: int | None = None
) -> list[SimTrace]:
    """Independent runs on a thread pool; results follow the input order."""
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run, scenarios))


@dataclass(frozen=True)
class DivergenceScan:
    g_values: list[float]
    diverged_at: list[int | None]

    @property
    def first_divergent(self) -> float | None:
        return next(
            (g for g, d in zip(self.g_values, self.diverged_at) if d is not None), None
        )


def divergence_scan(
    scenario: Scenario, g_values: Sequence[float], max_workers: int | None = None
) -> DivergenceScan:
    """Re-run ``scenario`` for each observer bandwidth."""
    variants = [
        scenario.model_copy(update={"params": scenario.params.with_bandwidth(g)})
        for g in g_values
    ]
    traces = run_many(variants, max_workers=max_workers)
    return DivergenceScan(list(g_values), [t.diverged_at for t in traces])
