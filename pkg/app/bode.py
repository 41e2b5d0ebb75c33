"""Generalized Bode sensitivity integrals and waterbed diagnostics.

The left-hand side is integrated numerically from ln|S| in factored form,
ln|k| + sum ln|x - zero| - sum ln|x - pole|, so zeros of S on the stability
boundary show up as integrable log singularities instead of cancellation
noise. The right-hand side comes from the open- and closed-loop poles and
the high-frequency limit of L.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Callable, Sequence

import numpy as np
from opentelemetry import trace
from pydantic import BaseModel, ConfigDict
from scipy import integrate, optimize

from app.dobmodels import DobParams, LoopSet
from app.lti.xfer import RationalTF, classify_roots
from app.utils.errors import (
    DomainMismatch,
    MarginalPole,
    SingularityAtGridEdge,
    TailDivergence,
)

logger = logging.getLogger(__name__)
tracer = trace.get_tracer(__name__)

# a zero of S closer than this to the boundary is a log singularity of ln|S|
BOUNDARY_ZERO_TOL = 1e-6
# angles this close to 0 or pi are taken to be exactly there
ANGLE_SNAP = 1e-7
HELPER_POLE_RADIUS = 0.9
PANEL_RATIO = 10.0
PANEL_TOL = 1e-8
MAX_PANELS = 60
SCAN_POINTS = 512
QUAD_LIMIT = 100
TAIL_RTOL = 1e-4
MAX_TAIL_GROWTH = 8
PEAK_POINTS = 4096


class BodeReport(BaseModel):
    """Both sides of one sensitivity integral plus waterbed diagnostics.

    Discrete integrals are over theta = omega T_s in [-pi, pi]; continuous ones
    over omega in [0, inf). ``peak_frequency`` is always in rad/s.
    """

    model_config = ConfigDict(frozen=True)

    label: str = ""
    domain: str
    lhs_numeric: float
    rhs_analytic: float
    gap: float
    unstable_pole_term: float
    closed_loop_term: float
    limit_term: float
    peak_sensitivity: float
    peak_frequency: float
    attenuation_area: float
    amplification_area: float
    tail_estimate: float = 0.0
    omega_cut: float | None = None


class WaterbedSweep(BaseModel):
    model_config = ConfigDict(frozen=True)

    g_values: list[float]
    reports: list[BodeReport]
    peak_increasing: bool | None
    max_abs_lhs: float


class _LogMagnitude:
    """ln|S| on the boundary, evaluated from the factored form of S."""

    def __init__(self, tf: RationalTF) -> None:
        self.zeros = np.asarray(tf.zeros(), dtype=complex)
        self.poles = np.asarray(tf.poles(), dtype=complex)
        self.log_gain = math.log(abs(tf.num.lead / tf.den.lead))
        self.discrete = tf.domain.is_discrete

    def __call__(self, x: float | np.ndarray) -> float | np.ndarray:
        arg = np.asarray(x, dtype=float)
        point = np.exp(1j * arg) if self.discrete else 1j * arg
        point = np.asarray(point)[..., None]
        value = (
            self.log_gain
            + np.sum(np.log(np.abs(point - self.zeros)), axis=-1)
            - np.sum(np.log(np.abs(point - self.poles)), axis=-1)
        )
        if np.ndim(value) == 0:
            return float(value)
        return value


def _quad(f: Callable[[float], float], a: float, b: float, refinement: int) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.quad(
            f, a, b, limit=QUAD_LIMIT * refinement, epsabs=1e-13, epsrel=1e-11
        )
    return value


def _toward_singularity(
    f: Callable[[float], float], a: float, b: float, at_left: bool, refinement: int
) -> float:
    """Integrate over [a, b] with geometric panels shrinking onto one end."""
    width = b - a
    end = a if at_left else b
    total = 0.0
    outer = b if at_left else a
    tol = PANEL_TOL / refinement
    for k in range(1, MAX_PANELS + 1):
        offset = width * PANEL_RATIO**-k
        inner = end + offset if at_left else end - offset
        if inner == end:
            break
        lo, hi = (inner, outer) if at_left else (outer, inner)
        value = _quad(f, lo, hi, refinement)
        total += value
        if abs(value) < tol:
            break
        outer = inner
    return total


def _integrate_piece(
    f: Callable[[float], float],
    a: float,
    b: float,
    singular: set[float],
    refinement: int,
) -> float:
    left, right = a in singular, b in singular
    if left and right:
        mid = 0.5 * (a + b)
        return _toward_singularity(f, a, mid, True, refinement) + _toward_singularity(
            f, mid, b, False, refinement
        )
    if left or right:
        return _toward_singularity(f, a, b, left, refinement)
    return _quad(f, a, b, refinement)


def _crossovers(f: _LogMagnitude, a: float, b: float, refinement: int) -> list[float]:
    """Points in (a, b) where ln|S| changes sign, refined with brentq."""
    unit = np.concatenate(
        [
            np.linspace(0.0, 1.0, SCAN_POINTS * refinement + 1)[1:-1],
            np.geomspace(1e-9, 0.5, 64),
            1.0 - np.geomspace(1e-9, 0.5, 64),
        ]
    )
    x = np.unique(a + (b - a) * unit)
    x = x[(x > a) & (x < b)]
    if x.size < 2:
        return []
    y = np.asarray(f(x))
    roots = []
    for i in np.flatnonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0):
        roots.append(optimize.brentq(f, x[i], x[i + 1], xtol=1e-15, rtol=1e-14))
    return roots


def _signed_areas(
    f: _LogMagnitude, edges: Sequence[float], singular: set[float], refinement: int
) -> tuple[float, float]:
    """(attenuation, amplification) over consecutive ``edges``."""
    attenuation = amplification = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        cuts = [a, *_crossovers(f, a, b, refinement), b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            value = _integrate_piece(f, lo, hi, singular, refinement)
            if value < 0:
                attenuation += value
            else:
                amplification += value
    return attenuation, amplification


def _check_pair(S: RationalTF, L: RationalTF, discrete: bool) -> None:
    if S.domain != L.domain:
        raise DomainMismatch(f"S is over {S.domain} but L is over {L.domain}")
    if S.domain.is_discrete != discrete:
        kind = "discrete" if discrete else "continuous"
        raise DomainMismatch(f"expected a {kind} loop, got {S.domain}")


def _closed_loop_unstable(S: RationalTF) -> list[complex]:
    classes = classify_roots(S.poles(), S.domain)
    if classes.marginal:
        raise MarginalPole(
            f"closed loop has pole(s) on the stability boundary: {classes.marginal}"
        )
    return classes.unstable


def _peak(S: RationalTF, grid: np.ndarray) -> tuple[float, float]:
    response = S.frequency_response(grid)
    magnitude = np.where(response.pole_hits, np.nan, response.magnitude)
    i = int(np.nanargmax(magnitude))
    return float(magnitude[i]), float(grid[i])


def discrete_bode_integral(
    S: RationalTF,
    L: RationalTF,
    refinement: int = 1,
    full_interval: bool = False,
    label: str = "",
) -> BodeReport:
    """Integral of ln|S(e^{j theta})| over [-pi, pi] against its pole formula.

    rhs = 2 pi (sum ln|p_u(L)| - sum ln|lambda_u| - ln|1 + L(inf)|), where the
    lambda_u are unstable closed-loop poles (none for a stable loop).

    Raises:
        MarginalPole: the closed loop has a pole on the unit circle.
        SingularityAtGridEdge: S has a zero at z = -1.
    """
    _check_pair(S, L, discrete=True)
    with tracer.start_as_current_span("bode.discrete_integral") as span:
        closed_unstable = _closed_loop_unstable(S)
        full_interval = full_interval or not S.is_real()

        singular: set[float] = set()
        helpers: set[float] = set()
        for zero in S.zeros():
            if abs(abs(zero) - 1.0) > BOUNDARY_ZERO_TOL:
                continue
            angle = abs(math.atan2(zero.imag, zero.real))
            if angle > math.pi - ANGLE_SNAP:
                raise SingularityAtGridEdge(f"S has a unit-circle zero at {zero}")
            angle = 0.0 if angle < ANGLE_SNAP else angle
            singular.add(angle)
            if full_interval:
                singular.add(-angle)
        for pole in S.poles():
            if abs(pole) > HELPER_POLE_RADIUS:
                angle = abs(math.atan2(pole.imag, pole.real))
                if ANGLE_SNAP < angle < math.pi - ANGLE_SNAP:
                    helpers.update({angle, -angle} if full_interval else {angle})

        lower = -math.pi if full_interval else 0.0
        edges = sorted({lower, math.pi} | singular | helpers)
        edges = [e for e in edges if lower <= e <= math.pi]
        f = _LogMagnitude(S)
        attenuation, amplification = _signed_areas(f, edges, singular, refinement)
        if not full_interval:
            attenuation, amplification = 2 * attenuation, 2 * amplification
        lhs = attenuation + amplification

        pole_term = 2 * math.pi * sum(math.log(abs(p)) for p in L.unstable_poles())
        closed_term = -2 * math.pi * sum(math.log(abs(p)) for p in closed_unstable)
        limit_term = -2 * math.pi * math.log(abs(1.0 + L.limit_L_at_infinity()))
        rhs = pole_term + closed_term + limit_term

        T_s = S.domain.sample_time
        theta = np.linspace(math.pi / PEAK_POINTS, math.pi, PEAK_POINTS)
        peak, peak_omega = _peak(S, theta / T_s)

        span.set_attribute("lhs", lhs)
        span.set_attribute("rhs", rhs)
        span.set_attribute("gap", abs(lhs - rhs))
    logger.debug(f"discrete Bode integral {label}: lhs={lhs:.6g} rhs={rhs:.6g}")
    return BodeReport(
        label=label,
        domain="z",
        lhs_numeric=lhs,
        rhs_analytic=rhs,
        gap=abs(lhs - rhs),
        unstable_pole_term=pole_term,
        closed_loop_term=closed_term,
        limit_term=limit_term,
        peak_sensitivity=peak,
        peak_frequency=peak_omega,
        attenuation_area=attenuation,
        amplification_area=amplification,
    )


def _tail_coefficient(S: RationalTF) -> float:
    """c2 in ln|S(j omega)| ~ ln|k| - c2/omega^2 at high frequency.

    Raises:
        TailDivergence: ln|S| tends to a nonzero constant or decays like 1/omega.
    """
    k = abs(S.num.lead / S.den.lead)
    if abs(math.log(k)) > 1e-12 or S.relative_degree != 0:
        raise TailDivergence(
            "ln|S| does not vanish at infinity (|1 + L(inf)| != 1)"
        )
    zeros = np.asarray(S.zeros(), dtype=complex)
    poles = np.asarray(S.poles(), dtype=complex)
    both = np.concatenate([zeros, poles])
    scale = max(1.0, float(np.max(np.abs(both)))) if both.size else 1.0
    first_order = float(np.sum(poles.imag) - np.sum(zeros.imag))
    if abs(first_order) > 1e-9 * scale:
        raise TailDivergence("ln|S| decays like 1/omega; the integral diverges")
    return 0.5 * float(np.sum((poles**2).real) - np.sum((zeros**2).real))


def continuous_bode_integral(
    S: RationalTF, L: RationalTF, refinement: int = 1, label: str = ""
) -> BodeReport:
    """Integral of ln|S(j omega)| over [0, inf) against its pole formula.

    The range up to ``omega_cut`` is integrated in decade panels; beyond it the
    asymptote -c2/omega^2 is integrated in closed form, and ``omega_cut`` grows
    until that tail is below 1e-4 of the total.

    rhs = pi sum Re(p_u(L)) - pi sum Re(lambda_u) - (pi/2) lim s L(s).
    """
    _check_pair(S, L, discrete=False)
    with tracer.start_as_current_span("bode.continuous_integral") as span:
        L.limit_L_at_infinity()  # ImproperTF before anything else
        closed_unstable = _closed_loop_unstable(S)
        c2 = _tail_coefficient(S)
        limit = L.limit_sL_at_infinity()

        roots = [r for r in (*S.zeros(), *S.poles()) if abs(r) > 0]
        corner = max((abs(r) for r in roots), default=1.0)
        omega_cut = 1e4 * corner

        singular: set[float] = set()
        for zero in S.zeros():
            if abs(zero.real) <= BOUNDARY_ZERO_TOL * max(1.0, abs(zero)):
                singular.add(abs(zero.imag) if abs(zero.imag) > ANGLE_SNAP else 0.0)
        helpers = {abs(p) for p in S.poles() if abs(p) > 0}
        decades = {corner * 10.0**k for k in range(-3, 5)}
        edges = sorted(
            e for e in {0.0} | decades | singular | helpers if 0.0 <= e <= omega_cut
        )
        f = _LogMagnitude(S)
        attenuation, amplification = _signed_areas(f, edges, singular, refinement)

        tail = -c2 / omega_cut
        for _ in range(MAX_TAIL_GROWTH):
            total = attenuation + amplification + tail
            if abs(tail) <= TAIL_RTOL * abs(total) or tail == 0.0:
                break
            more = _signed_areas(f, [omega_cut, 10 * omega_cut], singular, refinement)
            attenuation += more[0]
            amplification += more[1]
            omega_cut *= 10
            tail = -c2 / omega_cut
        else:
            logger.warning(
                f"tail estimate {tail:.3g} still above tolerance "
                f"at omega={omega_cut:.3g}"
            )
        if tail < 0:
            attenuation += tail
        else:
            amplification += tail
        lhs = attenuation + amplification

        pole_term = math.pi * sum(p.real for p in L.unstable_poles())
        closed_term = -math.pi * sum(p.real for p in closed_unstable)
        limit_term = -0.5 * math.pi * limit
        rhs = pole_term + closed_term + limit_term

        peak, peak_omega = _peak(S, np.geomspace(corner * 1e-3, omega_cut, PEAK_POINTS))

        span.set_attribute("lhs", lhs)
        span.set_attribute("rhs", rhs)
        span.set_attribute("gap", abs(lhs - rhs))
    logger.debug(f"continuous Bode integral {label}: lhs={lhs:.6g} rhs={rhs:.6g}")
    return BodeReport(
        label=label,
        domain="s",
        lhs_numeric=lhs,
        rhs_analytic=rhs,
        gap=abs(lhs - rhs),
        unstable_pole_term=pole_term,
        closed_loop_term=closed_term,
        limit_term=limit_term,
        peak_sensitivity=peak,
        peak_frequency=peak_omega,
        attenuation_area=attenuation,
        amplification_area=amplification,
        tail_estimate=tail,
        omega_cut=omega_cut,
    )


def bode_integral(
    loop: LoopSet, refinement: int = 1, full_interval: bool = False
) -> BodeReport:
    """Dispatch on the loop's domain."""
    if loop.domain.is_discrete:
        return discrete_bode_integral(
            loop.sensitivity,
            loop.open_loop,
            refinement=refinement,
            full_interval=full_interval,
            label=loop.label,
        )
    return continuous_bode_integral(
        loop.sensitivity, loop.open_loop, refinement=refinement, label=loop.label
    )


def waterbed_sweep(
    builder: Callable[[DobParams], LoopSet],
    params: DobParams,
    g_values: Sequence[float],
    refinement: int = 1,
    full_interval: bool = False,
) -> WaterbedSweep:
    """One report per observer bandwidth, plus whether the peak of |S| rises."""
    reports = []
    for g in g_values:
        report = bode_integral(
            builder(params.with_bandwidth(g)),
            refinement=refinement,
            full_interval=full_interval,
        )
        if report.closed_loop_term != 0.0:
            logger.warning(f"closed loop is unstable at g_dob={g:g}")
        reports.append(report)
    peaks = [r.peak_sensitivity for r in reports]
    increasing = (
        None if len(peaks) < 2 else all(b > a for a, b in zip(peaks[:-1], peaks[1:]))
    )
    if increasing is False and reports and reports[0].domain == "z":
        logger.warning("peak sensitivity is not increasing across the sweep")
    return WaterbedSweep(
        g_values=list(g_values),
        reports=reports,
        peak_increasing=increasing,
        max_abs_lhs=max((abs(r.lhs_numeric) for r in reports), default=0.0),
    )
