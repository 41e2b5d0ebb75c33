"""Closed-loop pole loci over the observer bandwidth and the critical bandwidth."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from opentelemetry import trace

from app.dobmodels import DobParams, LoopSet
from app.lti.xfer import BOUNDARY_TOL, Domain, RationalTF
from app.utils.errors import BadBracket, DegenerateLoop, NoCrossing, NumericalError

logger = logging.getLogger(__name__)
tracer = trace.get_tracer(__name__)

PRESCAN_POINTS = 64
MAX_BISECTIONS = 200

ParamLoop = Callable[[float], LoopSet]


@dataclass(frozen=True)
class LocusBranch:
    """Pole sets along a parameter grid, one column per matched branch.

    ``discontinuities`` holds (grid index, branch) pairs where the matched pole
    jumped further than continuation allows.
    """

    param_values: np.ndarray
    poles_per_value: np.ndarray
    stability_flags: np.ndarray
    margins: np.ndarray
    domain: Domain
    discontinuities: list[tuple[int, int]] = field(default_factory=list)

    @property
    def branch_count(self) -> int:
        return int(self.poles_per_value.shape[1])

    def first_unstable(self) -> int | None:
        unstable = np.flatnonzero(~self.stability_flags)
        return int(unstable[0]) if unstable.size else None


@dataclass(frozen=True)
class CriticalBandwidth:
    g_star: float
    boundary_pole: complex
    bracket: tuple[float, float]
    margin: float
    iterations: int


def closed_loop_poles(open_loop: RationalTF) -> list[complex]:
    """Roots of den(L) + num(L)."""
    closed = open_loop.den + open_loop.num
    if closed.is_zero:
        raise DegenerateLoop("1 + L is identically zero")
    return closed.roots()


def stability_margin(poles: Sequence[complex], domain: Domain) -> float:
    """max|z| - 1 (discrete) or max Re(s) (continuous); negative means stable."""
    if len(poles) == 0:
        return -math.inf
    return float(np.max(domain.boundary_distance(poles)))


def bandwidth_family(
    builder: Callable[[DobParams], LoopSet], params: DobParams
) -> ParamLoop:
    """Loop builder with everything but g_dob fixed."""

    def build(g_dob: float) -> LoopSet:
        return builder(params.with_bandwidth(g_dob))

    return build


def _match(previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Reorder ``current`` to follow ``previous`` by greedy nearest neighbour."""
    n = previous.size
    distance = np.abs(previous[:, None] - current[None, :])
    distance = np.where(np.isnan(distance), np.inf, distance)
    matched = np.full(n, complex(np.nan, np.nan))
    taken_prev = np.zeros(n, dtype=bool)
    taken_cur = np.zeros(n, dtype=bool)
    for _ in range(n):
        masked = np.where(taken_prev[:, None] | taken_cur[None, :], np.inf, distance)
        i, j = np.unravel_index(int(np.argmin(masked)), masked.shape)
        if not np.isfinite(masked[i, j]):
            break
        matched[i] = current[j]
        taken_prev[i] = taken_cur[j] = True
    leftovers = iter(current[~taken_cur])
    for i in np.flatnonzero(~taken_prev):
        matched[i] = next(leftovers, complex(np.nan, np.nan))
    return matched


def _pad(poles: list[complex], width: int) -> np.ndarray:
    row = np.full(width, complex(np.nan, np.nan))
    row[: len(poles)] = poles
    return row


def sweep(loop_builder: ParamLoop, grid: Sequence[float]) -> LocusBranch:
    """Closed-loop poles at every grid value, matched into continuous branches.

    A matched step is flagged as a discontinuity when it is larger than half the
    distance to the nearest other pole and more than twice the branch's previous
    step.
    """
    values = np.asarray(grid, dtype=float)
    if values.size == 0:
        raise ValueError("sweep grid is empty")
    if np.any(np.diff(values) <= 0):
        raise ValueError("sweep grid must be strictly increasing")

    with tracer.start_as_current_span("rootlocus.sweep") as span:
        loops = [loop_builder(float(v)) for v in values]
        domain = loops[0].domain
        pole_sets = [closed_loop_poles(loop.open_loop) for loop in loops]
        width = max(len(p) for p in pole_sets)
        if any(len(p) != width for p in pole_sets):
            logger.warning("closed-loop order changes along the sweep; NaN padding")

        rows = [_pad(pole_sets[0], width)]
        discontinuities: list[tuple[int, int]] = []
        last_step = np.full(width, np.nan)
        for k in range(1, values.size):
            previous = rows[-1]
            current = _match(previous, _pad(pole_sets[k], width))
            step = np.abs(current - previous)
            for b in range(width):
                if np.isnan(previous[b]):
                    continue
                others = np.delete(previous, b)
                others = others[~np.isnan(others)]
                separation = (
                    float(np.min(np.abs(others - previous[b])))
                    if others.size
                    else math.inf
                )
                if (
                    step[b] > 0.5 * separation
                    and np.isfinite(last_step[b])
                    and step[b] > 2.0 * last_step[b]
                ):
                    discontinuities.append((k, b))
            last_step = step
            rows.append(current)

        margins = np.array([stability_margin(p, domain) for p in pole_sets])
        flags = margins < -BOUNDARY_TOL
        span.set_attribute("points", int(values.size))
        span.set_attribute("unstable_points", int((~flags).sum()))
    if discontinuities:
        logger.info(f"{len(discontinuities)} branch discontinuities flagged")
    return LocusBranch(
        param_values=values,
        poles_per_value=np.vstack(rows),
        stability_flags=flags,
        margins=margins,
        domain=domain,
        discontinuities=discontinuities,
    )


def _margin_at(loop_builder: ParamLoop, value: float) -> tuple[float, list[complex]]:
    loop = loop_builder(value)
    poles = closed_loop_poles(loop.open_loop)
    return stability_margin(poles, loop.domain), poles


def critical_bandwidth(
    loop_builder: ParamLoop,
    bracket: tuple[float, float],
    tol: float = BOUNDARY_TOL,
) -> CriticalBandwidth:
    """Smallest parameter in ``bracket`` where a closed-loop pole reaches the boundary.

    A 64-point pre-scan finds the first stable-to-unstable transition, which is
    then bisected until the margin is within ``tol`` of zero.

    Raises:
        BadBracket: the low end is not stable or the high end is not unstable.
        NoCrossing: the pre-scan finds no sign change of the margin.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise BadBracket(f"bracket ({lo:g}, {hi:g}) is empty")
    with tracer.start_as_current_span("rootlocus.critical_bandwidth") as span:
        m_lo, _ = _margin_at(loop_builder, lo)
        m_hi, _ = _margin_at(loop_builder, hi)
        if not (m_lo < -tol and m_hi > tol):
            raise BadBracket(
                f"need a stable low end and an unstable high end, got margins "
                f"{m_lo:.3g} at {lo:g} and {m_hi:.3g} at {hi:g}"
            )

        scan = np.linspace(lo, hi, PRESCAN_POINTS)
        margins = [m_lo] + [_margin_at(loop_builder, float(g))[0] for g in scan[1:-1]]
        margins.append(m_hi)
        crossing = next(
            (i for i in range(1, scan.size) if margins[i - 1] < 0 <= margins[i]), None
        )
        if crossing is None:
            raise NoCrossing(f"margin does not change sign on ({lo:g}, {hi:g})")

        a, b = float(scan[crossing - 1]), float(scan[crossing])
        best, best_margin = b, margins[crossing]
        iterations = 0
        for iterations in range(1, MAX_BISECTIONS + 1):
            mid = 0.5 * (a + b)
            m_mid, _ = _margin_at(loop_builder, mid)
            if abs(m_mid) < abs(best_margin):
                best, best_margin = mid, m_mid
            if abs(m_mid) <= tol or mid in (a, b):
                break
            if m_mid < 0:
                a = mid
            else:
                b = mid
        _, poles = _margin_at(loop_builder, best)
        domain = loop_builder(best).domain
        boundary_pole = poles[int(np.argmax(domain.boundary_distance(poles)))]

        span.set_attribute("g_star", best)
        span.set_attribute("iterations", iterations)
    logger.info(f"critical bandwidth {best:.9g} rad/s (pole {boundary_pole:.6g})")
    return CriticalBandwidth(
        g_star=best,
        boundary_pole=complex(boundary_pole),
        bracket=(lo, hi),
        margin=best_margin,
        iterations=iterations,
    )


@dataclass(frozen=True)
class StabilityCell:
    alpha: float
    g_dob: float
    T_s: float
    margin: float | None
    stable: bool | None
    error: str | None = None


def stability_map(
    builder: Callable[[DobParams], LoopSet],
    params: DobParams,
    alphas: Sequence[float],
    g_values: Sequence[float],
    sample_times: Sequence[float],
    max_workers: int | None = None,
) -> list[StabilityCell]:
    """Margin and stability over an (alpha, g_dob, T_s) grid, in that nesting order.

    Cells whose analysis fails numerically carry the error message instead.
    """
    cells = [(a, g, t) for a in alphas for g in g_values for t in sample_times]

    def evaluate(cell: tuple[float, float, float]) -> StabilityCell:
        a, g, t = cell
        try:
            loop = builder(params.with_alpha(a).with_sample_time(t).with_bandwidth(g))
            margin = stability_margin(closed_loop_poles(loop.open_loop), loop.domain)
        except NumericalError as exc:
            logger.warning(f"cell alpha={a:g} g={g:g} T_s={t:g} failed: {exc}")
            return StabilityCell(a, g, t, None, None, str(exc))
        return StabilityCell(a, g, t, margin, margin < -BOUNDARY_TOL)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(evaluate, cells))
