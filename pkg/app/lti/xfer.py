"""Rational transfer functions over the s- or z-domain.

Feedback algebra never cancels common factors on its own: the uncancelled
inner-loop pole inside an outer loop is exactly what the sensitivity
integrals need to see. Use :meth:`RationalTF.minreal` to reduce explicitly.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import signal

from app.lti.poly import Polynomial, Scalar
from app.utils.errors import (
    DegenerateLoop,
    DomainMismatch,
    ImproperTF,
    PoleHit,
    ZeroPolynomial,
)

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-9
POLE_GUARD = 1e-300
DEFAULT_POINTS = 2000
CONTINUOUS_OMEGA_RANGE = (1e-1, 1e5)


class Domain(BaseModel):
    """Continuous (``s``) or discrete (``z``, with sample time) domain."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["s", "z"]
    sample_time: float | None = None

    @model_validator(mode="after")
    def _check_sample_time(self) -> Domain:
        if self.kind == "z" and (self.sample_time is None or self.sample_time <= 0):
            raise ValueError("a discrete domain needs a sample time > 0")
        if self.kind == "s" and self.sample_time is not None:
            raise ValueError("a continuous domain has no sample time")
        return self

    @classmethod
    def continuous(cls) -> Domain:
        return cls(kind="s")

    @classmethod
    def discrete(cls, sample_time: float) -> Domain:
        return cls(kind="z", sample_time=sample_time)

    @property
    def is_discrete(self) -> bool:
        return self.kind == "z"

    @property
    def nyquist(self) -> float:
        """pi / T_s in rad/s (discrete only)."""
        if self.sample_time is None:
            raise ValueError("continuous domain has no Nyquist frequency")
        return math.pi / self.sample_time

    def boundary_distance(self, points: Sequence[complex] | np.ndarray) -> np.ndarray:
        """Signed distance to the stability boundary, positive when unstable."""
        values = np.asarray(points, dtype=complex)
        if self.is_discrete:
            return np.abs(values) - 1.0
        return values.real

    def __str__(self) -> str:
        return f"z (T_s={self.sample_time:g} s)" if self.is_discrete else "s"


@dataclass(frozen=True)
class PoleClassification:
    stable: list[complex]
    marginal: list[complex]
    unstable: list[complex]


def classify_roots(
    roots: Sequence[complex], domain: Domain, tol: float = BOUNDARY_TOL
) -> PoleClassification:
    """Split roots by stability; marginal means within ``tol`` of the boundary."""
    distance = domain.boundary_distance(roots)
    stable, marginal, unstable = [], [], []
    for root, d in zip(roots, distance):
        if abs(d) <= tol:
            marginal.append(root)
        elif d > 0:
            unstable.append(root)
        else:
            stable.append(root)
    return PoleClassification(stable, marginal, unstable)


@dataclass(frozen=True)
class FrequencyResponse:
    """Response samples on a strictly increasing grid of frequencies in rad/s."""

    grid: np.ndarray
    values: np.ndarray
    domain: Domain
    pole_hits: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(self.magnitude)

    @property
    def phase_deg(self) -> np.ndarray:
        angle = np.angle(self.values)
        if self.pole_hits.any():
            return np.degrees(angle)
        return np.degrees(np.unwrap(angle))


@dataclass(frozen=True)
class RationalTF:
    """num / den over a domain."""

    num: Polynomial
    den: Polynomial
    domain: Domain

    def __post_init__(self) -> None:
        if self.den.is_zero:
            raise ZeroPolynomial("transfer function denominator is identically zero")

    @classmethod
    def from_coeffs(
        cls, num: Sequence[Scalar], den: Sequence[Scalar], domain: Domain
    ) -> RationalTF:
        """Build from coefficient lists, lowest degree first."""
        return cls(Polynomial(num), Polynomial(den), domain)

    @classmethod
    def constant(cls, value: Scalar, domain: Domain) -> RationalTF:
        return cls(Polynomial([value]), Polynomial([1.0]), domain)

    @property
    def relative_degree(self) -> int:
        # the zero numerator has degree -1, so L = 0 reads as strictly proper
        return self.den.degree - self.num.degree

    def is_real(self) -> bool:
        return self.num.is_real() and self.den.is_real()

    def evaluate(self, point: Scalar) -> complex:
        """num(point) / den(point).

        Raises:
            PoleHit: ``point`` is numerically a pole.
        """
        d = complex(self.den(point))
        if abs(d) <= POLE_GUARD * max(1.0, float(np.max(np.abs(self.den.coeffs)))):
            raise PoleHit(f"evaluation at a pole: {point}")
        return complex(self.num(point)) / d

    __call__ = evaluate

    def poles(self) -> list[complex]:
        return self.den.roots()

    def zeros(self) -> list[complex]:
        if self.num.is_zero:
            return []
        return self.num.roots()

    def classify_poles(self) -> PoleClassification:
        return classify_roots(self.poles(), self.domain)

    def unstable_poles(self) -> list[complex]:
        """Strictly unstable poles; boundary poles go to :meth:`marginal_poles`."""
        return self.classify_poles().unstable

    def marginal_poles(self) -> list[complex]:
        return self.classify_poles().marginal

    def frequency_response(
        self, grid: Sequence[float] | np.ndarray
    ) -> FrequencyResponse:
        """tf(j*omega) or tf(exp(j*omega*T_s)) on ``grid``.

        Points that land on a pole are flagged in ``pole_hits`` and carry NaN.
        """
        omega = np.asarray(grid, dtype=float)
        if omega.size:
            if np.any(np.diff(omega) <= 0):
                raise ValueError("frequency grid must be strictly increasing")
            if self.domain.is_discrete and (
                omega[0] <= 0 or omega[-1] > self.domain.nyquist * (1 + 1e-12)
            ):
                raise ValueError(
                    f"discrete grid must lie in (0, {self.domain.nyquist:g}] rad/s"
                )
        if self.domain.is_discrete:
            points = np.exp(1j * omega * self.domain.sample_time)
        else:
            points = 1j * omega
        num = np.asarray(self.num(points), dtype=complex)
        den = np.asarray(self.den(points), dtype=complex)
        guard = POLE_GUARD * max(1.0, float(np.max(np.abs(self.den.coeffs))))
        hits = np.abs(den) <= guard
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.where(hits, complex(np.nan, np.nan), num / den)
        if hits.any():
            logger.warning(f"{int(hits.sum())} grid point(s) fall on a pole")
        return FrequencyResponse(omega, values, self.domain, hits)

    def limit_L_at_infinity(self) -> complex:
        """lim L at infinity: 0 if strictly proper, the leading ratio if biproper."""
        rd = self.relative_degree
        if rd < 0:
            raise ImproperTF("numerator degree exceeds denominator degree")
        if rd > 0:
            return 0j
        return self.num.lead / self.den.lead

    def limit_sL_at_infinity(self) -> float:
        """lim s*L(s) at infinity, finite only for relative degree >= 1."""
        rd = self.relative_degree
        if rd < 0:
            raise ImproperTF("numerator degree exceeds denominator degree")
        if rd == 0:
            raise ImproperTF("s*L(s) is unbounded for a biproper L")
        if rd > 1:
            return 0.0
        return float((self.num.lead / self.den.lead).real)

    def minreal(self, tol: float = 1e-9) -> RationalTF:
        """Cancel pole/zero pairs closer than ``tol``."""
        remaining = list(self.poles())
        kept: list[complex] = []
        for zero in self.zeros():
            if remaining:
                gaps = [abs(zero - p) for p in remaining]
                i = int(np.argmin(gaps))
                if gaps[i] <= tol:
                    remaining.pop(i)
                    continue
            kept.append(zero)
        num = Polynomial.from_roots(kept, self.num.lead / self.den.lead)
        den = Polynomial.from_roots(remaining)
        if self.is_real():
            num, den = Polynomial(num.coeffs.real), Polynomial(den.coeffs.real)
        return RationalTF(num, den, self.domain)

    def impulse_response(self, samples: int) -> np.ndarray:
        """First ``samples`` coefficients of the expansion in powers of 1/z."""
        impulse = np.zeros(samples)
        if samples:
            impulse[0] = 1.0
        return self._long_division(impulse)

    def step_response(self, samples: int) -> np.ndarray:
        return self._long_division(np.ones(samples))

    def _long_division(self, excitation: np.ndarray) -> np.ndarray:
        if not self.domain.is_discrete:
            raise ValueError("long division applies to discrete transfer functions")
        order = self.den.degree
        if self.num.degree > order:
            raise ImproperTF("a non-causal transfer function has no 1/z expansion")
        b = np.zeros(order + 1, dtype=complex)
        if not self.num.is_zero:
            # z^k / z^order = z^-(order - k)
            b[order - np.arange(self.num.coeffs.size)] = self.num.coeffs
        a = self.den.coeffs[::-1]
        if self.is_real():
            return signal.lfilter(b.real, a.real, excitation)
        return signal.lfilter(b, a, excitation.astype(complex))

    def __mul__(self, other: RationalTF) -> RationalTF:
        return series(self, other)

    def __add__(self, other: RationalTF) -> RationalTF:
        return parallel(self, other)

    def __neg__(self) -> RationalTF:
        return RationalTF(-self.num, self.den, self.domain)


@dataclass(frozen=True)
class LoopSet:
    """Open loop L with its sensitivity S = 1/(1+L) and complementary T = L/(1+L)."""

    open_loop: RationalTF
    sensitivity: RationalTF
    complementary: RationalTF
    label: str = ""

    @property
    def domain(self) -> Domain:
        return self.open_loop.domain


def _check_domains(*tfs: RationalTF) -> Domain:
    domain = tfs[0].domain
    for tf in tfs[1:]:
        if tf.domain != domain:
            raise DomainMismatch(f"cannot combine {domain} with {tf.domain}")
    return domain


def series(a: RationalTF, b: RationalTF, *rest: RationalTF) -> RationalTF:
    """Product of transfer functions; no cancellation."""
    domain = _check_domains(a, b, *rest)
    num, den = a.num * b.num, a.den * b.den
    for tf in rest:
        num, den = num * tf.num, den * tf.den
    return RationalTF(num, den, domain)


def parallel(a: RationalTF, b: RationalTF) -> RationalTF:
    """Sum of two transfer functions over the product denominator."""
    domain = _check_domains(a, b)
    return RationalTF(a.num * b.den + b.num * a.den, a.den * b.den, domain)


def sensitivity_from_open_loop(open_loop: RationalTF, label: str = "") -> LoopSet:
    """Close a unity negative-feedback loop around ``open_loop``.

    S and T share the denominator den(L) + num(L), so S + T = 1 holds exactly.

    Raises:
        DegenerateLoop: den(L) + num(L) vanishes identically.
    """
    closed = open_loop.den + open_loop.num
    if closed.is_zero:
        raise DegenerateLoop("1 + L is identically zero")
    domain = open_loop.domain
    return LoopSet(
        open_loop=open_loop,
        sensitivity=RationalTF(open_loop.den, closed, domain),
        complementary=RationalTF(open_loop.num, closed, domain),
        label=label,
    )


def log_grid(
    domain: Domain,
    points: int = DEFAULT_POINTS,
    omega_min: float | None = None,
    omega_max: float | None = None,
) -> np.ndarray:
    """Logarithmic frequency grid; discrete grids stop at Nyquist."""
    if points <= 0:
        return np.empty(0)
    if domain.is_discrete:
        hi = min(omega_max or domain.nyquist, domain.nyquist)
        lo = omega_min or hi * 1e-4
    else:
        hi = omega_max or CONTINUOUS_OMEGA_RANGE[1]
        lo = omega_min or CONTINUOUS_OMEGA_RANGE[0]
    if not 0 < lo < hi:
        raise ValueError(f"invalid frequency range ({lo:g}, {hi:g})")
    if points == 1:
        return np.array([hi])
    return np.geomspace(lo, hi, points)
