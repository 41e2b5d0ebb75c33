"""Dense complex-coefficient polynomials and an all-roots finder.

Coefficients are stored lowest degree first, the convention of
``numpy.polynomial.polynomial``. Every transfer function in the package is a
ratio of two of these.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from numbers import Number
from typing import Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from app.utils.errors import NonConvergence, ZeroPolynomial

logger = logging.getLogger(__name__)

# |c| <= TRIM_TOL * max|coeffs| counts as zero when trimming the top end.
TRIM_TOL = 1e-12
MAX_SWEEPS = 200
STEP_TOL = 1e-13
_EPS = float(np.finfo(float).eps)

Scalar = Union[complex, float, int]


def _trim(coeffs: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if scale == 0.0:
        return np.zeros(1, dtype=complex)
    keep = np.flatnonzero(np.abs(coeffs) > TRIM_TOL * scale)
    return coeffs[: keep[-1] + 1].copy()


class Polynomial:
    """Immutable polynomial with complex coefficients, lowest degree first."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Iterable[Scalar] | Scalar) -> None:
        arr = np.atleast_1d(np.asarray(coeffs, dtype=complex)).ravel()
        self._coeffs = _trim(arr)
        self._coeffs.setflags(write=False)

    @classmethod
    def from_roots(cls, roots: Sequence[Scalar], lead: Scalar = 1.0) -> Polynomial:
        if len(roots) == 0:
            return cls([lead])
        return cls(npoly.polyfromroots(np.asarray(roots, dtype=complex)) * lead)

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def is_zero(self) -> bool:
        return self._coeffs.size == 1 and self._coeffs[0] == 0

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return -1 if self.is_zero else self._coeffs.size - 1

    @property
    def lead(self) -> complex:
        return complex(self._coeffs[-1])

    def is_real(self, tol: float = 1e-12) -> bool:
        scale = float(np.max(np.abs(self._coeffs)))
        return bool(np.all(np.abs(self._coeffs.imag) <= tol * max(scale, 1e-300)))

    def monic(self) -> Polynomial:
        if self.is_zero:
            raise ZeroPolynomial("the zero polynomial has no monic form")
        return Polynomial(self._coeffs / self._coeffs[-1])

    def derivative(self) -> Polynomial:
        if self._coeffs.size == 1:
            return Polynomial([0.0])
        return Polynomial(npoly.polyder(self._coeffs))

    def roots(self) -> list[complex]:
        return roots(self)

    def allclose(self, other: Polynomial, tol: float = 1e-10) -> bool:
        n = max(self._coeffs.size, other._coeffs.size)
        a = np.zeros(n, dtype=complex)
        b = np.zeros(n, dtype=complex)
        a[: self._coeffs.size] = self._coeffs
        b[: other._coeffs.size] = other._coeffs
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)
        return bool(np.max(np.abs(a - b)) <= tol * scale)

    def __call__(self, x: Scalar | np.ndarray) -> complex | np.ndarray:
        return evaluate(self, x)

    def __add__(self, other: Polynomial | Scalar) -> Polynomial:
        return add(self, _coerce(other))

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial(-self._coeffs)

    def __sub__(self, other: Polynomial | Scalar) -> Polynomial:
        return add(self, -_coerce(other))

    def __rsub__(self, other: Polynomial | Scalar) -> Polynomial:
        return add(_coerce(other), -self)

    def __mul__(self, other: Polynomial | Scalar) -> Polynomial:
        return mul(self, _coerce(other))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        terms = ", ".join(f"{c:.6g}" for c in self._coeffs)
        return f"Polynomial([{terms}])"


def _coerce(value: Polynomial | Scalar) -> Polynomial:
    if isinstance(value, Polynomial):
        return value
    if isinstance(value, Number):
        return Polynomial([value])
    raise TypeError(f"cannot combine Polynomial with {type(value).__name__}")


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    """Coefficient-wise sum, trimmed of top-end cancellation residue."""
    return Polynomial(npoly.polyadd(p.coeffs, q.coeffs))


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    """Convolution of the coefficient sequences."""
    return Polynomial(np.convolve(p.coeffs, q.coeffs))


def evaluate(p: Polynomial, x: Scalar | np.ndarray) -> complex | np.ndarray:
    """p(x) by Horner's scheme; vectorised over array arguments."""
    value = npoly.polyval(np.asarray(x, dtype=complex), p.coeffs)
    if np.ndim(value) == 0:
        return complex(value)
    return value


def roots(p: Polynomial, max_sweeps: int = MAX_SWEEPS) -> list[complex]:
    """All roots of ``p`` with multiplicity, sorted by real then imaginary part.

    Roots at the origin are split off exactly; the rest come from an
    Aberth-Ehrlich simultaneous iteration followed by one Newton polish per
    root.

    Raises:
        ZeroPolynomial: ``p`` is identically zero.
        NonConvergence: the iteration did not settle within ``max_sweeps``.
    """
    if p.is_zero:
        raise ZeroPolynomial("cannot find the roots of the zero polynomial")
    coeffs = p.coeffs
    shift = int(np.flatnonzero(coeffs)[0])
    found: list[complex] = [0j] * shift
    coeffs = coeffs[shift:]
    degree = coeffs.size - 1
    if degree == 1:
        found.append(complex(-coeffs[0] / coeffs[1]))
    elif degree > 1:
        found.extend(_aberth(coeffs, max_sweeps))
    return sorted(found, key=lambda r: (r.real, r.imag))


def _aberth(coeffs: np.ndarray, max_sweeps: int) -> list[complex]:
    n = coeffs.size - 1
    monic = coeffs / coeffs[-1]
    deriv = npoly.polyder(monic)
    abs_coeffs = np.abs(monic)

    # Start on the Cauchy-bound circle, rotated off the real axis so that
    # conjugate pairs are not seeded symmetrically.
    radius = 1.0 + float(np.max(np.abs(monic[:-1])))
    z = radius * np.exp(1j * (2.0 * np.pi * np.arange(n) / n + 0.4))
    converged = np.zeros(n, dtype=bool)

    for sweep in range(1, max_sweeps + 1):
        pz = npoly.polyval(z, monic)
        dpz = npoly.polyval(z, deriv)
        # rounding-error floor of Horner at z; multiple roots stall here
        floor = 4.0 * n * _EPS * npoly.polyval(np.abs(z), abs_coeffs)
        converged |= np.abs(pz) <= floor

        with np.errstate(divide="ignore", invalid="ignore"):
            newton = pz / dpz
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            repulsion = np.sum(1.0 / diff, axis=1)
            step = newton / (1.0 - newton * repulsion)

        stuck = ~np.isfinite(step)
        if stuck.any():
            step[stuck] = 1e-7 * (1.0 + np.abs(z[stuck])) * np.exp(0.7j)
        step[converged] = 0.0
        z = z - step
        converged |= np.abs(step) < STEP_TOL * (1.0 + np.abs(z))
        if converged.all():
            logger.debug(f"Aberth converged after {sweep} sweeps (degree {n})")
            break
    else:
        raise NonConvergence(
            f"root iteration for a degree-{n} polynomial did not converge "
            f"in {max_sweeps} sweeps"
        )

    return [_polish(complex(zi), monic, deriv) for zi in z]


def _polish(z: complex, monic: np.ndarray, deriv: np.ndarray) -> complex:
    pz = complex(npoly.polyval(z, monic))
    dpz = complex(npoly.polyval(z, deriv))
    if pz == 0 or dpz == 0:
        return z
    candidate = z - pz / dpz
    if abs(complex(npoly.polyval(candidate, monic))) < abs(pz):
        return candidate
    return z
