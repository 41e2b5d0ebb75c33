"""Exception hierarchy shared by every analysis module and the CLI."""


class DobBodeError(Exception):
    """Base class for all errors raised by this package."""


class NumericalError(DobBodeError, ArithmeticError):
    """A computation could not produce a meaningful number."""


class ZeroPolynomial(NumericalError):
    """Root finding was asked for the identically zero polynomial."""


class NonConvergence(NumericalError):
    """The root iteration did not converge within its sweep budget."""


class PoleHit(NumericalError):
    """A transfer function was evaluated at (or numerically on) a pole."""


class DegenerateLoop(NumericalError):
    """The closed-loop characteristic polynomial 1 + L vanishes identically."""


class MarginalPole(NumericalError):
    """A closed-loop pole lies on the stability boundary."""


class TailDivergence(NumericalError):
    """ln|S| does not decay at high frequency, so the integral diverges."""


class SingularityAtGridEdge(NumericalError):
    """A unit-circle zero of S sits at the Nyquist edge of the integration range."""


class ImproperTF(NumericalError):
    """The numerator degree exceeds what the requested limit allows."""


class DomainMismatch(DobBodeError, ValueError):
    """Two transfer functions from different domains were combined."""


class BracketError(DobBodeError, ValueError):
    """Base class for critical-bandwidth bracketing failures."""


class BadBracket(BracketError):
    """The bracket ends are not stable (low) and unstable (high)."""


class NoCrossing(BracketError):
    """No sign change of the stability margin was found inside the bracket."""


class ConfigError(DobBodeError, ValueError):
    """Invalid run configuration.

    Args:
        message: Human readable description.
        key: Offending ``section.key`` if known.
        line: 1-based line number in the config file if known.
    """

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = ""
        if key:
            where += f" [{key}]"
        if line:
            where += f" (line {line})"
        super().__init__(f"{message}{where}")
