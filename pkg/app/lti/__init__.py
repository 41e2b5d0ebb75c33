"""Polynomial and rational transfer-function algebra."""

from app.lti.poly import Polynomial, roots
from app.lti.xfer import (
    Domain,
    FrequencyResponse,
    LoopSet,
    PoleClassification,
    RationalTF,
    classify_roots,
    log_grid,
    parallel,
    sensitivity_from_open_loop,
    series,
)

__all__ = [
    "Domain",
    "FrequencyResponse",
    "LoopSet",
    "PoleClassification",
    "Polynomial",
    "RationalTF",
    "classify_roots",
    "log_grid",
    "parallel",
    "roots",
    "sensitivity_from_open_loop",
    "series",
]
