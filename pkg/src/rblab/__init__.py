"""Curvature engine and verification laboratory for almost Ricci-Bourguignon solitons."""
from . import catalog, chartcalc, integrals, jets, rbflow, soliton
from ._accel import backend_name
from .chartcalc import ChartMetric, Interval, LocalGeometry, PointTensor
from .errors import (
    BlowUpError,
    CFLError,
    ConfigurationError,
    DegeneracyError,
    DomainError,
    ParameterError,
    PreconditionError,
    RBLabError,
)
from .soliton import SOLVE, SolitonData, SolitonReport, soliton_residual

__version__ = "0.1.0"

__all__ = [
    "catalog",
    "chartcalc",
    "integrals",
    "jets",
    "rbflow",
    "soliton",
    "backend_name",
    "ChartMetric",
    "Interval",
    "LocalGeometry",
    "PointTensor",
    "SOLVE",
    "SolitonData",
    "SolitonReport",
    "soliton_residual",
    "BlowUpError",
    "CFLError",
    "ConfigurationError",
    "DegeneracyError",
    "DomainError",
    "ParameterError",
    "PreconditionError",
    "RBLabError",
]
