"""Exact construction of a fat Cantor-type arc, the C^{2-} jets on it, and their extension."""

from .arc import (
    CantorPoint,
    DomainError,
    ResourceError,
    SeparationError,
    SquareNode,
    area_En,
    build_J,
    build_template,
    build_tree,
    locate,
    separation_bound,
)
from .functions import F_at, G_at, H_at, CertifiedValue, Jet1, constant_C, jet_at

__version__ = "0.1.0"

__all__ = [
    "CantorPoint",
    "CertifiedValue",
    "DomainError",
    "F_at",
    "G_at",
    "H_at",
    "Jet1",
    "ResourceError",
    "SeparationError",
    "SquareNode",
    "area_En",
    "build_J",
    "build_template",
    "build_tree",
    "constant_C",
    "jet_at",
    "locate",
    "separation_bound",
]
