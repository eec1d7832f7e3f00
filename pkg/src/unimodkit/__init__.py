"""Exact fibre counting for correspondences, orbit-based unimodularity checks
on finite structures, and repair of finitely many exceptional fibres."""

from .errors import (
    CorrespondenceError,
    InternalInconsistency,
    NonUniformError,
    ParseError,
    RepairError,
    SymbolicError,
    UnimodError,
    VerificationError,
)

__version__ = "0.1.0"
