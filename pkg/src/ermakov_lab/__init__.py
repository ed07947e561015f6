"""Numerical laboratory for normalized-variable (Ermakov) transforms.

Classical accelerator envelopes and tracking, Schrodinger and Pauli
split-operator propagation, and the coordinate/time/amplitude/phase map
that turns time-dependent focusing systems into time-independent ones.
"""

from .lattice import (
    EnvelopeFrame,
    LatticeSpec,
    TransferMatrix,
    matched_envelope,
    one_turn_matrix,
    propagate_envelope,
    segment_matrix,
)

__all__ = [
    "EnvelopeFrame",
    "LatticeSpec",
    "TransferMatrix",
    "matched_envelope",
    "one_turn_matrix",
    "propagate_envelope",
    "segment_matrix",
]

__version__ = "0.1.0"
