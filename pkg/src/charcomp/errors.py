"""Exception hierarchy shared by every module.

Two families exist so the command line can map failures onto exit codes:
:class:`ValidationError` for malformed inputs and violated preconditions, and
:class:`SynthesisError` for numerical procedures that ran but did not produce
an acceptable answer.
"""
from __future__ import annotations


class CharCompError(Exception):
    """Base class for all package errors."""


class ValidationError(CharCompError):
    """An input was malformed or a precondition did not hold."""


class SynthesisError(CharCompError):
    """A synthesis, decomposition or fitting routine failed."""


class ShapeMismatch(ValidationError):
    """Array shapes or parameter counts do not match what was expected."""


class NotSingleAxis(ValidationError):
    """A pulse used by the closed-form path has non-zero c2 or c3."""


class NotLocallyEquivalent(ValidationError):
    """Two unitaries that were required to be locally equivalent are not."""


class GateSetInvalid(ValidationError):
    """A gate set lacks a CX-class entangler or is otherwise malformed."""


class MissingGateSet(ValidationError):
    """A circuit uses a qubit pair for which no gate set was supplied."""


class TooLarge(ValidationError):
    """A dense simulation was requested above the supported qubit count."""


class BadBitstring(ValidationError):
    """A bitstring has the wrong length or contains characters other than 0/1."""


class InsufficientData(ValidationError):
    """Tomography records do not cover the configurations a fit needs."""


class DecompositionFailure(SynthesisError):
    """The Cartan decomposition could not reconstruct its input."""


class FrameMismatch(SynthesisError):
    """Two decompositions landed on irreconcilable chamber representatives."""


class Infeasible(SynthesisError):
    """A closed-form motif cannot reach the requested coordinates."""


class CoverageIncomplete(SynthesisError):
    """No coverage entry contains the requested point."""


class SynthesisExhausted(SynthesisError):
    """Every coverage entry was tried and none produced a synthesis."""


class AmbiguousFit(SynthesisError):
    """A tomography fit did not reach the configured residual ceiling."""


class ConvergenceFailure(SynthesisError):
    """The invariant-matching optimizer did not reach its threshold.

    Attributes:
        residual: Best loss reached across all starts.
        angles: Local angles attaining ``residual``.
    """

    def __init__(self, message: str, residual: float, angles):
        super().__init__(message)
        self.residual = residual
        self.angles = angles
