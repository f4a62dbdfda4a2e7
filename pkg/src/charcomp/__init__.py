"""Characterize arbitrary two-qubit pulses and compile circuits with them.

Modules:
    linalg: small dense helpers (Paulis, rotations, factorizations).
    weyl: Cartan decomposition, chamber coordinates and local invariants.
    synth_numeric: invariant matching and outer-local reconstruction.
    synth_closedform: analytic motifs for single-axis pulses.
    coverage: gate sets, ansatz regions and selection.
    characterize: controlled-pulse model, simulated tomography and fitting.
    circuit: circuit IR, block compilation and benchmark generators.
    cli: the ``charcomp`` command.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .characterize import ControlledPulseModel, CrCoefficients, NoiseSpec, TomographyConfig, characterize_pulse
from .circuit import Circuit, Gate, compile_circuit
from .coverage import GateSet, PulseGate, build_coverage_set, make_pulse_gate
from .synth_numeric import OptimizerConfig, synthesize_block
from .weyl import CanonicalCoords, canonical_gate, cartan_decompose, makhlin_invariants

__all__ = [
    "CanonicalCoords",
    "Circuit",
    "ControlledPulseModel",
    "CrCoefficients",
    "Gate",
    "GateSet",
    "NoiseSpec",
    "OptimizerConfig",
    "PulseGate",
    "TomographyConfig",
    "build_coverage_set",
    "canonical_gate",
    "cartan_decompose",
    "characterize_pulse",
    "compile_circuit",
    "make_pulse_gate",
    "makhlin_invariants",
    "synthesize_block",
]
