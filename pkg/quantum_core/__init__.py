# SpinLoop - Core Module
# This module contains the numerical core:
# - Operator Algebra: Hermitian / unitary operators, tensor spaces, partial trace
# - Quantum Simulation: density matrices, projective measurement, state metrics
# - Lie Controllability: commutator closure and the five verdicts
# - Errors: exception hierarchy with command-line exit codes

from .errors import SpinLoopError
from .operator_algebra import HermitianOperator, UnitaryOperator, TensorSpace
from .quantum_sim import QuantumState, MeasurementOutcome
from .lie_controllability import ControlSystem, CouplingTerm, Verdict, VerdictKind, lie_closure

__all__ = [
    'SpinLoopError', 'HermitianOperator', 'UnitaryOperator', 'TensorSpace',
    'QuantumState', 'MeasurementOutcome', 'ControlSystem', 'CouplingTerm',
    'Verdict', 'VerdictKind', 'lie_closure',
]
