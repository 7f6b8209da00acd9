"""
SpinLoop - Lie Controllability
==============================
Commutator closure of a control system's operator set and the five
controllability / observability verdicts built on it.

Verdicts:
- open_loop_semiclassical:   closure of {H, O_i} is all of su(N)
- closed_loop_semiclassical: some measurement M_j is nontrivial AND open loop holds
- observable_semiclassical:  same answer as closed loop
- controllable_quantum:      some coupling O_i x O'_i has both sides nontrivial
                             AND closure of {H, O_i, system sides} is su(N)
- observable_quantum:        same answer as controllable_quantum

"Full algebra" means the traceless part of the closure spans su(N), i.e.
has dimension N^2 - 1; the identity direction is a global phase.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ClosureNotStabilizedError, DimensionError
from .operator_algebra import HermitianOperator, hs_norm

logger = logging.getLogger(__name__)

CLOSURE_TOL = 1e-9
NONTRIVIAL_TOL = 1e-9
ORTHO_PASSES = 2    # Gram-Schmidt is repeated once for numerical stability


class VerdictKind(Enum):
    """The five results a control system can be checked against"""
    OPEN_LOOP_SEMICLASSICAL = "open_loop_semiclassical"
    CLOSED_LOOP_SEMICLASSICAL = "closed_loop_semiclassical"
    OBSERVABLE_SEMICLASSICAL = "observable_semiclassical"
    CONTROLLABLE_QUANTUM = "controllable_quantum"
    OBSERVABLE_QUANTUM = "observable_quantum"


@dataclass(frozen=True, eq=False)
class CouplingTerm:
    """One coherent interaction O_i x O'_i between system and controller"""
    system: HermitianOperator
    controller: HermitianOperator


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """
    Drift Hamiltonian plus everything a controller can do to the system.
    Switching schedules gamma_i(t) are not stored: verdicts only depend on
    the operator sets.
    """
    dim: int
    drift: HermitianOperator
    controls: Tuple[HermitianOperator, ...] = ()
    measurements: Tuple[HermitianOperator, ...] = ()
    couplings: Tuple[CouplingTerm, ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "measurements", tuple(self.measurements))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        if self.dim < 2:
            raise DimensionError(f"system dimension must be >= 2, got {self.dim}")
        system_side = [('drift', self.drift)]
        system_side += [(f'controls[{i}]', op) for i, op in enumerate(self.controls)]
        system_side += [(f'measurements[{i}]', op) for i, op in enumerate(self.measurements)]
        system_side += [(f'couplings[{i}].system', c.system) for i, c in enumerate(self.couplings)]
        for name, op in system_side:
            if op.dim != self.dim:
                raise DimensionError(f"{name} has dimension {op.dim}, system has {self.dim}")

    @property
    def full_dimension(self) -> int:
        return self.dim * self.dim - 1


@dataclass(frozen=True, eq=False)
class LieClosureReport:
    """Orthonormal traceless basis of the commutator closure"""
    dim_found: int
    basis: Tuple[HermitianOperator, ...]
    full: bool
    generations: int
    tol_used: float
    matrix_dim: int
    dims_by_generation: Tuple[int, ...] = ()
    stabilized: bool = True

    def to_dict(self) -> dict:
        return {
            'dim_found': self.dim_found,
            'full_dim': self.matrix_dim ** 2 - 1,
            'full': self.full,
            'generations': self.generations,
            'dims_by_generation': list(self.dims_by_generation),
            'stabilized': self.stabilized,
            'tol_used': self.tol_used,
        }


@dataclass(frozen=True, eq=False)
class Verdict:
    """Answer to one of the five controllability / observability questions"""
    kind: VerdictKind
    answer: bool
    closure: LieClosureReport
    reasons: Tuple[str, ...] = ()
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            'kind': self.kind.value,
            'answer': self.answer,
            'dim_found': self.closure.dim_found,
            'full_dim': self.closure.matrix_dim ** 2 - 1,
            'reasons': list(self.reasons),
            'notes': list(self.notes),
            'tol_used': self.closure.tol_used,
            'closure': self.closure.to_dict(),
        }


class _OrthonormalBasis:
    """Real-coefficient Gram-Schmidt basis of traceless Hermitian matrices"""

    def __init__(self, n: int, tol: float):
        self.n = n
        self.tol = tol
        self.elements: List[np.ndarray] = []

    def adjoin(self, candidate: np.ndarray) -> bool:
        """Add the new direction of ``candidate`` if it has one"""
        c = candidate - np.trace(candidate) / self.n * np.eye(self.n)
        c = (c + c.conj().T) / 2
        start = hs_norm(c)
        if start == 0.0:
            return False
        for _ in range(ORTHO_PASSES):
            for b in self.elements:
                c = c - np.real(np.vdot(b, c)) * b
        residual = hs_norm(c)
        if residual <= self.tol * start:
            return False
        self.elements.append(c / residual)
        return True


def lie_closure(generators: Sequence[HermitianOperator], tol: float = CLOSURE_TOL,
                max_generations: Optional[int] = None) -> LieClosureReport:
    """
    Traceless commutator closure of ``generators``.

    Generation 0 is the orthonormalized generator set. Each later generation
    adjoins i[a, b] for a in the basis as it stood when the generation
    started and b in the previous generation, in index order.

    Raises:
        DimensionError: generators of different dimensions, or none at all
        ClosureNotStabilizedError: still growing after ``max_generations``
    """
    generators = list(generators)
    if not generators:
        raise DimensionError("lie_closure needs at least one generator")
    n = generators[0].dim
    for g in generators:
        if g.dim != n:
            raise DimensionError(f"generator '{g.label}' has dimension {g.dim}, expected {n}")
    full_dim = n * n - 1
    if max_generations is None:
        max_generations = n * n

    basis = _OrthonormalBasis(n, tol)
    for g in generators:
        basis.adjoin(g.matrix)
    newest = list(range(len(basis.elements)))
    dims = [len(basis.elements)]
    generations = 0
    stabilized = True

    while newest and len(basis.elements) < full_dim:
        if generations >= max_generations:
            stabilized = False
            break
        snapshot = len(basis.elements)
        newest_set = set(newest)
        first_new = len(basis.elements)
        for a_idx in range(snapshot):
            for b_idx in newest:
                # i[a,b] and i[b,a] span the same direction
                if a_idx == b_idx or (a_idx in newest_set and a_idx > b_idx):
                    continue
                a, b = basis.elements[a_idx], basis.elements[b_idx]
                basis.adjoin(1j * (a @ b - b @ a))
                if len(basis.elements) >= full_dim:
                    break
            if len(basis.elements) >= full_dim:
                break
        generations += 1
        newest = list(range(first_new, len(basis.elements)))
        dims.append(len(basis.elements))
        logger.debug("closure generation %d: dim %d", generations, dims[-1])

    report = LieClosureReport(
        dim_found=len(basis.elements),
        basis=tuple(HermitianOperator(e, f"basis[{k}]", tol=1e-8)
                    for k, e in enumerate(basis.elements)),
        full=len(basis.elements) == full_dim,
        generations=generations,
        tol_used=tol,
        matrix_dim=n,
        dims_by_generation=tuple(dims),
        stabilized=stabilized,
    )
    if not stabilized:
        raise ClosureNotStabilizedError(
            f"closure still growing after {max_generations} generations "
            f"(dim {report.dim_found} of {full_dim})",
            report,
        )
    return report


def is_nontrivial(op: HermitianOperator, tol: float = NONTRIVIAL_TOL) -> bool:
    """True unless ``op`` is a scalar multiple of the identity"""
    return not op.is_scalar(tol)


def _semiclassical_closure(sys: ControlSystem, tol, max_generations) -> LieClosureReport:
    return lie_closure([sys.drift, *sys.controls], tol, max_generations)


def _quantum_generators(sys: ControlSystem) -> List[HermitianOperator]:
    return [sys.drift, *sys.controls, *(c.system for c in sys.couplings)]


def open_loop_controllable(sys: ControlSystem, tol: float = CLOSURE_TOL,
                           max_generations: Optional[int] = None,
                           closure: Optional[LieClosureReport] = None) -> Verdict:
    closure = closure or _semiclassical_closure(sys, tol, max_generations)
    reasons = []
    if not closure.full:
        reasons.append(
            f"algebra generated by {{H, O_i}} has dimension {closure.dim_found}, "
            f"needs {sys.full_dimension}"
        )
    return Verdict(VerdictKind.OPEN_LOOP_SEMICLASSICAL, closure.full, closure, tuple(reasons))


def closed_loop_controllable(sys: ControlSystem, tol: float = CLOSURE_TOL,
                             max_generations: Optional[int] = None,
                             closure: Optional[LieClosureReport] = None,
                             nontrivial_tol: float = NONTRIVIAL_TOL) -> Verdict:
    open_loop = open_loop_controllable(sys, tol, max_generations, closure)
    reasons = []
    if not any(is_nontrivial(m, nontrivial_tol) for m in sys.measurements):
        reasons.append("no nontrivial measurement")
    reasons.extend(open_loop.reasons)
    answer = not reasons
    return Verdict(VerdictKind.CLOSED_LOOP_SEMICLASSICAL, answer, open_loop.closure, tuple(reasons))


def observable_semiclassical(sys: ControlSystem, tol: float = CLOSURE_TOL,
                             max_generations: Optional[int] = None,
                             closure: Optional[LieClosureReport] = None,
                             nontrivial_tol: float = NONTRIVIAL_TOL) -> Verdict:
    closed = closed_loop_controllable(sys, tol, max_generations, closure, nontrivial_tol)
    return Verdict(VerdictKind.OBSERVABLE_SEMICLASSICAL, closed.answer, closed.closure,
                   closed.reasons, ("equivalent to closed-loop controllability",))


def quantum_controllable(sys: ControlSystem, tol: float = CLOSURE_TOL,
                         max_generations: Optional[int] = None,
                         closure: Optional[LieClosureReport] = None,
                         nontrivial_tol: float = NONTRIVIAL_TOL) -> Verdict:
    closure = closure or lie_closure(_quantum_generators(sys), tol, max_generations)
    reasons = []
    if not any(is_nontrivial(c.system, nontrivial_tol) and is_nontrivial(c.controller, nontrivial_tol)
               for c in sys.couplings):
        reasons.append("no nontrivial coupling")
    if not closure.full:
        reasons.append(
            f"algebra generated by {{H, O_i, coupling system sides}} has dimension "
            f"{closure.dim_found}, needs {sys.full_dimension}"
        )
    notes = ("generators: drift, controls and system side of every coupling",)
    return Verdict(VerdictKind.CONTROLLABLE_QUANTUM, not reasons, closure, tuple(reasons), notes)


def observable_quantum(sys: ControlSystem, tol: float = CLOSURE_TOL,
                       max_generations: Optional[int] = None,
                       closure: Optional[LieClosureReport] = None,
                       nontrivial_tol: float = NONTRIVIAL_TOL) -> Verdict:
    controllable = quantum_controllable(sys, tol, max_generations, closure, nontrivial_tol)
    notes = controllable.notes + ("equivalent to quantum controllability",)
    return Verdict(VerdictKind.OBSERVABLE_QUANTUM, controllable.answer, controllable.closure,
                   controllable.reasons, notes)


def all_verdicts(sys: ControlSystem, tol: float = CLOSURE_TOL,
                 max_generations: Optional[int] = None,
                 nontrivial_tol: float = NONTRIVIAL_TOL) -> Dict[VerdictKind, Verdict]:
    """The five verdicts, computing each distinct closure once"""
    semiclassical = _semiclassical_closure(sys, tol, max_generations)
    if sys.couplings:
        quantum = lie_closure(_quantum_generators(sys), tol, max_generations)
    else:
        quantum = semiclassical
    verdicts = [
        open_loop_controllable(sys, tol, closure=semiclassical),
        closed_loop_controllable(sys, tol, closure=semiclassical, nontrivial_tol=nontrivial_tol),
        observable_semiclassical(sys, tol, closure=semiclassical, nontrivial_tol=nontrivial_tol),
        quantum_controllable(sys, tol, closure=quantum, nontrivial_tol=nontrivial_tol),
        observable_quantum(sys, tol, closure=quantum, nontrivial_tol=nontrivial_tol),
    ]
    return {v.kind: v for v in verdicts}
