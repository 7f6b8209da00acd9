"""
SpinLoop - Quantum State Simulation
===================================
Exact density-matrix simulation for small spin registers.

Provides:
- QuantumState: density matrix with an optional pure-amplitude form
- Unitary evolution on chosen factors
- Projective non-demolition measurement with Born statistics
- State metrics: fidelity, purity, entanglement entropy

Measurement outcomes are always ordered by descending eigenvalue; the
position in that order is the outcome index protocols branch on.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import DecompositionError, DimensionError, ValidationError
from .operator_algebra import (
    HermitianOperator,
    TensorSpace,
    UnitaryOperator,
    embed_on,
    partial_trace,
)

logger = logging.getLogger(__name__)

STATE_TOL = 1e-10          # Hermiticity, trace and pure-form consistency
PSD_TOL = 1e-9             # smallest allowed eigenvalue is -PSD_TOL
EIG_CLUSTER_TOL = 1e-8     # relative to the observable's spectral range
PROB_FLOOR = 1e-12
ENTROPY_FLOOR = 1e-12
GENERATOR_NAME = "PCG64"


@dataclass(frozen=True, eq=False)
class QuantumState:
    """
    A density matrix on a tensor space.
    ``pure_amplitudes`` is kept alongside rho whenever the state is known pure.
    """
    space: TensorSpace
    rho: np.ndarray
    pure_amplitudes: Optional[np.ndarray] = None

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex, copy=True)
        d = self.space.total_dim
        if rho.shape != (d, d):
            raise DimensionError(f"rho of shape {rho.shape} does not fit space {self.space.factor_dims}")
        if not np.all(np.isfinite(rho)):
            raise ValidationError("rho has non-finite entries")
        if np.max(np.abs(rho - rho.conj().T)) > STATE_TOL:
            raise ValidationError("rho is not Hermitian")
        rho = (rho + rho.conj().T) / 2
        if abs(np.trace(rho) - 1.0) > STATE_TOL:
            raise ValidationError(f"trace(rho) = {np.trace(rho).real:.12g}, expected 1")
        if np.min(np.linalg.eigvalsh(rho)) < -PSD_TOL:
            raise ValidationError("rho has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

        if self.pure_amplitudes is not None:
            psi = np.array(self.pure_amplitudes, dtype=complex, copy=True).reshape(-1)
            if psi.shape != (d,):
                raise DimensionError(f"amplitude vector of length {psi.size} does not fit dimension {d}")
            if abs(np.vdot(psi, psi).real - 1.0) > STATE_TOL:
                raise ValidationError("pure amplitudes are not normalized")
            if np.max(np.abs(np.outer(psi, psi.conj()) - rho)) > STATE_TOL:
                raise ValidationError("pure amplitudes disagree with rho")
            psi.setflags(write=False)
            object.__setattr__(self, "pure_amplitudes", psi)

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.space.factor_dims

    @property
    def is_pure(self) -> bool:
        return self.pure_amplitudes is not None

    def to_dict(self) -> dict:
        """Plain-JSON description for reports"""
        data = {'dims': list(self.dims)}
        if self.pure_amplitudes is not None:
            data['pure'] = [[float(z.real), float(z.imag)] for z in self.pure_amplitudes]
        else:
            data['rho'] = {
                'dim_rows': self.rho.shape[0],
                'dim_cols': self.rho.shape[1],
                'entries': [[float(z.real), float(z.imag)] for z in self.rho.reshape(-1)],
            }
        return data


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    """One eigenspace of a projective measurement"""
    observable_label: str
    eigenvalue: float
    probability: float
    post_state: QuantumState
    index: int = 0
    targets: Tuple[int, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            'observable': self.observable_label,
            'eigenvalue': self.eigenvalue,
            'probability': self.probability,
            'index': self.index,
            'targets': list(self.targets),
        }


def make_pure(space: TensorSpace, amplitudes: Sequence[complex]) -> QuantumState:
    """
    Normalized pure state from an amplitude vector.

    Raises:
        DimensionError: length does not match the space
        ValidationError: zero vector
    """
    psi = np.array(amplitudes, dtype=complex).reshape(-1)
    if psi.size != space.total_dim:
        raise DimensionError(f"{psi.size} amplitudes for a space of dimension {space.total_dim}")
    norm = np.linalg.norm(psi)
    if not np.isfinite(norm) or norm == 0.0:
        raise ValidationError("cannot normalize a zero (or non-finite) amplitude vector")
    psi = psi / norm
    return QuantumState(space, np.outer(psi, psi.conj()), psi)


def make_mixed(space: TensorSpace, rho) -> QuantumState:
    """State from a density matrix (no pure form attached)"""
    return QuantumState(space, np.asarray(rho, dtype=complex))


def basis_state(space: TensorSpace, indices: Sequence[int]) -> QuantumState:
    """Computational basis product state, one index per factor"""
    if len(indices) != space.n_factors:
        raise DimensionError(f"need {space.n_factors} basis indices, got {len(indices)}")
    flat = int(np.ravel_multi_index(tuple(indices), space.factor_dims))
    psi = np.zeros(space.total_dim, dtype=complex)
    psi[flat] = 1.0
    return make_pure(space, psi)


def product_state(*states: QuantumState) -> QuantumState:
    """Tensor product of states, factors concatenated in order"""
    space = TensorSpace(tuple(d for s in states for d in s.dims))
    if all(s.is_pure for s in states):
        psi = states[0].pure_amplitudes
        for s in states[1:]:
            psi = np.kron(psi, s.pure_amplitudes)
        return make_pure(space, psi)
    rho = states[0].rho
    for s in states[1:]:
        rho = np.kron(rho, s.rho)
    return make_mixed(space, rho)


def apply_unitary(state: QuantumState, u: UnitaryOperator, targets: Sequence[int]) -> QuantumState:
    """rho -> U rho U^dagger with U acting on ``targets``"""
    full = embed_on(u.matrix, state.space, targets)
    rho = full @ state.rho @ full.conj().T
    psi = None
    if state.pure_amplitudes is not None:
        psi = full @ state.pure_amplitudes
        # keep rho and psi bit-consistent
        rho = np.outer(psi, psi.conj())
    return QuantumState(state.space, rho, psi)


def _eigenspaces(m: HermitianOperator, cluster_tol: float) -> List[Tuple[float, np.ndarray]]:
    """(eigenvalue, column basis) pairs, descending, degenerate values grouped"""
    try:
        evals, evecs = scipy.linalg.eigh(m.matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise DecompositionError(f"eigendecomposition of '{m.label}' failed: {e}") from e
    order = np.argsort(-evals, kind="stable")
    evals, evecs = evals[order], evecs[:, order]
    spread = float(evals[0] - evals[-1])
    gap = cluster_tol * spread if spread > 0 else 0.0

    groups: List[List[int]] = [[0]]
    for k in range(1, len(evals)):
        if evals[groups[-1][0]] - evals[k] <= gap:
            groups[-1].append(k)
        else:
            groups.append([k])
    return [(float(np.mean(evals[g])), evecs[:, g]) for g in groups]


def measurement_distribution(state: QuantumState, m: HermitianOperator, targets: Sequence[int],
                             eig_cluster_tol: float = EIG_CLUSTER_TOL,
                             prob_floor: float = PROB_FLOOR) -> List[MeasurementOutcome]:
    """
    Every outcome of a projective non-demolition measurement of ``m``.

    Returns:
        One outcome per eigenspace with probability above ``prob_floor``,
        in descending eigenvalue order. Omitted outcomes keep their index
        slot so indices stay stable across states.
    """
    targets = state.space.check_targets(targets)
    if m.dim != state.space.targets_dim(targets):
        raise DimensionError(
            f"observable of dimension {m.dim} does not act on factors {targets}"
        )
    outcomes = []
    for index, (eigenvalue, vecs) in enumerate(_eigenspaces(m, eig_cluster_tol)):
        projector = embed_on(vecs @ vecs.conj().T, state.space, targets)
        prob = float(np.real(np.trace(projector @ state.rho)))
        if prob <= prob_floor:
            logger.debug("outcome %d of %s omitted (p=%.3g)", index, m.label, prob)
            continue
        if state.pure_amplitudes is not None:
            psi = projector @ state.pure_amplitudes / np.sqrt(prob)
            post = make_pure(state.space, psi)
        else:
            rho = projector @ state.rho @ projector / prob
            rho = rho / np.trace(rho).real
            post = make_mixed(state.space, (rho + rho.conj().T) / 2)
        outcomes.append(MeasurementOutcome(m.label, eigenvalue, prob, post, index, targets))
    return outcomes


def sample_measurement(state: QuantumState, m: HermitianOperator, targets: Sequence[int],
                       rng: np.random.Generator, **kwargs) -> MeasurementOutcome:
    """Draw one outcome by inverse CDF over the descending-eigenvalue ordering"""
    outcomes = measurement_distribution(state, m, targets, **kwargs)
    u = rng.random()
    cumulative = 0.0
    for outcome in outcomes:
        cumulative += outcome.probability
        if u < cumulative:
            return outcome
    return outcomes[-1]


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    evals, evecs = scipy.linalg.eigh(rho)
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """
    Uhlmann fidelity (tr sqrt(sqrt(a) b sqrt(a)))^2, in [0, 1].
    Reduces to |<a|b>|^2 for two pure states; global phase never matters.
    """
    if a.dims != b.dims:
        raise DimensionError(f"fidelity between spaces {a.dims} and {b.dims}")
    if a.is_pure and b.is_pure:
        value = abs(np.vdot(a.pure_amplitudes, b.pure_amplitudes)) ** 2
    elif a.is_pure:
        psi = a.pure_amplitudes
        value = np.real(np.vdot(psi, b.rho @ psi))
    elif b.is_pure:
        psi = b.pure_amplitudes
        value = np.real(np.vdot(psi, a.rho @ psi))
    else:
        root = _psd_sqrt(a.rho)
        inner = np.linalg.eigvalsh(root @ b.rho @ root)
        value = np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2
    return float(min(1.0, max(0.0, value)))


def purity(state: QuantumState) -> float:
    """tr(rho^2)"""
    return float(np.real(np.trace(state.rho @ state.rho)))


def von_neumann_entropy(rho, floor: float = ENTROPY_FLOOR) -> float:
    """-sum lambda log2 lambda, eigenvalues below ``floor`` dropped"""
    evals = np.linalg.eigvalsh(np.asarray(rho, dtype=complex))
    evals = evals[evals > floor]
    return float(max(0.0, -np.sum(evals * np.log2(evals))))


def reduced_state(state: QuantumState, keep: Sequence[int]) -> QuantumState:
    """Marginal state on the kept factors (ascending factor order)"""
    keep = sorted(state.space.check_targets(keep))
    rho = partial_trace(state.rho, state.space, keep)
    return make_mixed(TensorSpace(tuple(state.dims[i] for i in keep)), rho)


def entanglement_entropy(state: QuantumState, cut: Sequence[int],
                         floor: float = ENTROPY_FLOOR) -> float:
    """
    Entropy (bits) of the reduced state on ``cut`` for a globally pure state.

    Raises:
        ValidationError: the global state is mixed
    """
    if not state.is_pure and abs(purity(state) - 1.0) > 1e-9:
        raise ValidationError("entanglement entropy is defined here for pure global states only")
    return von_neumann_entropy(partial_trace(state.rho, state.space, cut), floor)
