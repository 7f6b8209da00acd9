"""
SpinLoop - Control Protocols
============================
A small step language for feedback protocols and the executors that run it.

Step types:
- UnitaryStep:          apply a fixed unitary to some factors
- ConditionalFlipStep:  flip one spin iff another is in a given basis state
                        (the frequency-selective pulse)
- MeasureStep:          projective non-demolition measurement, result recorded
- BranchStep:           classical feedback keyed on a recorded outcome index
- EvolveStep:           free evolution under a Hamiltonian

Executors:
- enumerate: depth-first over every measurement outcome with its probability
- sampled:   Monte-Carlo trajectories, one PCG64 stream per (seed, index)
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from quantum_core.errors import (
    BranchCapExceededError,
    DimensionError,
    ProtocolError,
)
from quantum_core.operator_algebra import (
    HermitianOperator,
    TensorSpace,
    UnitaryOperator,
    expm_hermitian,
    partial_trace,
)
from quantum_core.quantum_sim import (
    EIG_CLUSTER_TOL,
    GENERATOR_NAME,
    PROB_FLOOR,
    QuantumState,
    apply_unitary,
    fidelity,
    make_pure,
    measurement_distribution,
    purity,
    sample_measurement,
    von_neumann_entropy,
)

BRANCH_CAP = 4096
FIDELITY_TOL = 1e-9


class StepType(Enum):
    """Step tags used by the protocol file schema"""
    UNITARY = "unitary"
    CFLIP = "cflip"
    MEASURE = "measure"
    BRANCH = "branch"
    EVOLVE = "evolve"


@dataclass(frozen=True, eq=False)
class UnitaryStep:
    u: UnitaryOperator
    targets: Tuple[int, ...]
    label: str = ""
    step_type = StepType.UNITARY

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


@dataclass(frozen=True, eq=False)
class ConditionalFlipStep:
    """Flip ``target`` iff ``control`` is in basis state ``control_value``"""
    control: int
    control_value: int
    target: int
    label: str = ""
    step_type = StepType.CFLIP


@dataclass(frozen=True, eq=False)
class MeasureStep:
    observable: HermitianOperator
    targets: Tuple[int, ...]
    record_key: str
    label: str = ""
    step_type = StepType.MEASURE

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


@dataclass(frozen=True, eq=False)
class BranchStep:
    """Run ``cases[outcome index]`` (nothing for a missing case)"""
    record_key: str
    cases: Dict[int, Tuple["ProtocolStep", ...]]
    label: str = ""
    step_type = StepType.BRANCH

    def __post_init__(self):
        object.__setattr__(self, "cases", {int(k): tuple(v) for k, v in self.cases.items()})


@dataclass(frozen=True, eq=False)
class EvolveStep:
    """exp(-i H duration) on ``targets`` (all factors when None)"""
    hamiltonian: HermitianOperator
    duration: float
    targets: Optional[Tuple[int, ...]] = None
    label: str = ""
    step_type = StepType.EVOLVE

    def __post_init__(self):
        if self.targets is not None:
            object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


ProtocolStep = Union[UnitaryStep, ConditionalFlipStep, MeasureStep, BranchStep, EvolveStep]


def describe_step(step: ProtocolStep) -> str:
    """Short human-readable name of a step"""
    if step.label:
        return step.label
    if isinstance(step, ConditionalFlipStep):
        return f"cflip(control={step.control}@{step.control_value}, target={step.target})"
    if isinstance(step, MeasureStep):
        return f"measure {step.observable.label or 'M'} on {list(step.targets)} -> {step.record_key}"
    if isinstance(step, BranchStep):
        return f"branch on {step.record_key}"
    if isinstance(step, EvolveStep):
        return f"evolve {step.hamiltonian.label or 'H'} for {step.duration:g}s"
    return f"unitary {step.u.label or 'U'} on {list(step.targets)}"


def step_support(step: ProtocolStep, space: TensorSpace) -> Tuple[int, ...]:
    """Factors a step can act on (a branch acts wherever its cases do)"""
    if isinstance(step, ConditionalFlipStep):
        return tuple(sorted((step.control, step.target)))
    if isinstance(step, (UnitaryStep, MeasureStep)):
        return tuple(sorted(step.targets))
    if isinstance(step, EvolveStep):
        return tuple(range(space.n_factors)) if step.targets is None else tuple(sorted(step.targets))
    support = set()
    for case in step.cases.values():
        for inner in case:
            support.update(step_support(inner, space))
    return tuple(sorted(support))


def _check_steps(space: TensorSpace, steps: Sequence[ProtocolStep], produced: set, path: str):
    produced = set(produced)
    for k, step in enumerate(steps):
        where = f"{path}[{k}]"
        try:
            if isinstance(step, UnitaryStep):
                if step.u.dim != space.targets_dim(step.targets):
                    raise DimensionError(f"unitary of dimension {step.u.dim} on factors {step.targets}")
            elif isinstance(step, ConditionalFlipStep):
                space.check_targets([step.control, step.target])
                if space.factor_dims[step.control] != 2 or space.factor_dims[step.target] != 2:
                    raise ProtocolError(f"{where}: conditional flips act on qubit factors only")
                if step.control_value not in (0, 1):
                    raise ProtocolError(f"{where}: control_value must be 0 or 1")
            elif isinstance(step, MeasureStep):
                if step.observable.dim != space.targets_dim(step.targets):
                    raise DimensionError(f"observable of dimension {step.observable.dim} on factors {step.targets}")
                produced.add(step.record_key)
            elif isinstance(step, BranchStep):
                if step.record_key not in produced:
                    raise ProtocolError(
                        f"{where}: branch on '{step.record_key}' has no preceding measurement"
                    )
                for case_index, case in step.cases.items():
                    _check_steps(space, case, produced, f"{where}.cases[{case_index}]")
            elif isinstance(step, EvolveStep):
                targets = range(space.n_factors) if step.targets is None else step.targets
                if step.hamiltonian.dim != space.targets_dim(targets):
                    raise DimensionError(f"Hamiltonian of dimension {step.hamiltonian.dim} on factors {list(targets)}")
                if not np.isfinite(step.duration):
                    raise ProtocolError(f"{where}: duration must be finite")
            else:
                raise ProtocolError(f"{where}: unknown step {step!r}")
        except DimensionError as e:
            if str(e).startswith(where):
                raise
            raise DimensionError(f"{where}: {e}") from e


@dataclass(frozen=True, eq=False)
class Protocol:
    """
    An ordered script of steps on a tensor space.
    ``prepare`` optionally fixes initial amplitudes of non-system factors
    (e.g. the controller starting in |down>).
    """
    space: TensorSpace
    steps: Tuple[ProtocolStep, ...]
    label: str = ""
    prepare: Dict[int, Tuple[complex, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "prepare", {int(k): tuple(v) for k, v in self.prepare.items()})
        for factor, amps in self.prepare.items():
            self.space.check_targets([factor])
            if len(amps) != self.space.factor_dims[factor]:
                raise DimensionError(f"prepare[{factor}] has {len(amps)} amplitudes")
        _check_steps(self.space, self.steps, set(), "steps")

    def has_measurements(self) -> bool:
        def _any(steps):
            for step in steps:
                if isinstance(step, MeasureStep):
                    return True
                if isinstance(step, BranchStep) and any(_any(c) for c in step.cases.values()):
                    return True
            return False
        return _any(self.steps)

    def on_space(self, space: TensorSpace, label: Optional[str] = None) -> "Protocol":
        """Same steps on a larger space (extra factors appended, untouched)"""
        return Protocol(space, self.steps, label or self.label, self.prepare)


def conditional_flip_unitary(space: TensorSpace, control: int, control_value: int,
                             target: int) -> UnitaryOperator:
    """
    Full-space permutation unitary flipping ``target`` iff ``control`` is in
    basis state ``control_value``.
    """
    space.check_targets([control, target])
    if space.factor_dims[control] != 2 or space.factor_dims[target] != 2:
        raise ProtocolError("conditional flips act on qubit factors only")
    d = space.total_dim
    u = np.zeros((d, d), dtype=complex)
    for index in range(d):
        digits = list(np.unravel_index(index, space.factor_dims))
        if digits[control] == control_value:
            digits[target] ^= 1
        u[np.ravel_multi_index(tuple(digits), space.factor_dims), index] = 1.0
    return UnitaryOperator(u, f"cflip({control}@{control_value}->{target})")


@dataclass(frozen=True, eq=False)
class TrajectoryResult:
    """
    One run of a protocol.
    ``records`` maps record_key -> (eigenvalue, outcome index).
    ``history`` holds (step description, state after the step).
    """
    final_state: QuantumState
    records: Dict[str, Tuple[float, int]]
    probability: float
    seed_info: str
    history: Tuple[Tuple[str, QuantumState], ...] = ()

    def to_dict(self, target: Optional[QuantumState] = None) -> dict:
        data = {
            'records': {k: {'eigenvalue': v[0], 'outcome': v[1]} for k, v in sorted(self.records.items())},
            'probability': self.probability,
            'seed_info': self.seed_info,
            'final_state': self.final_state.to_dict(),
            'final_purity': purity(self.final_state),
            'steps': [label for label, _ in self.history],
        }
        if target is not None:
            data['fidelity_to_target'] = fidelity(self.final_state, target)
        return data


class ProtocolRunner:
    """
    Executes protocols on quantum states.
    Pure given (initial state, protocol, seed); holds only configuration.
    """

    def __init__(self, branch_cap: int = BRANCH_CAP, workers: int = 1,
                 eig_cluster_tol: float = EIG_CLUSTER_TOL, prob_floor: float = PROB_FLOOR,
                 logger=None):
        self.branch_cap = branch_cap
        self.workers = max(1, int(workers))
        self.eig_cluster_tol = eig_cluster_tol
        self.prob_floor = prob_floor
        self.logger = logger

    # Step semantics
    def _apply(self, state: QuantumState, step: ProtocolStep) -> QuantumState:
        """Deterministic (non-measurement) step"""
        if isinstance(step, UnitaryStep):
            return apply_unitary(state, step.u, step.targets)
        if isinstance(step, ConditionalFlipStep):
            pair = TensorSpace((2, 2))
            local = conditional_flip_unitary(pair, 0, step.control_value, 1)
            return apply_unitary(state, local, (step.control, step.target))
        if isinstance(step, EvolveStep):
            targets = step.targets if step.targets is not None else range(state.space.n_factors)
            return apply_unitary(state, expm_hermitian(step.hamiltonian, step.duration), tuple(targets))
        raise ProtocolError(f"cannot apply {describe_step(step)} deterministically")

    def _check_start(self, initial: QuantumState, p: Protocol):
        if initial.space != p.space:
            raise DimensionError(
                f"state lives on {initial.dims}, protocol '{p.label}' on {p.space.factor_dims}"
            )

    @staticmethod
    def _case(step: BranchStep, records: Dict[str, Tuple[float, int]]) -> Tuple[ProtocolStep, ...]:
        if step.record_key not in records:
            raise ProtocolError(f"branch on '{step.record_key}' before it was measured")
        return step.cases.get(records[step.record_key][1], ())

    # Enumeration
    def run_enumerate(self, initial: QuantumState, p: Protocol) -> List[TrajectoryResult]:
        """
        Every trajectory with its probability, depth-first, outcomes in
        descending eigenvalue order.

        Raises:
            BranchCapExceededError: more than ``branch_cap`` trajectories
        """
        self._check_start(initial, p)
        out: List[TrajectoryResult] = []
        self._expand(initial, p.steps, {}, 1.0, (("initial", initial),), out)
        self._log(f"'{p.label}' enumerated: {len(out)} trajectories")
        return out

    def _expand(self, state, steps, records, prob, history, out):
        for pos, step in enumerate(steps):
            rest = tuple(steps[pos + 1:])
            if isinstance(step, MeasureStep):
                outcomes = measurement_distribution(
                    state, step.observable, step.targets,
                    eig_cluster_tol=self.eig_cluster_tol, prob_floor=self.prob_floor,
                )
                for outcome in outcomes:
                    branch_records = dict(records)
                    branch_records[step.record_key] = (outcome.eigenvalue, outcome.index)
                    label = f"{describe_step(step)} = {outcome.eigenvalue:+g}"
                    self._expand(outcome.post_state, rest, branch_records,
                                 prob * outcome.probability,
                                 history + ((label, outcome.post_state),), out)
                return
            if isinstance(step, BranchStep):
                self._expand(state, self._case(step, records) + rest, records, prob, history, out)
                return
            state = self._apply(state, step)
            history = history + ((describe_step(step), state),)

        if len(out) >= self.branch_cap:
            raise BranchCapExceededError(f"more than {self.branch_cap} trajectories")
        out.append(TrajectoryResult(state, records, prob, "enumerate", history))

    # Sampling
    def run_sampled(self, initial: QuantumState, p: Protocol, seed: int,
                    n_trajectories: int) -> List[TrajectoryResult]:
        """
        ``n_trajectories`` Monte-Carlo runs; trajectory i draws from the
        stream default_rng([seed, i]) so results do not depend on run order.
        """
        self._check_start(initial, p)
        if n_trajectories < 1:
            raise ProtocolError("n_trajectories must be >= 1")
        indices = range(n_trajectories)
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(lambda i: self._sample_one(initial, p, seed, i), indices))
        else:
            results = [self._sample_one(initial, p, seed, i) for i in indices]
        self._log(f"'{p.label}' sampled: {n_trajectories} trajectories, seed {seed}")
        return results

    def _sample_one(self, initial: QuantumState, p: Protocol, seed: int, index: int) -> TrajectoryResult:
        rng = np.random.default_rng([int(seed), int(index)])
        state, records, prob = initial, {}, 1.0
        history = (("initial", initial),)
        pending = list(p.steps)
        while pending:
            step = pending.pop(0)
            if isinstance(step, MeasureStep):
                outcome = sample_measurement(
                    state, step.observable, step.targets, rng,
                    eig_cluster_tol=self.eig_cluster_tol, prob_floor=self.prob_floor,
                )
                records = dict(records)
                records[step.record_key] = (outcome.eigenvalue, outcome.index)
                prob *= outcome.probability
                state = outcome.post_state
                history += ((f"{describe_step(step)} = {outcome.eigenvalue:+g}", state),)
            elif isinstance(step, BranchStep):
                pending = list(self._case(step, records)) + pending
            else:
                state = self._apply(state, step)
                history += ((describe_step(step), state),)
        info = f"{GENERATOR_NAME} seed={seed} stream=({seed},{index})"
        return TrajectoryResult(state, records, prob, info, history)

    def _log(self, message: str):
        """Log a message if logger is available"""
        if self.logger:
            self.logger.log("PROTOCOL", message)


def run_enumerate(initial: QuantumState, p: Protocol, branch_cap: int = BRANCH_CAP) -> List[TrajectoryResult]:
    return ProtocolRunner(branch_cap=branch_cap).run_enumerate(initial, p)


def run_sampled(initial: QuantumState, p: Protocol, seed: int, n_trajectories: int,
                workers: int = 1) -> List[TrajectoryResult]:
    return ProtocolRunner(workers=workers).run_sampled(initial, p, seed, n_trajectories)


@dataclass(frozen=True, eq=False)
class StateTransferReport:
    """Outcome of the entangled-reference state-transfer check"""
    transferred: bool
    fidelity: float
    local_unitary: np.ndarray
    controller_entropy: float
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = self.local_unitary.shape[0]
        return {
            'transferred': self.transferred,
            'fidelity': self.fidelity,
            'controller_entropy_bits': self.controller_entropy,
            'local_unitary': {
                'dim_rows': d,
                'dim_cols': d,
                'entries': [[float(z.real), float(z.imag)] for z in self.local_unitary.reshape(-1)],
            },
            'notes': list(self.notes),
        }


def _factor_vector(p: Protocol, factor: int) -> np.ndarray:
    d = p.space.factor_dims[factor]
    if factor in p.prepare:
        vec = np.array(p.prepare[factor], dtype=complex)
        return vec / np.linalg.norm(vec)
    vec = np.zeros(d, dtype=complex)
    vec[0] = 1.0
    return vec


def verify_state_transfer(p: Protocol, system_factor: int, controller_factor: int,
                          runner: Optional[ProtocolRunner] = None,
                          fidelity_tol: float = FIDELITY_TOL) -> StateTransferReport:
    """
    Certify that ``p`` moves the system's state, with its entanglements, onto
    the controller.

    The system starts maximally entangled with an extra reference factor
    (appended last); every other factor starts in its ``prepare`` state
    (basis state 0 by default). Transfer holds when the controller and the
    reference end maximally entangled, i.e. equal to (W x I)|Phi+> for some
    local unitary W on the controller, which is reported.

    Raises:
        ProtocolError: the protocol contains measurements
    """
    if p.has_measurements():
        raise ProtocolError("state transfer is only defined for measurement-free protocols")
    if system_factor == controller_factor:
        raise ProtocolError("system and controller must be different factors")
    p.space.check_targets([system_factor, controller_factor])
    d = p.space.factor_dims[system_factor]
    if p.space.factor_dims[controller_factor] != d:
        raise DimensionError("controller and system factors must have equal dimension")

    space = p.space.extended(d)
    reference = space.n_factors - 1
    psi = np.zeros(space.total_dim, dtype=complex)
    for k in range(d):
        e_k = np.zeros(d, dtype=complex)
        e_k[k] = 1.0
        term = np.ones(1, dtype=complex)
        for factor in range(space.n_factors):
            if factor in (system_factor, reference):
                term = np.kron(term, e_k)
            else:
                term = np.kron(term, _factor_vector(p, factor))
        psi += term
    initial = make_pure(space, psi)

    runner = runner or ProtocolRunner()
    (trajectory,) = runner.run_enumerate(initial, p.on_space(space, f"{p.label} + reference"))

    pair = sorted((controller_factor, reference))
    rho_pair = partial_trace(trajectory.final_state.rho, space, pair)
    evals, evecs = scipy.linalg.eigh(rho_pair)
    amplitudes = evecs[:, -1].reshape(d, d)   # rows: controller, cols: reference
    w, _ = scipy.linalg.polar(np.sqrt(d) * amplitudes)
    phi = w.reshape(-1) / np.sqrt(d)
    value = float(np.clip(np.real(np.vdot(phi, rho_pair @ phi)), 0.0, 1.0))
    entropy = von_neumann_entropy(partial_trace(rho_pair, TensorSpace((d, d)), [0]))

    notes = [f"reference factor {reference} appended, maximally entangled with factor {system_factor}"]
    if abs(abs(np.trace(w)) - d) > 1e-9:   # W is not a global phase
        notes.append("transfer holds up to the reported local unitary on the controller")
    return StateTransferReport(value >= 1.0 - fidelity_tol, value, w, entropy, tuple(notes))
