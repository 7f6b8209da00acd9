"""
SpinLoop - Pulse Engine
=======================
Lab-frame simulation of two coupled spins driven by a monochromatic
transverse field, used to check that a frequency-selective pi pulse really
acts as the conditional flip the protocols assume.

    H(t) = (1/2)(omega Z x I + omega' I x Z + gamma Z x Z)
           + amplitude * cos(carrier * t + phase) * X_target

Spin 0 resonates at omega, spin 1 at omega'. The transition of one spin
sits at omega_target + gamma when the other spin is up and at
omega_target - gamma when it is down.

Propagation is piecewise constant with the Hamiltonian sampled at each
step midpoint. Steps are exponentiated as one batched eigendecomposition
and multiplied as a balanced tree (later steps on the left), in chunks.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from quantum_core.errors import DecompositionError, ValidationError
from quantum_core.operator_algebra import (
    HermitianOperator,
    TensorSpace,
    UnitaryOperator,
    embed,
    identity,
    kron,
    max_norm,
    pauli,
)
from protocols.builtins import UP
from protocols.control_protocols import (
    BranchStep,
    ConditionalFlipStep,
    Protocol,
    UnitaryStep,
    conditional_flip_unitary,
    describe_step,
)

logger = logging.getLogger(__name__)

STEPS_PER_PERIOD = 40
STEP_TOL = 1e-6
MAX_REFINEMENTS = 1
SELECTIVITY_RATIO = 0.1
CHUNK_STEPS = 8192          # step unitaries held in memory at once
PROPAGATOR_TOL = 1e-8

_PAIR = TensorSpace((2, 2))

CONVENTIONS = (
    "hbar = 1, frequencies in rad/s",
    "sigma_z = diag(+1, -1), |up> = basis index 0",
    "carrier omega_target + gamma selects control up, omega_target - gamma control down",
    "gate taken in the frame rotating with the drift, pulse starting at t = 0",
    "fidelity = mean_j |U[perm(j), j]| after choosing each basis state's phase freely",
)


@dataclass(frozen=True)
class SpinPairParams:
    """Resonance frequencies and scalar coupling of the two spins (rad/s)"""
    omega: float
    omega_prime: float
    gamma: float

    def __post_init__(self):
        values = (self.omega, self.omega_prime, self.gamma)
        if not all(np.isfinite(v) for v in values):
            raise ValidationError(f"spin parameters must be finite, got {values}")
        if self.omega == self.omega_prime:
            raise ValidationError("omega and omega' must differ for the spins to be addressable")
        if self.gamma == 0:
            raise ValidationError("gamma must be nonzero for conditional dynamics")

    @classmethod
    def from_hz(cls, omega_hz: float, omega_prime_hz: float, gamma_hz: float) -> "SpinPairParams":
        return cls(2 * np.pi * omega_hz, 2 * np.pi * omega_prime_hz, 2 * np.pi * gamma_hz)

    def frequency(self, spin: int) -> float:
        return (self.omega, self.omega_prime)[spin]

    def to_dict(self) -> dict:
        return {
            'omega': self.omega,
            'omega_prime': self.omega_prime,
            'gamma': self.gamma,
            'omega_hz': self.omega / (2 * np.pi),
            'omega_prime_hz': self.omega_prime / (2 * np.pi),
            'gamma_hz': self.gamma / (2 * np.pi),
        }


@dataclass(frozen=True)
class PulseSpec:
    """A monochromatic drive on one spin"""
    carrier: float
    amplitude: float
    phase: float
    duration: float
    target_spin: int = 1

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.carrier, self.amplitude, self.phase, self.duration)):
            raise ValidationError("pulse parameters must be finite")
        if self.amplitude <= 0:
            raise ValidationError(f"pulse amplitude must be > 0, got {self.amplitude}")
        if self.duration <= 0:
            raise ValidationError(f"pulse duration must be > 0, got {self.duration}")
        if self.target_spin not in (0, 1):
            raise ValidationError(f"target_spin must be 0 or 1, got {self.target_spin}")

    def to_dict(self) -> dict:
        return {
            'carrier': self.carrier,
            'carrier_hz': self.carrier / (2 * np.pi),
            'amplitude': self.amplitude,
            'amplitude_hz': self.amplitude / (2 * np.pi),
            'phase': self.phase,
            'duration': self.duration,
            'target_spin': self.target_spin,
        }


def drift_hamiltonian(params: SpinPairParams) -> HermitianOperator:
    z, one = pauli('z').matrix, identity(2)
    h = 0.5 * (params.omega * kron(z, one)
               + params.omega_prime * kron(one, z)
               + params.gamma * kron(z, z))
    return HermitianOperator(h, "drift")


def drive_operator(target_spin: int) -> np.ndarray:
    """sigma_x on the target spin of the pair"""
    return embed(pauli('x'), _PAIR, target_spin)


def lab_hamiltonian(params: SpinPairParams, pulse: PulseSpec, t: float) -> HermitianOperator:
    """Drift plus the instantaneous drive at time ``t``"""
    drive = pulse.amplitude * np.cos(pulse.carrier * t + pulse.phase)
    h = drift_hamiltonian(params).matrix + drive * drive_operator(pulse.target_spin)
    return HermitianOperator(h, f"H(t={t:g})")


def resonant_carrier(params: SpinPairParams, target_spin: int = 1, control_value: int = UP) -> float:
    """Transition frequency of ``target_spin`` with the other spin in ``control_value``"""
    sign = 1.0 if control_value == UP else -1.0
    return params.frequency(target_spin) + sign * params.gamma


def pi_pulse(params: SpinPairParams, drive_amplitude: float, target_spin: int = 1,
             control_value: int = UP, carrier: Optional[float] = None,
             phase: float = 0.0) -> PulseSpec:
    """Selective pi pulse: duration pi / amplitude at the resonant carrier"""
    if drive_amplitude <= 0:
        raise ValidationError(f"drive amplitude must be > 0, got {drive_amplitude}")
    if carrier is None:
        carrier = resonant_carrier(params, target_spin, control_value)
    return PulseSpec(carrier, drive_amplitude, phase, np.pi / drive_amplitude, target_spin)


def max_frequency(params: SpinPairParams, pulse: PulseSpec) -> float:
    """Fastest rate present in H(t), rad/s"""
    g = abs(params.gamma)
    return max(abs(params.omega) + g, abs(params.omega_prime) + g, abs(pulse.carrier)) + pulse.amplitude


def default_steps(params: SpinPairParams, pulse: PulseSpec,
                  steps_per_period: int = STEPS_PER_PERIOD) -> int:
    """At least ``steps_per_period`` steps per shortest period"""
    periods = pulse.duration * max_frequency(params, pulse) / (2 * np.pi)
    return max(1, int(math.ceil(periods * steps_per_period)))


def _step_unitaries(params: SpinPairParams, pulse: PulseSpec, t0: float,
                    dt: float, start: int, stop: int) -> np.ndarray:
    """exp(-i H(t_k + dt/2) dt) for steps start..stop-1, stacked"""
    midpoints = t0 + (np.arange(start, stop) + 0.5) * dt
    drive = pulse.amplitude * np.cos(pulse.carrier * midpoints + pulse.phase)
    stack = drift_hamiltonian(params).matrix[None, :, :] \
        + drive[:, None, None] * drive_operator(pulse.target_spin)[None, :, :]
    try:
        evals, evecs = np.linalg.eigh(stack)
    except np.linalg.LinAlgError as e:
        raise DecompositionError(f"step eigendecomposition failed: {e}") from e
    phases = np.exp(-1j * evals * dt)
    return (evecs * phases[:, None, :]) @ evecs.conj().transpose(0, 2, 1)


def _ordered_product(stack: np.ndarray) -> np.ndarray:
    """U_{n-1} ... U_1 U_0 by pairwise reduction"""
    while stack.shape[0] > 1:
        n = stack.shape[0]
        even = n - n % 2
        paired = stack[1:even:2] @ stack[0:even:2]
        if n % 2:
            paired = np.concatenate([paired, stack[-1:]])
        stack = paired
    return stack[0]


def propagate(params: SpinPairParams, pulse: PulseSpec, n_steps: Optional[int] = None,
              t0: float = 0.0, steps_per_period: int = STEPS_PER_PERIOD) -> UnitaryOperator:
    """
    Lab-frame propagator over [t0, t0 + duration].

    Args:
        n_steps: number of midpoint steps (default from steps_per_period)
        t0: start time, so that two halves compose into the whole
    """
    if n_steps is None:
        n_steps = default_steps(params, pulse, steps_per_period)
    if n_steps < 1:
        raise ValidationError(f"n_steps must be >= 1, got {n_steps}")
    dt = pulse.duration / n_steps
    total = identity(4)
    for start in range(0, n_steps, CHUNK_STEPS):
        stop = min(n_steps, start + CHUNK_STEPS)
        total = _ordered_product(_step_unitaries(params, pulse, t0, dt, start, stop)) @ total
    return UnitaryOperator(total, f"U_lab(spin {pulse.target_spin}, {n_steps} steps)", tol=PROPAGATOR_TOL)


@dataclass(frozen=True, eq=False)
class PropagationResult:
    """Propagator with its step-doubling convergence record"""
    unitary: UnitaryOperator
    steps_used: int
    change: float
    converged: bool


def propagate_checked(params: SpinPairParams, pulse: PulseSpec, n_steps: Optional[int] = None,
                      t0: float = 0.0, step_tol: float = STEP_TOL,
                      max_refinements: int = MAX_REFINEMENTS,
                      steps_per_period: int = STEPS_PER_PERIOD) -> PropagationResult:
    """
    Propagate, then keep doubling the step count until the propagator moves
    by at most ``step_tol`` (max-norm) or ``max_refinements`` extra doublings
    are spent. Non-convergence is reported, not raised.
    """
    n = n_steps or default_steps(params, pulse, steps_per_period)
    coarse = propagate(params, pulse, n, t0)
    for _ in range(max_refinements + 1):
        n *= 2
        fine = propagate(params, pulse, n, t0)
        change = max_norm(fine.matrix - coarse.matrix)
        if change <= step_tol:
            break
        coarse = fine
    converged = change <= step_tol
    if not converged:
        logger.warning("propagator changed by %.3g after doubling to %d steps", change, n)
    return PropagationResult(fine, n, change, converged)


def rotating_frame(params: SpinPairParams, u_lab: UnitaryOperator, t_end: float,
                   t_start: float = 0.0) -> UnitaryOperator:
    """exp(i D t_end) U exp(-i D t_start) with D the (diagonal) drift"""
    d = np.real(np.diag(drift_hamiltonian(params).matrix))
    out = np.exp(1j * d * t_end)[:, None] * u_lab.matrix * np.exp(-1j * d * t_start)[None, :]
    return UnitaryOperator(out, u_lab.label.replace("U_lab", "U_rot"), tol=PROPAGATOR_TOL)


def _permutation(ideal: UnitaryOperator) -> np.ndarray:
    """Row holding the single 1 of each column of a permutation unitary"""
    return np.argmax(np.abs(ideal.matrix), axis=0)


def conditional_flip_fidelity(u: UnitaryOperator, ideal: UnitaryOperator) -> Tuple[float, float, Tuple[float, ...]]:
    """
    Compare ``u`` with a permutation gate, each basis state's phase free.

    Returns:
        (mean_j |u[perm(j), j]|, min_j |u[perm(j), j]|^2, per-state phases)
    """
    perm = _permutation(ideal)
    entries = u.matrix[perm, np.arange(u.dim)]
    magnitudes = np.abs(entries)
    return (float(np.mean(magnitudes)), float(np.min(magnitudes) ** 2),
            tuple(float(p) for p in np.angle(entries)))


@dataclass(frozen=True, eq=False)
class SelectivePulseReport:
    """How closely one selective pi pulse realizes a conditional flip"""
    params: SpinPairParams
    pulse: PulseSpec
    control_value: int
    fidelity: float
    worst_case_fidelity: float
    phases: Tuple[float, ...]
    steps_used: int
    fidelity_change: float
    converged: bool
    warnings: Tuple[str, ...] = ()
    gate: Optional[UnitaryOperator] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            'params': self.params.to_dict(),
            'pulse': self.pulse.to_dict(),
            'control_value': 'up' if self.control_value == UP else 'down',
            'fidelity': self.fidelity,
            'worst_case_fidelity': self.worst_case_fidelity,
            'phases': list(self.phases),
            'steps_used': self.steps_used,
            'fidelity_change': self.fidelity_change,
            'converged': self.converged,
            'warnings': list(self.warnings),
            'conventions': list(CONVENTIONS),
        }


def selectivity_warning(params: SpinPairParams, drive_amplitude: float,
                        ratio: float = SELECTIVITY_RATIO) -> Optional[str]:
    """Message when the drive is too strong to resolve the split lines"""
    limit = ratio * min(abs(params.omega - params.omega_prime), 2 * abs(params.gamma))
    if drive_amplitude <= limit:
        return None
    return (f"drive amplitude {drive_amplitude / (2 * np.pi):.4g} Hz exceeds {ratio:g} x "
            f"min(|omega - omega'|, 2|gamma|) = {limit / (2 * np.pi):.4g} Hz; "
            f"the pulse is not frequency selective")


def validate_selective_pulse(params: SpinPairParams, drive_amplitude: float,
                             carrier: Optional[float] = None, target_spin: int = 1,
                             control_value: int = UP, phase: float = 0.0,
                             steps_per_period: int = STEPS_PER_PERIOD,
                             step_tol: float = STEP_TOL,
                             max_refinements: int = MAX_REFINEMENTS,
                             selectivity_ratio: float = SELECTIVITY_RATIO) -> SelectivePulseReport:
    """
    Propagate the pi pulse at ``carrier`` (resonant for ``control_value`` by
    default) and score its rotating-frame propagator against the flip of
    ``target_spin`` conditioned on the other spin being ``control_value``.
    The step count is doubled until the fidelity moves by at most
    ``step_tol``.
    """
    pulse = pi_pulse(params, drive_amplitude, target_spin, control_value, carrier, phase)
    ideal = conditional_flip_unitary(_PAIR, 1 - target_spin, control_value, target_spin)

    def evaluate(n_steps):
        u_rot = rotating_frame(params, propagate(params, pulse, n_steps), pulse.duration)
        return (u_rot,) + conditional_flip_fidelity(u_rot, ideal)

    n = default_steps(params, pulse, steps_per_period)
    coarse = evaluate(n)
    for _ in range(max_refinements + 1):
        n *= 2
        fine = evaluate(n)
        change = abs(fine[1] - coarse[1])
        if change <= step_tol:
            break
        coarse = fine

    warnings: List[str] = []
    message = selectivity_warning(params, drive_amplitude, selectivity_ratio)
    if message:
        warnings.append(message)
    converged = change <= step_tol
    if not converged:
        warnings.append(f"fidelity moved by {change:.3g} on the last step doubling "
                        f"(step_tol {step_tol:g}, {n} steps)")
    for w in warnings:
        logger.warning(w)

    u_rot, fidelity, worst, phases = fine
    return SelectivePulseReport(params, pulse, control_value, fidelity, worst, phases,
                                n, change, converged, tuple(warnings), u_rot)


def amplitude_sweep(params: SpinPairParams, amplitudes: Sequence[float],
                    **kwargs) -> List[SelectivePulseReport]:
    """One validation report per drive amplitude, in the given order"""
    return [validate_selective_pulse(params, a, **kwargs) for a in amplitudes]


def pulse_gate(params: SpinPairParams, drive_amplitude: float, target_spin: int = 1,
               control_value: int = UP, phase: float = 0.0,
               steps_per_period: int = STEPS_PER_PERIOD) -> UnitaryOperator:
    """Rotating-frame propagator of a selective pi pulse, on (spin 0, spin 1)"""
    pulse = pi_pulse(params, drive_amplitude, target_spin, control_value, phase=phase)
    u_lab = propagate(params, pulse, steps_per_period=steps_per_period)
    return rotating_frame(params, u_lab, pulse.duration)


def pulse_realized_protocol(p: Protocol, params: SpinPairParams, drive_amplitude: float,
                            steps_per_period: int = STEPS_PER_PERIOD) -> Protocol:
    """
    ``p`` with every conditional flip replaced by its simulated pi pulse.

    The lower factor of each flipped pair plays spin 0 (omega), the higher
    one spin 1 (omega'). Successive pulses alternate drive phase 0 / pi so
    the -i of one flip is undone by the +i of the next.
    """
    phases = itertools.cycle((0.0, np.pi))
    gates: Dict[Tuple[int, int, float], UnitaryOperator] = {}

    def convert(steps):
        out = []
        for step in steps:
            if isinstance(step, ConditionalFlipStep):
                low, high = sorted((step.control, step.target))
                target_spin = 0 if step.target == low else 1
                key = (target_spin, step.control_value, next(phases))
                if key not in gates:
                    gates[key] = pulse_gate(params, drive_amplitude, target_spin,
                                            step.control_value, key[2], steps_per_period)
                out.append(UnitaryStep(gates[key], (low, high), f"pulse {describe_step(step)}"))
            elif isinstance(step, BranchStep):
                cases = {k: tuple(convert(v)) for k, v in step.cases.items()}
                out.append(BranchStep(step.record_key, cases, step.label))
            else:
                out.append(step)
        return out

    logger.debug("realizing '%s' with pulses of %.4g Hz", p.label, drive_amplitude / (2 * np.pi))
    return Protocol(p.space, tuple(convert(p.steps)), f"{p.label} (pulses)", p.prepare)
