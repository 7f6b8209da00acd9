"""
SpinLoop - Built-in Protocols
=============================
The worked spin examples, ready to run:

- semiclassical flip: measure sigma_z, pulse the spin down if it was up
- quantum controller: a second spin senses, actuates and releases the first
  through frequency-selective conditional flips; no measurement anywhere
- sensor reversal: the sensing flip applied twice, undoing the disturbance
- entanglement transfer: the controller protocol on spins 1 and 2 while
  spin 2 starts entangled with a third spin it never touches

Factor order is (system, controller[, partner]); basis index 0 is |up>.
"""

import numpy as np

from quantum_core.errors import ValidationError
from quantum_core.lie_controllability import ControlSystem, CouplingTerm
from quantum_core.operator_algebra import (
    HermitianOperator,
    TensorSpace,
    expm_hermitian,
    pauli,
)
from quantum_core.quantum_sim import QuantumState, make_pure

from .control_protocols import (
    BranchStep,
    ConditionalFlipStep,
    MeasureStep,
    Protocol,
    UnitaryStep,
)

UP, DOWN = 0, 1
SYSTEM, CONTROLLER, PARTNER = 0, 1, 2

# Spin pair used throughout the examples, rad/s
OMEGA = 2 * np.pi * 500.0
OMEGA_PRIME = 2 * np.pi * 300.0
GAMMA = 2 * np.pi * 20.0

_DOWN_AMPS = (0.0, 1.0)


def _spin(alpha: complex, beta: complex) -> np.ndarray:
    vec = np.array([alpha, beta], dtype=complex)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ValidationError("alpha and beta cannot both be zero")
    return vec / norm


def spin_state(alpha: complex, beta: complex) -> QuantumState:
    """alpha|up> + beta|down>, normalized"""
    return make_pure(TensorSpace((2,)), _spin(alpha, beta))


def _sensing(control_factor: int = SYSTEM, target_factor: int = CONTROLLER) -> ConditionalFlipStep:
    return ConditionalFlipStep(control_factor, UP, target_factor,
                               "sense: flip controller iff system up (omega' + gamma)")


def _actuating() -> ConditionalFlipStep:
    return ConditionalFlipStep(CONTROLLER, UP, SYSTEM,
                               "actuate: flip system iff controller up (omega + gamma)")


def _release() -> ConditionalFlipStep:
    return ConditionalFlipStep(SYSTEM, UP, CONTROLLER,
                               "release: flip controller iff system up (omega' + gamma)")


def builtin_semiclassical_flip() -> Protocol:
    """Measure sigma_z; on 'up' apply a pi pulse about x, on 'down' do nothing"""
    sigma_x = pauli('x')
    pi_pulse = expm_hermitian(sigma_x, np.pi / 2)
    steps = (
        MeasureStep(pauli('z'), (SYSTEM,), "sz", "measure sigma_z"),
        BranchStep("sz", {UP: (UnitaryStep(pi_pulse, (SYSTEM,), "pi pulse about x"),)}),
    )
    return Protocol(TensorSpace((2,)), steps, "semiclassical flip")


def builtin_quantum_controller() -> Protocol:
    """
    Coherent feedback with a spin controller prepared in |down>.
    The three flips together exchange system and controller, so any
    controller input state ends up on the system and vice versa.
    """
    steps = (_sensing(), _actuating(), _release())
    return Protocol(TensorSpace((2, 2)), steps, "quantum controller",
                    prepare={CONTROLLER: _DOWN_AMPS})


def builtin_sensor_reversal() -> Protocol:
    """Sensing flip twice: the joint state returns to where it started"""
    return Protocol(TensorSpace((2, 2)), (_sensing(), _sensing()), "sensor reversal",
                    prepare={CONTROLLER: _DOWN_AMPS})


def builtin_entanglement_transfer() -> Protocol:
    """Quantum controller on factors (0, 1); factor 2 is never acted on"""
    steps = builtin_quantum_controller().steps
    return Protocol(TensorSpace((2, 2, 2)), steps, "entanglement transfer")


# States of the examples

def two_spin_initial(alpha: complex, beta: complex) -> QuantumState:
    """(alpha|up> + beta|down>) x |down>'"""
    return make_pure(TensorSpace((2, 2)), np.kron(_spin(alpha, beta), _DOWN_AMPS))


def two_spin_intermediate(alpha: complex, beta: complex) -> QuantumState:
    """alpha|up up'> + beta|down down'>, the state after sensing"""
    a, b = _spin(alpha, beta)
    return make_pure(TensorSpace((2, 2)), [a, 0.0, 0.0, b])


def two_spin_target(alpha: complex, beta: complex) -> QuantumState:
    """|down> x (alpha|up>' + beta|down>')"""
    return make_pure(TensorSpace((2, 2)), np.kron(_DOWN_AMPS, _spin(alpha, beta)))


def _bell() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2)


def three_spin_initial(alpha: complex, beta: complex) -> QuantumState:
    """(alpha|up> + beta|down>) x (|up' up''> + |down' down''>)/sqrt(2)"""
    return make_pure(TensorSpace((2, 2, 2)), np.kron(_spin(alpha, beta), _bell()))


def three_spin_target(alpha: complex, beta: complex) -> QuantumState:
    """(|up up''> + |down down''>)/sqrt(2) x (alpha|up'> + beta|down'>)"""
    spin = _spin(alpha, beta)
    psi = np.zeros((2, 2, 2), dtype=complex)
    for k in (UP, DOWN):
        psi[k, :, k] = spin / np.sqrt(2)
    return make_pure(TensorSpace((2, 2, 2)), psi.reshape(-1))


# Control systems of the examples

def driven_spin_system() -> ControlSystem:
    """
    One spin in a static field along z, a transverse drive along x, a
    sigma_z measurement and a sigma_z x sigma_z' coupling to a second spin.
    """
    sz, sx = pauli('z'), pauli('x')
    return ControlSystem(
        dim=2,
        drift=HermitianOperator(0.5 * OMEGA * sz.matrix, "H = (omega/2) sigma_z"),
        controls=(sx,),
        measurements=(sz,),
        couplings=(CouplingTerm(sz, pauli('z')),),
        label="driven spin with measurement and spin coupling",
    )


def coupled_spin_system() -> ControlSystem:
    """
    Spin 1 seen as the system, spin 2 as its controller: no measurement,
    only the scalar coupling gamma sigma_z sigma_z' and a transverse drive.
    """
    sz = pauli('z')
    return ControlSystem(
        dim=2,
        drift=HermitianOperator(0.5 * OMEGA * sz.matrix, "H = (omega/2) sigma_z"),
        controls=(pauli('x'),),
        couplings=(CouplingTerm(HermitianOperator(0.5 * GAMMA * sz.matrix, "gamma/2 sigma_z"), pauli('z')),),
        label="spin coupled to a spin controller",
    )
