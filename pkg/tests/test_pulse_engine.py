"""Tests for pulses.pulse_engine"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from protocols.builtins import DOWN, UP, builtin_quantum_controller, two_spin_initial, two_spin_target
from protocols.control_protocols import ConditionalFlipStep, run_enumerate
from pulses.pulse_engine import (
    PulseSpec,
    SpinPairParams,
    amplitude_sweep,
    default_steps,
    drift_hamiltonian,
    lab_hamiltonian,
    pi_pulse,
    propagate,
    propagate_checked,
    pulse_realized_protocol,
    resonant_carrier,
    rotating_frame,
    selectivity_warning,
    validate_selective_pulse,
)
from quantum_core.errors import ValidationError
from quantum_core.operator_algebra import expm_hermitian, is_unitary, max_norm, pauli
from quantum_core.quantum_sim import fidelity

TWO_PI = 2 * np.pi
PARAMS = SpinPairParams.from_hz(500.0, 300.0, 20.0)
Z, X, I2 = pauli('z').matrix, pauli('x').matrix, np.eye(2)


def _short_pulse(amplitude_hz=5.0, duration=0.002, phase=0.0):
    return PulseSpec(resonant_carrier(PARAMS), TWO_PI * amplitude_hz, phase, duration)


class TestParameters:

    def test_from_hz(self):
        assert PARAMS.omega == pytest.approx(TWO_PI * 500)
        assert PARAMS.frequency(1) == pytest.approx(TWO_PI * 300)

    def test_equal_frequencies_rejected(self):
        with pytest.raises(ValidationError):
            SpinPairParams(1.0, 1.0, 0.1)

    def test_zero_coupling_rejected(self):
        with pytest.raises(ValidationError):
            SpinPairParams(2.0, 1.0, 0.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            SpinPairParams(np.inf, 1.0, 0.1)

    @pytest.mark.parametrize("amplitude, duration", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
    def test_bad_pulse_rejected(self, amplitude, duration):
        with pytest.raises(ValidationError):
            PulseSpec(1.0, amplitude, 0.0, duration)

    def test_resonant_carriers(self):
        assert resonant_carrier(PARAMS, 1, UP) == pytest.approx(TWO_PI * 320)
        assert resonant_carrier(PARAMS, 1, DOWN) == pytest.approx(TWO_PI * 280)
        assert resonant_carrier(PARAMS, 0, UP) == pytest.approx(TWO_PI * 520)

    def test_pi_pulse_duration(self):
        pulse = pi_pulse(PARAMS, TWO_PI * 0.5)
        assert pulse.duration == pytest.approx(1.0)
        assert pulse.target_spin == 1

    def test_default_steps_resolve_fastest_period(self):
        pulse = _short_pulse()
        fastest = TWO_PI * (520 + 5)
        assert default_steps(PARAMS, pulse) >= 40 * pulse.duration * fastest / TWO_PI


class TestHamiltonian:

    def test_drift_is_diagonal(self):
        h = drift_hamiltonian(PARAMS).matrix
        w, wp, g = PARAMS.omega, PARAMS.omega_prime, PARAMS.gamma
        expected = 0.5 * np.array([w + wp + g, w - wp - g, -w + wp - g, -w - wp + g])
        assert_allclose(h, np.diag(expected))

    def test_drive_at_time_zero(self):
        pulse = _short_pulse()
        h = lab_hamiltonian(PARAMS, pulse, 0.0).matrix - drift_hamiltonian(PARAMS).matrix
        assert_allclose(h, pulse.amplitude * np.kron(I2, X), atol=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_term_by_term_expansion(self, seed):
        rng = np.random.default_rng(seed)
        params = SpinPairParams(*rng.uniform(1, 100, size=3))
        pulse = PulseSpec(rng.uniform(1, 100), rng.uniform(0.1, 5), rng.uniform(0, TWO_PI), 1.0, target_spin=0)
        t = rng.uniform(0, 10)
        expected = (0.5 * params.omega * np.kron(Z, I2)
                    + 0.5 * params.omega_prime * np.kron(I2, Z)
                    + 0.5 * params.gamma * np.kron(Z, Z)
                    + pulse.amplitude * np.cos(pulse.carrier * t + pulse.phase) * np.kron(X, I2))
        assert_allclose(lab_hamiltonian(params, pulse, t).matrix, expected, atol=1e-9)


class TestPropagation:

    def test_negligible_drive_is_free_evolution(self):
        pulse = PulseSpec(resonant_carrier(PARAMS), 1e-12, 0.0, 0.01)
        u = propagate(PARAMS, pulse)
        assert_allclose(u.matrix, expm_hermitian(drift_hamiltonian(PARAMS), 0.01).matrix, atol=1e-9)
        assert_allclose(rotating_frame(PARAMS, u, 0.01).matrix, np.eye(4), atol=1e-9)

    @pytest.mark.parametrize("n_steps", [1, 7, 100, 9000])
    def test_unitary(self, n_steps):
        u = propagate(PARAMS, _short_pulse(), n_steps)
        assert is_unitary(u.matrix, 1e-8)

    def test_bad_step_count(self):
        with pytest.raises(ValidationError):
            propagate(PARAMS, _short_pulse(), 0)

    def test_second_order_convergence(self):
        """Halving the step cuts the error against a fine reference by about four"""
        pulse = _short_pulse(duration=0.0013)
        reference = propagate(PARAMS, pulse, 512).matrix
        coarse = max_norm(propagate(PARAMS, pulse, 64).matrix - reference)
        fine = max_norm(propagate(PARAMS, pulse, 128).matrix - reference)
        assert 3.0 < coarse / fine < 5.0

    def test_halves_compose(self):
        full = _short_pulse(duration=0.004)
        first = _short_pulse(duration=0.002)
        u_full = propagate(PARAMS, full, 400).matrix
        u_first = propagate(PARAMS, first, 200, t0=0.0).matrix
        u_second = propagate(PARAMS, first, 200, t0=0.002).matrix
        assert max_norm(u_second @ u_first - u_full) <= 1e-5

    def test_chunked_product_matches_single_chunk(self):
        """More steps than one chunk still multiply in time order"""
        pulse = _short_pulse(duration=0.05)
        u = propagate(PARAMS, pulse, 10000).matrix
        half = _short_pulse(duration=0.025)
        u_halves = propagate(PARAMS, half, 5000, t0=0.025).matrix @ propagate(PARAMS, half, 5000).matrix
        assert max_norm(u - u_halves) <= 1e-9

    def test_checked_propagation_converges_with_loose_tolerance(self):
        result = propagate_checked(PARAMS, _short_pulse(), step_tol=1e-2)
        assert result.converged
        assert result.change <= 1e-2
        assert result.steps_used == 2 * default_steps(PARAMS, _short_pulse())

    def test_checked_propagation_reports_non_convergence(self):
        result = propagate_checked(PARAMS, _short_pulse(), n_steps=8, step_tol=1e-15, max_refinements=0)
        assert not result.converged
        assert result.steps_used == 16


class TestSelectivePulse:

    def test_weak_pulse_is_a_conditional_flip(self):
        report = validate_selective_pulse(PARAMS, TWO_PI * 0.5)
        assert report.fidelity >= 0.99
        assert report.worst_case_fidelity >= 0.98
        assert not any("not frequency selective" in w for w in report.warnings)
        assert len(report.phases) == 4

    def test_strong_pulse_degrades_with_warning(self):
        report = validate_selective_pulse(PARAMS, TWO_PI * 40)
        assert report.fidelity < 0.99
        assert any("not frequency selective" in w for w in report.warnings)

    def test_lower_line_flips_on_control_down(self):
        report = validate_selective_pulse(PARAMS, TWO_PI * 0.5, control_value=DOWN)
        assert report.pulse.carrier == pytest.approx(TWO_PI * 280)
        assert report.fidelity >= 0.99

    def test_lower_line_does_not_flip_on_control_up(self):
        carrier = PARAMS.omega_prime - PARAMS.gamma
        report = validate_selective_pulse(PARAMS, TWO_PI * 0.5, carrier=carrier, control_value=UP)
        assert report.fidelity < 0.1

    def test_fidelity_rises_as_drive_weakens(self):
        amplitudes = [TWO_PI * hz for hz in (8.0, 4.0, 2.0, 1.0, 0.5)]
        fidelities = [r.fidelity for r in amplitude_sweep(PARAMS, amplitudes)]
        for weaker, stronger in zip(fidelities[1:], fidelities[:-1]):
            assert weaker >= stronger - 1e-3

    def test_selectivity_warning_threshold(self):
        assert selectivity_warning(PARAMS, TWO_PI * 0.5) is None
        assert selectivity_warning(PARAMS, TWO_PI * 4.1) is not None

    def test_report_dict(self):
        data = validate_selective_pulse(PARAMS, TWO_PI * 2.0).to_dict()
        assert data['control_value'] == 'up'
        assert data['pulse']['carrier_hz'] == pytest.approx(320.0)
        assert data['params']['gamma_hz'] == pytest.approx(20.0)
        assert set(data) >= {'fidelity', 'worst_case_fidelity', 'phases', 'steps_used', 'warnings', 'conventions'}


class TestPulseRealizedProtocol:

    def test_flips_become_unitaries(self):
        realized = pulse_realized_protocol(builtin_quantum_controller(), PARAMS, TWO_PI * 0.5)
        assert not any(isinstance(step, ConditionalFlipStep) for step in realized.steps)
        assert len(realized.steps) == 3
        assert realized.prepare == builtin_quantum_controller().prepare

    def test_controller_reproduces_target(self):
        realized = pulse_realized_protocol(builtin_quantum_controller(), PARAMS, TWO_PI * 0.5)
        (result,) = run_enumerate(two_spin_initial(0.6, 0.8), realized)
        assert fidelity(result.final_state, two_spin_target(0.6, 0.8)) >= 0.98
