# SpinLoop - Pulses Module
# Lab-frame two-spin simulation and selective pi pulse validation

from .pulse_engine import SpinPairParams, PulseSpec, validate_selective_pulse

__all__ = ['SpinPairParams', 'PulseSpec', 'validate_selective_pulse']
