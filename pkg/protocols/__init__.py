# SpinLoop - Protocols Module
# Feedback protocols as step scripts, their executors,
# the state-transfer check and the built-in spin examples

from .control_protocols import Protocol, ProtocolRunner, TrajectoryResult, verify_state_transfer

__all__ = ['Protocol', 'ProtocolRunner', 'TrajectoryResult', 'verify_state_transfer']
