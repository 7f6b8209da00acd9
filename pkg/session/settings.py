"""
SpinLoop - Settings
===================
Tolerances, executor limits and pulse defaults.

Loaded from config/defaults.json; anything missing falls back to the
built-in defaults below, and --tol.<name>=<value> overrides win last.
"""

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional

from quantum_core.errors import SchemaError
from storage.schema import load_json

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "config" / "defaults.json"
SECTIONS = ("tolerances", "executor", "pulse")


@dataclass
class Tolerances:
    """Numeric tolerances shared by every module"""
    herm_tol: float = 1e-10
    unit_tol: float = 1e-10
    closure_tol: float = 1e-9
    nontrivial_tol: float = 1e-9
    eig_cluster_tol: float = 1e-8
    prob_floor: float = 1e-12
    entropy_floor: float = 1e-12
    fidelity_tol: float = 1e-9
    step_tol: float = 1e-6

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def from_dict(data: dict) -> 'Tolerances':
        defaults = Tolerances()
        unknown = sorted(set(data) - set(defaults.to_dict()))
        if unknown:
            raise SchemaError(f"unknown tolerance '{unknown[0]}'", field=f"tolerances.{unknown[0]}")
        return Tolerances(**{k: _positive(v, f"tolerances.{k}") for k, v in {**defaults.to_dict(), **data}.items()})


@dataclass
class ExecutorSettings:
    """Protocol executor limits"""
    branch_cap: int = 4096
    workers: int = 1    # thread pool size for sampled trajectories

    def to_dict(self) -> dict:
        return {
            'branch_cap': self.branch_cap,
            'workers': self.workers
        }

    @staticmethod
    def from_dict(data: dict) -> 'ExecutorSettings':
        return ExecutorSettings(
            branch_cap=_count(data.get('branch_cap', 4096), "executor.branch_cap"),
            workers=_count(data.get('workers', 1), "executor.workers")
        )


@dataclass
class PulseSettings:
    """Spin pair and integrator defaults for pulse validation (frequencies in Hz)"""
    omega_hz: float = 500.0
    omega_prime_hz: float = 300.0
    gamma_hz: float = 20.0
    drive_hz: float = 0.5
    steps_per_period: int = 40
    max_refinements: int = 1
    selectivity_ratio: float = 0.1
    sweep_drive_hz: List[float] = field(default_factory=lambda: [8.0, 4.0, 2.0, 1.0, 0.5])
    pass_fidelity: float = 0.99

    def to_dict(self) -> dict:
        return {
            'omega_hz': self.omega_hz,
            'omega_prime_hz': self.omega_prime_hz,
            'gamma_hz': self.gamma_hz,
            'drive_hz': self.drive_hz,
            'steps_per_period': self.steps_per_period,
            'max_refinements': self.max_refinements,
            'selectivity_ratio': self.selectivity_ratio,
            'sweep_drive_hz': list(self.sweep_drive_hz),
            'pass_fidelity': self.pass_fidelity
        }

    @staticmethod
    def from_dict(data: dict) -> 'PulseSettings':
        sweep = data.get('sweep_drive_hz', [8.0, 4.0, 2.0, 1.0, 0.5])
        if not isinstance(sweep, list):
            raise SchemaError("pulse.sweep_drive_hz must be a list", field="pulse.sweep_drive_hz")
        return PulseSettings(
            omega_hz=_finite(data.get('omega_hz', 500.0), "pulse.omega_hz"),
            omega_prime_hz=_finite(data.get('omega_prime_hz', 300.0), "pulse.omega_prime_hz"),
            gamma_hz=_finite(data.get('gamma_hz', 20.0), "pulse.gamma_hz"),
            drive_hz=_positive(data.get('drive_hz', 0.5), "pulse.drive_hz"),
            steps_per_period=_count(data.get('steps_per_period', 40), "pulse.steps_per_period"),
            max_refinements=_count(data.get('max_refinements', 1), "pulse.max_refinements", minimum=0),
            selectivity_ratio=_positive(data.get('selectivity_ratio', 0.1), "pulse.selectivity_ratio"),
            sweep_drive_hz=[_positive(x, f"pulse.sweep_drive_hz[{i}]") for i, x in enumerate(sweep)],
            pass_fidelity=_positive(data.get('pass_fidelity', 0.99), "pulse.pass_fidelity")
        )


@dataclass
class Settings:
    """Everything a run depends on besides its inputs and seed"""
    tolerances: Tolerances = field(default_factory=Tolerances)
    executor: ExecutorSettings = field(default_factory=ExecutorSettings)
    pulse: PulseSettings = field(default_factory=PulseSettings)

    def to_dict(self) -> dict:
        return {
            'tolerances': self.tolerances.to_dict(),
            'executor': self.executor.to_dict(),
            'pulse': self.pulse.to_dict()
        }

    @staticmethod
    def from_dict(data: dict) -> 'Settings':
        return Settings(
            tolerances=Tolerances.from_dict(data.get('tolerances', {})),
            executor=ExecutorSettings.from_dict(data.get('executor', {})),
            pulse=PulseSettings.from_dict(data.get('pulse', {}))
        )


def _finite(value, name: str) -> float:
    if isinstance(value, bool):
        raise SchemaError(f"{name} must be a number, got {value!r}", field=name)
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"{name} must be a number, got {value!r}", field=name)
    if not math.isfinite(number):
        raise SchemaError(f"{name} must be finite, got {value!r}", field=name)
    return number


def _positive(value, name: str) -> float:
    number = _finite(value, name)
    if not number > 0:
        raise SchemaError(f"{name} must be > 0, got {number}", field=name)
    return number


def _count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise SchemaError(f"{name} must be an integer, got {value!r}", field=name)
    try:
        number = int(value)
    except (ValueError, OverflowError):
        raise SchemaError(f"{name} must be an integer, got {value!r}", field=name)
    if number != float(value) or number < minimum:
        raise SchemaError(f"{name} must be an integer >= {minimum}, got {value!r}", field=name)
    return number


def parse_overrides(pairs: List[str]) -> Dict[str, float]:
    """'name=value' strings (from --tol.name=value) into a tolerance map"""
    overrides = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise SchemaError(f"tolerance override '{pair}' is not name=value", field=f"tolerances.{name}")
        overrides[name.strip()] = _positive(value, f"tolerances.{name.strip()}")
    return overrides


def load_settings(path: Optional[str] = None,
                  overrides: Optional[Dict[str, float]] = None) -> Settings:
    """
    Settings from a JSON file (config/defaults.json when ``path`` is None;
    built-in defaults when that file does not exist), then tolerance overrides.

    Raises:
        SchemaError: unreadable file, bad value or unknown tolerance name
    """
    config_path = Path(path) if path else DEFAULT_CONFIG
    data = {}
    if path or config_path.exists():
        data = load_json(config_path)
    if not isinstance(data, dict) or not all(isinstance(data.get(k, {}), dict) for k in SECTIONS):
        raise SchemaError(f"{config_path}: settings must be an object of {', '.join(SECTIONS)} objects")

    settings = Settings.from_dict(data)
    if overrides:
        merged = {**settings.tolerances.to_dict(), **overrides}
        settings.tolerances = Tolerances.from_dict(merged)
    return settings
