"""
SpinLoop - JSON Schemas
=======================
Reading and writing every file SpinLoop exchanges:

- matrix:   {"dim_rows": n, "dim_cols": m, "entries": [[re, im], ...]}  (row-major)
- state:    {"dims": [..], "pure": [[re, im], ...]} or {"dims": [..], "rho": <matrix>}
- system:   {"dim": N, "drift": <matrix>, "controls": [..], "measurements": [..],
             "couplings": [{"system": <matrix>, "controller": <matrix>}, ..]}
- protocol: {"dims": [..], "label": s, "steps": [..], "prepare": {"<factor>": [..]}}
- reports:  JSON with sorted keys and two-space indent, so identical runs
            produce identical bytes

Every violation raises SchemaError naming the offending field.
"""

import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, TextIO

import numpy as np

from quantum_core.errors import DimensionError, SchemaError, ValidationError
from quantum_core.lie_controllability import ControlSystem, CouplingTerm
from quantum_core.operator_algebra import (
    HERM_TOL,
    UNIT_TOL,
    HermitianOperator,
    TensorSpace,
    UnitaryOperator,
)
from quantum_core.quantum_sim import QuantumState, make_mixed, make_pure
from protocols.control_protocols import (
    BranchStep,
    ConditionalFlipStep,
    EvolveStep,
    MeasureStep,
    Protocol,
    StepType,
    UnitaryStep,
)

SCHEMA_VERSION = "1"


# Primitive fields

def _require(data: dict, key: str, path: str) -> Any:
    if not isinstance(data, dict):
        raise SchemaError("expected a JSON object", field=path)
    if key not in data:
        raise SchemaError(f"missing field '{key}'", field=_join(path, key))
    return data[key]


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _int(value, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"expected an integer, got {value!r}", field=path)
    if minimum is not None and value < minimum:
        raise SchemaError(f"must be >= {minimum}, got {value}", field=path)
    return value


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {value!r}", field=path)
    return float(value)


def _complex(value, path: str) -> complex:
    """[re, im] pair, or a bare real number"""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise SchemaError(f"complex entries are [re, im], got {value!r}", field=path)
        return complex(_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))
    return complex(_number(value, path))


def _list(value, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(f"expected a list, got {type(value).__name__}", field=path)
    return value


def _complex_list(value, path: str) -> np.ndarray:
    return np.array([_complex(z, f"{path}[{i}]") for i, z in enumerate(_list(value, path))], dtype=complex)


def _pair(z: complex) -> List[float]:
    return [float(np.real(z)), float(np.imag(z))]


# Matrices and operators

def matrix_to_json(m) -> dict:
    arr = np.asarray(getattr(m, "matrix", m), dtype=complex)
    return {
        'dim_rows': int(arr.shape[0]),
        'dim_cols': int(arr.shape[1]),
        'entries': [_pair(z) for z in arr.reshape(-1)],
    }


def matrix_from_json(data, path: str = "matrix") -> np.ndarray:
    rows = _int(_require(data, 'dim_rows', path), _join(path, 'dim_rows'), 1)
    cols = _int(_require(data, 'dim_cols', path), _join(path, 'dim_cols'), 1)
    entries = _complex_list(_require(data, 'entries', path), _join(path, 'entries'))
    if entries.size != rows * cols:
        raise SchemaError(f"{entries.size} entries for a {rows}x{cols} matrix", field=_join(path, 'entries'))
    return entries.reshape(rows, cols)


def _validated(build, path: str):
    """Run a constructor, reporting invariant violations against ``path``"""
    try:
        return build()
    except (ValidationError, DimensionError) as e:
        raise SchemaError(str(e), field=path) from e


def hermitian_from_json(data, path: str, label: str = "", tol: float = HERM_TOL) -> HermitianOperator:
    arr = matrix_from_json(data, path)
    return _validated(lambda: HermitianOperator(arr, data.get('label', label) or label, tol=tol), path)


def unitary_from_json(data, path: str, label: str = "", tol: float = UNIT_TOL) -> UnitaryOperator:
    arr = matrix_from_json(data, path)
    return _validated(lambda: UnitaryOperator(arr, data.get('label', label) or label, tol=tol), path)


def _operator_to_json(op) -> dict:
    data = matrix_to_json(op)
    if getattr(op, "label", ""):
        data['label'] = op.label
    return data


# States

def _space_from_json(value, path: str) -> TensorSpace:
    dims = [_int(d, f"{path}[{i}]", 2) for i, d in enumerate(_list(value, path))]
    if not dims:
        raise SchemaError("dims must not be empty", field=path)
    return TensorSpace(tuple(dims))


def state_from_json(data, path: str = "") -> QuantumState:
    space = _space_from_json(_require(data, 'dims', path), _join(path, 'dims'))
    if 'pure' in data:
        amps = _complex_list(data['pure'], _join(path, 'pure'))
        return _validated(lambda: make_pure(space, amps), _join(path, 'pure'))
    if 'rho' in data:
        rho = matrix_from_json(data['rho'], _join(path, 'rho'))
        return _validated(lambda: make_mixed(space, rho), _join(path, 'rho'))
    raise SchemaError("state needs 'pure' or 'rho'", field=path or "state")


# Control systems

def system_to_json(sys_: ControlSystem) -> dict:
    return {
        'dim': sys_.dim,
        'label': sys_.label,
        'drift': _operator_to_json(sys_.drift),
        'controls': [_operator_to_json(op) for op in sys_.controls],
        'measurements': [_operator_to_json(op) for op in sys_.measurements],
        'couplings': [
            {'system': _operator_to_json(c.system), 'controller': _operator_to_json(c.controller)}
            for c in sys_.couplings
        ],
    }


def system_from_json(data, herm_tol: float = HERM_TOL) -> ControlSystem:
    dim = _int(_require(data, 'dim', ""), 'dim', 2)
    drift = hermitian_from_json(_require(data, 'drift', ""), 'drift', "H", herm_tol)

    def ops(key: str, stem: str):
        return tuple(
            hermitian_from_json(m, f"{key}[{i}]", f"{stem}{i}", herm_tol)
            for i, m in enumerate(_list(data.get(key, []), key))
        )

    couplings = []
    for i, c in enumerate(_list(data.get('couplings', []), 'couplings')):
        path = f"couplings[{i}]"
        couplings.append(CouplingTerm(
            hermitian_from_json(_require(c, 'system', path), f"{path}.system", f"O{i}", herm_tol),
            hermitian_from_json(_require(c, 'controller', path), f"{path}.controller", f"O'{i}", herm_tol),
        ))
    return _validated(
        lambda: ControlSystem(dim, drift, ops('controls', 'O'), ops('measurements', 'M'),
                              tuple(couplings), str(data.get('label', ""))),
        "",
    )


# Protocols

def _targets(value, path: str) -> tuple:
    return tuple(_int(t, f"{path}[{i}]", 0) for i, t in enumerate(_list(value, path)))


def _step_to_json(step) -> dict:
    data = {'type': step.step_type.value}
    if isinstance(step, UnitaryStep):
        data.update(matrix=_operator_to_json(step.u), targets=list(step.targets))
    elif isinstance(step, ConditionalFlipStep):
        data.update(control=step.control, control_value=step.control_value, target=step.target)
    elif isinstance(step, MeasureStep):
        data.update(observable=_operator_to_json(step.observable), targets=list(step.targets),
                    record_key=step.record_key)
    elif isinstance(step, BranchStep):
        data.update(record_key=step.record_key,
                    cases={str(k): [_step_to_json(s) for s in v] for k, v in sorted(step.cases.items())})
    elif isinstance(step, EvolveStep):
        data.update(hamiltonian=_operator_to_json(step.hamiltonian), duration=step.duration)
        if step.targets is not None:
            data['targets'] = list(step.targets)
    if step.label:
        data['label'] = step.label
    return data


def _step_from_json(data, path: str, herm_tol: float, unit_tol: float):
    kind = _require(data, 'type', path)
    try:
        step_type = StepType(kind)
    except ValueError:
        raise SchemaError(f"unknown step type {kind!r}", field=_join(path, 'type'))
    label = str(data.get('label', ""))

    if step_type is StepType.UNITARY:
        u = unitary_from_json(_require(data, 'matrix', path), _join(path, 'matrix'), "U", unit_tol)
        return UnitaryStep(u, _targets(_require(data, 'targets', path), _join(path, 'targets')), label)
    if step_type is StepType.CFLIP:
        return ConditionalFlipStep(
            _int(_require(data, 'control', path), _join(path, 'control'), 0),
            _int(_require(data, 'control_value', path), _join(path, 'control_value'), 0),
            _int(_require(data, 'target', path), _join(path, 'target'), 0),
            label,
        )
    if step_type is StepType.MEASURE:
        obs = hermitian_from_json(_require(data, 'observable', path), _join(path, 'observable'), "M", herm_tol)
        key = _require(data, 'record_key', path)
        return MeasureStep(obs, _targets(_require(data, 'targets', path), _join(path, 'targets')), str(key), label)
    if step_type is StepType.BRANCH:
        raw_cases = _require(data, 'cases', path)
        if not isinstance(raw_cases, dict):
            raise SchemaError("cases must be an object keyed by outcome index", field=_join(path, 'cases'))
        cases = {}
        for key, steps in raw_cases.items():
            case_path = f"{path}.cases.{key}"
            try:
                index = int(key)
            except ValueError:
                raise SchemaError(f"case key {key!r} is not an outcome index", field=case_path)
            cases[index] = tuple(
                _step_from_json(s, f"{case_path}[{i}]", herm_tol, unit_tol)
                for i, s in enumerate(_list(steps, case_path))
            )
        return BranchStep(str(_require(data, 'record_key', path)), cases, label)

    h = hermitian_from_json(_require(data, 'hamiltonian', path), _join(path, 'hamiltonian'), "H", herm_tol)
    duration = _number(_require(data, 'duration', path), _join(path, 'duration'))
    targets = _targets(data['targets'], _join(path, 'targets')) if 'targets' in data else None
    return EvolveStep(h, duration, targets, label)


def protocol_to_json(p: Protocol) -> dict:
    data = {
        'dims': list(p.space.factor_dims),
        'label': p.label,
        'steps': [_step_to_json(s) for s in p.steps],
    }
    if p.prepare:
        data['prepare'] = {str(k): [_pair(z) for z in v] for k, v in sorted(p.prepare.items())}
    return data


def protocol_from_json(data, herm_tol: float = HERM_TOL, unit_tol: float = UNIT_TOL) -> Protocol:
    space = _space_from_json(_require(data, 'dims', ""), 'dims')
    steps = tuple(
        _step_from_json(s, f"steps[{i}]", herm_tol, unit_tol)
        for i, s in enumerate(_list(_require(data, 'steps', ""), 'steps'))
    )
    prepare = {}
    raw_prepare = data.get('prepare', {})
    if not isinstance(raw_prepare, dict):
        raise SchemaError("prepare must be an object keyed by factor index", field='prepare')
    for key, amps in raw_prepare.items():
        try:
            factor = int(key)
        except ValueError:
            raise SchemaError(f"prepare key {key!r} is not a factor index", field=f"prepare.{key}")
        prepare[factor] = tuple(_complex_list(amps, f"prepare.{key}"))
    return _validated(lambda: Protocol(space, steps, str(data.get('label', "")), prepare), "steps")


# Files

def load_json(path) -> Any:
    """
    Parse a JSON file.

    Raises:
        SchemaError: missing or unreadable file, text that is not UTF-8,
            or a syntax error (with its line number)
    """
    file_path = Path(path)
    if not file_path.exists():
        raise SchemaError(f"file not found: {file_path}")
    try:
        with open(file_path, 'r', encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{file_path}: {e.msg} at column {e.colno}", line=e.lineno) from e
    except UnicodeDecodeError as e:
        raise SchemaError(f"{file_path}: not UTF-8 text ({e.reason} at byte {e.start})") from e
    except OSError as e:
        raise SchemaError(f"cannot read {file_path}: {e.strerror or e}") from e


def report_text(obj: Dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(obj: Dict, path: Optional[str] = None, stream: TextIO = None) -> str:
    """Write a report to ``path``, or to ``stream`` (stdout) when no path is given"""
    text = report_text(obj)
    if path:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, 'w') as f:
            f.write(text)
    else:
        (stream or sys.stdout).write(text)
    return text
