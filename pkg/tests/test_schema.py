"""Tests for storage.schema"""

import io
import json
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from protocols.builtins import builtin_quantum_controller, builtin_semiclassical_flip, driven_spin_system
from protocols.control_protocols import BranchStep, ConditionalFlipStep, MeasureStep, UnitaryStep
from quantum_core.errors import ProtocolError, SchemaError
from quantum_core.operator_algebra import pauli
from storage.schema import (
    load_json,
    matrix_from_json,
    matrix_to_json,
    protocol_from_json,
    protocol_to_json,
    report_text,
    state_from_json,
    system_from_json,
    system_to_json,
    write_report,
)

SIGMA_Z = {"dim_rows": 2, "dim_cols": 2, "entries": [[1, 0], [0, 0], [0, 0], [-1, 0]]}


class TestMatrices:

    def test_entries_are_row_major(self):
        m = matrix_from_json({"dim_rows": 2, "dim_cols": 2, "entries": [1, [0, 2], 3, 4]})
        assert_allclose(m, [[1, 2j], [3, 4]])

    def test_to_json_layout(self):
        data = matrix_to_json(pauli('y'))
        assert data['dim_rows'] == 2
        assert data['entries'][1] == [0.0, -1.0]

    def test_entry_count_checked(self):
        with pytest.raises(SchemaError) as info:
            matrix_from_json({"dim_rows": 2, "dim_cols": 2, "entries": [1, 2, 3]}, "drift")
        assert info.value.field == "drift.entries"

    def test_missing_field_named(self):
        with pytest.raises(SchemaError) as info:
            matrix_from_json({"dim_rows": 2, "entries": []}, "controls[0]")
        assert info.value.field == "controls[0].dim_cols"

    def test_bad_complex_pair(self):
        with pytest.raises(SchemaError) as info:
            matrix_from_json({"dim_rows": 1, "dim_cols": 1, "entries": [[1, 2, 3]]}, "m")
        assert info.value.field == "m.entries[0]"


class TestSystems:

    def test_example_file(self, examples_dir):
        system = system_from_json(load_json(os.path.join(examples_dir, "spin_system.json")))
        assert system.dim == 2
        assert len(system.controls) == 1
        assert len(system.couplings) == 1

    def test_non_hermitian_names_field(self):
        data = {"dim": 2, "drift": SIGMA_Z,
                "controls": [{"dim_rows": 2, "dim_cols": 2, "entries": [0, 1, 0, 0]}]}
        with pytest.raises(SchemaError) as info:
            system_from_json(data)
        assert info.value.field == "controls[0]"
        assert info.value.exit_code == 2

    def test_dimension_mismatch_reported_as_schema_error(self):
        data = {"dim": 3, "drift": SIGMA_Z}
        with pytest.raises(SchemaError):
            system_from_json(data)

    def test_written_system_reads_back(self):
        original = driven_spin_system()
        restored = system_from_json(json.loads(json.dumps(system_to_json(original))))
        assert restored.label == original.label
        assert_allclose(restored.drift.matrix, original.drift.matrix)
        assert_allclose(restored.couplings[0].controller.matrix, pauli('z').matrix)


class TestStates:

    def test_pure_state_normalized(self):
        state = state_from_json({"dims": [2], "pure": [3, 4]})
        assert_allclose(state.pure_amplitudes, [0.6, 0.8])

    def test_mixed_state(self):
        rho = {"dim_rows": 2, "dim_cols": 2, "entries": [0.5, 0, 0, 0.5]}
        assert not state_from_json({"dims": [2], "rho": rho}).is_pure

    def test_needs_pure_or_rho(self):
        with pytest.raises(SchemaError):
            state_from_json({"dims": [2]})

    def test_dims_at_least_two(self):
        with pytest.raises(SchemaError) as info:
            state_from_json({"dims": [2, 1], "pure": [1, 0]})
        assert info.value.field == "dims[1]"

    def test_wrong_length(self):
        with pytest.raises(SchemaError) as info:
            state_from_json({"dims": [2, 2], "pure": [1, 0]})
        assert info.value.field == "pure"

    def test_example_two_spin_state(self, examples_dir):
        state = state_from_json(load_json(os.path.join(examples_dir, "two_spin_state_06_08.json")))
        assert state.dims == (2, 2)
        assert_allclose(state.pure_amplitudes, [0, 0.6, 0, 0.8])


class TestProtocols:

    def test_semiclassical_file(self, examples_dir):
        p = protocol_from_json(load_json(os.path.join(examples_dir, "semiclassical_flip.json")))
        measure, branch = p.steps
        assert isinstance(measure, MeasureStep)
        assert isinstance(branch, BranchStep)
        (pulse,) = branch.cases[0]
        assert isinstance(pulse, UnitaryStep)
        assert_allclose(pulse.u.matrix, -1j * pauli('x').matrix)

    def test_controller_file(self, examples_dir):
        p = protocol_from_json(load_json(os.path.join(examples_dir, "quantum_controller.json")))
        assert all(isinstance(s, ConditionalFlipStep) for s in p.steps)
        assert p.prepare == {1: (0j, 1 + 0j)}

    @pytest.mark.parametrize("build", [builtin_semiclassical_flip, builtin_quantum_controller])
    def test_builtins_survive_json(self, build):
        original = build()
        restored = protocol_from_json(json.loads(json.dumps(protocol_to_json(original))))
        assert [s.step_type for s in restored.steps] == [s.step_type for s in original.steps]
        assert restored.label == original.label

    def test_unknown_step_type(self):
        with pytest.raises(SchemaError) as info:
            protocol_from_json({"dims": [2], "steps": [{"type": "teleport"}]})
        assert info.value.field == "steps[0].type"

    def test_bad_case_key(self):
        data = {"dims": [2], "steps": [
            {"type": "measure", "observable": SIGMA_Z, "targets": [0], "record_key": "sz"},
            {"type": "branch", "record_key": "sz", "cases": {"up": []}},
        ]}
        with pytest.raises(SchemaError) as info:
            protocol_from_json(data)
        assert info.value.field == "steps[1].cases.up"

    def test_branch_without_measurement(self):
        data = {"dims": [2], "steps": [{"type": "branch", "record_key": "sz", "cases": {"0": []}}]}
        with pytest.raises(ProtocolError):
            protocol_from_json(data)

    def test_non_unitary_step(self):
        data = {"dims": [2], "steps": [{"type": "unitary", "targets": [0],
                                          "matrix": {"dim_rows": 2, "dim_cols": 2, "entries": [2, 0, 0, 2]}}]}
        with pytest.raises(SchemaError) as info:
            protocol_from_json(data)
        assert info.value.field == "steps[0].matrix"


class TestFiles:

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            load_json(tmp_path / "nope.json")

    def test_syntax_error_has_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "dim": 2,\n  "drift": \n}\n')
        with pytest.raises(SchemaError) as info:
            load_json(path)
        assert info.value.line == 4

    def test_report_text_is_stable(self):
        assert report_text({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'

    def test_report_rejects_nan(self):
        with pytest.raises(ValueError):
            report_text({"x": float("nan")})

    def test_write_report_to_file_and_stream(self, tmp_path):
        path = tmp_path / "out" / "report.json"
        text = write_report({"ok": True}, str(path))
        assert path.read_text() == text
        stream = io.StringIO()
        write_report({"ok": True}, stream=stream)
        assert stream.getvalue() == text

    def test_complex_entries_are_plain_floats(self):
        data = matrix_to_json(np.array([[1j]]))
        assert json.dumps(data) == '{"dim_rows": 1, "dim_cols": 1, "entries": [[0.0, 1.0]]}'
