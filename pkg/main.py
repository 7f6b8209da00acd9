"""
SpinLoop - Main Launcher
========================
Command-line tool for checking and simulating quantum feedback control of
small spin systems.

Commands:
- check:    the five controllability / observability verdicts of a system file
- simulate: run a protocol file on a state file (enumerated or sampled)
- examples: reproduce the built-in spin examples and report PASS / FAIL
- pulse:    validate the frequency-selective pi pulse behind a conditional flip

Usage:
    python main.py check data/examples/spin_system.json
    python main.py simulate data/examples/semiclassical_flip.json data/examples/state_06_08.json
    python main.py examples --alpha 0.6,0 --beta 0.8,0
    python main.py pulse --drive-hz 0.5
    python main.py check system.json --tol.closure_tol=1e-8 --out report.json

Reports are JSON (stdout or --out); a short summary goes to stderr.
Exit codes: 0 success, 1 a check failed, 2 bad input, 3 no convergence,
4 resource cap hit.
"""

import argparse
import logging
import os
import sys
import traceback
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from quantum_core.errors import SchemaError, SpinLoopError
from quantum_core.lie_controllability import all_verdicts
from quantum_core.operator_algebra import TensorSpace
from quantum_core.quantum_sim import (
    GENERATOR_NAME,
    basis_state,
    entanglement_entropy,
    fidelity,
    purity,
    reduced_state,
)
from protocols.builtins import (
    DOWN,
    UP,
    builtin_entanglement_transfer,
    builtin_quantum_controller,
    builtin_semiclassical_flip,
    builtin_sensor_reversal,
    spin_state,
    three_spin_initial,
    three_spin_target,
    two_spin_initial,
    two_spin_intermediate,
    two_spin_target,
)
from protocols.control_protocols import ProtocolRunner, step_support, verify_state_transfer
from pulses.pulse_engine import (
    SpinPairParams,
    amplitude_sweep,
    pulse_realized_protocol,
    validate_selective_pulse,
)
from session.run_log import RunLogger
from session.settings import Settings, load_settings, parse_overrides
from storage.schema import (
    SCHEMA_VERSION,
    load_json,
    protocol_from_json,
    state_from_json,
    system_from_json,
    write_report,
)

TWO_PI = 2 * np.pi


@dataclass
class CommandResult:
    """What a command produced: the JSON report, stderr summary and exit code"""
    report: Dict
    summary: List[str] = field(default_factory=list)
    exit_code: int = 0


class SpinLoop:
    """
    SpinLoop kernel.
    Holds the settings, seed and run log, and implements each command.
    """

    VERSION = "1.0.0"
    TITLE = "SpinLoop"

    def __init__(self, settings: Optional[Settings] = None, seed: int = 0,
                 logger: Optional[RunLogger] = None):
        self.settings = settings or Settings()
        self.seed = int(seed)
        self.logger = logger or RunLogger()
        self._init_components()
        self._log(f"{self.TITLE} v{self.VERSION} started (seed {self.seed})")

    def _init_components(self):
        """Build the executors from the settings"""
        tol = self.settings.tolerances
        self.runner = ProtocolRunner(
            branch_cap=self.settings.executor.branch_cap,
            workers=self.settings.executor.workers,
            eig_cluster_tol=tol.eig_cluster_tol,
            prob_floor=tol.prob_floor,
            logger=self.logger,
        )

    def _envelope(self, command: str) -> Dict:
        return {
            'schema_version': SCHEMA_VERSION,
            'spinloop_version': self.VERSION,
            'command': command,
            'seed': self.seed,
            'generator': GENERATOR_NAME,
            'settings': self.settings.to_dict(),
        }

    # check
    def cmd_check(self, system_path: str, max_generations: Optional[int] = None) -> CommandResult:
        """All five verdicts for a control system file"""
        tol = self.settings.tolerances
        system = system_from_json(load_json(system_path), tol.herm_tol)
        self._log(f"loaded system '{system.label}' (N={system.dim}) from {system_path}", "SCHEMA")

        verdicts = all_verdicts(system, tol.closure_tol, max_generations, tol.nontrivial_tol)
        summary = []
        for kind, verdict in verdicts.items():
            line = (f"{kind.value}: {str(verdict.answer).lower()} "
                    f"(dim {verdict.closure.dim_found}/{system.full_dimension})")
            if verdict.reasons:
                line += " - " + "; ".join(verdict.reasons)
            summary.append(line)
            self._log(line, "VERDICT")

        report = self._envelope("check")
        report.update({
            'input': system_path,
            'system': {'label': system.label, 'dim': system.dim},
            'verdicts': {kind.value: v.to_dict() for kind, v in verdicts.items()},
        })
        return self._result(report, summary)

    # simulate
    def cmd_simulate(self, protocol_path: str, state_path: str, mode: str = "enumerate",
                     n_trajectories: int = 1, target_path: Optional[str] = None) -> CommandResult:
        """Run a protocol file on a state file"""
        tol = self.settings.tolerances
        protocol = protocol_from_json(load_json(protocol_path), tol.herm_tol, tol.unit_tol)
        initial = state_from_json(load_json(state_path))
        target = state_from_json(load_json(target_path)) if target_path else None
        self._log(f"loaded protocol '{protocol.label}' and state on {initial.dims}", "SCHEMA")

        if mode == "enumerate":
            trajectories = self.runner.run_enumerate(initial, protocol)
        elif mode == "sample":
            trajectories = self.runner.run_sampled(initial, protocol, self.seed, n_trajectories)
        else:
            raise SchemaError(f"unknown mode '{mode}'", field="mode")

        report = self._envelope("simulate")
        report.update({
            'inputs': {'protocol': protocol_path, 'state': state_path, 'target': target_path},
            'protocol': protocol.label,
            'mode': mode,
            'n_trajectories': len(trajectories),
            'trajectories': [t.to_dict(target) for t in trajectories],
        })
        if mode == "enumerate":
            report['total_probability'] = float(sum(t.probability for t in trajectories))
        else:
            report['outcome_counts'] = _outcome_counts(trajectories)

        summary = [f"{protocol.label}: {len(trajectories)} trajectories ({mode})"]
        for i, t in enumerate(trajectories[:10]):
            line = f"  [{i}] p={t.probability:.6g}"
            if target is not None:
                line += f" fidelity={fidelity(t.final_state, target):.12f}"
            summary.append(line)
        return self._result(report, summary)

    # examples
    def cmd_examples(self, alpha: complex = 0.6, beta: complex = 0.8) -> CommandResult:
        """Reproduce the built-in examples and compare with their expected states"""
        tol = self.settings.tolerances
        threshold = 1.0 - tol.fidelity_tol
        checks = [
            self._semiclassical_example(alpha, beta, threshold),
            self._two_spin_example(alpha, beta, threshold),
            self._three_spin_example(alpha, beta, threshold),
        ]
        extras = [
            self._sensor_reversal_example(alpha, beta, threshold),
            self._semiclassical_contrast(alpha, beta),
        ]
        passed = sum(c['pass'] for c in checks)
        extra_passed = sum(c['pass'] for c in extras)

        report = self._envelope("examples")
        report.update({
            'alpha': [float(np.real(alpha)), float(np.imag(alpha))],
            'beta': [float(np.real(beta)), float(np.imag(beta))],
            'examples': checks,
            'supplementary': extras,
        })
        summary = [f"{c['name']}: {'PASS' if c['pass'] else 'FAIL'}" for c in checks + extras]
        summary.append(f"{passed}/{len(checks)} examples PASS, "
                       f"{extra_passed}/{len(extras)} supplementary PASS")
        self._log(summary[-1])
        for c in checks + extras:
            if not c['pass']:
                self._log(f"{c['name']}: FAIL", "WARNING")
        ok = passed == len(checks) and extra_passed == len(extras)
        return self._result(report, summary, 0 if ok else 1)

    def _semiclassical_example(self, alpha, beta, threshold) -> Dict:
        initial = spin_state(alpha, beta)
        down = basis_state(TensorSpace((2,)), [DOWN])
        trajectories = self.runner.run_enumerate(initial, builtin_semiclassical_flip())
        a, b = initial.pure_amplitudes
        expected = {UP: abs(a) ** 2, DOWN: abs(b) ** 2}
        rows, ok = [], True
        for t in trajectories:
            outcome = t.records["sz"][1]
            f = fidelity(t.final_state, down)
            ok &= f >= threshold and abs(t.probability - expected[outcome]) <= 1e-12
            rows.append({
                'outcome': 'up' if outcome == UP else 'down',
                'probability': t.probability,
                'expected_probability': expected[outcome],
                'fidelity_to_down': f,
                'final_purity': purity(t.final_state),
            })
        ok &= abs(sum(t.probability for t in trajectories) - 1.0) <= 1e-9
        return {
            'name': 'semiclassical flip',
            'pass': bool(ok),
            'initial_purity': purity(initial),
            'trajectories': rows,
        }

    def _two_spin_example(self, alpha, beta, threshold) -> Dict:
        protocol = builtin_quantum_controller()
        (t,) = self.runner.run_enumerate(two_spin_initial(alpha, beta), protocol)
        states = [s for _, s in t.history]
        sensed = states[1]
        a, b = spin_state(alpha, beta).pure_amplitudes
        rho_sys = reduced_state(sensed, [0]).rho
        diag_error = float(np.max(np.abs(rho_sys - np.diag([abs(a) ** 2, abs(b) ** 2]))))
        f_mid = fidelity(sensed, two_spin_intermediate(alpha, beta))
        f_final = fidelity(t.final_state, two_spin_target(alpha, beta))
        transfer = verify_state_transfer(protocol, 0, 1, self.runner, self.settings.tolerances.fidelity_tol)
        ok = f_mid >= threshold and f_final >= threshold and diag_error <= 1e-10 and transfer.transferred
        return {
            'name': 'two-spin coherent control',
            'pass': bool(ok),
            'steps': [label for label, _ in t.history],
            'purity_trace': [purity(s) for s in states],
            'system_entropy_trace': [entanglement_entropy(s, [0], self.settings.tolerances.entropy_floor)
                                     for s in states],
            'intermediate_fidelity': f_mid,
            'intermediate_system_state': reduced_state(sensed, [0]).to_dict(),
            'intermediate_diagonal_error': diag_error,
            'final_fidelity': f_final,
            'final_state': t.final_state.to_dict(),
            'state_transfer': transfer.to_dict(),
        }

    def _three_spin_example(self, alpha, beta, threshold) -> Dict:
        protocol = builtin_entanglement_transfer()
        (t,) = self.runner.run_enumerate(three_spin_initial(alpha, beta), protocol)
        states = [s for _, s in t.history]
        floor = self.settings.tolerances.entropy_floor
        entropies = [entanglement_entropy(s, [0], floor) for s in states]
        untouched = all(2 not in step_support(step, protocol.space) for step in protocol.steps)
        f_final = fidelity(t.final_state, three_spin_target(alpha, beta))
        ok = (f_final >= threshold and untouched and abs(entropies[0]) <= 1e-9
              and abs(entropies[-1] - 1.0) <= 1e-9)
        return {
            'name': 'three-spin entanglement transfer',
            'pass': bool(ok),
            'steps': [label for label, _ in t.history],
            'purity_trace': [purity(s) for s in states],
            'spin1_entropy_trace': entropies,
            'third_spin_untouched': untouched,
            'final_fidelity': f_final,
            'final_state': t.final_state.to_dict(),
        }

    def _sensor_reversal_example(self, alpha, beta, threshold) -> Dict:
        initial = two_spin_initial(alpha, beta)
        (t,) = self.runner.run_enumerate(initial, builtin_sensor_reversal())
        states = [s for _, s in t.history]
        system_purity = [purity(reduced_state(s, [0])) for s in states]
        f = fidelity(t.final_state, initial)
        return {
            'name': 'sensor reversal',
            'pass': bool(f >= threshold),
            'system_purity_trace': system_purity,
            'final_fidelity_to_initial': f,
        }

    def _semiclassical_contrast(self, alpha, beta) -> Dict:
        """Measurement-based flip of spin 1 in the three-spin example"""
        initial = three_spin_initial(alpha, beta)
        protocol = builtin_semiclassical_flip().on_space(initial.space, "semiclassical flip on spin 1")
        floor = self.settings.tolerances.entropy_floor
        rows = [
            {'probability': t.probability, 'spin1_entropy': entanglement_entropy(t.final_state, [0], floor)}
            for t in self.runner.run_enumerate(initial, protocol)
        ]
        return {
            'name': 'semiclassical contrast',
            'pass': all(r['spin1_entropy'] <= 1e-9 for r in rows),
            'trajectories': rows,
            'note': 'a measuring controller leaves spin 1 unentangled; the coherent controller reaches 1 bit',
        }

    # pulse
    def cmd_pulse(self, drive_hz: Optional[float] = None, control_value: int = UP,
                  carrier_hz: Optional[float] = None, sweep: bool = True,
                  consistency: bool = True) -> CommandResult:
        """Validate the selective pi pulse, sweep its amplitude, check gate consistency"""
        ps = self.settings.pulse
        tol = self.settings.tolerances
        params = SpinPairParams.from_hz(ps.omega_hz, ps.omega_prime_hz, ps.gamma_hz)
        drive = TWO_PI * (drive_hz if drive_hz is not None else ps.drive_hz)
        options = dict(
            steps_per_period=ps.steps_per_period,
            step_tol=tol.step_tol,
            max_refinements=ps.max_refinements,
            selectivity_ratio=ps.selectivity_ratio,
        )
        carrier = TWO_PI * carrier_hz if carrier_hz is not None else None
        main_report = validate_selective_pulse(params, drive, carrier=carrier,
                                               control_value=control_value, **options)
        self._log(f"pulse {drive / TWO_PI:g} Hz: fidelity {main_report.fidelity:.6f}", "PULSE")

        report = self._envelope("pulse")
        report['validation'] = main_report.to_dict()
        fidelities = [main_report.fidelity]
        summary = [f"pi pulse at {main_report.pulse.carrier / TWO_PI:g} Hz, "
                   f"amplitude {drive / TWO_PI:g} Hz: fidelity {main_report.fidelity:.6f}"]
        summary += [f"  warning: {w}" for w in main_report.warnings]
        for w in main_report.warnings:
            self._log(w, "WARNING")

        if sweep:
            sweep_reports = amplitude_sweep(params, [TWO_PI * a for a in ps.sweep_drive_hz],
                                            control_value=control_value, **options)
            sweep_fidelities = [r.fidelity for r in sweep_reports]
            # amplitudes are listed strongest first, so fidelity should not drop
            monotone = all(b >= a - 1e-3 for a, b in zip(sweep_fidelities, sweep_fidelities[1:]))
            report['sweep'] = {
                'drive_hz': list(ps.sweep_drive_hz),
                'fidelities': sweep_fidelities,
                'monotone': monotone,
                'reports': [r.to_dict() for r in sweep_reports],
            }
            fidelities += sweep_fidelities
            summary.append("sweep: " + ", ".join(
                f"{a:g} Hz -> {f:.6f}" for a, f in zip(ps.sweep_drive_hz, sweep_fidelities)))
            self._log(f"amplitude sweep monotone: {monotone}", "PULSE")

        if consistency:
            report['gate_consistency'] = self._pulse_consistency(params, drive, ps.steps_per_period)
            summary.append(f"pulse-realized controller fidelity "
                           f"{report['gate_consistency']['fidelity']:.6f}")

        best = max(fidelities)
        report['best_fidelity'] = best
        report['pass_fidelity'] = ps.pass_fidelity
        report['pass'] = best >= ps.pass_fidelity
        summary.append(f"best fidelity {best:.6f}: {'PASS' if report['pass'] else 'FAIL'}")
        return self._result(report, summary, 0 if report['pass'] else 1)

    def _pulse_consistency(self, params: SpinPairParams, drive: float, steps_per_period: int,
                           alpha: complex = 0.6, beta: complex = 0.8) -> Dict:
        """Quantum controller with simulated pulses in place of exact flips"""
        protocol = pulse_realized_protocol(builtin_quantum_controller(), params, drive, steps_per_period)
        (t,) = self.runner.run_enumerate(two_spin_initial(alpha, beta), protocol)
        return {
            'alpha': [float(np.real(alpha)), float(np.imag(alpha))],
            'beta': [float(np.real(beta)), float(np.imag(beta))],
            'fidelity': fidelity(t.final_state, two_spin_target(alpha, beta)),
        }

    def _result(self, report: Dict, summary: List[str], exit_code: int = 0) -> CommandResult:
        """Attach the run's logged warnings to the report"""
        report['warnings'] = [e['details'] for e in self.logger.get_entries_by_type("WARNING", limit=0)]
        return CommandResult(report, summary, exit_code)

    def _log(self, message: str, event_type: str = "SYSTEM"):
        """Log a message if logger is available"""
        if self.logger:
            self.logger.log(event_type, message, "kernel")


def _outcome_counts(trajectories) -> Dict[str, Dict[str, int]]:
    """Per record key, how often each outcome index occurred"""
    counts: Dict[str, Counter] = {}
    for t in trajectories:
        for key, (_, index) in t.records.items():
            counts.setdefault(key, Counter())[str(index)] += 1
    return {k: dict(sorted(c.items())) for k, c in sorted(counts.items())}


def parse_complex(text: str) -> complex:
    """'re,im' or 're' into a complex number"""
    parts = [p.strip() for p in str(text).split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise SchemaError(f"expected 're,im', got {text!r}", field="amplitude")


def split_tolerance_flags(argv: Sequence[str]) -> Tuple[List[str], List[str]]:
    """Pull --tol.<name>=<value> (or --tol.<name> <value>) out of argv"""
    rest, pairs = [], []
    args = list(argv)
    i = 0
    while i < len(args):
        arg = args[i]
        if arg.startswith("--tol."):
            name = arg[len("--tol."):]
            if "=" not in name:
                if i + 1 >= len(args):
                    raise SchemaError(f"{arg} needs a value", field=f"tolerances.{name}")
                name = f"{name}={args[i + 1]}"
                i += 1
            pairs.append(name)
        else:
            rest.append(arg)
        i += 1
    return rest, pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinloop",
        description="Controllability checks and feedback-protocol simulation for small spin systems.",
        epilog="Tolerances can be overridden with --tol.<name>=<value>, e.g. --tol.closure_tol=1e-8.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for sampled trajectories")
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--config", help="settings file (default config/defaults.json)")
    common.add_argument("--log", help="save the run log as JSON")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", parents=[common], help="controllability / observability verdicts")
    check.add_argument("system", help="control system JSON file")
    check.add_argument("--max-generations", type=int, default=None)

    simulate = sub.add_parser("simulate", parents=[common], help="run a protocol on a state")
    simulate.add_argument("protocol", help="protocol JSON file")
    simulate.add_argument("state", help="initial state JSON file")
    simulate.add_argument("--mode", choices=["enumerate", "sample"], default="enumerate")
    simulate.add_argument("--n", type=int, default=1000, help="trajectories in sample mode")
    simulate.add_argument("--target", help="state file to compute final fidelities against")
    simulate.add_argument("--workers", type=int, default=None, help="threads for sampled trajectories")

    examples = sub.add_parser("examples", parents=[common], help="reproduce the built-in examples")
    examples.add_argument("--alpha", default="0.6,0", help="amplitude of |up> as re,im")
    examples.add_argument("--beta", default="0.8,0", help="amplitude of |down> as re,im")

    pulse = sub.add_parser("pulse", parents=[common], help="validate the selective pi pulse")
    pulse.add_argument("--omega-hz", type=float, default=None)
    pulse.add_argument("--omega-prime-hz", type=float, default=None)
    pulse.add_argument("--gamma-hz", type=float, default=None)
    pulse.add_argument("--drive-hz", type=float, default=None)
    pulse.add_argument("--carrier-hz", type=float, default=None,
                       help="drive carrier (default: resonant for the control value)")
    pulse.add_argument("--control", choices=["up", "down"], default="up")
    pulse.add_argument("--no-sweep", action="store_true")
    pulse.add_argument("--no-consistency", action="store_true")
    return parser


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    """Parse arguments, run one command, write its report; returns the exit code"""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    logger = RunLogger()
    kernel = None
    try:
        rest, tol_pairs = split_tolerance_flags(sys.argv[1:] if argv is None else argv)
        args = build_parser().parse_args(rest)
        if args.verbose:
            logging.basicConfig(level=logging.INFO, stream=stderr,
                                format="%(levelname)s %(name)s: %(message)s")

        if args.seed < 0:
            raise SchemaError(f"--seed must be a non-negative integer, got {args.seed}", field="seed")
        settings = load_settings(args.config, parse_overrides(tol_pairs))
        if args.command == "simulate" and args.workers is not None:
            if args.workers < 1:
                raise SchemaError(f"--workers must be >= 1, got {args.workers}", field="workers")
            settings.executor.workers = args.workers
        if args.command == "pulse":
            for name in ("omega_hz", "omega_prime_hz", "gamma_hz"):
                if getattr(args, name) is not None:
                    setattr(settings.pulse, name, getattr(args, name))
        kernel = SpinLoop(settings, args.seed, logger)

        if args.command == "check":
            result = kernel.cmd_check(args.system, args.max_generations)
        elif args.command == "simulate":
            if args.mode == "sample" and args.n < 1:
                raise SchemaError("--n must be >= 1 in sample mode", field="n")
            result = kernel.cmd_simulate(args.protocol, args.state, args.mode, args.n, args.target)
        elif args.command == "examples":
            result = kernel.cmd_examples(parse_complex(args.alpha), parse_complex(args.beta))
        else:
            result = kernel.cmd_pulse(args.drive_hz, UP if args.control == "up" else DOWN,
                                      args.carrier_hz, not args.no_sweep, not args.no_consistency)

        write_report(result.report, args.out, stdout)
        for line in result.summary:
            print(line, file=stderr)
        exit_code = result.exit_code
    except SpinLoopError as e:
        logger.log("ERROR", str(e), "kernel")
        print(f"error: {e}", file=stderr)
        exit_code = e.exit_code

    if kernel is not None and getattr(args, "log", None):
        logger.save(args.log)
    return exit_code


def main():
    """Main entry point"""
    try:
        sys.exit(run())
    except SystemExit:
        raise
    except Exception as e:
        print(f"Error running SpinLoop: {e}", file=sys.stderr)
        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
