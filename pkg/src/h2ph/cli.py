"""Command-line interface: validate, simulate, steady-state, audit, export.

Exit codes: 0 success, 1 validation/audit failure, 2 numerical failure,
64 usage error.  Output files go to --out, the H2PH_OUT_DIR environment
variable, or ./h2ph_out, in that order of precedence.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis, netio
from .assembly import build_coupled, build_grid
from .phblock import validate_structure
from .sim import IntegrationError, run_scenario

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERIC = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="h2ph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a network file and its assembled structure")
    p.add_argument("network")

    p = sub.add_parser("simulate", help="integrate a scenario and write the trajectory CSV")
    p.add_argument("network")
    p.add_argument("scenario")
    p.add_argument("--method", choices=("rk4", "midpoint"))
    p.add_argument("--step", type=float)
    p.add_argument("--out")

    p = sub.add_parser("steady-state", help="solve for a stationary state under constant inputs")
    p.add_argument("network")
    p.add_argument("--input-file")

    p = sub.add_parser("audit", help="simulate a scenario and audit the energy balance")
    p.add_argument("network")
    p.add_argument("scenario")
    p.add_argument("--method", choices=("rk4", "midpoint"))
    p.add_argument("--step", type=float)
    p.add_argument("--out")

    p = sub.add_parser("export", help="write system matrices at a reference state")
    p.add_argument("network")
    p.add_argument("--state-file")
    p.add_argument("--out")
    return parser


def _out_dir(arg: str | None) -> str:
    return arg or os.environ.get("H2PH_OUT_DIR") or "h2ph_out"


def _load_network(path: str):
    try:
        return netio.parse_network(path)
    except netio.NetworkFileError as err:
        for issue in err.issues:
            print(issue, file=sys.stderr)
        return None


def _structure_samples(system, count=100, seed=0):
    rng = np.random.default_rng(seed)
    ref = system.reference_state
    spread = 0.1 * (1.0 + np.abs(ref))
    return [ref + spread * rng.standard_normal(ref.shape) for _ in range(count)]


def _cmd_validate(args) -> int:
    topo = _load_network(args.network)
    if topo is None:
        return EXIT_INVALID
    print(f"network {topo.name}: {topo.counts}")
    status = EXIT_OK
    for label, system in (("grid", build_grid(topo)), ("coupled", build_coupled(topo))):
        report = validate_structure(system.block, _structure_samples(system))
        print(f"structure {label}: {'pass' if report.passed else 'FAIL'}")
        if not report.passed:
            for check in report.failed_checks():
                print(f"  {check}", file=sys.stderr)
            status = EXIT_INVALID
    return status


def _run(args, system):
    spec = netio.parse_scenario(args.scenario, system)
    method = args.method or spec.method
    step = args.step if args.step is not None else spec.step
    return run_scenario(system, spec.scenario, method=method, step=step,
                        newton_tol=spec.newton_tol), method, step


def _cmd_simulate(args) -> int:
    topo = _load_network(args.network)
    if topo is None:
        return EXIT_INVALID
    system = build_coupled(topo)
    try:
        trajectory, method, step = _run(args, system)
    except netio.ScenarioFileError as err:
        for issue in err.issues:
            print(issue, file=sys.stderr)
        return EXIT_INVALID
    except IntegrationError as err:
        print(f"integration failed: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    paths = netio.write_results(trajectory, None, _out_dir(args.out))
    print(f"simulated {system.name} with {method}, step {step!r} s, "
          f"{trajectory.n_samples} samples")
    print(f"H start {trajectory.H[0]!r} J, H end {trajectory.H[-1]!r} J")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_steady_state(args) -> int:
    topo = _load_network(args.network)
    if topo is None:
        return EXIT_INVALID
    system = build_coupled(topo)
    if args.input_file:
        try:
            u = netio.parse_constant_inputs(args.input_file, system)
        except netio.ScenarioFileError as err:
            for issue in err.issues:
                print(issue, file=sys.stderr)
            return EXIT_INVALID
    else:
        u = np.zeros(system.m)
    result = analysis.steady_state(system, u, x_guess=system.reference_state)
    print(result)
    physical = system.physical_state(result.state)
    for label, value in zip(system.state_labels, physical):
        print(f"{label} = {value!r}")
    return EXIT_OK if result.converged else EXIT_NUMERIC


def _cmd_audit(args) -> int:
    topo = _load_network(args.network)
    if topo is None:
        return EXIT_INVALID
    system = build_coupled(topo)
    try:
        trajectory, _, _ = _run(args, system)
    except netio.ScenarioFileError as err:
        for issue in err.issues:
            print(issue, file=sys.stderr)
        return EXIT_INVALID
    except IntegrationError as err:
        print(f"integration failed: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    report = analysis.passivity_audit(trajectory, system)
    netio.write_results(trajectory, report, _out_dir(args.out))
    print(report.to_text(), end="")
    return EXIT_OK if report.passed else EXIT_INVALID


def _cmd_export(args) -> int:
    topo = _load_network(args.network)
    if topo is None:
        return EXIT_INVALID
    system = build_coupled(topo)
    x0 = None
    if args.state_file:
        try:
            x0 = netio.parse_state_file(args.state_file, system)
        except netio.ScenarioFileError as err:
            for issue in err.issues:
                print(issue, file=sys.stderr)
            return EXIT_INVALID
    paths = analysis.export_matrices(system, _out_dir(args.out), reference_state=x0)
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "steady-state": _cmd_steady_state,
    "audit": _cmd_audit,
    "export": _cmd_export,
}


def cli(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as err:
        return int(err.code or 0)
    return _COMMANDS[args.command](args)


def main() -> int:
    return cli(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
