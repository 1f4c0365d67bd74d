"""Passivity auditing, steady-state solving and matrix export.

The audit certifies the supply-rate inequality dH/dt <= y^T u along a
trajectory: with zero state disturbance the inequality holds structurally, so
any violation beyond the integrator's quadrature tolerance indicates a broken
model (or an injected fault).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .phblock import PhBlock
from .sim import Trajectory

# Violation tolerance coefficient: per-step violation rates below
# AUDIT_TOLERANCE_COEFF * h^2 * (power scale) are attributed to quadrature
# error of the recorded step ledger and not flagged.
AUDIT_TOLERANCE_COEFF = 5.0


def _as_block(system) -> PhBlock:
    return system.block if hasattr(system, "block") else system


@dataclass
class PassivityReport:
    """Per-step and cumulative energy accounting for one trajectory."""

    system_name: str
    method: str
    step: float
    n_steps: int
    totals: dict                 # cumulative integrals in joules
    hamiltonian_change: float
    worst_violation: float       # max over steps of (dH - supplied energy)/h, in watts
    worst_closure: float         # worst relative defect of the ledger identity
    tolerance: float             # violation rate tolerance in watts
    violations: list             # step indices beyond tolerance
    disturbance_free: bool

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        rows = [
            ("supplied_energy_J", self.totals["supply"], None, None),
            ("dissipated_energy_J", self.totals["dissipation"], None, None),
            ("feedthrough_loss_J", self.totals["feedthrough_loss"], None, None),
            ("disturbance_work_J", self.totals["disturbance_work"], None, None),
            ("offset_supply_J", self.totals["offset_supply"], None, None),
            ("hamiltonian_change_J", self.hamiltonian_change, None, None),
            ("ledger_closure_rel", self.worst_closure, 1e-9 if self.method == "midpoint" else None,
             (self.worst_closure <= 1e-9) if self.method == "midpoint" else None),
            ("worst_violation_W", self.worst_violation, self.tolerance,
             self.worst_violation <= self.tolerance),
            ("violating_steps", float(len(self.violations)), 0.0, not self.violations),
        ]
        lines = [
            "passivity audit",
            f"system = {self.system_name}",
            f"method = {self.method}",
            f"step_s = {self.step!r}",
            f"steps = {self.n_steps}",
            f"disturbance_free = {'yes' if self.disturbance_free else 'no'}",
            f"{'term':<24}{'value':<26}{'tolerance':<14}pass",
        ]
        for name, value, tol, ok in rows:
            tol_s = "-" if tol is None else f"{tol:.3e}"
            ok_s = "-" if ok is None else ("yes" if ok else "NO")
            lines.append(f"{name:<24}{value!r:<26}{tol_s:<14}{ok_s}")
        lines.append(f"result = {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def passivity_audit(trajectory: Trajectory, system, tolerance: float | None = None) -> PassivityReport:
    """Audit a trajectory against the supply-rate inequality.

    The default tolerance scales with the square of the step size; the
    implicit midpoint ledger is exact for the quadratic Hamiltonians here, so
    midpoint runs normally show violations at roundoff level only.
    """
    block = _as_block(system)
    if trajectory.x.shape[1] != block.n or trajectory.u.shape[1] != block.m:
        raise ValueError(
            f"trajectory ({trajectory.x.shape[1]} states, {trajectory.u.shape[1]} inputs) "
            f"does not match system {getattr(system, 'name', block.name)!r} "
            f"({block.n} states, {block.m} inputs)")
    for k in (0, trajectory.n_samples - 1):
        y = block.output(trajectory.x[k], trajectory.u[k])
        if not np.allclose(y, trajectory.y[k], rtol=1e-9, atol=1e-9 * (1.0 + np.max(np.abs(y)))):
            raise ValueError("trajectory outputs do not match this system")

    steps = trajectory.steps
    h_steps = np.diff(trajectory.t)
    n_steps = h_steps.shape[0]
    totals = {key: float(np.sum(arr)) for key, arr in steps.items() if key != "dH"}
    d_h = steps["dH"]

    stored = (steps["dissipation"] + steps["supply"] + steps["feedthrough_loss"]
              + steps["disturbance_work"] - steps["offset_supply"])
    h_scale = np.maximum.reduce([np.ones(n_steps), np.abs(trajectory.H[:-1]),
                                 np.abs(stored)]) if n_steps else np.ones(0)
    worst_closure = float(np.max(np.abs(d_h - stored) / h_scale)) if n_steps else 0.0

    violation_rate = (d_h - steps["supply"]) / h_steps if n_steps else np.zeros(0)
    if tolerance is None:
        power_scale = 1.0
        if n_steps:
            power_scale = max(1.0,
                              float(np.max(np.abs(steps["supply"] / h_steps))),
                              float(np.max(np.abs(steps["dissipation"] / h_steps))))
        tolerance = AUDIT_TOLERANCE_COEFF * trajectory.step**2 * power_scale
    violations = [int(k) for k in np.nonzero(violation_rate > tolerance)[0]]
    disturbance_free = bool(np.all(steps["disturbance_work"] == 0.0))

    return PassivityReport(
        system_name=trajectory.system_name or getattr(system, "name", block.name),
        method=trajectory.method,
        step=trajectory.step,
        n_steps=n_steps,
        totals=totals,
        hamiltonian_change=trajectory.hamiltonian_drop(),
        worst_violation=float(np.max(violation_rate)) if n_steps else 0.0,
        worst_closure=worst_closure,
        tolerance=float(tolerance),
        violations=violations,
        disturbance_free=disturbance_free,
    )


# -- steady state --------------------------------------------------------------


@dataclass
class SteadyStateResult:
    state: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    singular: bool = False
    condition: float | None = None
    message: str = ""

    def __str__(self) -> str:
        status = "converged" if self.converged else f"FAILED ({self.message})"
        return (f"steady state {status}: residual {self.residual_norm:.3e} "
                f"after {self.iterations} iterations")


def steady_state(system, u_const, x_guess=None, tol: float = 1e-10,
                 max_iter: int = 50) -> SteadyStateResult:
    """Solve 0 = (J - R(x)) grad_H(x) + B u + d by damped Newton iteration.

    Backtracking halves the step up to 20 times on the squared residual norm.
    Non-convergence and singular Jacobians are reported in the result, not
    raised.
    """
    block = _as_block(system)
    u = np.asarray(u_const, dtype=float).reshape(block.m)
    if x_guess is None:
        x = np.zeros(block.n)
    else:
        x = np.asarray(x_guess, dtype=float).reshape(block.n).copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("steady_state needs a finite initial guess")

    res = block.rhs(x, u)
    res_norm = float(np.max(np.abs(res)))
    for it in range(1, max_iter + 1):
        if res_norm <= tol:
            return SteadyStateResult(state=x, residual_norm=res_norm,
                                     converged=True, iterations=it - 1)
        jac = block.rhs_jacobian(x)
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            return SteadyStateResult(
                state=x, residual_norm=res_norm, converged=False, iterations=it - 1,
                singular=True, condition=float(np.linalg.cond(jac)),
                message="singular Jacobian")
        sq = float(res @ res)
        alpha = 1.0
        for _ in range(20):
            x_new = x + alpha * delta
            res_new = block.rhs(x_new, u)
            if float(res_new @ res_new) < sq:
                break
            alpha *= 0.5
        else:
            return SteadyStateResult(
                state=x, residual_norm=res_norm, converged=False, iterations=it,
                condition=float(np.linalg.cond(jac)),
                message="line search stalled")
        x, res = x_new, res_new
        res_norm = float(np.max(np.abs(res)))
    return SteadyStateResult(state=x, residual_norm=res_norm,
                             converged=res_norm <= tol, iterations=max_iter,
                             message="" if res_norm <= tol else "iteration limit")


# -- matrix export ---------------------------------------------------------------


def _write_matrix(path: str, arr: np.ndarray):
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    with open(path, "w") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_matrix(path: str) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    return np.asarray(rows, dtype=float)


EXPORT_FILES = ("J", "R", "B", "D", "disturbance", "output_offset",
                "grad_h", "reference_state", "reference_input")


def export_matrices(system, out_dir: str, reference_state=None,
                    reference_input=None) -> list[str]:
    """Write the system matrices at a reference state as dense CSV plus manifest.

    R is evaluated at the reference state (default zero); the exported
    co-state vector makes x' = (J - R) grad_h + B u + d reproducible from the
    files alone.
    """
    block = _as_block(system)
    x0 = (np.zeros(block.n) if reference_state is None
          else np.asarray(reference_state, dtype=float).reshape(block.n))
    u0 = (np.zeros(block.m) if reference_input is None
          else np.asarray(reference_input, dtype=float).reshape(block.m))
    os.makedirs(out_dir, exist_ok=True)
    arrays = {
        "J": block.interconnection_at(x0),
        "R": block.dissipation_at(x0),
        "B": block.input_matrix,
        "D": block.feedthrough,
        "disturbance": block.disturbance,
        "output_offset": block.output_offset,
        "grad_h": np.asarray(block.grad_hamiltonian(x0), dtype=float),
        "reference_state": x0,
        "reference_input": u0,
    }
    paths = []
    for key in EXPORT_FILES:
        path = os.path.join(out_dir, f"{key}.csv")
        _write_matrix(path, arrays[key])
        paths.append(path)

    name = getattr(system, "name", block.name)
    state_labels = list(getattr(system, "state_labels", block.state_labels))
    input_labels = list(getattr(system, "input_labels", block.port_labels))
    output_labels = list(getattr(system, "output_labels", block.port_labels))
    lines = [
        f"system = {name}",
        f"n = {block.n}",
        f"m = {block.m}",
        f"hamiltonian_at_reference = {repr(float(block.hamiltonian(x0)))}",
        "files = " + ", ".join(f"{k}.csv" for k in EXPORT_FILES),
        "[state index]",
    ]
    lines += [f"{i} = {lab}" for i, lab in enumerate(state_labels)]
    lines.append("[input index]")
    lines += [f"{i} = {lab}" for i, lab in enumerate(input_labels)]
    lines.append("[output index]")
    lines += [f"{i} = {lab}" for i, lab in enumerate(output_labels)]
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    paths.append(manifest)
    return paths


def load_exported(out_dir: str) -> dict:
    """Read back an exported system; inverse of :func:`export_matrices`."""
    data = {}
    for key in EXPORT_FILES:
        arr = _read_matrix(os.path.join(out_dir, f"{key}.csv"))
        if key not in ("J", "R", "B", "D"):
            arr = arr.reshape(-1)
        data[key] = arr
    return data


def reconstruct_rhs(exported: dict) -> np.ndarray:
    """x' at the reference point from exported matrices alone."""
    return ((exported["J"] - exported["R"]) @ exported["grad_h"]
            + exported["B"] @ exported["reference_input"] + exported["disturbance"])
