"""Generic port-Hamiltonian state-space blocks.

A block represents the dynamics

    x' = (J(x) - R(x)) grad_H(x) + B u + d
    y  = B^T grad_H(x) + D u + output_offset

with skew-symmetric interconnection J, positive-semidefinite dissipation R,
feedthrough D with D + D^T >= 0, a nonnegative C^1 Hamiltonian H, a constant
state disturbance d and a constant output offset (zero except for the
electrochemical conversion blocks, which carry their open-circuit term there).

Blocks are immutable after construction and all evaluations are pure
functions of their arguments, so they are safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

MatrixLike = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


class DimensionError(ValueError):
    """Raised when a state or input vector does not match a block's layout."""


def _as_vector(v, size: int, what: str, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != size:
        raise DimensionError(
            f"{name}: {what} must have dimension {size}, got shape {arr.shape}"
        )
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PowerTerms:
    """One row of the energy ledger, in watts.

    The five terms decompose the stored-power identity

        dH/dt = dissipation + supply + feedthrough_loss
                + disturbance_work - offset_supply,

    where ``supply`` is the full port power y^T u and ``offset_supply`` is the
    share of it contributed by the constant output offset.  For blocks without
    an output offset the classical decomposition
    dH/dt = dissipation + supply + feedthrough_loss + disturbance_work holds.
    """

    dissipation: float       # -grad_H^T R grad_H  (<= 0 for valid blocks)
    supply: float            # y^T u
    feedthrough_loss: float  # -1/2 u^T (D + D^T) u  (<= 0 for valid blocks)
    disturbance_work: float  # grad_H^T d
    offset_supply: float     # output_offset^T u

    @property
    def stored_power(self) -> float:
        """Exact reconstruction of grad_H^T x'."""
        return (self.dissipation + self.supply + self.feedthrough_loss
                + self.disturbance_work - self.offset_supply)


@dataclass(frozen=True)
class QuadraticForm:
    """Diagonal quadratic structure shared by all network component blocks.

    H(x) = 1/2 sum_i weights_i x_i^2 and
    R(x) = diag(damping_const + damping_abs * |x|).
    Keeping these coefficient vectors around lets assembled systems evaluate
    Hamiltonians, dissipation and analytic Jacobians without per-component
    callbacks.
    """

    weights: np.ndarray
    damping_const: np.ndarray
    damping_abs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "damping_const", _frozen(self.damping_const))
        object.__setattr__(self, "damping_abs", _frozen(self.damping_abs))

    @property
    def state_dependent(self) -> bool:
        return bool(np.any(self.damping_abs != 0.0))

    def damping(self, x: np.ndarray) -> np.ndarray:
        return self.damping_const + self.damping_abs * np.abs(x)


@dataclass(frozen=True)
class PhBlock:
    """Immutable port-Hamiltonian block; see module docstring for the form."""

    n: int
    m: int
    hamiltonian: Callable[[np.ndarray], float]
    grad_hamiltonian: Callable[[np.ndarray], np.ndarray]
    interconnection: MatrixLike
    dissipation: MatrixLike
    input_matrix: np.ndarray
    feedthrough: np.ndarray
    disturbance: np.ndarray
    output_offset: np.ndarray
    name: str = "block"
    state_labels: tuple = ()
    port_labels: tuple = ()
    drift_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    quadratic: QuadraticForm | None = None

    def __post_init__(self):
        B = np.asarray(self.input_matrix, dtype=float).reshape(self.n, self.m)
        D = np.asarray(self.feedthrough, dtype=float).reshape(self.m, self.m)
        d = np.asarray(self.disturbance, dtype=float).reshape(self.n)
        off = np.asarray(self.output_offset, dtype=float).reshape(self.m)
        object.__setattr__(self, "input_matrix", _frozen(B))
        object.__setattr__(self, "feedthrough", _frozen(D))
        object.__setattr__(self, "disturbance", _frozen(d))
        object.__setattr__(self, "output_offset", _frozen(off))
        if isinstance(self.interconnection, np.ndarray):
            object.__setattr__(self, "interconnection",
                               _frozen(np.asarray(self.interconnection, dtype=float)))
        if isinstance(self.dissipation, np.ndarray):
            object.__setattr__(self, "dissipation",
                               _frozen(np.asarray(self.dissipation, dtype=float)))

    # -- matrix evaluation -------------------------------------------------

    @property
    def constant_interconnection(self) -> bool:
        return isinstance(self.interconnection, np.ndarray)

    @property
    def constant_dissipation(self) -> bool:
        return isinstance(self.dissipation, np.ndarray)

    def interconnection_at(self, x) -> np.ndarray:
        J = self.interconnection
        return J if isinstance(J, np.ndarray) else np.asarray(J(np.asarray(x, dtype=float)), dtype=float)

    def dissipation_at(self, x) -> np.ndarray:
        R = self.dissipation
        return R if isinstance(R, np.ndarray) else np.asarray(R(np.asarray(x, dtype=float)), dtype=float)

    # -- dynamics ----------------------------------------------------------

    def rhs(self, x, u) -> np.ndarray:
        """Evaluate x' = (J(x) - R(x)) grad_H(x) + B u + d."""
        x = _as_vector(x, self.n, "state", self.name)
        u = _as_vector(u, self.m, "input", self.name)
        g = self.grad_hamiltonian(x)
        return ((self.interconnection_at(x) - self.dissipation_at(x)) @ g
                + self.input_matrix @ u + self.disturbance)

    def output(self, x, u) -> np.ndarray:
        """Evaluate y = B^T grad_H(x) + D u + output_offset."""
        x = _as_vector(x, self.n, "state", self.name)
        u = _as_vector(u, self.m, "input", self.name)
        g = self.grad_hamiltonian(x)
        return self.input_matrix.T @ g + self.feedthrough @ u + self.output_offset

    def power_terms(self, x, u) -> PowerTerms:
        """Energy ledger row at (x, u); see :class:`PowerTerms`."""
        x = _as_vector(x, self.n, "state", self.name)
        u = _as_vector(u, self.m, "input", self.name)
        g = self.grad_hamiltonian(x)
        y = self.input_matrix.T @ g + self.feedthrough @ u + self.output_offset
        Dsym = self.feedthrough + self.feedthrough.T
        return PowerTerms(
            dissipation=-float(g @ (self.dissipation_at(x) @ g)),
            supply=float(y @ u),
            feedthrough_loss=-0.5 * float(u @ (Dsym @ u)),
            disturbance_work=float(g @ self.disturbance),
            offset_supply=float(self.output_offset @ u),
        )

    def rhs_jacobian(self, x) -> np.ndarray:
        """d/dx of the input-independent part of the dynamics.

        Uses the analytic Jacobian when the block carries one, otherwise
        central finite differences on the drift.
        """
        x = _as_vector(x, self.n, "state", self.name)
        if self.drift_jacobian is not None:
            return np.asarray(self.drift_jacobian(x), dtype=float)
        return finite_difference_jacobian(self.drift, x)

    def drift(self, x) -> np.ndarray:
        """rhs with the input contribution removed: (J - R) grad_H + d."""
        x = _as_vector(x, self.n, "state", self.name)
        g = self.grad_hamiltonian(x)
        return (self.interconnection_at(x) - self.dissipation_at(x)) @ g + self.disturbance


def quadratic_block(
    weights: Sequence[float],
    interconnection: np.ndarray | None = None,
    damping_const: Sequence[float] | None = None,
    damping_abs: Sequence[float] | None = None,
    input_matrix: np.ndarray | None = None,
    feedthrough: np.ndarray | None = None,
    disturbance: Sequence[float] | None = None,
    output_offset: Sequence[float] | None = None,
    name: str = "block",
    state_labels: tuple = (),
    port_labels: tuple = (),
) -> PhBlock:
    """Build a block with H = 1/2 sum w_i x_i^2 and diagonal damping a + b|x|.

    Every network component and every assembled system has this shape; the
    resulting block carries a :class:`QuadraticForm` plus analytic Jacobian.
    """
    w = np.asarray(weights, dtype=float)
    n = w.shape[0]
    if np.any(w <= 0.0):
        raise ValueError(f"{name}: quadratic weights must be positive, got {w}")
    a = np.zeros(n) if damping_const is None else np.asarray(damping_const, dtype=float)
    b = np.zeros(n) if damping_abs is None else np.asarray(damping_abs, dtype=float)
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise ValueError(f"{name}: damping coefficients must be nonnegative")
    J = np.zeros((n, n)) if interconnection is None else np.asarray(interconnection, dtype=float)
    B = np.zeros((n, 0)) if input_matrix is None else np.atleast_2d(np.asarray(input_matrix, dtype=float))
    m = B.shape[1]
    D = np.zeros((m, m)) if feedthrough is None else np.asarray(feedthrough, dtype=float).reshape(m, m)
    d = np.zeros(n) if disturbance is None else np.asarray(disturbance, dtype=float)
    off = np.zeros(m) if output_offset is None else np.asarray(output_offset, dtype=float)
    form = QuadraticForm(weights=w, damping_const=a, damping_abs=b)

    def hamiltonian(x):
        return 0.5 * float(np.dot(w * x, x))

    def grad(x):
        return w * x

    if form.state_dependent:
        dissipation: MatrixLike = lambda x: np.diag(form.damping(x))
    else:
        dissipation = np.diag(a)

    def drift_jacobian(x):
        # d/dx of (J - R(x)) (w*x) + d; the |x| x part differentiates to 2|x|.
        return J @ np.diag(w) - np.diag((a + 2.0 * b * np.abs(x)) * w)

    return PhBlock(
        n=n, m=m,
        hamiltonian=hamiltonian,
        grad_hamiltonian=grad,
        interconnection=J,
        dissipation=dissipation,
        input_matrix=B,
        feedthrough=D,
        disturbance=d,
        output_offset=off,
        name=name,
        state_labels=tuple(state_labels),
        port_labels=tuple(port_labels),
        drift_jacobian=drift_jacobian,
        quadratic=form,
    )


# -- structural validation --------------------------------------------------

TOL_CONSTANT = 1e-12
TOL_SAMPLED = 1e-9
TOL_GRADIENT = 1e-6


@dataclass(frozen=True)
class StructureCheck:
    name: str
    worst: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol

    def __str__(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return f"{self.name}: worst violation {self.worst:.3e} (tol {self.tol:.0e}) {verdict}"


@dataclass(frozen=True)
class StructureReport:
    block_name: str
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_checks(self) -> list[StructureCheck]:
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        head = f"structure report for {self.block_name}: " + ("pass" if self.passed else "FAIL")
        return "\n".join([head] + ["  " + str(c) for c in self.checks])


def finite_difference_gradient(f: Callable[[np.ndarray], float], x: np.ndarray) -> np.ndarray:
    """Central differences with per-component step 1e-6 * (1 + |x_i|)."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.shape[0]):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def finite_difference_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    jac = np.zeros((f0.shape[0], x.shape[0]))
    for i in range(x.shape[0]):
        h = 1e-7 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.asarray(f(xp), dtype=float) - np.asarray(f(xm), dtype=float)) / (2.0 * h)
    return jac


def validate_structure(
    block: PhBlock,
    sample_states: Sequence[np.ndarray],
    tol_constant: float = TOL_CONSTANT,
    tol_sampled: float = TOL_SAMPLED,
    grad_tol: float = TOL_GRADIENT,
) -> StructureReport:
    """Check the structural conditions of the port-Hamiltonian form.

    Constant matrices are held to ``tol_constant``; state-dependent matrices
    and the sampled Hamiltonian conditions to ``tol_sampled``.  Failures are
    reported, never raised.
    """
    samples = [np.asarray(s, dtype=float).reshape(block.n) for s in sample_states]
    if not samples:
        raise ValueError("validate_structure needs a non-empty sample set")

    tol_J = tol_constant if block.constant_interconnection else tol_sampled
    tol_R = tol_constant if block.constant_dissipation else tol_sampled

    worst_skew = 0.0
    worst_R_sym = 0.0
    worst_R_psd = 0.0
    worst_H_neg = 0.0
    worst_grad = 0.0
    for x in samples:
        J = block.interconnection_at(x)
        worst_skew = max(worst_skew, float(np.max(np.abs(J + J.T))) if J.size else 0.0)
        R = block.dissipation_at(x)
        if R.size:
            worst_R_sym = max(worst_R_sym, float(np.max(np.abs(R - R.T))))
            eigmin = float(np.min(np.linalg.eigvalsh(0.5 * (R + R.T))))
            worst_R_psd = max(worst_R_psd, max(0.0, -eigmin))
        worst_H_neg = max(worst_H_neg, max(0.0, -float(block.hamiltonian(x))))
        g = np.asarray(block.grad_hamiltonian(x), dtype=float)
        fd = finite_difference_gradient(block.hamiltonian, x)
        rel = float(np.max(np.abs(fd - g) / (1.0 + np.abs(g))))
        worst_grad = max(worst_grad, rel)

    Dsym = 0.5 * (block.feedthrough + block.feedthrough.T)
    if Dsym.size:
        eigmin_D = float(np.min(np.linalg.eigvalsh(Dsym)))
        worst_D = max(0.0, -eigmin_D)
    else:
        worst_D = 0.0

    checks = (
        StructureCheck("interconnection skew-symmetry", worst_skew, tol_J),
        StructureCheck("dissipation symmetry", worst_R_sym, tol_R),
        StructureCheck("dissipation PSD", worst_R_psd, tol_R),
        StructureCheck("feedthrough PSD", worst_D, tol_constant),
        StructureCheck("hamiltonian nonnegative", worst_H_neg, tol_sampled),
        StructureCheck("gradient consistency", worst_grad, grad_tol),
    )
    return StructureReport(block_name=block.name, checks=checks)
