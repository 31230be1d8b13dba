"""The Q-level nonlocal ODE system and its semi-implicit time stepper.

After rearrangement the filtering problem reduces to Q coupled levels c_j(t)
with velocities

    c_j' = sum_k K_h(c_k - c_j) (c_k - c_j) mu_k + lambda (c0_j - c_j).

Each implicit time step is resolved by a fixed-point loop: kernel weights are
frozen at the previous inner iterate, which turns the step into a strictly
diagonally dominant linear system that is solved directly.  The step size
adapts to the change of a discrete interaction energy, and the run stops on
energy stabilization or an iteration cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelSpec, evaluate
from .rearrange import RearrangedProfile

AUTO = "auto"

TERMINATION_MAX_STEPS = "max_steps"
TERMINATION_ENERGY = "energy_stabilized"

_TAU_FLOOR = 1e-15


class FixedPointError(RuntimeError):
    """Inner fixed-point loop failed to meet tolerance within its cap."""

    def __init__(self, iterations: int, achieved: float, tol: float):
        super().__init__(
            f"fixed point not converged after {iterations} iterations: "
            f"|diff|_inf = {achieved:.3e} > tol = {tol:.3e}")
        self.iterations = iterations
        self.achieved = achieved
        self.tol = tol


class SolverError(RuntimeError):
    """Outer time loop aborted (step rejected down to the tau floor, or the
    level ordering was lost)."""


@dataclass
class SolverConfig:
    """Parameters of the semi-implicit time integration.

    ``tau0`` may be the string "auto", in which case the initial step is the
    reciprocal of the largest row sum of the initial kernel matrix.
    """

    lam: float = 0.0
    tau0: float | str = AUTO
    tau_max: float = 1.0
    fp_tol: float = 1e-5
    fp_max_iter: int = 100
    max_steps: int = 1000
    energy_tol: float = 1e-10
    record_every: int = 1

    def validate(self) -> None:
        if self.lam < 0.0:
            raise ValueError("lambda must be nonnegative")
        if self.tau0 != AUTO and not (isinstance(self.tau0, (int, float)) and self.tau0 > 0):
            raise ValueError("tau0 must be positive or 'auto'")
        if not self.tau_max > 0.0:
            raise ValueError("tau_max must be positive")
        if not self.fp_tol > 0.0:
            raise ValueError("fp_tol must be positive")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.energy_tol < 0.0:
            raise ValueError("energy_tol must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class Trajectory:
    """Recorded states of a run: step indices, times, step sizes, inner
    iteration counts, energies, level vectors, and the termination reason."""

    steps: list[int] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    taus: list[float] = field(default_factory=list)
    inner_iters: list[int] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    levels: list[np.ndarray] = field(default_factory=list)
    termination: str = ""

    def _append(self, step, t, tau, iters, energy, c) -> None:
        self.steps.append(int(step))
        self.times.append(float(t))
        self.taus.append(float(tau))
        self.inner_iters.append(int(iters))
        self.energies.append(float(energy))
        self.levels.append(np.array(c, dtype=float))

    @property
    def q(self) -> int:
        return int(self.levels[0].size) if self.levels else 0

    @property
    def final_levels(self) -> np.ndarray:
        return self.levels[-1]


def kernel_matrix(c: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """W[j, k] = K_h(c_k - c_j)."""
    c = np.asarray(c, dtype=float)
    return evaluate(spec, c[None, :] - c[:, None])


def rhs(c, mu, c0, lam: float, spec: KernelSpec) -> np.ndarray:
    """Level velocities of the rearranged system."""
    c = np.asarray(c, dtype=float)
    mu = np.asarray(mu, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    if not (c.shape == mu.shape == c0.shape):
        raise ValueError("c, mu and c0 must have identical shapes")
    if np.any(mu <= 0.0):
        raise ValueError("measures must be positive")
    diff = c[None, :] - c[:, None]
    return (evaluate(spec, diff) * diff) @ mu + lam * (c0 - c)


def energy(c, mu, spec: KernelSpec) -> float:
    """Discrete interaction energy J(c) = sum_jk K_h(c_j - c_k) mu_j mu_k.

    J depends on level differences only, so it is invariant under adding a
    constant to all levels; the run loop uses |J(c^n) - J(c^{n-1})| both for
    the adaptive step size and the stabilization stop.
    """
    c = np.asarray(c, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if c.shape != mu.shape:
        raise ValueError("c and mu must have identical shapes")
    w = evaluate(spec, c[:, None] - c[None, :])
    return float(mu @ w @ mu)


def auto_tau0(c0, mu, spec: KernelSpec) -> float:
    """Initial step 1 / max_j sum_k K_h(c0_k - c0_j) mu_k."""
    w = kernel_matrix(np.asarray(c0, dtype=float), spec)
    row = w @ np.asarray(mu, dtype=float)
    return 1.0 / float(row.max())


def adaptive_tau(j_prev: float, j_prev2: float | None, tau0: float,
                 tau_max: float) -> float:
    """Step size tau(n) = min(tau0 / |J^{n-1} - J^{n-2}|, tau_max).

    The first two steps use tau0; a vanishing energy difference yields
    tau_max.
    """
    if j_prev2 is None:
        return min(tau0, tau_max)
    dj = abs(j_prev - j_prev2)
    if dj == 0.0:
        return tau_max
    return min(tau0 / dj, tau_max)


def _fixed_point_solve(c_prev, mu, c0, tau, lam, spec, fp_tol, fp_max_iter,
                       collect_diffs: list[float] | None = None):
    """Solve one implicit step by iterating lagged-weight linear solves.

    Each iterate freezes the kernel weights at the previous iterate and
    solves the resulting linear system directly; the matrix is strictly
    diagonally dominant for every tau > 0.  Convergence is declared when the
    sup-norm difference of consecutive iterates drops below ``fp_tol``, or
    when the weight matrix reproduces itself exactly (the linear system is
    then already self-consistent, e.g. for Q = 1).
    """
    q = c_prev.size
    eye = np.eye(q)
    b = c_prev + (tau * lam) * c0
    c_m = c_prev
    w_prev = None
    for m in range(1, fp_max_iter + 1):
        w = kernel_matrix(c_m, spec)
        if w_prev is not None and np.array_equal(w, w_prev):
            return c_m, m - 1
        wm = w * mu[None, :]
        a = (1.0 + tau * lam) * eye + tau * (np.diag(wm.sum(axis=1)) - wm)
        c_new = np.linalg.solve(a, b)
        diff = float(np.max(np.abs(c_new - c_m)))
        if collect_diffs is not None:
            collect_diffs.append(diff)
        if diff < fp_tol:
            return c_new, m
        c_m, w_prev = c_new, w
    raise FixedPointError(fp_max_iter, diff, fp_tol)


def step_semi_implicit(c_prev, mu, c0, tau: float, config: SolverConfig,
                       spec: KernelSpec) -> tuple[np.ndarray, int]:
    """One semi-implicit step of size ``tau``; returns (c_next, inner_iters).

    Raises FixedPointError when the inner loop exceeds its cap; the caller is
    expected to halve tau and retry.
    """
    c_prev = np.asarray(c_prev, dtype=float)
    mu = np.asarray(mu, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    if not (c_prev.shape == mu.shape == c0.shape):
        raise ValueError("c_prev, mu and c0 must have identical shapes")
    return _fixed_point_solve(c_prev, mu, c0, tau, config.lam, spec,
                              config.fp_tol, config.fp_max_iter)


def run(profile: RearrangedProfile, config: SolverConfig,
        spec: KernelSpec) -> Trajectory:
    """Integrate the level system until energy stabilization or the step cap.

    Records the trajectory every ``config.record_every`` steps (the initial
    state and the final step are always recorded).  The level ordering is
    checked after every step; losing it aborts the run, as does a step
    rejection cascade that drives tau below 1e-15.
    """
    config.validate()
    c = profile.levels.astype(float).copy()
    mu = profile.measures.astype(float)
    c0 = c.copy()

    tau0 = auto_tau0(c0, mu, spec) if config.tau0 == AUTO else float(config.tau0)

    traj = Trajectory()
    j_prev = energy(c, mu, spec)
    j_prev2: float | None = None
    traj._append(0, 0.0, 0.0, 0, j_prev, c)

    t = 0.0
    termination = TERMINATION_MAX_STEPS
    for n in range(1, config.max_steps + 1):
        tau = tau0 if n <= 1 else adaptive_tau(j_prev, j_prev2, tau0, config.tau_max)
        while True:
            try:
                c_next, iters = step_semi_implicit(c, mu, c0, tau, config, spec)
                break
            except FixedPointError:
                tau *= 0.5
                if tau < _TAU_FLOOR:
                    raise SolverError(
                        f"step {n}: rejected down to tau = {tau:.3e}") from None
        if np.any(np.diff(c_next) > 0.0):
            raise SolverError(f"step {n}: level ordering violated")

        t += tau
        j_next = energy(c_next, mu, spec)
        stabilized = abs(j_next - j_prev) < config.energy_tol
        last = stabilized or n == config.max_steps
        if n % config.record_every == 0 or last:
            traj._append(n, t, tau, iters, j_next, c_next)
        c = c_next
        j_prev2, j_prev = j_prev, j_next
        if stabilized:
            termination = TERMINATION_ENERGY
            break

    traj.termination = termination
    return traj
