"""Outer optimization loop for the deterministic and robust formulations.

Each iteration runs: filter and project, zeroth-order equilibrium (with the
adaptive cutoff), perturbation statistics, adjoint gradient, symmetry
slaving, one MMA step and the continuation update.  The deterministic
formulation is the special case without random inputs, evaluated through a
dedicated classical adjoint.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import robust_objective_and_gradient, total_gradient
from .design import project, projection_partials
from .errors import InvalidArgumentError, SolverFailure
from .mesh import symmetry_masters
from .mma import MMAParams, MMAState, mma_update
from .perturbation import perturbation_solve
from .solver import solve_equilibrium

__all__ = [
    "Schedule",
    "Continuation",
    "OptimizationSettings",
    "OptimizationResult",
    "volume_constraint",
    "deterministic_objective_and_gradient",
    "design_variables",
    "optimize",
    "HISTORY_COLUMNS",
]

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ["iter", "p", "p_l", "beta", "c_max_this_iter", "objective", "mean", "std",
                   "constraint"]


@dataclass(frozen=True)
class Schedule:
    """Stepwise continuation ``min(start + floor(i / interval) * step, end)``."""

    start: float
    end: float
    step: float = 0.1
    interval: int = 20

    def __post_init__(self):
        if self.interval < 1:
            raise InvalidArgumentError("schedule interval must be at least 1")
        if self.end != self.start and self.step <= 0.0:
            raise InvalidArgumentError("schedule step must be positive")
        if self.end < self.start:
            raise InvalidArgumentError("schedules must be non-decreasing")

    @classmethod
    def constant(cls, value):
        return cls(value, value, 0.1, 1)

    def value(self, i):
        v = self.start + (i // self.interval) * self.step
        return min(round(v, 12), self.end)

    @property
    def iterations_to_end(self):
        """First iteration at which the schedule has reached ``end``."""
        if self.end == self.start:
            return 0
        return math.ceil((self.end - self.start) / self.step - 1e-9) * self.interval


@dataclass(frozen=True)
class Continuation:
    """Schedules of ``p``, ``p_l`` and ``beta`` plus a fixed tail."""

    p: Schedule = Schedule(1.0, 4.0)
    pl: Schedule = Schedule(4.0, 7.0)
    beta: Schedule = Schedule(1.0, 4.0)
    tail: int = 200

    def at(self, i):
        return self.p.value(i), self.pl.value(i), self.beta.value(i)

    @property
    def n_iterations(self):
        return max(self.p.iterations_to_end, self.pl.iterations_to_end,
                   self.beta.iterations_to_end) + self.tail


@dataclass
class OptimizationSettings:
    """Settings of one optimization run.

    Attributes
    ----------
    volume_fraction : float
    robust : bool
        ``False`` selects the deterministic formulation (random inputs off).
    continuation : Continuation
    mma : MMAParams
    max_iterations : int, optional
        Truncates the schedule-implied iteration budget.
    """

    volume_fraction: float = 0.5
    robust: bool = True
    continuation: Continuation = field(default_factory=Continuation)
    mma: MMAParams = field(default_factory=MMAParams)
    max_iterations: int | None = None

    def __post_init__(self):
        if not 0.0 < self.volume_fraction <= 1.0:
            raise InvalidArgumentError("volume fraction must lie in (0, 1]")

    @property
    def n_iterations(self):
        n = self.continuation.n_iterations
        return n if self.max_iterations is None else min(n, self.max_iterations)


@dataclass
class OptimizationResult:
    x: np.ndarray
    rho_hat: np.ndarray
    rho_bar: np.ndarray
    history: list
    problem: object


def volume_constraint(problem, x, volume_fraction):
    """Deterministic volume constraint at ``eta = 0.5`` and its gradient.

    Returns
    -------
    tuple
        ``(phi_1, dphi_1/dx)``
    """
    rho_hat = problem.filtered(x)
    v = problem.mesh.volumes
    V = v.sum()
    beta = problem.interp.beta
    value = float(project(rho_hat, beta, 0.5) @ v / V - volume_fraction)
    d = projection_partials(rho_hat, beta, 0.5)["x"] * v / V
    return value, total_gradient(d, problem.W)


def deterministic_objective_and_gradient(problem, rho_hat, u_init=None):
    """End compliance and its classical adjoint gradient (no random inputs).

    Returns
    -------
    tuple
        ``(f, dF/dx, state)``
    """
    model = problem.model
    F = problem.load_vector()
    state = solve_equilibrium(model, problem.realization(rho_hat), F, problem.solver, u_init)
    led = problem.ledger(rho_hat, state.c)
    a, g, c = led.a, led.g, led.c
    T = model.tensors(state.u, g.v)
    lam = state.factorization(model).solve(-F - model.mesh.assembler.vector(
        np.zeros((problem.mesh.n_ele, 8))))
    ue, le = model.gather(state.u), model.gather(lam)
    dot = lambda x, y: np.einsum("ea,ea->e", x, y)  # noqa: E731
    G = a.r * dot(le, T.p()) + a.v * g.r * dot(T.k1(le), ue) + c.r * dot(T.kL(le), ue)
    return float(F @ state.u), total_gradient(G, problem.W), state


def design_variables(mesh):
    """Indices of the free master variables and the slave-to-master map.

    Passive elements are excluded; with symmetry maps only the element of
    lowest index in each mirror orbit is free.
    """
    master = symmetry_masters(mesh)
    free = np.flatnonzero((master == np.arange(mesh.n_ele)) & ~mesh.passive)
    return free, master


def optimize(problem, settings, x0=None, callback=None):
    """Run the optimization.

    Parameters
    ----------
    problem : Problem
        Random inputs are ignored when ``settings.robust`` is false.
    settings : OptimizationSettings
    x0 : ndarray, optional
        Initial design (default uniform ``V_f`` with passive elements at 1).
    callback : callable, optional
        ``callback(iteration, x, row)`` after every iteration.

    Returns
    -------
    OptimizationResult

    Raises
    ------
    SolverFailure
        Carries the last accepted design in ``exc.design``.
    """
    mesh = problem.mesh
    if not settings.robust:
        problem = problem.deterministic()
    free, master = design_variables(mesh)
    x = np.full(mesh.n_ele, settings.volume_fraction) if x0 is None else np.array(x0, float)
    x[mesh.passive] = 1.0
    x = x[master]
    state = MMAState.start(x[free])
    history = []
    scale = None
    u_prev = None
    for it in range(settings.n_iterations):
        p, pl, beta = settings.continuation.at(it)
        pb = problem.with_(interp=replace(problem.interp, p=p, pl=pl, beta=beta))
        rho_hat = pb.filtered(x)
        try:
            if settings.robust:
                sol = perturbation_solve(pb, rho_hat, u_init=u_prev)
                J, mean, std, dJ = robust_objective_and_gradient(pb, sol)
                st = sol.state
            else:
                J, dJ, st = deterministic_objective_and_gradient(pb, rho_hat, u_prev)
                mean, std = J, 0.0
        except SolverFailure as exc:
            exc.design = x.copy()
            exc.iteration = it
            raise
        u_prev = st.u
        vol, dvol = volume_constraint(pb, x, settings.volume_fraction)
        row = {"iter": it, "p": p, "p_l": pl, "beta": beta, "c_max_this_iter": max(st.c_history),
               "objective": J, "mean": mean, "std": std, "constraint": vol}
        history.append(row)
        log.info("iter %d  J=%.6g  mean=%.6g  std=%.6g  vol=%.3e  c=%.2f", it, J, mean, std, vol,
                 row["c_max_this_iter"])
        if callback is not None:
            callback(it, x, row)
        if scale is None:
            scale = abs(J) if J != 0.0 else 1.0
        # slaving: gradients of slaved variables are summed onto their masters
        gJ = np.bincount(master, weights=dJ, minlength=mesh.n_ele)[free] / scale
        gV = np.bincount(master, weights=dvol, minlength=mesh.n_ele)[free]
        xf = mma_update(state, x[free], J / scale, gJ, [vol], gV[None, :], 0.0, 1.0, settings.mma)
        x = x.copy()
        x[free] = np.clip(xf, 0.0, 1.0)
        x = x[master]
    rho_hat = problem.filtered(x)
    beta = settings.continuation.at(max(settings.n_iterations - 1, 0))[2]
    return OptimizationResult(x, rho_hat, project(rho_hat, beta, 0.5), history, problem)
