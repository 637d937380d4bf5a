"""Second-order stochastic perturbation of the end compliance.

With the residual ``R(u, xi) = F_int(u, xi) - F_ext(xi)`` expanded about
``xi = 0``, the displacement derivatives solve linear systems that all share
the converged tangent ``K``:

    K u_k  = F_k - A[a_k p + a g_k k1 u + c_k kL u]
    K u_kl = -A[a_kl p + a_k k1 v_l + a_l k1 v_k + a k2(v_k, v_l)
                + a k1 (g_kl u + g_k u_l + g_l u_k)
                + c_kl kL u + c_k kL u_l + c_l kL u_k]

with ``v_k = g_k u + g u_k`` the derivative of the scaled state ``w = g u``.
The compliance ``f = F_ext . u`` then has

    f_k  = F_k . u + F . u_k
    f_kl = F_k . u_l + F_l . u_k + F . u_kl

and mean ``f + 1/2 sum_k f_kk``, variance ``sum f_k^2 + 1/2 sum_kl f_kl^2``.
Only pairs ``k <= l`` are solved; the symmetric partner is a view.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import OracleUnreliableError, SolverFailure
from .solver import solve_equilibrium

__all__ = ["PerturbationSolution", "perturbation_solve", "statistics", "mc_estimate",
           "MCResult", "compliance_at"]

log = logging.getLogger(__name__)


@dataclass
class PerturbationSolution:
    """Displacement and compliance derivatives at ``xi = 0``.

    ``U2`` is a full (m, m, n_free) array filled from the ``k <= l`` solves.
    """

    u0: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    F0: np.ndarray
    Fk: np.ndarray
    f0: float
    f1: np.ndarray
    f2: np.ndarray
    mean: float
    var: float
    state: object = None
    ledger: object = None
    tensors: object = None
    factor: object = None
    rho_hat: np.ndarray = None

    @property
    def m(self):
        return self.f1.size

    @property
    def std(self):
        return float(np.sqrt(max(self.var, 0.0)))


def statistics(f0, f1, f2):
    """Mean and variance from compliance derivatives.

    Parameters
    ----------
    f0 : float
    f1 : ndarray (m,)
    f2 : ndarray (m, m), symmetric
    """
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    if f1.size == 0:
        return float(f0), 0.0
    mean = f0 + 0.5 * np.trace(f2)
    iu = np.triu_indices(f1.size, 1)
    var = f1 @ f1 + 0.5 * np.sum(np.diag(f2) ** 2) + np.sum(f2[iu] ** 2)
    return float(mean), float(var)


def _pairs(m):
    return [(k, l) for k in range(m) for l in range(k, m)]


def perturbation_solve(problem, rho_hat, u_init=None, state=None):
    """Zeroth, first and second order solves at the design ``rho_hat``.

    Parameters
    ----------
    problem : Problem
    rho_hat : ndarray
        Filtered densities.
    u_init : ndarray, optional
        Warm start for the zeroth-order nonlinear solve.
    state : EquilibriumState, optional
        Reuse an already converged zeroth-order state.

    Returns
    -------
    PerturbationSolution
    """
    model, asm = problem.model, problem.mesh.assembler
    m = problem.m
    F0 = problem.load_vector()
    if state is None:
        state = solve_equilibrium(model, problem.realization(rho_hat), F0, problem.solver, u_init)
    u0 = state.u
    led = problem.ledger(rho_hat, state.c)
    a, g, c = led.a, led.g, led.c
    T = model.tensors(u0, g.v)
    fact = state.factorization(model)
    Fk = problem.load_derivatives()

    ue = model.gather(u0)
    p = T.p()
    k1u = T.k1(ue)
    kLu = T.kL(ue)

    # first order
    U1 = np.zeros((m, model.n_free))
    if m:
        Ge = (a.k.T[:, :, None] * p[None] + (a.v[None, :] * g.k.T)[:, :, None] * k1u[None]
              + c.k.T[:, :, None] * kLu[None])
        rhs = np.array([Fk[k] - asm.vector(Ge[k]) for k in range(m)])
        U1 = fact.solve(rhs)
    Uk = model.gather(U1.T).transpose(2, 0, 1) if m else np.zeros((0,) + ue.shape)
    V = g.k.T[:, :, None] * ue[None] + g.v[None, :, None] * Uk

    # second order, k <= l only
    U2 = np.zeros((m, m, model.n_free))
    pairs = _pairs(m)
    if m:
        k1V = T.k1(V)
        k1Uk = T.k1(Uk)
        kLUk = T.kL(Uk)
        K2 = T.k2(V[:, None], V[None, :])  # (m, m, n, 8)
        rhs = []
        for k, l in pairs:
            G = (a.kl[:, k, l, None] * p
                 + a.k[:, k, None] * k1V[l] + a.k[:, l, None] * k1V[k]
                 + a.v[:, None] * K2[k, l]
                 + a.v[:, None] * (g.kl[:, k, l, None] * k1u + g.k[:, k, None] * k1Uk[l]
                                   + g.k[:, l, None] * k1Uk[k])
                 + c.kl[:, k, l, None] * kLu + c.k[:, k, None] * kLUk[l]
                 + c.k[:, l, None] * kLUk[k])
            rhs.append(-asm.vector(G))
        sol = fact.solve(np.array(rhs))
        for (k, l), s in zip(pairs, sol):
            U2[k, l] = s
            U2[l, k] = s

    f0 = float(F0 @ u0)
    f1 = Fk @ u0 + U1 @ F0 if m else np.zeros(0)
    f2 = (Fk @ U1.T) + (Fk @ U1.T).T + U2 @ F0 if m else np.zeros((0, 0))
    mean, var = statistics(f0, f1, f2)
    return PerturbationSolution(u0, U1, U2, F0, Fk, f0, f1, f2, mean, var, state, led, T, fact,
                                np.asarray(rho_hat))


def compliance_at(problem, rho_hat, xi, u_init=None):
    """Compliance of a single realization by a full nonlinear solve."""
    f = problem.load_vector(xi)
    st = solve_equilibrium(problem.model, problem.realization(rho_hat, xi), f, problem.solver,
                           u_init)
    return float(f @ st.u), st


@dataclass
class MCResult:
    mean: float
    std: float
    se_mean: float
    se_std: float
    n_samples: int
    n_failed: int
    seed: int
    samples: np.ndarray


def mc_estimate(problem, rho_hat, n_samples, seed, u_init=None, max_fail_fraction=0.01):
    """Monte Carlo mean and standard deviation of the compliance.

    Samples ``xi ~ N(0, I)`` are drawn from ``numpy.random.default_rng(seed)``
    and each is solved to equilibrium.  Failed solves are excluded.

    Raises
    ------
    OracleUnreliableError
        If more than ``max_fail_fraction`` of the samples fail.
    """
    rng = np.random.default_rng(seed)
    xis = rng.standard_normal((n_samples, problem.m))
    vals, failed = [], 0
    for xi in xis:
        try:
            f, _ = compliance_at(problem, rho_hat, xi, u_init)
            vals.append(f)
        except SolverFailure:
            failed += 1
    if failed:
        log.warning("%d of %d Monte Carlo samples failed (seed %d)", failed, n_samples, seed)
    if failed > max_fail_fraction * n_samples:
        raise OracleUnreliableError(f"{failed} of {n_samples} samples failed")
    v = np.array(vals)
    n = v.size
    mean = float(v.mean())
    std = float(v.std(ddof=1)) if n > 1 else float("nan")
    se_mean = std / np.sqrt(n) if n > 1 else float("nan")
    se_std = std / np.sqrt(2.0 * (n - 1)) if n > 1 else float("nan")
    return MCResult(mean, std, se_mean, se_std, n, failed, seed, v)
