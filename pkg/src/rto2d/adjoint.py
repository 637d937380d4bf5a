"""Adjoint gradient of the robust objective ``J = E[f] + alpha * std[f]``.

The Lagrangian adds ``lambda_0 . R_0 + sum_k lambda_k . R_k +
sum_{k<=l} lambda_kl . R_kl`` to ``J``.  Every state block has the same
Jacobian ``K`` (symmetric), so the adjoints are obtained tier by tier,
second order first:

    K lambda_kl = -dJ/du_kl
    K lambda_q  = -dJ/du_q - sum_{(k,l) ni q} (dR_kl/du_q)^T lambda_kl
    K lambda_0  = -dJ/du_0 - sum_k (dR_k/du_0)^T lambda_k
                           - sum_{k<=l} (dR_kl/du_0)^T lambda_kl

after which the explicit ``rho_hat`` partial of the Lagrangian is
element-diagonal and the design gradient is ``W^T dL/drho_hat``.

Because the element tensors are derivatives of a potential, every
``k2``/``k3`` contraction with an adjoint vector is symmetric in its slots,
which lets the transposed residual partials be evaluated as element vectors.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ObjectivePartials",
    "AdjointSolution",
    "objective_partials",
    "solve_adjoints",
    "rho_hat_gradient",
    "total_gradient",
    "robust_objective_and_gradient",
    "cdm_gradient",
    "STD_GUARD",
]

STD_GUARD = 1e-9


@dataclass
class ObjectivePartials:
    """Partials of ``J`` with respect to the state blocks (``dJ/dx = 0``)."""

    du0: np.ndarray
    du1: np.ndarray  # (m, n_free)
    du2: np.ndarray  # (m, m, n_free), entries used for k <= l
    value: float
    mean: float
    std: float


def objective_partials(sol, alpha):
    """State partials of the robust objective.

    The standard deviation in denominators is guarded by
    ``max(std, STD_GUARD)`` so the gradient stays finite at ``Var = 0``.
    """
    m = sol.m
    std = float(np.sqrt(max(sol.var, 0.0)))
    s = max(std, STD_GUARD)
    w = alpha / s
    F0, Fk, f1, f2 = sol.F0, sol.Fk, sol.f1, sol.f2
    du0 = F0 + w * (f1 @ Fk) if m else F0.copy()
    du1 = np.zeros((m, F0.size))
    du2 = np.zeros((m, m, F0.size))
    for q in range(m):
        du1[q] = Fk[q] + w * (f1[q] * F0 + f2[:, q] @ Fk)
        for l in range(q, m):
            if l == q:
                du2[q, q] = (0.5 + 0.5 * w * f2[q, q]) * F0
            else:
                du2[q, l] = w * f2[q, l] * F0
    return ObjectivePartials(du0, du1, du2, sol.mean + alpha * std, sol.mean, std)


@dataclass
class AdjointSolution:
    lam0: np.ndarray
    lam1: np.ndarray
    lam2: dict
    grad_rho_hat: np.ndarray = None


def _element_terms(sol):
    """Shared element quantities: state vectors and scaled states."""
    model, T, led = sol.tensors.model, sol.tensors, sol.ledger
    g = led.g
    m = sol.m
    ue = model.gather(sol.u0)
    Uk = model.gather(sol.U1.T).transpose(2, 0, 1) if m else np.zeros((0,) + ue.shape)
    V = g.k.T[:, :, None] * ue[None] + g.v[None, :, None] * Uk
    return model, T, led, ue, Uk, V


def solve_adjoints(sol, partials, pair_order=None):
    """Three-tier adjoint solve sharing the zeroth-order factorization.

    Parameters
    ----------
    sol : PerturbationSolution
    partials : ObjectivePartials
    pair_order : list of (k, l), optional
        Processing order of the second-order pairs (results are order
        independent up to round-off).
    """
    model, T, led, ue, Uk, V = _element_terms(sol)
    asm = model.mesh.assembler
    a, g, c = led.a, led.g, led.c
    m = sol.m
    fact = sol.factor
    pairs = pair_order or [(k, l) for k in range(m) for l in range(k, m)]

    lam2 = {}
    if pairs:
        L2 = fact.solve(np.array([-partials.du2[k, l] for k, l in pairs]))
        lam2 = {kl: L2[i] for i, kl in enumerate(pairs)}

    # tier 1
    rhs1 = -partials.du1.copy()
    contrib0 = np.zeros((model.mesh.n_ele, 8))
    ab = lambda q: a.k[:, q] * g.v + a.v * g.k[:, q]  # noqa: E731
    b0 = a.v * g.v
    for (k, l) in pairs:
        Le = model.gather(lam2[(k, l)])
        k1L = T.k1(Le)
        kLL = T.kL(Le)
        K2k = T.k2(Le, V[k])
        K2l = K2k if k == l else T.k2(Le, V[l])
        mult = 2.0 if k == l else 1.0
        # d R_kl / d u_k  and  d R_kl / d u_l
        dk = (ab(l)[:, None] * k1L + b0[:, None] * K2l + c.k[:, l, None] * kLL)
        rhs1[k] -= mult * asm.vector(dk) if k == l else asm.vector(dk)
        if k != l:
            dl = (ab(k)[:, None] * k1L + b0[:, None] * K2k + c.k[:, k, None] * kLL)
            rhs1[l] -= asm.vector(dl)
        # d R_kl / d u_0
        Vkl = (g.kl[:, k, l, None] * ue + g.k[:, k, None] * Uk[l] + g.k[:, l, None] * Uk[k]
               + g.v[:, None] * model.gather(sol.U2[k, l]))
        coef1 = (a.kl[:, k, l] * g.v + a.k[:, k] * g.k[:, l] + a.k[:, l] * g.k[:, k]
                 + a.v * g.kl[:, k, l])
        contrib0 += (coef1[:, None] * k1L + ab(k)[:, None] * K2l + ab(l)[:, None] * K2k
                     + b0[:, None] * T.k2(Le, Vkl) + b0[:, None] * T.k3(Le, V[k], V[l])
                     + c.kl[:, k, l, None] * kLL)
    lam1 = fact.solve(rhs1) if m else np.zeros((0, model.n_free))

    for k in range(m):
        Le = model.gather(lam1[k])
        contrib0 += (ab(k)[:, None] * T.k1(Le) + b0[:, None] * T.k2(Le, V[k])
                     + c.k[:, k, None] * T.kL(Le))
    rhs0 = -partials.du0 - asm.vector(contrib0)
    lam0 = fact.solve(rhs0)
    return AdjointSolution(lam0, lam1, lam2)


def rho_hat_gradient(sol, adj):
    """Element-wise ``rho_hat`` partial of the Lagrangian."""
    model, T, led, ue, Uk, V = _element_terms(sol)
    a, g, c = led.a, led.g, led.c
    p = T.p()
    dot = lambda x, y: np.einsum("ea,ea->e", x, y)  # noqa: E731

    # zeroth order
    Le = model.gather(adj.lam0)
    k1L = T.k1(Le)
    kLL = T.kL(Le)
    G = a.r * dot(Le, p) + a.v * g.r * dot(k1L, ue) + c.r * dot(kLL, ue)

    # first order
    for k in range(sol.m):
        Le = model.gather(adj.lam1[k])
        k1L, kLL = T.k1(Le), T.kL(Le)
        K2k = T.k2(Le, V[k])
        Vkr = g.kr[:, k, None] * ue + g.r[:, None] * Uk[k]
        G += (a.kr[:, k] * dot(Le, p) + a.k[:, k] * g.r * dot(k1L, ue) + a.r * dot(k1L, V[k])
              + a.v * g.r * dot(K2k, ue) + a.v * dot(k1L, Vkr)
              + c.kr[:, k] * dot(kLL, ue) + c.r * dot(kLL, Uk[k]))

    # second order
    for (k, l), lam in adj.lam2.items():
        Le = model.gather(lam)
        k1L, kLL = T.k1(Le), T.kL(Le)
        K2k = T.k2(Le, V[k])
        K2l = K2k if k == l else T.k2(Le, V[l])
        Ukl = model.gather(sol.U2[k, l])
        Vkl = (g.kl[:, k, l, None] * ue + g.k[:, k, None] * Uk[l] + g.k[:, l, None] * Uk[k]
               + g.v[:, None] * Ukl)
        Vkr = g.kr[:, k, None] * ue + g.r[:, None] * Uk[k]
        Vlr = g.kr[:, l, None] * ue + g.r[:, None] * Uk[l]
        Vklr = (g.klr[:, k, l, None] * ue + g.kr[:, k, None] * Uk[l]
                + g.kr[:, l, None] * Uk[k] + g.r[:, None] * Ukl)
        K2kl = T.k2(Le, Vkl)
        K3 = T.k3(Le, V[k], V[l])
        gr = g.r
        G += (a.klr[:, k, l] * dot(Le, p)
              + a.kl[:, k, l] * gr * dot(k1L, ue)
              + a.kr[:, k] * dot(k1L, V[l]) + a.kr[:, l] * dot(k1L, V[k])
              + a.k[:, k] * gr * dot(K2l, ue) + a.k[:, l] * gr * dot(K2k, ue)
              + a.k[:, k] * dot(k1L, Vlr) + a.k[:, l] * dot(k1L, Vkr)
              + a.r * dot(K2k, V[l])
              + a.v * gr * dot(K3, ue)
              + a.v * dot(K2l, Vkr) + a.v * dot(K2k, Vlr)
              + a.r * dot(k1L, Vkl)
              + a.v * gr * dot(K2kl, ue)
              + a.v * dot(k1L, Vklr)
              + c.klr[:, k, l] * dot(kLL, ue) + c.kr[:, k] * dot(kLL, Uk[l])
              + c.kr[:, l] * dot(kLL, Uk[k]) + c.r * dot(kLL, Ukl))
    adj.grad_rho_hat = G
    return G


def total_gradient(grad_rho_hat, W):
    """Chain through the filter: ``dJ/dx = W^T dJ/drho_hat``."""
    return W.T @ grad_rho_hat


def robust_objective_and_gradient(problem, sol, alpha=None):
    """Objective value, statistics and design gradient at a solved state.

    Returns
    -------
    tuple
        ``(J, mean, std, dJ/dx)``
    """
    alpha = problem.alpha if alpha is None else alpha
    part = objective_partials(sol, alpha)
    adj = solve_adjoints(sol, part)
    G = rho_hat_gradient(sol, adj)
    return part.value, part.mean, part.std, total_gradient(G, problem.W)


def cdm_gradient(evaluate, x, h=1e-6, elements=None):
    """Central differences of a scalar function of the design vector.

    Parameters
    ----------
    evaluate : callable
        ``evaluate(x) -> float``; may raise to flag a failed evaluation.
    x : ndarray
    h : float
    elements : iterable of int, optional
        Subset of components (default all).

    Returns
    -------
    ndarray
        Gradient with ``nan`` where either evaluation failed.
    """
    x = np.asarray(x, dtype=float)
    idx = range(x.size) if elements is None else elements
    g = np.full(x.size, np.nan)
    for e in idx:
        xp, xm = x.copy(), x.copy()
        xp[e] += h
        xm[e] -= h
        try:
            g[e] = (evaluate(xp) - evaluate(xm)) / (2.0 * h)
        except Exception:  # noqa: BLE001 - flagged and excluded by the caller
            g[e] = np.nan
    return g
