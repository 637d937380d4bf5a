"""Newton-Raphson equilibrium with load bisection and the adaptive-c rescue.

Protocol for one solve:

1. Starting from the cutoff ``c0``, attempt the full load in one increment
   (optionally from a warm-start displacement).
2. On Newton divergence or mesh distortion, halve the increment, down to
   ``min_step`` of the full load.
3. When even the minimum increment fails, raise ``c`` by ``dc`` and restart
   the load path from zero; give up once ``c`` would exceed ``c_max``.

The cutoff is not carried over between solves: every call starts at ``c0``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InadmissibleStateError, RankDeficiencyError, SolverFailure

__all__ = [
    "SolverParams",
    "EquilibriumState",
    "Factorization",
    "solve_equilibrium",
    "stability_monitor",
    "is_positive_definite",
]


@dataclass
class SolverParams:
    tol: float = 1e-6
    max_iter: int = 30
    min_step: float = 1.0 / 64.0
    c0: float = 0.1
    dc: float = 0.02
    c_max: float = 1.0


class Factorization:
    """Sparse LU of a symmetric tangent, reusable for many right-hand sides."""

    def __init__(self, K):
        self.K = K.tocsc()
        asym = abs(self.K - self.K.T).max() if self.K.nnz else 0.0
        scale = abs(self.K).max() if self.K.nnz else 1.0
        if asym > 1e-10 * scale:
            raise RankDeficiencyError("tangent stiffness is not symmetric")
        try:
            self.lu = splu(self.K)
        except RuntimeError as exc:  # exactly singular
            raise RankDeficiencyError(str(exc)) from exc

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            return self.lu.solve(b)
        shape = b.shape
        flat = b.reshape(-1, shape[-1]).T
        return self.lu.solve(np.ascontiguousarray(flat)).T.reshape(shape)


@dataclass
class EquilibriumState:
    u: np.ndarray
    converged: bool
    residual_norm: float
    load_factor: float
    c: float
    c_history: list = field(default_factory=list)
    iterations: int = 0
    coefficients: tuple = None
    _factor: Factorization = None

    def factorization(self, model):
        """Factorization of the tangent at the converged state (cached)."""
        if self._factor is None:
            K = model.tangent_stiffness(self.u, *self.coefficients)
            self._factor = Factorization(K)
        return self._factor


_STALL = 1e3 * np.finfo(float).eps


def _newton(model, coeffs, f_target, u, scale, params):
    """Newton iterations at a fixed load; returns (ok, u, rnorm, iterations)."""
    rprev = np.inf
    for it in range(params.max_iter + 1):
        try:
            fe = model.element_force(model.gather(u), *coeffs)
        except InadmissibleStateError:
            return False, u, np.inf, it
        R = model.mesh.assembler.vector(fe) - f_target
        rnorm = float(np.linalg.norm(R))
        if not np.isfinite(rnorm):
            return False, u, rnorm, it
        floor = 64.0 * np.finfo(float).eps * float(
            np.linalg.norm(model.mesh.assembler.vector(np.abs(fe))))
        if rnorm <= max(params.tol * scale, floor):
            return True, u, rnorm, it
        if it == params.max_iter or (it > 3 and rnorm > 1e3 * rprev):
            return False, u, rnorm, it
        rprev = rnorm
        try:
            K = model.mesh.assembler.matrix(model.element_tangent(model.gather(u), *coeffs))
            du = splu(K.tocsc()).solve(-R)
        except (InadmissibleStateError, RuntimeError):
            return False, u, rnorm, it
        if not np.all(np.isfinite(du)):
            return False, u, rnorm, it
        u = u + du
        # an update at the round-off level of u means the residual has hit its
        # attainable floor, which can sit well above 64 eps |f_int| when the
        # stress terms cancel; further iterations would only cycle
        if np.linalg.norm(du) <= _STALL * np.linalg.norm(u):
            return True, u, rnorm, it + 1
    return False, u, rnorm, params.max_iter


def _load_path(model, coeffs, f_ext, scale, params, u_start=None, lam0=0.0):
    u = np.zeros(model.n_free) if u_start is None else u_start.copy()
    lam, step, total = lam0, 1.0 - lam0, 0
    rnorm = np.inf
    while lam < 1.0:
        trial = min(lam + step, 1.0)
        ok, u_new, rnorm, it = _newton(model, coeffs, trial * f_ext, u, scale, params)
        total += it
        if ok:
            lam, u = trial, u_new
        else:
            step *= 0.5
            if step < params.min_step * (1.0 - 1e-12):
                return False, u, lam, rnorm, total
    return True, u, lam, rnorm, total


def solve_equilibrium(model, realization, f_ext, params=None, u_init=None):
    """Solve ``F_int(u) = F_ext`` for one realization.

    Parameters
    ----------
    model : FEModel
    realization : Realization
    f_ext : ndarray
        Free-DOF external load.
    params : SolverParams, optional
    u_init : ndarray, optional
        Warm start tried first at full load; on failure the standard load
        path from zero is used.

    Returns
    -------
    EquilibriumState

    Raises
    ------
    SolverFailure
        When the minimum step still fails at ``c = c_max``.
    """
    params = params or SolverParams()
    f_ext = np.asarray(f_ext, dtype=float)
    scale = max(float(np.linalg.norm(f_ext)), 1.0)
    c = params.c0
    history = []
    coeffs = realization.coefficients(c)
    if not np.any(f_ext):
        return EquilibriumState(np.zeros(model.n_free), True, 0.0, 1.0, c, [c], 0, coeffs)
    if u_init is not None:
        ok, u, rnorm, it = _newton(model, coeffs, f_ext, np.asarray(u_init, float), scale, params)
        if ok:
            return EquilibriumState(u, True, rnorm, 1.0, c, [c], it, coeffs)
    while True:
        history.append(c)
        coeffs = realization.coefficients(c)
        ok, u, lam, rnorm, it = _load_path(model, coeffs, f_ext, scale, params)
        if ok:
            return EquilibriumState(u, True, rnorm, 1.0, c, history, it, coeffs)
        c_next = round(c + params.dc, 12)
        if c_next > params.c_max + 1e-12:
            raise SolverFailure(
                f"no convergence at c = {c:.2f} (load factor {lam:.4f})", history)
        c = c_next


def is_positive_definite(K):
    """Cholesky test of a symmetric (sparse or dense) matrix."""
    A = K.toarray() if sp.issparse(K) else np.asarray(K)
    if A.size == 0:
        return True
    try:
        sla.cholesky(0.5 * (A + A.T), lower=True, check_finite=True)
        return True
    except sla.LinAlgError:
        return False


def stability_monitor(model, realization, f_ext, load_factors, rho_bar=None,
                      void_threshold=0.1, params=None):
    """First load factor at which the solid-only tangent loses definiteness.

    The equilibrium path is followed through ``load_factors`` (increasing)
    with the full model; at each converged step the tangent is rebuilt from
    the elements with ``rho_bar >= void_threshold`` only, DOFs no longer
    attached to any solid element are removed, and a Cholesky factorization
    decides positive definiteness.

    Returns
    -------
    float or None
        The first unstable load factor, or ``None`` if every step is stable.
    """
    params = params or SolverParams()
    rho_bar = realization.rho_bar if rho_bar is None else rho_bar
    solid = rho_bar >= void_threshold
    u = np.zeros(model.n_free)
    prev = 0.0
    scale = max(float(np.linalg.norm(f_ext)), 1.0)
    for lam in load_factors:
        coeffs = realization.coefficients(params.c0)
        ok, u_new, _, _, _ = _load_path(model, coeffs, lam * f_ext, scale, params, u_start=u,
                                        lam0=prev / lam)
        if not ok:
            return float(lam)
        u = u_new
        a, g, cL = coeffs
        ke = model.element_tangent(model.gather(u), a, g, cL) * solid[:, None, None]
        K = model.mesh.assembler.matrix(ke)
        keep = np.flatnonzero(np.asarray(abs(K).sum(axis=1)).ravel() > 0.0)
        if not is_positive_definite(K[keep][:, keep]):
            return float(lam)
        prev = lam
    return None
