"""Design parameterization: filter, projection and material interpolations.

The density chain is ``x -> rho_hat = W x -> rho = proj(rho_hat; beta, eta)``.
The nonlinear (hyperelastic) energy uses the stochastic ``rho`` for both its
SIMP modulus and the energy interpolation factor ``gamma``; the linear
energy uses ``rho_bar``, the projection at the fixed cutoff ``eta = 0.5``, so
it carries no geometric randomness.

:func:`build_ledger` returns per-element :class:`~rto2d.jets.Jet` objects
for the three scalar products that multiply the element tensors:

* ``a = gamma * E``          (multiplies the stress vector)
* ``g = gamma``              (scales the displacement gradient)
* ``c = E_L (1 - gamma_bar^2)`` (multiplies the linear stiffness)

and ``b = a * g`` (multiplies the hyperelastic tangent).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree
from scipy.special import expit

from .jets import Jet

__all__ = [
    "Interpolation",
    "DesignField",
    "Ledger",
    "build_filter",
    "project",
    "projection_partials",
    "project_jet",
    "simp_modulus",
    "simp_partials",
    "gamma_factor",
    "gamma_partials",
    "linear_modulus",
    "build_ledger",
    "design_field",
]

_RHO_FLOOR = 1e-12


@dataclass
class Interpolation:
    """Interpolation parameters.

    Attributes
    ----------
    p, pl : float
        SIMP penalties of the nonlinear and linear moduli.
    beta : float
        Projection slope.
    beta0 : float
        Slope of the energy interpolation sigmoid.
    c : float
        Cutoff of the energy interpolation sigmoid.
    eps, eps_L : float
        Void stiffness ratios.
    """

    p: float = 1.0
    pl: float = 4.0
    beta: float = 1.0
    beta0: float = 120.0
    c: float = 0.1
    eps: float = 1e-6
    eps_L: float = 1e-6

    def with_c(self, c):
        return Interpolation(self.p, self.pl, self.beta, self.beta0, c, self.eps, self.eps_L)


# ----------------------------------------------------------------------
# filter
# ----------------------------------------------------------------------
def build_filter(mesh, r):
    """Cone-weight density filter ``W`` (CSR, rows sum to one).

    ``w_pq = max(r - |X_p - X_q|, 0) * v_q`` normalized per row.
    """
    if not r > 0:
        raise ValueError("filter radius must be positive")
    X = mesh.centroids
    tree = cKDTree(X)
    D = tree.sparse_distance_matrix(tree, r, output_type="coo_matrix")
    rows = np.concatenate([D.row, np.arange(mesh.n_ele)])
    cols = np.concatenate([D.col, np.arange(mesh.n_ele)])
    dist = np.concatenate([D.data, np.zeros(mesh.n_ele)])
    # sparse_distance_matrix drops exact zeros; keep one diagonal entry
    off = rows != cols
    keep = np.concatenate([off[: D.nnz], np.ones(mesh.n_ele, dtype=bool)])
    rows, cols, dist = rows[keep], cols[keep], dist[keep]
    w = (r - dist) * mesh.volumes[cols]
    pos = w > 0.0
    W = sp.csr_matrix((w[pos], (rows[pos], cols[pos])), shape=(mesh.n_ele,) * 2)
    W.sum_duplicates()
    W.sort_indices()
    s = np.asarray(W.sum(axis=1)).ravel()
    return sp.diags(1.0 / s) @ W


# ----------------------------------------------------------------------
# projection
# ----------------------------------------------------------------------
def project(rho_hat, beta, eta=0.5):
    """Smoothed Heaviside projection with slope ``beta`` and cutoff ``eta``."""
    A = np.tanh(beta * eta)
    return (A + np.tanh(beta * (rho_hat - eta))) / (A + np.tanh(beta * (1.0 - eta)))


def projection_partials(rho_hat, beta, eta):
    """Value and partials of the projection in ``x = rho_hat`` and ``y = eta``.

    Returns
    -------
    dict
        Keys ``f, x, y, yy, xy, xyy``.
    """
    A = np.tanh(beta * eta)
    Bq = np.tanh(beta * (rho_hat - eta))
    C = np.tanh(beta * (1.0 - eta))
    sA, sB, sC = 1.0 - A * A, 1.0 - Bq * Bq, 1.0 - C * C
    A_y, A_yy = beta * sA, -2.0 * beta**2 * A * sA
    B_x, B_y = beta * sB, -beta * sB
    B_xy = 2.0 * beta**2 * Bq * sB
    B_yy = -2.0 * beta**2 * Bq * sB
    B_xyy = -2.0 * beta**3 * (1.0 - 3.0 * Bq * Bq) * sB
    C_y, C_yy = -beta * sC, -2.0 * beta**2 * C * sC
    N, D = A + Bq, A + C
    N_y, N_yy = A_y + B_y, A_yy + B_yy
    D_y, D_yy = A_y + C_y, A_yy + C_yy
    Q = 1.0 / D
    Q_y = -D_y * Q * Q
    Q_yy = 2.0 * D_y * D_y * Q**3 - D_yy * Q * Q
    return {
        "f": N * Q,
        "x": B_x * Q,
        "y": N_y * Q + N * Q_y,
        "yy": N_yy * Q + 2.0 * N_y * Q_y + N * Q_yy,
        "xy": B_xy * Q + B_x * Q_y,
        "xyy": B_xyy * Q + 2.0 * B_xy * Q_y + B_x * Q_yy,
    }


def project_jet(rho_hat, eta, beta):
    """Jet of ``rho`` from ``rho_hat`` values and an ``eta`` jet (no r part)."""
    d = projection_partials(rho_hat, beta, eta.v)
    yk = eta.k
    yy = yk[:, :, None] * yk[:, None, :]
    return Jet(
        v=d["f"],
        k=d["y"][:, None] * yk,
        kl=d["yy"][:, None, None] * yy + d["y"][:, None, None] * eta.kl,
        r=d["x"],
        kr=d["xy"][:, None] * yk,
        klr=d["xyy"][:, None, None] * yy + d["xy"][:, None, None] * eta.kl,
    )


# ----------------------------------------------------------------------
# scalar interpolations
# ----------------------------------------------------------------------
def simp_partials(rho, p, eps=1e-6):
    """``h(rho) = eps + (1 - eps) rho^p`` and its first three derivatives."""
    rc = np.maximum(rho, _RHO_FLOOR)
    s = 1.0 - eps
    h0 = eps + s * rc**p
    h1 = s * p * rc ** (p - 1.0)
    h2 = s * p * (p - 1.0) * rc ** (p - 2.0)
    h3 = s * p * (p - 1.0) * (p - 2.0) * rc ** (p - 3.0)
    return h0, h1, h2, h3


def simp_modulus(rho, p, E0, eps=1e-6):
    """SIMP modulus ``[eps + (1 - eps) rho^p] E0``."""
    return (eps + (1.0 - eps) * np.asarray(rho, dtype=float) ** p) * E0


def linear_modulus(rho_bar, pl, EL0, eps_L=1e-6):
    """Linear-phase modulus ``[eps_L + (1 - eps_L) rho^pl] E_L0``."""
    return simp_modulus(rho_bar, pl, EL0, eps_L)


def gamma_factor(rho, beta0=120.0, c=0.1):
    """Energy interpolation factor, evaluated as a stable sigmoid."""
    return expit(beta0 * (np.asarray(rho, dtype=float) - c))


def gamma_partials(rho, beta0=120.0, c=0.1):
    """``gamma`` and its first three derivatives in ``rho``."""
    g = gamma_factor(rho, beta0, c)
    q = g * (1.0 - g)
    return g, beta0 * q, beta0**2 * q * (1.0 - 2.0 * g), beta0**3 * q * (1.0 - 6.0 * g + 6.0 * g * g)


# ----------------------------------------------------------------------
# design field and ledger
# ----------------------------------------------------------------------
@dataclass
class DesignField:
    """The three-stage density chain for one design vector."""

    x: np.ndarray
    rho_hat: np.ndarray
    rho: np.ndarray
    rho_bar: np.ndarray


def design_field(x, W, beta, eta=0.5):
    """Evaluate ``x -> rho_hat -> rho`` (at cutoff ``eta``) and ``rho_bar``."""
    x = np.asarray(x, dtype=float)
    rho_hat = W @ x
    return DesignField(x, rho_hat, project(rho_hat, beta, eta), project(rho_hat, beta, 0.5))


@dataclass
class Ledger:
    """Scalar products and their derivatives for every element."""

    a: Jet
    g: Jet
    c: Jet
    rho: Jet
    E: Jet

    @property
    def b(self):
        return self.a * self.g

    @property
    def m(self):
        return self.a.m


def build_ledger(rho_hat, E0, eta, interp, EL0):
    """Ledger jets for all elements.

    Parameters
    ----------
    rho_hat : ndarray (n,)
        Filtered densities.
    E0 : Jet
        Solid Young's modulus field as a function of xi.
    eta : Jet
        Projection cutoff field as a function of xi.
    interp : Interpolation
    EL0 : float
        Linear-phase solid modulus.

    Returns
    -------
    Ledger
    """
    n, m = E0.n, E0.m
    rho = project_jet(rho_hat, eta, interp.beta)
    E = rho.compose(*simp_partials(rho.v, interp.p, interp.eps)) * E0
    g = rho.compose(*gamma_partials(rho.v, interp.beta0, interp.c))
    a = g * E
    # linear phase: fixed cutoff, so only a rho_hat dependence survives
    pb = projection_partials(rho_hat, interp.beta, 0.5)
    rb = Jet.constant(0.0, n, m)
    rb.v, rb.r = pb["f"], pb["x"]
    gb = rb.compose(*gamma_partials(rb.v, interp.beta0, interp.c))
    one_minus = (gb * gb).scale(-1.0) + 1.0
    c = rb.compose(*simp_partials(rb.v, interp.pl, interp.eps_L)).scale(EL0) * one_minus
    return Ledger(a=a, g=g, c=c, rho=rho, E=E)
