"""A fully specified analysis problem: mesh, material, filter, randomness."""

from dataclasses import dataclass, field, replace

import numpy as np

from .design import Interpolation, build_filter, build_ledger, linear_modulus, project, simp_modulus
from .fe import FEModel, Realization
from .mesh import external_load_vector, load_derivative_matrix
from .solver import SolverParams

__all__ = ["Problem"]


@dataclass
class Problem:
    """Everything needed to evaluate the robust objective at a design.

    Attributes
    ----------
    model : FEModel
    W : sparse matrix
        Density filter.
    stoch : StochasticModel
    interp : Interpolation
    EL0 : float
        Linear-phase solid modulus.
    alpha : float
        Weight of the standard deviation in the objective.
    solver : SolverParams
    """

    model: FEModel
    W: object
    stoch: object
    interp: Interpolation = field(default_factory=Interpolation)
    EL0: float = 1.0
    alpha: float = 1.0
    solver: SolverParams = field(default_factory=SolverParams)

    @classmethod
    def create(cls, mesh, nu, nu_L, r, stoch, **kw):
        return cls(FEModel(mesh, nu, nu_L), build_filter(mesh, r), stoch, **kw)

    @property
    def mesh(self):
        return self.model.mesh

    @property
    def m(self):
        return self.stoch.m

    def with_(self, **kw):
        return replace(self, **kw)

    def deterministic(self):
        """Same problem with all uncertainty sources removed."""
        return replace(self, stoch=self.stoch.deterministic())

    # ------------------------------------------------------------------
    def filtered(self, x):
        return self.W @ np.asarray(x, dtype=float)

    def realization(self, rho_hat, xi=None):
        """Realization at the random input ``xi`` (``None`` means ``xi = 0``)."""
        xi = np.zeros(self.m) if xi is None else np.asarray(xi, dtype=float)
        it = self.interp
        eta = self.stoch.eta_at(xi)
        rho = project(rho_hat, it.beta, eta)
        rho_bar = project(rho_hat, it.beta, 0.5)
        E = simp_modulus(rho, it.p, self.stoch.E0_at(xi), it.eps)
        EL = linear_modulus(rho_bar, it.pl, self.EL0, it.eps_L)
        return Realization(rho, rho_bar, E, EL, it.beta0)

    def load_vector(self, xi=None):
        xi = np.zeros(self.m) if xi is None else xi
        return external_load_vector(self.mesh, self.stoch.load_at(xi))

    def load_derivatives(self):
        """``dF_ext / dxi`` as an (m, n_free) array."""
        D = np.zeros((self.m, self.mesh.n_free))
        if self.stoch.m1:
            D[self.stoch.blocks[0]] = load_derivative_matrix(self.mesh, self.stoch.load.Lc).T
        return D

    def ledger(self, rho_hat, c):
        return build_ledger(rho_hat, self.stoch.E0_jet(), self.stoch.eta_jet(),
                            self.interp.with_c(c), self.EL0)

    def volume_fraction(self, rho_hat):
        v = self.mesh.volumes
        return float(project(rho_hat, self.interp.beta, 0.5) @ v / v.sum())
