"""Element kernels of the energy-interpolated total-Lagrangian model.

For element ``e`` with displacement ``u_e`` and scalars ``a = gamma E``,
``g = gamma`` and ``c = E_L (1 - gamma_bar^2)``:

    F_int^e = a * p(g u_e) + c * k_L u_e,
    K_T^e   = a g * k_1(g u_e) + c * k_L,

where ``p(w) = int B : P(I + B w) dV`` is evaluated at unit modulus and
``k_1, k_2, k_3`` are its first three derivatives in ``w``.  Higher
derivatives are only ever applied to direction vectors, never stored.
"""

from dataclasses import dataclass

import numpy as np

from . import material
from .errors import InadmissibleStateError
from .mesh import shape_gradients

__all__ = ["FEModel", "ElementTensors", "Realization"]


@dataclass
class Realization:
    """Density and modulus fields of one random realization.

    The energy interpolation factor depends on the adaptive cutoff ``c`` and
    is therefore produced on demand by :meth:`coefficients`.
    """

    rho: np.ndarray
    rho_bar: np.ndarray
    E: np.ndarray
    EL: np.ndarray
    beta0: float = 120.0

    def coefficients(self, c):
        """Element scalars ``(a, g, c_L)`` for the cutoff ``c``."""
        from .design import gamma_factor

        g = gamma_factor(self.rho, self.beta0, c)
        gb = gamma_factor(self.rho_bar, self.beta0, c)
        return g * self.E, g, self.EL * (1.0 - gb * gb)


class FEModel:
    """Mesh plus unit-modulus material data.

    Parameters
    ----------
    mesh : Mesh2D
    nu : float
        Poisson ratio of the hyperelastic phase.
    nu_L : float
        Poisson ratio of the linear phase.
    """

    def __init__(self, mesh, nu, nu_L):
        self.mesh = mesh
        self.ops = shape_gradients(mesh)
        self.nu, self.nu_L = nu, nu_L
        self.kappa, self.mu = material.unit_moduli(nu)
        D = material.linear_elasticity_voigt(*material.unit_moduli(nu_L))
        BL, w = self.ops.BL, self.ops.wdet
        self.kL = np.einsum("eqsa,st,eqtb,eq->eab", BL, D, BL, w)

    @property
    def n_free(self):
        return self.mesh.n_free

    def gather(self, u):
        return self.mesh.assembler.gather(u)

    def grad(self, ue):
        """Displacement gradient at Gauss points, ``(..., n, 4, 2, 2)``."""
        B = self.ops.B
        n, q = B.shape[:2]
        flat = B.reshape(n, 4 * q, 8) @ np.asarray(ue)[..., None]
        return flat.reshape(flat.shape[:-2] + (q, 2, 2))

    def deformation(self, we):
        return np.eye(2) + self.grad(we)

    def stress_vector(self, we):
        """``p(w)`` for all elements, ``(n, 8)``."""
        F = self.deformation(we)
        P = material.pk1_stress(F, self.kappa, self.mu)
        return np.einsum("eqij,eqija,eq->ea", P, self.ops.B, self.ops.wdet)

    def _check(self, F):
        J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        if not np.all(J > 0.0):
            raise InadmissibleStateError("mesh distortion: J <= 0 at a Gauss point")

    def element_force(self, ue, a, g, cL):
        we = g[:, None] * ue
        F = self.deformation(we)
        self._check(F)
        P = material.pk1_stress(F, self.kappa, self.mu)
        pe = np.einsum("eqij,eqija,eq->ea", P, self.ops.B, self.ops.wdet)
        return a[:, None] * pe + cL[:, None] * np.einsum("eab,eb->ea", self.kL, ue)

    def element_tangent(self, ue, a, g, cL):
        we = g[:, None] * ue
        F = self.deformation(we)
        self._check(F)
        k1 = self._btab(material.tangent_A4(F, self.kappa, self.mu))
        return (a * g)[:, None, None] * k1 + cL[:, None, None] * self.kL

    def _btab(self, A4):
        """``int B : A4 : B dV`` as (n, 8, 8) via batched matrix products."""
        n = A4.shape[0]
        B = self.ops.B.reshape(n, 4, 4, 8)
        A = A4.reshape(n, 4, 4, 4) * self.ops.wdet[:, :, None, None]
        return np.einsum("eqsa,eqsb->eab", B, A @ B)

    def internal_force(self, u, a, g, cL):
        """Assembled internal force on the free DOFs.

        Raises
        ------
        InadmissibleStateError
            On a non-positive Jacobian of the interpolated deformation.
        """
        return self.mesh.assembler.vector(self.element_force(self.gather(u), a, g, cL))

    def tangent_stiffness(self, u, a, g, cL):
        """Assembled sparse tangent stiffness on the free DOFs."""
        return self.mesh.assembler.matrix(self.element_tangent(self.gather(u), a, g, cL))

    def tensors(self, u, g):
        """:class:`ElementTensors` at the state ``w = g u``."""
        return ElementTensors(self, g[:, None] * self.gather(u))


class ElementTensors:
    """Unit-modulus element tensors at a fixed state ``w_e``.

    The stress and ``A4`` at every Gauss point are computed lazily; ``k2``
    and ``k3`` use exact mixed directional derivatives of the stress, so the
    sixth- and eighth-order tangents are only formed for the dense
    diagnostics.  The ``k`` operators act on element vectors with optional
    leading batch axes and return element vectors.
    """

    def __init__(self, model, we):
        self.model = model
        self.we = we
        self.F = model.deformation(we)
        model._check(self.F)
        self._cache = {}

    def _tensor(self, order):
        if order not in self._cache:
            m = self.model
            self._cache[order] = material.tangent(order, self.F, m.kappa, m.mu)
        return self._cache[order]

    def _to_vec(self, S):
        if "Bw" not in self._cache:
            B, w = self.model.ops.B, self.model.ops.wdet
            n, q = w.shape
            self._cache["Bw"] = (B * w[:, :, None, None, None]).reshape(n, 4 * q, 8)
        Bw = self._cache["Bw"]
        flat = S.reshape(S.shape[:-4] + (Bw.shape[0], 1, Bw.shape[1]))
        return (flat @ Bw)[..., 0, :]

    def _directional(self, *vectors):
        m = self.model
        return material.directional_stress(self.F, m.kappa, m.mu, [m.grad(v) for v in vectors])

    def p(self):
        return self._to_vec(self._tensor(2))

    def k1_matrix(self):
        return self.model._btab(self._tensor(4))

    def k1(self, x):
        Hx = self.model.grad(x)
        return self._to_vec(np.einsum("eqijkl,...eqkl->...eqij", self._tensor(4), Hx))

    def k2(self, x, y):
        return self._to_vec(self._directional(x, y))

    def k3(self, x, y, z):
        return self._to_vec(self._directional(x, y, z))

    def kL(self, x):
        return np.einsum("eab,...eb->...ea", self.model.kL, x)

    def full_k2(self):
        """Dense ``k_2`` per element, ``(n, 8, 8, 8)``; diagnostics only."""
        B, w = self.model.ops.B, self.model.ops.wdet
        return np.einsum("eqijklmn,eqija,eqklb,eqmnc,eq->eabc", self._tensor(6), B, B, B, w,
                         optimize=True)

    def full_k3(self):
        """Dense ``k_3`` per element, ``(n, 8, 8, 8, 8)``; diagnostics only."""
        B, w = self.model.ops.B, self.model.ops.wdet
        return np.einsum("eqijklmnrs,eqija,eqklb,eqmnc,eqrsd,eq->eabcd", self._tensor(8),
                         B, B, B, B, w, optimize=True)
