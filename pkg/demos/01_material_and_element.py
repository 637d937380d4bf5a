"""
The hyperelastic material and the element kernels
=================================================

A short tour of the constitutive layer: the compressible neo-Hookean energy,
its stress and the stack of tangent tensors, and the way the element kernels
blend the hyperelastic and the small-strain energies.

Run with ``python3 demos/01_material_and_element.py``.
"""

import numpy as np

from rto2d import material as M
from rto2d.errors import InadmissibleStateError
from rto2d.fe import FEModel
from rto2d.mesh import build_structured_mesh

# Moduli at unit Young's modulus: every modulus in the package scales linearly
# with E, so kernels are evaluated once and multiplied by element moduli.
kappa, mu = M.unit_moduli(0.4)
print(f"unit bulk modulus {kappa:.4f}, unit shear modulus {mu:.4f}")

# A moderately large deformation: stretch, shear and some compression.
F = np.array([[1.25, 0.30], [-0.10, 0.85]])
print("J =", np.linalg.det(F))
print("energy  ", M.free_energy(F, kappa, mu))
print("stress P\n", M.pk1_stress(F, kappa, mu))

# The tangent tower.  Each tensor is the derivative of the one before it; a
# central difference of the stress in direction dF recovers A4 : dF.
dF = np.array([[0.0, 1.0], [0.5, 0.0]])
h = 1e-6
fd = (M.pk1_stress(F + h * dF, kappa, mu) - M.pk1_stress(F - h * dF, kappa, mu)) / (2 * h)
A4 = M.tangent_A4(F, kappa, mu)
print("A4 : dF vs finite difference, max gap",
      np.abs(np.einsum("ijkl,kl->ij", A4, dF) - fd).max())

# Higher derivatives are only ever needed contracted with directions.  The
# directional evaluation never forms A6 or A8 explicitly.
A6 = M.tangent_A6(F, kappa, mu)
full = np.einsum("ijklmn,kl,mn->ij", A6, dF, dF)
jet = M.directional_stress(F, kappa, mu, [dF, dF])
print("A6 : dF : dF, explicit vs directional, max gap", np.abs(full - jet).max())

# Element level.  A 2 x 2 patch of square plane-strain elements.  The internal
# force of element e is a * p(g u_e) + c * kL u_e, where gamma = g decides how
# much of the element behaves hyperelastically.
model = FEModel(build_structured_mesh(2, 2, 10.0, 10.0), 0.4, 0.4)
ue = np.zeros((4, 8))
ue[:, 1::2] = -1.2 * model.mesh.coords[model.mesh.conn][:, :, 1]  # squashed past flat
for gamma in (1.0, 0.5, 1e-3):
    a = np.full(4, gamma)
    g = np.full(4, gamma)
    c = np.full(4, 1.0 - gamma**2)
    try:
        f = model.element_force(ue, a, g, c)
        print(f"gamma = {gamma:6.0e}: |element force| = {np.linalg.norm(f[0]):.5f}")
    except InadmissibleStateError as exc:
        print(f"gamma = {gamma:6.0e}: {exc}")
# The element is inverted, which the hyperelastic energy cannot evaluate.  With
# a small gamma the hyperelastic part only sees the scaled displacement g u_e,
# so void elements survive deformations that would invert them.
