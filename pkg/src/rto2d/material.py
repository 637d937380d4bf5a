"""Regularized neo-Hookean material under plane strain.

All quantities are returned per unit Young's modulus when called with the
unit-modulus moduli from :func:`unit_moduli`; the element level multiplies by
the actual modulus.  Every function accepts arrays of deformation gradients
with shape ``(..., 2, 2)``.

The stress and the tangent hierarchy all share the structure

    P = c1 F^{-T} + m F,    m = mu J^{-2/3},

where the scalar coefficients obey the closed differentiation rules

    d c_n / dF = c_{n+1} F^{-T} + (-2/3)^n m F,
    d m / dF   = -2/3 m F^{-T},
    d F^{-T}_{ab} / dF_{pq} = -F^{-T}_{aq} F^{-T}_{pb},

with ``c_n = kappa (2^{n-1} J^2 - J) + 1/2 (-2/3)^n m tr(C)``.  The sixth
and eighth order tangents are expanded from these rules once at import
(:func:`_tangent_terms`) and evaluated as sums of ``einsum`` products.
"""

import math
from functools import lru_cache

import numpy as np

from .errors import InadmissibleStateError

__all__ = [
    "moduli",
    "unit_moduli",
    "free_energy",
    "pk1_stress",
    "tangent_A4",
    "tangent_A6",
    "tangent_A8",
    "tangent",
    "directional_stress",
    "linear_elasticity_tensor",
    "linear_elasticity_voigt",
]


def moduli(E, nu):
    """Bulk and shear moduli ``(kappa, mu)`` from ``(E, nu)``."""
    if not -1.0 < nu < 0.5:
        raise ValueError("Poisson ratio must lie in (-1, 0.5)")
    return E / (3.0 * (1.0 - 2.0 * nu)), E / (2.0 * (1.0 + nu))


def unit_moduli(nu):
    """Moduli at unit Young's modulus."""
    return moduli(1.0, nu)


def _kinematics(F, check=True):
    F = np.asarray(F, dtype=float)
    J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    if check and np.any(J <= 0.0):
        raise InadmissibleStateError("deformation gradient with J <= 0")
    Fi = np.empty_like(F)  # F^{-T}
    Fi[..., 0, 0] = F[..., 1, 1] / J
    Fi[..., 1, 1] = F[..., 0, 0] / J
    Fi[..., 0, 1] = -F[..., 1, 0] / J
    Fi[..., 1, 0] = -F[..., 0, 1] / J
    T = np.einsum("...ij,...ij->...", F, F) + 1.0
    return F, J, Fi, T


def _coefficient(n, J, T, m, kappa):
    return kappa * (2.0 ** (n - 1) * J * J - J) + 0.5 * (-2.0 / 3.0) ** n * m * T


def free_energy(F, kappa, mu):
    """Free energy ``1/2 kappa (J-1)^2 + 1/2 mu (J^{-2/3} tr C - 3)``.

    Parameters
    ----------
    F : array_like (..., 2, 2)
        In-plane deformation gradient, ``F33 = 1``.
    kappa, mu : float
        Bulk and shear moduli.
    """
    F, J, _, T = _kinematics(F)
    return 0.5 * kappa * (J - 1.0) ** 2 + 0.5 * mu * (J ** (-2.0 / 3.0) * T - 3.0)


def pk1_stress(F, kappa, mu):
    """First Piola-Kirchhoff stress, shape ``(..., 2, 2)``."""
    F, J, Fi, T = _kinematics(F)
    m = mu * J ** (-2.0 / 3.0)
    c1 = _coefficient(1, J, T, m, kappa)
    return c1[..., None, None] * Fi + m[..., None, None] * F


def tangent_A4(F, kappa, mu):
    """Material tangent ``dP_ij / dF_kl``, shape ``(..., 2, 2, 2, 2)``."""
    F, J, Fi, T = _kinematics(F)
    m = mu * J ** (-2.0 / 3.0)
    c1 = _coefficient(1, J, T, m, kappa)
    c2 = _coefficient(2, J, T, m, kappa)
    x = lambda s: s[..., None, None, None, None]  # noqa: E731
    I = np.eye(2)
    A = x(c2) * np.einsum("...ij,...kl->...ijkl", Fi, Fi)
    A -= x(2.0 / 3.0 * m) * (
        np.einsum("...ij,...kl->...ijkl", Fi, F) + np.einsum("...ij,...kl->...ijkl", F, Fi)
    )
    A -= x(c1) * np.einsum("...il,...kj->...ijkl", Fi, Fi)
    A += x(m) * np.einsum("ik,jl->ijkl", I, I)
    return A


# ----------------------------------------------------------------------
# product-rule expansion of the higher tangents
# ----------------------------------------------------------------------
# A term is (coef, scalar, atoms); scalar is ("c", n) or ("m",); atoms are
# tuples (kind, a, b) with kind in {"Fi", "F", "d"} and integer labels.


def _differentiate(terms, p, q):
    out = []
    for coef, scal, atoms in terms:
        if scal[0] == "c":
            n = scal[1]
            out.append((coef, ("c", n + 1), atoms + (("Fi", p, q),)))
            out.append((coef * (-2.0 / 3.0) ** n, ("m",), atoms + (("F", p, q),)))
        else:
            out.append((coef * (-2.0 / 3.0), ("m",), atoms + (("Fi", p, q),)))
        for i, (kind, a, b) in enumerate(atoms):
            rest = atoms[:i] + atoms[i + 1:]
            if kind == "Fi":
                out.append((-coef, scal, rest + (("Fi", a, q), ("Fi", p, b))))
            elif kind == "F":
                out.append((coef, scal, rest + (("d", a, p), ("d", b, q))))
    return out


@lru_cache(maxsize=None)
def _tangent_terms(order):
    """Expanded terms of the tangent of the given order (2 = P, 4, 6, 8)."""
    terms = [(1.0, ("c", 1), (("Fi", 0, 1),)), (1.0, ("m",), (("F", 0, 1),))]
    for k in range(1, order // 2):
        terms = _differentiate(terms, 2 * k, 2 * k + 1)
    merged = {}
    for coef, scal, atoms in terms:
        key = (scal, tuple(sorted(atoms)))
        merged[key] = merged.get(key, 0.0) + coef
    return tuple((c, s, a) for (s, a), c in merged.items() if c != 0.0)


_LETTERS = "abcdefgh"


def _evaluate_terms(order, F, kappa, mu):
    F, J, Fi, T = _kinematics(F)
    m = mu * J ** (-2.0 / 3.0)
    scal = {("m",): m}
    for n in range(1, order // 2 + 1):
        scal[("c", n)] = _coefficient(n, J, T, m, kappa)
    I = np.eye(2)
    out_sub = "..." + _LETTERS[:order]
    result = np.zeros(F.shape[:-2] + (2,) * order)
    groups = {}
    for coef, s, atoms in _tangent_terms(order):
        groups.setdefault(atoms, []).append((coef, s))
    for atoms, coefs in groups.items():
        ops, subs = [], []
        for kind, a, b in atoms:
            idx = _LETTERS[a] + _LETTERS[b]
            if kind == "d":
                ops.append(I)
                subs.append(idx)
            else:
                ops.append(Fi if kind == "Fi" else F)
                subs.append("..." + idx)
        w = sum(c * scal[s] for c, s in coefs)
        if not any(sub.startswith("...") for sub in subs):
            prod = np.einsum(",".join(subs) + "->" + out_sub[3:], *ops)
            result += w[(...,) + (None,) * order] * prod
        else:
            prod = np.einsum(",".join(subs) + "->" + out_sub, *ops)
            result += w[(...,) + (None,) * order] * prod
    return result


def tangent_A6(F, kappa, mu):
    """Sixth-order tangent ``d^2 P_ij / dF_kl dF_mn``."""
    return _evaluate_terms(6, F, kappa, mu)


def tangent_A8(F, kappa, mu):
    """Eighth-order tangent ``d^3 P_ij / dF_kl dF_mn dF_pq``."""
    return _evaluate_terms(8, F, kappa, mu)


def tangent(order, F, kappa, mu):
    """Dispatch: order 2 -> P, 4 -> A4, 6 -> A6, 8 -> A8."""
    if order == 2:
        return pk1_stress(F, kappa, mu)
    if order == 4:
        return tangent_A4(F, kappa, mu)
    return _evaluate_terms(order, F, kappa, mu)


# ----------------------------------------------------------------------
# mixed directional derivatives through nilpotent jets
# ----------------------------------------------------------------------
# A jet over k directions stores the coefficients of the square-free
# monomials t_S (S a subset of the directions, encoded as a bit mask) on a
# leading axis of length 2**k; t_i**2 = 0, so products truncate exactly.


def _jet_mul(x, y):
    n = x.shape[0]
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    for a in range(n):
        for b in range(n):
            if a & b == 0:
                out[a | b] += x[a] * y[b]
    return out


def _jet_apply(x, f0, f1, f2, f3):
    """``f(x)`` from the value and first three derivatives at ``x[0]``."""
    d = x.copy()
    d[0] = 0.0
    out = np.zeros_like(x)
    out[0] = f0
    term = d
    for k, fk in enumerate((f1, f2, f3), start=1):
        if k >= x.shape[0]:
            break
        out += (fk / math.factorial(k)) * term
        term = _jet_mul(term, d)
    return out


def directional_stress(F, kappa, mu, directions):
    """Mixed directional derivative of ``P`` along all given directions.

    Parameters
    ----------
    F : ndarray (..., 2, 2)
    kappa, mu : float
    directions : sequence of ndarray (..., 2, 2)
        Zero to three gradient increments (broadcastable against ``F``).

    Returns
    -------
    ndarray (..., 2, 2)
        ``d^k P / dt_1 ... dt_k`` of ``P(F + sum t_i H_i)`` at ``t = 0``,
        i.e. ``A_{2k+2}`` contracted with the ``k`` directions.
    """
    k = len(directions)
    if k > 3:
        raise ValueError("at most three directions are supported")
    F = np.asarray(F, dtype=float)
    shape = np.broadcast_shapes(F.shape, *(np.shape(h) for h in directions))
    X = np.zeros((2 ** k,) + shape)
    X[0] = F
    for i, h in enumerate(directions):
        X[1 << i] = h
    f00, f01, f10, f11 = X[..., 0, 0], X[..., 0, 1], X[..., 1, 0], X[..., 1, 1]
    J = _jet_mul(f00, f11) - _jet_mul(f01, f10)
    J0 = J[0]
    if np.any(J0 <= 0.0):
        raise InadmissibleStateError("deformation gradient with J <= 0")
    Jinv = _jet_apply(J, 1.0 / J0, -J0**-2, 2.0 * J0**-3, -6.0 * J0**-4)
    m = mu * _jet_apply(J, J0 ** (-2.0 / 3.0), -2.0 / 3.0 * J0 ** (-5.0 / 3.0),
                        10.0 / 9.0 * J0 ** (-8.0 / 3.0), -80.0 / 27.0 * J0 ** (-11.0 / 3.0))
    T = (_jet_mul(f00, f00) + _jet_mul(f01, f01) + _jet_mul(f10, f10) + _jet_mul(f11, f11))
    T[0] += 1.0
    c1 = kappa * (_jet_mul(J, J) - J) - _jet_mul(m, T) / 3.0
    cof = np.stack([np.stack([f11, -f10], -1), np.stack([-f01, f00], -1)], -2)
    Fi = _jet_mul(Jinv[..., None, None], cof)
    P = _jet_mul(c1[..., None, None], Fi) + _jet_mul(m[..., None, None], X)
    return P[2 ** k - 1]


def linear_elasticity_tensor(kappa_L, mu_L):
    """In-plane components of ``3 kappa P_vol + 2 mu P_dev^S``, shape (2,2,2,2)."""
    I = np.eye(2)
    lam = kappa_L - 2.0 / 3.0 * mu_L
    return lam * np.einsum("ij,kl->ijkl", I, I) + mu_L * (
        np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I)
    )


def linear_elasticity_voigt(kappa_L, mu_L):
    """Plane-strain Voigt matrix acting on (e_xx, e_yy, 2 e_xy)."""
    lam = kappa_L - 2.0 / 3.0 * mu_L
    return np.array(
        [[lam + 2.0 * mu_L, lam, 0.0], [lam, lam + 2.0 * mu_L, 0.0], [0.0, 0.0, mu_L]]
    )
