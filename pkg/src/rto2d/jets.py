"""Truncated per-element derivative jets.

A :class:`Jet` stores, for every element, a scalar ``s`` together with the
derivatives needed by the perturbation and adjoint passes:

========  ==========================  ==============
field     meaning                     shape
========  ==========================  ==============
``v``     s                           (n,)
``k``     ds / dxi_k                  (n, m)
``kl``    d2s / dxi_k dxi_l           (n, m, m)
``r``     ds / drho_hat               (n,)
``kr``    d2s / dxi_k drho_hat        (n, m)
``klr``   d3s / dxi_k dxi_l drho_hat  (n, m, m)
========  ==========================  ==============

``rho_hat`` is the element's own filtered density, so ``r`` derivatives are
element-diagonal.  Products and compositions follow the Leibniz and Faa di
Bruno rules truncated at these orders, which is how every scalar of the
ledger (the modulus, gamma and their products) is differentiated.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["Jet"]


@dataclass
class Jet:
    v: np.ndarray
    k: np.ndarray
    kl: np.ndarray
    r: np.ndarray
    kr: np.ndarray
    klr: np.ndarray

    @property
    def n(self):
        return self.v.shape[0]

    @property
    def m(self):
        return self.k.shape[1]

    @classmethod
    def constant(cls, value, n, m):
        v = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
        z1, z2 = np.zeros((n, m)), np.zeros((n, m, m))
        return cls(v, z1, z2, np.zeros(n), z1.copy(), z2.copy())

    @classmethod
    def variable(cls, value, m):
        """Jet of the design variable itself: ``r = 1``."""
        v = np.asarray(value, dtype=float).copy()
        n = v.shape[0]
        j = cls.constant(0.0, n, m)
        j.v = v
        j.r = np.ones(n)
        return j

    @classmethod
    def linear(cls, value, grad):
        """Jet of a field affine in xi: ``s = value + grad @ (xi - xi0)``."""
        grad = np.asarray(grad, dtype=float)
        n, m = grad.shape
        j = cls.constant(0.0, n, m)
        j.v = np.asarray(value, dtype=float).copy()
        j.k = grad.copy()
        return j

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v + o.v, self.k + o.k, self.kl + o.kl, self.r + o.r,
                       self.kr + o.kr, self.klr + o.klr)
        return Jet(self.v + o, self.k, self.kl, self.r, self.kr, self.klr)

    __radd__ = __add__

    def scale(self, c):
        return Jet(c * self.v, c * self.k, c * self.kl, c * self.r, c * self.kr, c * self.klr)

    def __mul__(self, o):
        if not isinstance(o, Jet):
            return self.scale(o)
        a, b = self, o
        k = a.k * b.v[:, None] + a.v[:, None] * b.k
        kl = (a.kl * b.v[:, None, None] + a.v[:, None, None] * b.kl
              + a.k[:, :, None] * b.k[:, None, :] + b.k[:, :, None] * a.k[:, None, :])
        r = a.r * b.v + a.v * b.r
        kr = a.kr * b.v[:, None] + a.k * b.r[:, None] + a.r[:, None] * b.k + a.v[:, None] * b.kr
        klr = (a.klr * b.v[:, None, None] + a.kl * b.r[:, None, None]
               + a.kr[:, :, None] * b.k[:, None, :] + a.k[:, :, None] * b.kr[:, None, :]
               + b.kr[:, :, None] * a.k[:, None, :] + b.k[:, :, None] * a.kr[:, None, :]
               + a.r[:, None, None] * b.kl + a.v[:, None, None] * b.klr)
        return Jet(a.v * b.v, k, kl, r, kr, klr)

    __rmul__ = __mul__

    def compose(self, h0, h1, h2, h3):
        """Jet of ``h(self)`` given ``h`` and its first three derivatives at ``self.v``."""
        x = self
        k = h1[:, None] * x.k
        kk = x.k[:, :, None] * x.k[:, None, :]
        kl = h2[:, None, None] * kk + h1[:, None, None] * x.kl
        r = h1 * x.r
        kr = h2[:, None] * x.k * x.r[:, None] + h1[:, None] * x.kr
        klr = (h3[:, None, None] * kk * x.r[:, None, None]
               + h2[:, None, None] * (x.kl * x.r[:, None, None]
                                      + x.kr[:, :, None] * x.k[:, None, :]
                                      + x.k[:, :, None] * x.kr[:, None, :])
               + h1[:, None, None] * x.klr)
        return Jet(np.asarray(h0, dtype=float), k, kl, r, kr, klr)

    def element(self, e):
        """Scalar ledger entries of a single element as a dict."""
        return {f: getattr(self, f)[e] for f in ("v", "k", "kl", "r", "kr", "klr")}
