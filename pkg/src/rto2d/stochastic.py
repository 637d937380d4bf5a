"""Random inputs: Gaussian load vector, lognormal modulus field, uniform cutoff field.

The joint standard-normal vector is ``xi = [xi_1, xi_2, xi_3]`` with blocks
for the load (2 variables), the Young's modulus field (``m2`` KL modes) and
the projection-cutoff field (``m3`` KL modes).  Disabled sources contribute
no variables.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, eigh
from scipy.special import ndtr

from .errors import DegenerateFieldError, InvalidArgumentError
from .jets import Jet

__all__ = [
    "LoadUncertainty",
    "KLField",
    "LognormalMarginal",
    "UniformMarginal",
    "StochasticModel",
    "build_correlation",
    "kl_truncate",
    "kl_from_mesh",
    "gaussian_field_from_xi",
]


def _is_inf(l):
    return l is None or (isinstance(l, float) and math.isinf(l))


@dataclass
class LoadUncertainty:
    """Gaussian nodal load ``P0 = Lc xi_1 + mu_p``."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if not np.allclose(self.cov, self.cov.T):
            raise InvalidArgumentError("load covariance must be symmetric")
        self.Lc = cholesky(self.cov, lower=True)

    def load_from_xi(self, xi1):
        return self.Lc @ np.asarray(xi1, dtype=float) + self.mean


def build_correlation(centroids, lcx, lcy):
    """Squared-exponential correlation matrix between element centroids.

    An infinite (or ``None``) length drops the corresponding term.
    """
    X = np.asarray(centroids, dtype=float)
    arg = np.zeros((X.shape[0], X.shape[0]))
    if not _is_inf(lcx):
        dx = X[:, None, 0] - X[None, :, 0]
        arg -= dx * dx / (2.0 * lcx * lcx)
    if not _is_inf(lcy):
        dy = X[:, None, 1] - X[None, :, 1]
        arg -= dy * dy / (2.0 * lcy * lcy)
    return np.exp(arg)


def _fix_signs(vecs):
    idx = np.argmax(np.abs(vecs), axis=0)
    s = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    s[s == 0] = 1.0
    return vecs * s


@dataclass
class KLField:
    """Truncated Karhunen-Loeve basis.

    Attributes
    ----------
    eigenvalues : ndarray (m,)
        Retained eigenvalues, descending.
    modes : ndarray (n, m)
        Orthonormal eigenvectors.
    coverage : float
        Retained fraction of ``trace(R)``.
    trace : float
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    coverage: float
    trace: float
    spectrum: np.ndarray = field(repr=False, default=None)

    @property
    def m(self):
        return self.eigenvalues.size

    @property
    def scaled_modes(self):
        """``sqrt(lambda_k) gamma_k`` as columns: ``dZ / dxi``."""
        return self.modes * np.sqrt(self.eigenvalues)[None, :]


def _truncation_count(lam, trace, threshold):
    cum = np.cumsum(lam) / trace
    m = int(np.searchsorted(cum, threshold - 1e-12) + 1)
    return min(m, lam.size)


def kl_truncate(R, threshold=0.9, n_modes=None):
    """Dense eigen-decomposition and truncation of a correlation matrix.

    Parameters
    ----------
    R : ndarray (n, n)
        Symmetric correlation matrix.
    threshold : float
        Minimum retained fraction of ``trace(R)``.
    n_modes : int, optional
        Force this many modes instead of the coverage rule.
    """
    R = np.asarray(R, dtype=float)
    trace = float(np.trace(R))
    if not np.any(R) or trace <= 0.0:
        raise DegenerateFieldError("correlation matrix is zero")
    lam, vec = eigh(0.5 * (R + R.T))
    order = np.argsort(-lam, kind="stable")
    lam = np.maximum(lam[order], 0.0)
    vec = vec[:, order]
    m = _truncation_count(lam, trace, threshold) if n_modes is None else int(n_modes)
    vec = _fix_signs(vec[:, :m])
    return KLField(lam[:m].copy(), vec, float(lam[:m].sum() / trace), trace, lam)


def kl_from_mesh(mesh, lcx, lcy, threshold=0.9, n_modes=None):
    """KL basis on a structured mesh using the separable correlation.

    For element ordering ``e = j * nx + i`` the correlation matrix factors
    as ``kron(Ry, Rx)``, so its spectrum is the set of products of the two
    one-dimensional spectra.  The result equals :func:`kl_truncate` applied to
    :func:`build_correlation` up to eigenvector signs within degenerate
    eigenspaces.
    """
    xs = mesh.centroids[: mesh.nx, 0]
    ys = mesh.centroids[:: mesh.nx, 1]
    spectra = []
    for coords, l in ((ys, lcy), (xs, lcx)):
        R1 = build_correlation(np.column_stack([coords, np.zeros_like(coords)]), l, None)
        lam, vec = eigh(R1)
        o = np.argsort(-lam, kind="stable")
        spectra.append((np.maximum(lam[o], 0.0), vec[:, o]))
    (ly_, vy), (lx_, vx) = spectra
    lam = np.outer(ly_, lx_).ravel()
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    trace = float(mesh.n_ele)
    if lam[0] <= 0.0:
        raise DegenerateFieldError("correlation matrix is zero")
    m = _truncation_count(lam, trace, threshold) if n_modes is None else int(n_modes)
    a, b = np.divmod(order[:m], lx_.size)
    vec = vy[:, a][:, None, :] * vx[:, b][None, :, :]
    vec = _fix_signs(vec.reshape(mesh.n_ele, m))
    return KLField(lam[:m].copy(), vec, float(lam[:m].sum() / trace), trace, lam)


def gaussian_field_from_xi(kl, xi):
    """``Z = sum_k sqrt(lambda_k) gamma_k xi_k`` per element."""
    return kl.scaled_modes @ np.asarray(xi, dtype=float)


@dataclass
class LognormalMarginal:
    """Lognormal marginal given its mean and variance."""

    mean: float
    variance: float

    @property
    def mu(self):
        return math.log(self.mean**2 / math.sqrt(self.mean**2 + self.variance))

    @property
    def sigma(self):
        return math.sqrt(math.log(1.0 + self.variance / self.mean**2))

    def from_gaussian(self, Z):
        """``F_E^{-1}(Phi(Z)) = exp(mu + sigma Z)``."""
        return np.exp(self.mu + self.sigma * np.asarray(Z, dtype=float))


@dataclass
class UniformMarginal:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise InvalidArgumentError("uniform bounds must satisfy lower < upper")

    def from_gaussian(self, Z):
        return self.lower + (self.upper - self.lower) * ndtr(np.asarray(Z, dtype=float))


class StochasticModel:
    """Joint random input model.

    Parameters
    ----------
    n_ele : int
    load_mean : array_like (2,)
        Mean nodal load; the deterministic load when ``load`` is ``None``.
    E0 : float
        Deterministic solid modulus used when ``material`` is ``None``.
    load : LoadUncertainty, optional
    material : tuple (LognormalMarginal, KLField), optional
    geometry : tuple (UniformMarginal, KLField), optional
    eta0 : float
        Deterministic projection cutoff.
    """

    def __init__(self, n_ele, load_mean, E0, load=None, material=None, geometry=None, eta0=0.5):
        self.n_ele = n_ele
        self.load_mean = np.asarray(load_mean, dtype=float)
        self.E0 = float(E0)
        self.load = load
        self.material = material
        self.geometry = geometry
        self.eta0 = float(eta0)
        self.m1 = 2 if load is not None else 0
        self.m2 = material[1].m if material is not None else 0
        self.m3 = geometry[1].m if geometry is not None else 0

    @property
    def m(self):
        return self.m1 + self.m2 + self.m3

    @property
    def blocks(self):
        """Slices of the three xi blocks."""
        a, b = self.m1, self.m1 + self.m2
        return slice(0, a), slice(a, b), slice(b, self.m)

    def deterministic(self):
        """The model with every source disabled (``m = 0``)."""
        return StochasticModel(self.n_ele, self.load_mean, self.E0, eta0=self.eta0)

    # -- load ---------------------------------------------------------
    def load_at(self, xi):
        if self.load is None:
            return self.load_mean.copy()
        return self.load.load_from_xi(np.asarray(xi)[self.blocks[0]])

    def load_jacobian(self):
        """``dP0 / dxi``, shape (2, m)."""
        J = np.zeros((2, self.m))
        if self.load is not None:
            J[:, self.blocks[0]] = self.load.Lc
        return J

    # -- fields -------------------------------------------------------
    def _field_grad(self, kl, block):
        G = np.zeros((self.n_ele, self.m))
        G[:, block] = kl.scaled_modes
        return G

    def E0_jet(self, xi=None):
        n, m = self.n_ele, self.m
        if self.material is None:
            return Jet.constant(self.E0, n, m)
        marg, kl = self.material
        G = self._field_grad(kl, self.blocks[1])
        xi = np.zeros(m) if xi is None else np.asarray(xi, dtype=float)
        Z = G @ xi
        y = marg.from_gaussian(Z)
        s = marg.sigma
        return Jet.linear(Z, G).compose(y, s * y, s * s * y, s**3 * y)

    def eta_jet(self, xi=None):
        n, m = self.n_ele, self.m
        if self.geometry is None:
            return Jet.constant(self.eta0, n, m)
        marg, kl = self.geometry
        G = self._field_grad(kl, self.blocks[2])
        xi = np.zeros(m) if xi is None else np.asarray(xi, dtype=float)
        Z = G @ xi
        phi = np.exp(-0.5 * Z * Z) / math.sqrt(2.0 * math.pi)
        d = marg.upper - marg.lower
        return Jet.linear(Z, G).compose(
            marg.from_gaussian(Z), d * phi, -d * Z * phi, d * (Z * Z - 1.0) * phi
        )

    def E0_at(self, xi):
        return self.E0_jet(xi).v

    def eta_at(self, xi):
        return self.eta_jet(xi).v

    def restricted(self, block, index, value):
        """Random input with only ``xi[block][index] = value`` non-zero."""
        xi = np.zeros(self.m)
        sl = self.blocks[block]
        if not 0 <= index < sl.stop - sl.start:
            raise InvalidArgumentError("eigenmode index out of range for this source")
        xi[sl.start + index] = value
        return xi
