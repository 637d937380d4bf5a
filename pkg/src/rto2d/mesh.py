"""Structured Q4 meshes, bilinear shape functions and sparse assembly.

Nodes are numbered row-major from the bottom-left corner,
``node = j * (nx + 1) + i``, elements likewise ``e = j * nx + i``, and the
global DOF of component ``c`` at ``node`` is ``2 * node + c``.  Homogeneous
essential boundary conditions are eliminated at assembly time, so every
global vector and matrix returned here lives on the free DOFs only.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, GeometryError, InvalidArgumentError

__all__ = [
    "Mesh2D",
    "BOperator",
    "Assembler",
    "GAUSS_POINTS",
    "build_structured_mesh",
    "shape_gradients",
    "assemble",
    "external_load_vector",
    "mirror_map",
    "symmetry_masters",
]

_g = 1.0 / np.sqrt(3.0)
#: 2x2 Gauss rule on [-1, 1]^2, unit weights
GAUSS_POINTS = np.array([[-_g, -_g], [_g, -_g], [_g, _g], [-_g, _g]])
_NODE_SIGNS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Immutable structured quadrilateral mesh with boundary data.

    Attributes
    ----------
    nx, ny : int
        Element counts in x and y.
    lx, ly : float
        Domain size in mm.
    coords : ndarray (n_node, 2)
        Nodal coordinates.
    conn : ndarray (n_ele, 4)
        Counter-clockwise connectivity.
    fixed_dofs : ndarray of int
        Sorted fixed global DOFs.
    load_node : int or None
        Node receiving the point load.
    passive : ndarray of bool (n_ele,)
        Design-frozen solid elements.
    symmetry : ndarray of int or None
        Mirror maps over elements, shape (k, n_ele); every row is an
        involution (one row for half symmetry, two for quarter symmetry).
    """

    nx: int
    ny: int
    lx: float
    ly: float
    coords: np.ndarray
    conn: np.ndarray
    fixed_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    load_node: int | None = None
    passive: np.ndarray | None = None
    symmetry: np.ndarray | None = None

    def __post_init__(self):
        if self.passive is None:
            object.__setattr__(self, "passive", np.zeros(self.n_ele, dtype=bool))

    @property
    def n_ele(self):
        return self.conn.shape[0]

    @property
    def n_node(self):
        return self.coords.shape[0]

    @property
    def n_dof(self):
        return 2 * self.n_node

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    @cached_property
    def volumes(self):
        return np.full(self.n_ele, self.hx * self.hy)

    @cached_property
    def centroids(self):
        return self.coords[self.conn].mean(axis=1)

    @cached_property
    def element_dofs(self):
        """Global DOFs of every element, shape (n_ele, 8)."""
        d = np.empty((self.n_ele, 8), dtype=np.int64)
        d[:, 0::2] = 2 * self.conn
        d[:, 1::2] = 2 * self.conn + 1
        return d

    @cached_property
    def free_dofs(self):
        mask = np.ones(self.n_dof, dtype=bool)
        mask[self.fixed_dofs] = False
        return np.flatnonzero(mask)

    @property
    def n_free(self):
        return self.free_dofs.size

    @cached_property
    def dof_map(self):
        """Global DOF -> free index, -1 for fixed DOFs."""
        m = -np.ones(self.n_dof, dtype=np.int64)
        m[self.free_dofs] = np.arange(self.free_dofs.size)
        return m

    @cached_property
    def assembler(self):
        return Assembler(self)

    # ------------------------------------------------------------------
    # boundary helpers
    # ------------------------------------------------------------------
    def node_at(self, x, y):
        """Id of the node closest to ``(x, y)``."""
        d = (self.coords[:, 0] - x) ** 2 + (self.coords[:, 1] - y) ** 2
        return int(np.argmin(d))

    def nodes_where(self, xmin=-np.inf, xmax=np.inf, ymin=-np.inf, ymax=np.inf):
        tol = 1e-9 * max(self.lx, self.ly)
        X, Y = self.coords[:, 0], self.coords[:, 1]
        mask = (X >= xmin - tol) & (X <= xmax + tol) & (Y >= ymin - tol) & (Y <= ymax + tol)
        return np.flatnonzero(mask)

    def elements_where(self, xmin=-np.inf, xmax=np.inf, ymin=-np.inf, ymax=np.inf):
        X, Y = self.centroids[:, 0], self.centroids[:, 1]
        mask = (X >= xmin) & (X <= xmax) & (Y >= ymin) & (Y <= ymax)
        return np.flatnonzero(mask)

    def with_boundary(self, fixed_dofs=None, load_node=None, passive=None, symmetry=None):
        """Return a copy carrying supports, load node, passive set and symmetry."""
        kw = {}
        if fixed_dofs is not None:
            fd = np.unique(np.asarray(fixed_dofs, dtype=np.int64))
            if fd.size and (fd[0] < 0 or fd[-1] >= self.n_dof):
                raise InvalidArgumentError("fixed DOF out of range")
            kw["fixed_dofs"] = fd
        if load_node is not None:
            kw["load_node"] = int(load_node)
        if passive is not None:
            p = np.zeros(self.n_ele, dtype=bool)
            p[np.asarray(passive)] = True
            kw["passive"] = p
        if symmetry is not None:
            s = np.atleast_2d(np.asarray(symmetry, dtype=np.int64))
            idx = np.arange(self.n_ele)
            if s.ndim != 2 or s.shape[1] != self.n_ele or any(
                    not np.array_equal(row[row], idx) for row in s):
                raise InvalidArgumentError("symmetry maps must be involutions over elements")
            kw["symmetry"] = s
        return replace(self, **kw)


def build_structured_mesh(nx, ny, lx, ly):
    """Uniform ``nx`` x ``ny`` mesh of the rectangle ``[0, lx] x [0, ly]``.

    Parameters
    ----------
    nx, ny : int
        Number of elements in each direction (>= 1).
    lx, ly : float
        Domain size in mm (> 0).

    Returns
    -------
    Mesh2D
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgumentError("element counts must be positive integers")
    if not (lx > 0 and ly > 0):
        raise InvalidArgumentError("domain dimensions must be positive")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    coords = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    n0 = (j * (nx + 1) + i).ravel()
    conn = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])
    return Mesh2D(nx, ny, float(lx), float(ly), coords, conn)


def mirror_map(mesh, axis="vertical"):
    """Element mirror partners about a mid-line of the rectangle.

    Parameters
    ----------
    mesh : Mesh2D
    axis : {"vertical", "horizontal"}
        ``"vertical"`` mirrors about ``x = lx / 2``, ``"horizontal"`` about
        ``y = ly / 2``.
    """
    e = np.arange(mesh.n_ele)
    i, j = e % mesh.nx, e // mesh.nx
    if axis == "vertical":
        return j * mesh.nx + (mesh.nx - 1 - i)
    if axis == "horizontal":
        return (mesh.ny - 1 - j) * mesh.nx + i
    raise InvalidArgumentError(f"unknown mirror axis {axis!r}")


def symmetry_masters(mesh):
    """Smallest element index in the symmetry orbit of every element."""
    master = np.arange(mesh.n_ele)
    if mesh.symmetry is None:
        return master
    while True:
        new = master.copy()
        for row in mesh.symmetry:
            new = np.minimum(new, new[row])
        new = new[new]
        if np.array_equal(new, master):
            return master
        master = new


@dataclass(frozen=True, eq=False)
class BOperator:
    """Per-element, per-Gauss-point gradient operators.

    Attributes
    ----------
    dN : ndarray (n_ele, 4, 4, 2)
        Physical shape-function gradients ``dN_a/dX_J`` at each Gauss point.
    wdet : ndarray (n_ele, 4)
        Gauss weight times Jacobian determinant.
    B : ndarray (n_ele, 4, 2, 2, 8)
        Displacement-gradient map, ``grad(u)_iJ = B[..., i, J, :] @ u_e``.
    BL : ndarray (n_ele, 4, 3, 8)
        Small-strain operator in Voigt order (xx, yy, 2xy).
    """

    dN: np.ndarray
    wdet: np.ndarray
    B: np.ndarray
    BL: np.ndarray


def _reference_gradients():
    xi, eta = GAUSS_POINTS[:, 0], GAUSS_POINTS[:, 1]
    s = _NODE_SIGNS
    dxi = 0.25 * s[None, :, 0] * (1.0 + s[None, :, 1] * eta[:, None])
    deta = 0.25 * s[None, :, 1] * (1.0 + s[None, :, 0] * xi[:, None])
    return np.stack([dxi, deta], axis=-1)  # (4 gp, 4 nodes, 2)


def shape_gradients(mesh, e=None):
    """Shape-function gradients for all elements (or the single element ``e``).

    Raises
    ------
    GeometryError
        If any Jacobian determinant is not positive.
    """
    conn = mesh.conn if e is None else mesh.conn[[e]]
    xe = mesh.coords[conn]  # (n, 4, 2)
    dref = _reference_gradients()
    jac = np.einsum("gaK,naJ->ngJK", dref, xe)  # J[JK] = dX_J / dxi_K
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    if np.any(det <= 0.0):
        raise GeometryError("non-positive Jacobian determinant")
    inv = np.empty_like(jac)
    inv[..., 0, 0] = jac[..., 1, 1] / det
    inv[..., 1, 1] = jac[..., 0, 0] / det
    inv[..., 0, 1] = -jac[..., 0, 1] / det
    inv[..., 1, 0] = -jac[..., 1, 0] / det
    dN = np.einsum("gaK,ngKJ->ngaJ", dref, inv)
    n = conn.shape[0]
    B = np.zeros((n, 4, 2, 2, 8))
    for a in range(4):
        for i in range(2):
            B[:, :, i, :, 2 * a + i] = dN[:, :, a, :]
    BL = np.zeros((n, 4, 3, 8))
    BL[:, :, 0, 0::2] = dN[..., 0]
    BL[:, :, 1, 1::2] = dN[..., 1]
    BL[:, :, 2, 0::2] = dN[..., 1]
    BL[:, :, 2, 1::2] = dN[..., 0]
    return BOperator(dN=dN, wdet=det, B=B, BL=BL)


class Assembler:
    """Deterministic sparse assembly onto the free DOFs.

    The CSR pattern and the scatter index of every element entry are built
    once; each assembly is then a single ``np.bincount`` whose summation
    order is fixed, so results never depend on thread scheduling.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        edofs = mesh.dof_map[mesh.element_dofs]  # (n, 8), -1 for fixed
        self._edofs = edofs
        nf = mesh.n_free
        rows = np.repeat(edofs, 8, axis=1).ravel()
        cols = np.tile(edofs, (1, 8)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        self._mkeep = keep
        key = rows[keep] * nf + cols[keep]
        ukey, inv = np.unique(key, return_inverse=True)
        self._mslot = inv
        self._indices = (ukey % nf).astype(np.int32)
        r = ukey // nf
        self._indptr = np.searchsorted(r, np.arange(nf + 1)).astype(np.int32)
        self._nnz = ukey.size
        vrows = edofs.ravel()
        self._vkeep = vrows >= 0
        self._vslot = vrows[self._vkeep]

    @property
    def n_free(self):
        return self.mesh.n_free

    def vector(self, fe):
        fe = np.asarray(fe)
        if fe.shape != (self.mesh.n_ele, 8):
            raise InvalidArgumentError("element vectors must have shape (n_ele, 8)")
        return np.bincount(self._vslot, weights=fe.ravel()[self._vkeep], minlength=self.n_free)

    def matrix(self, ke):
        ke = np.asarray(ke)
        if ke.shape != (self.mesh.n_ele, 8, 8):
            raise InvalidArgumentError("element matrices must have shape (n_ele, 8, 8)")
        data = np.bincount(self._mslot, weights=ke.ravel()[self._mkeep], minlength=self._nnz)
        n = self.n_free
        return sp.csr_matrix((data, self._indices.copy(), self._indptr.copy()), shape=(n, n))

    def gather(self, u):
        """Element DOF values from a free-DOF vector; fixed DOFs read as 0."""
        ue = np.zeros(self._edofs.shape + np.shape(u)[1:])
        mask = self._edofs >= 0
        ue[mask] = np.asarray(u)[self._edofs[mask]]
        return ue


def assemble(mesh, contributions):
    """Assemble element vectors ``(n_ele, 8)`` or matrices ``(n_ele, 8, 8)``."""
    c = np.asarray(contributions)
    if c.ndim == 2:
        return mesh.assembler.vector(c)
    if c.ndim == 3:
        return mesh.assembler.matrix(c)
    raise InvalidArgumentError("contributions must be (n_ele, 8) or (n_ele, 8, 8)")


def external_load_vector(mesh, P0, node=None):
    """Free-DOF nodal load vector carrying ``P0`` at the load node.

    Raises
    ------
    ConfigurationError
        If a non-zero component is applied to a fixed DOF or no load node
        is defined.
    """
    node = mesh.load_node if node is None else node
    if node is None:
        raise ConfigurationError("mesh has no load node")
    P0 = np.asarray(P0, dtype=float)
    f = np.zeros(mesh.n_free)
    for c in range(2):
        k = mesh.dof_map[2 * node + c]
        if k < 0:
            if P0[c] != 0.0:
                raise ConfigurationError("load applied to a fixed DOF")
            continue
        f[k] = P0[c]
    return f


def load_derivative_matrix(mesh, Lc, node=None):
    """Columns ``dF_ext / dxi_k`` for the load block, shape (n_free, 2)."""
    node = mesh.load_node if node is None else node
    D = np.zeros((mesh.n_free, 2))
    for c in range(2):
        k = mesh.dof_map[2 * node + c]
        if k >= 0:
            D[k, :] = Lc[c, :]
    return D
