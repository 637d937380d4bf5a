"""Shared builders for small analysis problems."""

import json
from pathlib import Path

import numpy as np
import pytest

from rto2d.design import Interpolation
from rto2d.mesh import build_structured_mesh
from rto2d.problem import Problem
from rto2d.solver import SolverParams
from rto2d.stochastic import (LoadUncertainty, LognormalMarginal, StochasticModel,
                              UniformMarginal, kl_from_mesh)

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"

# closed-form bilinear square stiffness (plane stress form, unit thickness)
_A11 = np.array([[12, 3, -6, -3], [3, 12, 3, 0], [-6, 3, 12, -3], [-3, 0, -3, 12]])
_A12 = np.array([[-6, -3, 0, 3], [-3, -6, -3, -6], [0, -3, -6, 3], [3, -6, 3, -6]])
_B11 = np.array([[-4, 3, -2, 9], [3, -4, -9, 4], [-2, -9, -4, -3], [9, 4, -3, -4]])
_B12 = np.array([[2, -3, 4, -9], [-3, 2, 9, -2], [4, 9, 2, 3], [-9, -2, 3, 2]])


def square_stiffness(E, nu):
    return E / (1 - nu**2) / 24 * (np.block([[_A11, _A12], [_A12.T, _A11]])
                                   + nu * np.block([[_B11, _B12], [_B12.T, _B11]]))


def cantilever_mesh(nx=4, ny=4, lx=40.0, ly=40.0):
    """Left edge clamped, load at the right mid-height node (or nearest)."""
    mesh = build_structured_mesh(nx, ny, lx, ly)
    left = mesh.nodes_where(xmax=0.0)
    fixed = np.concatenate([2 * left, 2 * left + 1])
    load = mesh.node_at(lx, ly * (ny // 2) / ny)
    return mesh.with_boundary(fixed_dofs=fixed, load_node=load)


def small_problem(nx=4, ny=4, load=None, material=None, geometry=None, mean=(0.5, -2.0),
                  E0=10.0, interp=None, tol=1e-12, alpha=1.0, n_modes=2):
    """Cantilever problem with optional load, material and geometric sources.

    ``load``, ``material`` and ``geometry`` are a covariance scale, a
    lognormal variance and a uniform ``(lower, upper)`` pair respectively.
    """
    mesh = cantilever_mesh(nx, ny)
    lu = LoadUncertainty(mean, load * np.eye(2)) if load is not None else None
    mat = geo = None
    if material is not None:
        mat = (LognormalMarginal(E0, material), kl_from_mesh(mesh, 30.0, 30.0, n_modes=n_modes))
    if geometry is not None:
        geo = (UniformMarginal(*geometry), kl_from_mesh(mesh, 50.0, 50.0, n_modes=n_modes))
    stoch = StochasticModel(mesh.n_ele, mean, E0, load=lu, material=mat, geometry=geo)
    return Problem.create(mesh, 0.3, 0.3, 12.0, stoch, interp=interp or Interpolation(),
                          EL0=E0, alpha=alpha, solver=SolverParams(tol=tol))


def mixed_design(n, seed=0):
    return 0.2 + 0.7 * np.random.default_rng(seed).random(n)


def load_json(name):
    return json.loads((CONFIGS / name).read_text())


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2))
    return path


def tiny_config(mode="robust", nx=8, ny=8, **design):
    """A reduced compression block shrunk to a quick ``nx`` x ``ny`` run."""
    cfg = load_json("compression_block_rd03_reduced.json")
    cfg["name"] = "tiny"
    cfg["mesh"]["nx"], cfg["mesh"]["ny"] = nx, ny
    cfg["mesh"]["passive"] = [{"ymin": 300.0 - 300.0 / ny}]
    cfg["design"]["r"] = 1.5 * 300.0 / nx
    cfg["design"]["max_iterations"] = 4
    cfg["design"].update(design)
    cfg["run"]["mode"] = mode
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
