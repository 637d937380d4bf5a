"""Filter, projection, interpolations and the ledger jets."""

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from rto2d.design import (build_filter, gamma_factor, gamma_partials, linear_modulus,
                          project, projection_partials, simp_modulus, simp_partials)
from rto2d.mesh import build_structured_mesh

from conftest import small_problem


def test_filter_matches_dense_cone_weights():
    mesh = build_structured_mesh(6, 4, 6.0, 4.0)
    r = 1.6
    W = build_filter(mesh, r).toarray()
    D = cdist(mesh.centroids, mesh.centroids)
    H = np.maximum(r - D, 0.0) * mesh.volumes[None, :]
    np.testing.assert_allclose(W, H / H.sum(axis=1, keepdims=True), atol=1e-15)
    np.testing.assert_allclose(W.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        build_filter(mesh, 0.0)


def test_small_radius_filter_is_identity():
    mesh = build_structured_mesh(3, 3, 3.0, 3.0)
    np.testing.assert_allclose(build_filter(mesh, 0.5).toarray(), np.eye(9))


def test_projection_end_points_and_cutoff():
    for beta in (0.5, 1.0, 4.0, 32.0):
        for eta in (0.2, 0.5, 0.8):
            np.testing.assert_allclose(project(np.array([0.0, 1.0]), beta, eta), [0.0, 1.0],
                                       atol=1e-14)
    assert project(0.5, 8.0, 0.5) == pytest.approx(0.5)
    # large slopes approach a step at the cutoff
    assert project(0.45, 200.0, 0.5) < 1e-6 and project(0.55, 200.0, 0.5) > 1 - 1e-6


def test_projection_partials_match_finite_differences():
    rho = np.linspace(0.05, 0.95, 7)
    beta, eta, h = 3.0, 0.4, 1e-5
    d = projection_partials(rho, beta, eta)
    P = lambda x, y: projection_partials(x, beta, y)  # noqa: E731
    np.testing.assert_allclose(d["f"], project(rho, beta, eta))
    np.testing.assert_allclose(d["x"], (project(rho + h, beta, eta) - project(rho - h, beta, eta))
                               / (2 * h), rtol=1e-8)
    np.testing.assert_allclose(d["y"], (project(rho, beta, eta + h) - project(rho, beta, eta - h))
                               / (2 * h), rtol=1e-8)
    np.testing.assert_allclose(d["yy"], (P(rho, eta + h)["y"] - P(rho, eta - h)["y"]) / (2 * h),
                               rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(d["xy"], (P(rho, eta + h)["x"] - P(rho, eta - h)["x"]) / (2 * h),
                               rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(d["xyy"], (P(rho, eta + h)["xy"] - P(rho, eta - h)["xy"]) / (2 * h),
                               rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("fun,partials", [
    (lambda r: simp_modulus(r, 3.0, 1.0), lambda r: simp_partials(r, 3.0)),
    (lambda r: gamma_factor(r, 120.0, 0.1), lambda r: gamma_partials(r, 120.0, 0.1)),
])
def test_scalar_interpolation_derivatives(fun, partials):
    rho = np.array([0.07, 0.1, 0.12, 0.3, 0.8])
    h = 1e-6
    vals = partials(rho)
    np.testing.assert_allclose(vals[0], fun(rho), rtol=1e-14)
    for k in range(1, 4):
        fd = (partials(rho + h)[k - 1] - partials(rho - h)[k - 1]) / (2 * h)
        np.testing.assert_allclose(vals[k], fd, rtol=1e-6, atol=1e-6 * np.abs(vals[k]).max())


def test_modulus_floors():
    assert simp_modulus(0.0, 3.0, 10.0) == pytest.approx(1e-5)
    assert linear_modulus(1.0, 4.0, 2.0) == pytest.approx(2.0)
    assert gamma_factor(1.0) == pytest.approx(1.0, abs=1e-40)


def _direct(problem, rho_hat, xi, c):
    """``a``, ``g`` and ``c`` evaluated straight from the interpolation chain."""
    it = problem.interp
    rho = project(rho_hat, it.beta, problem.stoch.eta_at(xi))
    g = gamma_factor(rho, it.beta0, c)
    a = g * simp_modulus(rho, it.p, problem.stoch.E0_at(xi), it.eps)
    rb = project(rho_hat, it.beta, 0.5)
    gb = gamma_factor(rb, it.beta0, c)
    cl = linear_modulus(rb, it.pl, problem.EL0, it.eps_L) * (1 - gb**2)
    return {"a": a, "g": g, "c": cl}


def test_ledger_matches_finite_differences_in_xi_and_density():
    pb = small_problem(material=4.0, geometry=(0.3, 0.7))
    n, m = pb.mesh.n_ele, pb.m
    rho_hat = np.linspace(0.2, 0.9, n)
    c = 0.35
    led = pb.ledger(rho_hat, c)
    h = 1e-4
    E = np.eye(m)
    f = lambda xi, r=rho_hat: _direct(pb, r, xi, c)  # noqa: E731
    for name in ("a", "g", "c"):
        jet = getattr(led, name)
        ref0 = f(np.zeros(m))[name]
        np.testing.assert_allclose(jet.v, ref0, rtol=1e-13)
        scale = np.abs(ref0).max()
        for k in range(m):
            dk = (f(h * E[k])[name] - f(-h * E[k])[name]) / (2 * h)
            np.testing.assert_allclose(jet.k[:, k], dk, atol=1e-7 * scale)
            for l in range(m):
                d2 = (f(h * (E[k] + E[l]))[name] - f(h * (E[k] - E[l]))[name]
                      - f(h * (E[l] - E[k]))[name] + f(-h * (E[k] + E[l]))[name]) / (4 * h * h)
                np.testing.assert_allclose(jet.kl[:, k, l], d2, atol=1e-5 * scale)
        # the energy sigmoid is steep in the density: use a finer step there
        hr = 1e-7
        dr = (f(np.zeros(m), rho_hat + hr)[name] - f(np.zeros(m), rho_hat - hr)[name]) / (2 * hr)
        np.testing.assert_allclose(jet.r, dr, rtol=1e-6, atol=1e-8 * scale)
        # mixed density derivatives from the jets at shifted densities
        up, dn = pb.ledger(rho_hat + hr, c), pb.ledger(rho_hat - hr, c)
        np.testing.assert_allclose(jet.kr, (getattr(up, name).k - getattr(dn, name).k) / (2 * hr),
                                   rtol=1e-5, atol=1e-7 * scale)
        np.testing.assert_allclose(jet.klr, (getattr(up, name).kl - getattr(dn, name).kl)
                                   / (2 * hr), rtol=1e-5, atol=1e-6 * scale)
