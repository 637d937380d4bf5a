"""Method of Moving Asymptotes for problems with few constraints.

This follows the classical formulation: at each outer iteration a separable
convex approximation is built from the current gradients and moving
asymptotes, and the resulting subproblem is solved by a primal-dual
interior-point method.  The problem form is

    min  f_0(x) + a0 z + sum_i (c_i y_i + 1/2 d_i y_i^2)
    s.t. f_i(x) - a_i z - y_i <= 0,   xmin <= x <= xmax,   y, z >= 0.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["MMAParams", "MMAState", "mma_update"]


@dataclass
class MMAParams:
    """Subproblem constants and asymptote rules.

    The defaults are the standard published settings (``a0 = 1``,
    ``a_i = 0``, ``c_i = 1000``, ``d_i = 1``) with an explicit move limit.
    """

    move: float = 0.2
    a0: float = 1.0
    a: float = 0.0
    c: float = 1000.0
    d: float = 1.0
    asyinit: float = 0.5
    asyincr: float = 1.2
    asydecr: float = 0.7
    albefa: float = 0.1
    raa0: float = 1e-5


@dataclass
class MMAState:
    """Iterate history needed by the asymptote update."""

    xold1: np.ndarray
    xold2: np.ndarray
    low: np.ndarray = None
    upp: np.ndarray = None
    iteration: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def start(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x.copy(), x.copy())


def mma_update(state, x, f0val, df0dx, fval, dfdx, xmin, xmax, params=None):
    """One MMA step.

    Parameters
    ----------
    state : MMAState
        Updated in place.
    x : ndarray (n,)
    f0val : float
    df0dx : ndarray (n,)
    fval : ndarray (m,)
    dfdx : ndarray (m, n)
    xmin, xmax : ndarray or float
    params : MMAParams, optional

    Returns
    -------
    ndarray
        The new design.
    """
    params = params or MMAParams()
    x = np.asarray(x, dtype=float)
    n = x.size
    fval = np.atleast_1d(np.asarray(fval, dtype=float))
    dfdx = np.atleast_2d(np.asarray(dfdx, dtype=float))
    m = fval.size
    xmin = np.broadcast_to(np.asarray(xmin, float), (n,)).copy()
    xmax = np.broadcast_to(np.asarray(xmax, float), (n,)).copy()
    a = np.full(m, params.a)
    c = np.full(m, params.c)
    d = np.full(m, params.d)
    eeen = np.ones(n)
    span = xmax - xmin
    k = state.iteration + 1

    # asymptotes
    if k <= 2 or state.low is None:
        low = x - params.asyinit * span
        upp = x + params.asyinit * span
    else:
        zzz = (x - state.xold1) * (state.xold1 - state.xold2)
        factor = np.ones(n)
        factor[zzz > 0] = params.asyincr
        factor[zzz < 0] = params.asydecr
        low = x - factor * (state.xold1 - state.low)
        upp = x + factor * (state.upp - state.xold1)
        low = np.clip(low, x - 10.0 * span, x - 0.01 * span)
        upp = np.clip(upp, x + 0.01 * span, x + 10.0 * span)

    # move limits
    alfa = np.maximum.reduce([low + params.albefa * (x - low), x - params.move * span, xmin])
    beta = np.minimum.reduce([upp - params.albefa * (upp - x), x + params.move * span, xmax])

    # approximation coefficients
    ux1, xl1 = upp - x, x - low
    ux2, xl2 = ux1 * ux1, xl1 * xl1
    xmami = np.maximum(span, 1e-5)
    xmamiinv = 1.0 / xmami
    dp, dm = np.maximum(df0dx, 0.0), np.maximum(-df0dx, 0.0)
    p0 = (1.001 * dp + 0.001 * dm + params.raa0 * xmamiinv) * ux2
    q0 = (0.001 * dp + 1.001 * dm + params.raa0 * xmamiinv) * xl2
    Dp, Dm = np.maximum(dfdx, 0.0), np.maximum(-dfdx, 0.0)
    P = (1.001 * Dp + 0.001 * Dm + params.raa0 * xmamiinv) * ux2
    Q = (0.001 * Dp + 1.001 * Dm + params.raa0 * xmamiinv) * xl2
    b = P @ (1.0 / ux1) + Q @ (1.0 / xl1) - fval

    xnew = _subsolv(m, n, params.a0, a, b, c, d, alfa, beta, low, upp, p0, q0, P, Q, eeen)

    state.xold2, state.xold1 = state.xold1, x.copy()
    state.low, state.upp = low, upp
    state.iteration = k
    return xnew


def _subsolv(m, n, a0, a, b, c, d, alfa, beta, low, upp, p0, q0, P, Q, eeen):
    """Primal-dual Newton method for the MMA subproblem; returns ``x``."""
    eeem = np.ones(m)
    epsimin = 1e-7
    epsi = 1.0
    x = 0.5 * (alfa + beta)
    y = eeem.copy()
    z = 1.0
    lam = eeem.copy()
    xsi = np.maximum(eeen / (x - alfa), 1.0)
    eta = np.maximum(eeen / (beta - x), 1.0)
    mu = np.maximum(eeem, 0.5 * c)
    zet = 1.0
    s = eeem.copy()

    while epsi > epsimin:
        epsvecn, epsvecm = epsi * eeen, epsi * eeem

        def residual(x, y, z, lam, xsi, eta, mu, zet, s):
            ux1, xl1 = upp - x, x - low
            plam = p0 + P.T @ lam
            qlam = q0 + Q.T @ lam
            gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
            rex = plam / ux1**2 - qlam / xl1**2 - xsi + eta
            rey = c + d * y - mu - lam
            rez = a0 - zet - a @ lam
            relam = gvec - a * z - y + s - b
            rexsi = xsi * (x - alfa) - epsvecn
            reeta = eta * (beta - x) - epsvecn
            remu = mu * y - epsvecm
            rezet = zet * z - epsi
            res = lam * s - epsvecm
            r = np.concatenate([rex, rey, [rez], relam, rexsi, reeta, remu, [rezet], res])
            return np.linalg.norm(r), np.max(np.abs(r))

        residunorm, residumax = residual(x, y, z, lam, xsi, eta, mu, zet, s)
        ittt = 0
        while residumax > 0.9 * epsi and ittt < 200:
            ittt += 1
            ux1, xl1 = upp - x, x - low
            ux2, xl2 = ux1**2, xl1**2
            ux3, xl3 = ux1 * ux2, xl1 * xl2
            uxinv1, xlinv1 = 1.0 / ux1, 1.0 / xl1
            uxinv2, xlinv2 = 1.0 / ux2, 1.0 / xl2
            plam = p0 + P.T @ lam
            qlam = q0 + Q.T @ lam
            gvec = P @ uxinv1 + Q @ xlinv1
            GG = P * uxinv2 - Q * xlinv2
            dpsidx = plam / ux2 - qlam / xl2
            delx = dpsidx - epsvecn / (x - alfa) + epsvecn / (beta - x)
            dely = c + d * y - lam - epsvecm / y
            delz = a0 - a @ lam - epsi / z
            dellam = gvec - a * z - y - b + epsvecm / lam
            diagx = 2.0 * (plam / ux3 + qlam / xl3) + xsi / (x - alfa) + eta / (beta - x)
            diagxinv = 1.0 / diagx
            diagy = d + mu / y
            diagyinv = 1.0 / diagy
            diaglam = s / lam
            diaglamyi = diaglam + diagyinv
            # m < n: reduced system in (lambda, z)
            blam = dellam + dely / diagy - GG @ (delx / diagx)
            bb = np.concatenate([blam, [delz]])
            Alam = np.diag(diaglamyi) + (GG * diagxinv) @ GG.T
            AA = np.block([[Alam, a[:, None]], [a[None, :], np.array([[-zet / z]])]])
            solut = np.linalg.solve(AA, bb)
            dlam = solut[:m]
            dz = solut[m]
            dx = -delx / diagx - (GG.T @ dlam) / diagx
            dy = -dely / diagy + dlam / diagy
            dxsi = -xsi + epsvecn / (x - alfa) - (xsi * dx) / (x - alfa)
            deta = -eta + epsvecn / (beta - x) + (eta * dx) / (beta - x)
            dmu = -mu + epsvecm / y - (mu * dy) / y
            dzet = -zet + epsi / z - zet * dz / z
            ds = -s + epsvecm / lam - (s * dlam) / lam
            xx = np.concatenate([y, [z], lam, xsi, eta, mu, [zet], s])
            dxx = np.concatenate([dy, [dz], dlam, dxsi, deta, dmu, [dzet], ds])
            stepxx = -1.01 * dxx / xx
            stmxx = np.max(stepxx)
            stmalfa = np.max(-1.01 * dx / (x - alfa))
            stmbeta = np.max(1.01 * dx / (beta - x))
            stminv = max(stmxx, stmalfa, stmbeta, 1.0)
            steg = 1.0 / stminv
            old = (x, y, z, lam, xsi, eta, mu, zet, s)
            itto = 0
            resinew = 2.0 * residunorm
            while resinew > residunorm and itto < 50:
                itto += 1
                x = old[0] + steg * dx
                y = old[1] + steg * dy
                z = old[2] + steg * dz
                lam = old[3] + steg * dlam
                xsi = old[4] + steg * dxsi
                eta = old[5] + steg * deta
                mu = old[6] + steg * dmu
                zet = old[7] + steg * dzet
                s = old[8] + steg * ds
                resinew, residumax = residual(x, y, z, lam, xsi, eta, mu, zet, s)
                steg *= 0.5
            residunorm = resinew
        epsi *= 0.1
    return x
