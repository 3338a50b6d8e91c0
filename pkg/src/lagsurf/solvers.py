"""Iterative linear algebra and time integration for surface PDEs.

Implicit systems are assembled row-wise from the GFDM stencils and solved
with an unpreconditioned BiCGStab(2) (the l=2 polynomial variant).  The
advection-diffusion-reaction step and the three-level wave step follow the
Lagrangian splitting: points move first, operators are rebuilt on the new
positions, then the remaining terms are integrated implicitly in place.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .operators import StencilSet, surface_divergence
from .point_cloud import PointCloud

log = logging.getLogger(__name__)


class SolverError(Exception):
    pass


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    converged: bool


def bicgstab2_solve(A, b, x0=None, tol=1e-10, max_iter=2000):
    """BiCGStab(l) with l=2, no preconditioner.

    Returns (x, SolveInfo).  On inner-product breakdown the iteration is
    restarted once from the current iterate; a second breakdown raises.
    Non-convergence within max_iter is reported via info.converged, never
    silently accepted by callers.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), SolveInfo(0, 0.0, True)

    ell = 2
    restarted = False
    iters = 0
    while True:
        r0 = b - A @ x
        rshadow = r0.copy()
        rho0, alpha, omega = 1.0, 0.0, 1.0
        rs = [r0]
        us = [np.zeros(n)]
        breakdown = False
        while iters < max_iter:
            res = np.linalg.norm(rs[0])
            if res <= tol * bnorm:
                return x, SolveInfo(iters, res / bnorm, True)
            rho0 = -omega * rho0
            # BiCG part
            for j in range(ell):
                rho1 = rshadow @ rs[j]
                if rho0 == 0.0 or not np.isfinite(rho1):
                    breakdown = True
                    break
                beta = alpha * rho1 / rho0
                rho0 = rho1
                for i in range(j + 1):
                    us[i] = rs[i] - beta * us[i]
                us.append(A @ us[j])
                gamma = rshadow @ us[j + 1]
                if gamma == 0.0 or not np.isfinite(gamma):
                    breakdown = True
                    break
                alpha = rho0 / gamma
                for i in range(j + 1):
                    rs[i] = rs[i] - alpha * us[i + 1]
                rs.append(A @ rs[j])
                x = x + alpha * us[0]
            if breakdown:
                break
            iters += 1
            # MR part: minimize ||r0 - sum gamma_j r_j|| (modified Gram-Schmidt)
            tau = np.zeros((ell + 1, ell + 1))
            sigma = np.zeros(ell + 1)
            gam_p = np.zeros(ell + 1)
            gam_pp = np.zeros(ell + 1)
            gam = np.zeros(ell + 1)
            for j in range(1, ell + 1):
                for i in range(1, j):
                    tau[i, j] = (rs[j] @ rs[i]) / sigma[i]
                    rs[j] = rs[j] - tau[i, j] * rs[i]
                sigma[j] = rs[j] @ rs[j]
                if sigma[j] == 0.0:
                    breakdown = True
                    break
                gam_p[j] = (rs[0] @ rs[j]) / sigma[j]
            if breakdown:
                break
            gam[ell] = gam_p[ell]
            omega = gam[ell]
            for j in range(ell - 1, 0, -1):
                gam[j] = gam_p[j] - sum(tau[j, i] * gam[i] for i in range(j + 1, ell + 1))
            for j in range(1, ell):
                gam_pp[j] = gam[j + 1] + sum(tau[j, i] * gam[i + 1] for i in range(j + 1, ell))
            x = x + gam[1] * rs[0]
            rs[0] = rs[0] - gam_p[ell] * rs[ell]
            us[0] = us[0] - gam[ell] * us[ell]
            for j in range(1, ell):
                us[0] = us[0] - gam[j] * us[j]
                x = x + gam_pp[j] * rs[j]
                rs[0] = rs[0] - gam_p[j] * rs[j]
            us = [us[0]]
            rs = [rs[0]]
        else:
            res = np.linalg.norm(b - A @ x) / bnorm
            log.warning("bicgstab2: max_iter=%d reached, residual %.3e", max_iter, res)
            return x, SolveInfo(iters, res, False)
        if breakdown and not restarted:
            restarted = True
            log.debug("bicgstab2: breakdown, restarting from current iterate")
            continue
        if breakdown:
            raise SolverError("bicgstab2: repeated breakdown (zero inner product)")


@dataclass
class SparseSystem:
    """Row-compressed implicit system; row i touches only the support of i."""

    matrix: sp.csr_matrix
    rhs: np.ndarray

    def solve(self, x0=None, tol=1e-10, max_iter=2000):
        x, info = bicgstab2_solve(self.matrix, self.rhs, x0=x0, tol=tol, max_iter=max_iter)
        if not info.converged:
            raise SolverError(
                f"implicit solve did not converge: residual {info.residual:.3e}")
        return x, info


def assemble_adr(cloud: PointCloud, stencils: StencilSet, dt, alpha, div_v,
                 phi_old, a_coeff=None, b_coeff=None) -> SparseSystem:
    """(1/dt + div v - a) phi - alpha*Lap phi = phi_old/dt + b."""
    n = cloud.n_points
    diag = 1.0 / dt + div_v
    if a_coeff is not None:
        diag = diag - a_coeff
    A = sp.diags(diag) - alpha * stencils.matrix("lap")
    rhs = phi_old / dt
    if b_coeff is not None:
        rhs = rhs + b_coeff
    return SparseSystem(A.tocsr(), rhs)


def adr_step(cloud: PointCloud, stencils: StencilSet, dt, alpha, forcing=None,
             velocity=None, t_new=None, field="phi", tol=1e-10):
    """One implicit advection-diffusion-reaction update of cloud.fields[field].

    Movement for the step must already be applied and stencils rebuilt on the
    new positions.  forcing(cloud, t) returns (a, b) with f(phi) = a*phi + b
    (affine contributions are folded into the matrix; a nonlinear f would be
    lagged to the previous level, exact here because the scenarios pass f
    analytically).
    """
    v = cloud.velocity if velocity is None else velocity
    div_v = surface_divergence(cloud, stencils, v)
    a_c = b_c = None
    if forcing is not None:
        a_c, b_c = forcing(cloud, t_new)
    system = assemble_adr(cloud, stencils, dt, alpha, div_v, cloud.fields[field],
                          a_c, b_c)
    phi, info = system.solve(x0=cloud.fields[field], tol=tol)
    cloud.fields[field] = phi
    return info


def wave_step(cloud: PointCloud, stencils: StencilSet, dt, c, forcing_values=None,
              velocity=None, field="phi", prev_field="phi_prev", tol=1e-10):
    """Three-level implicit wave update.

    (phi+ - 2 phi + phi-)/dt^2 + ((phi+ - phi)/dt) div v = c^2 Lap phi+ + f,
    with f the forcing values carried from the previous level.  phi_prev must
    be initialized (phi^{-1} = phi^0 - dt*g2) before the first step; both
    history fields ride along through adaptation as named fields.
    """
    v = cloud.velocity if velocity is None else velocity
    div_v = surface_divergence(cloud, stencils, v)
    phi = cloud.fields[field]
    phi_prev = cloud.fields[prev_field]
    n = cloud.n_points
    A = sp.diags(1.0 / dt ** 2 + div_v / dt) - (c * c) * stencils.matrix("lap")
    rhs = (2.0 * phi - phi_prev) / dt ** 2 + div_v * phi / dt
    if forcing_values is not None:
        rhs = rhs + forcing_values
    system = SparseSystem(A.tocsr(), rhs)
    phi_new, info = system.solve(x0=phi, tol=tol)
    cloud.fields[prev_field] = phi
    cloud.fields[field] = phi_new
    return info


def mcf_velocity(cloud: PointCloud, stencils: StencilSet, averaged=False,
                 table=None):
    """Curvature-driven velocity kappa~ n (or (kappa~ - mean) n).

    The raw curvature field must be smoothed before use or the flow is
    unstable; a single wide-Gaussian pass is applied."""
    from .operators import curvature, smooth_field

    kappa = curvature(cloud, stencils)
    kappa_s = smooth_field(cloud, kappa, table if table is not None else stencils.table)
    if averaged:
        kappa_s = kappa_s - kappa_s.mean()
    cloud.fields["kappa"] = kappa_s
    return kappa_s[:, None] * cloud.normal
