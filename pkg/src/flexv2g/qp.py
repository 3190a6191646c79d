"""Dense primal-dual interior-point solver for small convex QPs.

Solves::

    minimize    1/2 x'Px + q'x
    subject to  G x <= h
                lb <= x <= ub

with a Mehrotra predictor-corrector on the normal equations. Problems
produced by the schedulers have at most a few hundred variables, so dense
linear algebra is both simple and fast enough.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import SolverError


@dataclass
class QPResult:
    x: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float


def solve_qp(P, q, G=None, h=None, lb=None, ub=None, tol=1e-10, max_iter=100,
             acceptable_tol=1e-6, dual_tol=1e-5) -> QPResult:
    """Minimize a convex quadratic under linear inequalities and variable bounds.

    Iterates until the scaled primal residual and duality gap fall below
    ``tol`` and the scaled dual residual below ``dual_tol``. The dual
    tolerance is looser because on degenerate, nearly linear programs the
    normal equations lose accuracy in the multipliers of active constraints
    (the dual residual stalls near 1e-6) while the primal iterates keep
    converging. When round-off stalls progress first, the iterate with the
    smallest primal error is returned provided it meets ``acceptable_tol``;
    otherwise a :class:`SolverError` carrying the last residuals is raised.
    """
    q = np.asarray(q, dtype=float)
    n = q.size
    P = np.zeros((n, n)) if P is None else np.asarray(P, dtype=float)
    if G is None or len(G) == 0:
        G = np.zeros((0, n))
        h = np.zeros(0)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    if np.any(lb > ub):
        raise SolverError("infeasible bounds", {"worst": float(np.max(lb - ub))})

    il = np.flatnonzero(np.isfinite(lb))
    iu = np.flatnonzero(np.isfinite(ub))
    m_g, m_l, m_u = G.shape[0], il.size, iu.size
    m = m_g + m_l + m_u
    if m == 0:
        try:
            x = linalg.solve(P, -q, assume_a="sym")
        except linalg.LinAlgError as exc:
            raise SolverError("unbounded or singular unconstrained QP") from exc
        return QPResult(x, float(0.5 * x @ P @ x + q @ x), 0, 0.0, 0.0, 0.0)

    def residual_ineq(x):
        # slack form: r = h_all - A_all x  with A_all = [G; -I_l; I_u]
        return np.concatenate([h - G @ x, x[il] - lb[il], ub[iu] - x[iu]])

    def apply_At(v):
        out = G.T @ v[:m_g]
        np.subtract.at(out, il, v[m_g:m_g + m_l])
        np.add.at(out, iu, v[m_g + m_l:])
        return out

    def apply_A(dx):
        return np.concatenate([G @ dx, -dx[il], dx[iu]])

    x = np.zeros(n)
    mid = np.where(np.isfinite(lb) & np.isfinite(ub), 0.5 * (lb + ub), 0.0)
    mid = np.where(np.isfinite(lb) & ~np.isfinite(ub), lb + 1.0, mid)
    mid = np.where(~np.isfinite(lb) & np.isfinite(ub), ub - 1.0, mid)
    x[:] = mid
    s = np.maximum(residual_ineq(x), 1.0)
    z = np.ones(m)

    scale_q = 1.0 + np.max(np.abs(q), initial=0.0)
    scale_h = 1.0 + np.max(np.abs(h), initial=0.0) + np.max(np.abs(np.where(np.isfinite(lb), lb, 0)), initial=0.0) \
        + np.max(np.abs(np.where(np.isfinite(ub), ub, 0)), initial=0.0)

    rp_norm = rd_norm = gap = np.inf
    best, best_err = None, np.inf
    for it in range(1, max_iter + 1):
        # primal residual of A x + s = b
        rp = -residual_ineq(x) + s
        rd = P @ x + q + apply_At(z)
        mu = s @ z / m
        rp_norm = np.max(np.abs(rp))
        rd_norm = np.max(np.abs(rd))
        gap = s @ z
        obj = 0.5 * x @ P @ x + q @ x
        err = max(rp_norm / scale_h, gap / (1.0 + abs(obj)))
        dual_err = rd_norm / scale_q
        result = QPResult(x, float(obj), it, float(rp_norm), float(rd_norm), float(gap))
        if err <= tol and dual_err <= dual_tol:
            return result
        if dual_err <= 1e2 * dual_tol and err < best_err:
            best, best_err = result, err
        elif it > 5 and err > 1e3 * best_err:
            break

        w = z / s
        K = P + G.T @ (w[:m_g, None] * G)
        diag = np.zeros(n)
        np.add.at(diag, il, w[m_g:m_g + m_l])
        np.add.at(diag, iu, w[m_g + m_l:])
        K[np.diag_indices(n)] += diag
        try:
            factor = linalg.cho_factor(K, check_finite=False)

            def kkt_solve(rhs):
                return linalg.cho_solve(factor, rhs, check_finite=False)
        except linalg.LinAlgError:
            K[np.diag_indices(n)] += 1e-8 * (1.0 + np.abs(np.diag(K)))
            lu = linalg.lu_factor(K, check_finite=False)

            def kkt_solve(rhs):
                return linalg.lu_solve(lu, rhs, check_finite=False)

        def direction(rc):
            # P dx + A'dz = -rd ; A dx + ds = -rp ; Z ds + S dz = -rc
            dx = kkt_solve(-rd + apply_At((rc - z * rp) / s))
            ds = -rp - apply_A(dx)
            dz = -(rc + z * ds) / s
            return dx, ds, dz

        def max_step(v, dv):
            neg = dv < 0
            if not neg.any():
                return 1.0
            return min(1.0, float(np.min(-v[neg] / dv[neg])))

        dx_a, ds_a, dz_a = direction(s * z)
        a_p = max_step(s, ds_a)
        a_d = max_step(z, dz_a)
        mu_aff = (s + a_p * ds_a) @ (z + a_d * dz_a) / m
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        dx, ds, dz = direction(s * z + ds_a * dz_a - sigma * mu)
        step = 0.99 * min(max_step(s, ds), max_step(z, dz))
        x = x + step * dx
        s = s + step * ds
        z = z + step * dz
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            break

    if best is not None and best_err <= acceptable_tol:
        return best
    raise SolverError(
        f"QP solver did not converge in {max_iter} iterations",
        {"primal_residual": float(rp_norm), "dual_residual": float(rd_norm), "gap": float(gap)},
    )
