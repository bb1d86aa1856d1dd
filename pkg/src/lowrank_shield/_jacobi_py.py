"""Pure NumPy one-sided Jacobi sweeps (fallback for the compiled kernel).

Each round of the schedule holds disjoint row pairs, so all rotations of a
round are applied at once with vectorized array operations.
"""

import numpy as np


def jacobi_sweeps(Y, V, schedule, tol, floor, max_sweeps):
    rounds = []
    for rnd in schedule:
        keep = (rnd[:, 0] >= 0) & (rnd[:, 1] >= 0)
        rounds.append((rnd[keep, 0].copy(), rnd[keep, 1].copy()))

    sweep = 0
    rotated = True
    resid = 0.0
    while sweep < max_sweeps:
        sweep += 1
        rotated = False
        resid = 0.0
        for P, Q in rounds:
            if P.size == 0:
                continue
            yp = Y[P]
            yq = Y[Q]
            alpha = np.einsum("ij,ij->i", yp, yp)
            beta = np.einsum("ij,ij->i", yq, yq)
            gamma = np.einsum("ij,ij->i", yp, yq)
            scale = np.sqrt(alpha) * np.sqrt(beta)
            agam = np.abs(gamma)
            pos = scale > 0.0
            if pos.any():
                resid = max(resid, float(np.max(agam[pos] / scale[pos])))
            act = (agam > tol * scale) & (agam > floor)
            if not act.any():
                continue
            rotated = True
            P_, Q_ = P[act], Q[act]
            alpha, beta, gamma = alpha[act], beta[act], gamma[act]
            zeta = (beta - alpha) / (2.0 * gamma)
            big = np.abs(zeta) > 1e150
            zs = np.where(big, 1.0, zeta)
            t = np.where(zs >= 0.0, 1.0, -1.0) / (np.abs(zs) + np.sqrt(1.0 + zs * zs))
            t = np.where(big, 0.5 / np.where(big, zeta, 1.0), t)
            c = (1.0 / np.sqrt(1.0 + t * t))[:, None]
            s = c * t[:, None]
            for X in (Y, V):
                xp = X[P_]
                xq = X[Q_]
                X[P_] = c * xp - s * xq
                X[Q_] = s * xp + c * xq
        if not rotated:
            break
    return sweep, not rotated, resid
