# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled one-sided Jacobi sweeps.

Mirrors ``lowrank_shield._jacobi_py.jacobi_sweeps`` pair for pair; only the
order of floating-point summation inside the dot products differs.
"""

from libc.math cimport fabs, sqrt


cdef inline void _rotate(double[:, ::1] X, Py_ssize_t p, Py_ssize_t q,
                         double c, double s) noexcept nogil:
    cdef Py_ssize_t k
    cdef double xp, xq
    for k in range(X.shape[1]):
        xp = X[p, k]
        xq = X[q, k]
        X[p, k] = c * xp - s * xq
        X[q, k] = s * xp + c * xq


def jacobi_sweeps(double[:, ::1] Y, double[:, ::1] V, const Py_ssize_t[:, :, ::1] schedule,
                  double tol, double floor, int max_sweeps):
    """Orthogonalize the rows of ``Y`` in place, accumulating rotations in ``V``.

    Returns ``(sweeps, converged, residual)`` where ``residual`` is the largest
    relative row coupling seen during the last sweep.
    """
    cdef Py_ssize_t nrounds = schedule.shape[0]
    cdef Py_ssize_t npairs = schedule.shape[1]
    cdef Py_ssize_t m = Y.shape[1]
    cdef Py_ssize_t r, i, k, p, q
    cdef double alpha, beta, gamma, scale, rel, zeta, t, c, s, resid = 0.0
    cdef int sweep = 0
    cdef bint rotated = True

    with nogil:
        while sweep < max_sweeps:
            sweep += 1
            rotated = False
            resid = 0.0
            for r in range(nrounds):
                for i in range(npairs):
                    p = schedule[r, i, 0]
                    q = schedule[r, i, 1]
                    if p < 0 or q < 0:
                        continue
                    alpha = 0.0
                    beta = 0.0
                    gamma = 0.0
                    for k in range(m):
                        alpha = alpha + Y[p, k] * Y[p, k]
                        beta = beta + Y[q, k] * Y[q, k]
                        gamma = gamma + Y[p, k] * Y[q, k]
                    scale = sqrt(alpha) * sqrt(beta)
                    if scale > 0.0:
                        rel = fabs(gamma) / scale
                        if rel > resid:
                            resid = rel
                    if fabs(gamma) <= tol * scale or fabs(gamma) <= floor:
                        continue
                    rotated = True
                    zeta = (beta - alpha) / (2.0 * gamma)
                    if fabs(zeta) > 1e150:
                        t = 0.5 / zeta
                    elif zeta >= 0.0:
                        t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                    else:
                        t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = c * t
                    _rotate(Y, p, q, c, s)
                    _rotate(V, p, q, c, s)
            if not rotated:
                break
    return sweep, not rotated, resid
