# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the implicit Runge-Kutta integration of chains.

Mirrors :mod:`modwave._fallback` function for function. Every routine works
in place on its state argument and returns ``(status, residual)`` where a
nonzero status means the stage fixed-point iteration did not converge.
"""

import numpy as np

from libc.math cimport cos, sqrt, INFINITY

ctypedef fused scalar:
    double
    double complex


cdef inline double _abs2(scalar x) noexcept nogil:
    if scalar is double:
        return x * x
    else:
        return x.real * x.real + x.imag * x.imag


cdef inline scalar _conj(scalar x) noexcept nogil:
    if scalar is double:
        return x
    else:
        return x.conjugate()


cdef void _chain_rhs(scalar[:, ::1] y, scalar[:, ::1] out, scalar[:, ::1] force,
                     double[::1] kv, double[::1] mi, scalar q,
                     Py_ssize_t n, Py_ssize_t ncol) noexcept nogil:
    cdef Py_ssize_t j, col
    cdef scalar qc = _conj(q)
    for j in range(n):
        for col in range(ncol):
            out[j, col] = mi[j] * y[n + j, col]
    for j in range(n - 1):
        for col in range(ncol):
            force[j, col] = kv[j] * (y[j + 1, col] - y[j, col])
    for col in range(ncol):
        force[n - 1, col] = kv[n - 1] * (q * y[0, col] - y[n - 1, col])
    for col in range(ncol):
        out[n, col] = force[0, col] - qc * force[n - 1, col]
    for j in range(1, n):
        for col in range(ncol):
            out[n + j, col] = force[j, col] - force[j - 1, col]


def chain_integrate(scalar[:, ::1] phi, double t0, double h, Py_ssize_t nsteps,
                    double xi, double nu, double k0, double dk, double m0, double dm,
                    double complex bloch, double[:, ::1] a, double[::1] b, double[::1] c,
                    int max_iter, double tol):
    """Advance ``phi`` (2n x ncol) by ``nsteps`` steps of size ``h`` in place."""
    cdef Py_ssize_t dim = phi.shape[0]
    cdef Py_ssize_t ncol = phi.shape[1]
    cdef Py_ssize_t n = dim // 2
    cdef Py_ssize_t s = b.shape[0]
    dtype = np.float64 if scalar is double else np.complex128
    cdef scalar[:, :, ::1] K = np.zeros((s, dim, ncol), dtype=dtype)
    cdef scalar[:, :, ::1] Knew = np.zeros((s, dim, ncol), dtype=dtype)
    cdef scalar[:, ::1] Y = np.zeros((dim, ncol), dtype=dtype)
    cdef scalar[:, ::1] F = np.zeros((n, ncol), dtype=dtype)
    cdef double[:, ::1] kv = np.zeros((s, n))
    cdef double[:, ::1] mi = np.zeros((s, n))
    cdef scalar q
    cdef Py_ssize_t step, i, j, r, col
    cdef int it, converged = 0, status = 0
    cdef double t, theta, cosv, phinorm, diff, residual = 0.0
    cdef scalar acc

    if scalar is double:
        q = 1.0
    else:
        q = bloch

    with nogil:
        for step in range(nsteps):
            t = t0 + step * h
            for i in range(s):
                for j in range(n):
                    theta = xi * j - nu * (t + c[i] * h)
                    cosv = cos(theta)
                    kv[i, j] = k0 + dk * cosv
                    mi[i, j] = 1.0 / (m0 + dm * cosv)
            for i in range(s):
                _chain_rhs(phi, K[i], F, kv[i], mi[i], q, n, ncol)
            phinorm = 0.0
            for r in range(dim):
                for col in range(ncol):
                    phinorm = phinorm + _abs2(phi[r, col])
            phinorm = sqrt(phinorm)
            converged = 0
            for it in range(max_iter):
                for i in range(s):
                    for r in range(dim):
                        for col in range(ncol):
                            acc = 0
                            for j in range(s):
                                acc = acc + a[i, j] * K[j, r, col]
                            Y[r, col] = phi[r, col] + h * acc
                    _chain_rhs(Y, Knew[i], F, kv[i], mi[i], q, n, ncol)
                diff = 0.0
                for i in range(s):
                    for r in range(dim):
                        for col in range(ncol):
                            diff = diff + _abs2(Knew[i, r, col] - K[i, r, col])
                            K[i, r, col] = Knew[i, r, col]
                residual = h * sqrt(diff)
                if residual <= tol * phinorm:
                    converged = 1
                    break
            if not converged:
                status = 1
                break
            for r in range(dim):
                for col in range(ncol):
                    acc = 0
                    for i in range(s):
                        acc = acc + b[i] * K[i, r, col]
                    phi[r, col] = phi[r, col] + h * acc
    return status, residual


cdef int _mathieu_core(double delta, double eps, double t0, double h, Py_ssize_t nsteps,
                       double[:, ::1] a, double[::1] b, double[::1] c,
                       int max_iter, double tol, double* m, double* residual) noexcept nogil:
    # m holds the 2x2 state row-major: [u1, u2, p1, p2]
    cdef double ku[3][2]
    cdef double kp[3][2]
    cdef double nu_[3][2]
    cdef double np_[3][2]
    cdef double stiff[3]
    cdef double yu, yp, acu, acp, diff, phinorm, t
    cdef Py_ssize_t step, i, j, col
    cdef Py_ssize_t s = b.shape[0]
    cdef int it, converged
    if s > 3:
        return 2
    for step in range(nsteps):
        t = t0 + step * h
        for i in range(s):
            stiff[i] = delta + eps * cos(t + c[i] * h)
            for col in range(2):
                ku[i][col] = m[2 + col]
                kp[i][col] = -stiff[i] * m[col]
        phinorm = sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3])
        converged = 0
        for it in range(max_iter):
            diff = 0.0
            for i in range(s):
                for col in range(2):
                    acu = 0.0
                    acp = 0.0
                    for j in range(s):
                        acu = acu + a[i, j] * ku[j][col]
                        acp = acp + a[i, j] * kp[j][col]
                    yu = m[col] + h * acu
                    yp = m[2 + col] + h * acp
                    nu_[i][col] = yp
                    np_[i][col] = -stiff[i] * yu
            for i in range(s):
                for col in range(2):
                    diff = diff + (nu_[i][col] - ku[i][col]) ** 2 + (np_[i][col] - kp[i][col]) ** 2
                    ku[i][col] = nu_[i][col]
                    kp[i][col] = np_[i][col]
            residual[0] = h * sqrt(diff)
            if residual[0] <= tol * phinorm:
                converged = 1
                break
        if not converged:
            return 1
        for col in range(2):
            acu = 0.0
            acp = 0.0
            for i in range(s):
                acu = acu + b[i] * ku[i][col]
                acp = acp + b[i] * kp[i][col]
            m[col] = m[col] + h * acu
            m[2 + col] = m[2 + col] + h * acp
    return 0


def mathieu_integrate(double[:, ::1] phi, double delta, double eps, double t0, double h,
                      Py_ssize_t nsteps, double[:, ::1] a, double[::1] b, double[::1] c,
                      int max_iter, double tol):
    """Advance a 2x2 Mathieu fundamental matrix in place."""
    cdef double m[4]
    cdef double residual = 0.0
    cdef int status
    m[0] = phi[0, 0]; m[1] = phi[0, 1]; m[2] = phi[1, 0]; m[3] = phi[1, 1]
    with nogil:
        status = _mathieu_core(delta, eps, t0, h, nsteps, a, b, c, max_iter, tol, m, &residual)
    phi[0, 0] = m[0]; phi[0, 1] = m[1]; phi[1, 0] = m[2]; phi[1, 1] = m[3]
    return status, residual


def mathieu_traces(double[::1] deltas, double[::1] epsilons, long[::1] nsteps,
                   double period, double[:, ::1] a, double[::1] b, double[::1] c,
                   int max_iter, double tol, double[::1] out):
    """Trace of the monodromy over ``period`` for each (delta, eps) pair.

    Cells whose fixed-point iteration fails are written as NaN; the count of
    such cells is returned.
    """
    cdef Py_ssize_t k, npts = deltas.shape[0]
    cdef double m[4]
    cdef double residual
    cdef int status, failed = 0
    with nogil:
        for k in range(npts):
            m[0] = 1.0; m[1] = 0.0; m[2] = 0.0; m[3] = 1.0
            status = _mathieu_core(deltas[k], epsilons[k], 0.0, period / nsteps[k], nsteps[k],
                                   a, b, c, max_iter, tol, m, &residual)
            if status:
                out[k] = INFINITY - INFINITY
                failed = failed + 1
            else:
                out[k] = m[0] + m[3]
    return failed
