"""Pure numpy versions of the routines in the compiled ``_kernels`` module.

Signatures and in-place semantics match the extension exactly so that
:mod:`modwave.kernels` can swap one for the other.
"""

import numpy as np


def _chain_rhs(y, kv, mi, q):
    n = y.shape[0] // 2
    u, p = y[:n], y[n:]
    out = np.empty_like(y)
    out[:n] = mi[:, None] * p
    strain = np.empty_like(u)
    strain[:-1] = u[1:] - u[:-1]
    strain[-1] = q * u[0] - u[-1]
    force = kv[:, None] * strain
    out[n] = force[0] - np.conj(q) * force[-1]
    out[n + 1:] = force[1:] - force[:-1]
    return out


def chain_integrate(phi, t0, h, nsteps, xi, nu, k0, dk, m0, dm, bloch, a, b, c, max_iter, tol):
    """Advance ``phi`` (2n x ncol) by ``nsteps`` steps of size ``h`` in place."""
    n = phi.shape[0] // 2
    s = len(b)
    q = 1.0 if np.isrealobj(phi) else complex(bloch)
    sites = np.arange(n)
    residual = 0.0
    for step in range(nsteps):
        t = t0 + step * h
        theta = xi * sites[None, :] - nu * (t + c[:, None] * h)
        cosv = np.cos(theta)
        kv = k0 + dk * cosv
        mi = 1.0 / (m0 + dm * cosv)
        K = np.stack([_chain_rhs(phi, kv[i], mi[i], q) for i in range(s)])
        phinorm = np.linalg.norm(phi)
        for _ in range(max_iter):
            Y = phi[None] + h * np.tensordot(a, K, axes=(1, 0))
            Knew = np.stack([_chain_rhs(Y[i], kv[i], mi[i], q) for i in range(s)])
            residual = h * np.linalg.norm(Knew - K)
            K = Knew
            if residual <= tol * phinorm:
                break
        else:
            return 1, residual
        phi += h * np.tensordot(b, K, axes=(0, 0))
    return 0, residual


def _mathieu_batch(m, delta, eps, t0, h, nsteps, a, b, c, max_iter, tol):
    # m: (npts, 2, 2) fundamental matrices, delta/eps: (npts,), shared step size
    s = len(b)
    failed = np.zeros(m.shape[0], dtype=bool)
    residual = np.zeros(m.shape[0])
    for step in range(nsteps):
        t = t0 + step * h
        stiff = delta[None, :] + eps[None, :] * np.cos(t + c[:, None] * h)

        def rhs(y, i):
            out = np.empty_like(y)
            out[:, 0] = y[:, 1]
            out[:, 1] = -stiff[i][:, None] * y[:, 0]
            return out

        K = np.stack([rhs(m, i) for i in range(s)])
        phinorm = np.sqrt(np.sum(m**2, axis=(1, 2)))
        done = np.zeros(m.shape[0], dtype=bool)
        for _ in range(max_iter):
            Y = m[None] + h * np.tensordot(a, K, axes=(1, 0))
            Knew = np.stack([rhs(Y[i], i) for i in range(s)])
            res = h * np.sqrt(np.sum((Knew - K) ** 2, axis=(0, 2, 3)))
            # freeze stages of already-converged points to match the scalar loop
            K = np.where(done[None, :, None, None], K, Knew)
            residual = np.where(done, residual, res)
            done |= res <= tol * phinorm
            if done.all():
                break
        failed |= ~done
        m += h * np.tensordot(b, K, axes=(0, 0))
    return failed, residual


def mathieu_integrate(phi, delta, eps, t0, h, nsteps, a, b, c, max_iter, tol):
    """Advance a 2x2 Mathieu fundamental matrix in place."""
    m = phi[None].copy()
    failed, residual = _mathieu_batch(
        m, np.array([delta]), np.array([eps]), t0, h, nsteps, a, b, c, max_iter, tol
    )
    if failed[0]:
        return 1, float(residual[0])
    phi[...] = m[0]
    return 0, float(residual[0])


def mathieu_traces(deltas, epsilons, nsteps, period, a, b, c, max_iter, tol, out):
    """Trace of the monodromy over ``period`` for each (delta, eps) pair.

    Points sharing a step count are integrated together as one batch.
    """
    deltas = np.asarray(deltas)
    epsilons = np.asarray(epsilons)
    nsteps = np.asarray(nsteps)
    failed_total = 0
    for ns in np.unique(nsteps):
        idx = np.flatnonzero(nsteps == ns)
        m = np.broadcast_to(np.eye(2), (idx.size, 2, 2)).copy()
        failed, _ = _mathieu_batch(
            m, deltas[idx], epsilons[idx], 0.0, period / ns, int(ns), a, b, c, max_iter, tol
        )
        tr = m[:, 0, 0] + m[:, 1, 1]
        tr[failed] = np.nan
        out[idx] = tr
        failed_total += int(failed.sum())
    return failed_total
