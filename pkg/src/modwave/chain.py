"""Spring-mass chains with progressive space-time modulation.

Sites are numbered from 0. Spring ``n`` joins sites ``n`` and ``n + 1`` and
the properties read::

    k_n(t) = k0 + dk * cos(xi * n - nu * t)
    m_n(t) = m0 + dm * cos(xi * n - nu * t),   xi = 2 pi / z

The full chain closes periodically over ``z * cells`` sites. A single unit
cell closes with a Bloch factor ``Q``: ``u_z = Q u_0``.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from ._fallback import _chain_rhs
from .integrators import DEFAULT_CONFIG, GL6, ConvergenceError


class ModelError(ValueError):
    """Parameters outside the physical domain of the model."""


@dataclass(frozen=True)
class ChainSpec:
    z: int
    cells: int
    k0: float = 1.0
    m0: float = 1.0
    dk: float = 0.0
    dm: float = 0.0
    nu: float = 0.4

    def __post_init__(self):
        if int(self.z) != self.z or self.z < 1:
            raise ModelError(f"z must be a positive integer, got {self.z}")
        if int(self.cells) != self.cells or self.cells < 1:
            raise ModelError(f"cells must be a positive integer, got {self.cells}")
        object.__setattr__(self, "z", int(self.z))
        object.__setattr__(self, "cells", int(self.cells))
        for name in ("k0", "m0", "dk", "dm", "nu"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ModelError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.k0 <= 0 or self.m0 <= 0:
            raise ModelError("mean stiffness and mass must be positive")
        if abs(self.dk) >= self.k0 or abs(self.dm) >= self.m0:
            raise ModelError("modulation amplitudes must stay below the mean values")

    @property
    def xi(self):
        return 2 * math.pi / self.z

    @property
    def n_sites(self):
        return self.z * self.cells

    @property
    def period(self):
        """Modulation period ``T``; infinite for a static chain."""
        return math.inf if self.nu == 0 else 2 * math.pi / abs(self.nu)

    @property
    def tau(self):
        """Reduced period ``T / z`` after which the pattern moves one site."""
        return self.period / self.z

    @property
    def modulated(self):
        return self.nu != 0 and (self.dk != 0 or self.dm != 0)

    def char_time(self):
        """Shorter of the modulation period and the fastest oscillation period.

        Each mass feels two springs, so the highest chain frequency is at most
        ``2 sqrt(k_max / m_min)`` and the period estimate is
        ``pi sqrt(m_min / k_max)``.
        """
        osc = math.pi * math.sqrt((self.m0 - abs(self.dm)) / (self.k0 + abs(self.dk)))
        return min(self.period, osc)

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return ChainSpec(**data)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"z", "cells", "k0", "m0", "dk", "dm", "nu"}
        if unknown:
            raise ModelError(f"unknown chain fields: {sorted(unknown)}")
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def profiles(spec, n, t):
    """Stiffness and mass at site(s) ``n`` and time ``t``."""
    theta = spec.xi * np.asarray(n) - spec.nu * t
    cosv = np.cos(theta)
    return spec.k0 + spec.dk * cosv, spec.m0 + spec.dm * cosv


def _check_bloch(bloch):
    bloch = complex(bloch)
    if abs(abs(bloch) - 1.0) > 1e-12:
        raise ModelError(f"Bloch factor must have unit modulus, got |Q| = {abs(bloch)!r}")
    return bloch


def _rhs(spec, t, phi, sites, bloch):
    phi = np.asarray(phi)
    if phi.shape[0] != 2 * sites:
        raise ValueError(f"state must have length {2 * sites}, got {phi.shape[0]}")
    k, m = profiles(spec, np.arange(sites), t)
    vec = phi.ndim == 1
    y = phi[:, None] if vec else phi
    out = _chain_rhs(y, k, 1.0 / m, bloch)
    return out[:, 0] if vec else out


def rhs_full(spec, t, phi):
    """Time derivative of ``[u; p]`` for the periodic chain, without forming K."""
    return _rhs(spec, t, phi, spec.n_sites, 1.0)


def rhs_cell(spec, t, phi, bloch):
    """Time derivative for one unit cell closed by ``u_z = Q u_0``."""
    bloch = _check_bloch(bloch)
    return _rhs(spec, t, np.asarray(phi, dtype=complex), spec.z, bloch)


def stiffness_matrix(spec, t, bloch=None):
    """Dense ``K = A^H C A`` (full chain when ``bloch`` is None)."""
    sites = spec.n_sites if bloch is None else spec.z
    q = 1.0 if bloch is None else _check_bloch(bloch)
    k, _ = profiles(spec, np.arange(sites), t)
    a = -np.eye(sites, dtype=complex if bloch is not None else float)
    a[np.arange(sites - 1), np.arange(1, sites)] += 1.0
    a[sites - 1, 0] += q
    return a.conj().T @ (k[:, None] * a)


def system_matrix(spec, t, bloch=None):
    """Dense ``[[0, M^-1], [-K, 0]]``; only used for checks and small problems."""
    sites = spec.n_sites if bloch is None else spec.z
    _, m = profiles(spec, np.arange(sites), t)
    kmat = stiffness_matrix(spec, t, bloch)
    a = np.zeros((2 * sites, 2 * sites), dtype=kmat.dtype)
    a[:sites, sites:] = np.diag(1.0 / m)
    a[sites:, :sites] = -kmat
    return a


@dataclass(frozen=True)
class ShiftOperator:
    """Shift by one site, acting identically on the u and p blocks.

    With ``bloch`` set, the wrapped entry is multiplied by ``conj(bloch)``
    as the cell closure requires.
    """

    dim: int
    bloch: complex = 1.0

    def matrix(self):
        s = np.zeros((self.dim, self.dim), dtype=complex)
        s[np.arange(1, self.dim), np.arange(self.dim - 1)] = 1.0
        s[0, self.dim - 1] = np.conj(self.bloch)
        return s


def _split(op, phi):
    phi = np.asarray(phi)
    if phi.shape[0] != 2 * op.dim:
        raise ValueError(f"state length {phi.shape[0]} does not match shift of size {op.dim}")
    return phi


def apply_shift(op, phi):
    """``(S phi)_n = phi_{n-1}`` on each block, wrapped entry times ``Q*``."""
    phi = _split(op, phi)
    n = op.dim
    out = np.concatenate([np.roll(phi[:n], 1, axis=0), np.roll(phi[n:], 1, axis=0)])
    if op.bloch != 1.0:
        out = out.astype(complex)
        out[0] *= np.conj(op.bloch)
        out[n] *= np.conj(op.bloch)
    return out


def apply_shift_adjoint(op, phi):
    """Inverse of :func:`apply_shift`."""
    phi = _split(op, phi)
    n = op.dim
    out = np.concatenate([np.roll(phi[:n], -1, axis=0), np.roll(phi[n:], -1, axis=0)])
    if op.bloch != 1.0:
        out = out.astype(complex)
        out[n - 1] *= op.bloch
        out[2 * n - 1] *= op.bloch
    return out


def full_shift(spec):
    return ShiftOperator(spec.n_sites)


def cell_shift(spec, bloch):
    return ShiftOperator(spec.z, _check_bloch(bloch))


def propagate(spec, phi0, t0, t1, cfg=DEFAULT_CONFIG, bloch=None, steps=None, tab=GL6, backend=None):
    """Integrate the chain (or one Bloch cell) from ``t0`` to ``t1``.

    ``phi0`` may be a vector or a matrix of column states. Uses the selected
    kernel backend; ``backend`` forces 'compiled' or 'python'.
    """
    sites = spec.n_sites if bloch is None else spec.z
    phi0 = np.asarray(phi0)
    if phi0.shape[0] != 2 * sites:
        raise ValueError(f"state must have {2 * sites} rows, got {phi0.shape[0]}")
    if bloch is not None:
        bloch = _check_bloch(bloch)
    cplx = bloch is not None or np.iscomplexobj(phi0)
    if not cplx:
        bloch = 1.0
    vec = phi0.ndim == 1
    phi = np.array(phi0[:, None] if vec else phi0, dtype=complex if cplx else float, order="C")
    if t1 == t0:
        return phi[:, 0] if vec else phi
    if steps is None:
        steps = cfg.steps_for(t1 - t0, spec.char_time())
    h = (t1 - t0) / steps
    impl = kernels.backend_module(backend)
    status, residual = impl.chain_integrate(
        phi, float(t0), float(h), int(steps), spec.xi, spec.nu,
        spec.k0, spec.dk, spec.m0, spec.dm, complex(bloch),
        tab.a, tab.b, tab.c, int(cfg.max_iter), float(cfg.tol),
    )
    if status:
        raise ConvergenceError(
            f"stage iteration did not converge (residual {residual:.3e}); "
            "increase steps_per_char",
            residual=residual,
        )
    return phi[:, 0] if vec else phi
