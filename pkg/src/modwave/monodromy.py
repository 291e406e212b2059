"""Fundamental, monodromy and reduced monodromy matrices of modulated chains.

Because the modulation is progressive, the pattern at ``t + tau`` is the
pattern at ``t`` moved by one site. The full-period monodromy then factors
as ``M = S^z (S^T m)^z`` with ``m`` the propagator over ``tau = T / z``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .chain import (
    ModelError,
    apply_shift,
    apply_shift_adjoint,
    cell_shift,
    full_shift,
    propagate,
)
from .integrators import DEFAULT_CONFIG


@dataclass
class MonodromyResult:
    matrix: np.ndarray
    period: float
    symplectic_deviation: float
    det_deviation: float
    multipliers: np.ndarray
    vectors: np.ndarray = field(default=None, repr=False)
    bloch: complex = None
    samples: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_matrix(cls, matrix, period, bloch=None, samples=None):
        values, vectors = linalg.eig(matrix)
        return cls(
            matrix=matrix,
            period=period,
            symplectic_deviation=linalg.symplectic_deviation(matrix),
            det_deviation=float(abs(linalg.det(matrix) - 1.0)),
            multipliers=values,
            vectors=vectors,
            bloch=bloch,
            samples=samples,
        )

    def to_dict(self, tol=1e-6):
        report = stability_report(self, tol)
        return {
            "period": self.period,
            "symplectic_deviation": self.symplectic_deviation,
            "det_deviation": self.det_deviation,
            "multipliers": [[float(v.real), float(v.imag)] for v in self.multipliers],
            "stable": report.stable,
        }


def _require_moving(spec):
    if spec.nu <= 0:
        raise ModelError("monodromy needs a modulation moving forward (nu > 0)")


def fundamental(spec, t1, cfg=DEFAULT_CONFIG, t0=0.0, backend=None):
    """``Phi(t1)`` for the full chain, started from the identity at ``t0``."""
    dim = 2 * spec.n_sites
    eye = np.eye(dim)
    if t1 == t0:
        return eye
    return propagate(spec, eye, t0, t1, cfg, backend=backend)


def reduced_monodromy(spec, cfg=DEFAULT_CONFIG, backend=None):
    """Propagator ``m = Phi(tau)`` of the full chain over one reduced period."""
    _require_moving(spec)
    m = fundamental(spec, spec.tau, cfg, backend=backend)
    return MonodromyResult.from_matrix(m, spec.tau)


def assemble_full_monodromy(m, spec):
    """``S^z (S^T m)^z`` from the reduced propagator, with no integration."""
    m = np.asarray(m)
    dim = 2 * spec.n_sites
    if m.shape != (dim, dim):
        raise ValueError(f"reduced monodromy must be {dim}x{dim}, got {m.shape}")
    op = full_shift(spec)
    x = apply_shift_adjoint(op, m)
    power = np.linalg.matrix_power(x, spec.z)
    for _ in range(spec.z):
        power = apply_shift(op, power)
    return power


def full_monodromy(spec, cfg=DEFAULT_CONFIG, direct=False, backend=None):
    """Monodromy over one modulation period.

    The factored route integrates over ``tau`` only; ``direct=True``
    integrates over the whole period instead.
    """
    _require_moving(spec)
    if direct:
        mat = fundamental(spec, spec.period, cfg, backend=backend)
    else:
        mat = assemble_full_monodromy(fundamental(spec, spec.tau, cfg, backend=backend), spec)
    return MonodromyResult.from_matrix(mat, spec.period)


def shifted_reduced(spec, cfg=DEFAULT_CONFIG, backend=None):
    """``S^T m`` for the full chain (per-``tau`` multipliers)."""
    _require_moving(spec)
    m = fundamental(spec, spec.tau, cfg, backend=backend)
    return MonodromyResult.from_matrix(apply_shift_adjoint(full_shift(spec), m), spec.tau)


def cell_fundamental(spec, bloch, cfg=DEFAULT_CONFIG, samples=None, backend=None):
    """Cell propagator over ``[0, tau]``.

    With ``samples`` set, also returns the propagators at ``samples``
    uniformly spaced instants ``t_i = i tau / samples`` (``i < samples``).
    """
    _require_moving(spec)
    dim = 2 * spec.z
    phi = np.eye(dim, dtype=complex)
    if samples is None:
        return propagate(spec, phi, 0.0, spec.tau, cfg, bloch=bloch, backend=backend), None
    total = cfg.steps_for(spec.tau, spec.char_time())
    sub = max(1, math.ceil(total / samples))
    dt = spec.tau / samples
    stack = np.empty((samples, dim, dim), dtype=complex)
    for i in range(samples):
        stack[i] = phi
        phi = propagate(spec, phi, i * dt, (i + 1) * dt, cfg, bloch=bloch, steps=sub, backend=backend)
    return phi, stack


def cell_shifted_reduced(spec, bloch, cfg=DEFAULT_CONFIG, samples=None, backend=None):
    """``S^H m`` for one unit cell closed by the Bloch factor ``bloch``."""
    m, stack = cell_fundamental(spec, bloch, cfg, samples, backend)
    shifted = apply_shift_adjoint(cell_shift(spec, bloch), m)
    return MonodromyResult.from_matrix(shifted, spec.tau, bloch=complex(bloch), samples=stack)


def cell_monodromy(spec, bloch, cfg=DEFAULT_CONFIG, backend=None):
    """Full-period monodromy of one Bloch cell, ``conj(Q) (S^H m)^z``.

    ``S^z`` is ``conj(Q)`` times the identity for a cell closed by ``Q``, so
    the multipliers are ``conj(Q) lambda^z`` with ``lambda`` those of
    :func:`cell_shifted_reduced`.
    """
    m, _ = cell_fundamental(spec, bloch, cfg, backend=backend)
    shifted = apply_shift_adjoint(cell_shift(spec, bloch), m)
    mat = np.conj(bloch) * np.linalg.matrix_power(shifted, spec.z)
    return MonodromyResult.from_matrix(mat, spec.period, bloch=complex(bloch))


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_modulus: float
    growth_rate: float
    defect: float

    @property
    def verdict(self):
        return "stable" if self.stable else "unstable"


def _defect(values, vectors, tol):
    # smallest singular value among eigenvector clusters on the unit circle;
    # near zero flags a Jordan block (linear growth)
    worst = 1.0
    on_circle = np.abs(np.abs(values) - 1.0) <= tol
    used = np.zeros(values.size, dtype=bool)
    for i in np.flatnonzero(on_circle):
        if used[i]:
            continue
        group = np.flatnonzero(on_circle & (np.abs(values - values[i]) <= math.sqrt(tol)))
        used[group] = True
        if group.size > 1:
            sv = np.linalg.svd(vectors[:, group], compute_uv=False)
            worst = min(worst, float(sv[-1]))
    return worst


def stability_report(result, tol=1e-6):
    """Classify by the largest multiplier modulus.

    ``growth_rate`` is ``ln max|lambda| / period`` (zero when stable).
    ``defect`` is a diagnostic for coalesced multipliers on the circle.
    """
    mod = float(np.max(np.abs(result.multipliers)))
    stable = mod <= 1.0 + tol
    rate = 0.0 if stable else math.log(mod) / result.period
    defect = _defect(result.multipliers, result.vectors, tol) if result.vectors is not None else 1.0
    return StabilityReport(stable=stable, max_modulus=mod, growth_rate=rate, defect=defect)
