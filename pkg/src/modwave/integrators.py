"""Fixed-step integrators for linear systems ``dphi/dt = A(t) phi``.

Matrix-valued states are integrated column-wise in one pass, which is how
fundamental and monodromy matrices are built.
"""

import math
from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    """Stage fixed-point iteration did not reach its tolerance.

    Usually means the step is too large for the stiffest mode.
    """

    def __init__(self, message, residual=float("nan"), time=None):
        super().__init__(message)
        self.residual = residual
        self.time = time


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=float)
        b = np.ascontiguousarray(self.b, dtype=float)
        c = np.ascontiguousarray(self.c, dtype=float)
        s = b.size
        if a.shape != (s, s) or c.size != s:
            raise ValueError("inconsistent tableau shapes")
        if abs(b.sum() - 1.0) > 1e-14:
            raise ValueError("weights must sum to one")
        if np.max(np.abs(a.sum(axis=1) - c)) > 1e-14:
            raise ValueError("nodes must equal row sums of the stage matrix")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self):
        return self.b.size

    @property
    def explicit(self):
        return not np.any(np.triu(self.a))


_r15 = math.sqrt(15.0)

GL6 = ButcherTableau(
    "GL6",
    a=[
        [5 / 36, 2 / 9 - _r15 / 15, 5 / 36 - _r15 / 30],
        [5 / 36 + _r15 / 24, 2 / 9, 5 / 36 - _r15 / 24],
        [5 / 36 + _r15 / 30, 2 / 9 + _r15 / 15, 5 / 36],
    ],
    b=[5 / 18, 4 / 9, 5 / 18],
    c=[0.5 - _r15 / 10, 0.5, 0.5 + _r15 / 10],
    order=6,
)

RK4 = ButcherTableau(
    "RK4",
    a=[[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]],
    b=[1 / 6, 1 / 3, 1 / 3, 1 / 6],
    c=[0, 0.5, 0.5, 1],
    order=4,
)


@dataclass(frozen=True)
class StepConfig:
    """Step-size and stage-solver settings.

    ``steps_per_char`` steps are taken per characteristic time, the shorter
    of the modulation period and the fastest oscillation period estimate.
    """

    steps_per_char: int = 40
    max_iter: int = 10
    tol: float = 1e-12

    def __post_init__(self):
        if self.steps_per_char < 1 or self.max_iter < 1 or not self.tol > 0:
            raise ValueError(f"step settings must be positive: {self}")

    def steps_for(self, span, char_time):
        """Number of uniform steps covering ``span``."""
        if not char_time > 0:
            raise ValueError("characteristic time must be positive")
        return max(1, math.ceil(self.steps_per_char * abs(span) / char_time - 1e-9))


DEFAULT_CONFIG = StepConfig()


def _apply(op, x):
    return op(x) if callable(op) else op @ x


def symplectic_euler_step(phi, t, h, mass_inv, stiffness):
    """One symplectic Euler step for ``u' = M^-1 p, p' = -K u``.

    ``mass_inv`` and ``stiffness`` are callables of time returning either a
    matrix or a function that applies the operator.
    """
    phi = np.asarray(phi)
    n = phi.shape[0] // 2
    u, p = phi[:n], phi[n:]
    u_new = u + h * _apply(mass_inv(t + h), p)
    p_new = p - h * _apply(stiffness(t + h), u_new)
    return np.concatenate([u_new, p_new])


def symplectic_euler_integrate(phi0, t0, t1, steps, mass_inv, stiffness):
    h = (t1 - t0) / steps
    phi = np.array(phi0, copy=True)
    for i in range(steps):
        phi = symplectic_euler_step(phi, t0 + i * h, h, mass_inv, stiffness)
    return phi


def irk_step(sys, phi, t, h, tab=GL6, cfg=DEFAULT_CONFIG):
    """One implicit Runge-Kutta step, stages solved by fixed-point iteration."""
    s = tab.stages
    ts = t + tab.c * h
    k = np.stack([sys(ts[i], phi) for i in range(s)])
    scale = cfg.tol * np.linalg.norm(phi)
    residual = 0.0
    for _ in range(cfg.max_iter):
        y = phi[None] + h * np.tensordot(tab.a, k, axes=(1, 0))
        k_new = np.stack([sys(ts[i], y[i]) for i in range(s)])
        residual = h * np.linalg.norm(k_new - k)
        k = k_new
        if residual <= scale:
            break
    else:
        raise ConvergenceError(
            f"stage iteration stalled at t={t:.6g} (residual {residual:.3e}); reduce the step",
            residual=residual,
            time=t,
        )
    return phi + h * np.tensordot(tab.b, k, axes=(0, 0))


def irk_integrate(sys, phi0, t0, t1, tab=GL6, cfg=DEFAULT_CONFIG, steps=None, char_time=None):
    """Integrate ``sys`` from ``t0`` to ``t1`` with uniform steps.

    Parameters
    ----------
    sys : callable
        ``sys(t, phi)`` returning the time derivative, linear in ``phi``.
    phi0 : ndarray
        Initial vector, or matrix whose columns are integrated together.
    tab : ButcherTableau
        Any tableau; explicit ones simply converge on the first sweep.
    steps : int, optional
        Step count. Defaults to ``cfg.steps_for(t1 - t0, char_time)`` with
        ``char_time`` defaulting to the whole span.

    Raises
    ------
    ConvergenceError
        If a step's stage iteration misses ``cfg.tol`` after ``cfg.max_iter``
        sweeps.
    """
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if steps is None:
        steps = cfg.steps_for(t1 - t0, char_time if char_time else t1 - t0)
    h = (t1 - t0) / steps
    phi = np.array(phi0, copy=True)
    for i in range(steps):
        phi = irk_step(sys, phi, t0 + i * h, h, tab, cfg)
    return phi


def rk4_reference_integrate(sys, phi0, t0, t1, steps):
    """Classical explicit fourth-order Runge-Kutta, used as a test oracle."""
    h = (t1 - t0) / steps
    phi = np.array(phi0, copy=True)
    t = t0
    for i in range(steps):
        t = t0 + i * h
        k1 = sys(t, phi)
        k2 = sys(t + h / 2, phi + h / 2 * k1)
        k3 = sys(t + h / 2, phi + h / 2 * k2)
        k4 = sys(t + h, phi + h * k3)
        phi = phi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return phi
