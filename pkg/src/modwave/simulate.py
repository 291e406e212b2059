"""Time-domain wave fields on finite periodic chains."""

import math
from dataclasses import dataclass, field

import numpy as np

from ._fallback import _chain_rhs
from .chain import ModelError, ChainSpec, profiles, propagate
from .integrators import DEFAULT_CONFIG, StepConfig, symplectic_euler_step


class InstabilityError(ArithmeticError):
    """The field grew past the overflow guard during a run."""


class WraparoundError(ValueError):
    """Energy reached the far side of the ring before enough samples were taken."""


@dataclass(frozen=True)
class InitialCondition:
    """Displacement initial condition; momentum starts at zero.

    ``kind`` is one of 'random', 'dirac' or 'gaussian'.
    """

    kind: str
    seed: int = 0
    site: int = 0
    center: float = 0.0
    width: float = 1.0
    carrier_q: float = 0.0

    def __post_init__(self):
        if self.kind not in ("random", "dirac", "gaussian"):
            raise ValueError(f"unknown initial condition {self.kind!r}")
        if self.kind == "gaussian" and not self.width > 0:
            raise ValueError("gaussian width must be positive")

    @classmethod
    def parse(cls, text, n_sites=None):
        """Parse ``dirac:SITE``, ``random:SEED`` or ``gaussian:CENTER:WIDTH[:Q]``."""
        kind, _, rest = text.partition(":")
        args = [a for a in rest.split(":") if a] if rest else []
        try:
            if kind == "dirac":
                return cls("dirac", site=int(args[0]) if args else 0)
            if kind == "random":
                return cls("random", seed=int(args[0]) if args else 0)
            if kind == "gaussian":
                center = float(args[0]) if args else (n_sites or 0) / 2
                width = float(args[1]) if len(args) > 1 else 1.0
                carrier = float(args[2]) if len(args) > 2 else 0.0
                return cls("gaussian", center=center, width=width, carrier_q=carrier)
        except (ValueError, IndexError) as exc:
            raise ValueError(f"bad initial condition {text!r}") from exc
        raise ValueError(f"unknown initial condition {text!r}")


def make_initial(spec, ic):
    """State vector ``[u; p]`` for the full chain."""
    n = spec.n_sites
    u = np.zeros(n)
    if ic.kind == "dirac":
        if not 0 <= ic.site < n:
            raise ModelError(f"site {ic.site} outside the chain of {n} sites")
        u[ic.site] = 1.0
    elif ic.kind == "random":
        u = np.random.default_rng(ic.seed).standard_normal(n)
    else:
        if not 0 <= ic.center < n:
            raise ModelError(f"center {ic.center} outside the chain of {n} sites")
        # nearest periodic image of each site relative to the center
        d = (np.arange(n) - ic.center + n / 2) % n - n / 2
        u = np.exp(-(d**2) / (2 * ic.width**2)) * np.cos(ic.carrier_q * d)
        u /= np.max(np.abs(u))
    return np.concatenate([u, np.zeros(n)])


@dataclass(frozen=True)
class Trajectory:
    spec: ChainSpec
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    scheme: str = "gl6"
    cfg: StepConfig = DEFAULT_CONFIG

    @property
    def displacements(self):
        return self.states[:, : self.spec.n_sites]

    @property
    def momenta(self):
        return self.states[:, self.spec.n_sites :]


def _stiffness_op(spec, t):
    k, _ = profiles(spec, np.arange(spec.n_sites), t)
    mi = np.zeros_like(k)

    def apply(u):
        y = np.concatenate([u, np.zeros_like(u)])[:, None]
        return -_chain_rhs(y, k, mi, 1.0)[spec.n_sites :, 0]

    return apply


def _mass_inv_op(spec, t):
    _, m = profiles(spec, np.arange(spec.n_sites), t)
    return lambda p: p / m


def run(spec, phi0, t_end, cfg=DEFAULT_CONFIG, sample_stride=None, scheme="gl6",
        samples_per_period=8, guard=1e12, backend=None):
    """Integrate a full chain from ``phi0`` over ``[0, t_end]``.

    States are recorded every ``sample_stride`` steps, starting at 0 and
    ending at ``t_end``; the step count is rounded up to a multiple of the
    stride so the sampling is uniform. The default stride gives about
    ``samples_per_period`` samples per modulation period.

    Raises
    ------
    InstabilityError
        When the state norm exceeds ``guard`` times its initial value.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if scheme not in ("gl6", "euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    phi = np.array(phi0, dtype=float)
    total = cfg.steps_for(t_end, spec.char_time())
    if sample_stride is None:
        # whole number of samples over t_end, each spanning equal steps
        interval = spec.period / samples_per_period if math.isfinite(spec.period) else spec.char_time()
        n_samples = max(1, math.ceil(t_end / interval - 1e-9))
        sample_stride = math.ceil(total / n_samples)
    sample_stride = int(sample_stride)
    if sample_stride < 1:
        raise ValueError("sample_stride must be at least 1")
    total = math.ceil(total / sample_stride) * sample_stride
    h = t_end / total
    norm0 = np.linalg.norm(phi)
    times, states = [0.0], [phi.copy()]
    step = 0
    while step < total:
        n = min(sample_stride, total - step)
        t0 = step * h
        if scheme == "gl6":
            phi = propagate(spec, phi, t0, t0 + n * h, cfg, steps=n, backend=backend)
        else:
            for i in range(n):
                t = t0 + i * h
                phi = symplectic_euler_step(phi, t, h, lambda s: _mass_inv_op(spec, s), lambda s: _stiffness_op(spec, s))
        step += n
        times.append(step * h)
        states.append(phi.copy())
        if norm0 > 0 and not np.linalg.norm(phi) <= guard * norm0:
            raise InstabilityError(
                f"field norm exceeded {guard:.0e} x its initial value at t={step * h:.6g}"
            )
    return Trajectory(spec, np.array(times), np.array(states), scheme, cfg)


def energy_density(spec, t, state):
    """Kinetic plus spring energy per site; each spring is split evenly."""
    n = spec.n_sites
    u, p = state[:n], state[n:]
    k, m = profiles(spec, np.arange(n), t)
    spring = 0.5 * k * (np.roll(u, -1) - u) ** 2
    return p**2 / (2 * m) + 0.5 * (spring + np.roll(spring, 1))


def intensity_field(traj, energy=False):
    """``|u_n(t)|`` (or energy density) on a (times x sites) grid."""
    if energy:
        return np.array([energy_density(traj.spec, t, s) for t, s in zip(traj.times, traj.states)])
    return np.abs(traj.displacements)


def total_energy(traj):
    return intensity_field(traj, energy=True).sum(axis=1)


def _wrap_index(traj, source, fraction):
    # first sample where energy near the antipode of the source exceeds
    # `fraction` of the total
    n = traj.spec.n_sites
    dens = intensity_field(traj, energy=True)
    dist = np.abs((np.arange(n) - source + n / 2) % n - n / 2)
    far = dist >= n / 2 - max(2, n // 16)
    share = dens[:, far].sum(axis=1) / np.maximum(dens.sum(axis=1), np.finfo(float).tiny)
    hit = np.flatnonzero(share > fraction)
    return (int(hit[0]) if hit.size else len(traj.times)), dens


def center_of_energy(traj, source=None, dens=None):
    """Unwrapped center of energy over time, tracked by nearest image."""
    n = traj.spec.n_sites
    if dens is None:
        dens = intensity_field(traj, energy=True)
    sites = np.arange(n)
    if source is None:
        source = float(np.argmax(dens[0]))
    path = []
    prev = float(source)
    for row in dens:
        rel = (sites - prev + n / 2) % n - n / 2
        prev = prev + float(rel @ row / row.sum())
        path.append(prev)
    return np.array(path)


def directionality_metrics(traj, source=None, wrap_fraction=1e-3, min_samples=3):
    """Center-of-energy velocity and right/left energy ratio.

    Only samples before energy reaches the far side of the ring are used.
    Meaningful for localized initial conditions.
    """
    n = traj.spec.n_sites
    cut, dens = _wrap_index(traj, source if source is not None else int(np.argmax(intensity_field(traj, True)[0])), wrap_fraction)
    if source is None:
        source = int(np.argmax(dens[0]))
    if cut < min_samples:
        raise WraparoundError(
            f"energy wrapped around after {cut} samples; use a longer chain or a shorter run"
        )
    path = center_of_energy(traj, source, dens[:cut])
    times = traj.times[:cut]
    velocity = float(np.polyfit(times, path, 1)[0])
    last = dens[cut - 1]
    rel = (np.arange(n) - source + n / 2) % n - n / 2
    right = float(last[rel > 0].sum())
    left = float(last[rel < 0].sum())
    ratio = right / left if left > 0 else math.inf
    return {
        "center_of_energy_velocity": velocity,
        "right_left_energy_ratio": ratio,
        "samples_used": int(cut),
    }


def _boxcar(rows, width):
    # centered periodic moving average along the site axis
    width = int(width)
    n = rows.shape[1]
    kernel = np.zeros(n)
    kernel[:width] = 1.0 / width
    out = np.fft.irfft(np.fft.rfft(rows, axis=1) * np.fft.rfft(kernel), n=n, axis=1)
    return np.roll(out, -(width // 2), axis=1)


def smoothed_energy(traj, width):
    """Energy density averaged over a periodic window of ``width`` sites."""
    return _boxcar(intensity_field(traj, energy=True), width)


def _separated_peaks(x, r, n_rays, dip, min_height):
    peaks = np.flatnonzero((r[1:-1] > r[:-2]) & (r[1:-1] >= r[2:])) + 1
    peaks = peaks[r[peaks] >= min_height * r.max()]
    peaks = peaks[np.argsort(r[peaks])[::-1]]
    chosen = []
    for p in peaks:
        ok = True
        for c in chosen:
            lo, hi = sorted((p, c))
            if r[lo:hi + 1].min() > dip * min(r[p], r[c]):
                ok = False
                break
        if ok:
            chosen.append(p)
        if len(chosen) == n_rays:
            break
    if len(chosen) < n_rays:
        return None
    out = []
    for p in sorted(chosen):
        # parabolic refinement of the peak position
        a, b, c = r[p - 1], r[p], r[p + 1]
        den = a - 2 * b + c
        out.append(x[p] + (0.5 * (a - c) / den if den else 0.0))
    return out


def ray_slopes(traj, n_rays=2, width=None, start=0.0, source=None, field="displacement", dip=0.5,
               min_height=0.1):
    """Velocities of the strongest pulses, by peak tracking.

    The field (``|u|`` or energy density) is averaged over ``width`` sites
    (default one cell). At every sample after ``start`` where the
    ``n_rays`` highest peaks are separated by dips below ``dip`` times the
    smaller peak and reach ``min_height`` of the largest, their positions (unwrapped relative to ``source``) are
    recorded in order; each order slot is fitted by least squares.

    Returns
    -------
    list of float
        Velocities from the rearmost pulse to the foremost.
    """
    n = traj.spec.n_sites
    width = width or traj.spec.z
    rows = intensity_field(traj, energy=(field == "energy"))
    env = _boxcar(rows, width)
    if source is None:
        source = int(np.argmax(env[0]))
    rel = (np.arange(n) - source + n / 2) % n - n / 2
    order = np.argsort(rel, kind="stable")
    x = rel[order] + source
    tracks, times = [], []
    for t, row in zip(traj.times, env):
        if t < start:
            continue
        found = _separated_peaks(x, row[order], n_rays, dip, min_height)
        if found is not None:
            tracks.append(found)
            times.append(t)
    if len(times) < 3:
        raise ValueError("too few samples with separated rays; run longer")
    tracks = np.array(tracks)
    return [float(np.polyfit(times, tracks[:, i], 1)[0]) for i in range(n_rays)]


def period_norms(spec, phi0, periods, cfg=DEFAULT_CONFIG, backend=None):
    """``||phi(k T)||`` for ``k = 0..periods`` on the full chain."""
    if not math.isfinite(spec.period):
        raise ModelError("period sampling needs a moving modulation")
    steps = cfg.steps_for(spec.period, spec.char_time())
    phi = np.array(phi0, dtype=float)
    norms = [float(np.linalg.norm(phi))]
    for k in range(periods):
        phi = propagate(spec, phi, k * spec.period, (k + 1) * spec.period, cfg, steps=steps, backend=backend)
        norms.append(float(np.linalg.norm(phi)))
        if not math.isfinite(norms[-1]):
            raise InstabilityError(f"field overflowed after {k + 1} periods")
    return np.array(norms)


def growth_classification(norms, period, bound=10.0, tail=0.5):
    """Bounded/growing verdict and log-growth rate from period norms.

    The rate is the least-squares slope of ``log ||phi||`` over the last
    ``tail`` fraction of the samples, per unit time.
    """
    norms = np.asarray(norms, dtype=float)
    ratio = norms / norms[0]
    start = int(len(norms) * (1 - tail))
    k = np.arange(start, len(norms))
    rate = float(np.polyfit(k * period, np.log(norms[start:]), 1)[0])
    return {"bounded": bool(ratio.max() <= bound), "max_ratio": float(ratio.max()), "growth_rate": rate}
