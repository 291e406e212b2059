"""Floquet-Bloch dispersion diagrams without frequency ambiguity.

Each eigenvector of the shifted reduced cell monodromy ``S^H m`` is a wave
that repeats, up to the multiplier ``lambda``, one site further along after
every ``tau``. Its frequency is fixed by ``exp(-i omega tau) = lambda e^{-iq}``
on the principal branch. The site-0 trace, demodulated by ``exp(i omega t)``,
is ``T``-periodic; its Fourier index ``j`` places each component at
``(q + j nu tau, omega + j nu)`` in the diagram.
"""

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .chain import ModelError, profiles, stiffness_matrix
from .integrators import DEFAULT_CONFIG
from .monodromy import cell_shifted_reduced
from .parallel import worker_count

DEFAULT_SAMPLES = 64


@dataclass
class FloquetMode:
    q: float
    bloch: complex
    multiplier: complex
    omega: float
    growth_rate: float
    phi0: np.ndarray = field(repr=False)
    index: int = 0
    js: np.ndarray = field(default=None, repr=False)
    amplitudes: np.ndarray = field(default=None, repr=False)
    captured: float = float("nan")
    site: int = 0

    @property
    def weights(self):
        return np.abs(self.amplitudes) ** 2

    def relation_residual(self, tau):
        lhs = cmath.exp(-1j * complex(self.omega, self.growth_rate) * tau)
        return abs(lhs - self.multiplier * cmath.exp(-1j * self.q))


@dataclass(frozen=True)
class DispersionPoint:
    q: float
    omega: float
    weight: float
    branch: int


def fold(q):
    """Wrap wavenumbers into ``[-pi, pi)``."""
    return (np.asarray(q) + math.pi) % (2 * math.pi) - math.pi


def bloch_set(spec):
    """``(l, q, Q)`` for the ``cells`` admissible Bloch factors."""
    out = []
    for l in range(spec.cells):
        q = 2 * math.pi * l / spec.n_sites
        out.append((l, q, cmath.exp(1j * q * spec.z)))
    return out


def _complex_frequency(multiplier, q, tau):
    # exp(-i w tau) = lambda e^{-iq} with the principal logarithm; the
    # imaginary part of w is the growth rate per unit time
    return 1j * cmath.log(multiplier * cmath.exp(-1j * q)) / tau


def modes_at(spec, bloch, cfg=DEFAULT_CONFIG, samples_per_tau=DEFAULT_SAMPLES, q=None, backend=None):
    """The ``2 z`` Floquet modes of one unit cell at Bloch factor ``bloch``.

    The cell propagator is sampled ``samples_per_tau`` times over ``[0, tau]``
    so that :func:`extend_and_decompose` needs no further integration.
    """
    if q is None:
        q = (cmath.phase(bloch) % (2 * math.pi)) / spec.z
    res = cell_shifted_reduced(spec, bloch, cfg, samples=samples_per_tau, backend=backend)
    modes = []
    for i, lam in enumerate(res.multipliers):
        w = _complex_frequency(lam, q, spec.tau)
        mode = FloquetMode(
            q=q,
            bloch=complex(bloch),
            multiplier=complex(lam),
            omega=w.real,
            growth_rate=w.imag,
            phi0=res.vectors[:, i],
            index=i,
        )
        mode._samples = res.samples
        modes.append(mode)
    return modes


def _site_traces(spec, mode, samples):
    # u_n(t_i) for all sites n over [0, tau): shape (samples, z)
    return samples[:, : spec.z, :] @ mode.phi0


def extend_and_decompose(spec, mode, cfg=DEFAULT_CONFIG, samples_per_tau=DEFAULT_SAMPLES, window=None):
    """Fourier amplitudes of the demodulated site trace over one period.

    Fills ``mode.js``, ``mode.amplitudes`` (unit total weight over the
    window) and ``mode.captured`` (window share of the trace energy).
    """
    z = spec.z
    samples = getattr(mode, "_samples", None)
    if samples is None or samples.shape[0] != samples_per_tau:
        from .monodromy import cell_fundamental

        _, samples = cell_fundamental(spec, mode.bloch, cfg, samples_per_tau)
    total = z * samples_per_tau
    if window is None:
        window = min(8 * z, total // 2 - 1)
    if window > total // 2 - 1:
        raise ValueError(
            f"Fourier window {window} exceeds the Nyquist limit {total // 2 - 1}; "
            "raise samples_per_tau"
        )
    traces = _site_traces(spec, mode, samples)
    norm = np.linalg.norm(mode.phi0)
    site = 0
    if np.max(np.abs(traces[:, 0])) < 1e-8 * norm:
        site = int(np.argmax(np.max(np.abs(traces), axis=0)))
    lam = mode.multiplier
    qc = np.conj(mode.bloch)
    pieces = []
    for k in range(z):
        idx = site - k
        factor = lam**k * (qc if idx < 0 else 1.0)
        pieces.append(factor * traces[:, idx % z])
    u = np.concatenate(pieces)
    t = np.arange(total) * (spec.tau / samples_per_tau)
    w = complex(mode.omega, mode.growth_rate)
    demod = u * np.exp(1j * w * t) * np.exp(-1j * mode.q * site)
    coeffs = np.fft.ifft(demod)
    js = np.arange(-window, window + 1)
    amps = coeffs[js % total]
    energy = float(np.sum(np.abs(coeffs) ** 2))
    kept = float(np.sum(np.abs(amps) ** 2))
    mode.js = js
    mode.amplitudes = amps / math.sqrt(kept) if kept > 0 else amps
    mode.captured = kept / energy if energy > 0 else 1.0
    mode.site = site
    return js, mode.amplitudes


def mode_points(spec, mode, weight_threshold=1e-3, branch=0):
    """Diagram points of one decomposed mode, weights relative to its peak."""
    wts = mode.weights
    keep = wts >= weight_threshold * wts.max()
    nu_tau = spec.nu * spec.tau
    qs = fold(mode.q + mode.js[keep] * nu_tau)
    ws = mode.omega + mode.js[keep] * spec.nu
    return [DispersionPoint(float(a), float(b), float(c), branch) for a, b, c in zip(qs, ws, wts[keep])]


def _points_for_bloch(spec, l, q, bloch, cfg, weight_threshold, samples_per_tau, window):
    pts = []
    modes = modes_at(spec, bloch, cfg, samples_per_tau, q=q)
    for mode in modes:
        extend_and_decompose(spec, mode, cfg, samples_per_tau, window)
        pts.extend(mode_points(spec, mode, weight_threshold, branch=l * 2 * spec.z + mode.index))
    return pts


def diagram(spec, cfg=DEFAULT_CONFIG, weight_threshold=1e-3, samples_per_tau=DEFAULT_SAMPLES, window=None):
    """Weighted dispersion points over every admissible Bloch factor.

    A chain with ``nu == 0`` is static and handled by :func:`static_diagram`.
    """
    if spec.nu == 0:
        return static_diagram(spec, weight_threshold)
    if spec.nu < 0:
        raise ModelError("dispersion diagrams need nu > 0")
    jobs = bloch_set(spec)
    args = (cfg, weight_threshold, samples_per_tau, window)
    workers = worker_count(len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(lambda job: _points_for_bloch(spec, *job, *args), jobs))
    else:
        chunks = [_points_for_bloch(spec, *job, *args) for job in jobs]
    points = [p for chunk in chunks for p in chunk]
    points.sort(key=lambda p: (p.q, p.omega, p.branch))
    return points


def static_diagram(spec, weight_threshold=1e-3):
    """Diagram of a chain whose periodic pattern does not move.

    Solves ``K(Q) v = omega^2 M v`` per Bloch factor; the in-cell Fourier
    content of ``v_n e^{-iqn}`` spreads each mode over wavenumbers
    ``q + 2 pi l / z``.
    """
    z = spec.z
    points = []
    for l, q, bloch in bloch_set(spec):
        kmat = stiffness_matrix(spec, 0.0, bloch)
        _, m = profiles(spec, np.arange(z), 0.0)
        w2, vecs = scipy.linalg.eigh(kmat, np.diag(m))
        omegas = np.sqrt(np.clip(w2, 0.0, None))
        for i in range(z):
            demod = vecs[:, i] * np.exp(-1j * q * np.arange(z))
            c = np.fft.fft(demod) / z
            wts = np.abs(c) ** 2
            wts /= wts.sum()
            keep = np.flatnonzero(wts >= weight_threshold * wts.max())
            for sign, offset in ((1.0, 0), (-1.0, z)):
                for j in keep:
                    points.append(
                        DispersionPoint(
                            float(fold(q + 2 * math.pi * j / z)),
                            float(sign * omegas[i]),
                            float(wts[j]),
                            l * 2 * z + i + offset,
                        )
                    )
    points.sort(key=lambda p: (p.q, p.omega, p.branch))
    return points


def first_branch(points, dominant_only=True, decimals=9):
    """Lowest non-negative frequency per wavenumber.

    With ``dominant_only`` only the strongest component of each branch is
    considered, so weak sidebands do not masquerade as the lowest band.
    """
    pts = points
    if dominant_only:
        # components tied with the strongest (within 1e-6) all count, so an
        # even split between two wavenumbers does not pick one at random
        peak = {}
        for p in points:
            peak[p.branch] = max(peak.get(p.branch, 0.0), p.weight)
        pts = [p for p in points if p.weight >= (1 - 1e-6) * peak[p.branch]]
    low = {}
    for p in pts:
        if p.omega < 0:
            continue
        key = round(p.q, decimals)
        if key not in low or p.omega < low[key]:
            low[key] = p.omega
    return low


def asymmetry(points, decimals=9):
    """``max_q |omega_1(q) - omega_1(-q)|`` on the first branch."""
    low = first_branch(points, decimals=decimals)
    worst = 0.0
    for q, w in low.items():
        mirror = round(-q, decimals)
        if mirror in low:
            worst = max(worst, abs(w - low[mirror]))
    return worst
