"""Long-wavelength analysis of a progressively modulated continuum.

The medium has tension ``k(x)`` and density ``rho(x)``, both ``L``-periodic,
with the pattern travelling at speed ``c``. In the co-moving description its
eigenmodes are those of a static medium with

    kbar = k (s^2 - c^2) / s^2,     rhobar = rho s^2 / (s^2 - c^2)

where ``s = sqrt(k / rho)``. Frequencies and wavenumbers then follow from an
affine shear of the static diagram.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.interpolate
import scipy.optimize

from .chain import ChainSpec, ModelError
from .integrators import GL6

QUAD_RTOL = 1e-10
_CHECK_POINTS = 4096


class SonicLineError(ModelError):
    """Modulation speed equals the local sound speed somewhere in the cell."""


class DegenerateError(ArithmeticError):
    """A group-velocity denominator vanishes for these parameters."""


class NoRootError(ValueError):
    """No sign change of the critical-speed function below the sonic line."""


@dataclass(frozen=True)
class ContinuumProfile:
    """Periodic tension and density, sinusoidal or sampled.

    Sinusoid: ``k = k0 + dk cos(2 pi x / L)`` and likewise for ``rho``.
    Sampled: ``samples`` rows ``(x, k, rho)`` with ``0 <= x < L``,
    interpolated by a periodic cubic spline.
    """

    length: float = 1.0
    k0: float = 1.0
    dk: float = 0.0
    rho0: float = 1.0
    drho: float = 0.0
    c: float = 0.0
    samples: tuple = None
    _splines: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length > 0):
            raise ModelError("period length must be positive")
        if not math.isfinite(self.c):
            raise ModelError("modulation speed must be finite")
        if self.samples is not None:
            data = np.asarray(self.samples, dtype=float)
            if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] < 4:
                raise ModelError("samples must be at least 4 rows of (x, k, rho)")
            x = data[:, 0]
            if np.any(np.diff(x) <= 0) or x[0] < 0 or x[-1] >= self.length:
                raise ModelError("sample positions must increase within [0, L)")
            if not np.all(np.isfinite(data)):
                raise ModelError("samples must be finite")
            object.__setattr__(self, "samples", tuple(map(tuple, data)))
            xs = np.append(x, x[0] + self.length)
            splines = tuple(
                scipy.interpolate.CubicSpline(xs, np.append(col, col[0]), bc_type="periodic")
                for col in (data[:, 1], data[:, 2])
            )
            object.__setattr__(self, "_splines", splines)
        else:
            for name in ("k0", "dk", "rho0", "drho"):
                if not math.isfinite(getattr(self, name)):
                    raise ModelError(f"{name} must be finite")
        grid = self.check_grid()
        if np.min(self.k(grid)) <= 0 or np.min(self.rho(grid)) <= 0:
            raise ModelError("tension and density must stay positive")
        gap = np.min(np.abs(self.s(grid) - abs(self.c)))
        if gap <= 1e-12 * max(1.0, abs(self.c)) or self._crosses_sonic(grid):
            raise SonicLineError(
                f"modulation speed |c| = {abs(self.c)} meets the local sound speed; "
                "change of variables not one-to-one"
            )

    def _crosses_sonic(self, grid):
        d = self.s(grid) - abs(self.c)
        return bool(np.any(np.sign(d) != np.sign(d[0])))

    def check_grid(self):
        grid = np.linspace(0.0, self.length, _CHECK_POINTS, endpoint=False)
        if self.samples is not None:
            grid = np.union1d(grid, np.asarray(self.samples)[:, 0])
        return grid

    def _phase(self, x):
        return 2 * math.pi * np.asarray(x, dtype=float) / self.length

    def k(self, x):
        if self._splines is not None:
            return self._splines[0](np.mod(x, self.length))
        return self.k0 + self.dk * np.cos(self._phase(x))

    def rho(self, x):
        if self._splines is not None:
            return self._splines[1](np.mod(x, self.length))
        return self.rho0 + self.drho * np.cos(self._phase(x))

    def s(self, x):
        return np.sqrt(self.k(x) / self.rho(x))

    def impedance(self, x):
        return np.sqrt(self.k(x) * self.rho(x))

    def min_sound_speed(self):
        return float(np.min(self.s(self.check_grid())))

    @property
    def sinusoid(self):
        return self.samples is None

    def with_speed(self, c):
        data = self.to_dict()
        data["c"] = c
        return ContinuumProfile.from_dict(data)

    def to_dict(self):
        if self.samples is not None:
            return {"L": self.length, "c": self.c, "samples": [list(r) for r in self.samples]}
        return {"L": self.length, "k0": self.k0, "dk": self.dk, "rho0": self.rho0, "drho": self.drho, "c": self.c}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {"L", "c", "samples", "k0", "dk", "rho0", "drho", "m0", "dm"}
        unknown = set(data) - known
        if unknown:
            raise ModelError(f"unknown profile fields: {sorted(unknown)}")
        # chain-style aliases for density
        if "m0" in data:
            data.setdefault("rho0", data.pop("m0"))
        if "dm" in data:
            data.setdefault("drho", data.pop("dm"))
        kwargs = {"length": data.pop("L", 1.0), "c": data.pop("c", 0.0)}
        if "samples" in data:
            if set(data) - {"samples"}:
                raise ModelError("a sampled profile takes no sinusoid fields")
            kwargs["samples"] = data["samples"]
        else:
            kwargs.update(data)
        return cls(**kwargs)


def cell_average(profile, f):
    """Mean of ``f(x)`` over one period by adaptive quadrature.

    Raises
    ------
    ArithmeticError
        When the integrand is singular or the tolerance cannot be met.
    """
    length = profile.length

    def part(fn):
        # absolute floor relative to the integrand size, so zero-mean
        # integrands terminate
        probe = np.abs([fn(x) for x in np.linspace(0.0, length, 33)])
        floor = QUAD_RTOL * length * float(np.max(probe)) if np.all(np.isfinite(probe)) else 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.integrate.IntegrationWarning)
            try:
                val, _ = scipy.integrate.quad(fn, 0.0, length, epsabs=floor, epsrel=QUAD_RTOL, limit=500)
            except (scipy.integrate.IntegrationWarning, ZeroDivisionError) as exc:
                raise ArithmeticError(f"cell average failed: integrand singular or too rough ({exc})") from exc
        if not math.isfinite(val):
            raise ArithmeticError("cell average failed: non-finite integrand")
        return val / length

    probe = f(0.0)
    if np.iscomplexobj(probe):
        return complex(part(lambda x: np.real(f(x))), part(lambda x: np.imag(f(x))))
    return part(lambda x: float(f(x)))


def _mean(profile, g):
    # average of g(k, rho, s, x)
    return cell_average(profile, lambda x: g(profile.k(x), profile.rho(x), profile.s(x), x))


@dataclass(frozen=True)
class FictitiousMedium:
    profile: ContinuumProfile
    has_negative: bool

    def kbar(self, x):
        s2 = self.profile.s(x) ** 2
        return self.profile.k(x) * (s2 - self.profile.c**2) / s2

    def rhobar(self, x):
        s2 = self.profile.s(x) ** 2
        return self.profile.rho(x) * s2 / (s2 - self.profile.c**2)

    def sbar(self, x):
        """Reduced sound speed ``s - c^2 / s`` (signed where negative)."""
        s = self.profile.s(x)
        return s - self.profile.c**2 / s

    def impedance(self, x):
        return self.profile.impedance(x)


def fictitious(profile):
    """Static medium whose modes map one to one onto the modulated ones.

    ``has_negative`` reports whether the modulation outruns sound somewhere,
    which makes both ``kbar`` and ``rhobar`` negative there.
    """
    grid = profile.check_grid()
    return FictitiousMedium(profile, bool(np.any(profile.s(grid) < abs(profile.c))))


def _shear_averages(profile):
    c = profile.c
    if c == 0:
        return 0.0, 0.0
    a2 = _mean(profile, lambda k, r, s, x: c**2 / (s**2 - c**2))
    a1 = _mean(profile, lambda k, r, s, x: c / (s**2 - c**2))
    return a2, a1


def shear_map(profile, Omega, Q):
    """``(omega, q)`` of the modulated mode matching fictitious ``(Omega, Q)``.

    ``Omega`` may be complex.
    """
    a2, a1 = _shear_averages(profile)
    return Omega * (1 + a2) + profile.c * Q, Q + Omega * a1


def _spatial_matrix(medium, x):
    # d/dx [V, Sigma] = Omega * B(x) [V, Sigma]
    b = np.zeros((len(x), 2, 2), dtype=complex)
    b[:, 0, 1] = -1j / medium.kbar(x)
    b[:, 1, 0] = -1j * medium.rhobar(x)
    return b


def _matricant(medium, omegas, steps, tab=GL6):
    # batched Gauss-Legendre propagation over one period; the stage system
    # is linear and solved exactly
    omegas = np.asarray(omegas, dtype=complex)
    n = omegas.size
    s = tab.stages
    length = medium.profile.length
    h = length / steps
    phi = np.broadcast_to(np.eye(2, dtype=complex), (n, 2, 2)).copy()
    eye = np.eye(2 * s)
    for i in range(steps):
        xs = i * h + tab.c * h
        b = _spatial_matrix(medium, xs)
        a = omegas[:, None, None, None] * b[None]
        # K_i = A_i (phi + h sum_j a_ij K_j)
        big = np.zeros((n, 2 * s, 2 * s), dtype=complex)
        rhs = np.zeros((n, 2 * s, 2), dtype=complex)
        for r in range(s):
            rhs[:, 2 * r : 2 * r + 2] = a[:, r] @ phi
            for col in range(s):
                big[:, 2 * r : 2 * r + 2, 2 * col : 2 * col + 2] = -h * tab.a[r, col] * a[:, r]
        k = np.linalg.solve(eye + big, rhs)
        phi = phi + h * sum(tab.b[r] * k[:, 2 * r : 2 * r + 2] for r in range(s))
    return phi


@dataclass(frozen=True)
class FictitiousBands:
    points: list
    evanescent: list
    det_deviation: float


def _default_steps(medium, omegas):
    grid = medium.profile.check_grid()
    scale = np.max(np.abs(np.concatenate([1.0 / medium.kbar(grid), medium.rhobar(grid)])))
    wmax = float(np.max(np.abs(omegas))) if len(omegas) else 0.0
    return max(256, math.ceil(8 * wmax * scale * medium.profile.length))


def fictitious_bands(medium, omegas, steps=None, tol=1e-8):
    """Real wavenumbers ``Q`` of the fictitious medium at each frequency.

    The spatial ODE is integrated across one period; the matricant's
    eigenvalues are ``exp(i Q L)``. Frequencies whose eigenvalues leave the
    unit circle (stop bands) are listed in ``evanescent``.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if steps is None:
        steps = _default_steps(medium, omegas)
    mats = _matricant(medium, omegas, steps)
    length = medium.profile.length
    dets = np.linalg.det(mats)
    points, evanescent = [], []
    zone = math.pi / length
    for w, mat in zip(omegas, mats):
        mu = np.linalg.eigvals(mat)
        if np.all(np.abs(np.abs(mu) - 1.0) <= tol):
            for m in mu:
                q = math.atan2(m.imag, m.real) / length
                q = (q + zone) % (2 * zone) - zone
                points.append((float(w), float(q)))
        else:
            evanescent.append(float(w))
    dev = float(np.max(np.abs(dets - 1.0))) if len(dets) else 0.0
    return FictitiousBands(sorted(points), evanescent, dev)


def _sg_fictitious(profile):
    med = fictitious(profile)
    prod = cell_average(profile, med.rhobar) * cell_average(profile, lambda x: 1.0 / med.kbar(x))
    if not prod > 0:
        raise ModelError("the fictitious medium has no acoustic branch (mixed-sign coefficients)")
    return 1.0 / math.sqrt(prod)


def acoustic_speed(profile):
    """Long-wavelength speed ``s_g`` of the fictitious medium."""
    return _sg_fictitious(profile)


def group_velocities(profile):
    """Acoustic group velocities ``(s_plus, s_minus)`` of the modulated medium."""
    sg = _sg_fictitious(profile)
    c = profile.c
    num = _mean(profile, lambda k, r, s, x: s**2 / (s**2 - c**2))
    den = _mean(profile, lambda k, r, s, x: c / (s**2 - c**2)) if c else 0.0
    out = []
    for sign in (1.0, -1.0):
        d = 1 + sign * sg * den
        if abs(d) < 1e-12:
            raise DegenerateError(f"group velocity denominator vanishes (1 {'+' if sign > 0 else '-'} s_g <c/(s^2-c^2)> = 0)")
        out.append((c + sign * sg * num) / d)
    return tuple(out)


def bias_leading_order(profile):
    """``(s_g0, coefficient)`` with ``s_pm ~ +-s_g0 + coefficient * c``.

    The coefficient is ``-cov(rho, 1/k) s_g0^2``.
    """
    mrho = _mean(profile, lambda k, r, s, x: r)
    minvk = _mean(profile, lambda k, r, s, x: 1.0 / k)
    cov = _mean(profile, lambda k, r, s, x: (r - mrho) * (1.0 / k - minvk))
    sg2 = 1.0 / (mrho * minvk)
    return math.sqrt(sg2), -cov * sg2


def _critical_terms(profile, c):
    # integrand of (<s^2/(s^2-c^2)>, <z s/(s^2-c^2)>, <s/(z (s^2-c^2))>) for
    # an array of speeds c
    c = np.asarray(c, dtype=float)

    def f(x):
        k, r = profile.k(x), profile.rho(x)
        s2 = k / r
        s = math.sqrt(s2)
        z = r * s
        d = s2 - c**2
        return np.stack([s2 / d, z * s / d, s / (z * d)])

    return f


def critical_speed_function(profile, c):
    """``<s^2/(s^2-c^2)>^2 - c^2 <z s/(s^2-c^2)> <s/(z (s^2-c^2))>``.

    ``c`` may be an array; the sonic precondition is the caller's concern.
    """
    vals, _ = scipy.integrate.quad_vec(
        _critical_terms(profile, c), 0.0, profile.length, epsabs=0.0, epsrel=QUAD_RTOL
    )
    a, b, d = vals / profile.length
    out = a * a - np.asarray(c) ** 2 * b * d
    return float(out) if np.ndim(out) == 0 else out


def critical_speed(profile, scan=256, xtol=1e-12, rtol=1e-10):
    """Smallest modulation speed at which both acoustic velocities share a sign.

    Scans ``F(c)`` on ``scan`` points of ``(0, min s)`` and refines the first
    sign change with Brent's method.

    Raises
    ------
    NoRootError
        When ``F`` keeps its sign below the sonic line.
    """
    top = profile.min_sound_speed()
    cs = top * np.arange(1, scan) / scan
    fs = critical_speed_function(profile, cs)
    flips = np.flatnonzero(np.sign(fs) != 1.0)
    if not flips.size:
        raise NoRootError("no sign flip below sonic line")
    i = flips[0]
    lo = cs[i - 1] if i else 0.0
    if fs[i] == 0.0:
        return float(cs[i])
    fn = lambda c: critical_speed_function(profile, c)
    return float(scipy.optimize.brentq(fn, lo, cs[i], xtol=xtol, rtol=rtol))


@dataclass(frozen=True)
class WillisCoefficients:
    """Invariants of ``omega^2 - 2 w omega q + p q^2 = 0``.

    With the effective equation ``k_e u_xx + 2 W u_xt - rho_e u_tt = 0`` the
    normalized coupling is ``W / rho_e = -mean_velocity`` and
    ``k_e / rho_e = -velocity_product``.
    """

    mean_velocity: float
    velocity_product: float

    @property
    def coupling_ratio(self):
        return -self.mean_velocity

    @property
    def stiffness_ratio(self):
        return -self.velocity_product

    def velocities(self):
        disc = math.sqrt(max(self.mean_velocity**2 - self.velocity_product, 0.0))
        return self.mean_velocity + disc, self.mean_velocity - disc


def willis_coefficients(profile):
    sp, sm = group_velocities(profile)
    return WillisCoefficients((sp + sm) / 2, sp * sm)


@dataclass
class FictitiousMode:
    """A Bloch mode ``(V, Sigma)`` of the fictitious medium."""

    omega: complex
    wavenumber: float
    multiplier: complex
    initial: np.ndarray
    solution: object = field(repr=False)

    def __call__(self, x):
        """``(V, Sigma, phase integral)`` at ``x``, continued by the Bloch factor."""
        length = self.solution.t_max
        x = np.asarray(x, dtype=float)
        cell = np.floor(x / length)
        y = self.solution(x - cell * length)
        scale = self.multiplier ** cell
        # the phase integral grows by its full-cell value per period
        phase = y[2] + cell * self.solution(length)[2]
        return y[0] * scale, y[1] * scale, phase.real


def _mode_rhs(profile, medium, omega):
    c = profile.c

    def rhs(x, y):
        s2 = profile.s(x) ** 2
        return np.array([
            -1j * omega * y[1] / medium.kbar(x),
            -1j * omega * medium.rhobar(x) * y[0],
            c / (s2 - c**2),
        ])

    return rhs


def fictitious_mode(profile, omega, branch=0, rtol=1e-12, atol=1e-14):
    """Bloch eigenmode of the fictitious medium at frequency ``omega``.

    ``branch`` picks one of the two matricant eigenvectors (sorted by
    wavenumber). The third solution component is ``int_0^x c/(s^2-c^2)``.
    """
    medium = fictitious(profile)
    length = profile.length
    rhs = _mode_rhs(profile, medium, omega)
    cols = []
    for e in np.eye(2):
        sol = scipy.integrate.solve_ivp(rhs, (0, length), np.append(e, 0).astype(complex),
                                        method="DOP853", rtol=rtol, atol=atol)
        cols.append(sol.y[:2, -1])
    mat = np.array(cols).T
    mu, vecs = np.linalg.eig(mat)
    qs = np.angle(mu) / length
    order = np.argsort(qs)
    i = order[branch]
    y0 = vecs[:, i]
    sol = scipy.integrate.solve_ivp(rhs, (0, length), np.append(y0, 0).astype(complex),
                                    method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    return FictitiousMode(complex(omega), float(qs[i]), complex(mu[i]), y0, sol.sol)


def map_mode(profile, mode):
    """Sampler of the modulated-medium mode built from a fictitious mode.

    Returns ``sample(x, t) -> (v, sigma)``: particle velocity and stress
    ``sigma = k u'`` at positions ``x`` and time ``t``.
    """
    c = profile.c
    omega = mode.omega

    def sample(x, t=0.0):
        xt = np.asarray(x, dtype=float) - c * t
        big_v, big_s, phase = mode(xt)
        s2 = profile.s(xt) ** 2
        factor = s2 / (s2 - c**2)
        expo = np.exp(-1j * omega * (t - phase))
        v = (big_v - c * big_s / profile.k(xt)) * factor * expo
        sigma = (big_s - c * profile.rho(xt) * big_v) * factor * expo
        return v, sigma

    return sample


def mode_residual(profile, sampler, omega, x, t=0.0, h=1e-3):
    """Relative residual of the modulated first-order system at ``(x, t)``.

    Checks ``v' + c (sigma/k)' = -i omega sigma/k`` and
    ``sigma' + c (rho v)' = -i omega rho v`` (spatial parts, time factor
    removed) with fourth-order central differences of step ``h``.
    """
    c = profile.c
    x = np.asarray(x, dtype=float)
    offsets = (-2, -1, 1, 2)
    weights = (1 / 12, -2 / 3, 2 / 3, -1 / 12)
    v0, s0 = sampler(x, t)
    xt = x - c * t
    k0, r0 = profile.k(xt), profile.rho(xt)
    dv = ds = dsk = drv = 0.0
    for o, wgt in zip(offsets, weights):
        v, sig = sampler(x + o * h, t)
        k, r = profile.k(xt + o * h), profile.rho(xt + o * h)
        dv = dv + wgt * v / h
        ds = ds + wgt * sig / h
        dsk = dsk + wgt * sig / k / h
        drv = drv + wgt * r * v / h
    r1 = dv + c * dsk + 1j * omega * s0 / k0
    r2 = ds + c * drv + 1j * omega * r0 * v0
    scale = max(np.max(np.abs(v0)), np.max(np.abs(s0)), 1e-300)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))) / scale)


def chain_from_profile(profile, z, cells):
    """Discrete chain sampling a sinusoid profile at ``z`` sites per period.

    Site spacing is ``a = L / z``; masses are ``rho a`` and spring constants
    ``k / a``, both read at the site positions.
    """
    if not profile.sinusoid:
        raise ModelError("only sinusoid profiles map onto the chain model")
    a = profile.length / z
    return ChainSpec(
        z=z, cells=cells,
        k0=profile.k0 / a, dk=profile.dk / a,
        m0=profile.rho0 * a, dm=profile.drho * a,
        nu=2 * math.pi * profile.c / profile.length,
    )
