"""End-to-end acceptance checks, one test per criterion.

Every test appends a ``PASS``/``FAIL`` line to ``RESULTS``; the lines are
printed in the terminal summary (see ``conftest.py``) whatever the outcome.
"""

import math
import time

import numpy as np
import pytest

from modwave import continuum as cont
from modwave import dispersion as disp
from modwave import mathieu as mth
from modwave import monodromy as mono
from modwave import simulate as sim
from modwave.chain import ChainSpec
from modwave.cli import FIG4_PROFILE, fig3_specs, fig4_run
from modwave.integrators import StepConfig, symplectic_euler_integrate

RESULTS = []


def record(number, title, ok, detail):
    RESULTS.append((number, f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}"))
    assert ok, detail


def random_spec(rng, zmax, cellmax):
    return ChainSpec(
        z=int(rng.integers(1, zmax + 1)),
        cells=int(rng.integers(1, cellmax + 1)),
        k0=float(rng.uniform(0.5, 2.0)),
        m0=float(rng.uniform(0.5, 2.0)),
        dk=float(rng.uniform(0.0, 0.4)),
        dm=float(rng.uniform(0.0, 0.4)),
        nu=float(rng.uniform(0.2, 2.0)),
    )


def test_mathieu_closed_form():
    start = time.perf_counter()
    errs = []
    for delta in (0.1, 0.25, 1.0, 2.25):
        tr = np.trace(mth.mathieu_monodromy(mth.MathieuParams(delta, 0.0)))
        errs.append(abs(tr - 2 * math.cos(2 * math.pi * math.sqrt(delta))))
    elapsed = time.perf_counter() - start
    ok = max(errs) <= 1e-6 and elapsed < 1.0
    record(1, "Mathieu closed form", ok, f"max error {max(errs):.2e} (<= 1e-6), {elapsed:.3f} s (< 1 s)")


def test_mathieu_chart():
    start = time.perf_counter()
    grid = mth.trace_grid((0, 8), (0, 6), 800, 80)
    elapsed = time.perf_counter() - start
    cell = grid.deltas[1] - grid.deltas[0]
    xs = np.array(mth.axis_crossings(grid))
    misses = [n for n in range(6) if xs.size == 0 or np.min(np.abs(xs - n * n / 4)) > cell]
    tongues = mth.count_tongues(grid)
    ok = not misses and tongues == 5 and elapsed < 300 and grid.failures == 0
    record(2, "Mathieu stability chart", ok,
           f"axis openings missed for n={misses}, {tongues} tongues (5), {grid.failures} failed cells, "
           f"{elapsed:.1f} s (< 300 s)")


def test_reduced_monodromy_symplectic():
    rng = np.random.default_rng(3)
    worst_sym, worst_det = 0.0, 0.0
    for _ in range(20):
        spec = random_spec(rng, 6, 3)
        res = mono.reduced_monodromy(spec)
        worst_sym = max(worst_sym, res.symplectic_deviation / np.linalg.norm(res.matrix))
        worst_det = max(worst_det, res.det_deviation)
    ok = worst_sym <= 1e-9 and worst_det <= 1e-9
    record(3, "Reduced monodromy symplectic", ok,
           f"max deviation/||m|| {worst_sym:.2e} (<= 1e-9), max |det-1| {worst_det:.2e} (<= 1e-9)")


def test_factorization():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(10):
        spec = random_spec(rng, 4, 3)
        direct = mono.fundamental(spec, spec.period)
        factored = mono.full_monodromy(spec).matrix
        worst = max(worst, np.linalg.norm(factored - direct) / np.linalg.norm(direct))
    spec = ChainSpec(z=8, cells=8, dk=0.3, dm=0.2, nu=0.5)
    t0 = time.perf_counter()
    mono.full_monodromy(spec)
    t1 = time.perf_counter()
    mono.full_monodromy(spec, direct=True)
    t2 = time.perf_counter()
    speedup = (t2 - t1) / (t1 - t0)
    ok = worst <= 1e-7 and speedup >= spec.z / 2
    record(4, "Monodromy factorization", ok,
           f"max relative mismatch {worst:.2e} (<= 1e-7), speedup {speedup:.1f}x (>= {spec.z / 2:g}x)")


def test_unmodulated_dispersion():
    spec = ChainSpec(z=4, cells=30, nu=0.4)
    pts = disp.diagram(spec)
    err = max(abs(abs(p.omega) - 2 * abs(math.sin(p.q / 2))) for p in pts)
    branches = {p.branch % (2 * spec.z) for p in pts}
    ok = err <= 1e-5 and len(branches) == 2 * spec.z
    record(5, "Unmodulated dispersion", ok,
           f"max |d omega| {err:.2e} (<= 1e-5), {len(branches) // 2} branch pairs (4) over {len(pts)} points")


def test_nonreciprocity_onset():
    tol = 1e-6
    modulated = dict(fig3_specs())["modulated"]
    asym = disp.asymmetry(disp.diagram(modulated))
    control = disp.asymmetry(disp.diagram(modulated.replace(dk=0.0, dm=0.0)))
    ok = asym > 10 * tol and control < tol
    record(6, "Non-reciprocity onset", ok,
           f"modulated asymmetry {asym:.2e} (> {10 * tol:g}), control {control:.2e} (< {tol:g})")


def test_impedance_invariance():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(5):
        k0, rho0 = rng.uniform(0.5, 2.0, 2)
        dk, drho = rng.uniform(-0.9, 0.9, 2) * (k0, rho0)
        p = cont.ContinuumProfile(k0=k0, dk=dk, rho0=rho0, drho=drho)
        p = p.with_speed(rng.uniform(0.05, 0.95) * p.min_sound_speed())
        med = cont.fictitious(p)
        x = np.linspace(0, p.length, 1000)
        exact = p.k(x) * p.rho(x)
        worst = max(worst, float(np.max(np.abs(med.kbar(x) * med.rhobar(x) - exact) / exact)))
    record(7, "Continuum impedance invariance", worst <= 1e-12, f"max relative error {worst:.2e} (<= 1e-12)")


def test_critical_speed_closed_form():
    # constant sound speed 1, impedance 1 + 0.6 cos (range 0.4..1.6, factor 4)
    p = cont.ContinuumProfile(k0=1.0, dk=0.6, rho0=1.0, drho=0.6)
    exact = 1 / math.sqrt(1.0 * (1 / math.sqrt(1 - 0.36)))
    start = time.perf_counter()
    c = cont.critical_speed(p)
    elapsed = time.perf_counter() - start
    ok = abs(c - exact) <= 1e-8 and elapsed < 1.0
    record(8, "Critical speed closed form", ok,
           f"|c - closed form| {abs(c - exact):.2e} (<= 1e-8), {elapsed:.3f} s (< 1 s)")


@pytest.mark.slow
def test_one_way_regime():
    profile = cont.ContinuumProfile.from_dict(FIG4_PROFILE)
    s_plus, s_minus = cont.group_velocities(profile)
    start = time.perf_counter()
    _, spec, ic, traj = fig4_run()
    elapsed = time.perf_counter() - start
    coe = sim.directionality_metrics(traj, source=int(ic.center))["center_of_energy_velocity"]
    slow, fast = sim.ray_slopes(traj, source=int(ic.center))
    err_minus = abs(slow - s_minus) / s_minus
    err_plus = abs(fast - s_plus) / s_plus
    ok = s_plus > 0 and s_minus > 0 and coe > 0 and err_minus <= 0.1 and err_plus <= 0.1 and elapsed < 600
    record(9, "One-way regime", ok,
           f"analytic s+ {s_plus:.4f}, s- {s_minus:.4f}; measured {fast:.4f} ({err_plus:.1%}), "
           f"{slow:.4f} ({err_minus:.1%}) (<= 10%); CoE velocity {coe:.4f} (> 0); {elapsed:.0f} s (< 600 s)")


STABILITY_SPECS = [
    (2, 2, 0.3, 0.2, 0.4), (2, 3, 0.5, 0.5, 1.0), (3, 2, 0.2, 0.1, 0.7), (4, 2, 0.3, 0.2, 0.4),
    (3, 3, 0.5, 0.0, 1.8), (3, 2, 0.6, 0.3, 1.5), (3, 2, 0.4, 0.4, 2.0), (4, 2, 0.6, 0.3, 1.5),
    (3, 3, 0.4, 0.4, 2.0), (3, 3, 0.8, 0.5, 1.2),
]


def test_stability_cross_check():
    disagree, rate_errs, kinds = [], [], set()
    for z, cells, dk, dm, nu in STABILITY_SPECS:
        spec = ChainSpec(z=z, cells=cells, dk=dk, dm=dm, nu=nu)
        rep = mono.stability_report(mono.full_monodromy(spec))
        norms = sim.period_norms(spec, sim.make_initial(spec, sim.InitialCondition("random", seed=7)), 50)
        verdict = sim.growth_classification(norms, spec.period)
        kinds.add(rep.stable)
        if verdict["bounded"] != rep.stable:
            disagree.append((z, cells, dk, dm, nu))
        if not rep.stable:
            rate_errs.append(abs(verdict["growth_rate"] - rep.growth_rate) / rep.growth_rate)
    worst = max(rate_errs, default=0.0)
    ok = not disagree and worst <= 0.1 and kinds == {True, False}
    record(10, "Stability cross-check", ok,
           f"{len(disagree)} disagreements of {len(STABILITY_SPECS)} ({len(rate_errs)} unstable), "
           f"worst growth-rate error {worst:.1%} (<= 10%)")


def test_integrator_order():
    delta = 0.5
    w = math.sqrt(delta)
    t = 2 * math.pi
    exact = np.array([[math.cos(w * t), math.sin(w * t) / w], [-w * math.sin(w * t), math.cos(w * t)]])
    p = mth.MathieuParams(delta, 0.0)
    cfg = StepConfig(max_iter=100)
    gl = [np.linalg.norm(mth.mathieu_monodromy(p, cfg, steps=n) - exact) for n in (10, 20, 40)]
    eu = [np.linalg.norm(symplectic_euler_integrate(np.eye(2), 0.0, t, n, lambda s: np.eye(1),
                                                    lambda s: delta * np.eye(1)) - exact)
          for n in (100, 200, 400, 800, 1600)]
    gl_orders = np.log2(np.array(gl[:-1]) / np.array(gl[1:]))
    eu_orders = np.log2(np.array(eu[:-1]) / np.array(eu[1:]))
    ok = np.all(np.abs(gl_orders - 6) <= 0.5) and np.all(np.abs(eu_orders - 1) <= 0.2)
    record(11, "Integrator order", ok,
           f"GL6 orders {np.round(gl_orders, 2).tolist()} (6 +- 0.5), "
           f"symplectic Euler orders {np.round(eu_orders, 3).tolist()} (1 +- 0.2)")
