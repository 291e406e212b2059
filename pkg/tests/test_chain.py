import cmath
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modwave.chain import (
    ChainSpec,
    ModelError,
    ShiftOperator,
    apply_shift,
    apply_shift_adjoint,
    cell_shift,
    full_shift,
    profiles,
    propagate,
    rhs_cell,
    rhs_full,
    stiffness_matrix,
    system_matrix,
)

specs = st.builds(
    ChainSpec,
    z=st.integers(1, 5),
    cells=st.integers(1, 3),
    k0=st.floats(0.5, 2.0),
    m0=st.floats(0.5, 2.0),
    dk=st.floats(-0.45, 0.45),
    dm=st.floats(-0.45, 0.45),
    nu=st.floats(0.1, 2.0),
)
seeds = st.integers(0, 2**32 - 1)
times = st.floats(-10.0, 10.0)


def state(spec, seed, sites=None):
    n = spec.n_sites if sites is None else sites
    return np.random.default_rng(seed).normal(size=2 * n)


def test_derived_quantities():
    spec = ChainSpec(z=4, cells=3, nu=0.5)
    assert spec.n_sites == 12
    assert spec.xi == pytest.approx(np.pi / 2)
    assert spec.period == pytest.approx(4 * np.pi)
    assert spec.tau == pytest.approx(np.pi)


@pytest.mark.parametrize(
    "kwargs",
    [dict(z=0, cells=1), dict(z=2, cells=0), dict(z=2, cells=1, dk=1.0),
     dict(z=2, cells=1, m0=-1.0), dict(z=2, cells=1, nu=float("nan")), dict(z=1.5, cells=1)],
)
def test_invalid_specs(kwargs):
    with pytest.raises(ModelError):
        ChainSpec(**kwargs)


def test_json_round_trip():
    spec = ChainSpec(z=3, cells=2, dk=0.2, dm=-0.1, nu=0.7)
    text = spec.to_json()
    assert set(json.loads(text)) == {"z", "cells", "k0", "m0", "dk", "dm", "nu"}
    assert ChainSpec.from_json(text) == spec
    with pytest.raises(ModelError):
        ChainSpec.from_dict({"z": 1, "cells": 1, "phase": 0.3})


def test_profiles_unmodulated_constant():
    spec = ChainSpec(z=3, cells=2, k0=1.5, m0=0.7)
    k, m = profiles(spec, np.arange(6), 3.3)
    np.testing.assert_array_equal(k, 1.5)
    np.testing.assert_array_equal(m, 0.7)


def test_profiles_at_origin():
    spec = ChainSpec(z=3, cells=1, dk=0.2, dm=0.1)
    assert profiles(spec, 0, 0.0) == pytest.approx((1.2, 1.1))


@given(specs, times)
def test_profiles_progressive(spec, t):
    n = np.arange(spec.n_sites)
    k1, m1 = profiles(spec, n, t + spec.tau)
    k0, m0 = profiles(spec, (n - 1) % spec.n_sites, t)
    np.testing.assert_allclose(k1, k0, atol=1e-13)
    np.testing.assert_allclose(m1, m0, atol=1e-13)


def test_rhs_zero_state():
    spec = ChainSpec(z=3, cells=2, dk=0.3, dm=0.2)
    np.testing.assert_array_equal(rhs_full(spec, 1.0, np.zeros(12)), 0.0)
    np.testing.assert_array_equal(rhs_cell(spec, 1.0, np.zeros(6), 1j), 0.0)


def test_rhs_rigid_translation():
    spec = ChainSpec(z=3, cells=2, dk=0.3, dm=0.2)
    phi = np.concatenate([np.ones(6), np.zeros(6)])
    np.testing.assert_allclose(rhs_full(spec, 0.4, phi), 0.0, atol=1e-15)


def test_rhs_two_sites_by_hand():
    spec = ChainSpec(z=2, cells=1, k0=1.5, dk=0.0, dm=0.0)
    out = rhs_full(spec, 0.0, np.array([1.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(out, [0.0, 0.0, -3.0, 3.0])


def test_rhs_length_check():
    with pytest.raises(ValueError):
        rhs_full(ChainSpec(z=2, cells=1), 0.0, np.zeros(3))


def test_cell_with_unit_bloch_matches_full():
    spec = ChainSpec(z=4, cells=1, dk=0.3, dm=0.2, nu=0.6)
    phi = state(spec, 3)
    np.testing.assert_allclose(rhs_cell(spec, 0.9, phi, 1.0), rhs_full(spec, 0.9, phi), atol=1e-14)


def test_cell_rejects_nonunit_bloch():
    spec = ChainSpec(z=2, cells=1)
    with pytest.raises(ModelError):
        rhs_cell(spec, 0.0, np.zeros(4), 1.1)


@given(specs, times, st.floats(0, 2 * np.pi))
def test_cell_stiffness_hermitian_psd(spec, t, arg):
    bloch = cmath.exp(1j * arg)
    cols = []
    for e in np.eye(spec.z):
        phi = np.concatenate([e, np.zeros(spec.z)]).astype(complex)
        cols.append(-rhs_cell(spec, t, phi, bloch)[spec.z:])
    kmat = np.column_stack(cols)
    np.testing.assert_allclose(kmat, kmat.conj().T, atol=1e-13)
    assert np.linalg.eigvalsh(kmat).min() >= -1e-12
    np.testing.assert_allclose(kmat, stiffness_matrix(spec, t, bloch), atol=1e-13)


def test_system_matrix_matches_rhs():
    spec = ChainSpec(z=3, cells=2, dk=0.3, dm=0.2, nu=0.6)
    phi = state(spec, 1)
    np.testing.assert_allclose(system_matrix(spec, 0.7) @ phi, rhs_full(spec, 0.7, phi), atol=1e-13)


def test_shift_round_trip_and_powers():
    op = ShiftOperator(6)
    phi = np.arange(12.0)
    np.testing.assert_array_equal(apply_shift_adjoint(op, apply_shift(op, phi)), phi)
    out = phi
    for _ in range(6):
        out = apply_shift(op, out)
    np.testing.assert_array_equal(out, phi)
    spec = ChainSpec(z=3, cells=2)
    out = phi
    for _ in range(3):
        out = apply_shift(full_shift(spec), out)
    np.testing.assert_array_equal(out[:6], np.roll(phi[:6], 3))


def test_cell_shift_against_explicit_matrix():
    op = ShiftOperator(2, 1j)
    s = np.array([[0, -1j], [1, 0]])
    np.testing.assert_allclose(op.matrix(), s)
    phi = np.array([1.0, 2.0, 3.0, 4.0], dtype=complex)
    np.testing.assert_allclose(apply_shift(op, phi), np.concatenate([s @ phi[:2], s @ phi[2:]]))
    np.testing.assert_allclose(apply_shift_adjoint(op, apply_shift(op, phi)), phi)
    unitary = op.matrix()
    np.testing.assert_allclose(unitary @ unitary.conj().T, np.eye(2), atol=1e-15)


def test_shift_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_shift(ShiftOperator(3), np.zeros(4))


def test_cell_shift_power_is_bloch_phase():
    spec = ChainSpec(z=3, cells=4)
    bloch = cmath.exp(0.7j)
    s = cell_shift(spec, bloch).matrix()
    np.testing.assert_allclose(np.linalg.matrix_power(s, 3), np.conj(bloch) * np.eye(3), atol=1e-14)


@given(specs, times, seeds)
def test_shift_covariance(spec, t, seed):
    op = full_shift(spec)
    phi = state(spec, seed)
    lhs = rhs_full(spec, t + spec.tau, phi)
    rhs = apply_shift(op, rhs_full(spec, t, apply_shift_adjoint(op, phi)))
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@given(specs, times, seeds)
def test_momentum_conservation(spec, t, seed):
    out = rhs_full(spec, t, state(spec, seed))
    assert abs(out[spec.n_sites:].sum()) <= 1e-12


@given(specs, times, seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_rhs_linear(spec, t, seed, a, b):
    x, y = state(spec, seed), state(spec, seed + 1)
    lhs = rhs_full(spec, t, a * x + b * y)
    rhs = a * rhs_full(spec, t, x) + b * rhs_full(spec, t, y)
    assert np.linalg.norm(lhs - rhs) <= 1e-13 * max(1.0, np.linalg.norm(rhs)) * 10


@given(specs, times, times, seeds)
def test_unmodulated_rhs_time_independent(spec, t1, t2, seed):
    spec = spec.replace(dk=0.0, dm=0.0)
    phi = state(spec, seed)
    np.testing.assert_array_equal(rhs_full(spec, t1, phi), rhs_full(spec, t2, phi))


@pytest.mark.parametrize("bloch", [None, 1j])
def test_backends_agree(bloch):
    spec = ChainSpec(z=4, cells=2, dk=0.4, dm=0.3, nu=0.9)
    sites = spec.z if bloch is not None else spec.n_sites
    phi0 = np.eye(2 * sites)
    a = propagate(spec, phi0, 0.0, spec.tau, bloch=bloch, backend="python")
    b = propagate(spec, phi0, 0.0, spec.tau, bloch=bloch, backend="compiled")
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_propagate_vector_equals_matrix_column():
    spec = ChainSpec(z=3, cells=1, dk=0.2, dm=0.1, nu=0.5)
    mat = propagate(spec, np.eye(6), 0.0, 2.0)
    vec = propagate(spec, np.eye(6)[:, 2], 0.0, 2.0)
    np.testing.assert_allclose(vec, mat[:, 2], atol=1e-14)
