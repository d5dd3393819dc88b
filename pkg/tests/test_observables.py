import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlqwalk.observables import (
    coherence_minimum,
    l1_coherence,
    long_time_average,
    participation_ratio,
    site_density,
)
from nlqwalk.walk import Recorder, WalkConfig, WalkerState, evolve, prepare_initial_state, rotate_sites
from oracles import brute_l1, dense_linear_step, random_unit


def test_coherence_of_basis_state_is_zero():
    a = np.zeros(4, complex)
    a[2] = 1
    assert l1_coherence(WalkerState(a, np.zeros(4))) == 0.0


@pytest.mark.parametrize("n_sites", [3, 5, 101])
def test_coherence_of_uniform_state_is_maximal(n_sites):
    s = prepare_initial_state(WalkConfig(n_sites, 0.3, epsilon=0.0))
    assert l1_coherence(s) == pytest.approx(2 * n_sites - 1, rel=1e-13)


def test_coherence_matches_brute_force(rng):
    psi = random_unit(rng, 10)
    assert abs(l1_coherence(WalkerState.from_vector(psi)) - brute_l1(psi)) < 1e-10


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi), st.integers(0, 6))
def test_coherence_invariances(n_sites, seed, phase, k):
    psi = random_unit(np.random.default_rng(seed), 2 * n_sites)
    s = WalkerState.from_vector(psi)
    c = l1_coherence(s)
    assert abs(c - brute_l1(psi)) < 1e-10
    assert abs(l1_coherence(WalkerState.from_vector(np.exp(1j * phase) * psi)) - c) < 1e-12
    assert abs(l1_coherence(rotate_sites(s, k)) - c) < 1e-12
    assert -1e-12 <= c <= 2 * n_sites - 1 + 1e-12


def test_site_density_uniform_and_delta():
    s = prepare_initial_state(WalkConfig(7, 0.3, epsilon=0.0))
    np.testing.assert_allclose(site_density(s), np.full(7, 1 / 7), rtol=1e-14)
    a = np.zeros(5, complex)
    a[2] = 1
    np.testing.assert_array_equal(site_density(WalkerState(a, np.zeros(5))), [0, 0, 1, 0, 0])


def test_site_density_after_linear_steps_matches_oracle():
    psi0 = np.zeros(6, complex)
    psi0[0] = 1
    unitary = dense_linear_step(3, math.pi / 4)
    psi = unitary @ unitary @ psi0
    expected = np.abs(psi[0::2]) ** 2 + np.abs(psi[1::2]) ** 2
    cfg = WalkConfig(3, math.pi / 4, 0.0, total_steps=2)
    rec = evolve(cfg, Recorder(density_stride=1), initial_state=WalkerState.from_vector(psi0))
    np.testing.assert_allclose(rec.density_snapshots[2], expected, atol=1e-14)


@pytest.mark.parametrize("density,expected", [
    (np.full(101, 1 / 101), 101.0),
    (np.eye(9)[4], 1.0),
    (np.array([0.5, 0.5, 0, 0, 0]), 2.0),
])
def test_participation_ratio(density, expected):
    assert participation_ratio(density) == pytest.approx(expected, rel=1e-12)


def test_participation_ratio_rejects_unnormalized():
    with pytest.raises(ValueError):
        participation_ratio([0.5, 0.4])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=30), st.randoms())
def test_participation_ratio_permutation_invariant_and_bounded(weights, rnd):
    p = np.array(weights) / np.sum(weights)
    q = p.copy()
    rnd.shuffle(q)
    q = q / q.sum()
    assert participation_ratio(p) == pytest.approx(participation_ratio(q), rel=1e-12)
    assert 1 - 1e-12 <= participation_ratio(p) <= len(p) + 1e-9


def test_long_time_average_and_minimum():
    assert long_time_average([3.0] * 5, 2) == 3.0
    assert long_time_average([0.0, 2.0], 0) == 1.0
    assert coherence_minimum([5, 4, 3, 2], 1) == 2
    assert coherence_minimum([7.0] * 4, 0) == 7.0
    with pytest.raises(ValueError):
        long_time_average([1.0, 2.0], 2)
    with pytest.raises(ValueError):
        coherence_minimum([], 0)


def test_record_invariants():
    rec = evolve(WalkConfig(21, 1.0, 0.6, seed=4, total_steps=2000))
    n_sites = 21
    assert np.all(rec.coherence >= 0) and np.all(rec.coherence <= 2 * n_sites - 1 + 1e-9)
    assert np.all(rec.participation >= 1 - 1e-12) and np.all(rec.participation <= n_sites + 1e-9)
    for p in rec.density_snapshots.values():
        assert abs(p.sum() - 1) < 1e-10
    times, dens = rec.density_matrix()
    assert dens.shape == (len(times), n_sites)


def test_stationary_saturation_short():
    # linear walk from the noisy uniform state stays near the maximum
    rec = evolve(WalkConfig(101, math.pi / 4, 0.0, seed=1, total_steps=2000))
    assert long_time_average(rec.coherence, 1000) > 0.99 * 201
