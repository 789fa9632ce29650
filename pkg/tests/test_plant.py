"""Held-input plant dynamics against a dense RK4 oracle."""

from __future__ import annotations

import numpy as np
import pytest

from dosloop import (
    EnvelopeError,
    InputMode,
    LoopState,
    LtiPlant,
    closed_loop_matrix,
    error_vector,
    exact_hold_step,
    mat_exp,
)
from conftest import random_stabilized_plant
from oracles import rk4_hold_trajectory


def _sample_plant(seed: int) -> LtiPlant:
    return random_stabilized_plant(np.random.default_rng(seed))


def test_exact_hold_step_matches_rk4(rng):
    for k in range(12):
        plant = random_stabilized_plant(rng)
        x0 = rng.normal(size=plant.n)
        xh = rng.normal(size=plant.n)
        dt = float(rng.uniform(0.01, 0.6))
        got = exact_hold_step(plant, x0, xh, dt)
        want = rk4_hold_trajectory(plant.A, plant.B, plant.K, x0, xh, dt, steps=4000)
        scale = max(1.0, float(np.linalg.norm(want)))
        assert np.linalg.norm(got - want) <= 1e-6 * scale


def test_exact_hold_step_zero_input_matches_rk4(rng):
    plant = random_stabilized_plant(rng, n=2, m=1)
    x0 = rng.normal(size=2)
    xh = rng.normal(size=2)
    dt = 0.4
    got = exact_hold_step(plant, x0, xh, dt, zero_input=True)
    want = rk4_hold_trajectory(plant.A, plant.B, plant.K, x0, xh, dt, steps=4000, zero_input=True)
    assert np.linalg.norm(got - want) <= 1e-8 * max(1.0, float(np.linalg.norm(want)))
    # the held sample is irrelevant once the input is zeroed
    also = exact_hold_step(plant, x0, np.zeros(2), dt, zero_input=True)
    assert np.array_equal(got, also)


def test_propagator_blocks(rng):
    plant = _sample_plant(4)
    dt = 0.3
    T, H = plant.propagator(dt)
    assert np.allclose(T, mat_exp(plant.A, dt), rtol=1e-12, atol=1e-14)
    # linearity: the step is T x0 + H xh for every basis vector
    for i in range(plant.n):
        e_i = np.eye(plant.n)[i]
        assert np.allclose(exact_hold_step(plant, e_i, np.zeros(plant.n), dt), T @ e_i)
        assert np.allclose(exact_hold_step(plant, np.zeros(plant.n), e_i, dt), H @ e_i)
    T0, H0 = plant.propagator(dt, zero_input=True)
    assert H0 is None
    assert np.array_equal(T0, T) or np.allclose(T0, T)


def test_propagator_cache_returns_same_objects():
    plant = _sample_plant(5)
    a = plant.propagator(0.125)
    b = plant.propagator(0.125)
    assert a[0] is b[0] and a[1] is b[1]


def test_semigroup_of_hold_step(rng):
    plant = _sample_plant(6)
    x0 = rng.normal(size=plant.n)
    xh = rng.normal(size=plant.n)
    one = exact_hold_step(plant, x0, xh, 0.5)
    two = exact_hold_step(plant, exact_hold_step(plant, x0, xh, 0.2), xh, 0.3)
    assert np.allclose(one, two, rtol=1e-11, atol=1e-13)


def test_exact_hold_step_requires_positive_dt():
    plant = _sample_plant(7)
    x = np.zeros(plant.n)
    with pytest.raises(ValueError):
        exact_hold_step(plant, x, x, 0.0)
    with pytest.raises(ValueError):
        exact_hold_step(plant, x, x, -0.1)


def test_plant_validation():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    K = np.array([[-1.0, -1.0]])
    plant = LtiPlant(A=A, B=B, K=K)
    assert plant.n == 2 and plant.m == 1
    assert np.array_equal(closed_loop_matrix(plant), A + B @ K)
    with pytest.raises(ValueError):
        LtiPlant(A=A, B=B, K=np.array([[-1.0, -1.0, 0.0]]))  # K shape mismatch
    with pytest.raises(ValueError):
        LtiPlant(A=np.array([[0.0, 1.0]]), B=B, K=K)  # A not square
    with pytest.raises(EnvelopeError):
        LtiPlant(A=A, B=B, K=np.zeros((1, 2)))  # A + BK not Hurwitz


def test_input_mode_values():
    assert InputMode("hold_last") is InputMode.HOLD_LAST
    assert InputMode("zero_during_dos") is InputMode.ZERO_DURING_DOS
    plant = LtiPlant(
        A=np.array([[0.0]]), B=np.array([[1.0]]), K=np.array([[-1.0]]),
        input_mode=InputMode.ZERO_DURING_DOS,
    )
    assert plant.input_mode is InputMode.ZERO_DURING_DOS


def test_loop_state_and_error_vector():
    x = np.array([1.0, 2.0])
    xh = np.array([1.5, 1.0])
    st = LoopState(t=3.0, x=x, x_held=xh)
    assert st.last_attempt_failed is False
    assert st.t_held == 0.0
    assert np.array_equal(error_vector(st), xh - x)
