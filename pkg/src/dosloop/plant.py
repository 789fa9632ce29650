"""Sampled-data LTI loop: plant, held-input propagation, loop state.

The plant is x' = A x + B u with static gain K applied to the most recently
received state sample, u = K * x_held. Between transmission instants the pair
(x, x_held) evolves linearly, so single steps are integrated exactly through
an augmented matrix exponential rather than an ODE stepper.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .linalg import (
    DecayEnvelope,
    FloatArray,
    GrowthEnvelope,
    as_matrix,
    as_vector,
    decay_envelope,
    growth_envelope,
    mat_exp,
)


class InputMode(Enum):
    """What the actuator applies while the channel is jammed."""

    HOLD_LAST = "hold_last"
    ZERO_DURING_DOS = "zero_during_dos"


@dataclass(frozen=True, eq=False)
class LtiPlant:
    """Plant matrices plus feedback gain; A + B K must be Hurwitz.

    Construction validates dimensions and builds the decay envelope of the
    closed-loop matrix (which doubles as the Hurwitz check) and the growth
    envelope of the open-loop matrix. Exact propagators for the held-input
    dynamics are cached per step length.
    """

    A: FloatArray
    B: FloatArray
    K: FloatArray
    input_mode: InputMode = InputMode.HOLD_LAST

    def __post_init__(self) -> None:
        A = as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        n = A.shape[0]
        B = as_matrix(self.B, "B")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        m = B.shape[1]
        K = as_matrix(self.K, "K")
        if K.shape != (m, n):
            raise ValueError(f"K must have shape {(m, n)}, got {K.shape}")
        if not isinstance(self.input_mode, InputMode):
            raise ValueError(f"input_mode must be an InputMode, got {self.input_mode!r}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "_phi", A + B @ K)
        object.__setattr__(self, "_bk", B @ K)
        object.__setattr__(self, "_decay", decay_envelope(self._phi))
        object.__setattr__(self, "_growth", growth_envelope(A))
        object.__setattr__(self, "_prop_cache", {})

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def phi(self) -> FloatArray:
        """Closed-loop matrix A + B K."""
        return self._phi

    @property
    def bk(self) -> FloatArray:
        return self._bk

    @property
    def decay(self) -> DecayEnvelope:
        return self._decay

    @property
    def growth(self) -> GrowthEnvelope:
        return self._growth

    def propagator(self, dt: float, zero_input: bool = False) -> tuple[FloatArray, FloatArray | None]:
        """Blocks (T, H) with x(t+dt) = T x(t) + H x_held; H is None when the input is zeroed."""
        key = (float(dt), bool(zero_input))
        cached = self._prop_cache.get(key)
        if cached is not None:
            return cached
        n = self.n
        if zero_input:
            blocks: tuple[FloatArray, FloatArray | None] = (mat_exp(self.A, dt), None)
        else:
            M = np.zeros((2 * n, 2 * n))
            M[:n, :n] = self.A
            M[:n, n:] = self._bk
            E = mat_exp(M, dt)
            blocks = (E[:n, :n], E[:n, n:])
        self._prop_cache[key] = blocks
        return blocks


def closed_loop_matrix(plant: LtiPlant) -> FloatArray:
    """A + B K."""
    return plant.A + plant.B @ plant.K


def exact_hold_step(
    plant: LtiPlant,
    x0: FloatArray,
    x_held: FloatArray,
    dt: float,
    *,
    zero_input: bool = False,
) -> FloatArray:
    """Advance x' = A x + B K x_held by dt > 0 with x_held frozen.

    Exact (matrix-exponential) integration; with zero_input=True the input
    term is dropped entirely, i.e. x' = A x.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    x0 = as_vector(x0, plant.n, "x0")
    T, H = plant.propagator(float(dt), zero_input)
    if H is None:
        return T @ x0
    xh = as_vector(x_held, plant.n, "x_held")
    return T @ x0 + H @ xh


@dataclass(frozen=True, eq=False)
class LoopState:
    """Loop snapshot: time, plant state, held sample and its timestamp.

    last_attempt_failed mirrors the acknowledgement logic: True while the most
    recent transmission attempt was jammed. Before any success x_held is the
    zero vector (start-up convention when the channel is jammed at t = 0).
    """

    t: float
    x: FloatArray
    x_held: FloatArray
    last_attempt_failed: bool = False
    t_held: float = 0.0


def error_vector(state: LoopState) -> FloatArray:
    """Transmission error e = x_held - x (zero right after a successful update)."""
    return state.x_held - state.x
