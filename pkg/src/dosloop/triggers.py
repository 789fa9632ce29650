"""Transmission scheduling logics and the inter-update error bound.

Four interchangeable rules decide when the sensor attempts to transmit:

- EVENT_TIME: error-threshold events while acknowledged, a fast periodic
  retry cadence (delta1) while jammed;
- PURE_TIME: two-rate periodic sampling, delta2 while acknowledged, delta1
  while jammed;
- SELF_TRIGGER: next attempt computed from a model-based prediction of the
  current state, interpolating between delta2 and delta1;
- IDEAL_EVENT: pure event triggering with instantaneous retry, an
  idealization used as a baseline.

delta2 admissibility comes from a scalar Riccati comparison: the ratio
||e|| / ||x|| after a successful update is bounded by the solution of
phi' = c + (c + a) phi + a phi^2 with c = ||A + BK|| and a = ||BK||, so the
first time phi reaches sigma lower-bounds the inter-event time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .linalg import FloatArray, as_vector, spectral_norm
from .plant import LoopState, LtiPlant, exact_hold_step, mat_exp

ZERO_STATE_TOL = 1e-12
_EVENT_CAP_FACTOR = 1e6
_RICCATI_LOCAL_TOL = 1e-13
_RICCATI_REL_TOL = 1e-11


class LogicKind(Enum):
    EVENT_TIME = "event_time"
    PURE_TIME = "pure_time"
    SELF_TRIGGER = "self_trigger"
    IDEAL_EVENT = "ideal_event"


@dataclass(frozen=True)
class Varphi:
    """Gain shaping map into [0, 1]: the zero map or a saturated linear ramp."""

    kind: str = "zero"
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "saturated_linear"):
            raise ValueError(f"unknown varphi kind {self.kind!r}")
        if self.kind == "saturated_linear" and not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"saturated_linear scale must be positive, got {self.scale}")

    def __call__(self, r: float) -> float:
        if self.kind == "zero":
            return 0.0
        return min(1.0, self.scale * max(0.0, float(r)))


@dataclass(frozen=True)
class TriggerConfig:
    """Threshold sigma plus the two sampling rates delta1 <= delta2."""

    sigma: float
    delta1: float
    delta2: float
    varphi: Varphi = Varphi()

    def __post_init__(self) -> None:
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (self.delta1 > 0.0 and math.isfinite(self.delta1)):
            raise ValueError(f"delta1 must be positive, got {self.delta1}")
        if not (self.delta2 >= self.delta1 and math.isfinite(self.delta2)):
            raise ValueError(f"need delta1 <= delta2, got {self.delta1} > {self.delta2}")


def validate_trigger_for_plant(config: TriggerConfig, plant: LtiPlant) -> float:
    """Check delta2 against the Riccati inter-update bound; returns the bound.

    Raises ValueError when delta2 exceeds it, since the update rule would no
    longer be guaranteed between successful transmissions.
    """
    bound = riccati_delta2(spectral_norm(plant.phi), spectral_norm(plant.bk), config.sigma)
    if config.delta2 > bound * (1.0 + 1e-9):
        raise ValueError(
            f"delta2={config.delta2} exceeds the admissible inter-update bound {bound:.12g}"
        )
    return bound


def _rk4_step(p: float, h: float, c: float, b: float, a: float) -> float:
    def f(v: float) -> float:
        return c + b * v + a * v * v

    k1 = f(p)
    k2 = f(p + 0.5 * h * k1)
    k3 = f(p + 0.5 * h * k2)
    k4 = f(p + h * k3)
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_span(p: float, span: float, c: float, b: float, a: float, substeps: int = 32) -> float:
    h = span / substeps
    for _ in range(substeps):
        p = _rk4_step(p, h, c, b, a)
    return p


def riccati_delta2(phi_norm: float, bk_norm: float, sigma: float) -> float:
    """First time the error-ratio bound reaches sigma.

    Integrates phi' = c + (c + a) phi + a phi^2, phi(0) = 0 with adaptive RK4
    (step doubling), then bisects inside the bracketing step. phi' >= c > 0,
    so the crossing always exists.
    """
    c = float(phi_norm)
    a = float(bk_norm)
    sigma = float(sigma)
    if not (c > 0.0 and math.isfinite(c)):
        raise ValueError(f"phi_norm must be positive, got {phi_norm}")
    if not (a >= 0.0 and math.isfinite(a)):
        raise ValueError(f"bk_norm must be >= 0, got {bk_norm}")
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be positive, got {sigma}")
    b = c + a

    t = 0.0
    p = 0.0
    h = min(0.05 * sigma / c, 0.1 / b)
    while p < sigma:
        full = _rk4_step(p, h, c, b, a)
        half = _rk4_step(_rk4_step(p, 0.5 * h, c, b, a), 0.5 * h, c, b, a)
        err = abs(half - full) / 15.0
        tol = _RICCATI_LOCAL_TOL * max(1.0, abs(half))
        if err <= tol:
            if half >= sigma:
                lo, hi = 0.0, h
                while hi - lo > max(1e-15, _RICCATI_REL_TOL * (t + hi)):
                    mid = 0.5 * (lo + hi)
                    if _rk4_span(p, mid, c, b, a) < sigma:
                        lo = mid
                    else:
                        hi = mid
                return t + hi
            t += h
            p = half
        shrink = 0.9 * (tol / err) ** 0.2 if err > 0.0 else 4.0
        h *= min(4.0, max(0.2, shrink))
    return t


def predict_state(plant: LtiPlant, x_at_t1: FloatArray, t1: float, t2: float) -> FloatArray:
    """Forward prediction of the state at t2 from a successful sample at t1.

    Applies the closed-loop flow operator driven by that same sample:
    chi = [exp(Phi dt) + int_0^dt exp(Phi (dt - s)) B K ds] x(t1). Computed
    exactly through an augmented matrix exponential.
    """
    if t2 < t1:
        raise ValueError(f"need t2 >= t1, got t1={t1}, t2={t2}")
    x = as_vector(x_at_t1, plant.n, "x_at_t1")
    dt = float(t2 - t1)
    if dt == 0.0:
        return x.copy()
    n = plant.n
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = plant.phi
    M[:n, n:] = plant.bk
    E = mat_exp(M, dt)
    return (E[:n, :n] + E[:n, n:]) @ x


def predict_state_open_loop_hold(
    plant: LtiPlant,
    x_at_t1: FloatArray,
    x_held: FloatArray,
    t1: float,
    t2: float,
) -> FloatArray:
    """Alternative predictor: open-loop dynamics with the input held constant.

    Propagates x' = A x + B K x_held from t1 to t2. This is NOT the predictor
    the scheduling rule is stated with (see predict_state); it is exposed for
    comparison because it models what the plant actually does between updates.
    """
    if t2 < t1:
        raise ValueError(f"need t2 >= t1, got t1={t1}, t2={t2}")
    x = as_vector(x_at_t1, plant.n, "x_at_t1")
    if t2 == t1:
        return x.copy()
    return exact_hold_step(plant, x, x_held, float(t2 - t1))


EventTimeFinder = Callable[[LoopState, float], Optional[float]]


def next_update_event_time(state: LoopState, config: TriggerConfig, finder: EventTimeFinder) -> float:
    """EVENT_TIME rule: delta1 retry while jammed or at rest, else the next threshold crossing.

    The crossing search is delegated (see sim.find_event_crossing) and capped
    at delta2 * 1e6 so a crossing that never comes cannot stall the loop.
    """
    if state.last_attempt_failed or float(np.linalg.norm(state.x)) <= ZERO_STATE_TOL:
        return state.t + config.delta1
    cap = state.t + config.delta2 * _EVENT_CAP_FACTOR
    crossing = finder(state, cap)
    if crossing is None:
        return cap
    return min(crossing, cap)


def next_update_pure_time(state: LoopState, config: TriggerConfig) -> float:
    """PURE_TIME rule: delta1 after a failed attempt, delta2 after a success."""
    return state.t + (config.delta1 if state.last_attempt_failed else config.delta2)


def next_update_self_trigger(state: LoopState, plant: LtiPlant, config: TriggerConfig) -> float:
    """SELF_TRIGGER rule: interpolate between delta2 and delta1 by predicted state size.

    chi predicts the current state from the last successfully received sample;
    large predictions pull the next attempt toward the fast rate delta1.
    """
    chi = predict_state(plant, state.x_held, state.t_held, state.t)
    frac = config.varphi(float(np.linalg.norm(chi)))
    return state.t + config.delta2 - (config.delta2 - config.delta1) * frac
