"""Event-driven closed-loop simulator with exact segment integration.

The loop advances from stop to stop (next record tick, next jam breakpoint,
next transmission attempt, horizon), integrating the held-input dynamics
exactly over each segment. Attempt instants follow the configured scheduling
logic; a successful attempt swaps the held sample and resets the transmission
error. Traces carry regular samples plus dedicated rows at attempts (pre- and
post-jump at the same timestamp) and jam breakpoints.

Runs are bit-reproducible: no randomness, no wall-clock dependence.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dos import DosBudget, DosSequence, check_slow_average, is_jammed
from .guarantees import SamplingRobustness, _per_interval_gaps
from .linalg import FloatArray, as_vector
from .plant import InputMode, LoopState, LtiPlant, exact_hold_step
from .triggers import (
    LogicKind,
    TriggerConfig,
    next_update_event_time,
    next_update_pure_time,
    next_update_self_trigger,
    validate_trigger_for_plant,
)

DIVERGENCE_NORM = 1e12
_GES_SLACK = 1e-6
_RULE_SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything one run needs; validated on construction.

    record_step must not exceed delta1/4 so traces resolve the fast retry
    cadence, and the jam sequence must satisfy the declared budget over the
    run horizon. delta2 admissibility against the plant is enforced for the
    finite-rate logics (IDEAL_EVENT only uses delta2 as a defensive cap).
    """

    plant: LtiPlant
    logic: LogicKind
    trigger: TriggerConfig
    dos: DosSequence
    budget: DosBudget
    x0: FloatArray
    horizon: float
    record_step: float
    crossing_tol: float = 1e-9

    def __post_init__(self) -> None:
        if not isinstance(self.logic, LogicKind):
            raise ValueError(f"logic must be a LogicKind, got {self.logic!r}")
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if not (self.record_step > 0.0 and math.isfinite(self.record_step)):
            raise ValueError(f"record_step must be positive, got {self.record_step}")
        if self.record_step > self.trigger.delta1 / 4.0 * (1.0 + 1e-12):
            raise ValueError(
                f"record_step {self.record_step} must be <= delta1/4 = {self.trigger.delta1 / 4.0}"
            )
        if not (self.crossing_tol > 0.0 and math.isfinite(self.crossing_tol)):
            raise ValueError(f"crossing_tol must be positive, got {self.crossing_tol}")
        object.__setattr__(self, "x0", as_vector(self.x0, self.plant.n, "x0"))
        verdict = check_slow_average(self.dos, self.budget, self.horizon)
        if not verdict.ok:
            raise ValueError(
                f"jam sequence violates its budget at t={verdict.violation_time:.6g} "
                f"(excess {verdict.worst_excess:.3e})"
            )
        if self.logic is not LogicKind.IDEAL_EVENT:
            validate_trigger_for_plant(self.trigger, self.plant)


@dataclass(frozen=True, eq=False)
class OnsetSnapshot:
    """State and held sample captured at a jam onset."""

    t: float
    x: FloatArray
    x_held: FloatArray


@dataclass(eq=False)
class Trace:
    """Array-of-rows recording of one run (see run() for the row conventions)."""

    t: FloatArray
    x: FloatArray
    u: FloatArray
    e_norm: FloatArray
    x_norm: FloatArray
    jammed: np.ndarray
    attempt: np.ndarray
    success: np.ndarray
    attempts: tuple[tuple[float, bool], ...]
    dos_onsets: tuple[OnsetSnapshot, ...]
    diverged: bool
    divergence_time: float | None
    horizon: float
    crossing_tol: float

    def __len__(self) -> int:
        return self.t.shape[0]

    def to_csv(self, path: str | Path) -> None:
        """Write rows as CSV: t,x1..xn,u1..um,e_norm,x_norm,jammed,attempt,success.

        Floats carry 17 significant digits so values round-trip exactly.
        Attempt rows come in pre/post pairs at the same timestamp on success;
        the pre row carries the attempt and success flags.
        """
        n = self.x.shape[1]
        m = self.u.shape[1]
        header = (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"u{j + 1}" for j in range(m)]
            + ["e_norm", "x_norm", "jammed", "attempt", "success"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(len(self)):
                row = [f"{self.t[i]:.17g}"]
                row += [f"{v:.17g}" for v in self.x[i]]
                row += [f"{v:.17g}" for v in self.u[i]]
                row += [f"{self.e_norm[i]:.17g}", f"{self.x_norm[i]:.17g}"]
                row += [str(int(self.jammed[i])), str(int(self.attempt[i])), str(int(self.success[i]))]
                writer.writerow(row)


def find_event_crossing(
    plant: LtiPlant,
    state: LoopState,
    sigma: float,
    t_from: float,
    t_max: float,
    crossing_tol: float = 1e-9,
    *,
    grid_step: float | None = None,
    zero_input: bool = False,
) -> float | None:
    """First t in (t_from, t_max] where ||e(t)|| reaches sigma ||x(t)||.

    state must hold the loop values at t_from with ||e|| < sigma ||x|| (or
    e = 0). Scans a fixed grid of step min(grid_step, window/64) for a sign
    change of g = ||e|| - sigma ||x||, then bisects the bracketing cell down
    to crossing_tol; returns None when no crossing occurs in the window.
    """
    window = t_max - t_from
    if window <= 0.0:
        return None
    step = window / 64.0 if grid_step is None else min(grid_step, window / 64.0)
    xh = state.x_held
    x_prev = state.x
    e0 = float(np.linalg.norm(xh - x_prev))
    x0n = float(np.linalg.norm(x_prev))
    if e0 == 0.0 and x0n == 0.0:
        return None
    if e0 - sigma * x0n >= 0.0 and e0 > 0.0:
        raise ValueError("state already violates the update-rule threshold at t_from")

    n_cells = max(1, math.ceil(window / step - 1e-9))
    t_off = 0.0
    for i in range(1, n_cells + 1):
        dt_i = min(i * step, window)
        seg = dt_i - t_off
        if seg <= 0.0:
            break
        x_cur = exact_hold_step(plant, x_prev, xh, seg, zero_input=zero_input)
        g_cur = float(np.linalg.norm(xh - x_cur)) - sigma * float(np.linalg.norm(x_cur))
        if g_cur >= 0.0:
            lo, hi = 0.0, seg
            while hi - lo > crossing_tol:
                mid = 0.5 * (lo + hi)
                xm = exact_hold_step(plant, x_prev, xh, mid, zero_input=zero_input)
                if float(np.linalg.norm(xh - xm)) - sigma * float(np.linalg.norm(xm)) < 0.0:
                    lo = mid
                else:
                    hi = mid
            return t_from + t_off + hi
        x_prev = x_cur
        t_off = dt_i
    return None


def _piecewise_crossing(
    plant: LtiPlant,
    state: LoopState,
    sigma: float,
    t_max: float,
    crossing_tol: float,
    delta1: float,
    dos: DosSequence,
) -> float | None:
    """Crossing search across jam breakpoints (the input may switch there)."""
    zero_mode = plant.input_mode is InputMode.ZERO_DURING_DOS
    bps = dos.breakpoints() if zero_mode else np.empty(0)
    t = state.t
    x = state.x
    xh = state.x_held
    while t < t_max - 1e-15:
        if zero_mode:
            idx = int(np.searchsorted(bps, t, side="right"))
            seg_end = min(t_max, float(bps[idx])) if idx < len(bps) else t_max
            zi = is_jammed(dos, 0.5 * (t + seg_end))
        else:
            seg_end = t_max
            zi = False
        probe = LoopState(t, x, xh, state.last_attempt_failed, state.t_held)
        hit = find_event_crossing(
            plant, probe, sigma, t, seg_end, crossing_tol, grid_step=delta1 / 8.0, zero_input=zi
        )
        if hit is not None:
            return hit
        if seg_end >= t_max:
            return None
        x = exact_hold_step(plant, x, xh, seg_end - t, zero_input=zi)
        t = seg_end
    return None


def run(config: SimConfig) -> Trace:
    """Simulate one run and record its trace.

    Row conventions: regular samples every record_step; a row at every jam
    breakpoint; at every attempt a row flagged attempt=1 with success=0/1
    (values just before the update), followed on success by an unflagged row
    at the same t with the new held sample (transmission error zero). The
    final row sits at the horizon unless the divergence guard
    (||x|| > 1e12) stopped the run early.
    """
    plant = config.plant
    trig = config.trigger
    dos = config.dos
    horizon = config.horizon
    rs = config.record_step
    n, m = plant.n, plant.m
    K = plant.K
    zero_mode = plant.input_mode is InputMode.ZERO_DURING_DOS
    norm = np.linalg.norm

    bp_times: list[float] = []
    bp_onset: list[bool] = []
    for h, d in dos.intervals:
        bp_times.append(h)
        bp_onset.append(True)
        bp_times.append(h + d)
        bp_onset.append(False)
    order = sorted(range(len(bp_times)), key=lambda i: bp_times[i])
    bp_times = [bp_times[i] for i in order]
    bp_onset = [bp_onset[i] for i in order]
    bp_i = 0

    rows_t: list[float] = []
    rows_x: list[FloatArray] = []
    rows_u: list[FloatArray] = []
    rows_en: list[float] = []
    rows_xn: list[float] = []
    rows_jam: list[bool] = []
    rows_att: list[int] = []
    rows_suc: list[int] = []
    attempts: list[tuple[float, bool]] = []
    onsets: list[OnsetSnapshot] = []

    u_zero = np.zeros(m)

    def emit(t: float, x: FloatArray, xh: FloatArray, jam: bool, att: int = 0, suc: int = 0) -> None:
        rows_t.append(t)
        rows_x.append(x.copy())
        rows_u.append(u_zero.copy() if (zero_mode and jam) else K @ xh)
        e = xh - x
        rows_en.append(float(norm(e)))
        rows_xn.append(float(norm(x)))
        rows_jam.append(jam)
        rows_att.append(att)
        rows_suc.append(suc)

    def finder(st: LoopState, cap: float) -> float | None:
        return _piecewise_crossing(
            plant, st, trig.sigma, min(cap, horizon), config.crossing_tol, trig.delta1, dos
        )

    def schedule(st: LoopState) -> float:
        if config.logic is LogicKind.PURE_TIME:
            return next_update_pure_time(st, trig)
        if config.logic is LogicKind.SELF_TRIGGER:
            return next_update_self_trigger(st, plant, trig)
        if config.logic is LogicKind.EVENT_TIME:
            return next_update_event_time(st, trig, finder)
        # IDEAL_EVENT: retry "continuously" while jammed, i.e. succeed the
        # instant the interval ends; otherwise wait for the next crossing.
        if st.last_attempt_failed:
            idx = int(np.searchsorted(dos.onsets, st.t, side="right")) - 1
            return float(dos.ends[idx])
        hit = finder(st, horizon)
        return hit if hit is not None else horizon + 1.0

    state = LoopState(0.0, config.x0.copy(), np.zeros(n), False, 0.0)
    next_attempt = 0.0
    diverged = False
    div_time: float | None = None

    while True:
        t = state.t
        if t >= horizon - 1e-15:
            break
        k_tick = math.floor(t / rs + 1e-9) + 1
        t_rec = k_tick * rs
        if t_rec <= t:
            t_rec += rs
        t_bp = bp_times[bp_i] if bp_i < len(bp_times) else math.inf
        stop = min(horizon, next_attempt, t_rec, t_bp)

        if stop > t:
            zi = zero_mode and is_jammed(dos, 0.5 * (t + stop))
            x_new = exact_hold_step(plant, state.x, state.x_held, stop - t, zero_input=zi)
            state = LoopState(stop, x_new, state.x_held, state.last_attempt_failed, state.t_held)
            if float(norm(x_new)) > DIVERGENCE_NORM:
                emit(stop, state.x, state.x_held, is_jammed(dos, stop))
                diverged = True
                div_time = stop
                break
        else:
            state = LoopState(stop, state.x, state.x_held, state.last_attempt_failed, state.t_held)

        handled = False
        if stop == t_bp:
            saw_onset = False
            while bp_i < len(bp_times) and bp_times[bp_i] == stop:
                saw_onset = saw_onset or bp_onset[bp_i]
                bp_i += 1
            if saw_onset:
                onsets.append(OnsetSnapshot(stop, state.x.copy(), state.x_held.copy()))
            emit(stop, state.x, state.x_held, is_jammed(dos, stop))
            handled = True

        if stop == next_attempt and stop < horizon:
            jam = is_jammed(dos, stop)
            emit(stop, state.x, state.x_held, jam, att=1, suc=0 if jam else 1)
            if jam:
                state = LoopState(stop, state.x, state.x_held, True, state.t_held)
            else:
                state = LoopState(stop, state.x, state.x.copy(), False, stop)
                emit(stop, state.x, state.x_held, jam)
            attempts.append((stop, not jam))
            next_attempt = schedule(state)
            handled = True

        if not handled:
            emit(stop, state.x, state.x_held, is_jammed(dos, stop))

    return Trace(
        t=np.array(rows_t),
        x=np.array(rows_x).reshape(len(rows_t), n),
        u=np.array(rows_u).reshape(len(rows_t), m),
        e_norm=np.array(rows_en),
        x_norm=np.array(rows_xn),
        jammed=np.array(rows_jam, dtype=np.int8),
        attempt=np.array(rows_att, dtype=np.int8),
        success=np.array(rows_suc, dtype=np.int8),
        attempts=tuple(attempts),
        dos_onsets=tuple(onsets),
        diverged=diverged,
        divergence_time=div_time,
        horizon=horizon,
        crossing_tol=config.crossing_tol,
    )


@dataclass(frozen=True)
class GesVerdict:
    """Result of checking a trace against alpha exp(-beta t) ||x(0)||."""

    holds: bool
    first_violation: float | None
    worst_margin: float


def verify_ges(trace: Trace, alpha: float, beta: float) -> GesVerdict:
    """Check ||x(t)|| <= alpha exp(-beta t) ||x(0)|| (slack 1 + 1e-6) on every row."""
    if not alpha >= 1.0:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    x0n = float(trace.x_norm[0])
    bound = alpha * np.exp(-beta * trace.t) * x0n
    ratio = trace.x_norm / np.maximum(bound, 1e-300)
    bad = np.nonzero(ratio > 1.0 + _GES_SLACK)[0]
    return GesVerdict(
        holds=bad.size == 0,
        first_violation=float(trace.t[bad[0]]) if bad.size else None,
        worst_margin=float(ratio.max()) if len(trace) else 0.0,
    )


@dataclass(frozen=True)
class RuleVerdict:
    """Result of checking the update rule outside inflated jam windows."""

    holds: bool
    first_violation: float | None
    worst_ratio: float


def check_update_rule(
    trace: Trace,
    sigma: float,
    seq: DosSequence,
    robustness: SamplingRobustness,
) -> RuleVerdict:
    """Check ||e(t)|| <= sigma ||x(t)|| wherever transmissions were possible.

    Rows inside any inflated jam window [h_n, h_n + tau_n + gap_n), widened by
    the crossing tolerance at both edges, are exempt, as are pre-jump rows of
    successful attempts (their timestamp legally carries the post-jump value).
    """
    gaps = _per_interval_gaps(seq, robustness)
    edge = trace.crossing_tol
    exempt = np.zeros(len(trace), dtype=bool)
    for k in range(len(seq)):
        s = float(seq.onsets[k]) - edge
        e = float(seq.ends[k]) + gaps[k] + edge
        exempt |= (trace.t >= s) & (trace.t < e)
    exempt |= (trace.attempt == 1) & (trace.success == 1)
    atol = 1e-12 * float(trace.x_norm[0])
    limit = sigma * trace.x_norm * (1.0 + _RULE_SLACK) + atol
    bad = np.nonzero(~exempt & (trace.e_norm > limit))[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(trace.x_norm > 0, trace.e_norm / np.maximum(trace.x_norm, 1e-300), 0.0)
    worst = float(ratios[~exempt].max()) if np.any(~exempt) else 0.0
    return RuleVerdict(
        holds=bad.size == 0,
        first_violation=float(trace.t[bad[0]]) if bad.size else None,
        worst_ratio=worst,
    )


def check_onset_amplification(trace: Trace, sigma: float, slack: float = 1e-9) -> tuple[bool, float]:
    """At every jam onset the held sample obeys ||x_held|| <= (1 + sigma) ||x||.

    Returns (ok, worst ratio of ||x_held|| to (1 + sigma) ||x||).
    """
    worst = 0.0
    ok = True
    for snap in trace.dos_onsets:
        lhs = float(np.linalg.norm(snap.x_held))
        rhs = (1.0 + sigma) * float(np.linalg.norm(snap.x))
        if lhs > rhs * (1.0 + slack):
            ok = False
        if rhs > 0.0:
            worst = max(worst, lhs / rhs)
        elif lhs > 0.0:
            ok = False
            worst = math.inf
    return ok, worst


def check_lyapunov_decay(
    trace: Trace,
    P: FloatArray,
    omega1: float,
    segments: list[tuple[float, float]],
    slack: float = 1e-6,
) -> tuple[bool, float]:
    """Check V(x(t)) <= exp(-omega1 (t - s)) V(x(s)) on each jam-free segment [s, e].

    Returns (ok, worst ratio against the bound).
    """
    V = np.einsum("ij,jk,ik->i", trace.x, P, trace.x)
    worst = 0.0
    ok = True
    for s, e in segments:
        idx = np.nonzero((trace.t >= s) & (trace.t <= e))[0]
        if idx.size < 2:
            continue
        t_ref = float(trace.t[idx[0]])
        v_ref = float(V[idx[0]])
        bound = v_ref * np.exp(-omega1 * (trace.t[idx] - t_ref))
        ratio = V[idx] / np.maximum(bound, 1e-300)
        worst = max(worst, float(ratio.max()))
        if float(ratio.max()) > 1.0 + slack:
            ok = False
    return ok, worst
