"""Jamming (denial-of-service) interval sequences and their time budgets.

A DoS sequence is a finite ordered list of right-open intervals
[h_n, h_n + tau_n) during which transmission attempts fail. Budgets bound the
accumulated jammed time by kappa + t / tau_avg (slow-on-average constraint).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .linalg import FloatArray

_BUDGET_EPS = 1e-12
_HEADER_RE = re.compile(r"^#\s*kappa\s*=\s*(\S+)\s+tau\s*=\s*(\S+)\s*$")


class GenerationError(RuntimeError):
    """A DoS generator cannot satisfy its budget/duration constraints."""


@dataclass(frozen=True)
class DosSequence:
    """Ordered, non-overlapping jamming intervals (onset, duration)."""

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        clean = []
        prev_end = -math.inf
        for k, pair in enumerate(self.intervals):
            h, d = float(pair[0]), float(pair[1])
            if not (math.isfinite(h) and math.isfinite(d)):
                raise ValueError(f"interval {k} must be finite, got {pair}")
            if h < 0.0:
                raise ValueError(f"interval {k} onset must be >= 0, got {h}")
            if d <= 0.0:
                raise ValueError(f"interval {k} duration must be > 0, got {d}")
            if h < prev_end:
                raise ValueError(f"interval {k} overlaps its predecessor (onset {h} < previous end {prev_end})")
            clean.append((h, d))
            prev_end = h + d
        object.__setattr__(self, "intervals", tuple(clean))
        h_arr = np.array([p[0] for p in clean], dtype=float)
        d_arr = np.array([p[1] for p in clean], dtype=float)
        object.__setattr__(self, "_h", h_arr)
        object.__setattr__(self, "_d", d_arr)
        object.__setattr__(self, "_end", h_arr + d_arr)
        object.__setattr__(self, "_cum", np.cumsum(d_arr))

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def onsets(self) -> FloatArray:
        return self._h

    @property
    def durations(self) -> FloatArray:
        return self._d

    @property
    def ends(self) -> FloatArray:
        return self._end

    def breakpoints(self) -> FloatArray:
        """All onsets and ends, sorted (may contain duplicates when intervals touch)."""
        return np.sort(np.concatenate((self._h, self._end)))


@dataclass(frozen=True)
class DosBudget:
    """Slow-on-average budget: jammed time on [0, t] at most kappa + t / tau_avg."""

    kappa: float
    tau_avg: float

    def __post_init__(self) -> None:
        if not (self.kappa >= 0.0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if not (self.tau_avg > 1.0 and math.isfinite(self.tau_avg)):
            raise ValueError(f"tau_avg must be > 1, got {self.tau_avg}")

    def bound(self, t: float) -> float:
        return self.kappa + t / self.tau_avg


def n_of_t(seq: DosSequence, t: float) -> int:
    """Index of the most recent interval with onset strictly before t (-1 if none)."""
    return int(np.searchsorted(seq._h, t, side="left")) - 1


def is_jammed(seq: DosSequence, t: float) -> bool:
    """True when t lies in some [h_n, h_n + tau_n) (closed left, open right)."""
    idx = int(np.searchsorted(seq._h, t, side="right")) - 1
    return idx >= 0 and t < float(seq._end[idx])


def tau_last(seq: DosSequence, t: float) -> float:
    """Elapsed part of the most recent interval: min(tau_n, t - h_n), 0 before the first onset."""
    n = n_of_t(seq, t)
    if n < 0:
        return 0.0
    return min(float(seq._d[n]), t - float(seq._h[n]))


def xi_measure(seq: DosSequence, t: float) -> float:
    """Total jammed time accumulated on [0, t]."""
    n = n_of_t(seq, t)
    if n < 0:
        return 0.0
    before = float(seq._cum[n - 1]) if n > 0 else 0.0
    return before + min(float(seq._d[n]), t - float(seq._h[n]))


@dataclass(frozen=True)
class BudgetCheck:
    """Result of validating a sequence against a budget on [0, horizon]."""

    ok: bool
    violation_time: float | None
    worst_excess: float


def check_slow_average(seq: DosSequence, budget: DosBudget, horizon: float) -> BudgetCheck:
    """Check xi(t) <= kappa + t / tau_avg at every breakpoint up to the horizon.

    The jammed-time measure is piecewise linear, so scanning interval onsets,
    interval ends (clipped to the horizon) and the horizon itself covers the
    extrema; the earliest failing breakpoint is reported.
    """
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    points = set()
    for h, d in seq.intervals:
        if h <= horizon:
            points.add(h)
        points.add(min(h + d, horizon))
    points.add(horizon)
    worst = -math.inf
    first_bad: float | None = None
    for t in sorted(points):
        if t > horizon:
            continue
        bound = budget.bound(t)
        excess = xi_measure(seq, t) - bound
        worst = max(worst, excess)
        if excess > _BUDGET_EPS * max(1.0, bound) and first_bad is None:
            first_bad = t
    return BudgetCheck(ok=first_bad is None, violation_time=first_bad, worst_excess=worst)


def gen_periodic(onset: float, period: float, duty: float, horizon: float) -> DosSequence:
    """Periodic jamming: intervals of length duty*period every period, onsets < horizon.

    Satisfies the slow-average constraint with kappa = duty * period and
    tau_avg = 1 / duty (see periodic_budget).
    """
    if not period > 0.0:
        raise ValueError(f"period must be positive, got {period}")
    if not 0.0 < duty < 1.0:
        raise ValueError(f"duty must lie in (0, 1), got {duty}")
    if onset < 0.0:
        raise ValueError(f"onset must be >= 0, got {onset}")
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    d = duty * period
    out = []
    k = 0
    while onset + k * period < horizon:
        out.append((onset + k * period, d))
        k += 1
    return DosSequence(tuple(out))


def periodic_budget(period: float, duty: float) -> DosBudget:
    """Tightest budget satisfied by gen_periodic output: (duty * period, 1 / duty)."""
    return DosBudget(kappa=duty * period, tau_avg=1.0 / duty)


def gen_random_budgeted(
    budget: DosBudget,
    min_duration: float,
    seed: int,
    horizon: float,
    min_gap: float = 0.0,
) -> DosSequence:
    """Seeded random jamming that always satisfies the budget.

    Onset gaps are exponential, durations uniform in [min_duration,
    2*min_duration]. Any candidate that would break the budget at its own end
    is pushed to the earliest feasible onset instead. Raises GenerationError
    when not even one minimum-length interval can start before the horizon.
    """
    if not min_duration > 0.0:
        raise ValueError(f"min_duration must be positive, got {min_duration}")
    if min_gap < 0.0:
        raise ValueError(f"min_gap must be >= 0, got {min_gap}")
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    earliest_end = budget.tau_avg * (min_duration - budget.kappa)
    if earliest_end - min_duration >= horizon:
        raise GenerationError(
            f"min_duration {min_duration} infeasible: first interval could not "
            f"start before the horizon under budget (kappa={budget.kappa}, tau={budget.tau_avg})"
        )
    rng = np.random.default_rng(seed)
    mean_dur = 1.5 * min_duration
    gap_scale = max(mean_dur * (budget.tau_avg - 1.0), 0.25 * min_duration)
    cursor = 0.0
    jammed = 0.0
    out: list[tuple[float, float]] = []
    while True:
        h = cursor + min_gap + float(rng.exponential(gap_scale))
        d = min_duration * (1.0 + float(rng.uniform()))
        # earliest onset keeping xi(h + d) <= kappa + (h + d) / tau_avg
        h_feasible = budget.tau_avg * (jammed + d - budget.kappa) - d
        if h_feasible > h:
            h = h_feasible * (1.0 + 1e-12) + 1e-12
            h = max(h, cursor + min_gap)
        if h >= horizon:
            break
        out.append((h, d))
        jammed += d
        cursor = h + d
    return DosSequence(tuple(out))


def gen_greedy_adversary(
    budget: DosBudget,
    min_duration: float,
    attempt_times: Iterable[float],
) -> DosSequence:
    """Greedy attack: minimum-length intervals over as many attempts as the budget allows.

    Attempts are visited in time order; each still-uncovered attempt gets an
    interval starting right on it if the budget permits, otherwise it is
    skipped. May return an empty sequence when the budget is exhausted from
    the start.
    """
    if not min_duration > 0.0:
        raise ValueError(f"min_duration must be positive, got {min_duration}")
    times = sorted({float(t) for t in attempt_times})
    if any(t < 0.0 or not math.isfinite(t) for t in times):
        raise ValueError("attempt times must be finite and >= 0")
    out: list[tuple[float, float]] = []
    covered_end = -math.inf
    jammed = 0.0
    for t in times:
        if t < covered_end:
            continue
        end = t + min_duration
        if jammed + min_duration <= budget.bound(end) + _BUDGET_EPS * max(1.0, budget.bound(end)):
            out.append((t, min_duration))
            jammed += min_duration
            covered_end = end
    return DosSequence(tuple(out))


def dumps(seq: DosSequence, budget: DosBudget | None = None) -> str:
    """Serialize: one "onset duration" pair per line, optional budget header."""
    lines = []
    if budget is not None:
        lines.append(f"# kappa={budget.kappa!r} tau={budget.tau_avg!r}")
    for h, d in seq.intervals:
        lines.append(f"{h!r} {d!r}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> tuple[DosSequence, DosBudget | None]:
    """Parse the text format written by dumps; unknown comment lines are ignored."""
    budget: DosBudget | None = None
    pairs: list[tuple[float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER_RE.match(line)
            if m:
                budget = DosBudget(kappa=float(m.group(1)), tau_avg=float(m.group(2)))
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'onset duration', got {raw!r}")
        try:
            pairs.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return DosSequence(tuple(pairs)), budget


def save(path: str | Path, seq: DosSequence, budget: DosBudget | None = None) -> None:
    Path(path).write_text(dumps(seq, budget))


def load(path: str | Path) -> tuple[DosSequence, DosBudget | None]:
    return loads(Path(path).read_text())
