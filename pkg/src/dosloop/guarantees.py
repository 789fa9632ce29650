"""Closed-form stability certificates for loops under jamming.

Two certificate families are computed from plant envelopes and the jamming
budget (kappa, tau):

- trajectory certificates built from the decay/growth envelopes, in an ideal
  variant (updates resume the instant jamming stops) and a sampled variant
  (the jam windows are inflated by the worst attempt gap, delta_star, against
  the shortest interval, tau_star);
- a quadratic-form (Lyapunov) certificate built from P solving
  Phi^T P + P Phi + Q = 0.

Both produce global exponential bounds ||x(t)|| <= alpha exp(-beta t) ||x(0)||
with an explicit feasibility verdict. A product-form Gronwall bound with
impulsive amplification factors supports the trajectory family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dos import DosSequence, n_of_t
from .linalg import FloatArray, as_matrix, solve_lyapunov, spectral_norm
from .plant import LtiPlant

_RHO_STAR_EPS = 1e-12
_RHO_STAR_TOL = 1e-10


@dataclass(frozen=True)
class SamplingRobustness:
    """Attempt-gap bookkeeping: worst gap delta_star vs shortest interval tau_star.

    delta_per_interval optionally carries the measured worst gap inside each
    jam interval (same order as the sequence), enabling exact reconstruction
    of the inflated jam measure; when omitted, delta_star is used uniformly.
    """

    delta_star: float
    tau_star: float
    delta_per_interval: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not (self.delta_star >= 0.0 and not math.isnan(self.delta_star)):
            raise ValueError(f"delta_star must be >= 0, got {self.delta_star}")
        if not self.tau_star > 0.0:
            raise ValueError(f"tau_star must be > 0, got {self.tau_star}")
        if any(d < 0.0 for d in self.delta_per_interval):
            raise ValueError("per-interval gaps must be >= 0")

    @property
    def inflation(self) -> float:
        """Inflation factor 1 + delta_star / tau_star (exactly 1 when delta_star is 0)."""
        if self.delta_star == 0.0:
            return 1.0
        return 1.0 + self.delta_star / self.tau_star


IDEAL_ROBUSTNESS = SamplingRobustness(delta_star=0.0, tau_star=math.inf)


def rho_star(
    lam: float,
    omega2: float,
    sigma: float,
    theta: float,
    bk_norm: float,
    rho_floor: float = 0.0,
) -> float:
    """Smallest rate zeta >= rho_floor with omega_star(zeta) <= 1.

    omega_star(z) = omega2 [(1+sigma) + theta + theta (1+sigma) bk_norm / z] / (lam + z)
    is strictly decreasing for z > 0, so bracket expansion plus bisection
    (relative width 1e-10) finds the threshold; the upper bracket end is
    returned, keeping omega_star(rho_star) <= 1 by construction.
    """
    if not (lam > 0.0 and math.isfinite(lam)):
        raise ValueError(f"lam must be positive, got {lam}")
    for name, v in (("omega2", omega2), ("sigma", sigma), ("theta", theta), ("bk_norm", bk_norm), ("rho_floor", rho_floor)):
        if not (v >= 0.0 and math.isfinite(v)):
            raise ValueError(f"{name} must be finite and >= 0, got {v}")
    if omega2 == 0.0:
        return rho_floor
    theta1 = theta * (1.0 + sigma) * bk_norm

    def omega_star_at(z: float) -> float:
        extra = theta1 / z if theta1 > 0.0 else 0.0
        return omega2 * ((1.0 + sigma) + theta + extra) / (lam + z)

    lo = max(rho_floor, _RHO_STAR_EPS)
    if omega_star_at(lo) <= 1.0:
        return rho_floor
    hi = max(lo, lam)
    while omega_star_at(hi) > 1.0:
        hi *= 2.0
    while hi - lo > _RHO_STAR_TOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if omega_star_at(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class TrajectoryConstants:
    """Envelope-based certificate evaluated at a given (kappa, tau) budget."""

    mu: float
    lam: float
    theta: float
    rho: float
    sigma: float
    bk_norm: float
    omega2: float
    omega3: float
    theta1: float
    rho_star: float
    inflation: float
    kappa: float
    tau: float
    sigma_margin: float
    tau_min: float
    alpha: float
    beta: float
    sigma_feasible: bool
    feasible: bool

    def theta2_at(self, zeta: float) -> float:
        if self.theta1 == 0.0:
            return self.theta
        if not zeta > 0.0:
            raise ValueError(f"zeta must be positive, got {zeta}")
        return self.theta + self.theta1 / zeta

    def omega4_at(self, zeta: float) -> float:
        return self.omega2 * (1.0 + self.sigma) + self.omega2 * self.theta2_at(zeta)

    def omega_star_at(self, zeta: float) -> float:
        return self.omega4_at(zeta) / (self.lam + zeta)


def _trajectory_certificate(
    plant: LtiPlant,
    sigma: float,
    kappa: float,
    tau: float,
    inflation: float,
) -> TrajectoryConstants:
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not (kappa >= 0.0 and math.isfinite(kappa)):
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    if not (tau > 0.0 and math.isfinite(tau)):
        raise ValueError(f"tau must be positive, got {tau}")
    env = plant.decay
    gro = plant.growth
    bk_norm = spectral_norm(plant.bk)
    omega2 = env.mu * bk_norm
    omega3 = sigma * omega2
    theta1 = gro.theta * (1.0 + sigma) * bk_norm
    rs = rho_star(env.lam, omega2, sigma, gro.theta, bk_norm, gro.rho)
    margin = env.lam - sigma * env.mu * bk_norm
    sigma_feasible = margin > 0.0
    rate = (env.lam + rs) * inflation
    tau_min = rate / margin if sigma_feasible else math.inf
    alpha = env.mu * math.exp(kappa * rate)
    beta = margin - rate / tau
    feasible = sigma_feasible and tau > tau_min
    return TrajectoryConstants(
        mu=env.mu,
        lam=env.lam,
        theta=gro.theta,
        rho=gro.rho,
        sigma=sigma,
        bk_norm=bk_norm,
        omega2=omega2,
        omega3=omega3,
        theta1=theta1,
        rho_star=rs,
        inflation=inflation,
        kappa=kappa,
        tau=tau,
        sigma_margin=margin,
        tau_min=tau_min,
        alpha=alpha,
        beta=beta,
        sigma_feasible=sigma_feasible,
        feasible=feasible,
    )


def ges_certificate_ideal(plant: LtiPlant, sigma: float, kappa: float, tau: float) -> TrajectoryConstants:
    """Trajectory certificate assuming updates resume the instant jamming stops."""
    return _trajectory_certificate(plant, sigma, kappa, tau, inflation=1.0)


def ges_certificate_sampled(
    plant: LtiPlant,
    sigma: float,
    kappa: float,
    tau: float,
    robustness: SamplingRobustness,
) -> TrajectoryConstants:
    """Trajectory certificate under finite attempt rates.

    Every jam window is inflated by the worst attempt gap; all jam-time terms
    pick up the factor 1 + delta_star / tau_star. With delta_star = 0 this
    reduces exactly to ges_certificate_ideal.
    """
    return _trajectory_certificate(plant, sigma, kappa, tau, inflation=robustness.inflation)


@dataclass(frozen=True)
class LyapunovConstants:
    """Quadratic-form certificate from Phi^T P + P Phi + Q = 0."""

    P: FloatArray
    alpha1: float
    alpha2: float
    gamma1: float
    gamma2: float
    omega1: float
    omega2: float
    sigma: float
    kappa: float
    tau: float
    tau_min: float
    alpha: float
    beta: float
    sigma_feasible: bool
    feasible: bool


def ges_certificate_lyapunov(
    plant: LtiPlant,
    Q: FloatArray,
    sigma: float,
    kappa: float,
    tau: float,
) -> LyapunovConstants:
    """Lyapunov certificate at the given (sigma, kappa, tau).

    gamma1 is the decay margin of Q, gamma2 the gain of the cross term
    ||K^T B^T P + P B K||; feasibility of sigma requires gamma1 - sigma gamma2 > 0.
    V decays at rate omega1 outside jam windows and grows at most at omega2
    inside them, giving alpha = sqrt(exp(kappa (omega1 + omega2)) alpha2/alpha1)
    and beta = (omega1 - (omega1 + omega2)/tau) / 2.
    """
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not (kappa >= 0.0 and math.isfinite(kappa)):
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    if not (tau > 0.0 and math.isfinite(tau)):
        raise ValueError(f"tau must be positive, got {tau}")
    Qm = as_matrix(Q, "Q")
    P = solve_lyapunov(plant.phi, Qm)
    p_eigs = np.linalg.eigvalsh(P)
    alpha1, alpha2 = float(p_eigs[0]), float(p_eigs[-1])
    gamma1 = float(np.linalg.eigvalsh(Qm)[0])
    gamma2 = spectral_norm(plant.bk.T @ P + P @ plant.bk)
    sigma_feasible = gamma1 - sigma * gamma2 > 0.0
    omega1 = (gamma1 - gamma2 * sigma) / alpha2
    omega2 = gamma2 * (2.0 + sigma) / alpha1
    tau_min = (omega1 + omega2) / omega1 if sigma_feasible else math.inf
    alpha = math.sqrt(math.exp(kappa * (omega1 + omega2)) * alpha2 / alpha1)
    beta = 0.5 * (omega1 - (omega1 + omega2) / tau)
    feasible = sigma_feasible and tau > tau_min
    return LyapunovConstants(
        P=P,
        alpha1=alpha1,
        alpha2=alpha2,
        gamma1=gamma1,
        gamma2=gamma2,
        omega1=omega1,
        omega2=omega2,
        sigma=sigma,
        kappa=kappa,
        tau=tau,
        tau_min=tau_min,
        alpha=alpha,
        beta=beta,
        sigma_feasible=sigma_feasible,
        feasible=feasible,
    )


def measure_robustness(
    attempts: Iterable[float] | Iterable[tuple[float, bool]],
    seq: DosSequence,
) -> SamplingRobustness:
    """Measure delta_star / tau_star from a run's attempt times.

    For each jam interval, the worst gap between consecutive attempts whose
    *first* element falls inside it (an attempt with no successor contributes
    nothing: its gap is not observable). Intervals containing no attempt get
    gap 0. tau_star is the shortest interval duration, +inf for an empty
    sequence.
    """
    times: list[float] = []
    for a in attempts:
        if isinstance(a, (tuple, list)):
            times.append(float(a[0]))
        else:
            times.append(float(a))
    times.sort()
    per = [0.0] * len(seq)
    if len(seq) and len(times) >= 2:
        onsets = seq.onsets
        ends = seq.ends
        for k in range(len(times) - 1):
            t = times[k]
            idx = int(np.searchsorted(onsets, t, side="right")) - 1
            if idx >= 0 and t < ends[idx]:
                gap = times[k + 1] - t
                if gap > per[idx]:
                    per[idx] = gap
    delta_star = max(per, default=0.0)
    tau_star = float(np.min(seq.durations)) if len(seq) else math.inf
    return SamplingRobustness(delta_star=delta_star, tau_star=tau_star, delta_per_interval=tuple(per))


def _per_interval_gaps(seq: DosSequence, robustness: SamplingRobustness) -> Sequence[float]:
    if robustness.delta_per_interval:
        if len(robustness.delta_per_interval) != len(seq):
            raise ValueError(
                f"robustness carries {len(robustness.delta_per_interval)} per-interval gaps "
                f"for a sequence of {len(seq)} intervals"
            )
        return robustness.delta_per_interval
    return [robustness.delta_star] * len(seq)


def xi_bar_measure(seq: DosSequence, robustness: SamplingRobustness, t: float) -> float:
    """Inflated jammed time on [0, t]: each interval extended by its attempt gap."""
    n = n_of_t(seq, t)
    if n < 0:
        return 0.0
    gaps = _per_interval_gaps(seq, robustness)
    total = 0.0
    for k in range(n):
        total += float(seq.durations[k]) + gaps[k]
    total += min(float(seq.durations[n]) + gaps[n], t - float(seq.onsets[n]))
    return total


def dos_free_segments(
    seq: DosSequence,
    robustness: SamplingRobustness,
    horizon: float,
) -> list[tuple[float, float]]:
    """Maximal sub-intervals of [0, horizon] outside every inflated jam window."""
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    gaps = _per_interval_gaps(seq, robustness)
    windows: list[tuple[float, float]] = []
    for k in range(len(seq)):
        s = float(seq.onsets[k])
        e = float(seq.ends[k]) + gaps[k]
        if windows and s <= windows[-1][1]:
            windows[-1] = (windows[-1][0], max(windows[-1][1], e))
        else:
            windows.append((s, e))
    segments: list[tuple[float, float]] = []
    cursor = 0.0
    for s, e in windows:
        if s > horizon:
            break
        if s > cursor:
            segments.append((cursor, min(s, horizon)))
        cursor = max(cursor, e)
    if cursor < horizon:
        segments.append((cursor, horizon))
    return [(a, b) for a, b in segments if b > a]


def delta_n_of_t(lam: float, rho_star_value: float, tau_n_t: float) -> float:
    """Per-interval amplification factor exp((lam + rho_star) * elapsed) - 1."""
    if tau_n_t < 0.0:
        raise ValueError(f"tau_n_t must be >= 0, got {tau_n_t}")
    return math.expm1((lam + rho_star_value) * tau_n_t)


def gronwall_bound(
    omega1: float,
    omega2: float,
    ell0: float,
    impulse_points: Sequence[tuple[float, Callable[[float], float]]],
    t: float,
) -> float:
    """Product-form bound omega1 exp(omega2 (t - ell0)) prod (1 + delta_k(t)).

    Bounds any xi satisfying
    xi(t) <= omega1 + int_{ell0}^t omega2 xi(s) ds + sum_{ell0 < ell_k < t} delta_k(t) xi(ell_k)
    with nonnegative, nondecreasing delta_k. Only impulse points strictly
    inside (ell0, t) enter the product.
    """
    if not (omega1 >= 0.0 and math.isfinite(omega1)):
        raise ValueError(f"omega1 must be >= 0, got {omega1}")
    if not (omega2 >= 0.0 and math.isfinite(omega2)):
        raise ValueError(f"omega2 must be >= 0, got {omega2}")
    if t < ell0:
        raise ValueError(f"need t >= ell0, got t={t}, ell0={ell0}")
    prev = ell0
    for i, (ell, _) in enumerate(impulse_points):
        if i == 0:
            if ell < ell0:
                raise ValueError(f"impulse point {ell} precedes ell0={ell0}")
        elif ell <= prev:
            raise ValueError("impulse points must be strictly increasing")
        prev = ell
    out = omega1 * math.exp(omega2 * (t - ell0))
    for ell, delta in impulse_points:
        if ell0 < ell < t:
            d = float(delta(t))
            if d < 0.0:
                raise ValueError(f"delta_k(t) must be >= 0, got {d} at ell={ell}")
            out *= 1.0 + d
    return out


def format_report(values: Mapping[str, object]) -> str:
    """Flat "name = value" lines; floats keep full precision via repr."""
    lines = []
    for name, value in values.items():
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{name} = {text}")
    return "\n".join(lines) + "\n"
