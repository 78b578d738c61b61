"""Detection-rate model, secure bits per second, parameter sweeps, and
error-rate thresholds.

The detection rate follows the dead-time renewal model
``alpha = 1 / (T + tau*D/(xi_eff*mu))``: after each click the detector
is blind for T, then waits geometrically for the next click with
per-slot probability ``xi_eff*mu/D``.  ``xi_eff`` folds detector
efficiency, channel transmittance, and the monitor tap, so the formula
and the Monte Carlo describe the same system.
"""

from __future__ import annotations

from dataclasses import dataclass

from .channel import PhysicalParams
from .errors import InvalidArgumentError, NoThresholdError
from .security import eve_optimal_holevo, mutual_info_ab

__all__ = [
    "RatePoint",
    "SweepResult",
    "LinearNoise",
    "TableNoise",
    "detection_rate",
    "secure_rate",
    "sweep",
    "qber_threshold",
    "THRESHOLD_CONVENTION",
]

# Default convention for quoting error-rate thresholds, chosen because it
# brackets both reference endpoints (binary ~14.9%, sixteen-level ~4.9%
# per wrong slot) while keeping thresholds strictly decreasing in the
# dimension; see README.  The axis is the per-wrong-slot probability,
# evaluated in the vanishing-occupation limit at monitored visibility 0.9.
THRESHOLD_CONVENTION = {"mu": 1e-6, "visibility": 0.90, "axis": "per_slot"}

_THRESHOLD_TOL = 1e-4


@dataclass(frozen=True)
class RatePoint:
    """One evaluated operating point of the rate model."""

    d: int
    mu: float
    bits_per_detection: float
    alpha: float
    bits_per_second: float


@dataclass(frozen=True)
class SweepResult:
    grid: tuple
    optimum: RatePoint
    baseline_d2: RatePoint | None
    gain: float

    def best_for_dimension(self, d: int) -> RatePoint:
        pts = [p for p in self.grid if p.d == d]
        if not pts:
            raise InvalidArgumentError(f"no grid points with d={d}")
        return max(pts, key=lambda p: p.bits_per_second)


@dataclass(frozen=True)
class LinearNoise:
    """Constant per-wrong-slot error probability; total qudit error
    grows as (d-1)*q_slot."""

    q_slot: float
    visibility: float

    def q(self, d: int) -> float:
        return self.q_slot

    def v(self, d: int) -> float:
        return self.visibility


@dataclass(frozen=True)
class TableNoise:
    """User-supplied per-dimension (Q, V) pairs, for feeding measured
    channel data through the same pipeline."""

    table: dict

    def q(self, d: int) -> float:
        return self.table[d][0]

    def v(self, d: int) -> float:
        return self.table[d][1]


def detection_rate(
    d: int, mu: float, xi_eff: float, t_dead: float, tau: float
) -> float:
    """Detected qudits per second: ``1 / (t_dead + tau*d/(xi_eff*mu))``."""
    if mu <= 0.0 or xi_eff <= 0.0:
        raise InvalidArgumentError("mu and xi_eff must be positive")
    if tau <= 0.0 or d < 2 or t_dead < 0.0:
        raise InvalidArgumentError("require tau > 0, d >= 2, t_dead >= 0")
    if xi_eff * mu / d > 1.0:
        raise InvalidArgumentError("per-slot click probability exceeds 1")
    return 1.0 / (t_dead + tau * d / (xi_eff * mu))


def secure_rate(
    d: int, mu: float, q: float, visibility: float, phys: PhysicalParams
) -> RatePoint:
    """Compose the detection rate with the secure fraction."""
    report = eve_optimal_holevo(d, q, mu, visibility)
    alpha = detection_rate(d, mu, phys.xi_eff, phys.t_dead, phys.tau)
    per_detection = report.i_ab
    return RatePoint(
        d=d,
        mu=mu,
        bits_per_detection=per_detection,
        alpha=alpha,
        bits_per_second=max(alpha * per_detection, 0.0),
    )


def sweep(dimensions, mu_grid, noise, phys: PhysicalParams) -> SweepResult:
    """Evaluate the rate on the (d, mu) grid and locate the optimum.

    ``gain`` is the optimum rate over the best d=2 rate; NaN when the
    grid has no d=2 points.
    """
    dimensions = list(dimensions)
    mu_grid = list(mu_grid)
    if not dimensions or not mu_grid:
        raise InvalidArgumentError("empty sweep grid")
    grid = []
    for d in dimensions:
        q = noise.q(d)
        v = noise.v(d)
        for mu in mu_grid:
            grid.append(secure_rate(d, mu, q, v, phys))
    optimum = max(grid, key=lambda p: p.bits_per_second)
    d2_points = [p for p in grid if p.d == 2]
    baseline = max(d2_points, key=lambda p: p.bits_per_second) if d2_points else None
    if baseline is not None and baseline.bits_per_second > 0.0:
        gain = optimum.bits_per_second / baseline.bits_per_second
    else:
        gain = float("nan")
    return SweepResult(
        grid=tuple(grid), optimum=optimum, baseline_d2=baseline, gain=gain
    )


def _secure_fraction_at_total_error(d, e_total, mu, visibility):
    return eve_optimal_holevo(d, e_total / (d - 1), mu, visibility).i_ab


def qber_threshold(d: int, mu: float, visibility: float) -> float:
    """Largest total qudit error rate with a positive secure fraction.

    Bisection over e in [0, 1-1/d) to absolute tolerance 1e-4.  Raises
    :class:`NoThresholdError` when even a noiseless channel yields no
    key.  Divide by (d-1) for the per-wrong-slot convention.
    """
    if d < 2:
        raise InvalidArgumentError(f"d={d} must be >= 2")
    e_hi = 1.0 - 1.0 / d
    if _secure_fraction_at_total_error(d, 0.0, mu, visibility) <= 0.0:
        raise NoThresholdError(
            f"no positive secure fraction at zero error for d={d}, mu={mu}, "
            f"visibility={visibility}"
        )
    lo, hi = 0.0, e_hi - 1e-12
    if _secure_fraction_at_total_error(d, hi, mu, visibility) > 0.0:
        return hi
    while hi - lo > _THRESHOLD_TOL:
        mid = 0.5 * (lo + hi)
        if _secure_fraction_at_total_error(d, mid, mu, visibility) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
