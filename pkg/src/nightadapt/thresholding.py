"""Adaptive classification-threshold updates from matched-proposal confidences.

Each update pulls the live threshold toward ``mu - 2*sigma`` of the matched
confidences above their median, scaled by a decay factor, and clamps the
result into ``[floor, 1]``.  With a stationary confidence distribution the
threshold converges geometrically to that target.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import ValidationError


@dataclass(frozen=True, slots=True)
class ThresholdUpdate:
    """One history row: the threshold after a step and the stats that drove it."""

    iteration: int
    tau: float
    mu: float
    sigma: float


@dataclass(slots=True)
class ThresholdState:
    """The live classification threshold and its update bookkeeping.

    ``history`` is append-only with strictly increasing iterations; steps
    are sequential by contract (single writer).
    """

    tau: float = 0.8
    gamma: float = 0.05
    floor: float = 0.25
    history: list[ThresholdUpdate] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not (0.0 <= self.floor <= self.tau <= 1.0):
            raise ValidationError(
                f"need 0 <= floor <= tau <= 1, got floor={self.floor}, tau={self.tau}"
            )
        if not (0.0 <= self.gamma <= 1.0):
            raise ValidationError(f"gamma must be in [0, 1], got {self.gamma}")
        last = None
        for row in self.history:
            if last is not None and row.iteration <= last:
                raise ValidationError("history iterations must be strictly increasing")
            last = row.iteration


def matched_confidence_stats(matched: Sequence[float]) -> tuple[float, float] | None:
    """Mean and population std of the confidences strictly above their median.

    Returns ``None`` for empty input (the no-update condition).  When no
    value lies strictly above the median (all equal), returns
    ``(median, 0.0)``.
    """
    if not matched:
        return None
    med = statistics.median(matched)
    above = [c for c in matched if c > med]
    if not above:
        return float(med), 0.0
    mu = statistics.fmean(above)
    sigma = statistics.pstdev(above, mu=mu)
    return mu, sigma


def update_threshold(
    state: ThresholdState, matched: Sequence[float], iteration: int
) -> ThresholdState:
    """One threshold step; returns a new state with the history extended.

    ``new_tau = clamp(tau + gamma * ((mu - 2*sigma) - tau), floor, 1)``.
    On the no-update condition the threshold is unchanged and the history
    row carries NaN stats.
    """
    if state.history and iteration <= state.history[-1].iteration:
        raise ValidationError(
            f"iteration {iteration} not greater than last recorded "
            f"{state.history[-1].iteration}"
        )
    stats = matched_confidence_stats(matched)
    if stats is None:
        mu = sigma = math.nan
        new_tau = state.tau
    else:
        mu, sigma = stats
        target = mu - 2.0 * sigma
        new_tau = state.tau + state.gamma * (target - state.tau)
        new_tau = min(1.0, max(state.floor, new_tau))
    row = ThresholdUpdate(iteration=iteration, tau=new_tau, mu=mu, sigma=sigma)
    return replace(state, tau=new_tau, history=state.history + [row])


def history_rows(state: ThresholdState) -> list[tuple[int, float, float, float]]:
    """History as plain tuples (iteration, tau, mu, sigma) for CSV export."""
    return [(r.iteration, r.tau, r.mu, r.sigma) for r in state.history]
