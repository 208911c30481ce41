"""EMA parameter blending and the burn-in/burn-up phase controller.

The adaptation run starts with a burn-in stage (supervised warm-up), then a
burn-up stage where pseudo-labels drive learning.  Band mining switches on
at a configurable fraction of burn-up progress and threshold adaptation at
a later fraction; both gate boundaries are inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, slots=True)
class PhasePlan:
    """Stage lengths, gate fractions, and the EMA coefficient for one run.

    Iteration counts scale freely (desk-scale runs use small values); the
    gate fractions are relative to burn-up progress.
    """

    burn_in_iters: int = 50_000
    burn_up_iters: int = 50_000
    ptc_gate_frac: float = 0.4
    ait_gate_frac: float = 0.6
    ema_alpha: float = 0.9996

    def __post_init__(self) -> None:
        if self.burn_in_iters < 0 or self.burn_up_iters < 1:
            raise ValidationError(
                f"need burn_in_iters >= 0 and burn_up_iters >= 1, got "
                f"{self.burn_in_iters}, {self.burn_up_iters}"
            )
        if not (0.0 <= self.ptc_gate_frac <= self.ait_gate_frac <= 1.0):
            raise ValidationError(
                f"need 0 <= ptc_gate_frac <= ait_gate_frac <= 1, got "
                f"{self.ptc_gate_frac}, {self.ait_gate_frac}"
            )
        if not (0.0 < self.ema_alpha < 1.0):
            raise ValidationError(f"ema_alpha must be in (0, 1), got {self.ema_alpha}")

    @property
    def total_iters(self) -> int:
        return self.burn_in_iters + self.burn_up_iters


@dataclass(frozen=True, slots=True)
class PhaseFlags:
    in_burn_up: bool
    ptc_enabled: bool
    ait_enabled: bool


def phase_at(plan: PhasePlan, iteration: int) -> PhaseFlags:
    """Phase flags at an iteration; once on, a flag never turns off."""
    if iteration < 0:
        raise ValidationError(f"iteration must be >= 0, got {iteration}")
    in_burn_up = iteration >= plan.burn_in_iters
    if not in_burn_up:
        return PhaseFlags(False, False, False)
    progress = (iteration - plan.burn_in_iters) / plan.burn_up_iters
    return PhaseFlags(
        in_burn_up=True,
        ptc_enabled=progress >= plan.ptc_gate_frac,
        ait_enabled=progress >= plan.ait_gate_frac,
    )


def ema_update(teacher, student, alpha: float):
    """Elementwise ``alpha * teacher + (1 - alpha) * student``.

    Accepts scalars or equally shaped arrays; scalars come back as floats.
    """
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    t = np.asarray(teacher, dtype=np.float64)
    s = np.asarray(student, dtype=np.float64)
    if t.shape != s.shape:
        raise ValidationError(
            f"parameter dimension mismatch: {t.shape} vs {s.shape}"
        )
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(s))):
        raise ValidationError("parameters must be finite")
    # difference form of alpha*t + (1-alpha)*s: keeps t == s an exact fixed point
    out = s + alpha * (t - s)
    if np.isscalar(teacher) or np.ndim(teacher) == 0:
        return float(out)
    return out
