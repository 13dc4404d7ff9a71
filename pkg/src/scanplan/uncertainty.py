"""Tolerance to uncertainty budgets, and the incident-angle curve.

The expanded uncertainty k * sqrt(U_sen^2 + U_mat^2 + U_rot^2) must not
exceed T/8, where T is the tolerance interval. Solving for U_sen gives the
sensor budget; inverting the monotone curve U_sen = f(alpha) gives the
largest admissible incident angle.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import (
    InfeasibleBudgetError,
    InfeasibleToleranceError,
    OutOfValidityError,
)

DEFAULT_CURVE_DEG = ((0.0, 0.04), (20.0, 0.05), (40.0, 0.07), (60.0, 0.10), (75.0, 0.19))
DEFAULT_K = 2.0
DEFAULT_U_MAT = 0.01
DEFAULT_U_ROT = 0.01


@dataclass(frozen=True)
class SensorUncertaintyCurve:
    """Piecewise-linear U_sen(alpha); valid on [0, alpha_limit]."""

    angles: tuple
    values: tuple

    def __post_init__(self):
        a = tuple(float(x) for x in self.angles)
        u = tuple(float(x) for x in self.values)
        if len(a) != len(u) or len(a) < 2:
            raise ValueError("curve needs at least two (angle, value) knots")
        if a[0] != 0.0:
            raise ValueError("first knot must sit at normal incidence (angle 0)")
        if any(y <= x for x, y in zip(a, a[1:])):
            raise ValueError("knot angles must be strictly increasing")
        if any(y <= x for x, y in zip(u, u[1:])):
            raise ValueError("knot values must be strictly increasing")
        if a[-1] >= math.pi / 2:
            raise ValueError("curve must end below 90 degrees")
        if u[0] <= 0:
            raise ValueError("uncertainty values must be positive")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "values", u)

    @classmethod
    def from_degrees(cls, knots: Sequence[Sequence[float]]) -> "SensorUncertaintyCurve":
        return cls(tuple(math.radians(k[0]) for k in knots), tuple(k[1] for k in knots))

    @classmethod
    def default(cls) -> "SensorUncertaintyCurve":
        return cls.from_degrees(DEFAULT_CURVE_DEG)

    @property
    def alpha_limit(self) -> float:
        return self.angles[-1]

    def scaled(self, factor: float) -> "SensorUncertaintyCurve":
        return SensorUncertaintyCurve(self.angles, tuple(v * factor for v in self.values))


def sensor_uncertainty_at(curve: SensorUncertaintyCurve, alpha: float) -> float:
    a = curve.angles
    if alpha < 0 or alpha > curve.alpha_limit:
        raise OutOfValidityError(
            f"incident angle {math.degrees(alpha):.3f} deg outside "
            f"[0, {math.degrees(curve.alpha_limit):.3f}] deg"
        )
    i = bisect.bisect_right(a, alpha) - 1
    if i >= len(a) - 1:
        return curve.values[-1]
    t = (alpha - a[i]) / (a[i + 1] - a[i])
    return curve.values[i] + t * (curve.values[i + 1] - curve.values[i])


def budget_from_tolerance(T: float, k: float = DEFAULT_K, u_mat: float = DEFAULT_U_MAT,
                          u_rot: float = DEFAULT_U_ROT) -> float:
    """Largest sensor uncertainty that keeps k*U_ad within T/8."""
    if not T > 0:
        raise ValueError("tolerance must be positive")
    if not k > 0 or u_mat < 0 or u_rot < 0:
        raise ValueError("k must be positive and U_mat, U_rot non-negative")
    head = (T / (8.0 * k)) ** 2
    rest = u_mat ** 2 + u_rot ** 2
    if head <= rest:
        raise InfeasibleToleranceError(
            f"tolerance {T} mm is unachievable: T/(8k) = {T / (8 * k):.6g} mm "
            f"is already consumed by material and robot uncertainty"
        )
    return math.sqrt(head - rest)


def max_incident_angle(budget: float, curve: SensorUncertaintyCurve) -> float:
    """Largest angle whose curve value stays within ``budget``."""
    u = curve.values
    if budget < u[0]:
        raise InfeasibleBudgetError(
            f"sensor budget {budget:.6g} mm is below the curve minimum {u[0]:.6g} mm"
        )
    if budget >= u[-1]:
        return curve.alpha_limit
    i = bisect.bisect_right(u, budget) - 1
    a = curve.angles
    t = (budget - u[i]) / (u[i + 1] - u[i])
    return a[i] + t * (a[i + 1] - a[i])


def combined_uncertainty(u_sen: float, u_mat: float = 0.0, u_rot: float = 0.0) -> float:
    return math.sqrt(u_sen ** 2 + u_mat ** 2 + u_rot ** 2)


def expanded_uncertainty(u_sen: float, k: float, u_mat: float, u_rot: float) -> float:
    return k * combined_uncertainty(u_sen, u_mat, u_rot)


@dataclass(frozen=True)
class UncertaintyBudget:
    tolerance: float
    k: float
    u_mat: float
    u_rot: float
    u_sen_max: float
    alpha_max: float

    @classmethod
    def derive(cls, T: float, curve: SensorUncertaintyCurve, k: float = DEFAULT_K,
               u_mat: float = DEFAULT_U_MAT, u_rot: float = DEFAULT_U_ROT) -> "UncertaintyBudget":
        u_sen_max = budget_from_tolerance(T, k, u_mat, u_rot)
        return cls(T, k, u_mat, u_rot, u_sen_max, max_incident_angle(u_sen_max, curve))

    def complies(self, u_sen: float, slack: float = 1e-9) -> bool:
        return expanded_uncertainty(u_sen, self.k, self.u_mat, self.u_rot) <= self.tolerance / 8.0 + slack
