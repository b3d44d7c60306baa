"""Reference chains used throughout the experiments."""

from __future__ import annotations

import cmath
import math

from .highprec import locate_exceptional_point
from .model import OUTGOING, ResonatorArray, make_array
from .skin import PeriodicCell

__all__ = [
    "THETA_C",
    "unit_dimer",
    "mismatched_dimer",
    "trimer",
    "radiation_dimer",
    "radiation_lambda",
    "pt_dimer",
    "skin_cell",
    "tune_trimer_ep",
    "tune_radiation_ep",
]

# smaller root of -1 + 6 theta - theta^2
THETA_C = 3.0 - 2.0 * math.sqrt(2.0)


def unit_dimer(delta: float = 0.1) -> ResonatorArray:
    return make_array([1.0, 1.0], [1.0], delta=delta)


def mismatched_dimer(delta: float = 0.1, l2: float = 1.1) -> ResonatorArray:
    return make_array([1.0, l2], [1.0], delta=delta)


def trimer(theta: float, delta: float, l1: float = 1.0) -> ResonatorArray:
    """Speeds ``(e^{i theta}, 1, e^{-i theta})``, unit lengths and gaps."""
    return make_array(
        [l1, 1.0, 1.0], [1.0, 1.0],
        speeds=[cmath.exp(1j * theta), 1.0, cmath.exp(-1j * theta)],
        delta=delta,
    )


def radiation_dimer(theta: float = THETA_C, delta: float = 1e-4, s: float = 0.5) -> ResonatorArray:
    """``l_1 = v_1 = theta``, ``l_2 = v_2 = 1``; both resonators tuned to ``pi``."""
    return make_array([theta, 1.0], [s], speeds=[theta, 1.0], delta=delta)


def radiation_lambda(theta: float) -> tuple[complex, complex]:
    """Roots of ``(pi/theta) x^2 + i pi (1 + 1/theta) x - 2 pi`` (leading shifts)."""
    a = math.pi / theta
    b = 1j * math.pi * (1 + 1 / theta)
    c = -2 * math.pi
    disc = cmath.sqrt(b * b - 4 * a * c)
    return ((-b - disc) / (2 * a), (-b + disc) / (2 * a))


def pt_dimer(s: float = 1.5, delta: float = 1e-2) -> ResonatorArray:
    return make_array([1.0, 1.0], [s], delta=delta)


def skin_cell(gamma: float = 1.0, delta: float = 0.1, ell: float = 1.0, s: float = 1.0) -> PeriodicCell:
    return PeriodicCell(make_array([ell], [s], delta=delta, gauges=[gamma]))


def tune_trimer_ep(delta: float, theta0: float = math.pi / 4, l1: float = 1.0):
    """Exact double zero near ``sqrt(delta)`` by adjusting ``(theta, l_1)``.

    Returns ``(omega, theta, l1)``.
    """
    w0 = complex(math.sqrt(delta), 0.5 * delta)
    w, (th, ell) = locate_exceptional_point(
        lambda th, ell: trimer(th, delta, ell), w0, (theta0, l1), OUTGOING
    )
    return w, th, ell


def tune_radiation_ep(delta: float, theta0: float = THETA_C, s: float = 0.5):
    """Exact double zero near ``pi + lambda delta`` by adjusting ``(theta, s)``.

    Returns ``(omega, theta, s)``.
    """
    lam = radiation_lambda(theta0)[0]
    w, (th, sp) = locate_exceptional_point(
        lambda th, sp: radiation_dimer(th, delta, sp), math.pi + lam * delta, (theta0, s), OUTGOING
    )
    return w, th, sp
