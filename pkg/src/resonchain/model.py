"""Resonator-chain configurations and radiation-condition closures.

A :class:`ResonatorArray` describes ``N`` disjoint resonators on the real
line, separated by gaps of background material.  Everything else in the
package consumes this one object.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    MixedGaugeComplexSpeed,
    NegativeContrast,
    NonPositiveLength,
    NonPositiveSpacing,
    ZeroSpeed,
)

__all__ = [
    "ResonatorArray",
    "RadiationCondition",
    "OutgoingBoth",
    "PerfectTransmission",
    "LeftAngle",
    "OUTGOING",
    "PERFECT_TRANSMISSION",
    "validate",
    "extremities",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "radiation_from_json",
    "radiation_to_json",
]


@dataclass(frozen=True)
class ResonatorArray:
    """Geometry and material data of a one-dimensional resonator chain.

    Parameters
    ----------
    lengths : tuple of float
        Resonator lengths ``l_i``.
    spacings : tuple of float
        Gaps ``s_1 .. s_{N-1}`` between consecutive resonators, optionally
        followed by a trailing spacing ``s_N >= 0`` after the last resonator.
    speeds_inside : tuple of complex
        Wave speeds ``v_i`` inside the resonators (may be complex).
    speed_background : float
        Background wave speed ``v > 0``.
    contrast : float
        Density contrast ``delta``.
    gauges : tuple of float
        Imaginary gauge potentials ``gamma_i`` (default all zero).
    left_anchor : float
        Position of the left edge of the first resonator.
    """

    lengths: tuple[float, ...]
    spacings: tuple[float, ...]
    speeds_inside: tuple[complex, ...]
    speed_background: float = 1.0
    contrast: float = 0.1
    gauges: tuple[float, ...] | None = None
    left_anchor: float = 0.0

    def __post_init__(self):
        n = len(self.lengths)
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        spacings = tuple(float(x) for x in self.spacings)
        if len(spacings) == max(n - 1, 0):
            spacings = spacings + (0.0,)
        object.__setattr__(self, "spacings", spacings)
        object.__setattr__(self, "speeds_inside", tuple(complex(x) for x in self.speeds_inside))
        gauges = self.gauges
        if gauges is None:
            gauges = (0.0,) * n
        object.__setattr__(self, "gauges", tuple(float(g) for g in gauges))
        for name in ("speed_background", "contrast", "left_anchor"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if len(self.spacings) != n:
            raise ConfigError(
                f"expected {n - 1} or {n} spacings for {n} resonators, got {len(self.spacings)}"
            )
        if len(self.speeds_inside) != n or len(self.gauges) != n:
            raise ConfigError("lengths, speeds_inside and gauges must have equal length")

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def trailing_spacing(self) -> float:
        return self.spacings[-1]

    @property
    def has_gauge(self) -> bool:
        return any(g != 0.0 for g in self.gauges)

    @property
    def speed_ratios(self) -> np.ndarray:
        """``r_i = v / v_i``."""
        return self.speed_background / np.asarray(self.speeds_inside)

    @property
    def total_length(self) -> float:
        """Support length including the trailing spacing."""
        return float(sum(self.lengths) + sum(self.spacings))

    def with_contrast(self, delta: float) -> "ResonatorArray":
        return replace(self, contrast=float(delta))

    def with_trailing_spacing(self, s_last: float) -> "ResonatorArray":
        return replace(self, spacings=self.spacings[:-1] + (float(s_last),))

    def digest(self) -> str:
        payload = json.dumps(config_to_dict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class OutgoingBoth:
    """Outgoing radiation on both sides of the chain."""

    def left_vector(self, omega, v: float = 1.0):
        omega = np.asarray(omega, dtype=complex)
        return np.ones_like(omega), -1j * omega / v

    def left_vector_derivative(self, omega, v: float = 1.0):
        omega = np.asarray(omega, dtype=complex)
        return np.zeros_like(omega), np.full_like(omega, -1j / v)


@dataclass(frozen=True)
class PerfectTransmission:
    """Incoming-only radiation on the left edge: the PT-symmetric closure."""

    def left_vector(self, omega, v: float = 1.0):
        omega = np.asarray(omega, dtype=complex)
        return np.ones_like(omega), 1j * omega / v

    def left_vector_derivative(self, omega, v: float = 1.0):
        omega = np.asarray(omega, dtype=complex)
        return np.zeros_like(omega), np.full_like(omega, 1j / v)


@dataclass(frozen=True)
class LeftAngle:
    """Left closure ``cos(theta) (1, i w/v) + sin(theta) (1, -i w/v)``.

    ``theta = 0`` is perfect transmission, ``theta = pi/2`` is outgoing.
    """

    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % (2.0 * math.pi))

    def left_vector(self, omega, v: float = 1.0):
        omega = np.asarray(omega, dtype=complex)
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.full_like(omega, c + s), 1j * omega / v * (c - s)

    def left_vector_derivative(self, omega, v: float = 1.0):
        omega = np.asarray(omega, dtype=complex)
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.zeros_like(omega), np.full_like(omega, 1j / v * (c - s))


RadiationCondition = OutgoingBoth | PerfectTransmission | LeftAngle

OUTGOING = OutgoingBoth()
PERFECT_TRANSMISSION = PerfectTransmission()


def right_vector(omega, v: float = 1.0):
    """Outgoing right closure ``(1, i w / v)``, shared by every condition."""
    omega = np.asarray(omega, dtype=complex)
    return np.ones_like(omega), 1j * omega / v


def right_vector_derivative(omega, v: float = 1.0):
    omega = np.asarray(omega, dtype=complex)
    return np.zeros_like(omega), np.full_like(omega, 1j / v)


def validate(config: ResonatorArray) -> None:
    """Raise the first violated invariant of ``config``; return None if valid."""
    if config.n < 1:
        raise NonPositiveLength("a chain needs at least one resonator")
    for i, ell in enumerate(config.lengths, 1):
        if not ell > 0:
            raise NonPositiveLength(f"length of resonator {i} is {ell}, must be > 0")
    for i, s in enumerate(config.spacings[:-1], 1):
        if not s > 0:
            raise NonPositiveSpacing(f"spacing {i} is {s}, must be > 0")
    if not config.trailing_spacing >= 0:
        raise NonPositiveSpacing(f"trailing spacing is {config.trailing_spacing}, must be >= 0")
    if not config.speed_background > 0:
        raise ZeroSpeed(f"background speed {config.speed_background} must be > 0")
    for i, vi in enumerate(config.speeds_inside, 1):
        if vi == 0:
            raise ZeroSpeed(f"speed inside resonator {i} is zero")
    if not config.contrast >= 0:
        raise NegativeContrast(f"contrast {config.contrast} must be >= 0")
    if config.has_gauge:
        for i, vi in enumerate(config.speeds_inside, 1):
            if vi.imag != 0 or vi.real <= 0:
                raise MixedGaugeComplexSpeed(
                    f"gauge potentials need real positive speeds; v_{i} = {vi}"
                )


def extremities(config: ResonatorArray) -> list[tuple[float, float]]:
    """Return ``[(x_i^L, x_i^R)]`` for every resonator."""
    out = []
    x = config.left_anchor
    for ell, s in zip(config.lengths, config.spacings):
        out.append((x, x + ell))
        x = x + ell + s
    return out


def _parse_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError(f"complex entries are [re, im] pairs, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    return complex(float(value))


def radiation_from_json(value) -> RadiationCondition:
    if value is None or value == "outgoing":
        return OUTGOING
    if value == "perfect_transmission":
        return PERFECT_TRANSMISSION
    if isinstance(value, dict) and "left_angle" in value:
        return LeftAngle(float(value["left_angle"]))
    raise ConfigError(f"unknown radiation condition {value!r}")


def radiation_to_json(rc: RadiationCondition):
    if isinstance(rc, OutgoingBoth):
        return "outgoing"
    if isinstance(rc, PerfectTransmission):
        return "perfect_transmission"
    return {"left_angle": rc.theta}


def config_from_dict(data: dict) -> tuple[ResonatorArray, RadiationCondition]:
    """Build a validated config and radiation condition from parsed JSON."""
    try:
        lengths = [float(x) for x in data["lengths"]]
        speeds = [_parse_complex(x) for x in data["speeds_inside"]]
        config = ResonatorArray(
            lengths=tuple(lengths),
            spacings=tuple(float(x) for x in data.get("spacings", [])),
            speeds_inside=tuple(speeds),
            speed_background=float(data.get("speed_background", 1.0)),
            contrast=float(data["contrast"]),
            gauges=tuple(float(x) for x in data["gauges"]) if data.get("gauges") else None,
            left_anchor=float(data.get("left_anchor", 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    validate(config)
    return config, radiation_from_json(data.get("radiation"))


def config_to_dict(config: ResonatorArray, rc: RadiationCondition | None = None) -> dict:
    data = {
        "lengths": list(config.lengths),
        "spacings": list(config.spacings),
        "speeds_inside": [[v.real, v.imag] for v in config.speeds_inside],
        "speed_background": config.speed_background,
        "contrast": config.contrast,
        "gauges": list(config.gauges),
        "left_anchor": config.left_anchor,
    }
    if rc is not None:
        data["radiation"] = radiation_to_json(rc)
    return data


def load_config(path) -> tuple[ResonatorArray, RadiationCondition]:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def make_array(
    lengths: Sequence[float],
    spacings: Sequence[float],
    speeds: Sequence[complex] | complex = 1.0,
    v: float = 1.0,
    delta: float = 0.1,
    gauges: Sequence[float] | float | None = None,
    left_anchor: float = 0.0,
) -> ResonatorArray:
    """Convenience constructor broadcasting scalar speeds and gauges."""
    n = len(lengths)
    if np.isscalar(speeds):
        speeds = [speeds] * n
    if gauges is not None and np.isscalar(gauges):
        gauges = [gauges] * n
    return ResonatorArray(
        lengths=tuple(lengths),
        spacings=tuple(spacings),
        speeds_inside=tuple(speeds),
        speed_background=v,
        contrast=delta,
        gauges=None if gauges is None else tuple(gauges),
        left_anchor=left_anchor,
    )

