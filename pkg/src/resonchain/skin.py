"""Periodic gauge chains: bands, quasimomentum and skin-effect envelopes.

A unit cell of ``N`` resonators on ``[0, L]`` (with a trailing gap) is
replicated ``M`` times.  The symmetrised cell matrix has unit determinant and
eigenvalues ``exp(+-ik)``; real ``k`` marks the bands.  Resonant modes of the
finite replicated chain are localised at the left edge with envelope
``exp(-Gamma(x))``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, OutOfBand
from .model import ResonatorArray, extremities
from .propagation import ModeTrace, symmetrised_total

__all__ = [
    "PeriodicCell",
    "BandDiagnostics",
    "EnvelopeReport",
    "replicate",
    "cell_matrix",
    "quasimomentum",
    "band_scan",
    "gamma_profile",
    "envelope_report",
    "damping_diagnostics",
    "bands_to_json",
]

BAND_TOL = 1e-10


@dataclass(frozen=True)
class PeriodicCell:
    """Unit cell anchored at 0 with a strictly positive trailing spacing."""

    unit: ResonatorArray

    def __post_init__(self):
        if not self.unit.trailing_spacing > 0:
            raise ConfigError("a periodic cell needs a positive trailing spacing s_N")
        if self.unit.left_anchor != 0.0:
            object.__setattr__(self, "unit", replace(self.unit, left_anchor=0.0))

    @property
    def period(self) -> float:
        return self.unit.total_length


@dataclass(frozen=True)
class BandDiagnostics:
    omega: float
    trace: float
    k: complex
    in_band: bool


def replicate(cell: PeriodicCell, m: int) -> ResonatorArray:
    """Tile the cell ``m`` times to the right; the last trailing gap is dropped."""
    if m < 1:
        raise ValueError("M must be >= 1")
    u = cell.unit
    spacings = list(u.spacings) * m
    spacings[-1] = 0.0
    return ResonatorArray(
        lengths=u.lengths * m,
        spacings=tuple(spacings),
        speeds_inside=u.speeds_inside * m,
        speed_background=u.speed_background,
        contrast=u.contrast,
        gauges=u.gauges * m,
        left_anchor=0.0,
    )


def cell_matrix(omega, cell: PeriodicCell) -> np.ndarray:
    """Symmetrised product over one period, trailing gap included."""
    return symmetrised_total(omega, cell.unit)


def quasimomentum(omega, cell: PeriodicCell) -> complex:
    """``k`` with ``2 cos k = trace`` and ``Re k`` in ``[0, pi]``.

    On the band-gap lines ``Re k = 0`` or ``pi`` the sign of ``Im k`` is chosen
    so that ``|exp(ik)| <= 1``.
    """
    tr = complex(np.trace(cell_matrix(complex(omega), cell)))
    k = complex(np.arccos(tr / 2))
    on_edge_line = abs(k.real) <= 1e-12 or abs(k.real - math.pi) <= 1e-12
    if on_edge_line and k.imag < 0:
        k = complex(k.real, -k.imag)
    return k


def _trace(omega, cell):
    m = cell_matrix(np.asarray(omega, dtype=complex), cell)
    return np.trace(m, axis1=-2, axis2=-1)


def band_scan(cell: PeriodicCell, omega_range: tuple[float, float], samples: int = 1000):
    """Sample the trace over a real interval and extract the bands.

    Returns ``(diagnostics, bands)`` where ``bands`` lists maximal in-band
    intervals ``(a_j, b_j)``; interior edges are roots of ``|trace| - 2``
    located by Brent's method.
    """
    if samples < 100:
        raise ValueError("band_scan needs at least 100 samples")
    lo, hi = map(float, omega_range)
    grid = np.linspace(lo, hi, samples)
    tr = _trace(grid, cell).real
    inside = np.abs(tr) <= 2 + BAND_TOL
    diags = []
    for w, t, ib in zip(grid, tr, inside):
        diags.append(BandDiagnostics(float(w), float(t), quasimomentum(w, cell), bool(ib)))

    def g(w):
        return abs(_trace(w, cell).real) - 2

    bands = []
    start = lo if inside[0] else None
    for i in range(1, samples):
        if inside[i] == inside[i - 1]:
            continue
        edge = brentq(g, grid[i - 1], grid[i], xtol=1e-14, rtol=4 * np.finfo(float).eps)
        if inside[i]:
            start = edge
        else:
            bands.append((start, edge))
            start = None
    if start is not None:
        bands.append((start, hi))
    return diags, bands


def bands_to_json(bands) -> str:
    return json.dumps([{"a": a, "b": b} for a, b in bands])


def gamma_profile(x, config: ResonatorArray):
    """``Gamma(x) = int_0^x gamma``, piecewise linear with slope ``gamma_i`` in ``D_i``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for (xl, xr), g in zip(extremities(config), config.gauges):
        if g != 0.0:
            out = out + g * (np.clip(x, xl, xr) - np.clip(0.0, xl, xr))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EnvelopeReport:
    """Per-cell maxima of a mode and their ``exp(Gamma)``-rescaled ratios."""

    cell_maxima: tuple[float, ...]
    gamma_at_cell: tuple[float, ...]
    envelope_ratios: tuple[float, ...]
    slope: float
    intercept: float
    ratio_spread: float

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell", "log_cell_max", "gamma_at_cell", "envelope_ratio"])
        for m, (c, g, r) in enumerate(zip(self.cell_maxima, self.gamma_at_cell,
                                          self.envelope_ratios)):
            w.writerow([m, f"{math.log(c):.16e}", f"{g:.16e}", f"{r:.16e}"])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def envelope_report(mode: ModeTrace, cell: PeriodicCell, m: int,
                    check_band: bool = True) -> EnvelopeReport:
    """Measure the decay of ``mode`` cell by cell.

    The slope is the least-squares slope of ``log max |u|`` against the cell
    index; ``ratio_spread`` is ``max r / min r`` over cells ``1 .. M-1`` with
    ``r_m = max |u| exp(Gamma(m L))``.
    """
    if check_band:
        tr = complex(np.trace(cell_matrix(complex(mode.omega.real), cell)))
        if abs(tr.real) > 2 + BAND_TOL:
            raise OutOfBand(f"Re omega = {mode.omega.real} lies in a band gap (trace {tr.real})")
    period = cell.period
    config = replicate(cell, m)
    idx = np.clip(np.floor(mode.xs / period + 1e-12).astype(int), 0, m - 1)
    amp = np.abs(mode.us)
    maxima = np.array([amp[idx == j].max() for j in range(m)])
    gam = gamma_profile(np.arange(m) * period, config)
    ratios = maxima * np.exp(gam)
    cells = np.arange(m, dtype=float)
    slope, intercept = np.polyfit(cells, np.log(maxima), 1)
    inner = ratios[1:] if m > 1 else ratios
    return EnvelopeReport(
        tuple(float(x) for x in maxima),
        tuple(float(x) for x in np.atleast_1d(gam)),
        tuple(float(x) for x in ratios),
        float(slope),
        float(intercept),
        float(inner.max() / inner.min()),
    )


def damping_diagnostics(omega: complex, gamma: float, tol: float = 1e-12) -> dict:
    """``nu = sqrt(gamma^2 - omega^2)`` and the character of ``exp(-gamma x +- nu x)``.

    Real ``omega`` gives the clean trichotomy; for complex ``omega`` the regime
    follows the sign of ``Re(nu^2)``.
    """
    nu2 = complex(gamma) ** 2 - complex(omega) ** 2
    nu = complex(np.sqrt(nu2))
    if abs(nu) <= tol:
        regime = "critical"
    elif abs(nu.real) <= tol:
        regime = "oscillatory"
    elif abs(nu.imag) <= tol and nu.real > 0:
        regime = "overdamped"
    else:
        regime = "overdamped" if nu2.real > 0 else "oscillatory"
    return {"nu": nu, "regime": regime}
