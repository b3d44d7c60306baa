"""Capacitance-matrix asymptotics for small contrast.

At a zero ``w0`` of the ``delta = 0`` determinant the ``n(w0)`` nearby
resonances split as ``w0 +- v sqrt(delta lambda)`` over the nonzero
eigenvalues ``lambda`` of a tridiagonal generalised capacitance matrix, with
the remaining ones moving only by ``O(delta)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, ConvergenceFailure, NotALimitResonance
from .model import ResonatorArray

__all__ = [
    "CapacitanceMatrix",
    "t_vectors",
    "coefficients",
    "capacitance_matrix",
    "gauge_capacitance",
    "zeta",
    "eigenvalues",
    "geometric_multiplicity",
    "predict_resonances",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class CapacitanceMatrix:
    """Tridiagonal matrix stored by its three diagonals.

    ``sub[i]`` is entry ``(i+1, i)`` and ``super[i]`` is entry ``(i, i+1)``.
    """

    diag: tuple[complex, ...]
    sub: tuple[complex, ...]
    super: tuple[complex, ...]
    kind: str = "generalised"
    omega0: complex | None = None
    theta_coeffs: tuple[complex, ...] = ()

    @property
    def n(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        a = np.diag(np.asarray(self.diag, dtype=complex))
        if self.n > 1:
            a += np.diag(np.asarray(self.sub, dtype=complex), -1)
            a += np.diag(np.asarray(self.super, dtype=complex), 1)
        return a

    def to_json(self) -> str:
        pair = lambda z: [complex(z).real, complex(z).imag]  # noqa: E731
        return json.dumps({
            "n": self.n,
            "diag": [pair(z) for z in self.diag],
            "sub": [pair(z) for z in self.sub],
            "super": [pair(z) for z in self.super],
        })


def t_vectors(config: ResonatorArray) -> tuple[np.ndarray, np.ndarray]:
    """Interleaved ``(r_1 l_1, s_1, r_2 l_2, ...)`` and ``(r_1^2 l_1, s_1, ...)``."""
    r = config.speed_ratios
    frak, t = [], []
    for i, ell in enumerate(config.lengths):
        frak.append(r[i] * ell)
        t.append(r[i] ** 2 * ell)
        if i < config.n - 1:
            frak.append(complex(config.spacings[i]))
            t.append(complex(config.spacings[i]))
    return np.array(frak, dtype=complex), np.array(t, dtype=complex)


def _divides(x: complex, tol: float) -> bool:
    """Whether ``x / pi`` is an integer up to relative tolerance ``tol``."""
    y = x / math.pi
    k = round(y.real)
    return abs(y - k) <= tol * max(1.0, abs(y))


def coefficients(omega0: complex, config: ResonatorArray, tol: float = 1e-9):
    """Coefficients ``c_0 .. c_{2N}`` and couplings ``theta_1 .. theta_{2N-2}``.

    ``c_j = 1/t_j`` when ``frak_t_j omega0 / v`` is a multiple of ``pi`` and
    zero otherwise; the padding entries ``c_0`` and ``c_{2N}`` are always zero.
    """
    frak, t = t_vectors(config)
    v = config.speed_background
    c = np.zeros(2 * config.n + 1, dtype=complex)
    for j in range(1, 2 * config.n):
        if _divides(frak[j - 1] * omega0 / v, tol):
            c[j] = 1.0 / t[j - 1]
    if not np.any(c != 0):
        raise NotALimitResonance(f"omega0 = {omega0} is not a zero of the delta = 0 determinant")
    theta = c[1:-2] * c[2:-1]
    return c, theta


def capacitance_matrix(omega0: complex, config: ResonatorArray, tol: float = 1e-9):
    """Generalised capacitance matrix at a ``delta = 0`` zero ``omega0``.

    Row 1 is ``(theta_1, -theta_1)``, row ``i`` is
    ``(-theta_{2i-2}, theta_{2i-2} + theta_{2i-1}, -theta_{2i-1})`` and the last
    row is ``(-theta_{2N-2}, theta_{2N-2})``.
    """
    _, theta = coefficients(omega0, config, tol)
    n = config.n
    th = np.concatenate([[0.0], theta, [0.0]])  # th[j] = theta_j, zero-padded
    diag = [th[2 * i] + th[2 * i + 1] for i in range(n)]
    sup = [-th[2 * i + 1] for i in range(n - 1)]
    sub = [-th[2 * i + 2] for i in range(n - 1)]
    return CapacitanceMatrix(
        tuple(complex(x) for x in diag),
        tuple(complex(x) for x in sub),
        tuple(complex(x) for x in sup),
        "generalised",
        complex(omega0),
        tuple(complex(x) for x in theta),
    )


def zeta(z):
    """``z / (1 - exp(-z))``, continued by ``zeta(0) = 1``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    out = zs / -np.expm1(-zs)
    out = np.where(small, 1.0 + z / 2, out)
    return float(out) if out.ndim == 0 else out


def gauge_capacitance(config: ResonatorArray) -> CapacitanceMatrix:
    """Capacitance matrix of a chain with imaginary gauge potentials."""
    n = config.n
    if n < 2:
        raise ConfigError("the gauge capacitance matrix needs at least two resonators")
    gl = [g * ell for g, ell in zip(config.gauges, config.lengths)]
    s = config.spacings
    diag = []
    for i in range(n):
        d = 0.0
        if i > 0:
            d += zeta(-gl[i]) / s[i - 1]
        if i < n - 1:
            d += zeta(gl[i]) / s[i]
        diag.append(d)
    sup = [-zeta(gl[i]) / s[i] for i in range(n - 1)]
    sub = [-zeta(-gl[i + 1]) / s[i] for i in range(n - 1)]
    return CapacitanceMatrix(
        tuple(complex(x) for x in diag),
        tuple(complex(x) for x in sub),
        tuple(complex(x) for x in sup),
        "gauge",
    )


def _cluster_mean(values: np.ndarray, radius: float) -> np.ndarray:
    """Replace each cluster of nearby eigenvalues by the cluster mean.

    A defective eigenvalue of multiplicity ``p`` is perturbed by roughly
    ``eps^(1/p)`` in floating point, while the mean of the cluster is as
    accurate as the trace.
    """
    vals = values.copy()
    n = vals.size
    label = np.arange(n)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= radius:
                old, new = label[j], label[i]
                label[label == old] = new
    for lab in np.unique(label):
        idx = label == lab
        if idx.sum() > 1:
            vals[idx] = values[idx].mean()
    return vals


def eigenvalues(cm: CapacitanceMatrix | np.ndarray) -> np.ndarray:
    """Eigenvalues sorted by ``(Re, Im)``.

    Uses LAPACK's shifted complex Hessenberg QR; clusters closer than
    ``10 sqrt(eps) |A|_F`` are merged to their mean.
    """
    a = cm.dense() if isinstance(cm, CapacitanceMatrix) else np.asarray(cm, dtype=complex)
    if a.shape[0] > 64:
        raise ValueError("eigenvalues is meant for small matrices (N <= 64)")
    try:
        lam = scipy.linalg.eigvals(a, overwrite_a=False, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    norm = np.linalg.norm(a)
    lam = _cluster_mean(lam, 10 * math.sqrt(_EPS) * norm)
    lam = np.where(np.abs(lam.imag) <= 4 * _EPS * norm, lam.real + 0j, lam)
    order = np.lexsort((lam.imag, lam.real))
    return lam[order]


def geometric_multiplicity(cm: CapacitanceMatrix | np.ndarray, lam: complex,
                           rtol: float = 1e-10) -> int:
    """``dim ker(A - lam I)`` from the singular values of ``A - lam I``."""
    a = cm.dense() if isinstance(cm, CapacitanceMatrix) else np.asarray(cm, dtype=complex)
    sv = np.linalg.svd(a - lam * np.eye(a.shape[0]), compute_uv=False)
    return int(np.sum(sv <= rtol * max(1.0, np.linalg.norm(a))))


def predict_resonances(omega0: complex, delta: float, config: ResonatorArray,
                       tol: float = 1e-9) -> np.ndarray:
    """Leading-order resonances near ``omega0``.

    Nonzero eigenvalues give the pairs ``omega0 +- v sqrt(delta lambda)``; the
    remaining ``n - 2m`` resonances are reported at ``omega0`` itself.
    """
    c, _ = coefficients(omega0, config, tol)
    n = int(np.count_nonzero(c))
    cm = capacitance_matrix(omega0, config, tol)
    lam = eigenvalues(cm)
    norm = np.linalg.norm(cm.dense())
    nonzero = lam[np.abs(lam) > 1e-10 * norm]
    v = config.speed_background
    out = []
    for x in nonzero:
        r = v * np.sqrt(delta * x + 0j)
        out.extend([omega0 + r, omega0 - r])
    out.extend([complex(omega0)] * max(n - 2 * len(nonzero), 0))
    out = np.array(out, dtype=complex)
    return out[np.lexsort((out.imag, out.real))]
