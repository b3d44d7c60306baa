"""Characteristic determinants and complex resonance location.

Resonances are the zeros of the entire function

    f(w) = det(M(w) b_L(w) | b_R(w)),

with ``M`` the symmetrised total propagation matrix and ``b_L``, ``b_R`` the
closure vectors of the radiation condition.  Zeros are isolated by
argument-principle counts on adaptively sampled contours, boxes are
quadrisected until each holds a single zero or a tight cluster, and each zero
is polished by Newton's method with the exact derivative of the matrix chain.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import ContourTooClose, MaxDepthExceeded, NewtonDiverged
from .model import (
    OUTGOING,
    ResonatorArray,
    radiation_to_json,
    right_vector,
    right_vector_derivative,
)
from .propagation import (
    _char_det,
    residual_scale,
    symmetrised_total_with_derivative,
    transmission,
)

__all__ = [
    "char_det",
    "char_det_with_derivative",
    "SearchRegion",
    "Resonance",
    "count_zeros",
    "count_zeros_in_disk",
    "find_resonances",
    "cluster_roots",
    "newton",
    "classify_exceptional",
    "DeltaZero",
    "DeltaZeroSpectrum",
    "delta_zero_spectrum",
    "transmission_peaks",
    "derivative_orders",
    "resonances_to_csv",
    "resonances_to_json",
]

_EPS = np.finfo(float).eps
# split fractions tried in turn when a child contour grazes a zero
_SPLITS = (0.4937, 0.5371, 0.4519, 0.5613, 0.4211, 0.5807)


def char_det(omega, config: ResonatorArray, rc=OUTGOING):
    """``f(omega) = det(M b_L | b_R)`` with the symmetrised total matrix ``M``.

    For gauge-free chains ``M`` is the plain total matrix; otherwise the
    rescaled product with unit determinant is used, which has the same zeros
    and avoids the ``exp(-sum l gamma)`` underflow.
    """
    out = _char_det(omega, config, rc)
    return complex(out) if np.ndim(out) == 0 else out


def char_det_with_derivative(omega, config: ResonatorArray, rc=OUTGOING):
    """Return ``(f, f')`` using the product rule over the block chain."""
    m, dm = symmetrised_total_with_derivative(omega, config)
    v = config.speed_background
    l1, l2 = rc.left_vector(omega, v)
    dl1, dl2 = rc.left_vector_derivative(omega, v)
    r1, r2 = right_vector(omega, v)
    dr1, dr2 = right_vector_derivative(omega, v)
    a = m[..., 0, 0] * l1 + m[..., 0, 1] * l2
    b = m[..., 1, 0] * l1 + m[..., 1, 1] * l2
    da = dm[..., 0, 0] * l1 + dm[..., 0, 1] * l2 + m[..., 0, 0] * dl1 + m[..., 0, 1] * dl2
    db = dm[..., 1, 0] * l1 + dm[..., 1, 1] * l2 + m[..., 1, 0] * dl1 + m[..., 1, 1] * dl2
    f = a * r2 - b * r1
    df = da * r2 + a * dr2 - db * r1 - b * dr1
    if np.ndim(f) == 0:
        return complex(f), complex(df)
    return f, df


# ---------------------------------------------------------------------------
# regions and contours


@dataclass(frozen=True)
class SearchRegion:
    """Axis-aligned rectangle in the complex frequency plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    max_depth: int = 40
    contour_samples: int = 256

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate search region {self}")
        if self.contour_samples < 64:
            raise ValueError("contour_samples must be >= 64")

    @property
    def scale(self) -> float:
        return max(self.re_max - self.re_min, self.im_max - self.im_min)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def dilated(self, factor: float) -> "SearchRegion":
        hw = 0.5 * (self.re_max - self.re_min) * factor
        hh = 0.5 * (self.im_max - self.im_min) * factor
        c = self.center
        return SearchRegion(
            c.real - hw, c.real + hw, c.imag - hh, c.imag + hh,
            self.max_depth, self.contour_samples,
        )

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (
            self.re_min - margin <= z.real <= self.re_max + margin
            and self.im_min - margin <= z.imag <= self.im_max + margin
        )

    @classmethod
    def around(cls, center: complex, half_width: float, half_height: float | None = None, **kw):
        hh = half_width if half_height is None else half_height
        return cls(center.real - half_width, center.real + half_width,
                   center.imag - hh, center.imag + hh, **kw)


def _rectangle_path(box):
    x0, x1, y0, y1 = box
    w, h = x1 - x0, y1 - y0
    per = 2 * (w + h)
    cuts = np.array([0.0, w, w + h, 2 * w + h, per]) / per

    def path(t):
        t = np.asarray(t, dtype=float)
        s = t * per
        z = np.empty(t.shape, dtype=complex)
        a = s < w
        b = (~a) & (s < w + h)
        c = (~a) & (~b) & (s < 2 * w + h)
        d = ~(a | b | c)
        z[a] = x0 + s[a] + 1j * y0
        z[b] = x1 + 1j * (y0 + s[b] - w)
        z[c] = x1 - (s[c] - w - h) + 1j * y1
        z[d] = x0 + 1j * (y1 - (s[d] - 2 * w - h))
        return z

    return path, cuts[:-1]


def _circle_path(center, radius):
    def path(t):
        return center + radius * np.exp(2j * np.pi * np.asarray(t, dtype=float))

    return path, np.array([0.0])


class _Grazing(Exception):
    """A zero sits on (or numerically at) the contour."""


@dataclass
class _Loop:
    """Closed polyline samples ``z`` with values ``f`` and winding count."""

    z: np.ndarray
    f: np.ndarray
    count: int

    def first_moment(self) -> complex:
        """``(1/2 pi i) oint z d log f`` by the midpoint rule on the polyline."""
        f2 = np.append(self.f, self.f[0])
        z2 = np.append(self.z, self.z[0])
        dlog = np.log(np.abs(f2[1:] / f2[:-1])) + 1j * np.angle(f2[1:] / f2[:-1])
        zm = 0.5 * (z2[1:] + z2[:-1])
        return complex(np.sum(zm * dlog) / (2j * np.pi))


def _trace_loop(fun, path, anchors, n0=256, max_points=1 << 18, seg_floor=1e-13) -> _Loop:
    """Adaptive phase-tracking winding number along a closed path.

    Segments are bisected until every phase increment is below ``pi/4``;
    the whole loop is then doubled once and the count must not change.
    """
    t = np.union1d(np.linspace(0.0, 1.0, n0, endpoint=False), anchors)
    f = fun(path(t))
    prev = None
    doubled = False
    while True:
        if not np.all(np.isfinite(f)) or np.any(f == 0):
            raise _Grazing("non-finite or zero value on contour")
        tt = np.append(t, 1.0)
        ff = np.append(f, f[0])
        dphi = np.angle(ff[1:] / ff[:-1])
        bad = np.abs(dphi) > np.pi / 4
        if bad.any():
            if np.min(np.diff(tt)[bad]) < seg_floor:
                raise _Grazing("phase jump does not resolve")
            if t.size + bad.sum() > max_points:
                raise _Grazing("contour refinement budget exhausted")
            mids = 0.5 * (tt[:-1] + tt[1:])[bad]
        else:
            w = dphi.sum() / (2 * np.pi)
            n = int(round(w))
            if abs(w - n) > 0.1:
                raise _Grazing(f"winding {w:.3f} is not near an integer")
            if doubled and prev == n:
                return _Loop(path(t), f, n)
            prev, doubled = n, True
            mids = 0.5 * (tt[:-1] + tt[1:])
        fm = fun(path(mids))
        t = np.concatenate([t, mids])
        f = np.concatenate([f, fm])
        order = np.argsort(t, kind="stable")
        t, f = t[order], f[order]


def _box_loop(fun, box, n0) -> _Loop:
    path, anchors = _rectangle_path(box)
    return _trace_loop(fun, path, anchors, n0=n0)


def _disk_loop(fun, center, radius, n0=256) -> _Loop:
    path, anchors = _circle_path(center, radius)
    return _trace_loop(fun, path, anchors, n0=n0)


def _fun(config, rc) -> Callable:
    return lambda z: _char_det(z, config, rc)


def _region_box(region: SearchRegion):
    return (region.re_min, region.re_max, region.im_min, region.im_max)


def _top_loop(region: SearchRegion, config, rc) -> tuple[SearchRegion, _Loop]:
    fun = _fun(config, rc)
    reg = region
    for _ in range(6):
        try:
            return reg, _box_loop(fun, _region_box(reg), region.contour_samples)
        except _Grazing:
            reg = reg.dilated(1.01)
    raise ContourTooClose(f"a zero lies on the boundary of {region} after 5 dilations")


def count_zeros(region: SearchRegion, config: ResonatorArray, rc=OUTGOING) -> int:
    """Number of zeros of ``f`` inside ``region`` counted with multiplicity.

    If the boundary grazes a zero the rectangle is dilated by 1 % (up to five
    times) before :class:`ContourTooClose` is raised.
    """
    return _top_loop(region, config, rc)[1].count


def count_zeros_in_disk(center: complex, radius: float, config: ResonatorArray, rc=OUTGOING,
                        samples: int = 256) -> int:
    try:
        return _disk_loop(_fun(config, rc), complex(center), float(radius), samples).count
    except _Grazing as exc:
        raise ContourTooClose(f"zero on circle |w - {center}| = {radius}: {exc}") from exc


# ---------------------------------------------------------------------------
# resonances


@dataclass(frozen=True)
class Resonance:
    """A zero of the characteristic determinant.

    ``residual`` is ``|f(omega)|`` divided by the magnitude scale
    ``1 + |M|_F |b_L| |b_R|``.
    """

    omega: complex
    multiplicity: int = 1
    residual: float = 0.0
    condition: object = OUTGOING

    @property
    def is_ep(self) -> bool:
        return self.multiplicity >= 2

    def sort_key(self):
        return (self.omega.real, self.omega.imag)


def classify_exceptional(res: Resonance, delta: float) -> dict:
    """EP flag from the algebraic multiplicity.

    Unique continuation of Dirichlet-Neumann data bounds the geometric
    multiplicity by one, so any repeated zero is exceptional when ``delta > 0``.
    """
    if not delta > 0:
        raise ValueError("classification needs delta > 0")
    return {"is_ep": res.multiplicity >= 2, "m_a": res.multiplicity, "m_g_bound": 1}


def newton(z0: complex, config: ResonatorArray, rc=OUTGOING, multiplicity: int = 1,
           maxiter: int = 80) -> tuple[complex, float, bool]:
    """Newton iteration ``z -= m f / f'``.

    Returns ``(root, last_step, converged)``; convergence means the step fell
    to rounding level or stopped decreasing while ``|f|`` sat at its floor.
    """
    z = complex(z0)
    last = math.inf
    best = (z, math.inf)
    stall = 0
    for _ in range(maxiter):
        f, df = char_det_with_derivative(z, config, rc)
        if f == 0:
            return z, 0.0, True
        if df == 0 or not np.isfinite(df):
            return best[0], last, False
        step = multiplicity * f / df
        size = abs(step)
        if abs(f) < best[1]:
            best = (z, abs(f))
        z = z - step
        floor = 8 * _EPS * max(1.0, abs(z))
        if size <= floor:
            return z, size, True
        if size >= last:
            stall += 1
            if stall >= 3 and last < 1e-6 * max(1.0, abs(z)):
                return best[0], last, True
        else:
            stall = 0
        last = size
    return best[0], last, last < 1e-8 * max(1.0, abs(z))


def _moment_polynomial_roots(center, radius, m, config, rc, samples=512):
    """Roots inside a circle from the power sums ``sum (w_j - c)^k``."""
    phi = 2 * np.pi * np.arange(samples) / samples
    zeta = radius * np.exp(1j * phi)
    f, df = char_det_with_derivative(center + zeta, config, rc)
    g = df / f
    sums = [np.mean(zeta ** (k + 1) * g) for k in range(1, m + 1)]
    # Newton identities: power sums -> elementary symmetric polynomials
    e = [1.0 + 0j]
    for k in range(1, m + 1):
        acc = 0j
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * sums[i - 1]
        e.append(acc / k)
    coeffs = [(-1) ** k * e[k] for k in range(m + 1)]
    return np.sort_complex(center + np.roots(coeffs)) if m > 0 else np.array([], dtype=complex)


def cluster_roots(center: complex, radius: float, config: ResonatorArray, rc=OUTGOING,
                  polish: bool = True) -> list[complex]:
    """Individual zeros inside a small circle, resolved from contour moments.

    Each root is then polished by plain Newton if the iteration stays inside
    the circle and lands on a root not already claimed.
    """
    center = complex(center)
    m = count_zeros_in_disk(center, radius, config, rc)
    if m == 0:
        return []
    roots = list(_moment_polynomial_roots(center, radius, m, config, rc))
    if not polish:
        return roots
    out = []
    for r in roots:
        z, _, ok = newton(r, config, rc)
        if ok and abs(z - center) < radius and all(abs(z - w) > 1e-3 * abs(r - w) for w in out):
            out.append(z)
        else:
            out.append(r)
    return sorted(out, key=lambda w: (w.real, w.imag))


@dataclass
class _Box:
    x0: float
    x1: float
    y0: float
    y1: float
    loop: _Loop
    depth: int

    @property
    def size(self):
        return max(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def center(self):
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def inside(self, z, margin=0.0):
        return (self.x0 - margin <= z.real <= self.x1 + margin
                and self.y0 - margin <= z.imag <= self.y1 + margin)

    def children(self, fx, fy):
        xm = self.x0 + fx * (self.x1 - self.x0)
        ym = self.y0 + fy * (self.y1 - self.y0)
        return [
            (self.x0, xm, self.y0, ym),
            (xm, self.x1, self.y0, ym),
            (self.x0, xm, ym, self.y1),
            (xm, self.x1, ym, self.y1),
        ]


def _split(box: _Box, fun, n0):
    for fx in _SPLITS:
        fy = _SPLITS[(_SPLITS.index(fx) + 1) % len(_SPLITS)]
        try:
            kids = [_Box(*b, _box_loop(fun, b, n0), box.depth + 1) for b in box.children(fx, fy)]
        except _Grazing:
            continue
        if sum(k.loop.count for k in kids) == box.loop.count:
            return kids
    raise ContourTooClose(
        f"cannot split box [{box.x0}, {box.x1}] x [{box.y0}, {box.y1}] away from its zeros"
    )


def _residual(z, config, rc) -> float:
    return float(abs(_char_det(z, config, rc)) / residual_scale(z, config, rc))


def find_resonances(region: SearchRegion, config: ResonatorArray, rc=OUTGOING,
                    tol: float = 1e-10) -> list[Resonance]:
    """All zeros of ``f`` in ``region``, sorted by ``(Re, Im)``.

    Boxes holding one zero are solved by Newton from the contour-moment seed.
    Boxes that shrink below ``1e-7`` of the region size (or that can no longer
    be split cleanly) while still holding several zeros are treated as a
    cluster: modified Newton with the cluster count, the multiplicity confirmed
    by a winding count on a circle of radius ``max(1e-7 scale, 10 |last step|)``.
    """
    region, top = _top_loop(region, config, rc)
    fun = _fun(config, rc)
    n0 = region.contour_samples
    cluster = max(1e-7 * region.scale, 64 * _EPS * max(1.0, abs(region.center)))
    found: list[Resonance] = []
    stack = [_Box(*_region_box(region), top, 0)]
    while stack:
        box = stack.pop()
        n = box.loop.count
        if n == 0:
            continue
        if n == 1:
            seed = box.loop.first_moment()
            if not box.inside(seed):
                seed = box.center
            z, step, ok = newton(seed, config, rc)
            if ok and box.inside(z, margin=1e-12 * region.scale):
                found.append(Resonance(z, 1, _residual(z, config, rc), rc))
                continue
        elif box.size <= cluster:
            found.append(_resolve_cluster(box, n, cluster, config, rc))
            continue
        if box.depth >= region.max_depth:
            if n == 1:
                raise NewtonDiverged(f"Newton failed in box {box.x0, box.x1, box.y0, box.y1}")
            raise MaxDepthExceeded(
                f"unresolved cluster of {n} zeros in box {box.x0, box.x1, box.y0, box.y1}",
                box=(box.x0, box.x1, box.y0, box.y1),
            )
        try:
            stack.extend(_split(box, fun, n0))
        except ContourTooClose:
            if n == 1:
                raise
            # rounding noise dominates the phase below this scale
            found.append(_resolve_cluster(box, n, max(cluster, box.size), config, rc))
    for r in found:
        # a zero of order m is only located to about tol^(1/m)
        if r.residual > tol ** (1.0 / r.multiplicity):
            raise NewtonDiverged(f"residual {r.residual:.3e} above tolerance at {r.omega}")
    return sorted(found, key=Resonance.sort_key)


def _resolve_cluster(box: _Box, n: int, cluster: float, config, rc) -> Resonance:
    mean = box.loop.first_moment() / n
    z, step, _ = newton(mean, config, rc, multiplicity=n)
    if not box.inside(z, margin=box.size):
        z, step = mean, 0.0
    radius = max(cluster, 10 * step)
    m = n
    for _ in range(8):
        try:
            m = count_zeros_in_disk(z, radius, config, rc)
        except ContourTooClose:
            radius *= 1.7
            continue
        if m >= n:
            break
        radius *= 4
    return Resonance(z, m, _residual(z, config, rc), rc)


# ---------------------------------------------------------------------------
# derivative diagnostic


def derivative_orders(omega: complex, config: ResonatorArray, rc=OUTGOING, max_order: int = 4,
                      radius: float | None = None, samples: int = 128) -> np.ndarray:
    """Normalised Taylor coefficients ``|f^(m)(omega)| r^m / m!`` for ``m < max_order``.

    The coefficients come from Cauchy's integral on a circle of radius ``r``
    and are divided by ``max |f|`` on that circle; a zero of order ``n`` shows
    up as coefficients ``m < n`` that sit at rounding level.  ``f^(m)`` equals
    the multinomially weighted sum of ``det(d^i M d^j b_L | d^k b_R)`` over
    ``i + j + k = m``.
    """
    omega = complex(omega)
    if radius is None:
        radius = 1e-3 * max(1.0, abs(omega))
    phi = 2 * np.pi * np.arange(samples) / samples
    vals = _char_det(omega + radius * np.exp(1j * phi), config, rc)
    coef = np.fft.fft(vals) / samples
    top = np.max(np.abs(vals))
    return np.abs(coef[:max_order]) / top


# ---------------------------------------------------------------------------
# delta = 0 spectrum


@dataclass(frozen=True)
class DeltaZero:
    omega: complex
    order: int
    contributors: tuple[str, ...]


@dataclass(frozen=True)
class DeltaZeroSpectrum:
    zeros: tuple[DeltaZero, ...] = field(default_factory=tuple)

    def at(self, omega: complex, tol: float = 1e-9) -> DeltaZero | None:
        for z in self.zeros:
            if abs(z.omega - omega) <= tol * max(1.0, abs(omega)):
                return z
        return None


def delta_zero_spectrum(config: ResonatorArray, window: tuple[float, float],
                        tol: float = 1e-9) -> DeltaZeroSpectrum:
    """Zeros of ``f(.; 0)`` with real part in ``window`` and their orders.

    A frequency is a zero whenever ``l_j w / v_j`` or ``s_j w / v`` (for
    ``j < N``) is a multiple of ``pi``; its order is the number of these
    conditions that hold.  Lattices of complex speeds lie on rays and are
    enumerated inside the disk spanned by the window.
    """
    a, b = float(window[0]), float(window[1])
    if not a <= b:
        raise ValueError("window must satisfy a <= b")
    c, rad = 0.5 * (a + b), 0.5 * (b - a)
    v = config.speed_background
    steps = [(f"l{i + 1}", math.pi * complex(vi) / ell)
             for i, (ell, vi) in enumerate(zip(config.lengths, config.speeds_inside))]
    steps += [(f"s{i + 1}", complex(math.pi * v / s)) for i, s in enumerate(config.spacings[:-1])]
    cand: list[tuple[complex, str]] = []
    for tag, h in steps:
        real = h.imag == 0
        if real:
            k0, k1 = math.ceil(a / h.real - tol), math.floor(b / h.real + tol)
        else:
            bound = (abs(c) + rad) / abs(h)
            k0, k1 = -math.floor(bound), math.floor(bound)
        for k in range(min(k0, k1), max(k0, k1) + 1):
            w = k * h
            if real or abs(w - c) <= rad * (1 + tol) + tol:
                cand.append((w, tag))
    cand.sort(key=lambda p: (p[0].real, p[0].imag))
    zeros: list[DeltaZero] = []
    used = [False] * len(cand)
    for i, (w, _) in enumerate(cand):
        if used[i]:
            continue
        group = [j for j in range(len(cand))
                 if not used[j] and abs(cand[j][0] - w) <= tol * max(1.0, abs(w))]
        for j in group:
            used[j] = True
        tags = tuple(sorted({cand[j][1] for j in group}, key=_tag_key))
        omega = complex(np.mean([cand[j][0] for j in group]))
        if abs(omega) <= tol:
            omega = 0j
        zeros.append(DeltaZero(omega, len(tags), tags))
    return DeltaZeroSpectrum(tuple(zeros))


def _tag_key(tag: str):
    return (int(tag[1:]), tag[0] == "s")


# ---------------------------------------------------------------------------
# transmission comb


def transmission_peaks(config: ResonatorArray, omega_range: tuple[float, float] = (0.0, math.pi),
                       samples: int = 2000, prominence: float = 0.1):
    """Sample ``T`` on a uniform grid over ``(a, b]`` and locate its peaks.

    A sample is a peak if it is a local maximum with prominence at least
    ``prominence * max T``.  The right endpoint counts as a peak when ``T``
    increases into it by that prominence.  Returns ``(grid, T, peaks)``.
    """
    a, b = omega_range
    grid = np.linspace(a, b, samples + 1)[1:]
    t = transmission(grid, config)
    floor = prominence * float(np.max(t))
    idx, _ = find_peaks(t, prominence=floor)
    peaks = list(grid[idx])
    # find_peaks ignores endpoints; pad with the mirror image to test b
    mirrored = np.concatenate([t, t[-2::-1]])
    idx_m, _ = find_peaks(mirrored, prominence=floor)
    if np.any(idx_m == t.size - 1):
        peaks.append(float(grid[-1]))
    return grid, t, np.array(peaks)


# ---------------------------------------------------------------------------
# serialisation


_FMT = "{:.16e}"


def resonances_to_csv(resonances: Sequence[Resonance], fh=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_omega", "im_omega", "multiplicity", "residual", "is_ep"])
    for r in sorted(resonances, key=Resonance.sort_key):
        w.writerow([_FMT.format(r.omega.real), _FMT.format(r.omega.imag), r.multiplicity,
                    _FMT.format(r.residual), "true" if r.is_ep else "false"])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def resonances_to_json(resonances: Sequence[Resonance], config: ResonatorArray) -> str:
    rows = [
        {
            "re_omega": _FMT.format(r.omega.real),
            "im_omega": _FMT.format(r.omega.imag),
            "multiplicity": r.multiplicity,
            "residual": _FMT.format(r.residual),
            "is_ep": r.is_ep,
            "condition": radiation_to_json(r.condition),
        }
        for r in sorted(resonances, key=Resonance.sort_key)
    ]
    return json.dumps({"config_hash": config.digest(), "resonances": rows}, indent=2)
