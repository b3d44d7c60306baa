"""Propagation (transfer) matrices for piecewise-constant resonator chains.

Matrices act on Dirichlet-Neumann data ``(u, u')`` and are returned as
complex numpy arrays of shape ``omega.shape + (2, 2)``, so every routine
broadcasts over frequency grids.  Resonator indices are zero-based.

Inside a resonator with gauge potential ``gamma`` the field obeys
``u'' + 2 gamma u' + (w/v_i)^2 u = 0``.  Writing ``q = (w/v_i)^2 - gamma^2``,
every entry of the propagation matrix is built from the two entire functions
``cos(l sqrt(q))`` and ``sin(l sqrt(q)) / sqrt(q)``, which are even in
``sqrt(q)``.  No square-root branch is ever selected.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import AtResonance, NotAResonance, SingularSystem, ZeroContrast, ZeroSpeed
from .model import ResonatorArray, extremities, right_vector

__all__ = [
    "sinc",
    "even_trig",
    "interior_matrix",
    "exterior_matrix",
    "contrast_matrix",
    "block_matrix",
    "gauge_interior_matrix",
    "gauge_block_matrix",
    "symmetrised_block",
    "total_matrix",
    "symmetrised_total",
    "symmetrised_total_with_derivative",
    "ModeTrace",
    "propagate_mode",
    "solution_at",
    "green_function",
    "transmission",
]

# |y| below which series replace the closed forms in even_trig
_SERIES_CUT = 1e-2


def sinc(z):
    """``sin(z) / z`` with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    out = np.sin(zs) / zs
    z2 = z * z
    series = 1 - z2 / 6 * (1 - z2 / 20 * (1 - z2 / 42))
    return np.where(small, series, out)


def even_trig(q, length, derivative: bool = False):
    """Return ``c = cos(l sqrt(q))`` and ``s = sin(l sqrt(q)) / sqrt(q)``.

    With ``derivative=True`` also return ``dc/dq`` and ``ds/dq``.  All four are
    entire in ``q``; near ``q = 0`` they are evaluated from Taylor series in
    ``y = l^2 q``.
    """
    q = np.asarray(q, dtype=complex)
    ell = float(length)
    y = ell * ell * q
    small = np.abs(y) < _SERIES_CUT
    ys = np.where(small, 1.0, y)
    r = np.sqrt(ys)
    cos_r = np.cos(r)
    sinc_r = np.sin(r) / r
    # series in y: cos sqrt(y) and sin sqrt(y) / sqrt(y)
    c_ser = 1 - y / 2 * (1 - y / 12 * (1 - y / 30 * (1 - y / 56 * (1 - y / 90))))
    s_ser = 1 - y / 6 * (1 - y / 20 * (1 - y / 42 * (1 - y / 72 * (1 - y / 110))))
    c = np.where(small, c_ser, cos_r)
    s = ell * np.where(small, s_ser, sinc_r)
    if not derivative:
        return c, s
    dc = -ell * s / 2
    qs = np.where(small, 1.0, q)
    ds_direct = (ell * cos_r - ell * sinc_r) / (2 * qs)
    # sum_{n>=1} (-1)^n n y^(n-1) / (2n+1)!
    g = -1 / 6 + y / 60 - y * y / 1680 + y**3 / 90720 - y**4 / 7983360
    ds = np.where(small, ell**3 * g, ds_direct)
    return c, s, dc, ds


def _mat(a11, a12, a21, a22):
    a11, a12, a21, a22 = np.broadcast_arrays(
        *(np.asarray(a, dtype=complex) for a in (a11, a12, a21, a22))
    )
    out = np.empty(a11.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a11
    out[..., 0, 1] = a12
    out[..., 1, 0] = a21
    out[..., 1, 1] = a22
    return out


def interior_matrix(omega, length: float, speed: complex):
    """Propagation matrix across a resonator of given length and wave speed.

    ``[[cos(k l), sin(k l)/k], [-k sin(k l), cos(k l)]]`` with ``k = omega/speed``;
    at ``omega = 0`` this is the shear ``[[1, l], [0, 1]]``.
    """
    speed = complex(speed)
    if speed == 0:
        raise ZeroSpeed("resonator speed must be nonzero")
    k = np.asarray(omega, dtype=complex) / speed
    z = k * length
    s = length * sinc(z)
    c = np.cos(z)
    return _mat(c, s, -k * k * s, c)


def exterior_matrix(omega, spacing: float, v: float = 1.0):
    """Propagation across a background gap; the identity when ``spacing == 0``."""
    if spacing < 0:
        raise ValueError("spacing must be nonnegative")
    return interior_matrix(omega, spacing, v)


def contrast_matrix(delta: float):
    """The interface map from exterior to interior data, ``diag(1, delta)``."""
    return np.array([[1.0, 0.0], [0.0, delta]], dtype=complex)


def _require_contrast(config: ResonatorArray):
    if config.contrast == 0:
        raise ZeroContrast("delta = 0 makes the interface matrix singular")


def block_matrix(i: int, omega, config: ResonatorArray):
    """Propagation matrix of block ``i`` (resonator ``i`` followed by gap ``i``).

    Evaluated from the explicit trigonometric entries; ``det = 1`` for a
    gauge-free block.  Blocks with ``gamma_i != 0`` are delegated to
    :func:`gauge_block_matrix`.
    """
    _require_contrast(config)
    if config.gauges[i] != 0.0:
        return gauge_block_matrix(i, omega, config)
    omega = np.asarray(omega, dtype=complex)
    delta = config.contrast
    v = config.speed_background
    vi = config.speeds_inside[i]
    ell, s = config.lengths[i], config.spacings[i]
    ri = v / vi
    a_in = omega / vi * ell
    a_ex = omega / v * s
    ci, si = np.cos(a_in), np.sin(a_in)
    ce, se = np.cos(a_ex), np.sin(a_ex)
    # (v/w) sin(w s / v) and (v_i/w) sin(w l / v_i), regular at w = 0
    se_w = s * sinc(a_ex)
    si_w = ell * sinc(a_in)
    a11 = ce * ci - ri / delta * se * si
    a12 = ci * se_w + delta * ce * si_w
    a21 = -(omega / v) * ci * se - (omega / (delta * vi)) * si * ce
    a22 = ce * ci - delta / ri * se * si
    return _mat(a11, a12, a21, a22)


def gauge_interior_matrix(omega, length: float, gamma: float, speed: float = 1.0):
    """Interior matrix of a resonator carrying an imaginary gauge potential.

    Equals ``exp(-gamma l) [[1,0],[-gamma,1]] P_int(sqrt(w^2 - gamma^2)) [[1,0],[gamma,1]]``,
    assembled from even functions of the square root.
    """
    omega = np.asarray(omega, dtype=complex)
    k2 = (omega / speed) ** 2
    c, s = even_trig(k2 - gamma * gamma, length)
    scale = math.exp(-gamma * length)
    return scale * _mat(c + gamma * s, s, -k2 * s, c - gamma * s)


def _symmetrised_block_parts(i, omega, config, derivative=False):
    """Entries of ``exp(gamma_i l_i) P_i`` (and their omega-derivatives)."""
    omega = np.asarray(omega, dtype=complex)
    delta = config.contrast
    v = config.speed_background
    vi = config.speeds_inside[i]
    gamma = config.gauges[i]
    ell, sp = config.lengths[i], config.spacings[i]
    k2 = (omega / vi) ** 2
    q = k2 - gamma * gamma
    ke2 = (omega / v) ** 2
    if not derivative:
        c, s = even_trig(q, ell)
        ce, se = even_trig(ke2, sp)
    else:
        c, s, dc, ds = even_trig(q, ell, derivative=True)
        ce, se, dce, dse = even_trig(ke2, sp, derivative=True)
    # interior with interface maps folded in, then the gap
    a = (c + gamma * s, delta * s, -k2 * s / delta, c - gamma * s)
    e = (ce, se, -ke2 * se, ce)
    block = _product(e, a)
    if not derivative:
        return block
    dq = 2 * omega / vi**2
    dqe = 2 * omega / v**2
    da = (
        (dc + gamma * ds) * dq,
        delta * ds * dq,
        -(dq * s + k2 * ds * dq) / delta,
        (dc - gamma * ds) * dq,
    )
    de = (dce * dqe, dse * dqe, -(dqe * se + ke2 * dse * dqe), dce * dqe)
    d1 = _product(de, a)
    d2 = _product(e, da)
    return block, tuple(x + y for x, y in zip(d1, d2))


def _product(x, y):
    """Entry-tuple product of two 2x2 matrices."""
    x11, x12, x21, x22 = x
    y11, y12, y21, y22 = y
    return (
        x11 * y11 + x12 * y21,
        x11 * y12 + x12 * y22,
        x21 * y11 + x22 * y21,
        x21 * y12 + x22 * y22,
    )


def gauge_block_matrix(i: int, omega, config: ResonatorArray):
    """Block propagation matrix with imaginary gauge potential ``gamma_i``.

    Uses the closed form in terms of ``Psi(a, b) = (a cos(k s) + b sin(k s))/nu``
    and ``nu = sqrt(gamma^2 - (w/v_i)^2)``; ``det = exp(-2 gamma_i l_i)``.
    """
    _require_contrast(config)
    omega = np.asarray(omega, dtype=complex)
    delta = config.contrast
    v = config.speed_background
    vi = config.speeds_inside[i]
    gamma = config.gauges[i]
    ell, sp = config.lengths[i], config.spacings[i]
    k = omega / v
    ki2 = (omega / vi) ** 2
    # cosh(nu l) and sinh(nu l)/nu as even functions of nu
    ch, sh = even_trig(ki2 - gamma * gamma, ell)
    cs, sn = np.cos(k * sp), np.sin(k * sp)
    sn_k = sp * sinc(k * sp)  # sin(k s) / k

    def psi_sh(a, b):  # Psi(a, b) * sinh(nu l)
        return (a * cs + b * sn) * sh

    # Psi(-delta*gamma, ki^2/k) with sin(k s)/k kept regular at k = 0
    a11 = cs * ch - (-delta * gamma * cs + ki2 * sn_k) * sh / delta
    a12 = ch * sn_k + delta * cs * sh - gamma * sn_k * sh
    a21 = -k * ch * sn - (1 / delta) * (ki2 * cs * sh + k * delta * gamma * sn * sh)
    a22 = cs * ch - psi_sh(gamma, delta * k)
    return math.exp(-gamma * ell) * _mat(a11, a12, a21, a22)


def symmetrised_block(i: int, omega, config: ResonatorArray):
    """``exp(gamma_i l_i) P_i``, which has unit determinant."""
    _require_contrast(config)
    return _mat(*_symmetrised_block_parts(i, omega, config))


def symmetrised_total(omega, config: ResonatorArray):
    """``exp(sum l_i gamma_i) P_N ... P_1``."""
    _require_contrast(config)
    m = None
    for i in range(config.n):
        b = _symmetrised_block_parts(i, omega, config)
        m = b if m is None else _product(b, m)
    return _mat(*m)


def symmetrised_total_with_derivative(omega, config: ResonatorArray):
    """Symmetrised total matrix and its omega-derivative (product rule)."""
    _require_contrast(config)
    m = dm = None
    for i in range(config.n):
        b, db = _symmetrised_block_parts(i, omega, config, derivative=True)
        if m is None:
            m, dm = b, db
        else:
            dm = tuple(x + y for x, y in zip(_product(db, m), _product(b, dm)))
            m = _product(b, m)
    return _mat(*m), _mat(*dm)


def total_matrix(omega, config: ResonatorArray):
    """``P_N ... P_1``; ``det = exp(-2 sum l_i gamma_i)``."""
    decay = math.exp(-sum(l * g for l, g in zip(config.lengths, config.gauges)))
    return decay * symmetrised_total(omega, config)


# ---------------------------------------------------------------------------
# field reconstruction


@dataclass(frozen=True)
class _Region:
    tag: str
    x0: float
    x1: float
    kind: str  # "res" or "bg"
    index: int = -1


def _regions(config: ResonatorArray, pad: float = 0.0) -> list[_Region]:
    out = []
    if pad > 0:
        out.append(_Region("ext", config.left_anchor - pad, config.left_anchor, "bg"))
    ext = extremities(config)
    for i, (xl, xr) in enumerate(ext):
        out.append(_Region(f"res{i + 1}", xl, xr, "res", i))
        s = config.spacings[i]
        if s > 0:
            out.append(_Region(f"gap{i + 1}", xr, xr + s, "bg", i))
    if pad > 0:
        end = out[-1].x1
        out.append(_Region("ext", end, end + pad, "bg"))
    return out


def _local(region: _Region, t, omega, config: ResonatorArray):
    """Matrix taking data at the region's left end to offset ``t`` inside it.

    Inside resonators the data are (u, u') with the interior derivative.
    """
    t = np.asarray(t, dtype=float)
    omega = np.asarray(omega, dtype=complex)
    if region.kind == "bg":
        k2 = (omega / config.speed_background) ** 2
        c, s = _even_trig_t(k2, t)
        return _mat(c, s, -k2 * s, c)
    i = region.index
    gamma = config.gauges[i]
    k2 = (omega / config.speeds_inside[i]) ** 2
    c, s = _even_trig_t(k2 - gamma * gamma, t)
    decay = np.exp(-gamma * t)
    return decay[..., None, None] * _mat(c + gamma * s, s, -k2 * s, c - gamma * s)


def _even_trig_t(q, t):
    """``even_trig`` for an array of lengths (offsets may be negative)."""
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=complex)
    y = t * t * q
    small = np.abs(y) < _SERIES_CUT
    ys = np.where(small, 1.0, y)
    r = np.sqrt(ys)
    c_ser = 1 - y / 2 * (1 - y / 12 * (1 - y / 30 * (1 - y / 56 * (1 - y / 90))))
    s_ser = 1 - y / 6 * (1 - y / 20 * (1 - y / 42 * (1 - y / 72 * (1 - y / 110))))
    c = np.where(small, c_ser, np.cos(r))
    # sin(t sqrt q)/sqrt(q) = t * sinc(t sqrt q): odd in t, use sign-aware r
    s = t * np.where(small, s_ser, np.sin(r) / r)
    return c, s


def _walk(omega: complex, config: ResonatorArray, left_state, pad: float = 0.0):
    """Yield ``(region, entry_state)`` along the chain.

    ``left_state`` is ``(u, u'|_L)`` at ``x_1^L`` with the exterior derivative.
    Entry states of resonators carry the interior derivative.
    """
    delta = config.contrast
    state = np.asarray(left_state, dtype=complex)
    regions = _regions(config, pad)
    if pad > 0:
        back = _local(regions[0], -pad, omega, config)
        yield regions[0], back @ state
        regions = regions[1:]
    for region in regions:
        if region.kind == "res":
            inside = np.array([state[0], delta * state[1]])
            yield region, inside
            out = _local(region, region.x1 - region.x0, omega, config) @ inside
            state = np.array([out[0], out[1] / delta])
        else:
            yield region, state
            state = _local(region, region.x1 - region.x0, omega, config) @ state


@dataclass(frozen=True)
class ModeTrace:
    """Sampled field ``u`` and derivative ``u'`` along the chain."""

    xs: np.ndarray
    us: np.ndarray
    dus: np.ndarray
    omega: complex
    region_tags: tuple[str, ...]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "re_u", "im_u", "re_du", "im_du", "region"])
            for x, u, du, tag in zip(self.xs, self.us, self.dus, self.region_tags):
                w.writerow(
                    [f"{x:.16e}", f"{u.real:.16e}", f"{u.imag:.16e}",
                     f"{du.real:.16e}", f"{du.imag:.16e}", tag]
                )

    def interface_jumps(self, config: ResonatorArray):
        """Continuity and flux residuals at every resonator edge.

        Returns ``(max |u_L - u_R|, max |flux mismatch|)`` where the flux
        mismatch compares the interior derivative with ``delta`` times the
        exterior one.
        """
        tags = np.asarray(self.region_tags)
        cont, flux = 0.0, 0.0
        for i, (xl, xr) in enumerate(extremities(config), 1):
            inside = tags == f"res{i}"
            uin, duin = self.us[inside], self.dus[inside]
            for x_edge, j in ((xl, 0), (xr, -1)):
                other = (~inside) & np.isclose(self.xs, x_edge, rtol=0, atol=1e-12)
                if not other.any():
                    continue
                k = np.flatnonzero(other)[0]
                cont = max(cont, abs(self.us[k] - uin[j]))
                flux = max(flux, abs(duin[j] - config.contrast * self.dus[k]))
        return cont, flux


def residual_scale(omega, config: ResonatorArray, rc) -> np.ndarray:
    """Magnitude scale ``1 + |M|_F |b_L| |b_R|`` for characteristic determinants."""
    m = symmetrised_total(omega, config)
    v = config.speed_background
    l1, l2 = rc.left_vector(omega, v)
    r1, r2 = right_vector(omega, v)
    nm = np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))
    nl = np.sqrt(np.abs(l1) ** 2 + np.abs(l2) ** 2)
    nr = np.sqrt(np.abs(r1) ** 2 + np.abs(r2) ** 2)
    return 1.0 + nm * nl * nr


def _char_det(omega, config, rc):
    m = symmetrised_total(omega, config)
    v = config.speed_background
    l1, l2 = rc.left_vector(omega, v)
    r1, r2 = right_vector(omega, v)
    a = m[..., 0, 0] * l1 + m[..., 0, 1] * l2
    b = m[..., 1, 0] * l1 + m[..., 1, 1] * l2
    return a * r2 - b * r1


def propagate_mode(
    omega: complex,
    config: ResonatorArray,
    rc,
    samples_per_region: int = 64,
    pad: float = 0.0,
    tol: float = 1e-8,
) -> ModeTrace:
    """Reconstruct the resonant mode at ``omega``.

    The mode starts from the left closure vector normalised so that
    ``|(u(x_1^L), u'|_L(x_1^L))|_2 = 1`` and is filled region by region with
    the exact piecewise solution.  ``pad > 0`` adds exterior samples on both
    sides.
    """
    if samples_per_region < 2:
        raise ValueError("samples_per_region must be >= 2")
    omega = complex(omega)
    f = abs(_char_det(omega, config, rc))
    scale = float(residual_scale(omega, config, rc))
    if f > tol * scale:
        raise NotAResonance(f"|f({omega})| = {f:.3e} exceeds {tol:.1e} x scale {scale:.3e}")
    b = np.array([x for x in rc.left_vector(omega, config.speed_background)], dtype=complex)
    b = b / np.linalg.norm(b)
    xs, us, dus, tags = [], [], [], []
    for region, entry in _walk(omega, config, b, pad):
        t = np.linspace(0.0, region.x1 - region.x0, samples_per_region)
        st = _local(region, t, omega, config) @ entry
        xs.append(region.x0 + t)
        us.append(st[:, 0])
        dus.append(st[:, 1])
        tags.extend([region.tag] * samples_per_region)
    return ModeTrace(
        np.concatenate(xs), np.concatenate(us), np.concatenate(dus), omega, tuple(tags)
    )


def solution_at(x, omega: complex, config: ResonatorArray, left_state):
    """Evaluate ``(u(x), u'(x))`` of the solution with given data at ``x_1^L``.

    Points on an interface belong to the left-most region containing them;
    inside resonators ``u'`` is the interior derivative.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.full(x.shape, np.nan, dtype=complex)
    du = np.full(x.shape, np.nan, dtype=complex)
    span = config.total_length
    pad = max(0.0, config.left_anchor - x.min(), x.max() - (config.left_anchor + span)) + 1.0
    done = np.zeros(x.shape, dtype=bool)
    for region, entry in _walk(omega, config, left_state, pad):
        sel = (~done) & (x >= region.x0 - 1e-15) & (x <= region.x1 + 1e-15)
        if not sel.any():
            continue
        st = _local(region, x[sel] - region.x0, omega, config) @ entry
        u[sel] = st[:, 0]
        du[sel] = st[:, 1]
        done |= sel
    return u, du


def green_function(x, y, omega: complex, config: ResonatorArray, rc, rtol: float = 1e-13):
    """Green's kernel ``G(x, y; omega)`` on ``[x_1^L, x_N^R]``.

    ``G = -u1(min(x, y)) u2(max(x, y)) / W(y)``, with ``u1`` satisfying the left
    closure of ``rc``, ``u2`` the outgoing right closure and
    ``W = u1 u2' - u1' u2`` evaluated at ``y``.
    """
    cfg = config.with_trailing_spacing(0.0)
    omega = complex(omega)
    v = cfg.speed_background
    left = np.array(rc.left_vector(omega, v), dtype=complex)
    right = np.array(right_vector(omega, v), dtype=complex)
    m = total_matrix(omega, cfg)
    left2 = np.linalg.solve(m, right)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xb, yb = np.broadcast_arrays(x, y)
    lo, hi = np.minimum(xb, yb), np.maximum(xb, yb)
    u1y, du1y = solution_at(yb.ravel(), omega, cfg, left)
    u2y, du2y = solution_at(yb.ravel(), omega, cfg, left2)
    w = u1y * du2y - du1y * u2y
    if np.any(np.abs(w) <= rtol * (np.abs(u1y * du2y) + np.abs(du1y * u2y))):
        raise AtResonance(f"Wronskian vanishes at omega = {omega}")
    u1, _ = solution_at(lo.ravel(), omega, cfg, left)
    u2, _ = solution_at(hi.ravel(), omega, cfg, left2)
    g = -u1 * u2 / w
    return g.reshape(xb.shape) if xb.ndim else complex(g[0])


def transmission(omega, config: ResonatorArray):
    """Transmission coefficient ``T(omega) = |u(x_N^R)|`` for real ``omega``.

    A unit plane wave arrives from the left; the forcing is evaluated at
    ``x = x_1^L``.
    """
    cfg = config.with_trailing_spacing(0.0)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega == 0):
        raise ValueError("transmission is defined for omega != 0")
    k = omega / cfg.speed_background
    m = total_matrix(omega.astype(complex), cfg)
    m11, m12, m21, m22 = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    rhs = 2j * k * np.exp(1j * k * cfg.left_anchor)
    # rows: b + i k a = rhs ; (m21 - i k m11) a + (m22 - i k m12) b = 0
    p, q = m21 - 1j * k * m11, m22 - 1j * k * m12
    det = 1j * k * q - p
    if np.any(np.abs(det) <= 1e-14 * (np.abs(k * q) + np.abs(p))):
        raise SingularSystem("transmission system is singular")
    a = rhs * q / det
    b = -rhs * p / det
    return np.abs(m11 * a + m12 * b)
