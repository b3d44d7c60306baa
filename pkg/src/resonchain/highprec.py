"""Extended-precision evaluation of the characteristic determinant.

Near a tight cluster of zeros at small contrast the block entries grow like
``1/delta`` and double precision leaves only a few digits of ``f``; the
splitting of an approximate exceptional point at ``delta = 1e-8`` is of the
order of that rounding floor.  These routines repeat the symmetrised chain in
``mpmath`` arithmetic so clusters can be resolved into individual zeros.
"""

from __future__ import annotations

from typing import Callable, Sequence

import mpmath as mp

from .errors import NewtonDiverged
from .model import LeftAngle, OutgoingBoth, PerfectTransmission, ResonatorArray

__all__ = ["char_det_mp", "split_cluster_mp", "locate_exceptional_point"]


def _even(q, ell):
    """``cos(l sqrt q)`` and ``sin(l sqrt q)/sqrt q`` (branch independent)."""
    if q == 0:
        return mp.mpf(1), mp.mpf(ell)
    r = mp.sqrt(q)
    return mp.cos(ell * r), mp.sin(ell * r) / r


def _left(omega, v, rc):
    if isinstance(rc, OutgoingBoth):
        return mp.mpf(1), -1j * omega / v
    if isinstance(rc, PerfectTransmission):
        return mp.mpf(1), 1j * omega / v
    if isinstance(rc, LeftAngle):
        c, s = mp.cos(rc.theta), mp.sin(rc.theta)
        return c + s, 1j * omega / v * (c - s)
    raise TypeError(f"unknown radiation condition {rc!r}")


def char_det_mp(omega, config: ResonatorArray, rc) -> mp.mpc:
    """``det(M b_L | b_R)`` evaluated at the current ``mpmath`` precision."""
    omega = mp.mpc(omega)
    delta = mp.mpf(config.contrast)
    v = mp.mpf(config.speed_background)
    m = [mp.mpf(1), mp.mpf(0), mp.mpf(0), mp.mpf(1)]
    for ell, sp, vi, gamma in zip(config.lengths, config.spacings,
                                  config.speeds_inside, config.gauges):
        vi = mp.mpc(vi)
        gamma = mp.mpf(gamma)
        k2 = (omega / vi) ** 2
        c, s = _even(k2 - gamma**2, mp.mpf(ell))
        a = (c + gamma * s, delta * s, -k2 * s / delta, c - gamma * s)
        ke2 = (omega / v) ** 2
        ce, se = _even(ke2, mp.mpf(sp))
        e = (ce, se, -ke2 * se, ce)
        b = (
            e[0] * a[0] + e[1] * a[2], e[0] * a[1] + e[1] * a[3],
            e[2] * a[0] + e[3] * a[2], e[2] * a[1] + e[3] * a[3],
        )
        m = [
            b[0] * m[0] + b[1] * m[2], b[0] * m[1] + b[1] * m[3],
            b[2] * m[0] + b[3] * m[2], b[2] * m[1] + b[3] * m[3],
        ]
    l1, l2 = _left(omega, v, rc)
    r1, r2 = mp.mpf(1), 1j * omega / v
    top = m[0] * l1 + m[1] * l2
    bot = m[2] * l1 + m[3] * l2
    return top * r2 - bot * r1


def split_cluster_mp(seeds: Sequence[complex], config: ResonatorArray, rc,
                     dps: int = 40) -> list[complex]:
    """Resolve the zeros near ``seeds`` one by one with deflated Muller steps.

    Each zero found is divided out of ``f`` before the next search, so two
    seeds in the same basin still converge to distinct zeros.  Seeds should
    approximate individual zeros rather than a cluster centre, where ``f'``
    nearly vanishes.
    """
    found: list = []
    with mp.workdps(dps):
        for seed in seeds:
            def g(z, found=tuple(found)):
                val = char_det_mp(z, config, rc)
                for r in found:
                    val /= z - r
                return val

            z0 = mp.mpc(seed)
            h = mp.mpf(10) ** (-dps // 3) * max(1, abs(z0))
            z = mp.findroot(g, (z0, z0 + h, z0 + 1j * h), solver="muller", verify=False,
                            maxsteps=200)
            if not abs(g(z)) <= mp.mpf(10) ** (-dps // 2) * max(1, abs(g(z0))):
                raise NewtonDiverged(f"extended-precision search from {seed} did not converge")
            found.append(z)
        return sorted((complex(z) for z in found), key=lambda w: (w.real, w.imag))


def locate_exceptional_point(build: Callable[[float, float], ResonatorArray], omega0: complex,
                             params0: tuple[float, float], rc, dps: int = 30,
                             maxiter: int = 40) -> tuple[complex, tuple[float, float]]:
    """Tune two real parameters until ``f`` has a double zero.

    Solves ``f(w) = f'(w) = 0`` for ``(w, p1, p2)`` by Newton's method on the
    four real components.  ``build(p1, p2)`` returns the configuration; the
    parameter columns of the Jacobian are central differences.
    """
    with mp.workdps(dps):
        w = mp.mpc(omega0)
        p = [float(params0[0]), float(params0[1])]

        def residual(w, p):
            cfg = build(*p)
            f = lambda z: char_det_mp(z, cfg, rc)  # noqa: E731
            return f, cfg

        for _ in range(maxiter):
            f, cfg = residual(w, p)
            g = [f(w), mp.diff(f, w)]
            d2 = mp.diff(f, w, 2)
            cols = [[g[1], d2], [1j * g[1], 1j * d2]]
            for k in range(2):
                h = 1e-6 * max(1.0, abs(p[k]))
                hi, lo = list(p), list(p)
                hi[k] += h
                lo[k] -= h
                fh, _ = residual(w, hi)
                fl, _ = residual(w, lo)
                span = hi[k] - lo[k]
                cols.append([(fh(w) - fl(w)) / span,
                             (mp.diff(fh, w) - mp.diff(fl, w)) / span])
            jac = mp.matrix(4, 4)
            for j, col in enumerate(cols):
                jac[0, j], jac[1, j] = mp.re(col[0]), mp.im(col[0])
                jac[2, j], jac[3, j] = mp.re(col[1]), mp.im(col[1])
            rhs = mp.matrix([mp.re(g[0]), mp.im(g[0]), mp.re(g[1]), mp.im(g[1])])
            step = mp.lu_solve(jac, -rhs)
            w += step[0] + 1j * step[1]
            p = [p[0] + float(step[2]), p[1] + float(step[3])]
            if abs(step[2]) + abs(step[3]) <= 1e-15 * (1 + abs(p[0]) + abs(p[1])) and \
                    abs(step[0] + 1j * step[1]) <= mp.mpf(10) ** (-dps // 2) * max(1, abs(w)):
                return complex(w), (p[0], p[1])
    raise NewtonDiverged(f"exceptional-point search from {omega0}, {params0} did not converge")
