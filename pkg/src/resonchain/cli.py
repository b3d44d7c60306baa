"""``resonchain`` command-line driver.

Every subcommand writes plain CSV/JSON artefacts into ``--out`` and prints a
one-line summary.  Exit codes: 0 success, 2 configuration error, 3 solver
failure, 4 tracking failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import systems
from .capacitance import capacitance_matrix, eigenvalues, gauge_capacitance
from .errors import ConfigError, ContourTooClose, NoInBandResonance, SolverError, TrackingLost
from .highprec import split_cluster_mp
from .model import OUTGOING, PERFECT_TRANSMISSION, LeftAngle, load_config
from .propagation import propagate_mode
from .skin import PeriodicCell, band_scan, bands_to_json, damping_diagnostics, envelope_report, replicate
from .spectra import (
    SearchRegion,
    cluster_roots,
    find_resonances,
    resonances_to_csv,
    resonances_to_json,
    transmission_peaks,
)

FMT = "{:.16e}"


def _f(x: float) -> str:
    return FMT.format(float(x))


# ---------------------------------------------------------------------------
# slope fits and tracking


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    points_used: int

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared, "points_used": self.points_used}


def fit_slope(x, y, asymptotic_half: bool = True) -> SlopeFit:
    """Least-squares slope of ``log y`` against ``log x``.

    With ``asymptotic_half`` only the half of the points with the smallest
    ``x`` enter the fit.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    if asymptotic_half:
        keep = max(3, (x.size + 1) // 2)
        x, y = x[:keep], y[:keep]
    if x.size < 3:
        raise ValueError("a slope fit needs at least three points")
    lx, ly = np.log(x), np.log(y)
    a = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(a, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), int(x.size))


def track(frames: list[np.ndarray]) -> list[np.ndarray]:
    """Order the roots of each frame to continue the previous frame's paths.

    Matching is by nearest neighbour to a linear extrapolation of each path.
    A match farther than half the smallest separation between the current
    roots (so that it is the only candidate in reach) raises
    :class:`TrackingLost`.
    """
    if not frames:
        return []
    out = [np.asarray(frames[0], dtype=complex)]
    for k in range(1, len(frames)):
        prev = out[-1]
        cur = np.asarray(frames[k], dtype=complex)
        if cur.size != prev.size:
            raise TrackingLost(f"grid point {k}: {cur.size} roots, expected {prev.size}")
        guess = prev if k < 2 else 2 * prev - out[-2]
        if cur.size > 1:
            sep = min(abs(a - b) for i, a in enumerate(cur) for b in cur[i + 1:])
        else:
            sep = math.inf
        taken = set()
        row = np.empty_like(prev)
        for i, g in enumerate(guess):
            dist = np.abs(cur - g)
            j = int(np.argmin(dist))
            if j in taken or dist[j] > 0.5 * sep:
                raise TrackingLost(f"grid point {k}: root {i} has no unambiguous continuation")
            taken.add(j)
            row[i] = cur[j]
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# helpers


def _complex(text: str) -> complex:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) == 1:
        return complex(parts[0].replace("i", "j"))
    return complex(float(parts[0]), float(parts[1]))


def _grid(kind: str, start: float, stop: float, count: int) -> np.ndarray:
    if count < 5:
        raise ConfigError("sweep grids need at least 5 points")
    if kind == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log grids need positive endpoints")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def _region(args, center=0j, scale=1.0) -> SearchRegion:
    if None in (args.re_min, args.re_max, args.im_min, args.im_max):
        raise ConfigError("--re-min, --re-max, --im-min and --im-max are required")
    return SearchRegion(
        center.real + scale * args.re_min, center.real + scale * args.re_max,
        center.imag + scale * args.im_min, center.imag + scale * args.im_max,
        max_depth=args.max_depth, contour_samples=args.contour_samples,
    )


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write(path: str, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _roots_in(region: SearchRegion, config, rc, tol: float, dps: int | None) -> np.ndarray:
    """All zeros in ``region`` with clusters split into individual zeros."""
    found = find_resonances(region, config, rc, tol)
    roots: list[complex] = []
    for r in found:
        if r.multiplicity == 1:
            roots.append(r.omega)
            continue
        radius = max(1e-6 * region.scale, 1e-11 * max(1.0, abs(r.omega)))
        if dps:
            # spread seeds around the cluster; the centre itself is a poor start
            ring = np.exp(2j * np.pi * (np.arange(r.multiplicity) + 0.25) / r.multiplicity)
            roots.extend(r.omega + 0.1 * radius * ring)
            continue
        try:
            roots.extend(cluster_roots(r.omega, radius, config, rc))
        except ContourTooClose:
            roots.extend([r.omega] * r.multiplicity)
    if dps and roots:
        roots = split_cluster_mp(roots, config, rc, dps)
    return np.array(sorted(roots, key=lambda w: (w.real, w.imag)), dtype=complex)


def _family_config(name: str, theta: float | None, delta: float, extra: float | None):
    if name == "trimer":
        return systems.trimer(math.pi / 4 if theta is None else theta, delta,
                              1.0 if extra is None else extra)
    if name == "radiation_dimer":
        return systems.radiation_dimer(systems.THETA_C if theta is None else theta, delta,
                                       0.5 if extra is None else extra)
    if name == "pt_dimer":
        return systems.pt_dimer(1.5 if extra is None else extra, delta)
    if name == "unit_dimer":
        return systems.unit_dimer(delta)
    raise ConfigError(f"unknown family {name!r}")


def _scale(kind: str, delta: float) -> float:
    return {"fixed": 1.0, "sqrt_delta": math.sqrt(delta), "delta": delta}[kind]


def _pool(args):
    return ThreadPoolExecutor(max_workers=max(1, args.threads))


# ---------------------------------------------------------------------------
# subcommands


def cmd_resonances(args):
    config, rc = load_config(args.config)
    res = find_resonances(_region(args), config, rc, args.tol)
    if args.format == "json":
        path = _out_path(args, "resonances.json")
        _write(path, resonances_to_json(res, config))
    else:
        path = _out_path(args, "resonances.csv")
        _write(path, resonances_to_csv(res))
    print(f"{len(res)} resonances -> {path}")


def _sweep_config(args, value):
    if args.config:
        config, rc = load_config(args.config)
    else:
        if not args.family:
            raise ConfigError("either --config or --family is required")
        config = _family_config(args.family, args.theta, args.delta, args.extra)
        rc = PERFECT_TRANSMISSION if args.family == "pt_dimer" else OUTGOING
    p = args.param
    if p == "delta":
        config = config.with_contrast(value)
    elif p == "theta":
        if not args.family:
            raise ConfigError("--param theta needs --family")
        config = _family_config(args.family, value, config.contrast, args.extra)
    elif p == "thetaL":
        rc = LeftAngle(value)
    elif p == "epsilon":
        config = _perturb(config, args.target, value)
    return config, rc


def _perturb(config, target: str | None, eps: float):
    if not target:
        raise ConfigError("--param epsilon needs --target field:index")
    field, _, index = target.partition(":")
    if field not in ("lengths", "spacings", "speeds_inside", "gauges"):
        raise ConfigError(f"cannot perturb field {field!r}")
    values = list(getattr(config, field))
    i = int(index or 0)
    values[i] = values[i] + eps
    return replace(config, **{field: tuple(values)})


def cmd_sweep(args):
    values = _grid(args.grid, args.start, args.stop, args.count)
    center = _complex(args.center)

    def solve(value):
        config, rc = _sweep_config(args, value)
        delta = config.contrast
        s = _scale(args.window_scaling, delta)
        region = _region(args, center, s)
        return (_roots_in(region, config, rc, args.tol, args.dps) - center) / s, s

    with _pool(args) as pool:
        results = list(pool.map(solve, values))
    paths = track([r[0] for r in results])
    scales = [r[1] for r in results]
    rows, quantity = [], []
    for value, zeta, s in zip(values, paths, scales):
        roots = center + s * zeta
        if args.track in ("gap", "splitting"):
            if roots.size < 2:
                raise TrackingLost(f"fewer than two roots at {args.param} = {value}")
            i, j = _closest_pair(roots)
            q = abs(roots[i] - roots[j])
            quantity.append(q)
            rows.append([_f(value), _f(q)] + [_f(x) for w in (roots[i], roots[j])
                                              for x in (w.real, w.imag)])
        else:
            rows.append([_f(value)] + [_f(x) for w in roots for x in (w.real, w.imag)])
    header = _sweep_header(args, paths)
    path = _out_path(args, "sweep.csv")
    _write(path, _csv([header] + rows))
    fit = None
    if quantity and args.grid == "log":
        fit = fit_slope(values, quantity)
        _write(_out_path(args, "slope.json"), json.dumps(fit.to_dict(), indent=2))
    print(f"{len(values)} grid points -> {path}" + (f"; slope {fit.slope:.6f}" if fit else ""))
    return fit


def _sweep_header(args, paths):
    if args.track in ("gap", "splitting"):
        return [args.param, args.track, "re_a", "im_a", "re_b", "im_b"]
    n = paths[0].size if paths else 0
    return [args.param] + [f"{p}_omega_{k + 1}" for k in range(n) for p in ("re", "im")]


def _closest_pair(roots):
    best = (math.inf, 0, 1)
    for i in range(roots.size):
        for j in range(i + 1, roots.size):
            d = abs(roots[i] - roots[j])
            if d < best[0]:
                best = (d, i, j)
    return best[1], best[2]


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def sensitivity_base(family: str, delta: float, tune: bool = True):
    """Base configuration, radiation condition, EP location and window half-width."""
    if family == "trimer":
        if tune:
            w, th, l1 = systems.tune_trimer_ep(delta)
        else:
            w, th, l1 = complex(math.sqrt(delta)), math.pi / 4, 1.0
        return systems.trimer(th, delta, l1), OUTGOING, w, 0.3 * math.sqrt(delta), "lengths:0"
    if family == "radiation_dimer":
        if tune:
            w, th, s = systems.tune_radiation_ep(delta)
        else:
            th, s = systems.THETA_C, 0.5
            w = math.pi + systems.radiation_lambda(th)[0] * delta
        return systems.radiation_dimer(th, delta, s), OUTGOING, w, 0.3 * delta, "theta"
    if family == "pt_dimer":
        return systems.pt_dimer(1.5, delta), PERFECT_TRANSMISSION, complex(math.pi), 0.3 * delta, "thetaL"
    raise ConfigError(f"no EP preset for family {family!r}")


def perturbed(config, rc, target: str, eps: float):
    if target == "thetaL":
        theta = rc.theta if isinstance(rc, LeftAngle) else 0.0
        return config, LeftAngle(theta + eps)
    if target == "theta":
        th = config.lengths[0] + eps
        return replace(config, lengths=(th,) + config.lengths[1:],
                       speeds_inside=(complex(th),) + config.speeds_inside[1:]), rc
    return _perturb(config, target, eps), rc


def splitting(config, rc, center: complex, half_width: float, tol=1e-10, dps=None):
    """The two zeros nearest ``center`` and their distance."""
    region = SearchRegion.around(complex(center), half_width)
    roots = _roots_in(region, config, rc, tol, dps)
    if roots.size < 2:
        raise SolverError(f"fewer than two zeros within {half_width:g} of {center}")
    near = sorted(roots, key=lambda w: abs(w - center))[:2]
    return abs(near[0] - near[1]), near


def cmd_sensitivity(args):
    eps = _grid("log", args.start, args.stop, args.count)
    if args.family:
        config, rc, center, hw, target = sensitivity_base(args.family, args.delta, not args.no_tune)
    else:
        config, rc = load_config(args.config)
        target = args.target
        center = _complex(args.center)
        hw = args.half_width
        if not target or hw is None:
            raise ConfigError("--config runs need --target, --center and --half-width")
    if args.target:
        target = args.target

    def solve(e):
        cfg, r = perturbed(config, rc, target, e)
        return splitting(cfg, r, center, hw, args.tol, args.dps)

    with _pool(args) as pool:
        results = list(pool.map(solve, eps))
    rows = [["epsilon", "splitting", "re_a", "im_a", "re_b", "im_b"]]
    for e, (q, (a, b)) in zip(eps, results):
        rows.append([_f(e), _f(q), _f(a.real), _f(a.imag), _f(b.real), _f(b.imag)])
    path = _out_path(args, "sensitivity.csv")
    _write(path, _csv(rows))
    fit = fit_slope(eps, [r[0] for r in results])
    _write(_out_path(args, "slope.json"), json.dumps(fit.to_dict(), indent=2))
    print(f"{len(eps)} perturbations -> {path}; slope {fit.slope:.6f}")
    return fit


def cmd_transmission(args):
    config, _ = load_config(args.config)
    grid, t, peaks = transmission_peaks(config, (args.omega_min, args.omega_max), args.samples)
    rows = [["omega", "T"]] + [[_f(w), _f(x)] for w, x in zip(grid, t)]
    path = _out_path(args, "transmission.csv")
    _write(path, _csv(rows))
    _write(_out_path(args, "peaks.csv"), _csv([["omega_peak"]] + [[_f(p)] for p in peaks]))
    print(f"{len(peaks)} peaks -> {path}")


def _skin_cell(args) -> PeriodicCell:
    config, _ = load_config(args.config)
    return PeriodicCell(config)


def cmd_bands(args):
    cell = _skin_cell(args)
    diags, bands = band_scan(cell, (args.omega_min, args.omega_max), args.samples)
    rows = [["omega", "trace", "re_k", "im_k", "in_band"]]
    for d in diags:
        rows.append([_f(d.omega), _f(d.trace), _f(d.k.real), _f(d.k.imag), int(d.in_band)])
    _write(_out_path(args, "band_scan.csv"), _csv(rows))
    path = _out_path(args, "bands.json")
    _write(path, bands_to_json(bands))
    print(f"{len(bands)} bands -> {path}")


def cmd_skin(args):
    cell = _skin_cell(args)
    _, bands = band_scan(cell, (args.omega_min, args.omega_max), args.samples)
    _write(_out_path(args, "bands.json"), bands_to_json(bands))
    if not 0 <= args.band_index < len(bands):
        raise NoInBandResonance(f"band {args.band_index} not found ({len(bands)} bands)")
    a, b = bands[args.band_index]
    config = replicate(cell, args.M)
    im_min = -0.5 if args.im_min is None else args.im_min
    im_max = 0.05 if args.im_max is None else args.im_max
    res = find_resonances(SearchRegion(a, b, im_min, im_max), config, OUTGOING, args.tol)
    if not res:
        raise NoInBandResonance(f"no resonances with real part in band [{a}, {b}]")
    mid = 0.5 * (a + b)
    chosen = min(res, key=lambda r: abs(r.omega.real - mid))
    mode = propagate_mode(chosen.omega, config, OUTGOING, samples_per_region=64)
    rep = envelope_report(mode, cell, args.M)
    path = _out_path(args, "envelope.csv")
    _write(path, rep.to_csv())
    gamma = max(abs(g) for g in cell.unit.gauges)
    rows = [["re_omega", "im_omega", "re_nu", "im_nu", "regime"]]
    for r in res:
        d = damping_diagnostics(r.omega, gamma)
        rows.append([_f(r.omega.real), _f(r.omega.imag), _f(d["nu"].real), _f(d["nu"].imag),
                     d["regime"]])
    _write(_out_path(args, "damping.csv"), _csv(rows))
    print(f"omega {chosen.omega:.10f}: slope {rep.slope:.6f}, ratio spread {rep.ratio_spread:.4f}"
          f" -> {path}")


def cmd_capacitance(args):
    config, _ = load_config(args.config)
    cm = gauge_capacitance(config) if args.gauge else capacitance_matrix(_complex(args.omega0), config)
    lam = eigenvalues(cm)
    payload = {"matrix": json.loads(cm.to_json()),
               "eigenvalues": [[float(z.real), float(z.imag)] for z in lam]}
    path = _out_path(args, "capacitance.json")
    _write(path, json.dumps(payload, indent=2))
    print(json.dumps(payload))


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config")
    common.add_argument("--out", default=".")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--re-min", type=float)
    common.add_argument("--re-max", type=float)
    common.add_argument("--im-min", type=float)
    common.add_argument("--im-max", type=float)
    common.add_argument("--max-depth", type=int, default=40)
    common.add_argument("--contour-samples", type=int, default=256)
    common.add_argument("--dps", type=int, default=None,
                        help="resolve clusters with this many decimal digits")

    p = argparse.ArgumentParser(prog="resonchain", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("resonances", parents=[common])
    s.set_defaults(func=cmd_resonances)

    s = sub.add_parser("sweep", parents=[common])
    s.add_argument("--param", choices=("delta", "theta", "epsilon", "thetaL"), default="delta")
    s.add_argument("--family", choices=("trimer", "radiation_dimer", "pt_dimer", "unit_dimer"))
    s.add_argument("--theta", type=float)
    s.add_argument("--delta", type=float, default=1e-6)
    s.add_argument("--extra", type=float, help="family parameter: l_1 (trimer) or s")
    s.add_argument("--target", help="field:index perturbed by --param epsilon")
    s.add_argument("--grid", choices=("log", "linear"), default="log")
    s.add_argument("--start", type=float, required=True)
    s.add_argument("--stop", type=float, required=True)
    s.add_argument("--count", type=int, default=9)
    s.add_argument("--track", choices=("gap", "roots", "splitting"), default="gap")
    s.add_argument("--window-scaling", choices=("fixed", "sqrt_delta", "delta"), default="fixed")
    s.add_argument("--center", default="0")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("sensitivity", parents=[common])
    s.add_argument("--family", choices=("trimer", "radiation_dimer", "pt_dimer"))
    s.add_argument("--delta", type=float, default=1e-6)
    s.add_argument("--target", help="lengths:i | spacings:i | theta | thetaL")
    s.add_argument("--center", default="0")
    s.add_argument("--half-width", type=float)
    s.add_argument("--start", type=float, default=1e-8)
    s.add_argument("--stop", type=float, default=1e-4)
    s.add_argument("--count", type=int, default=9)
    s.add_argument("--no-tune", action="store_true",
                   help="keep the nominal parameters instead of the exact double zero")
    s.set_defaults(func=cmd_sensitivity)

    s = sub.add_parser("transmission", parents=[common])
    s.add_argument("--omega-min", type=float, default=0.0)
    s.add_argument("--omega-max", type=float, default=math.pi)
    s.add_argument("--samples", type=int, default=2000)
    s.set_defaults(func=cmd_transmission)

    for name, func in (("skin", cmd_skin), ("bands", cmd_bands)):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--omega-min", type=float, default=0.01)
        s.add_argument("--omega-max", type=float, default=8.0)
        s.add_argument("--samples", type=int, default=2000)
        if name == "skin":
            s.add_argument("--M", type=int, default=20)
            s.add_argument("--band-index", type=int, default=0)
        s.set_defaults(func=func)

    s = sub.add_parser("capacitance", parents=[common])
    s.add_argument("--omega0", default="0")
    s.add_argument("--gauge", action="store_true")
    s.set_defaults(func=cmd_capacitance)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except TrackingLost as exc:
        print(f"tracking lost: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
