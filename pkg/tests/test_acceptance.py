"""Acceptance checks, one per criterion.

Run under pytest (a PASS/FAIL line per criterion is printed in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

import cmath
import json
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from oracles import char_poly_eigenvalues  # noqa: E402
from resonchain import cli  # noqa: E402
from resonchain.capacitance import (  # noqa: E402
    CapacitanceMatrix,
    capacitance_matrix,
    eigenvalues,
    predict_resonances,
)
from resonchain.model import OUTGOING, PERFECT_TRANSMISSION, make_array  # noqa: E402
from resonchain.propagation import green_function, propagate_mode, total_matrix  # noqa: E402
from resonchain.skin import (  # noqa: E402
    band_scan,
    cell_matrix,
    envelope_report,
    quasimomentum,
    replicate,
)
from resonchain.spectra import (  # noqa: E402
    SearchRegion,
    char_det,
    classify_exceptional,
    count_zeros_in_disk,
    delta_zero_spectrum,
    find_resonances,
    transmission_peaks,
)
from resonchain.systems import THETA_C, pt_dimer, skin_cell, trimer, unit_dimer  # noqa: E402

RESULTS: list[str] = []
DELTAS = np.geomspace(1e-8, 1e-4, 9)


def _report(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def _slope(x, y):
    return cli.fit_slope(x, y, asymptotic_half=False).slope


# 1 -------------------------------------------------------------------------------


def crit_determinants():
    rng = np.random.default_rng(20240101)
    worst_plain = worst_gauge = worst_rel = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        lengths = rng.uniform(0.5, 1.5, n)
        spacings = rng.uniform(0.5, 1.5, n - 1)
        speeds = rng.uniform(0.5, 2, n)
        delta = rng.uniform(0.1, 1)
        w = complex(rng.uniform(-3, 3), rng.uniform(-0.5, 0.5))
        gam = rng.uniform(-0.5, 0.5, n)
        target = math.exp(-2 * float(np.dot(lengths, gam)))
        for g, t in ((None, 1.0), (list(gam), target)):
            m = total_matrix(w, make_array(lengths, spacings, speeds=list(speeds), delta=delta,
                                           gauges=g))
            err = abs(np.linalg.det(m) - t)
            if g is None:
                worst_plain = max(worst_plain, err)
            else:
                worst_gauge = max(worst_gauge, err)
            # rounding of the entries alone moves det by ~eps |a11 a22|
            size = abs(m[0, 0] * m[1, 1]) + abs(m[0, 1] * m[1, 0])
            worst_rel = max(worst_rel, err / (np.finfo(float).eps * max(1.0, size)))
    ok = worst_plain <= 1e-12 and worst_gauge <= 1e-12
    return ok, (f"max |det-1| = {worst_plain:.2e}, max |det_gauge - target| = {worst_gauge:.2e},"
                f" max error / (eps |a11 a22|) = {worst_rel:.2f}")


# 2 -------------------------------------------------------------------------------


def crit_delta_zero():
    z = delta_zero_spectrum(unit_dimer(0.1), (0.1, 4)).at(math.pi)
    order = None if z is None else z.order
    count = count_zeros_in_disk(math.pi, 0.2, unit_dimer(1e-6))
    return order == 3 and count == 3, f"order at pi = {order}, disk count = {count}"


# 3 -------------------------------------------------------------------------------


def crit_capacitance():
    worst = 0.0
    for theta in (0.0, math.pi / 8, math.pi / 4, math.pi / 2):
        lam = eigenvalues(capacitance_matrix(0.0, trimer(theta, 0.1)))
        ref = np.array([0, 1, 1 + 2 * math.cos(2 * theta)], dtype=complex)
        worst = max(worst, max(np.min(np.abs(lam - r)) for r in ref),
                    max(np.min(np.abs(ref - x)) for x in lam))
    c = capacitance_matrix(0.0, trimer(math.pi / 4, 0.1)).dense()
    rank = int(np.linalg.matrix_rank(c - np.eye(3), tol=1e-10))
    return worst <= 1e-12 and rank == 2, f"max eigenvalue error {worst:.2e}, rank(C-I) = {rank}"


# 4 -------------------------------------------------------------------------------


def crit_asymptotics():
    errs = []
    for d in DELTAS[::2]:
        s = math.sqrt(d)
        roots = np.array([r.omega for r in find_resonances(
            SearchRegion(-2.5 * s, 2.5 * s, -s, s), trimer(0.0, d))])
        pred = predict_resonances(0.0, d, trimer(0.0, 0.1))
        errs.append(max(np.min(np.abs(roots - p)) for p in pred))
    slope = _slope(DELTAS[::2], errs)
    ok = slope >= 0.9 and errs[0] <= 1e-7
    return ok, f"slope {slope:.4f}, error at 1e-8 = {errs[0]:.2e}"


# 5, 6 ------------------------------------------------------------------------------


def _sweep(tmp, argv):
    code = cli.main(argv + ["--out", str(tmp)])
    if code != 0:
        return math.nan
    with open(os.path.join(tmp, "slope.json")) as fh:
        return json.load(fh)["slope"]


def crit_trimer_gap(tmp):
    base = ["sweep", "--family", "trimer", "--param", "delta", "--start", "1e-8", "--stop",
            "1e-4", "--count", "9", "--window-scaling", "sqrt_delta", "--re-min", "0.5",
            "--re-max", "2.5", "--im-min", "-1", "--im-max", "1"]
    ep = _sweep(os.path.join(tmp, "ep"), base + ["--theta", repr(math.pi / 4)])
    reg = _sweep(os.path.join(tmp, "reg"), base + ["--theta", "0"])
    ok = abs(ep - 1.0) <= 0.1 and abs(reg - 0.5) <= 0.05
    return ok, f"slope {ep:.4f} at theta=pi/4, {reg:.4f} at theta=0"


def crit_radiation(tmp):
    slope = _sweep(tmp, ["sweep", "--family", "radiation_dimer", "--param", "delta", "--start",
                         "1e-8", "--stop", "1e-4", "--count", "9", "--window-scaling", "delta",
                         "--center", repr(math.pi), "--re-min", "-0.5", "--re-max", "0.5",
                         "--im-min", "-1", "--im-max", "0", "--dps", "40"])
    disc = abs(-1 + 6 * THETA_C - THETA_C**2)
    ok = abs(slope - 1.5) <= 0.1 and disc <= 1e-12
    return ok, f"slope {slope:.4f}, |-1+6t-t^2| = {disc:.1e}"


# 7 -------------------------------------------------------------------------------


def crit_pt():
    d = 1e-2
    w = np.linspace(0.1, 2 * math.pi, 200)
    worst = 0.0
    for s in np.linspace(0.5, 1.5, 21):
        num = char_det(w, pt_dimer(s, d), PERFECT_TRANSMISSION)
        ref = w * (d * d - 1) / d**2 * np.sin(w) * (
            -2 * d * np.cos(w) * np.cos(w * s) + (1 + d * d) * np.sin(w) * np.sin(w * s))
        worst = max(worst, float(np.max(np.abs(num - ref)) / np.max(np.abs(ref))))
    eps = []
    for dd in (1e-1, 1e-2, 1e-3):
        found = find_resonances(SearchRegion(2.9, 3.4, -0.2, 0.2), pt_dimer(1.5, dd),
                                PERFECT_TRANSMISSION)
        eps.append(any(abs(r.omega - math.pi) < 1e-6 and r.multiplicity == 2
                       and classify_exceptional(r, dd)["is_ep"] for r in found))
    ok = worst <= 1e-10 and all(eps)
    return ok, f"max relative deviation {worst:.2e}, EP at pi for delta 1e-1/1e-2/1e-3: {eps}"


# 8 -------------------------------------------------------------------------------


def crit_sensitivity(tmp):
    slopes = {}
    for fam in ("trimer", "radiation_dimer", "pt_dimer"):
        out = os.path.join(tmp, fam)
        code = cli.main(["sensitivity", "--family", fam, "--delta", "1e-6", "--start", "1e-8",
                         "--stop", "1e-4", "--count", "9", "--out", out])
        if code == 0:
            with open(os.path.join(out, "slope.json")) as fh:
                slopes[fam] = json.load(fh)["slope"]
        else:
            slopes[fam] = math.nan
    ok = all(abs(s - 0.5) <= 0.05 for s in slopes.values())
    return ok, ", ".join(f"{k} {v:.4f}" for k, v in slopes.items())


# 9, 10 -----------------------------------------------------------------------------


def _band_resonances(cell, band, m):
    a, b = band
    return find_resonances(SearchRegion(a, b, -0.5, 0.05), replicate(cell, m))


def crit_skin():
    cell = skin_cell(1.0)
    _, bands = band_scan(cell, (0.01, 7.0), 1000)
    slopes, spreads = [], []
    for band in bands[:2]:
        mid = 0.5 * sum(band)
        found = sorted(_band_resonances(cell, band, 20), key=lambda r: abs(r.omega.real - mid))
        for r in found[:3]:
            mode = propagate_mode(r.omega, replicate(cell, 20), OUTGOING, samples_per_region=64)
            rep = envelope_report(mode, cell, 20)
            slopes.append(rep.slope)
            spreads.append(rep.ratio_spread)
    control = skin_cell(0.0)
    _, cbands = band_scan(control, (0.01, 4.0), 500)
    mid = 0.5 * sum(cbands[0])
    r = min(_band_resonances(control, cbands[0], 20), key=lambda r: abs(r.omega.real - mid))
    mode = propagate_mode(r.omega, replicate(control, 20), OUTGOING, samples_per_region=64)
    c_slope = envelope_report(mode, control, 20).slope
    ok = (len(slopes) >= 5 and all(abs(s + 1) <= 0.1 for s in slopes)
          and max(spreads) <= 10 and abs(c_slope) <= 0.05)
    return ok, (f"{len(slopes)} modes in 2 bands, slopes in [{min(slopes):.4f}, {max(slopes):.4f}],"
                f" max spread {max(spreads):.3f}, control slope {c_slope:.2e}")


def crit_bands():
    cell = skin_cell(1.0)
    rng = np.random.default_rng(10)
    w = np.concatenate([rng.uniform(0.01, 7, 500),
                        rng.uniform(0.01, 7, 500) + 1j * rng.uniform(-0.3, 0.3, 500)])
    worst_k = 0.0
    for x in w:
        tr = np.trace(cell_matrix(x, cell))
        worst_k = max(worst_k, abs(2 * np.cos(quasimomentum(x, cell)) - tr) / max(1, abs(tr)))
    _, bands = band_scan(cell, (0.01, 7.0), 1000)
    worst_edge = max(abs(abs(np.trace(cell_matrix(e, cell)).real) - 2) for e in np.ravel(bands))
    band = bands[1]
    mid = 0.5 * sum(band)
    ims = []
    for m in (5, 10, 20):
        r = min(_band_resonances(cell, band, m), key=lambda r: abs(r.omega.real - mid))
        ims.append(abs(r.omega.imag))
    exponent = -_slope([5, 10, 20], ims)
    ok = worst_k <= 1e-12 and worst_edge <= 1e-8 and exponent >= 0.9
    return ok, (f"max |2cos k - tr| {worst_k:.1e}, max edge | |tr|-2 | {worst_edge:.1e},"
                f" Im decay exponent {exponent:.4f}")


# 11 ------------------------------------------------------------------------------


def crit_eigensolver():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        cm = CapacitanceMatrix(tuple(rng.normal(size=n) + 1j * rng.normal(size=n)),
                               tuple(rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1)),
                               tuple(rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1)), "test")
        got = eigenvalues(cm)
        for z in char_poly_eigenvalues(cm.dense()):
            worst = max(worst, float(np.min(np.abs(got - z))))
    return worst <= 1e-10, f"max distance {worst:.2e}"


# 12 ------------------------------------------------------------------------------


def crit_green():
    cfg = unit_dimer(0.1)
    w0 = min(find_resonances(SearchRegion(2.9, 3.4, -0.2, 0.01), cfg),
             key=lambda r: abs(r.omega - math.pi)).omega
    rs = (1e-3, 1e-4, 1e-5)
    simple = [abs(r * green_function(0.5, 2.5, w0 + r, cfg, OUTGOING)) for r in rs]
    pt = pt_dimer(1.5, 1e-2)
    g = [green_function(0.5, 3.0, math.pi + r * cmath.exp(0.3j), pt, PERFECT_TRANSMISSION)
         for r in rs]
    second = [abs(r * r * x) for r, x in zip(rs, g)]
    first = [abs(r * x) for r, x in zip(rs, g)]
    s_ratio = max(simple) / min(simple)
    d_ratio = max(second) / min(second)
    growth = first[-1] / first[0]
    ok = s_ratio < 1.1 and d_ratio < 1.1 and growth > 50
    return ok, (f"simple |(w-w0)G| spread {s_ratio:.4f}, double |(w-pi)^2 G| spread {d_ratio:.4f},"
                f" |(w-pi)G| growth {growth:.1f}")


# 13 ------------------------------------------------------------------------------


def crit_transmission():
    cfg = unit_dimer(0.1)
    _, _, peaks = transmission_peaks(cfg, (0.0, math.pi), 2000)
    res = sorted(r.omega.real for r in find_resonances(SearchRegion(0.05, 3.3, -1, 0.1), cfg))
    dist = [min(abs(p - x) for x in res) for p in peaks]
    ok = len(peaks) == 3 and max(dist) <= 5e-2
    return ok, f"{len(peaks)} peaks at {np.round(peaks, 4).tolist()}, max offset {max(dist):.3e}"


# ---------------------------------------------------------------------------------

CRITERIA = [
    (1, "determinant identities", crit_determinants, False),
    (2, "delta=0 spectrum", crit_delta_zero, False),
    (3, "capacitance eigenvalues", crit_capacitance, False),
    (4, "leading-order asymptotics", crit_asymptotics, False),
    (5, "EP coalescence dichotomy", crit_trimer_gap, True),
    (6, "radiation EP", crit_radiation, True),
    (7, "PT closed form", crit_pt, False),
    (8, "square-root sensitivity", crit_sensitivity, True),
    (9, "skin effect", crit_skin, False),
    (10, "band/quasimomentum consistency", crit_bands, False),
    (11, "eigensolver oracle", crit_eigensolver, False),
    (12, "Green's-function pole order", crit_green, False),
    (13, "transmission comb", crit_transmission, False),
]


@pytest.mark.parametrize("number, title, check, needs_dir", CRITERIA,
                         ids=[f"criterion_{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, title, check, needs_dir, tmp_path):
    ok, detail = check(str(tmp_path)) if needs_dir else check()
    assert _report(number, title, ok, detail), detail


if __name__ == "__main__":
    import tempfile

    failed = 0
    with tempfile.TemporaryDirectory() as tmp:
        for number, title, check, needs_dir in CRITERIA:
            ok, detail = check(os.path.join(tmp, str(number))) if needs_dir else check()
            failed += not _report(number, title, ok, detail)
    sys.exit(1 if failed else 0)
