import math
from dataclasses import replace

import mpmath as mp
import numpy as np
import pytest

from oracles import mp_gauge_cell_trace

from resonchain.errors import ConfigError, OutOfBand
from resonchain.model import OUTGOING, make_array
from resonchain.propagation import propagate_mode, symmetrised_total
from resonchain.skin import (
    PeriodicCell,
    band_scan,
    bands_to_json,
    cell_matrix,
    damping_diagnostics,
    envelope_report,
    gamma_profile,
    quasimomentum,
    replicate,
)
from resonchain.spectra import SearchRegion, count_zeros, find_resonances
from resonchain.systems import skin_cell

FIG8_BANDS = [
    (0.27620924798944824, 0.629382070762148),
    (2.6424111612504473, 3.1556921106225224),
    (3.2839778965724933, 3.8137355093900664),
]


@pytest.fixture(scope="module")
def fig8():
    cell = skin_cell(1.0)
    _, bands = band_scan(cell, (0.01, 7.0), 1000)
    return cell, bands


def test_cell_requires_trailing_gap():
    with pytest.raises(ConfigError):
        PeriodicCell(make_array([1, 1], [1]))
    cell = PeriodicCell(make_array([1], [1], left_anchor=3.0))
    assert cell.unit.left_anchor == 0.0 and cell.period == 2.0


def test_replicate():
    cell = skin_cell(1.0)
    one = replicate(cell, 1)
    assert one.spacings == (0.0,) and one.lengths == (1.0,)
    big = replicate(cell, 20)
    assert big.n == 20 and big.total_length == 39.0
    assert big.spacings == (1.0,) * 19 + (0.0,)
    assert big.gauges == (1.0,) * 20
    with pytest.raises(ValueError):
        replicate(cell, 0)


def test_cell_matrix_det_and_realness():
    cell = PeriodicCell(make_array([1, 0.5], [0.7, 1.2], speeds=[1, 2], delta=0.1, gauges=[1, -0.4]))
    w = np.random.default_rng(0).uniform(0.01, 10, 100)
    m = cell_matrix(w, cell)
    np.testing.assert_allclose(np.linalg.det(m), 1, atol=1e-10)
    assert np.max(np.abs(m.imag)) <= 1e-12 * max(1, np.max(np.abs(m)))


def test_replicated_total_is_matrix_power():
    cell = skin_cell(1.0)
    cfg = replicate(cell, 5).with_trailing_spacing(cell.unit.trailing_spacing)
    for w in (0.45, 2.9 - 0.01j, 5.0):
        m = symmetrised_total(w, cfg)
        p = np.linalg.matrix_power(cell_matrix(w, cell), 5)
        assert np.abs(m - p).max() <= 1e-10 * np.abs(p).max()


def test_quasimomentum_consistency():
    cell = skin_cell(1.0)
    rng = np.random.default_rng(5)
    w = np.concatenate([rng.uniform(0.01, 7, 500), rng.uniform(0.01, 7, 500) + 1j * rng.normal(size=500) * 0.2])
    for x in w:
        k = quasimomentum(x, cell)
        tr = np.trace(cell_matrix(x, cell))
        assert abs(2 * np.cos(k) - tr) <= 1e-12 * max(1, abs(tr))
        assert -1e-15 <= k.real <= math.pi + 1e-15


def test_quasimomentum_edges_and_gaps(fig8):
    cell, bands = fig8
    a, b = bands[1]
    k_in = quasimomentum(0.5 * (a + b), cell)
    assert abs(k_in.imag) < 1e-12
    assert abs(abs(np.exp(1j * k_in)) - 1) < 1e-12
    k_gap = quasimomentum(0.5 * (bands[0][1] + a), cell)
    assert abs(np.exp(1j * k_gap)) < 1
    assert abs(quasimomentum(2.9 - 0.05j, cell).imag) > 1e-6


def test_band_dichotomy_eigen_magnitudes():
    cell = skin_cell(1.0)
    for w in np.linspace(0.05, 7, 200):
        lam = np.abs(np.linalg.eigvals(cell_matrix(w, cell)))
        tr = np.trace(cell_matrix(w, cell)).real
        if abs(tr) < 2 - 1e-6:
            np.testing.assert_allclose(lam, 1, atol=1e-10)
        elif abs(tr) > 2 + 1e-6:
            assert lam.max() > 1 and abs(lam.max() * lam.min() - 1) < 1e-10


def test_fig8_band_edges_against_oracle():
    for edge in np.ravel(FIG8_BANDS):
        target = 2 if mp_gauge_cell_trace(edge, 1, 1, 1, 0.1) > 0 else -2
        root = mp.findroot(lambda w: mp_gauge_cell_trace(w, 1, 1, 1, 0.1) - target, edge)
        assert abs(float(root) - edge) <= 1e-12


def test_band_scan(fig8):
    cell, bands = fig8
    np.testing.assert_allclose(bands[:3], FIG8_BANDS, rtol=1e-9)
    for a, b in bands:
        for edge in (a, b):
            assert abs(abs(np.trace(cell_matrix(edge, cell)).real) - 2) <= 1e-8
    flat = np.ravel(bands)
    assert np.all(np.diff(flat) > 0)
    assert bands_to_json(bands[:1]) == '[{"a": %r, "b": %r}]' % bands[0]
    with pytest.raises(ValueError):
        band_scan(cell, (0, 1), 50)


def test_band_scan_free_line():
    cell = PeriodicCell(make_array([1], [1], delta=1.0))
    diags, bands = band_scan(cell, (0.0, 10.0), 500)
    assert bands == [(0.0, 10.0)]
    assert all(d.in_band for d in diags)


def test_gamma_profile():
    cfg = replicate(skin_cell(1.0), 5)
    assert gamma_profile(1.0, cfg) == 1.0
    assert gamma_profile(2.0, cfg) == 1.0
    np.testing.assert_allclose(gamma_profile(np.arange(5) * 2.0, cfg), np.arange(5))
    assert gamma_profile(0.0, cfg) == 0.0
    np.testing.assert_array_equal(gamma_profile(np.linspace(0, 9, 7), replicate(skin_cell(0.0), 5)), 0)
    mixed = replicate(PeriodicCell(make_array([1, 1], [1, 1], gauges=[1, -1])), 3)
    np.testing.assert_allclose(gamma_profile([4.0, 8.0, 12.0, 1.0], mixed), [0, 0, 0, 1])


def _mid_band_mode(cell, band, m):
    cfg = replicate(cell, m)
    a, b = band
    found = find_resonances(SearchRegion(a, b, -0.5, 0.05), cfg)
    mid = 0.5 * (a + b)
    r = min(found, key=lambda r: abs(r.omega.real - mid))
    return found, propagate_mode(r.omega, cfg, OUTGOING, samples_per_region=64)


def test_envelope_fig8(fig8):
    cell, bands = fig8
    for band in bands[:2]:
        _, mode = _mid_band_mode(cell, band, 20)
        rep = envelope_report(mode, cell, 20)
        assert rep.slope == pytest.approx(-1.0, abs=0.1)
        assert rep.ratio_spread <= 10
        assert len(rep.cell_maxima) == 20
        assert rep.to_csv().splitlines()[0] == "cell,log_cell_max,gamma_at_cell,envelope_ratio"


def test_envelope_reciprocal_control():
    cell = skin_cell(0.0)
    _, bands = band_scan(cell, (0.01, 4), 500)
    _, mode = _mid_band_mode(cell, bands[0], 20)
    assert abs(envelope_report(mode, cell, 20).slope) <= 0.05


def test_envelope_flipped_gauge_localises_right(fig8):
    cell = skin_cell(-1.0)
    _, mode = _mid_band_mode(cell, fig8[1][1], 20)
    assert envelope_report(mode, cell, 20).slope == pytest.approx(1.0, abs=0.1)


def test_envelope_out_of_band(fig8):
    cell, bands = fig8
    _, mode = _mid_band_mode(cell, bands[0], 5)
    gap_mode = replace(mode, omega=complex(0.5 * (bands[0][1] + bands[1][0]), mode.omega.imag))
    with pytest.raises(OutOfBand):
        envelope_report(gap_mode, cell, 5)
    assert envelope_report(gap_mode, cell, 5, check_band=False).slope < 0


def test_resonance_count_and_imaginary_collapse(fig8):
    cell, bands = fig8
    a, b = bands[1]
    counts, ims = [], []
    for m in (5, 10, 20):
        found, mode = _mid_band_mode(cell, bands[1], m)
        counts.append(count_zeros(SearchRegion(a, b, -0.5, 0.05), replicate(cell, m)))
        ims.append(abs(mode.omega.imag))
    assert counts == [4, 9, 19]
    slope = np.polyfit(np.log([5, 10, 20]), np.log(ims), 1)[0]
    assert slope <= -0.9


@pytest.mark.parametrize(
    "omega, gamma, regime, nu",
    [
        (3.0, 1.0, "oscillatory", 1j * math.sqrt(8)),
        (3.0, 8.0, "overdamped", math.sqrt(55)),
        (2.5, 2.5, "critical", 0),
    ],
)
def test_damping(omega, gamma, regime, nu):
    out = damping_diagnostics(omega, gamma)
    assert out["regime"] == regime
    assert abs(out["nu"] - nu) < 1e-12


def test_damping_complex_frequency():
    assert damping_diagnostics(3.0 - 0.01j, 1.0)["regime"] == "oscillatory"
    assert damping_diagnostics(0.4 - 0.01j, 1.0)["regime"] == "overdamped"
