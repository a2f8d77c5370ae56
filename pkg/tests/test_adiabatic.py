"""Tests for the slow-switching expansion and late-time diagnostics.

The phase accumulator is checked against a direct trapezoid quadrature of
the normal frequencies, and the slope diagnostic against synthetic
power-law data with a known exponent.
"""

import numpy as np
import pytest

from oscpurity.adiabatic import (
    DEFICIT_FLOOR,
    accumulate_phases,
    latetime_purity,
    loglog_slope,
    nlo_contributions,
    nonanalyticity_slope,
    purity_adiabatic_lo,
    purity_nlo_correction,
    recoherence_threshold_scan,
)
from oscpurity.errors import (
    DerivativeUndefined,
    NoThreshold,
    SupercriticalExcursion,
)
from oscpurity.model import ScenarioParams, adiabatic_frame
from oscpurity.transport import IntegratorConfig


def make_params(omega_e=2.0, psi=0.9, t0=1.0, tau=10.0):
    return ScenarioParams.from_psi(1.0, omega_e, psi, t0, tau)


# ---------------------------------------------------------------------------
# Phase accumulation
# ---------------------------------------------------------------------------


def test_phases_match_trapezoid():
    p = make_params(tau=2.0)
    acc = accumulate_phases(p)
    for t_end in (-10.0, 0.0, 15.0):
        ts = np.linspace(p.t_in, t_end, 20001)
        w1 = np.empty_like(ts)
        w2 = np.empty_like(ts)
        for i, t in enumerate(ts):
            fr = adiabatic_frame(t, p)
            w1[i] = np.sqrt(fr.omega1_sq)
            w2[i] = fr.omega2
        ref1 = np.trapezoid(w1, ts)
        ref2 = np.trapezoid(w2, ts)
        got1, got2 = acc.phases(t_end)
        assert got1 == pytest.approx(ref1, rel=1e-7, abs=1e-7)
        assert got2 == pytest.approx(ref2, rel=1e-7, abs=1e-7)


def test_supercritical_profile_rejected():
    p = make_params(psi=1.1)
    with pytest.raises(SupercriticalExcursion):
        accumulate_phases(p)


def test_lo_purity_limits():
    p = make_params(tau=10.0)
    # Before the interaction theta ~ 0 and the LO purity is 1.
    assert purity_adiabatic_lo(p.t_in, p) == pytest.approx(1.0, abs=1e-9)
    # During the interaction it dips below 1 but stays positive.
    mid = purity_adiabatic_lo(0.0, p)
    assert 0.0 < mid < 1.0


def test_lo_matches_exact_for_slow_switching():
    p = make_params(tau=50.0)
    cfg = IntegratorConfig(method="DOP853")
    from oscpurity.transport import integrate

    traj = integrate(p, cfg)
    errs = [
        abs(purity_adiabatic_lo(t, p) - traj.purity_at(t))
        for t in np.linspace(p.t_in, -p.t_in, 41)
    ]
    assert max(errs) < 1e-2


def test_nlo_correction_vanishes_at_late_time():
    p = make_params(tau=10.0)
    acc = accumulate_phases(p)
    t_late = -p.t_in  # xi/xi_c < 1e-10 there
    assert abs(purity_nlo_correction(t_late, p, acc)) < 1e-8


def test_nlo_contributions_signature():
    p = make_params(tau=10.0)
    acc = accumulate_phases(p)
    io_, ith = nlo_contributions(0.0, p, acc)
    assert np.isfinite(io_) and np.isfinite(ith)
    # Particle creation dominates the frame-rotation channel here.
    assert abs(io_) > abs(ith)


# ---------------------------------------------------------------------------
# Late-time diagnostics
# ---------------------------------------------------------------------------


def test_latetime_purity_recoheres_for_slow_switch():
    p = make_params(tau=20.0)
    gamma_inf = latetime_purity(p)
    assert gamma_inf > 0.999


def test_loglog_slope_recovers_power_law():
    ratios = np.geomspace(1.0, 30.0, 12)
    p_true = -3.0
    deficits = 2.7 * ratios**p_true
    mid, slopes, flags = loglog_slope(ratios, deficits)
    assert not np.any(flags)
    assert np.allclose(slopes, p_true, rtol=0.02)


def test_loglog_slope_flags_floored_points():
    ratios = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    deficits = np.array([1e-3, 1e-6, 1e-9, 1e-16, 1e-16])
    _, slopes, flags = loglog_slope(ratios, deficits)
    # A slope is flagged as soon as any of its three stencil points sits
    # below the resolution floor.
    assert not flags[0]
    assert flags[1] and flags[2]


def test_loglog_slope_needs_three_points():
    with pytest.raises(DerivativeUndefined):
        loglog_slope([1.0, 2.0], [0.1, 0.01])


def test_nonanalyticity_slope_increasing():
    p = make_params(t0=1.0, tau=4.0)
    res = nonanalyticity_slope(p, np.array([4.0, 5.0, 6.3, 7.9, 10.0]))
    ok = ~res["flagged"]
    mags = np.abs(res["slope"][ok])
    assert len(mags) >= 2
    assert np.all(np.diff(mags) > 0)
    assert np.all(res["deficit"][res["deficit"] > DEFICIT_FLOOR] > 0)


def test_threshold_scan_no_threshold():
    # With an impossible criterion the scan cannot succeed at the lower
    # bound and reports it.
    p = make_params(t0=1.0)
    with pytest.raises(NoThreshold):
        recoherence_threshold_scan(
            p, [1.0], t_omega_bounds=(0.5, 2.0), criterion=1e-12
        )
