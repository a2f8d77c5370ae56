"""Closed-form solution for the instantaneous switch-on/switch-off
(top-hat) coupling: Bogoliubov coefficients from continuity matching at the
window edge, vacuum correlators of the normal-mode operators, the exact
in-window purity, and the eight asymptotic regime expansions.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CriticalPoint, InvalidCaseWarning
from .model import classify_regime, frame_from_xi

#: Guard band around the critical coupling.
NEAR_CRITICAL = 1e-8

REGIME_CASES = ("U1", "U2a", "U2b", "C1", "C2", "O1a", "O1b", "O2")


@dataclass(frozen=True)
class BogoliubovSet:
    """Expansion of the in-window normal-mode operators (b1, b2, and their
    window conjugates) over the free-mode operators (a_S, a_E, a_S^dag,
    a_E^dag), referenced to the window start.

    Attributes:
        matrix: 4x4 complex map, rows (b1, b2, bbar1, bbar2), columns
            (a_S, a_E, a_S^dag, a_E^dag).
        delta_flag: 0 if omega1 is real (subcritical), 1 otherwise.
    """

    matrix: np.ndarray
    delta_flag: int

    def alpha(self, i, mode):
        """Coefficient of a_mode ('S' or 'E') in b_i (i = 1 or 2)."""
        return self.matrix[i - 1, 0 if mode == "S" else 1]

    def beta(self, i, mode):
        """Coefficient of a_mode^dag in b_i."""
        return self.matrix[i - 1, 2 if mode == "S" else 3]


def _frame_at_peak(p):
    if abs(p.psi - 1.0) < NEAR_CRITICAL:
        raise CriticalPoint(
            "coupling within the critical guard band; use the numeric integrator"
        )
    return frame_from_xi(p.xi0, p)


def bogoliubov_coeffs(p):
    """Bogoliubov coefficients from operator continuity at the window edge.

    Args:
        p: ScenarioParams (xi0 is the plateau coupling; t0 the half-window).

    Returns:
        BogoliubovSet.

    Raises:
        CriticalPoint: if xi0 is within the guard band of the critical value.
    """
    fr = _frame_at_peak(p)
    theta = fr.theta
    c, s = np.cos(theta), np.sin(theta)
    trig = {(1, "S"): c, (1, "E"): -s, (2, "S"): s, (2, "E"): c}
    mode_abs = {1: fr.omega1_abs, 2: fr.omega2}
    # (-i)^delta: relative phase between position and momentum quadratures
    # of an imaginary-frequency mode.
    phase = {1: (-1j) ** fr.delta_flag, 2: 1.0 + 0.0j}
    omega_free = {"S": p.omega_s, "E": p.omega_e}

    def coeff(i, mode, s_sign, m_sign):
        wi = mode_abs[i]
        wf = omega_free[mode]
        amp = np.sqrt(wi / wf) + s_sign * m_sign * phase[i] * np.sqrt(wf / wi)
        return 0.5 * trig[(i, mode)] * amp * np.exp(1j * s_sign * wf * p.t0)

    rows = [(1, +1), (2, +1), (1, -1), (2, -1)]  # (mode index, conjugation sign)
    cols = [("S", +1), ("E", +1), ("S", -1), ("E", -1)]
    m = np.array(
        [[coeff(i, mode, s_sign, m_sign) for mode, s_sign in cols] for i, m_sign in rows]
    )
    return BogoliubovSet(matrix=m, delta_flag=fr.delta_flag)


def b_correlators(bset):
    """Vacuum two-point functions of v = (b1, b2, bbar1, bbar2).

    Contracts the coefficient matrix against the free-vacuum correlators
    <a_I a_J^dag> = delta_IJ (all other pairings vanish).

    Returns:
        4x4 complex matrix C with C[i, j] = <v_i v_j>.
    """
    n = np.zeros((4, 4), dtype=complex)
    n[0, 2] = 1.0
    n[1, 3] = 1.0
    return bset.matrix @ n @ bset.matrix.T


def _mode_vectors(dt, p, fr):
    """Coefficient vectors expressing x_S(t) and p_S(t) over v."""
    z1 = fr.omega1_complex
    w1a, w2 = fr.omega1_abs, fr.omega2
    c, s = np.cos(fr.theta), np.sin(fr.theta)
    e1m = np.exp(-1j * z1 * dt) / np.sqrt(2.0 * w1a)
    e1p = np.exp(1j * z1 * dt) / np.sqrt(2.0 * w1a)
    e2m = np.exp(-1j * w2 * dt) / np.sqrt(2.0 * w2)
    e2p = np.exp(1j * w2 * dt) / np.sqrt(2.0 * w2)
    f = np.array([c * e1m, s * e2m, c * e1p, s * e2p])
    g = np.array(
        [-1j * z1 * c * e1m, -1j * w2 * s * e2m, 1j * z1 * c * e1p, 1j * w2 * s * e2p]
    )
    return f, g


def _quadrature_rows(t, p):
    """Complex expansions of x_S(t) and p_S(t) over (a_S, a_E, a_S^dag,
    a_E^dag), obtained by composing the in-window mode functions with the
    Bogoliubov map."""
    fr = _frame_at_peak(p)
    bset = bogoliubov_coeffs(p)
    f, g = _mode_vectors(t + p.t0, p, fr)
    return f @ bset.matrix, g @ bset.matrix


def isoso_sigma_s(t, p):
    """System covariance block inside the top-hat window.

    Args:
        t: time in [-t0, t0].
        p: ScenarioParams.

    Returns:
        2x2 symmetric block of 2<x^2>, <xp+px>, 2<p^2>.
    """
    phi_x, phi_p = _quadrature_rows(t, p)
    x2 = abs(phi_x[0]) ** 2 + abs(phi_x[1]) ** 2
    p2 = abs(phi_p[0]) ** 2 + abs(phi_p[1]) ** 2
    xp = (phi_x[0] * np.conj(phi_p[0]) + phi_x[1] * np.conj(phi_p[1])).real
    return np.array([[2.0 * x2, 2.0 * xp], [2.0 * xp, 2.0 * p2]])


def isoso_purity(t, p):
    """Exact purity for the top-hat coupling profile.

    Before the window the state is the vacuum (purity 1); after the window
    the purity is frozen at its value at +t0.  The determinant is assembled
    as a Cauchy-Binet sum of squared minors of the real 2x4 quadrature
    factor, which avoids catastrophic cancellation deep in the supercritical
    phase.
    """
    if t <= -p.t0:
        return 1.0
    phi_x, phi_p = _quadrature_rows(min(t, p.t0), p)
    l = np.array(
        [
            [phi_x[0].real, phi_x[0].imag, phi_x[1].real, phi_x[1].imag],
            [phi_p[0].real, phi_p[0].imag, phi_p[1].real, phi_p[1].imag],
        ]
    )
    det = 0.0
    for i in range(4):
        for j in range(i + 1, 4):
            minor = l[0, i] * l[1, j] - l[0, j] * l[1, i]
            det += minor * minor
    return 1.0 / np.sqrt(4.0 * det)


def decoherence_rate(p):
    """Late-time exponential decay rate |omega1|, or None below criticality."""
    if p.xi0 <= p.xi_c:
        return None
    return frame_from_xi(p.xi0, p).omega1_abs


# ---------------------------------------------------------------------------
# Regime expansions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionCase:
    """One asymptotic expansion of the in-window purity."""

    label: str
    description: str


EXPANSIONS = {
    "U1": ExpansionCase("U1", "weak coupling, hierarchical frequencies"),
    "U2a": ExpansionCase("U2a", "weak coupling, frequency gap below psi"),
    "U2b": ExpansionCase("U2b", "weak coupling, frequency gap above psi"),
    "C1": ExpansionCase("C1", "near-critical, hierarchical frequencies"),
    "C2": ExpansionCase("C2", "near-critical, comparable frequencies"),
    "O1a": ExpansionCase("O1a", "over-critical, w below 1/psi"),
    "O1b": ExpansionCase("O1b", "over-critical, w above 1/psi"),
    "O2": ExpansionCase("O2", "over-critical, comparable frequencies"),
}

_CASE_FAMILY = {
    "U1": ("U1",),
    "U2a": ("U2a",),
    "U2b": ("U2b",),
    "C1": ("C1plus", "C1minus"),
    "C2": ("C2plus", "C2minus"),
    "O1a": ("O1a",),
    "O1b": ("O1b",),
    "O2": ("O2",),
}


def _canonical_case(case):
    if isinstance(case, ExpansionCase):
        case = case.label
    if case.startswith(("C1", "C2")) and case not in ("C1", "C2"):
        case = case[:2]
    if case not in EXPANSIONS:
        raise ValueError("unknown expansion case %r" % (case,))
    return case


def regime_purity(case, dt, p):
    """Asymptotic in-window purity for one of the eight regimes.

    The exact normal frequencies are used (they are not re-expanded); the
    hyperbolic branch engages automatically above the critical coupling via
    the complex omega1 bookkeeping.

    Args:
        case: case label ("U1", ..., "O2"; "C1plus" etc. accepted).
        dt: time since the window start, t + t0 (scalar or array, >= 0).
        p: ScenarioParams.

    Returns:
        Expansion value(s); NaN where the expansion breaks down (the
        expression under the inverse square root turns non-positive).
    """
    case = _canonical_case(case)
    label = classify_regime(p.w, p.psi, p.omega_s).label
    if label not in _CASE_FAMILY[case]:
        warnings.warn(
            "parameters classify as %s, outside the %s domain" % (label, case),
            InvalidCaseWarning,
            stacklevel=2,
        )
    fr = _frame_at_peak(p)
    dt = np.asarray(dt, dtype=float)
    z1 = fr.omega1_complex
    w1a, w2 = fr.omega1_abs, fr.omega2
    w, psi = p.w, p.psi
    dpsi = complex(1.0 - psi)

    if case == "U1":
        val = 1.0 - 2.0 * w * psi**2 * np.sin(0.5 * (z1 + w2) * dt) ** 2
        return _finalize(val, invert=False)
    if case == "U2a":
        val = 1.0 - (psi**2 / 16.0) * (
            3.0
            - 2.0 * np.cos(2.0 * z1 * dt)
            - 2.0 * np.cos(2.0 * w2 * dt)
            + np.cos(2.0 * (w2 - z1) * dt)
        )
        return _finalize(val, invert=False)
    if case == "U2b":
        val = 1.0 - (psi**2 / 2.0) * np.sin(0.5 * (z1 + w2) * dt) ** 2
        return _finalize(val, invert=False)
    if case == "C1":
        sq = np.sqrt(dpsi)
        val = (
            1.0
            + (w / (2.0 * dpsi)) * np.sin(z1 * dt) ** 2
            + np.sqrt(2.0) * (w / sq) * np.sin(z1 * dt) * np.sin(w2 * dt)
            + (w / 8.0)
            * (
                9.0
                + 7.0 * np.cos(2.0 * z1 * dt)
                - 16.0 * np.cos(z1 * dt) * np.cos(w2 * dt)
            )
        )
        return _finalize(val, invert=True)
    if case == "C2":
        val = (
            (1.0 / (8.0 * dpsi))
            * np.sin(z1 * dt) ** 2
            * (3.0 - np.cos(2.0 * w2 * dt))
            + (1.0 / (8.0 * np.sqrt(2.0 * dpsi)))
            * np.sin(2.0 * z1 * dt)
            * np.sin(2.0 * w2 * dt)
            + (
                23.0
                + np.cos(2.0 * z1 * dt) * (11.0 - 3.0 * np.cos(2.0 * w2 * dt))
                + np.cos(2.0 * w2 * dt)
            )
            / 32.0
        )
        return _finalize(val, invert=True)
    if case == "O1a":
        val = 1.0 + w * psi**2 * (
            0.5 * np.cosh(2.0 * w1a * dt)
            - 2.0 * np.cosh(w1a * dt) * np.cos(w2 * dt)
            + 1.5
        )
        return _finalize(val, invert=True)
    if case == "O1b":
        ch2, sh2 = np.cosh(2.0 * w1a * dt), np.sinh(2.0 * w1a * dt)
        ch1, sh1 = np.cosh(w1a * dt), np.sinh(w1a * dt)
        c2, s2 = np.cos(2.0 * w2 * dt), np.sin(2.0 * w2 * dt)
        c1, s1 = np.cos(w2 * dt), np.sin(w2 * dt)
        val = (
            (psi / 8.0) * (ch2 + sh2 * s2 - c2)
            + (1.0 / (16.0 * w)) * (ch2 - 2.0 * ch2 * c2 + c2)
            + (1.0 / 8.0) * (5.0 + c2 + 2.0 * ch2 * c1**2)
            + (1.0 / (128.0 * psi * w**2))
            * (3.0 * c2 - 3.0 * ch2 + 32.0 * sh1 * s1 - 13.0 * sh2 * s2)
        )
        return _finalize(val, invert=True)
    # O2
    ch2, sh2 = np.cosh(2.0 * w1a * dt), np.sinh(2.0 * w1a * dt)
    c2, s2 = np.cos(2.0 * w2 * dt), np.sin(2.0 * w2 * dt)
    val = (psi / 8.0) * (ch2 + sh2 * s2 - c2) + (1.0 / 8.0) * (
        5.0 + 2.0 * c2 + ch2 * (2.0 - c2)
    )
    return _finalize(val, invert=True)


def _finalize(val, invert):
    val = np.real(np.asarray(val))
    if invert:
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(val > 0.0, val ** -0.5, np.nan)
    else:
        out = val
    if out.ndim == 0:
        return float(out)
    return out
