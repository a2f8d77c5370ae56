"""Scenario parameters, the coupling profile, the rotated (normal-mode)
frame, criticality/perturbativity measures, and regime classification.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, CriticalPoint, DerivativeUndefined

SMOOTH = "smooth"
ISOSO = "isoso"

#: Guard for the exactly-critical coupling in closed-form frames.
CRITICAL_GUARD = 1e-12


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioParams:
    """Immutable scenario definition.

    Args:
        omega_s: system frequency (> 0).
        omega_e: environment frequency (> 0).
        xi0: peak coupling strength (frequency^2).
        t0: half-duration of the interaction plateau.
        tau: switch time scale (ignored for the top-hat profile).
        profile: "smooth" or "isoso" (instantaneous switch-on/off top-hat).
    """

    omega_s: float
    omega_e: float
    xi0: float
    t0: float
    tau: float = 1.0
    profile: str = SMOOTH

    def __post_init__(self):
        if self.omega_s <= 0 or self.omega_e <= 0:
            raise ConfigError("frequencies must be positive")
        if self.t0 <= 0:
            raise ConfigError("t0 must be positive")
        if self.profile not in (SMOOTH, ISOSO):
            raise ConfigError("unknown profile %r" % (self.profile,))
        if self.profile == SMOOTH and self.tau <= 0:
            raise ConfigError("tau must be positive for the smooth profile")
        if self.xi0 < 0:
            raise ConfigError("xi0 must be non-negative")

    @classmethod
    def from_psi(cls, omega_s, omega_e, psi, t0, tau=1.0, profile=SMOOTH):
        """Build params from the dimensionless coupling psi = xi0/xi_c."""
        return cls(omega_s, omega_e, psi * omega_s * omega_e, t0, tau, profile)

    @property
    def xi_c(self):
        """Critical coupling omega_s * omega_e."""
        return self.omega_s * self.omega_e

    @property
    def psi(self):
        """Dimensionless coupling xi0/xi_c."""
        return self.xi0 / self.xi_c

    @property
    def w(self):
        """Frequency ratio omega_s/omega_e."""
        return self.omega_s / self.omega_e

    @property
    def t_in(self):
        """Initial time: -t0 - 20 tau (smooth) or -t0 (top-hat)."""
        if self.profile == SMOOTH:
            return -self.t0 - 20.0 * self.tau
        return -self.t0

    def with_tau(self, tau):
        return replace(self, tau=tau)

    def with_profile(self, profile, tau=None):
        return replace(self, profile=profile, tau=self.tau if tau is None else tau)


@dataclass(frozen=True)
class DerivedParams:
    """Derived dimensionless quantities for a scenario."""

    xi_c: float
    w: float
    psi: float
    g_p: float
    T_omega: Optional[float]
    t_in: float


def derived_params(p):
    """Compute DerivedParams from ScenarioParams."""
    t_omega = None
    if p.omega_e != p.omega_s:
        t_omega = p.omega_s / (p.omega_e - p.omega_s)
    return DerivedParams(
        xi_c=p.xi_c,
        w=p.w,
        psi=p.psi,
        g_p=perturbativity_gp(p),
        T_omega=t_omega,
        t_in=p.t_in,
    )


# ---------------------------------------------------------------------------
# Coupling profile
# ---------------------------------------------------------------------------


def coupling_xi(t, p):
    """Coupling strength xi(t).

    Smooth profile: xi0 [1 + tanh((t0+t)/tau) tanh((t0-t)/tau)] /
    (1 + tanh^2(t0/tau)).  Top-hat: xi0 on (-t0, t0), else 0.

    Args:
        t: time (scalar or array).
        p: ScenarioParams.

    Returns:
        xi(t), same shape as t.
    """
    if p.profile == ISOSO:
        t = np.asarray(t, dtype=float)
        return np.where((t > -p.t0) & (t < p.t0), p.xi0, 0.0)
    a = np.tanh((p.t0 + np.asarray(t, dtype=float)) / p.tau)
    b = np.tanh((p.t0 - np.asarray(t, dtype=float)) / p.tau)
    return p.xi0 * (1.0 + a * b) / (1.0 + np.tanh(p.t0 / p.tau) ** 2)


def coupling_xi_dot(t, p):
    """Time derivative of the smooth coupling profile.

    Raises:
        DerivativeUndefined: for the top-hat profile.
    """
    if p.profile == ISOSO:
        raise DerivativeUndefined("the top-hat profile has no classical derivative")
    t = np.asarray(t, dtype=float)
    a = np.tanh((p.t0 + t) / p.tau)
    b = np.tanh((p.t0 - t) / p.tau)
    da = (1.0 - a * a) / p.tau
    db = -(1.0 - b * b) / p.tau
    return p.xi0 * (da * b + a * db) / (1.0 + np.tanh(p.t0 / p.tau) ** 2)


def critical_coupling(p):
    """Critical coupling xi_c = omega_s * omega_e."""
    return p.omega_s * p.omega_e


def perturbativity_gp(p):
    """Perturbativity measure g_p = xi0 / sqrt(2 w_S w_E (w_S^2 + w_E^2))."""
    return p.xi0 / np.sqrt(
        2.0 * p.omega_s * p.omega_e * (p.omega_s**2 + p.omega_e**2)
    )


# ---------------------------------------------------------------------------
# Rotated (normal-mode) frame
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdiabaticFrame:
    """Instantaneous normal-mode frame at one time.

    Attributes:
        theta: mixing angle in [0, pi/2).
        theta_dot: d theta/dt (0 if the profile derivative is unavailable).
        omega1_sq, omega2_sq: squared normal frequencies (omega1_sq may be
            negative above the critical coupling).
        omega1_abs: |omega1|; omega2: the always-real upper frequency.
        delta_flag: 0 if omega1 is real, 1 if imaginary.
        beta1, beta2: omega_i_dot / (2 omega_i) (real in both phases).
    """

    theta: float
    theta_dot: float
    omega1_sq: float
    omega2_sq: float
    omega1_abs: float
    omega2: float
    delta_flag: int
    beta1: float
    beta2: float

    @property
    def omega1_complex(self):
        """omega1 as a complex number: i^delta |omega1|."""
        if self.delta_flag:
            return 1j * self.omega1_abs
        return complex(self.omega1_abs)


def frame_from_xi(xi, p, xi_dot=0.0):
    """Normal-mode frame for a given instantaneous coupling value.

    Args:
        xi: coupling strength (frequency^2).
        p: ScenarioParams (provides the bare frequencies).
        xi_dot: time derivative of the coupling (for theta_dot, beta_i).

    Returns:
        AdiabaticFrame.

    Raises:
        CriticalPoint: if |omega1^2| < 1e-12 * omega_s^2 (coupling at the
            critical value); callers must branch to the numeric integrator.
    """
    ws2 = p.omega_s**2
    we2 = p.omega_e**2
    d = we2 - ws2
    s = ws2 + we2
    r = np.sqrt(4.0 * xi * xi + d * d)
    omega1_sq = 0.5 * (s - r)
    omega2_sq = 0.5 * (s + r)
    if abs(omega1_sq) < CRITICAL_GUARD * ws2:
        raise CriticalPoint(
            "coupling is at the critical value; the closed-form frame is singular"
        )
    # theta = 0.5 * arctan(2 xi / d), kept continuous through d = 0 by the
    # two-argument arctangent; for d > 0 this lands in [0, pi/4).
    theta = 0.5 * np.arctan2(2.0 * xi, d)
    theta_dot = xi_dot * d / (d * d + 4.0 * xi * xi) if (d != 0.0 or xi != 0.0) else 0.0
    delta_flag = 1 if omega1_sq < 0 else 0
    omega1_abs = np.sqrt(abs(omega1_sq))
    omega2 = np.sqrt(omega2_sq)
    # d(omega_i^2)/dt = -+ 2 xi xi_dot / r; beta_i = d(omega_i^2)/dt/(4 omega_i^2)
    dw1sq = -2.0 * xi * xi_dot / r if r > 0 else 0.0
    dw2sq = 2.0 * xi * xi_dot / r if r > 0 else 0.0
    beta1 = dw1sq / (4.0 * omega1_sq)
    beta2 = dw2sq / (4.0 * omega2_sq)
    return AdiabaticFrame(
        theta=float(theta),
        theta_dot=float(theta_dot),
        omega1_sq=float(omega1_sq),
        omega2_sq=float(omega2_sq),
        omega1_abs=float(omega1_abs),
        omega2=float(omega2),
        delta_flag=delta_flag,
        beta1=float(beta1),
        beta2=float(beta2),
    )


def adiabatic_frame(t, p):
    """Normal-mode frame at time t along the coupling profile."""
    xi = float(coupling_xi(t, p))
    if p.profile == SMOOTH:
        xi_dot = float(coupling_xi_dot(t, p))
    else:
        xi_dot = 0.0
    return frame_from_xi(xi, p, xi_dot)


# ---------------------------------------------------------------------------
# Regime classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegimeThresholds:
    """Classifier conventions (overridable via config)."""

    psi_under: float = 0.5
    psi_over: float = 2.0
    w_split: float = 0.3
    gp_perturbative: float = 0.1


@dataclass(frozen=True)
class RegimeLabel:
    label: str
    perturbative_flag: bool
    secular_time: Optional[float]


def classify_regime(w, psi, omega_s=1.0, thresholds=RegimeThresholds()):
    """Classify a point of the (w, psi) phase diagram.

    Args:
        w: frequency ratio omega_s/omega_e in (0, 1].
        psi: coupling ratio xi0/xi_c > 0.
        omega_s: system frequency used to dimension the secular time.
        thresholds: classifier conventions.

    Returns:
        RegimeLabel with one of U1, U2a, U2b, C1plus, C1minus, C2plus,
        C2minus, O1a, O1b, O2.
    """
    if not (0 < w <= 1):
        raise ConfigError("w must lie in (0, 1]; swap the two modes otherwise")
    if psi <= 0:
        raise ConfigError("psi must be positive")
    th = thresholds
    if psi < th.psi_under:
        if w < th.w_split:
            label = "U1"
        else:
            label = "U2a" if (1.0 / w - 1.0) < psi else "U2b"
    elif psi <= th.psi_over:
        sign = "plus" if psi > 1.0 else "minus"
        label = ("C1" if w < th.w_split else "C2") + sign
    else:
        if w < th.w_split:
            label = "O1a" if w < 1.0 / psi else "O1b"
        else:
            label = "O2"
    g_p = psi * np.sqrt(w / (2.0 * (1.0 + w * w)))
    sec = _secular_time(label, w, psi, omega_s)
    return RegimeLabel(label, bool(g_p < th.gp_perturbative), sec)


def _secular_time(label, w, psi, omega_s):
    if label == "U1":
        return 1.0 / (omega_s * psi * psi)
    if label == "U2a":
        return 1.0 / (omega_s * psi)
    if label == "U2b":
        return (1.0 / w - 1.0) / (omega_s * psi * psi)
    if label in ("C1plus", "C1minus"):
        dpsi = 1.0 - psi
        if dpsi == 0.0:
            return 1.0 / (w * omega_s)
        return min(1.0 / w, 1.0 / np.sqrt(abs(dpsi))) / omega_s
    return None


def secular_time(label, p):
    """Secular break-down time for a labelled regime (None if unbounded)."""
    name = label.label if isinstance(label, RegimeLabel) else label
    return _secular_time(name, p.w, p.psi, p.omega_s)


# ---------------------------------------------------------------------------
# Config-file parsing
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {"omega_s", "omega_e", "xi0", "psi", "t0", "tau", "profile"}
_INTEGRATOR_KEYS = {
    "rtol",
    "atol",
    "max_step",
    "sample_dt",
    "t_end_policy",
    "cutoff_threshold",
    "method",
}


def parse_config(text):
    """Parse a key-value scenario config.

    Format: one `key = value` pair per line; '#' starts a comment.  Exactly
    one of xi0/psi must be present.  Unknown or duplicate keys are errors.

    Args:
        text: config file contents.

    Returns:
        (ScenarioParams, dict of integrator overrides).
    """
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value'" % lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in kv:
            raise ConfigError("duplicate key %r" % key)
        if key not in _SCENARIO_KEYS | _INTEGRATOR_KEYS:
            raise ConfigError("unknown key %r" % key)
        kv[key] = value

    if not kv:
        raise ConfigError("empty config")
    has_xi0 = "xi0" in kv
    has_psi = "psi" in kv
    if has_xi0 == has_psi:
        raise ConfigError("exactly one of xi0/psi must be given")
    for req in ("omega_e", "t0"):
        if req not in kv:
            raise ConfigError("missing key %r" % req)

    def _f(key, default=None):
        if key not in kv:
            return default
        try:
            return float(kv[key])
        except ValueError:
            raise ConfigError("key %r: not a number: %r" % (key, kv[key]))

    omega_s = _f("omega_s", 1.0)
    omega_e = _f("omega_e")
    t0 = _f("t0")
    tau = _f("tau", 1.0)
    profile = kv.get("profile", SMOOTH)
    if has_psi:
        p = ScenarioParams.from_psi(omega_s, omega_e, _f("psi"), t0, tau, profile)
    else:
        p = ScenarioParams(omega_s, omega_e, _f("xi0"), t0, tau, profile)

    integ = {}
    for key in _INTEGRATOR_KEYS & set(kv):
        if key in ("t_end_policy", "method"):
            integ[key] = kv[key]
        else:
            integ[key] = _f(key)
    if "t_end_policy" in integ and integ["t_end_policy"] not in ("fixed", "cutoff"):
        raise ConfigError("t_end_policy must be 'fixed' or 'cutoff'")
    return p, integ
