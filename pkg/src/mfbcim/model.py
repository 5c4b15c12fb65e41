"""Physical parameters, ramp schedules, and classical network analysis.

All operational formulas use the total signal loss gamma = gamma_s + gamma_m
(the measurement channel is just another loss port for the deterministic
dynamics), so classical predictions line up with the stochastic modules.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CimParams:
    """Rates of one degenerate parametric oscillator plus feedback strength.

    gamma_s : signal loss through the undetected port
    gamma_m : signal loss through the homodyne-detected port
    gamma_p : pump loss (adiabatically eliminated; must dominate)
    kappa   : parametric nonlinearity
    zeta    : nominal feedback strength (runs may ramp it via a schedule)
    """

    gamma_s: float
    gamma_m: float
    gamma_p: float
    kappa: float
    zeta: float = 0.0

    def __post_init__(self):
        if self.gamma_s < 0 or self.gamma_m < 0:
            raise ValueError("decay rates must be nonnegative")
        if self.gamma_p <= 0:
            raise ValueError("gamma_p must be positive")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.zeta < 0:
            raise ValueError("zeta must be nonnegative")
        if self.gamma_m == 0 and self.zeta > 0:
            raise ValueError(
                "feedback requires a measurement channel: zeta > 0 with gamma_m == 0 "
                "leaves the feedback noise scale zeta/sqrt(2*gamma_m) undefined"
            )

    @property
    def gamma(self):
        return self.gamma_s + self.gamma_m

    @property
    def gamma_prime(self):
        """Stratonovich-corrected decay, gamma - kappa^2/(4 gamma_p)."""
        return self.gamma - self.kappa**2 / (4.0 * self.gamma_p)

    def noise_scale(self, zeta=None):
        """Feedback-noise scale f = zeta / sqrt(2 gamma_m); 0 when zeta == 0."""
        z = self.zeta if zeta is None else zeta
        if z == 0:
            return 0.0
        if self.gamma_m == 0:
            raise ValueError("zeta > 0 requires gamma_m > 0")
        return z / np.sqrt(2.0 * self.gamma_m)


def pump_threshold(params):
    """Threshold pump amplitude gamma * gamma_p / kappa."""
    return params.gamma * params.gamma_p / params.kappa


def chi(alpha, eps_p, params):
    """Adiabatic gain coefficient (kappa/gamma_p) * (eps_p - kappa/2 * alpha^2)."""
    a = np.asarray(alpha)
    return (params.kappa / params.gamma_p) * (eps_p - 0.5 * params.kappa * a * a)


@dataclass(frozen=True)
class RampSchedule:
    """Linear pump/feedback ramps over [0, t_max], clamped outside."""

    t_max: float
    pump_start: float = 0.0
    pump_end: float = 0.0
    zeta_start: float = 0.0
    zeta_end: float = 0.0

    def __post_init__(self):
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        for name in ("pump_start", "pump_end", "zeta_start", "zeta_end"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @staticmethod
    def constant(t_max, eps_p, zeta=0.0):
        return RampSchedule(t_max, eps_p, eps_p, zeta, zeta)

    def _lerp(self, t, a, b):
        frac = np.clip(np.asarray(t, dtype=float) / self.t_max, 0.0, 1.0)
        return a + (b - a) * frac

    def eps_p(self, t):
        return self._lerp(t, self.pump_start, self.pump_end)

    def zeta(self, t):
        return self._lerp(t, self.zeta_start, self.zeta_end)


@dataclass(frozen=True)
class SteadyState:
    alpha_s: float
    alpha_p: float
    stable: bool


def _dpo_jacobian(alpha_s, alpha_p, params):
    # Real-amplitude Jacobian of d/dt (alpha_s, alpha_p) =
    # (-gamma a_s + kappa a_s a_p, eps_p - gamma_p a_p - kappa/2 a_s^2)
    g, gp, k = params.gamma, params.gamma_p, params.kappa
    return np.array(
        [
            [-g + k * alpha_p, k * alpha_s],
            [-k * alpha_s, -gp],
        ]
    )


STABILITY_EIG_TOL = 1e-12


def dpo_steady_states(params, eps_p):
    """Steady states of the single (uncoupled, unmeasured-drive) DPO.

    Below threshold only the zero-signal state exists; above it the pair
    alpha_s = +-sqrt((2/kappa)(eps_p - gamma*gamma_p/kappa)) appears and the
    zero state destabilizes. Stability is classified from the Jacobian
    eigenvalues (real part < 1e-12 counts as stable).
    """
    if eps_p < 0:
        raise ValueError("eps_p must be nonnegative")
    g, gp, k = params.gamma, params.gamma_p, params.kappa

    def classify(a_s, a_p):
        eig = np.linalg.eigvals(_dpo_jacobian(a_s, a_p, params))
        return bool(np.max(eig.real) < STABILITY_EIG_TOL)

    states = [SteadyState(0.0, eps_p / gp, classify(0.0, eps_p / gp))]
    if eps_p >= pump_threshold(params):
        amp = np.sqrt((2.0 / k) * (eps_p - g * gp / k))
        for sgn in (+1.0, -1.0):
            states.append(SteadyState(sgn * amp, g / k, classify(sgn * amp, g / k)))
    return states


def classical_network_rhs(alpha, eps_p, params, problem):
    """Deterministic mean-field network drift (real amplitudes).

    d alpha_i/dt = zeta sum_j J_ij alpha_j + (kappa eps_p/gamma_p - gamma) alpha_i
                   - kappa^2 alpha_i^3 / (2 gamma_p)
    """
    a = np.asarray(alpha, dtype=float)
    if a.shape[-1] != problem.n:
        raise ValueError(f"alpha must have length {problem.n}")
    lin = params.kappa * eps_p / params.gamma_p - params.gamma
    return (
        params.zeta * problem.couple(a)
        + lin * a
        - params.kappa**2 * a**3 / (2.0 * params.gamma_p)
    )


def classical_potential(alpha, eps_p, params, problem):
    """Potential with -grad(phi) == classical_network_rhs exactly.

    The coupling term carries zeta/2 (not zeta) because the energy-style
    double sum over ordered pairs differentiates to twice the drift term.
    """
    a = np.asarray(alpha, dtype=float)
    if a.shape[-1] != problem.n:
        raise ValueError(f"alpha must have length {problem.n}")
    lin = params.kappa * eps_p / params.gamma_p - params.gamma
    coupling = -0.5 * params.zeta * np.sum(a * problem.couple(a), axis=-1)
    return (
        coupling
        - 0.5 * lin * np.sum(a**2, axis=-1)
        + params.kappa**2 / (8.0 * params.gamma_p) * np.sum(a**4, axis=-1)
    )


def paper_rates(zeta=0.0):
    """The small-scale experiment rate set: gamma_s=1, gamma_m=0.1, gamma_p=10, kappa=0.1."""
    return CimParams(gamma_s=1.0, gamma_m=0.1, gamma_p=10.0, kappa=0.1, zeta=zeta)
