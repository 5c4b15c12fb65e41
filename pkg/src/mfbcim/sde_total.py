"""Unconditional (total master equation) positive-P integration.

Each trajectory carries doubled phase-space coordinates (alpha_i, beta_i)
per mode. The Ito equations are

  d alpha_i = [eps_i - gamma alpha_i + beta_i chi(alpha_i)] dt
              + sqrt(chi(alpha_i)) dW_i^a + f sum_j J_ij dW_j^s
  d beta_i  = likewise with alpha <-> beta and its own dW_i^b,

with eps_i = zeta sum_j J_ij (alpha_j + beta_j) evaluated per trajectory
and the shared increments dW^s identical in both equations. The default
integrator is frozen-noise RK4 on the Stratonovich drift (gamma ->
gamma' = gamma - kappa^2/4gamma_p); Euler-Maruyama on the Ito drift is
available for cross-validation.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .model import chi
from .rng import SUB_TOTAL_ALPHA, SUB_TOTAL_BETA, SUB_TOTAL_SHARED, normal_block


class DivergenceError(Exception):
    """A trajectory left the finite domain; carries (trajectory, t)."""

    def __init__(self, trajectory, t):
        self.trajectory = trajectory
        self.t = t
        super().__init__(f"non-finite phase-space coordinate in trajectory {trajectory} at t={t:.6g}")


@dataclass
class PhaseEnsemble:
    """Doubled phase-space coordinates for n_traj trajectories of n_modes modes."""

    alpha: np.ndarray
    beta: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=complex)
        self.beta = np.asarray(self.beta, dtype=complex)
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 2:
            raise ValueError("alpha and beta must both have shape (n_traj, n_modes)")

    @property
    def n_traj(self):
        return self.alpha.shape[0]

    @property
    def n_modes(self):
        return self.alpha.shape[1]

    @property
    def x(self):
        return self.alpha + self.beta

    @staticmethod
    def vacuum(n_traj, n_modes):
        z = np.zeros((n_traj, n_modes), dtype=complex)
        return PhaseEnsemble(z, z.copy())

    def check_finite(self):
        bad = ~(np.isfinite(self.alpha).all(axis=1) & np.isfinite(self.beta).all(axis=1))
        if bad.any():
            raise DivergenceError(int(np.argmax(bad)), self.t)


def total_drift(state, eps_p, zeta, params, problem):
    """Exact Ito drift (d alpha/dt, d beta/dt) per trajectory."""
    state.check_finite()
    eps = zeta * problem.couple(state.x)
    chi_a = chi(state.alpha, eps_p, params)
    chi_b = chi(state.beta, eps_p, params)
    da = eps - params.gamma * state.alpha + state.beta * chi_a
    db = eps - params.gamma * state.beta + state.alpha * chi_b
    return da, db


def strat_drift(state, eps_p, zeta, params, problem):
    """Stratonovich drift: total_drift with gamma replaced by gamma'."""
    da, db = total_drift(state, eps_p, zeta, params, problem)
    corr = (params.gamma - params.gamma_prime)
    return da + corr * state.alpha, db + corr * state.beta


def total_noise(state, eps_p, zeta, params, problem, gaussians):
    """Noise coefficients times the standard-normal draws (per unit sqrt(dt)).

    gaussians = (xi_alpha, xi_beta, xi_shared), each (n_traj, n_modes); the
    shared draw feeds both equations through f sum_j J_ij xi_j with
    f = zeta/sqrt(2 gamma_m). Negative or complex chi goes through the
    principal-branch complex square root, no clamping.
    """
    xi_a, xi_b, xi_s = gaussians
    f = params.noise_scale(zeta)
    jxi = f * problem.couple(xi_s) if f != 0.0 else 0.0
    na = np.sqrt(chi(state.alpha, eps_p, params)) * xi_a + jxi
    nb = np.sqrt(chi(state.beta, eps_p, params)) * xi_b + jxi
    return na, nb


def _ramp_samples(schedule, t, dt):
    ts = np.array([t, t + 0.5 * dt, t + dt])
    return (
        np.asarray(schedule.eps_p(ts), dtype=float),
        np.asarray(schedule.zeta(ts), dtype=float),
    )


def step_total(state, dt, schedule, params, problem, gaussians, scheme="rk4"):
    """Advance every trajectory by one step; the same draws feed all substages."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    xi_a, xi_b, xi_s = gaussians
    eps_p3, zeta3 = _ramp_samples(schedule, state.t, dt)
    f3 = np.array([params.noise_scale(z) for z in zeta3])
    jxi = problem.couple(xi_s) if f3.any() else np.zeros_like(xi_s)
    kern = backend.compiled()
    use_compiled = kern is not None and not problem.is_sparse
    if scheme == "rk4":
        if use_compiled:
            a, b = kern.total_step_rk4(
                state.alpha, state.beta, problem.J, xi_a, xi_b, jxi,
                eps_p3, zeta3, f3, params.gamma_prime, params.kappa, params.gamma_p, dt,
            )
        else:
            a, b = backend.numpy_kernels().total_step_rk4(
                state.alpha, state.beta, problem.couple, xi_a, xi_b, jxi,
                eps_p3, zeta3, f3, params.gamma_prime, params.kappa, params.gamma_p, dt,
            )
    elif scheme == "em":
        if use_compiled:
            a, b = kern.total_step_em(
                state.alpha, state.beta, problem.J, xi_a, xi_b, jxi,
                eps_p3[0], zeta3[0], f3[0], params.gamma, params.kappa, params.gamma_p, dt,
            )
        else:
            a, b = backend.numpy_kernels().total_step_em(
                state.alpha, state.beta, problem.couple, xi_a, xi_b, jxi,
                eps_p3[0], zeta3[0], f3[0], params.gamma, params.kappa, params.gamma_p, dt,
            )
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return PhaseEnsemble(a, b, state.t + dt)


@dataclass
class TotalRunRecord:
    """Ensemble-mean trace plus the final per-trajectory states.

    mean_x2 already includes the +1 commutator term, i.e. it estimates
    <(a+a^dag)^2>; mean_n estimates <a^dag a> via <beta alpha>.
    """

    times: np.ndarray
    mean_x: np.ndarray
    sem_x: np.ndarray
    mean_x2: np.ndarray
    sem_x2: np.ndarray
    mean_n: np.ndarray
    sem_n: np.ndarray
    final: PhaseEnsemble = None
    scheme: str = "rk4"
    seed: int = 0
    meta: dict = field(default_factory=dict)


def _moment_row(state):
    x = state.x
    x2 = x * x + 1.0
    n = state.beta * state.alpha
    rows = []
    for arr in (x, x2, n):
        mean = arr.mean(axis=0)
        sem = arr.real.std(axis=0, ddof=1) / np.sqrt(arr.shape[0]) if arr.shape[0] > 1 else np.zeros(arr.shape[1])
        rows.append((mean, sem))
    return rows


def run_total(problem, params, schedule, n_traj, n_steps, seed, record_stride=None,
              scheme="rk4", run=0, initial=None, observer=None):
    """Integrate t in [0, t_max] under the ramp; returns a TotalRunRecord.

    `observer(state)` is invoked at every record point (including t=0 and
    the final state), e.g. to accumulate per-trajectory statistics that are
    too large to keep in the record.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    n = problem.n
    dt = schedule.t_max / n_steps
    if record_stride is None:
        record_stride = max(1, n_steps // 100)
    state = PhaseEnsemble.vacuum(n_traj, n) if initial is None else initial
    times, moments = [], []

    def record(st):
        st.check_finite()
        times.append(st.t)
        moments.append(_moment_row(st))
        if observer is not None:
            observer(st)

    record(state)
    for step in range(n_steps):
        gaussians = tuple(
            normal_block(seed, run, step, sub, (n_traj, n))
            for sub in (SUB_TOTAL_ALPHA, SUB_TOTAL_BETA, SUB_TOTAL_SHARED)
        )
        state = step_total(state, dt, schedule, params, problem, gaussians, scheme=scheme)
        if (step + 1) % record_stride == 0 or step == n_steps - 1:
            record(state)

    def collect(idx, part):
        return np.array([m[idx][part] for m in moments])

    return TotalRunRecord(
        times=np.array(times),
        mean_x=collect(0, 0), sem_x=collect(0, 1),
        mean_x2=collect(1, 0), sem_x2=collect(1, 1),
        mean_n=collect(2, 0), sem_n=collect(2, 1),
        final=state, scheme=scheme, seed=seed,
        meta={"n_traj": n_traj, "n_steps": n_steps, "dt": dt, "backend": backend.active_name(), "run": run},
    )
