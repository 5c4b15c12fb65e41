"""Conditional (measurement-record-resolved) weighted-trajectory method.

One conditional run simulates a single experimental realization: the real
noises xi^r (one per mode per step, shared by the entire ensemble) play the
homodyne measurement noise, while independent fictitious noises realize the
quantum diffusion per trajectory. Trajectories carry log-weights whose
evolution implements the record likelihood; breeding clones heavy
trajectories over starved ones to keep the weights balanced, and the weights
are renormalized after every step.

The feedback drive uses the weighted ensemble mean:

  eps_i = zeta sum_j J_ij (<x_j> + xi_j^r / sqrt(2 gamma_m))      (default)
  eps_i = zeta sum_j J_ij (<x_j> + xi_i^r / sqrt(2 gamma_m))      ("printed")

The second indexing reproduces the literal printed equation and is kept
selectable; the default follows the multimode master-equation structure
where the noise is summed with J.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .problems import ising_energy
from .rng import (
    SUB_COND_FICT_ALPHA,
    SUB_COND_FICT_BETA,
    SUB_COND_REAL,
    normal_block,
)
from .sde_total import DivergenceError, PhaseEnsemble


@dataclass
class WeightedEnsemble:
    states: PhaseEnsemble
    log_weights: np.ndarray
    breed_count: int = 0

    def __post_init__(self):
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        if self.log_weights.shape != (self.states.n_traj,):
            raise ValueError("log_weights must have shape (n_traj,)")

    @staticmethod
    def vacuum(n_traj, n_modes):
        return WeightedEnsemble(PhaseEnsemble.vacuum(n_traj, n_modes), np.zeros(n_traj))


def _linear_weights(log_weights):
    if not np.all(np.isfinite(log_weights)):
        raise ValueError("non-finite log-weights")
    shift = log_weights.max(axis=-1, keepdims=True)
    return np.exp(log_weights - shift), shift


def weighted_mean(ensemble, values):
    """E[w f]/E[w] along the trajectory axis.

    `values` may be the per-trajectory observable array (n_traj, ...) or a
    callable applied to the ensemble states.
    """
    if callable(values):
        values = values(ensemble.states)
    values = np.asarray(values)
    w, _ = _linear_weights(ensemble.log_weights)
    tot = w.sum()
    if tot <= 0 or not np.isfinite(tot):
        raise ValueError(f"total weight underflow: sum={tot}")
    shape = (-1,) + (1,) * (values.ndim - 1)
    return (w.reshape(shape) * values).sum(axis=0) / tot


def normalize_weights(ensemble):
    """Rescale so mean exp(log w) == 1; every weighted mean is unchanged."""
    w, shift = _linear_weights(ensemble.log_weights)
    log_mean = shift.reshape(()) + np.log(w.mean())
    return WeightedEnsemble(ensemble.states, ensemble.log_weights - log_mean, ensemble.breed_count)


def breed(ensemble, eps_thr):
    """Clone the heaviest trajectory over the lightest while min/mean < eps_thr.

    Both weights become half the maximum; ties resolve to the lowest index.
    Operates on linear weights reconstructed from the log-weights.
    """
    if not 0.0 < eps_thr < 1.0:
        raise ValueError("eps_thr must lie in (0, 1)")
    w, shift = _linear_weights(ensemble.log_weights)
    alpha = ensemble.states.alpha
    beta = ensemble.states.beta
    copied = False
    count = ensemble.breed_count
    while True:
        i = int(np.argmin(w))
        if w[i] >= eps_thr * w.mean():
            break
        j = int(np.argmax(w))
        if not copied:
            alpha = alpha.copy()
            beta = beta.copy()
            w = w.copy()
            copied = True
        alpha[i] = alpha[j]
        beta[i] = beta[j]
        w[i] = w[j] = 0.5 * w[j]
        count += 1
    if not copied:
        return ensemble
    states = PhaseEnsemble(alpha, beta, ensemble.states.t)
    return WeightedEnsemble(states, np.log(w) + shift.reshape(()), count)


def _feedback_drive(xbar, xi_r, dt, zeta, params, problem, real_noise_mode):
    """Frozen per-step drive eps_i, shape (..., n_modes).

    xi_r holds standard-normal draws; the continuous-time measurement noise
    they stand for is xi_r/sqrt(dt), which is what enters the drive.
    """
    noise = xi_r / np.sqrt(2.0 * params.gamma_m * dt)
    if real_noise_mode == "summed":
        return zeta * problem.couple(xbar + noise)
    if real_noise_mode == "printed":
        row_sum = problem.couple(np.ones(problem.n))
        return zeta * (problem.couple(xbar) + noise * row_sum)
    raise ValueError(f"unknown real_noise_mode {real_noise_mode!r}")


def conditional_step(ensemble, dt, schedule, params, problem, noise, real_noise_mode="summed",
                     quadratic_damping=False):
    """One Stratonovich step of states and log-weights (no breeding here).

    noise = (xi_real (n_modes,), xi_fict_alpha, xi_fict_beta (n_traj, n_modes)).
    The weighted means and the drive eps are frozen over the step; the same
    real draw enters every trajectory's drive and weight update.
    """
    if params.gamma_m <= 0:
        raise ValueError("the conditional method requires gamma_m > 0")
    if dt <= 0:
        raise ValueError("dt must be positive")
    xi_r, xi_fa, xi_fb = noise
    st = ensemble.states
    st.check_finite()
    t = st.t
    ts = np.array([t, t + 0.5 * dt, t + dt])
    eps_p3 = np.asarray(schedule.eps_p(ts), dtype=float)
    zeta_mid = float(schedule.zeta(t + 0.5 * dt))
    xbar = weighted_mean(ensemble, st.x)
    eps = _feedback_drive(xbar, xi_r, dt, zeta_mid, params, problem, real_noise_mode)

    a3 = st.alpha[None, :, :]
    b3 = st.beta[None, :, :]
    w2 = ensemble.log_weights[None, :]
    eps3 = eps[None, None, :]
    xbar3 = xbar[None, None, :]
    xr3 = np.asarray(xi_r, dtype=float)[None, None, :]
    fa3 = xi_fa[None, :, :]
    fb3 = xi_fb[None, :, :]

    kern = backend.compiled()
    if kern is not None:
        a, b, lw = kern.conditional_step_rk4(
            np.ascontiguousarray(a3), np.ascontiguousarray(b3), np.ascontiguousarray(w2),
            np.ascontiguousarray(eps3), np.ascontiguousarray(xbar3),
            np.ascontiguousarray(fa3), np.ascontiguousarray(fb3), np.ascontiguousarray(xr3),
            eps_p3, params.gamma_prime, params.kappa, params.gamma_p, params.gamma_m,
            dt, quadratic_damping,
        )
    else:
        a, b, lw = backend.numpy_kernels().conditional_step_rk4(
            a3, b3, w2, eps3, xbar3, fa3, fb3, xr3,
            eps_p3, params.gamma_prime, params.kappa, params.gamma_p, params.gamma_m,
            dt, quadratic=quadratic_damping,
        )
    states = PhaseEnsemble(a[0], b[0], t + dt)
    return WeightedEnsemble(states, lw[0], ensemble.breed_count)


@dataclass
class ConditionalRunRecord:
    """Weighted-mean trace, weight statistics, and the final spin readout."""

    times: np.ndarray
    wmean_x: np.ndarray
    wmean_imx: np.ndarray
    weight_min: np.ndarray
    weight_max: np.ndarray
    weight_mean: np.ndarray
    breed_counts: np.ndarray
    spins: np.ndarray
    energy: float
    final: WeightedEnsemble = None
    seed: int = 0
    meta: dict = field(default_factory=dict)


def run_conditional(problem, params, schedule, n_traj, n_steps, eps_thr, seed,
                    record_stride=None, run=0, real_noise_mode="summed"):
    """One conditional run: step, breed, normalize, record; one spin readout.

    Returns a ConditionalRunRecord whose final spins are the signs of the
    real parts of the weighted means <x_i>.
    """
    if params.gamma_m <= 0:
        raise ValueError("the conditional method requires gamma_m > 0")
    n = problem.n
    dt = schedule.t_max / n_steps
    if record_stride is None:
        record_stride = max(1, n_steps // 100)
    ens = WeightedEnsemble.vacuum(n_traj, n)
    times, wmeans, wstats, breeds = [], [], [], []

    def record(e):
        times.append(e.states.t)
        wmeans.append(weighted_mean(e, e.states.x))
        w, shift = _linear_weights(e.log_weights)
        scale = np.exp(shift.reshape(()))
        wstats.append((w.min() * scale, w.max() * scale, w.mean() * scale))
        breeds.append(e.breed_count)

    record(ens)
    for step in range(n_steps):
        xi_r = normal_block(seed, run, step, SUB_COND_REAL, (n,))
        xi_fa = normal_block(seed, run, step, SUB_COND_FICT_ALPHA, (n_traj, n))
        xi_fb = normal_block(seed, run, step, SUB_COND_FICT_BETA, (n_traj, n))
        ens = conditional_step(ens, dt, schedule, params, problem, (xi_r, xi_fa, xi_fb),
                               real_noise_mode=real_noise_mode)
        ens = breed(ens, eps_thr)
        ens = normalize_weights(ens)
        if (step + 1) % record_stride == 0 or step == n_steps - 1:
            record(ens)

    ens.states.check_finite()
    final_x = wmeans[-1]
    spins = np.where(final_x.real >= 0, 1, -1).astype(np.int8)
    wmin, wmax, wmean = (np.array([s[k] for s in wstats]) for k in range(3))
    return ConditionalRunRecord(
        times=np.array(times),
        wmean_x=np.array(wmeans),
        wmean_imx=np.array(wmeans).imag,
        weight_min=wmin, weight_max=wmax, weight_mean=wmean,
        breed_counts=np.array(breeds),
        spins=spins,
        energy=float(ising_energy(problem, spins)),
        final=ens, seed=seed,
        meta={"n_traj": n_traj, "n_steps": n_steps, "dt": dt, "eps_thr": eps_thr,
              "backend": backend.active_name(), "run": run, "real_noise_mode": real_noise_mode},
    )
