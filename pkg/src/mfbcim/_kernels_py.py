"""Pure-numpy SDE step kernels (fallback when the compiled core is absent).

Semantics shared with the compiled kernels in _kernels.pyx:

* total method: one step of the unconditional positive-P equations for all
  trajectories, either frozen-noise RK4 on the Stratonovich drift (gamma')
  or Euler-Maruyama on the Ito drift (gamma). Noise enters RK4 as a
  constant forcing dW/dt across substages; for diagonal multiplicative
  noise this is Stratonovich-consistent and strong order 1.
* conditional method: frozen-noise RK4 of the weighted (Hush-style)
  Stratonovich equations for states and log-weights, with the feedback
  drive eps and the ensemble means frozen over the step.

`couple(x)` applies the coupling matrix to the mode axis; the compiled
kernels take the dense matrix itself.
"""

import numpy as np

STAGE_OF = (0, 1, 1, 2)  # RK4 substage -> ramp sample (t, t+dt/2, t+dt)


def _as_couple(j_or_couple):
    if callable(j_or_couple):
        return j_or_couple
    J = np.asarray(j_or_couple)
    return lambda x: x @ J


def _chi(a, eps_p, kappa, gamma_p):
    return (kappa / gamma_p) * (eps_p - 0.5 * kappa * a * a)


def _total_stage(alpha, beta, couple, eps_p, zeta, f, gamma_eff, kappa, gamma_p, xi_a, xi_b, jxi, inv_sqrt_dt):
    eps = zeta * couple(alpha + beta)
    chi_a = _chi(alpha, eps_p, kappa, gamma_p)
    chi_b = _chi(beta, eps_p, kappa, gamma_p)
    fa = eps - gamma_eff * alpha + beta * chi_a + (np.sqrt(chi_a) * xi_a + f * jxi) * inv_sqrt_dt
    fb = eps - gamma_eff * beta + alpha * chi_b + (np.sqrt(chi_b) * xi_b + f * jxi) * inv_sqrt_dt
    return fa, fb


def total_step_rk4(alpha, beta, j_or_couple, xi_a, xi_b, jxi, eps_p3, zeta3, f3, gamma_prime, kappa, gamma_p, dt):
    couple = _as_couple(j_or_couple)
    inv = 1.0 / np.sqrt(dt)

    def stage(a, b, s):
        return _total_stage(
            a, b, couple, eps_p3[s], zeta3[s], f3[s], gamma_prime, kappa, gamma_p, xi_a, xi_b, jxi, inv
        )

    k1a, k1b = stage(alpha, beta, STAGE_OF[0])
    k2a, k2b = stage(alpha + 0.5 * dt * k1a, beta + 0.5 * dt * k1b, STAGE_OF[1])
    k3a, k3b = stage(alpha + 0.5 * dt * k2a, beta + 0.5 * dt * k2b, STAGE_OF[2])
    k4a, k4b = stage(alpha + dt * k3a, beta + dt * k3b, STAGE_OF[3])
    sixth = dt / 6.0
    return (
        alpha + sixth * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        beta + sixth * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
    )


def total_step_em(alpha, beta, j_or_couple, xi_a, xi_b, jxi, eps_p, zeta, f, gamma, kappa, gamma_p, dt):
    couple = _as_couple(j_or_couple)
    eps = zeta * couple(alpha + beta)
    chi_a = _chi(alpha, eps_p, kappa, gamma_p)
    chi_b = _chi(beta, eps_p, kappa, gamma_p)
    root = np.sqrt(dt)
    new_a = alpha + dt * (eps - gamma * alpha + beta * chi_a) + root * (np.sqrt(chi_a) * xi_a + f * jxi)
    new_b = beta + dt * (eps - gamma * beta + alpha * chi_b) + root * (np.sqrt(chi_b) * xi_b + f * jxi)
    return new_a, new_b


def _cond_stage(alpha, beta, logw_unused, eps, xbar, eps_p, gamma_prime, kappa, gamma_p, gamma_m, xi_fa, xi_fb, xi_r, inv_sqrt_dt, quadratic):
    chi_a = _chi(alpha, eps_p, kappa, gamma_p)
    chi_b = _chi(beta, eps_p, kappa, gamma_p)
    if quadratic:
        damp_a = -gamma_prime * alpha * alpha
        damp_b = -gamma_prime * beta * beta
    else:
        damp_a = -gamma_prime * alpha
        damp_b = -gamma_prime * beta
    fa = eps + damp_a + beta * chi_a + np.sqrt(chi_a) * xi_fa * inv_sqrt_dt
    fb = eps + damp_b + alpha * chi_b + np.sqrt(chi_b) * xi_fb * inv_sqrt_dt
    x = alpha + beta
    fw = gamma_m * np.sum((x * (2.0 * xbar - x)).real, axis=-1)
    fw = fw + np.sqrt(2.0 * gamma_m) * np.sum(x.real * xi_r, axis=-1) * inv_sqrt_dt
    return fa, fb, fw


def conditional_step_rk4(alpha, beta, logw, eps, xbar, xi_fa, xi_fb, xi_r, eps_p3, gamma_prime, kappa, gamma_p, gamma_m, dt, quadratic=False):
    """States and log-weights advance together; eps, xbar, xi_r are frozen.

    Shapes: alpha/beta/xi_f* (R, S, N); logw (R, S); eps/xbar/xi_r (R, 1, N).
    """
    inv = 1.0 / np.sqrt(dt)

    def stage(a, b, s):
        return _cond_stage(
            a, b, None, eps, xbar, eps_p3[s], gamma_prime, kappa, gamma_p, gamma_m,
            xi_fa, xi_fb, xi_r, inv, quadratic,
        )

    k1a, k1b, k1w = stage(alpha, beta, STAGE_OF[0])
    k2a, k2b, k2w = stage(alpha + 0.5 * dt * k1a, beta + 0.5 * dt * k1b, STAGE_OF[1])
    k3a, k3b, k3w = stage(alpha + 0.5 * dt * k2a, beta + 0.5 * dt * k2b, STAGE_OF[2])
    k4a, k4b, k4w = stage(alpha + dt * k3a, beta + dt * k3b, STAGE_OF[3])
    sixth = dt / 6.0
    return (
        alpha + sixth * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        beta + sixth * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
        logw + sixth * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
    )
