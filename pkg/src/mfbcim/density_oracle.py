"""Truncated-Fock master-equation integrators for 1-2 modes.

This module is the slow, dense, auditable reference the stochastic modules
are validated against. It implements

* the unconditional (feedback-averaged) master equation, including the
  double-commutator feedback-noise term,
* the Ito conditional equation driven by the homodyne innovation noise, and
* its Stratonovich form carrying the measurement/feedback drift corrections,

all with the factor-2 dissipator convention D[c]rho = 2 c rho c^dag
- (c^dag c rho + rho c^dag c), so a loss rate g in gamma*D[a] decays the
amplitude at g (and the photon number at 2g).

Every function accepts a batch of density matrices, shape (..., d, d).
"""

import numpy as np

from .rng import SUB_ORACLE_WIENER, normal_block

INNOVATION_TRACE_TOL = 1e-3
STEP_TRACE_TOL = 1e-3


class TraceDriftError(Exception):
    """Trace left 1 by more than the step tolerance; reduce dt."""


def _tr(m):
    return np.einsum("...ii->...", m)


def _dag(m):
    return np.conj(np.swapaxes(m, -1, -2))


def destroy(cutoff):
    return np.diag(np.sqrt(np.arange(1, cutoff)).astype(complex), k=1)


def _embed(op, mode, n_modes, cutoff):
    """Single-mode operator -> tensor-product operator on mode `mode`."""
    full = np.array([[1.0 + 0j]])
    eye = np.eye(cutoff, dtype=complex)
    for m in range(n_modes):
        full = np.kron(full, op if m == mode else eye)
    return full


class FockOps:
    """Precomputed mode operators on the truncated product space.

    a[i], c[i] = sqrt(2 gamma_m) a[i], and the anti-Hermitian feedback
    generator x_gen[i] = a_i^dag - a_i (scaled by zeta/sqrt(2 gamma_m) at
    step time, since zeta may ramp).
    """

    def __init__(self, n_modes, cutoff, gamma_m):
        if n_modes not in (1, 2):
            raise ValueError("oracle supports 1 or 2 modes")
        if cutoff < 2:
            raise ValueError("cutoff must be at least 2")
        self.n_modes = n_modes
        self.cutoff = cutoff
        self.dim = cutoff**n_modes
        self.gamma_m = gamma_m
        a1 = destroy(cutoff)
        self.a = [_embed(a1, i, n_modes, cutoff) for i in range(n_modes)]
        self.ad = [_dag(a) for a in self.a]
        self.num = [ad @ a for ad, a in zip(self.ad, self.a)]
        self.a2 = [a @ a for a in self.a]
        self.a2d_a2 = [_dag(a2) @ a2 for a2 in self.a2]
        self.squeeze = [_dag(a2) - a2 for a2 in self.a2]  # (a^dag)^2 - a^2
        self.x_gen = [ad - a for ad, a in zip(self.ad, self.a)]
        self.x = [a + ad for a, ad in zip(self.a, self.ad)]
        s = np.sqrt(2.0 * gamma_m) if gamma_m > 0 else 0.0
        self.c = [s * a for a in self.a]

    def vacuum(self, batch=()):
        rho = np.zeros(batch + (self.dim, self.dim), dtype=complex)
        rho[..., 0, 0] = 1.0
        return rho


def dissipator(c, rho):
    """D[c]rho = 2 c rho c^dag - (c^dag c rho + rho c^dag c)."""
    cd = _dag(c)
    cdc = cd @ c
    return 2.0 * (c @ rho @ cd) - cdc @ rho - rho @ cdc


def innovation(c, rho):
    """Homodyne innovation update c rho + rho c^dag - <c + c^dag> rho.

    Only trace-preserving on unit-trace input, so that is enforced.
    """
    tr = _tr(rho)
    if not np.allclose(tr, 1.0, atol=INNOVATION_TRACE_TOL):
        raise ValueError(f"innovation needs trace 1, got max deviation {np.max(np.abs(tr - 1.0)):.3g}")
    lin = c @ rho + rho @ _dag(c)
    return lin - _tr(lin)[..., None, None] * rho


def strat_correction_measurement(c, rho):
    """Ito->Stratonovich drift correction for the innovation noise term.

    <c+c^dag> H[c]rho - c rho c^dag + <c^dag c> rho - 1/2 H[cc] rho.
    """
    cd = _dag(c)
    t = _tr((c + cd) @ rho)[..., None, None]
    nbar = _tr(cd @ c @ rho)[..., None, None]
    return (
        t * innovation(c, rho)
        - c @ rho @ cd
        + nbar * rho
        - 0.5 * innovation(c @ c, rho)
    )


def strat_corrections_feedback(c, k, rho):
    """Ito->Stratonovich corrections mixing measurement and feedback.

    Returns (meas-then-feedback, feedback-then-meas, feedback-squared) terms;
    the first two coincide whenever [c, k] and [c^dag, k] are scalars.
    """
    cd = _dag(c)
    t = _tr((c + cd) @ rho)[..., None, None]
    comm = k @ rho - rho @ k
    b_meas = c @ rho + rho @ cd - t * rho
    c_hk = -0.5 * (k @ b_meas - b_meas @ k)
    c_kh = -0.5 * (
        c @ comm
        + comm @ cd
        - t * comm
        - _tr(comm @ (c + cd))[..., None, None] * rho
    )
    c_kk = -0.5 * (k @ comm - comm @ k)
    return c_hk, c_kh, c_kk


def lindblad_rhs(rho, eps_p, params, ops):
    """Adiabatic single-DPO generator applied to every mode (no feedback)."""
    g = params.gamma
    nl = params.kappa**2 / (4.0 * params.gamma_p)
    drive = params.kappa * eps_p / (2.0 * params.gamma_p)
    out = np.zeros_like(rho)
    for i in range(ops.n_modes):
        sq = ops.squeeze[i]
        out = out + drive * (sq @ rho - rho @ sq)
        out = out + 2.0 * g * (ops.a[i] @ rho @ ops.ad[i])
        out = out - g * (ops.num[i] @ rho + rho @ ops.num[i])
        out = out + 2.0 * nl * (ops.a2[i] @ rho @ _dag(ops.a2[i]))
        out = out - nl * (ops.a2d_a2[i] @ rho + rho @ ops.a2d_a2[i])
    return out


def _fb_scale(zeta, gamma_m):
    if zeta == 0:
        return 0.0
    if gamma_m <= 0:
        raise ValueError("feedback requires gamma_m > 0")
    return zeta / np.sqrt(2.0 * gamma_m)


def feedback_drift(rho, zeta, params, ops, J):
    """Deterministic feedback terms of the unconditional master equation.

    zeta sum_ij J_ij [x_gen_i, a_j rho + rho a_j^dag]
    + zeta^2/(4 gamma_m) sum_ik (J J^T)_ik [x_gen_i, [x_gen_k, rho]].
    """
    scale = _fb_scale(zeta, params.gamma_m)
    if scale == 0.0:
        return np.zeros_like(rho)
    J = np.asarray(J, dtype=float)
    out = np.zeros_like(rho)
    for i in range(ops.n_modes):
        for j in range(ops.n_modes):
            if J[i, j] == 0:
                continue
            lin = ops.a[j] @ rho + rho @ ops.ad[j]
            out = out + zeta * J[i, j] * (ops.x_gen[i] @ lin - lin @ ops.x_gen[i])
    gram = J @ J.T
    for i in range(ops.n_modes):
        for k in range(ops.n_modes):
            if gram[i, k] == 0:
                continue
            inner = ops.x_gen[k] @ rho - rho @ ops.x_gen[k]
            out = out + 0.5 * scale**2 * gram[i, k] * (
                ops.x_gen[i] @ inner - inner @ ops.x_gen[i]
            )
    return out


def unconditional_rhs(rho, eps_p, zeta, params, ops, J):
    return lindblad_rhs(rho, eps_p, params, ops) + feedback_drift(rho, zeta, params, ops, J)


def total_master_step(rho, dt, eps_p, zeta, params, ops, J):
    """One deterministic RK4 step of the unconditional master equation."""
    if dt <= 0:
        raise ValueError("dt must be positive")

    def f(r):
        return unconditional_rhs(r, eps_p, zeta, params, ops, J)

    k1 = f(rho)
    k2 = f(rho + 0.5 * dt * k1)
    k3 = f(rho + 0.5 * dt * k2)
    k4 = f(rho + dt * k3)
    out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_trace(out)
    return out


def _check_trace(rho):
    dev = np.max(np.abs(_tr(rho) - 1.0))
    if dev > STEP_TRACE_TOL:
        raise TraceDriftError(f"trace drifted by {dev:.3g} (> {STEP_TRACE_TOL}); reduce dt")
    return dev


def _noise_term(rho, zeta, params, ops, J, dW):
    """sum_i dW_i (H[c_i] + sum_j J_ij K_j) rho."""
    scale = _fb_scale(zeta, params.gamma_m)
    J = np.asarray(J, dtype=float)
    out = np.zeros_like(rho)
    dW = np.asarray(dW)
    for i in range(ops.n_modes):
        w = dW[..., i, None, None] if dW.ndim > 1 else dW[i]
        term = innovation(ops.c[i], rho)
        if scale != 0.0:
            for j in range(ops.n_modes):
                if J[i, j] == 0:
                    continue
                term = term + scale * J[i, j] * (ops.x_gen[j] @ rho - rho @ ops.x_gen[j])
        out = out + w * term
    return out


def _milstein_term(rho, zeta, params, ops, J, dW, dt):
    # 1/2 dB[B(rho)] (dW^2 - dt), single noise channel only.
    if ops.n_modes != 1:
        raise ValueError("milstein correction implemented for 1 mode only")
    scale = _fb_scale(zeta, params.gamma_m)
    J = np.asarray(J, dtype=float)
    c, cd = ops.c[0], _dag(ops.c[0])
    xg = ops.x_gen[0]

    def b_of(r, tr_r):
        t = _tr((c + cd) @ r)[..., None, None]
        out = c @ r + r @ cd - t * tr_r
        if scale != 0.0 and J[0, 0] != 0:
            out = out + scale * J[0, 0] * (xg @ r - r @ xg)
        return out

    b = b_of(rho, rho)
    # derivative of B at rho in direction b: the <.> rho term is bilinear
    t_rho = _tr((c + cd) @ rho)[..., None, None]
    db = c @ b + b @ cd - _tr((c + cd) @ b)[..., None, None] * rho - t_rho * b
    if scale != 0.0 and J[0, 0] != 0:
        db = db + scale * J[0, 0] * (xg @ b - b @ xg)
    w = np.asarray(dW)
    w2 = (w[..., 0, None, None] ** 2 - dt) if w.ndim > 1 else (w[0] ** 2 - dt)
    return 0.5 * db * w2


def ito_conditional_step(rho, dt, dW, eps_p, zeta, params, ops, J, milstein=False):
    """Euler-Maruyama step of the Ito conditional master equation.

    dW holds the Wiener increments (already scaled by sqrt(dt)), one per
    mode, optionally batched as (..., n_modes). Trace drift is monitored,
    never silently repaired.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    drift = unconditional_rhs(rho, eps_p, zeta, params, ops, J)
    out = rho + dt * drift + _noise_term(rho, zeta, params, ops, J, dW)
    if milstein:
        out = out + _milstein_term(rho, zeta, params, ops, J, dW, dt)
    _check_trace(out)
    return out


def strat_conditional_rhs(rho, xi, eps_p, zeta, params, ops, J):
    """Stratonovich conditional generator at noise value xi ( = dW/dt).

    L rho + sum_i [ -c_i rho c_i^dag + <c_i^dag c_i> rho - 1/2 H[c_i c_i] rho
    + T_i H[c_i] rho ] + sum_ij J_ij T_j K_i rho + noise(xi).
    """
    scale = _fb_scale(zeta, params.gamma_m)
    J = np.asarray(J, dtype=float)
    out = lindblad_rhs(rho, eps_p, params, ops)
    t_vals = []
    for i in range(ops.n_modes):
        c, cd = ops.c[i], _dag(ops.c[i])
        t = _tr((c + cd) @ rho)[..., None, None]
        t_vals.append(t)
        out = out - c @ rho @ cd
        out = out + _tr(cd @ c @ rho)[..., None, None] * rho
        out = out - 0.5 * innovation(c @ c, rho)
        out = out + t * innovation(c, rho)
    if scale != 0.0:
        for i in range(ops.n_modes):
            for j in range(ops.n_modes):
                if J[i, j] == 0:
                    continue
                out = out + scale * J[i, j] * t_vals[j] * (
                    ops.x_gen[i] @ rho - rho @ ops.x_gen[i]
                )
    return out + _noise_term(rho, zeta, params, ops, J, np.asarray(xi))


def strat_conditional_step(rho, dt, dW, eps_p, zeta, params, ops, J, n_iter=4):
    """Implicit-midpoint step of the Stratonovich conditional equation.

    Uses the same dW as the paired Ito step when comparing forms; the
    midpoint is found by fixed-point iteration (the generator is mildly
    stiff at these sizes, a few sweeps suffice).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    xi = np.asarray(dW) / dt

    def g(r):
        return dt * strat_conditional_rhs(r, xi, eps_p, zeta, params, ops, J)

    mid = rho
    for _ in range(n_iter):
        mid = rho + 0.5 * g(mid)
    out = rho + g(mid)
    _check_trace(out)
    return out


def quadrature_moments(rho, ops):
    """(<x>, <x^2>, <n>) per mode for x = a + a^dag; arrays of shape (..., n_modes)."""
    xs, x2s, ns = [], [], []
    for i in range(ops.n_modes):
        x = ops.x[i]
        xs.append(_tr(x @ rho).real)
        x2s.append(_tr(x @ x @ rho).real)
        ns.append(_tr(ops.num[i] @ rho).real)
    return (
        np.stack(xs, axis=-1),
        np.stack(x2s, axis=-1),
        np.stack(ns, axis=-1),
    )


def validate_state(rho, atol_trace=1e-9, atol_herm=1e-12, min_eig=-1e-6):
    """Check the density-matrix invariants; returns (trace error, min eigenvalue)."""
    tr_err = float(np.max(np.abs(_tr(rho) - 1.0)))
    herm = float(np.max(np.abs(rho - _dag(rho))))
    if tr_err > atol_trace:
        raise ValueError(f"trace error {tr_err:.3g} exceeds {atol_trace}")
    if herm > atol_herm:
        raise ValueError(f"hermiticity deviation {herm:.3g} exceeds {atol_herm}")
    w = np.linalg.eigvalsh(0.5 * (rho + _dag(rho)))
    lo = float(w.min())
    if lo < min_eig:
        raise ValueError(f"negative eigenvalue {lo:.3g} below {min_eig}")
    return tr_err, lo


def run_unconditional(ops, params, schedule, dt, n_steps, J=None, rho0=None, record_times=None):
    """Integrate the unconditional equation; returns (times, moments dict trace)."""
    J = np.zeros((ops.n_modes, ops.n_modes)) if J is None else J
    rho = ops.vacuum() if rho0 is None else rho0
    record_times = [] if record_times is None else list(record_times)
    out_t, out_x, out_x2, out_n = [], [], [], []
    next_rec = 0

    def record(t, rho):
        x, x2, n = quadrature_moments(rho, ops)
        out_t.append(t)
        out_x.append(x)
        out_x2.append(x2)
        out_n.append(n)

    t = 0.0
    for step in range(n_steps + 1):
        while next_rec < len(record_times) and record_times[next_rec] <= t + 1e-12:
            record(t, rho)
            next_rec += 1
        if step == n_steps:
            break
        mid = t + 0.5 * dt
        rho = total_master_step(
            rho, dt, float(schedule.eps_p(mid)), float(schedule.zeta(mid)), params, ops, J
        )
        t += dt
    return np.array(out_t), {
        "x": np.array(out_x),
        "x2": np.array(out_x2),
        "n": np.array(out_n),
    }


def run_conditional_paths(
    ops, params, schedule, dt, n_steps, n_paths, seed, J=None, scheme="ito", run=0
):
    """Integrate a batch of conditional paths with independent noise records.

    Returns the final batch of density matrices, shape (n_paths, d, d).
    """
    J = np.zeros((ops.n_modes, ops.n_modes)) if J is None else J
    rho = ops.vacuum(batch=(n_paths,))
    t = 0.0
    for step in range(n_steps):
        xi = normal_block(seed, run, step, SUB_ORACLE_WIENER, (n_paths, ops.n_modes))
        dW = np.sqrt(dt) * xi
        mid = t + 0.5 * dt
        eps_p = float(schedule.eps_p(mid))
        zeta = float(schedule.zeta(mid))
        if scheme == "ito":
            rho = ito_conditional_step(rho, dt, dW, eps_p, zeta, params, ops, J)
        elif scheme == "strat":
            rho = strat_conditional_step(rho, dt, dW, eps_p, zeta, params, ops, J)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        t += dt
    return rho
