# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled SDE step kernels (hot loops of the total and conditional methods).

Mirrors the semantics of _kernels_py exactly; the dense coupling matvec is
done inline per trajectory, so these kernels cover the dense-J regime
(n_modes <= 64). Sparse problems stay on the numpy path where scipy's
matvec dominates anyway.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex csqrt(double complex)

ctypedef double complex cplx

DEF MAX_MODES = 64

cdef int STAGE_OF[4]
STAGE_OF[0] = 0
STAGE_OF[1] = 1
STAGE_OF[2] = 1
STAGE_OF[3] = 2

cdef double RK4_SHIFT[4]
RK4_SHIFT[0] = 0.0
RK4_SHIFT[1] = 0.5
RK4_SHIFT[2] = 0.5
RK4_SHIFT[3] = 1.0

cdef double RK4_WEIGHT[4]
RK4_WEIGHT[0] = 1.0
RK4_WEIGHT[1] = 2.0
RK4_WEIGHT[2] = 2.0
RK4_WEIGHT[3] = 1.0


def total_step_rk4(const cplx[:, ::1] alpha, const cplx[:, ::1] beta,
                   const double[:, ::1] J,
                   const double[:, ::1] xi_a, const double[:, ::1] xi_b, const double[:, ::1] jxi,
                   const double[::1] eps_p3, const double[::1] zeta3, const double[::1] f3,
                   double gamma_prime, double kappa, double gamma_p, double dt):
    cdef Py_ssize_t S = alpha.shape[0], N = alpha.shape[1]
    if N > MAX_MODES:
        raise ValueError("compiled kernel handles at most 64 modes")
    out_a_arr = np.empty((S, N), dtype=np.complex128)
    out_b_arr = np.empty((S, N), dtype=np.complex128)
    cdef cplx[:, ::1] out_a = out_a_arr
    cdef cplx[:, ::1] out_b = out_b_arr

    cdef cplx ya[MAX_MODES]
    cdef cplx yb[MAX_MODES]
    cdef cplx sa[MAX_MODES]
    cdef cplx sb[MAX_MODES]
    cdef cplx acc_a[MAX_MODES]
    cdef cplx acc_b[MAX_MODES]
    cdef cplx ka[MAX_MODES]
    cdef cplx kb[MAX_MODES]
    cdef cplx x, eps_i, chi_a, chi_b
    cdef double inv_sqrt_dt = 1.0 / np.sqrt(dt)
    cdef double cg = kappa / gamma_p, half_k = 0.5 * kappa
    cdef double eps_p, zeta, f, w
    cdef Py_ssize_t s, i, j, stage
    cdef int st

    with nogil:
        for s in range(S):
            for i in range(N):
                ya[i] = alpha[s, i]
                yb[i] = beta[s, i]
                acc_a[i] = 0
                acc_b[i] = 0
            for stage in range(4):
                st = STAGE_OF[stage]
                eps_p = eps_p3[st]
                zeta = zeta3[st]
                f = f3[st]
                if stage == 0:
                    for i in range(N):
                        sa[i] = ya[i]
                        sb[i] = yb[i]
                else:
                    w = RK4_SHIFT[stage] * dt
                    for i in range(N):
                        sa[i] = ya[i] + w * ka[i]
                        sb[i] = yb[i] + w * kb[i]
                for i in range(N):
                    eps_i = 0
                    for j in range(N):
                        x = sa[j] + sb[j]
                        eps_i = eps_i + J[i, j] * x
                    eps_i = zeta * eps_i
                    chi_a = cg * (eps_p - half_k * sa[i] * sa[i])
                    chi_b = cg * (eps_p - half_k * sb[i] * sb[i])
                    ka[i] = eps_i - gamma_prime * sa[i] + sb[i] * chi_a \
                        + (csqrt(chi_a) * xi_a[s, i] + f * jxi[s, i]) * inv_sqrt_dt
                    kb[i] = eps_i - gamma_prime * sb[i] + sa[i] * chi_b \
                        + (csqrt(chi_b) * xi_b[s, i] + f * jxi[s, i]) * inv_sqrt_dt
                w = RK4_WEIGHT[stage]
                for i in range(N):
                    acc_a[i] = acc_a[i] + w * ka[i]
                    acc_b[i] = acc_b[i] + w * kb[i]
            w = dt / 6.0
            for i in range(N):
                out_a[s, i] = ya[i] + w * acc_a[i]
                out_b[s, i] = yb[i] + w * acc_b[i]
    return out_a_arr, out_b_arr


def total_step_em(const cplx[:, ::1] alpha, const cplx[:, ::1] beta,
                  const double[:, ::1] J,
                  const double[:, ::1] xi_a, const double[:, ::1] xi_b, const double[:, ::1] jxi,
                  double eps_p, double zeta, double f,
                  double gamma, double kappa, double gamma_p, double dt):
    cdef Py_ssize_t S = alpha.shape[0], N = alpha.shape[1]
    if N > MAX_MODES:
        raise ValueError("compiled kernel handles at most 64 modes")
    out_a_arr = np.empty((S, N), dtype=np.complex128)
    out_b_arr = np.empty((S, N), dtype=np.complex128)
    cdef cplx[:, ::1] out_a = out_a_arr
    cdef cplx[:, ::1] out_b = out_b_arr
    cdef cplx x, eps_i, chi_a, chi_b
    cdef double root = np.sqrt(dt)
    cdef double cg = kappa / gamma_p, half_k = 0.5 * kappa
    cdef Py_ssize_t s, i, j

    with nogil:
        for s in range(S):
            for i in range(N):
                eps_i = 0
                for j in range(N):
                    x = alpha[s, j] + beta[s, j]
                    eps_i = eps_i + J[i, j] * x
                eps_i = zeta * eps_i
                chi_a = cg * (eps_p - half_k * alpha[s, i] * alpha[s, i])
                chi_b = cg * (eps_p - half_k * beta[s, i] * beta[s, i])
                out_a[s, i] = alpha[s, i] + dt * (eps_i - gamma * alpha[s, i] + beta[s, i] * chi_a) \
                    + root * (csqrt(chi_a) * xi_a[s, i] + f * jxi[s, i])
                out_b[s, i] = beta[s, i] + dt * (eps_i - gamma * beta[s, i] + alpha[s, i] * chi_b) \
                    + root * (csqrt(chi_b) * xi_b[s, i] + f * jxi[s, i])
    return out_a_arr, out_b_arr


def conditional_step_rk4(const cplx[:, :, ::1] alpha, const cplx[:, :, ::1] beta, const double[:, ::1] logw,
                         const cplx[:, :, ::1] eps, const cplx[:, :, ::1] xbar,
                         const double[:, :, ::1] xi_fa, const double[:, :, ::1] xi_fb, const double[:, :, ::1] xi_r,
                         const double[::1] eps_p3,
                         double gamma_prime, double kappa, double gamma_p, double gamma_m,
                         double dt, bint quadratic):
    """Shapes follow the numpy kernel: (R, S, N) states, (R, S) logw, (R, 1, N) frozen fields."""
    cdef Py_ssize_t R = alpha.shape[0], S = alpha.shape[1], N = alpha.shape[2]
    if N > MAX_MODES:
        raise ValueError("compiled kernel handles at most 64 modes")
    out_a_arr = np.empty((R, S, N), dtype=np.complex128)
    out_b_arr = np.empty((R, S, N), dtype=np.complex128)
    out_w_arr = np.empty((R, S), dtype=np.float64)
    cdef cplx[:, :, ::1] out_a = out_a_arr
    cdef cplx[:, :, ::1] out_b = out_b_arr
    cdef double[:, ::1] out_w = out_w_arr

    cdef cplx ya[MAX_MODES]
    cdef cplx yb[MAX_MODES]
    cdef cplx sa[MAX_MODES]
    cdef cplx sb[MAX_MODES]
    cdef cplx acc_a[MAX_MODES]
    cdef cplx acc_b[MAX_MODES]
    cdef cplx ka[MAX_MODES]
    cdef cplx kb[MAX_MODES]
    cdef cplx x, chi_a, chi_b, prod
    cdef double acc_w, kw, yw
    cdef double inv_sqrt_dt = 1.0 / np.sqrt(dt)
    cdef double cg = kappa / gamma_p, half_k = 0.5 * kappa
    cdef double root_2gm = np.sqrt(2.0 * gamma_m)
    cdef double eps_p, w
    cdef Py_ssize_t r, s, i, stage
    cdef int st

    with nogil:
        for r in range(R):
            for s in range(S):
                for i in range(N):
                    ya[i] = alpha[r, s, i]
                    yb[i] = beta[r, s, i]
                    acc_a[i] = 0
                    acc_b[i] = 0
                yw = logw[r, s]
                acc_w = 0.0
                kw = 0.0
                for stage in range(4):
                    st = STAGE_OF[stage]
                    eps_p = eps_p3[st]
                    if stage == 0:
                        for i in range(N):
                            sa[i] = ya[i]
                            sb[i] = yb[i]
                    else:
                        w = RK4_SHIFT[stage] * dt
                        for i in range(N):
                            sa[i] = ya[i] + w * ka[i]
                            sb[i] = yb[i] + w * kb[i]
                    kw = 0.0
                    for i in range(N):
                        chi_a = cg * (eps_p - half_k * sa[i] * sa[i])
                        chi_b = cg * (eps_p - half_k * sb[i] * sb[i])
                        if quadratic:
                            ka[i] = eps[r, 0, i] - gamma_prime * sa[i] * sa[i] + sb[i] * chi_a
                            kb[i] = eps[r, 0, i] - gamma_prime * sb[i] * sb[i] + sa[i] * chi_b
                        else:
                            ka[i] = eps[r, 0, i] - gamma_prime * sa[i] + sb[i] * chi_a
                            kb[i] = eps[r, 0, i] - gamma_prime * sb[i] + sa[i] * chi_b
                        ka[i] = ka[i] + csqrt(chi_a) * xi_fa[r, s, i] * inv_sqrt_dt
                        kb[i] = kb[i] + csqrt(chi_b) * xi_fb[r, s, i] * inv_sqrt_dt
                        x = sa[i] + sb[i]
                        prod = x * (2.0 * xbar[r, 0, i] - x)
                        kw = kw + gamma_m * prod.real
                        kw = kw + root_2gm * x.real * xi_r[r, 0, i] * inv_sqrt_dt
                    w = RK4_WEIGHT[stage]
                    for i in range(N):
                        acc_a[i] = acc_a[i] + w * ka[i]
                        acc_b[i] = acc_b[i] + w * kb[i]
                    acc_w = acc_w + w * kw
                w = dt / 6.0
                for i in range(N):
                    out_a[r, s, i] = ya[i] + w * acc_a[i]
                    out_b[r, s, i] = yb[i] + w * acc_b[i]
                out_w[r, s] = yw + w * acc_w
    return out_a_arr, out_b_arr, out_w_arr
