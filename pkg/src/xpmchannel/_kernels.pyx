# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; see ``_kernels_py`` for the reference semantics."""
import numpy as np

from libc.math cimport cos, sin, exp, log, M_PI


def mixture_loglik(const double complex[::1] y, const double complex[::1] x,
                   const double[::1] u, const double[::1] log_w, double sigma_n_sq):
    """log p(y_i | x_j) for a phase-noise mixture of circular Gaussians.

    p(y|x) = sum_k w_k exp(-|y - x e^{-i u_k}|^2 / s) / (pi s)
    """
    cdef Py_ssize_t ny = y.shape[0], nx = x.shape[0], nu = u.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double[::1] cu = np.cos(u)
    cdef double[::1] su = np.sin(u)
    cdef double[::1] buf = np.empty(nu, dtype=np.float64)
    out = np.empty((ny, nx), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double inv_s = 1.0 / sigma_n_sq
    cdef double norm = -log(M_PI * sigma_n_sq)
    cdef double yr, yi, xr, xi, rr, ri, e, m, acc
    with nogil:
        for i in range(ny):
            yr = y[i].real
            yi = y[i].imag
            for j in range(nx):
                xr = x[j].real
                xi = x[j].imag
                m = -1e308
                for k in range(nu):
                    rr = yr - (xr * cu[k] + xi * su[k])
                    ri = yi - (xi * cu[k] - xr * su[k])
                    e = log_w[k] - (rr * rr + ri * ri) * inv_s
                    buf[k] = e
                    if e > m:
                        m = e
                acc = 0.0
                for k in range(nu):
                    acc += exp(buf[k] - m)
                res[i, j] = m + log(acc) + norm
    return out


def xpm_phase_rotate(double complex[:, ::1] fields, double coeff, bint include_spm):
    """In place: x_k *= exp(i coeff (c_k |x_k|^2 + 2 sum_{l != k} |x_l|^2)).

    ``c_k`` is 1 with self-phase modulation and 0 without.
    """
    cdef Py_ssize_t nch = fields.shape[0], nt = fields.shape[1]
    cdef Py_ssize_t j, k
    cdef double p, phi, c, s, re, im
    cdef double self_w = -1.0 if include_spm else -2.0
    cdef double[::1] total = np.zeros(nt, dtype=np.float64)
    with nogil:
        for k in range(nch):
            for j in range(nt):
                re = fields[k, j].real
                im = fields[k, j].imag
                total[j] += re * re + im * im
        for k in range(nch):
            for j in range(nt):
                re = fields[k, j].real
                im = fields[k, j].imag
                p = re * re + im * im
                phi = coeff * (2.0 * total[j] + self_w * p)
                c = cos(phi)
                s = sin(phi)
                fields[k, j] = (re * c - im * s) + 1j * (re * s + im * c)
