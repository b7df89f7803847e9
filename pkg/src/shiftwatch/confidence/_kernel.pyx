# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled PM-EB kernel. Arithmetic mirrors ``_reference.py`` exactly."""

from libc.math cimport log, sqrt

import numpy as np

BACKEND = "cython"


cdef inline double _clip01(double x) nogil:
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


def step(long t, double sum_lx, double sum_l, double sum_psi,
         double sum_x, double sum_dev, double log_inv_alpha, double x):
    cdef double mu_prev = (0.5 + sum_x) / (t + 1.0)
    cdef double sig2_prev = (0.25 + sum_dev) / (t + 1.0)
    cdef long tn = t + 1
    cdef double lam = sqrt(2.0 * log_inv_alpha / (sig2_prev * tn * log(tn + 1.0)))
    if lam > 0.5:
        lam = 0.5
    cdef double v = 4.0 * (x - mu_prev) * (x - mu_prev)
    cdef double psi = (-log(1.0 - lam) - lam) / 4.0
    sum_lx += lam * x
    sum_l += lam
    sum_psi += v * psi
    sum_x += x
    cdef double mu_new = (0.5 + sum_x) / (tn + 1.0)
    sum_dev += (x - mu_new) * (x - mu_new)
    cdef double lower = _clip01((sum_lx - log_inv_alpha - sum_psi) / sum_l)
    return tn, sum_lx, sum_l, sum_psi, sum_x, sum_dev, lower


def lower_path(xs, double log_inv_alpha):
    cdef double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double sum_lx = 0.0, sum_l = 0.0, sum_psi = 0.0
    cdef double sum_x = 0.0, sum_dev = 0.0
    cdef double mu_prev, sig2_prev, lam, v, psi, mu_new, xi
    cdef long t = 0, tn
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            xi = x[i]
            mu_prev = (0.5 + sum_x) / (t + 1.0)
            sig2_prev = (0.25 + sum_dev) / (t + 1.0)
            tn = t + 1
            lam = sqrt(2.0 * log_inv_alpha / (sig2_prev * tn * log(tn + 1.0)))
            if lam > 0.5:
                lam = 0.5
            v = 4.0 * (xi - mu_prev) * (xi - mu_prev)
            psi = (-log(1.0 - lam) - lam) / 4.0
            sum_lx += lam * xi
            sum_l += lam
            sum_psi += v * psi
            sum_x += xi
            mu_new = (0.5 + sum_x) / (tn + 1.0)
            sum_dev += (xi - mu_new) * (xi - mu_new)
            out[i] = _clip01((sum_lx - log_inv_alpha - sum_psi) / sum_l)
            t = tn
    return out_arr
