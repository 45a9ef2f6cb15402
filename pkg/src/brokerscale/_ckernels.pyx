# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same contracts as brokerscale._pykernels."""
import numpy as np

from libc.math cimport INFINITY, fabs


cdef inline double _price(const double[::1] gam, const double[::1] rat,
                          double tail_b, double s) noexcept nogil:
    cdef Py_ssize_t k = gam.shape[0]
    cdef Py_ssize_t lo, hi, mid
    cdef double last
    if s >= 1.0:
        return gam[0]
    last = rat[k - 1]
    if s <= 0.0:
        if last == 0.0:
            return gam[k - 1]
        return INFINITY
    if s < last:
        return rat[k - 1] * (gam[k - 1] - tail_b) / s + tail_b
    lo = 0
    hi = k - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rat[mid] >= s:
            lo = mid
        else:
            hi = mid
    if rat[hi] >= s:
        lo = hi
    if lo == k - 1:
        return gam[k - 1]
    return gam[lo] + (rat[lo] - s) * (gam[lo + 1] - gam[lo]) / (rat[lo] - rat[lo + 1])


cdef inline double _revenue(const double[::1] gam, const double[::1] rat,
                            double tail_b, double dstar, double d) noexcept nogil:
    if d <= 0.0:
        return 0.0
    if d >= dstar:
        return gam[0] * dstar
    return d * _price(gam, rat, tail_b, d / dstar)


def price(gam, rat, double tail_b, double s):
    return _price(np.ascontiguousarray(gam, dtype=np.float64),
                  np.ascontiguousarray(rat, dtype=np.float64), tail_b, s)


def revenue(gam, rat, double tail_b, double dstar, double d):
    return _revenue(np.ascontiguousarray(gam, dtype=np.float64),
                    np.ascontiguousarray(rat, dtype=np.float64), tail_b, dstar, d)


def unit_rent(gam, rat, double tail_b, double dstar, double x):
    cdef const double[::1] g = np.ascontiguousarray(gam, dtype=np.float64)
    cdef const double[::1] r = np.ascontiguousarray(rat, dtype=np.float64)
    return _revenue(g, r, tail_b, dstar, x + 1.0) - _revenue(g, r, tail_b, dstar, x)


def run_online(gam, rat, double tail_b, demand, Py_ssize_t tau, Py_ssize_t w, double cost):
    cdef const double[::1] g = np.ascontiguousarray(gam, dtype=np.float64)
    cdef const double[::1] r = np.ascontiguousarray(rat, dtype=np.float64)
    cdef Py_ssize_t n = len(demand)
    dstar_arr = np.zeros(n + 1, dtype=np.float64)
    dstar_arr[1:] = np.asarray(demand, dtype=np.float64)
    xplan_arr = np.zeros(n + 1, dtype=np.int64)
    v_arr = np.zeros(n, dtype=np.int64)
    x_arr = np.zeros(n, dtype=np.int64)
    gamma_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] dstar = dstar_arr
    cdef long long[::1] xplan = xplan_arr
    cdef long long[::1] v = v_arr
    cdef long long[::1] x = x_arr
    cdef double[::1] gamma = gamma_arr
    cdef Py_ssize_t t, i, lo, hi, fut
    cdef long long bought, xi
    cdef double acc, ds

    with nogil:
        for t in range(1, n + 1):
            lo = t + w - tau + 1
            if lo < 1:
                lo = 1
            hi = t + w
            if hi > n:
                hi = n
            fut = t + tau - 1
            if fut > n:
                fut = n
            bought = 0
            while True:
                acc = 0.0
                for i in range(lo, hi + 1):
                    xi = xplan[i]
                    if xi + 1 <= dstar[i]:
                        acc += (_revenue(g, r, tail_b, dstar[i], <double>(xi + 1))
                                - _revenue(g, r, tail_b, dstar[i], <double>xi))
                if acc < cost:
                    break
                bought += 1
                for i in range(t, fut + 1):
                    xplan[i] += 1
                for i in range(lo, t):
                    xplan[i] += 1
            v[t - 1] = bought
            x[t - 1] = xplan[t]
            ds = dstar[t]
            if ds > 0.0 and xplan[t] < ds:
                gamma[t - 1] = _price(g, r, tail_b, xplan[t] / ds)
            else:
                gamma[t - 1] = g[0]
    return v_arr, x_arr, gamma_arr


def dp_solve(table, Py_ssize_t tau, Py_ssize_t dmax, double cost, double eps):
    cdef const double[:, ::1] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t n = tab.shape[0]
    cdef Py_ssize_t base = dmax + 1
    cdef Py_ssize_t m = tau - 1
    cdef Py_ssize_t n_states = base ** m
    cdef Py_ssize_t shift = base ** (m - 1)
    sums_arr = np.zeros(n_states, dtype=np.int64)
    future_arr = np.zeros(n_states, dtype=np.float64)
    count_arr = np.zeros(n_states, dtype=np.int64)
    new_future_arr = np.zeros(n_states, dtype=np.float64)
    new_count_arr = np.zeros(n_states, dtype=np.int64)
    choice_arr = np.zeros((n, n_states), dtype=np.int64)
    cdef long long[::1] sums = sums_arr
    cdef double[::1] future = future_arr
    cdef long long[::1] count = count_arr
    cdef double[::1] new_future = new_future_arr
    cdef long long[::1] new_count = new_count_arr
    cdef long long[:, ::1] choice = choice_arr
    cdef Py_ssize_t s, c, j, t, vv, nx, cap, best_v
    cdef double cand, best, best_sel, tol
    cdef long long cand_n, best_n

    for s in range(n_states):
        c = s
        for j in range(m):
            sums[s] += c % base
            c //= base

    with nogil:
        for t in range(n - 1, -1, -1):
            for s in range(n_states):
                best = INFINITY
                for vv in range(base):
                    nx = (s % shift) * base + vv
                    cap = sums[s] + vv
                    if cap > dmax:
                        cap = dmax
                    cand = tab[t, cap] + cost * vv + future[nx]
                    if cand < best:
                        best = cand
                tol = best + eps * (1.0 + fabs(best))
                best_v = -1
                best_n = 0
                best_sel = 0.0
                for vv in range(base):
                    nx = (s % shift) * base + vv
                    cap = sums[s] + vv
                    if cap > dmax:
                        cap = dmax
                    cand = tab[t, cap] + cost * vv + future[nx]
                    if cand <= tol:
                        cand_n = vv + count[nx]
                        if best_v < 0 or cand_n < best_n:
                            best_v = vv
                            best_n = cand_n
                            best_sel = cand
                choice[t, s] = best_v
                new_future[s] = best_sel
                new_count[s] = best_n
            for s in range(n_states):
                future[s] = new_future[s]
                count[s] = new_count[s]
    return choice_arr
