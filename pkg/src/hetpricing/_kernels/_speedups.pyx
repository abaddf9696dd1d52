# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled episode kernels.

Mirrors ``_pure.py`` expression for expression; both backends must produce
bit-identical traces.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, log, sqrt

cnp.import_array()


cdef Py_ssize_t _lower_bound(const double* vals, Py_ssize_t n, double x) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if vals[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def demand_profile(const double[::1] values, const double[::1] weights,
                   const long long[::1] offsets, double p, double eps):
    """Per-model demand at price p over a ragged bank of value distributions."""
    cdef Py_ssize_t m = offsets.shape[0] - 1
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double acc, z
    for i in range(m):
        acc = 0.0
        if eps <= 0.0:
            for j in range(offsets[i], offsets[i + 1]):
                if values[j] >= p:
                    acc += weights[j]
        else:
            for j in range(offsets[i], offsets[i + 1]):
                z = (values[j] - p + eps) / eps
                if z > 1.0:
                    z = 1.0
                elif z < 0.0:
                    z = 0.0
                acc += weights[j] * z
        out[i] = acc
    return out_arr


cdef inline double _true_revenue(double p, const double* avals, const double* atail,
                                 Py_ssize_t n_atoms) noexcept nogil:
    return p * atail[_lower_bound(avals, n_atoms, p)]


cdef inline double _radius(long n, double m2, double ln_t, double c_var,
                           double c_bias, bint variance_blind) noexcept nogil:
    cdef double v
    if n <= 1:
        return INFINITY
    v = 1.0 if variance_blind else m2 / (n - 1)
    return sqrt(c_var * v * ln_t / n) + c_bias * ln_t / (n - 1)


def zoomv_episode(const double[::1] valuations, const double[::1] init_prices,
                  long long horizon, double c_var, double c_bias,
                  bint variance_blind, const double[::1] atom_values,
                  const double[::1] atom_tail, double max_rev, bint check):
    """Run one full variance-aware zooming episode (see _pure.zoomv_episode)."""
    cdef Py_ssize_t t_rounds = valuations.shape[0]
    cdef Py_ssize_t n_atoms = atom_values.shape[0]
    cdef double ln_t = log(<double> horizon)
    cdef Py_ssize_t cap = init_prices.shape[0] + 4096

    price_arr = np.empty(cap, dtype=np.float64)
    n_arr = np.zeros(cap, dtype=np.int64)
    s_arr = np.zeros(cap, dtype=np.float64)
    m2_arr = np.zeros(cap, dtype=np.float64)
    rev_arr = np.empty(cap, dtype=np.float64)
    rad_arr = np.empty(cap, dtype=np.float64)
    idx_arr = np.empty(cap, dtype=np.float64)
    cdef double[::1] price = price_arr
    cdef long long[::1] n = n_arr
    cdef double[::1] s = s_arr
    cdef double[::1] m2 = m2_arr
    cdef double[::1] rev_true = rev_arr
    cdef double[::1] radius = rad_arr
    cdef double[::1] index = idx_arr
    cdef const double* avals = &atom_values[0]
    cdef const double* atail = &atom_tail[0]

    cdef Py_ssize_t n_arms = init_prices.shape[0]
    cdef Py_ssize_t i, t, best, pos, k
    for i in range(n_arms):
        price[i] = init_prices[i]
        rev_true[i] = _true_revenue(price[i], avals, atail, n_atoms)
        radius[i] = INFINITY
        index[i] = INFINITY

    prices_out_arr = np.empty(t_rounds, dtype=np.float64)
    gaps_out_arr = np.empty(t_rounds, dtype=np.float64)
    cdef double[::1] prices_out = prices_out_arr
    cdef double[::1] gaps_out = gaps_out_arr

    cdef long long clean_violations = 0, clean_pairs = 0
    cdef long long cover_violation_round = 0
    cdef long long nb
    cdef double p, y, x, old_mean, new_mean, r, qp, newp, g

    for t in range(t_rounds):
        if check:
            for i in range(n_arms - 1):
                if price[i + 1] - price[i] > radius[i]:
                    if cover_violation_round == 0:
                        cover_violation_round = t + 1
            for i in range(n_arms):
                clean_pairs += 1
                if n[i] >= 1 and radius[i] < INFINITY:
                    if fabs(s[i] / n[i] - rev_true[i]) > radius[i]:
                        clean_violations += 1

        best = 0
        for i in range(1, n_arms):
            if index[i] > index[best]:
                best = i
        p = price[best]
        y = 1.0 if valuations[t] >= p else 0.0
        x = p * y

        nb = n[best]
        if nb == 0:
            n[best] = 1
            s[best] = x
            m2[best] = 0.0
        else:
            old_mean = s[best] / nb
            s[best] = s[best] + x
            n[best] = nb + 1
            new_mean = s[best] / (nb + 1)
            m2[best] = m2[best] + (x - old_mean) * (x - new_mean)
        r = _radius(n[best], m2[best], ln_t, c_var, c_bias, variance_blind)
        radius[best] = r
        index[best] = INFINITY if r == INFINITY else s[best] / n[best] + 2.0 * r

        prices_out[t] = p
        g = max_rev - rev_true[best]
        gaps_out[t] = g if g > 0.0 else 0.0

        # restore coverage above the played arm (its radius may have shrunk)
        while True:
            r = radius[best]
            if best + 1 > n_arms - 1:
                break
            qp = price[best + 1]
            if qp - price[best] <= r:
                break
            newp = (price[best] + qp) / 2.0
            if newp <= price[best] or newp >= qp:
                break
            if n_arms >= cap:
                raise RuntimeError("zoomv arm capacity exceeded")
            pos = best + 1
            for k in range(n_arms, pos, -1):
                price[k] = price[k - 1]
                n[k] = n[k - 1]
                s[k] = s[k - 1]
                m2[k] = m2[k - 1]
                rev_true[k] = rev_true[k - 1]
                radius[k] = radius[k - 1]
                index[k] = index[k - 1]
            price[pos] = newp
            n[pos] = 0
            s[pos] = 0.0
            m2[pos] = 0.0
            rev_true[pos] = _true_revenue(newp, avals, atail, n_atoms)
            radius[pos] = INFINITY
            index[pos] = INFINITY
            n_arms += 1

    return (prices_out_arr, gaps_out_arr, price_arr[:n_arms].copy(),
            int(clean_violations), int(clean_pairs),
            int(cover_violation_round))


def ucb_episode(const double[::1] valuations, const double[::1] arm_prices,
                long long horizon, const double[::1] atom_values,
                const double[::1] atom_tail, double max_rev):
    """Fixed-grid UCB1 episode; index = mean + sqrt(2 ln T / n)."""
    cdef Py_ssize_t t_rounds = valuations.shape[0]
    cdef Py_ssize_t n_arms = arm_prices.shape[0]
    cdef Py_ssize_t n_atoms = atom_values.shape[0]
    cdef double ln_t = log(<double> horizon)
    cdef const double* avals = &atom_values[0]
    cdef const double* atail = &atom_tail[0]

    n_arr = np.zeros(n_arms, dtype=np.int64)
    s_arr = np.zeros(n_arms, dtype=np.float64)
    rev_arr = np.empty(n_arms, dtype=np.float64)
    idx_arr = np.empty(n_arms, dtype=np.float64)
    cdef long long[::1] n = n_arr
    cdef double[::1] s = s_arr
    cdef double[::1] rev_true = rev_arr
    cdef double[::1] index = idx_arr

    cdef Py_ssize_t i, t, best
    for i in range(n_arms):
        rev_true[i] = _true_revenue(arm_prices[i], avals, atail, n_atoms)
        index[i] = INFINITY

    prices_out_arr = np.empty(t_rounds, dtype=np.float64)
    gaps_out_arr = np.empty(t_rounds, dtype=np.float64)
    cdef double[::1] prices_out = prices_out_arr
    cdef double[::1] gaps_out = gaps_out_arr
    cdef double p, y, g

    for t in range(t_rounds):
        best = 0
        for i in range(1, n_arms):
            if index[i] > index[best]:
                best = i
        p = arm_prices[best]
        y = 1.0 if valuations[t] >= p else 0.0
        n[best] += 1
        s[best] += p * y
        index[best] = s[best] / n[best] + sqrt(2.0 * ln_t / n[best])
        prices_out[t] = p
        g = max_rev - rev_true[best]
        gaps_out[t] = g if g > 0.0 else 0.0

    return prices_out_arr, gaps_out_arr
