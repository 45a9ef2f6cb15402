"""Pure-Python hot kernels.

Reference semantics for :mod:`brokerscale._ckernels`; selected by
:mod:`brokerscale.kernels` when the compiled module is unavailable.

A curve is passed as three flat arguments: ``gam`` (knot prices, strictly
increasing), ``rat`` (knot demand ratios, ending at the first zero for a
finite operating zone) and ``tail_b`` (marginal revenue of the hyperbolic
tail past the last knot; only read when the last ratio is positive).
"""
from __future__ import annotations

import math

import numpy as np

INF = math.inf


def price(gam, rat, tail_b, s):
    """Price at which a fraction ``s`` of actual demand is served."""
    k = len(gam)
    if s >= 1.0:
        return gam[0]
    last = rat[k - 1]
    if s <= 0.0:
        return gam[k - 1] if last == 0.0 else INF
    if s < last:
        return rat[k - 1] * (gam[k - 1] - tail_b) / s + tail_b
    lo, hi = 0, k - 1
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


def revenue(gam, rat, tail_b, dstar, d):
    """Revenue ``d * g(dstar, d)``; zero when nothing is served."""
    if d <= 0.0:
        return 0.0
    if d >= dstar:
        return gam[0] * dstar
    return d * price(gam, rat, tail_b, d / dstar)


def unit_rent(gam, rat, tail_b, dstar, x):
    return revenue(gam, rat, tail_b, dstar, x + 1) - revenue(gam, rat, tail_b, dstar, x)


def online_slot(gam, rat, tail_b, dstar, xplan, t, n_slots, tau, w, cost):
    """One slot of the windowed break-even scaler.

    ``dstar`` and ``xplan`` are 1-based buffers of length ``n_slots + 1``;
    ``xplan`` is updated in place. Returns ``(bought, price)``.
    """
    lo = max(1, t + w - tau + 1)
    hi = min(n_slots, t + w)
    fut = min(n_slots, t + tau - 1)
    bought = 0
    while True:
        acc = 0.0
        for i in range(lo, hi + 1):
            xi = xplan[i]
            if xi + 1 <= dstar[i]:
                acc += unit_rent(gam, rat, tail_b, dstar[i], xi)
        if acc < cost:
            break
        bought += 1
        for i in range(t, fut + 1):
            xplan[i] += 1
        for i in range(lo, t):
            xplan[i] += 1
    ds = dstar[t]
    xt = xplan[t]
    if ds > 0.0 and xt < ds:
        return bought, price(gam, rat, tail_b, xt / ds)
    return bought, gam[0]


def run_online(gam, rat, tail_b, demand, tau, w, cost):
    """Run the scaler over a whole trace.

    Returns ``(v, x, gamma)`` as numpy arrays: purchases, serving capacity
    and posted price per slot.
    """
    gam = [float(g) for g in gam]
    rat = [float(r) for r in rat]
    tail_b = float(tail_b)
    n = len(demand)
    dstar = [0.0] + [float(d) for d in demand]
    xplan = [0] * (n + 1)
    v = np.zeros(n, dtype=np.int64)
    x = np.zeros(n, dtype=np.int64)
    gamma = np.zeros(n, dtype=np.float64)
    for t in range(1, n + 1):
        b, g = online_slot(gam, rat, tail_b, dstar, xplan, t, n, tau, w, cost)
        v[t - 1] = b
        x[t - 1] = xplan[t]
        gamma[t - 1] = g
    return v, x, gamma


def dp_solve(table, tau, dmax, cost, eps):
    """Backward induction over the last ``tau - 1`` purchases.

    ``table[t, k]`` is the demand loss of slot ``t`` with capacity ``k``
    (column ``dmax`` means fully served). Returns ``choice[t, state]``:
    the smallest purchase count achieving the optimum (loss first, then
    fewest VMs) from each base-``dmax + 1`` encoded state.
    """
    table = np.asarray(table, dtype=np.float64)
    n, width = table.shape
    base = dmax + 1
    m = tau - 1
    n_states = base**m
    shift = base ** (m - 1)

    codes = np.arange(n_states)
    sums = np.zeros(n_states, dtype=np.int64)
    c = codes.copy()
    for _ in range(m):
        sums += c % base
        c //= base
    vs = np.arange(base)
    nxt = (codes % shift)[:, None] * base + vs[None, :]
    cap = np.minimum(sums[:, None] + vs[None, :], dmax)
    rows = np.arange(n_states)

    future = np.zeros(n_states)
    count = np.zeros(n_states, dtype=np.int64)
    choice = np.empty((n, n_states), dtype=np.int64)
    big = np.iinfo(np.int64).max
    for t in range(n - 1, -1, -1):
        cand = table[t][cap] + cost * vs[None, :] + future[nxt]
        cand_n = vs[None, :] + count[nxt]
        best = cand.min(axis=1)
        tie = cand <= best[:, None] + eps * (1.0 + np.abs(best[:, None]))
        k = np.where(tie, cand_n, big).argmin(axis=1)
        choice[t] = k
        future = cand[rows, k]
        count = cand_n[rows, k]
    return choice
