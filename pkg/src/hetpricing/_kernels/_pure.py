"""Pure-Python fallback for the compiled episode kernels.

Every function mirrors its counterpart in ``_speedups.pyx`` expression for
expression (same scalar double arithmetic in the same order), so the two
backends produce bit-identical traces.
"""

import math

import numpy as np

INF = float("inf")


def _lower_bound(vals, x):
    # first index with vals[idx] >= x
    lo, hi = 0, len(vals)
    while lo < hi:
        mid = (lo + hi) // 2
        if vals[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def demand_profile(values, weights, offsets, p, eps):
    """Per-model demand at price p over a ragged bank of value distributions.

    ``values``/``weights`` concatenate the atoms of M distributions whose
    segment i spans offsets[i]:offsets[i+1]. eps <= 0 evaluates raw demand,
    eps > 0 the eps-smoothed demand.
    """
    vals = values.tolist()
    wts = weights.tolist()
    offs = offsets.tolist()
    m = len(offs) - 1
    out = np.empty(m, dtype=np.float64)
    for i in range(m):
        acc = 0.0
        if eps <= 0.0:
            for j in range(offs[i], offs[i + 1]):
                if vals[j] >= p:
                    acc += wts[j]
        else:
            for j in range(offs[i], offs[i + 1]):
                z = (vals[j] - p + eps) / eps
                if z > 1.0:
                    z = 1.0
                elif z < 0.0:
                    z = 0.0
                acc += wts[j] * z
        out[i] = acc
    return out


def _true_revenue(p, atom_values, atom_tail):
    return p * atom_tail[_lower_bound(atom_values, p)]


def _radius(n, m2, ln_t, c_var, c_bias, variance_blind):
    if n <= 1:
        return INF
    v = 1.0 if variance_blind else m2 / (n - 1)
    return math.sqrt(c_var * v * ln_t / n) + c_bias * ln_t / (n - 1)


def zoomv_episode(valuations, init_prices, horizon, c_var, c_bias,
                  variance_blind, atom_values, atom_tail, max_rev, check):
    """Run one full variance-aware zooming episode.

    Returns (prices, gaps, final_arm_prices, clean_violations, clean_pairs,
    cover_violation_round) where cover_violation_round is 0 when the covering
    invariant held at the start of every round (only tracked when ``check``).
    """
    t_rounds = len(valuations)
    vals = valuations.tolist()
    avals = atom_values.tolist()
    atail = atom_tail.tolist()
    ln_t = math.log(float(horizon))

    price = list(init_prices.tolist())
    n_arms = len(price)
    n = [0] * n_arms
    s = [0.0] * n_arms
    m2 = [0.0] * n_arms
    rev_true = [_true_revenue(p, avals, atail) for p in price]
    radius = [INF] * n_arms
    index = [INF] * n_arms

    prices_out = np.empty(t_rounds, dtype=np.float64)
    gaps_out = np.empty(t_rounds, dtype=np.float64)
    clean_violations = 0
    clean_pairs = 0
    cover_violation_round = 0

    for t in range(t_rounds):
        if check:
            for i in range(n_arms - 1):
                if price[i + 1] - price[i] > radius[i]:
                    if cover_violation_round == 0:
                        cover_violation_round = t + 1
            for i in range(n_arms):
                clean_pairs += 1
                if n[i] >= 1 and radius[i] < INF:
                    if abs(s[i] / n[i] - rev_true[i]) > radius[i]:
                        clean_violations += 1

        best = 0
        for i in range(1, n_arms):
            if index[i] > index[best]:
                best = i
        p = price[best]
        y = 1.0 if vals[t] >= p else 0.0
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
        index[best] = INF if r == INF else s[best] / n[best] + 2.0 * r

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
            pos = best + 1
            price.insert(pos, newp)
            n.insert(pos, 0)
            s.insert(pos, 0.0)
            m2.insert(pos, 0.0)
            rev_true.insert(pos, _true_revenue(newp, avals, atail))
            radius.insert(pos, INF)
            index.insert(pos, INF)
            n_arms += 1

    return (prices_out, gaps_out, np.array(price, dtype=np.float64),
            clean_violations, clean_pairs, cover_violation_round)


def ucb_episode(valuations, arm_prices, horizon, atom_values, atom_tail,
                max_rev):
    """Fixed-grid UCB1 episode; index = mean + sqrt(2 ln T / n)."""
    t_rounds = len(valuations)
    vals = valuations.tolist()
    avals = atom_values.tolist()
    atail = atom_tail.tolist()
    ln_t = math.log(float(horizon))

    price = arm_prices.tolist()
    n_arms = len(price)
    n = [0] * n_arms
    s = [0.0] * n_arms
    rev_true = [_true_revenue(p, avals, atail) for p in price]
    index = [INF] * n_arms

    prices_out = np.empty(t_rounds, dtype=np.float64)
    gaps_out = np.empty(t_rounds, dtype=np.float64)

    for t in range(t_rounds):
        best = 0
        for i in range(1, n_arms):
            if index[i] > index[best]:
                best = i
        p = price[best]
        y = 1.0 if vals[t] >= p else 0.0
        n[best] += 1
        s[best] += p * y
        index[best] = s[best] / n[best] + math.sqrt(2.0 * ln_t / n[best])
        prices_out[t] = p
        g = max_rev - rev_true[best]
        gaps_out[t] = g if g > 0.0 else 0.0

    return prices_out, gaps_out
