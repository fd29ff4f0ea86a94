"""Pure-Python Tree SHAP kernel (fallback when the compiled kernel is absent).

Paths are four parallel lists (feature, zero fraction, one fraction,
weight). Position 0 always holds the dummy root element (feature -1) and is
never attributed. The recursion copies the path at every level, as in the
reference pseudocode; the compiled kernel uses an arena instead but must
produce the same numbers.

Condition codes: 0 = none, 1 = condition feature fixed present,
-1 = condition feature fixed absent.
"""

from __future__ import annotations

import numpy as np


def extend_path(d, z, o, w, p_z, p_o, p_i):
    """Append one element in place and redistribute the size-class weights.

    With ``l`` the new length, weight ``w[i]`` (0-based) is the share of
    subsets of size ``i`` that reach this point. Returns loop iterations.
    """
    n = len(w)
    l = n + 1
    d.append(p_i)
    z.append(p_z)
    o.append(p_o)
    w.append(1.0 if n == 0 else 0.0)
    for i in range(n - 1, -1, -1):
        w[i + 1] += p_o * w[i] * (i + 1) / l
        w[i] = p_z * w[i] * (l - 1 - i) / l
    return n


def _downward(p_o, p_z):
    # solve the extension recurrence from the top size class (divides by p_o)
    # or from the bottom one (divides by p_z); dividing by the larger fraction
    # keeps rounding error from being amplified
    return p_o != 0 and p_o >= p_z


def unwind_path(d, z, o, w, k):
    """Remove element ``k`` in place, undoing its extension. Returns iterations."""
    l = len(w)
    p_o, p_z = o[k], z[k]
    if p_o == 0 and p_z == 0:
        raise ZeroDivisionError("cannot unwind an element with zero and one fractions both 0")
    if _downward(p_o, p_z):
        carry = w[l - 1]
        for j in range(l - 2, -1, -1):
            tmp = w[j]
            w[j] = carry * l / ((j + 1) * p_o)
            carry = tmp - w[j] * p_z * (l - 1 - j) / l
    else:
        prev = 0.0
        for j in range(l - 1):
            w[j] = (w[j] - p_o * prev * j / l) * l / (p_z * (l - 1 - j))
            prev = w[j]
    w.pop()
    del d[k], z[k], o[k]
    return l - 1


def unwound_sum(z, o, w, k):
    """sum(w) of the path with element ``k`` unwound, without building it."""
    l = len(w)
    p_o, p_z = o[k], z[k]
    total = 0.0
    if _downward(p_o, p_z):
        carry = w[l - 1]
        for j in range(l - 2, -1, -1):
            tmp = carry * l / ((j + 1) * p_o)
            total += tmp
            carry = w[j] - tmp * p_z * (l - 1 - j) / l
    elif p_z != 0:
        prev = 0.0
        for j in range(l - 1):
            prev = (w[j] - p_o * prev * j / l) * l / (p_z * (l - 1 - j))
            total += prev
    return total, l - 1


def _tree_shap(values, left, right, thresholds, features, covers, x, phi, condition, cond_feature):
    visits = 0

    def recurse(j, d, z, o, w, p_z, p_o, p_i, cond_w):
        nonlocal visits
        visits += 1
        d, z, o, w = d[:], z[:], o[:], w[:]
        if condition == 0 or p_i != cond_feature:
            visits += extend_path(d, z, o, w, p_z, p_o, p_i)
        f = features[j]
        if f < 0:
            v = values[j] * cond_w
            for i in range(1, len(w)):
                s, n = unwound_sum(z, o, w, i)
                visits += n
                phi[d[i]] += s * (o[i] - z[i]) * v
            return
        if x[f] <= thresholds[j]:
            hot, cold = left[j], right[j]
        else:
            hot, cold = right[j], left[j]
        hot_ratio = covers[hot] / covers[j]
        cold_ratio = covers[cold] / covers[j]
        i_z = i_o = 1.0
        if condition == 0 or f != cond_feature:
            for k in range(1, len(d)):
                if d[k] == f:
                    i_z, i_o = z[k], o[k]
                    visits += unwind_path(d, z, o, w, k)
                    break
            # a branch whose zero and one fractions are both 0 carries no subsets
            if i_z * hot_ratio > 0 or i_o != 0:
                recurse(hot, d, z, o, w, i_z * hot_ratio, i_o, f, cond_w)
            if i_z * cold_ratio > 0:
                recurse(cold, d, z, o, w, i_z * cold_ratio, 0.0, f, cond_w)
        elif condition > 0:
            recurse(hot, d, z, o, w, 1.0, 1.0, f, cond_w)
        else:
            if hot_ratio > 0:
                recurse(hot, d, z, o, w, 1.0, 1.0, f, cond_w * hot_ratio)
            if cold_ratio > 0:
                recurse(cold, d, z, o, w, 1.0, 1.0, f, cond_w * cold_ratio)

    recurse(0, [], [], [], [], 1.0, 1.0, -1, 1.0)
    return visits


def ensemble_shap(values, left, right, thresholds, features, covers, offsets, max_depth, x, phi,
                  condition=0, cond_feature=-1):
    """Accumulate SHAP values of every tree into ``phi``; returns the work count."""
    x = np.asarray(x, dtype=np.float64).tolist()
    acc = [0.0] * len(phi)
    visits = 0
    for t in range(len(offsets) - 1):
        lo, hi = int(offsets[t]), int(offsets[t + 1])
        visits += _tree_shap(
            values[lo:hi].tolist(),
            left[lo:hi].tolist(),
            right[lo:hi].tolist(),
            thresholds[lo:hi].tolist(),
            features[lo:hi].tolist(),
            covers[lo:hi].tolist(),
            x,
            acc,
            condition,
            cond_feature,
        )
    phi += np.asarray(acc)
    return visits
