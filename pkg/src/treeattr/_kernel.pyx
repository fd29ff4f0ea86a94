# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Tree SHAP kernel.

Same recursion and condition codes as ``_pure``; the per-level path copies
live in one arena with a fixed stride of ``max_depth + 2`` elements.
"""

from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef struct PathElement:
    Py_ssize_t feature
    double z
    double o
    double w


cdef struct TreeView:
    const double *values
    const Py_ssize_t *left
    const Py_ssize_t *right
    const double *thresholds
    const Py_ssize_t *features
    const double *covers
    const double *x
    double *phi
    int condition
    Py_ssize_t cond_feature
    Py_ssize_t stride
    const double *inv
    long long visits


cdef inline void extend(PathElement *m, Py_ssize_t n, double p_z, double p_o,
                        Py_ssize_t p_i, TreeView *tv) noexcept nogil:
    # n = current length; element n is appended
    cdef Py_ssize_t i
    cdef double l = n + 1
    cdef double zl = p_z / l
    cdef double ol = p_o / l
    m[n].feature = p_i
    m[n].z = p_z
    m[n].o = p_o
    m[n].w = 1.0 if n == 0 else 0.0
    i = n - 1
    while i >= 0:
        m[i + 1].w += ol * m[i].w * (i + 1)
        m[i].w = zl * m[i].w * (l - 1 - i)
        i -= 1
    tv.visits += n


cdef inline void unwind(PathElement *m, Py_ssize_t n, Py_ssize_t k, TreeView *tv) noexcept nogil:
    # n = current length; removes element k
    cdef double p_o = m[k].o
    cdef double p_z = m[k].z
    cdef double l = n
    cdef double carry = m[n - 1].w
    cdef double tmp, lo, zl, lz, ol, prev
    cdef Py_ssize_t j = n - 2
    # divide by the larger of p_o and p_z (see _pure._downward)
    if p_o != 0 and p_o >= p_z:
        lo = l / p_o
        zl = p_z / l
        while j >= 0:
            tmp = m[j].w
            m[j].w = carry * lo * tv.inv[j + 1]
            carry = tmp - m[j].w * zl * (l - 1 - j)
            j -= 1
    else:
        lz = l / p_z
        ol = p_o / l
        prev = 0.0
        for j in range(n - 1):
            m[j].w = (m[j].w - ol * prev * j) * lz * tv.inv[n - 1 - j]
            prev = m[j].w
    j = k
    while j < n - 1:
        m[j].feature = m[j + 1].feature
        m[j].z = m[j + 1].z
        m[j].o = m[j + 1].o
        j += 1
    tv.visits += n - 1


cdef inline double unwound_sum(PathElement *m, Py_ssize_t n, Py_ssize_t k, TreeView *tv) noexcept nogil:
    cdef double p_o = m[k].o
    cdef double p_z = m[k].z
    cdef double l = n
    cdef double total = 0.0
    cdef double carry, tmp, lo, zl, lz, ol, prev
    cdef Py_ssize_t j = n - 2
    if p_o != 0 and p_o >= p_z:
        lo = l / p_o
        zl = p_z / l
        carry = m[n - 1].w
        while j >= 0:
            tmp = carry * lo * tv.inv[j + 1]
            total += tmp
            carry = m[j].w - tmp * zl * (l - 1 - j)
            j -= 1
    elif p_z != 0:
        lz = l / p_z
        ol = p_o / l
        prev = 0.0
        for j in range(n - 1):
            prev = (m[j].w - ol * prev * j) * lz * tv.inv[n - 1 - j]
            total += prev
    tv.visits += n - 1
    return total


cdef void recurse(TreeView *tv, Py_ssize_t j, PathElement *parent, Py_ssize_t n,
                  double p_z, double p_o, Py_ssize_t p_i, double cond_w) noexcept nogil:
    cdef PathElement *m = parent + tv.stride
    cdef Py_ssize_t f, hot, cold, k, i
    cdef double hot_ratio, cold_ratio, i_z, i_o, v, s
    tv.visits += 1
    memcpy(m, parent, n * sizeof(PathElement))
    if tv.condition == 0 or p_i != tv.cond_feature:
        extend(m, n, p_z, p_o, p_i, tv)
        n += 1
    f = tv.features[j]
    if f < 0:
        v = tv.values[j] * cond_w
        for i in range(1, n):
            s = unwound_sum(m, n, i, tv)
            tv.phi[m[i].feature] += s * (m[i].o - m[i].z) * v
        return
    if tv.x[f] <= tv.thresholds[j]:
        hot = tv.left[j]
        cold = tv.right[j]
    else:
        hot = tv.right[j]
        cold = tv.left[j]
    hot_ratio = tv.covers[hot] / tv.covers[j]
    cold_ratio = tv.covers[cold] / tv.covers[j]
    i_z = 1.0
    i_o = 1.0
    if tv.condition == 0 or f != tv.cond_feature:
        for k in range(1, n):
            if m[k].feature == f:
                i_z = m[k].z
                i_o = m[k].o
                unwind(m, n, k, tv)
                n -= 1
                break
        if i_z * hot_ratio > 0 or i_o != 0:
            recurse(tv, hot, m, n, i_z * hot_ratio, i_o, f, cond_w)
        if i_z * cold_ratio > 0:
            recurse(tv, cold, m, n, i_z * cold_ratio, 0.0, f, cond_w)
    elif tv.condition > 0:
        recurse(tv, hot, m, n, 1.0, 1.0, f, cond_w)
    else:
        if hot_ratio > 0:
            recurse(tv, hot, m, n, 1.0, 1.0, f, cond_w * hot_ratio)
        if cold_ratio > 0:
            recurse(tv, cold, m, n, 1.0, 1.0, f, cond_w * cold_ratio)


def ensemble_shap(const double[::1] values, const Py_ssize_t[::1] left, const Py_ssize_t[::1] right,
                  const double[::1] thresholds, const Py_ssize_t[::1] features,
                  const double[::1] covers, const Py_ssize_t[::1] offsets, Py_ssize_t max_depth,
                  const double[::1] x, double[::1] phi, int condition=0, Py_ssize_t cond_feature=-1):
    """Accumulate SHAP values of every tree into ``phi``; returns the work count."""
    cdef TreeView tv
    cdef Py_ssize_t t, lo
    cdef Py_ssize_t n_trees = offsets.shape[0] - 1
    cdef Py_ssize_t stride = max_depth + 2
    cdef PathElement *arena
    cdef double[::1] inv = np.concatenate([[0.0], 1.0 / np.arange(1, stride + 2, dtype=np.float64)])
    if n_trees <= 0:
        return 0
    # one slot for the empty root parent plus one per tree level
    arena = <PathElement *> malloc((max_depth + 3) * stride * sizeof(PathElement))
    if arena == NULL:
        raise MemoryError()
    tv.x = &x[0] if x.shape[0] > 0 else NULL
    tv.phi = &phi[0] if phi.shape[0] > 0 else NULL
    tv.condition = condition
    tv.cond_feature = cond_feature
    tv.stride = stride
    tv.visits = 0
    # inv[k] = 1/k; inv[0] is never read
    tv.inv = &inv[0]
    try:
        with nogil:
            for t in range(n_trees):
                lo = offsets[t]
                tv.values = &values[lo]
                tv.left = &left[lo]
                tv.right = &right[lo]
                tv.thresholds = &thresholds[lo]
                tv.features = &features[lo]
                tv.covers = &covers[lo]
                recurse(&tv, 0, arena, 0, 1.0, 1.0, -1, 1.0)
    finally:
        free(arena)
    return tv.visits
