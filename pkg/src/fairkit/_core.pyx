# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. See ``_fallback.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def find_best_splits(const double[:, :] X, const long long[:, :] order,
                     const double[:] g, const double[:] h, const long long[:] node_of,
                     const double[:] G, const double[:] H,
                     double lam, double min_child_weight):
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1], n_nodes = G.shape[0]
    cdef Py_ssize_t j, t, i, node
    cdef double x, gl, hl, gr, hr, gain, thr, a

    best_gain_a = np.zeros(n_nodes)
    best_feat_a = np.full(n_nodes, -1, dtype=np.int64)
    best_thr_a = np.zeros(n_nodes)
    cdef double[:] best_gain = best_gain_a
    cdef long long[:] best_feat = best_feat_a
    cdef double[:] best_thr = best_thr_a

    parent_a = np.empty(n_nodes)
    GL_a = np.empty(n_nodes)
    HL_a = np.empty(n_nodes)
    last_a = np.empty(n_nodes)
    seen_a = np.empty(n_nodes, dtype=np.uint8)
    cdef double[:] parent = parent_a
    cdef double[:] GL = GL_a
    cdef double[:] HL = HL_a
    cdef double[:] last = last_a
    cdef unsigned char[:] seen = seen_a

    for node in range(n_nodes):
        parent[node] = G[node] * G[node] / (H[node] + lam)

    for j in range(p):
        for node in range(n_nodes):
            GL[node] = 0.0
            HL[node] = 0.0
            seen[node] = 0
        for t in range(n):
            i = order[j, t]
            node = node_of[i]
            if node < 0:
                continue
            x = X[i, j]
            if seen[node] and last[node] < x:
                gl = GL[node]
                hl = HL[node]
                gr = G[node] - gl
                hr = H[node] - hl
                if hl >= min_child_weight and hr >= min_child_weight:
                    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent[node])
                    if gain > best_gain[node]:
                        best_gain[node] = gain
                        best_feat[node] = j
                        a = last[node]
                        thr = 0.5 * (a + x)
                        if thr <= a:
                            thr = x
                        best_thr[node] = thr
            GL[node] = GL[node] + g[i]
            HL[node] = HL[node] + h[i]
            last[node] = x
            seen[node] = 1
    return best_gain_a, best_feat_a, best_thr_a
