"""Pure-numpy implementations of the compiled kernels in ``_core.pyx``.

Arithmetic is ordered to match the compiled loop exactly so both backends
return bit-identical results.
"""

import numpy as np


def find_best_splits(X, order, g, h, node_of, G, H, lam, min_child_weight):
    n_nodes = len(G)
    best_gain = np.zeros(n_nodes)
    best_feat = np.full(n_nodes, -1, dtype=np.int64)
    best_thr = np.zeros(n_nodes)
    parent = G * G / (H + lam)
    for j in range(X.shape[1]):
        o = order[j]
        nodes = node_of[o]
        keep = nodes >= 0
        o = o[keep]
        nodes = nodes[keep]
        # group rows by node while keeping value order inside each node
        by_node = np.argsort(nodes, kind="stable")
        o = o[by_node]
        nodes = nodes[by_node]
        bounds = np.searchsorted(nodes, np.arange(n_nodes + 1))
        for node in range(n_nodes):
            seg = o[bounds[node]:bounds[node + 1]]
            if seg.size < 2:
                continue
            x = X[seg, j]
            GL = np.cumsum(g[seg])[:-1]
            HL = np.cumsum(h[seg])[:-1]
            GR = G[node] - GL
            HR = H[node] - HL
            ok = (x[:-1] < x[1:]) & (HL >= min_child_weight) & (HR >= min_child_weight)
            if not ok.any():
                continue
            gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent[node])
            gain = np.where(ok, gain, -np.inf)
            t = int(np.argmax(gain))
            if gain[t] > best_gain[node]:
                best_gain[node] = gain[t]
                best_feat[node] = j
                a, b = x[t], x[t + 1]
                thr = 0.5 * (a + b)
                if thr <= a:
                    thr = b
                best_thr[node] = thr
    return best_gain, best_feat, best_thr
