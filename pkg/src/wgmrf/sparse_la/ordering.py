"""Fill-reducing orderings."""
import heapq

import numpy as np
import scipy.sparse as sp


def minimum_degree(a):
    """Greedy minimum-degree ordering on the graph of symmetric matrix ``a``.

    Plain elimination-graph version (no quotient graph, no supervariables),
    adequate for meshes of a few thousand nodes.  Ties go to the lowest node
    index so the permutation is deterministic.  Returns ``perm`` such that
    ``a[perm][:, perm]`` is the matrix to factor.
    """
    a = sp.csr_matrix(a)
    n = a.shape[0]
    adj = []
    for i in range(n):
        nbrs = set(a.indices[a.indptr[i]:a.indptr[i + 1]].tolist())
        nbrs.discard(i)
        adj.append(nbrs)
    heap = [(len(adj[i]), i) for i in range(n)]
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    perm = np.empty(n, dtype=np.int64)
    k = 0
    while heap:
        deg, v = heapq.heappop(heap)
        if done[v] or deg != len(adj[v]):
            continue
        done[v] = True
        perm[k] = v
        k += 1
        nbrs = adj[v]
        for u in nbrs:
            au = adj[u]
            au.discard(v)
            au |= nbrs
            au.discard(u)
            heapq.heappush(heap, (len(au), u))
        adj[v] = set()
    return perm


def natural(a):
    return np.arange(a.shape[0], dtype=np.int64)


ORDERINGS = {"mindegree": minimum_degree, "natural": natural}
