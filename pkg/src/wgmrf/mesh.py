"""Mesh connectivity, graph distances and the GMRF precision matrix."""
import hashlib
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import DimensionError, DisconnectedGraphError, IsolatedNodeError, ParseError

log = logging.getLogger(__name__)

EDGE_LIST = "edge_list"
ELEMENT_LIST = "element_list"


@dataclass(frozen=True, eq=False)
class MeshGraph:
    """Undirected, connected mesh graph in compressed adjacency form.

    ``indices[indptr[i]:indptr[i+1]]`` are the sorted neighbours of node ``i``.
    Use :meth:`from_edges` rather than the constructor; it validates.
    """

    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    coords: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, m, edges, coords=None):
        m = int(m)
        if m <= 0:
            raise ParseError("node count must be positive", node_count=m)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= m):
            raise ParseError(f"edge index out of range [0, {m})")
        loops = e[:, 0] == e[:, 1]
        if loops.any():
            warnings.warn(f"dropping {int(loops.sum())} self-loop(s)", stacklevel=2)
            e = e[~loops]
        und = np.sort(e, axis=1)
        uniq = np.unique(und, axis=0)
        if len(uniq) < len(und):
            warnings.warn(f"dropping {len(und) - len(uniq)} duplicate edge(s)", stacklevel=2)
        rows = np.concatenate([uniq[:, 0], uniq[:, 1]])
        cols = np.concatenate([uniq[:, 1], uniq[:, 0]])
        A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
        A.sort_indices()
        deg = np.diff(A.indptr)
        isolated = np.flatnonzero(deg == 0)
        if m > 1 and len(isolated):
            raise IsolatedNodeError(
                f"{len(isolated)} isolated node(s), first {int(isolated[0])}",
                nodes=isolated[:20].tolist(),
            )
        if m == 1:
            raise IsolatedNodeError("a single node has no neighbours", nodes=[0])
        ncomp, labels = connected_components(A, directed=False)
        if ncomp > 1:
            sizes = sorted(np.bincount(labels).tolist(), reverse=True)
            raise DisconnectedGraphError(
                f"mesh graph is disconnected: {ncomp} components of sizes {sizes}",
                component_sizes=sizes,
            )
        if coords is not None:
            coords = np.asarray(coords, dtype=np.float64)
            if coords.shape != (m, 3):
                raise DimensionError(f"coords must have shape ({m}, 3), got {coords.shape}")
        return cls(m, A.indptr.astype(np.int64), A.indices.astype(np.int64), coords)

    @classmethod
    def lattice(cls, nx, ny=None):
        """Rectangular 4-neighbour grid; node ``i*ny + j`` sits at row i, column j."""
        ny = nx if ny is None else ny
        idx = np.arange(nx * ny).reshape(nx, ny)
        edges = np.concatenate(
            [
                np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1),
                np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1),
            ]
        )
        ii, jj = np.divmod(np.arange(nx * ny), ny)
        coords = np.stack([ii, jj, np.zeros_like(ii)], axis=1).astype(np.float64)
        return cls.from_edges(nx * ny, edges, coords)

    @classmethod
    def path(cls, m):
        return cls.from_edges(m, np.stack([np.arange(m - 1), np.arange(1, m)], axis=1))

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def degree(self):
        return np.diff(self.indptr)

    def edges(self):
        """Each undirected edge once as (i, j) with i < j."""
        rows = np.repeat(np.arange(self.node_count), self.degree)
        keep = rows < self.indices
        return np.stack([rows[keep], self.indices[keep]], axis=1)

    def adjacency(self):
        return sp.csr_matrix(
            (np.ones(len(self.indices)), self.indices, self.indptr),
            shape=(self.node_count, self.node_count),
        )

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.int64(self.node_count).tobytes())
        h.update(self.indptr.astype("<i8").tobytes())
        h.update(self.indices.astype("<i8").tobytes())
        return h.hexdigest()[:16]


def _data_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def parse_mesh(text, format=EDGE_LIST):
    lines = _data_lines(text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError("empty mesh file") from None
    try:
        m = int(header)
    except ValueError:
        raise ParseError(f"line {lineno}: expected node count, got {header!r}", line=lineno) from None
    edges = []
    for lineno, line in lines:
        try:
            nodes = [int(tok) for tok in line.split()]
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer node index in {line!r}", line=lineno) from None
        if any(v < 0 or v >= m for v in nodes):
            raise ParseError(f"line {lineno}: node index out of range [0, {m})", line=lineno)
        if format == EDGE_LIST:
            if len(nodes) != 2:
                raise ParseError(f"line {lineno}: expected 'i j', got {line!r}", line=lineno)
            edges.append(nodes)
        elif format == ELEMENT_LIST:
            if len(nodes) < 2:
                raise ParseError(f"line {lineno}: element needs at least 2 nodes", line=lineno)
            for a in range(len(nodes)):
                for b in range(a + 1, len(nodes)):
                    edges.append((nodes[a], nodes[b]))
        else:
            raise ValueError(f"unknown mesh format {format!r}")
    if format == ELEMENT_LIST and edges:
        # shared element faces legitimately repeat edges; not worth a warning
        edges = np.unique(np.sort(np.asarray(edges), axis=1), axis=0)
    return m, np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def load_mesh(path, format=EDGE_LIST, coords_path=None):
    """Read an edge-list or element-list file into a validated :class:`MeshGraph`."""
    m, edges = parse_mesh(Path(path).read_text(encoding="utf-8"), format)
    coords = load_coords(coords_path, m) if coords_path else None
    return MeshGraph.from_edges(m, edges, coords)


def load_coords(path, m):
    data = np.genfromtxt(path, delimiter=",", names=True)
    coords = np.zeros((m, 3))
    coords[data["node"].astype(np.int64)] = np.stack([data["x"], data["y"], data["z"]], axis=1)
    return coords


def write_edge_list(g, path):
    lines = [str(g.node_count)] + [f"{i} {j}" for i, j in g.edges()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def graph_distance(g, source, radius=None):
    """BFS hop distances from ``source``.

    Returns a dict ``{node: hops}``; with ``radius`` set, nodes farther than
    ``radius`` hops are left out.
    """
    if not 0 <= source < g.node_count:
        raise IndexError(f"source {source} out of range [0, {g.node_count})")
    if radius is not None and radius < 0:
        raise ValueError("radius must be nonnegative")
    d = _kernels.bfs(g.indptr, g.indices, source, -1 if radius is None else int(radius))
    reach = np.flatnonzero(d >= 0)
    return {int(i): int(d[i]) for i in reach}


def distance_array(g, source, radius=None):
    """Like :func:`graph_distance` but as an int array with -1 for absent nodes."""
    if not 0 <= source < g.node_count:
        raise IndexError(f"source {source} out of range [0, {g.node_count})")
    return _kernels.bfs(g.indptr, g.indices, source, -1 if radius is None else int(radius))


@dataclass(frozen=True, eq=False)
class SparseSpdMatrix:
    """Symmetric sparse matrix stored as its upper triangle (diagonal included), CSC."""

    upper: sp.csc_matrix

    @property
    def dimension(self):
        return self.upper.shape[0]

    def full(self):
        U = self.upper
        return (U + sp.triu(U, k=1).T).tocsr()

    def toarray(self):
        return self.full().toarray()

    def __matmul__(self, v):
        return self.full() @ v

    @property
    def nnz(self):
        """Nonzeros of the full symmetric matrix."""
        return 2 * self.upper.nnz - self.dimension

    def diagonal(self):
        return self.upper.diagonal()

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError("matrix must be square")
        if not np.allclose(a, a.T, rtol=0, atol=0):
            raise ValueError("matrix is not symmetric")
        return cls(sp.csc_matrix(np.triu(a)))

    @classmethod
    def from_sparse(cls, a):
        a = sp.csc_matrix(a)
        return cls(sp.csc_matrix(sp.triu(a)))


def build_precision(g, epsilon):
    """Regularised GMRF precision: graph Laplacian of ``g`` plus ``epsilon`` on the diagonal."""
    if not epsilon >= 0:
        raise ValueError("epsilon must be nonnegative")
    m = g.node_count
    e = g.edges()
    diag = g.degree.astype(np.float64) + float(epsilon)
    rows = np.concatenate([e[:, 0], np.arange(m)])
    cols = np.concatenate([e[:, 1], np.arange(m)])
    vals = np.concatenate([-np.ones(len(e)), diag])
    U = sp.csc_matrix((vals, (rows, cols)), shape=(m, m))
    U.sort_indices()
    return SparseSpdMatrix(U)
