"""Cell-contact graphs, their random-walk matrices, spectra, and bipartitions.

Nodes are 0-indexed everywhere, including file formats. Graphs are
undirected, simple (no self-loops, no parallel edges), and connected by
construction; disconnected input is an error, not a warning.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DisconnectedGraphError,
    DuplicateEdgeError,
    EdgeListFormatError,
    EigenSolverFailure,
    IndexOutOfRangeError,
    SelfLoopError,
)

__all__ = [
    "ContactGraph",
    "RandomWalkSpectrum",
    "Bipartition",
    "build_graph",
    "path_graph",
    "cycle_graph",
    "grid_graph",
    "complete_bipartite",
    "cartesian_product",
    "random_walk_matrix",
    "spectrum",
    "bipartition",
    "parse_edge_list",
    "read_edge_list",
    "write_edge_list",
    "random_connected_graph",
    "random_connected_bipartite",
]

# Dense eigensolvers are the only supported backend; this is the documented scale.
MAX_DENSE_NODES = 2000


@dataclass(frozen=True)
class ContactGraph:
    """Undirected connected graph of cells in physical contact."""

    node_count: int
    edges: tuple[tuple[int, int], ...]   # canonical (i, j) with i < j, sorted
    degrees: tuple[int, ...]
    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        if i > j:
            i, j = j, i
        return (i, j) in set(self.edges)


@dataclass(frozen=True)
class RandomWalkSpectrum:
    """Row-stochastic neighbor-averaging matrix with its full eigensystem.

    Eigenvalues are sorted descending and all lie in [-1, 1]; eigenvectors
    (columns of ``eigenvectors``) are computed on the symmetric similarity
    D^{1/2} P D^{-1/2} and mapped back, so they are linearly independent.
    Each is normalized to unit 2-norm with its first nonzero entry positive.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def mode_min(self) -> np.ndarray:
        return self.eigenvectors[:, -1]

    def positive_eigenvalues(self, tol: float = 1e-9) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues > tol]


@dataclass(frozen=True)
class Bipartition:
    """Two-coloring of a bipartite graph; no edge joins nodes of one set."""

    set_a: tuple[int, ...]
    set_b: tuple[int, ...]

    def side(self, node: int) -> int:
        return 0 if node in self.set_a else 1


def build_graph(node_count: int, edge_list) -> ContactGraph:
    """Validate and build a connected contact graph from an edge list.

    Rejects self-loops, out-of-range indices, duplicate edges (including
    reversed repeats), and disconnected graphs.
    """
    if node_count < 2:
        raise IndexOutOfRangeError(f"need at least 2 nodes, got {node_count}")
    seen: set[tuple[int, int]] = set()
    canonical: list[tuple[int, int]] = []
    for i, j in edge_list:
        i, j = int(i), int(j)
        if i == j:
            raise SelfLoopError(f"self-loop at node {i}")
        if not (0 <= i < node_count and 0 <= j < node_count):
            raise IndexOutOfRangeError(f"edge ({i}, {j}) outside 0..{node_count - 1}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdgeError(f"duplicate edge ({key[0]}, {key[1]})")
        seen.add(key)
        canonical.append(key)
    canonical.sort()

    adj: list[list[int]] = [[] for _ in range(node_count)]
    for i, j in canonical:
        adj[i].append(j)
        adj[j].append(i)
    _check_connected(node_count, adj)

    return ContactGraph(
        node_count=node_count,
        edges=tuple(canonical),
        degrees=tuple(len(a) for a in adj),
        neighbors=tuple(tuple(sorted(a)) for a in adj),
    )


def _check_connected(node_count: int, adj) -> None:
    seen = [False] * node_count
    queue = deque([0])
    seen[0] = True
    count = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    if count != node_count:
        missing = [i for i, s in enumerate(seen) if not s]
        raise DisconnectedGraphError(
            f"graph is not connected; unreachable nodes {missing[:8]}"
        )


# -- generators ------------------------------------------------------------

def path_graph(n: int) -> ContactGraph:
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> ContactGraph:
    if n < 3:
        raise IndexOutOfRangeError("cycle needs at least 3 nodes")
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_bipartite(a: int, b: int) -> ContactGraph:
    if a < 1 or b < 1:
        raise IndexOutOfRangeError("both sides need at least one node")
    return build_graph(a + b, [(i, a + j) for i in range(a) for j in range(b)])


def cartesian_product(g: ContactGraph, h: ContactGraph) -> ContactGraph:
    """Cartesian product; node (i, j) maps to index i * h.node_count + j."""
    nh = h.node_count
    edges = []
    for i in range(g.node_count):
        for j, k in h.edges:
            edges.append((i * nh + j, i * nh + k))
    for i, k in g.edges:
        for j in range(nh):
            edges.append((i * nh + j, k * nh + j))
    return build_graph(g.node_count * nh, edges)


def grid_graph(rows: int, cols: int) -> ContactGraph:
    if rows * cols < 2:
        raise IndexOutOfRangeError("grid needs at least 2 nodes")
    if rows == 1:
        return path_graph(cols)
    if cols == 1:
        return path_graph(rows)
    return cartesian_product(path_graph(rows), path_graph(cols))


# -- random-walk matrix and spectrum ----------------------------------------

def random_walk_matrix(g: ContactGraph) -> np.ndarray:
    """Row-stochastic matrix with p_ij = 1/d_i for adjacent i, j."""
    p = np.zeros((g.node_count, g.node_count))
    for i, j in g.edges:
        p[i, j] = 1.0 / g.degrees[i]
        p[j, i] = 1.0 / g.degrees[j]
    return p


def spectrum(g: ContactGraph) -> RandomWalkSpectrum:
    """Full eigensystem of the neighbor-averaging matrix.

    Solved on the symmetric similarity D^{1/2} P D^{-1/2}, which guarantees
    real eigenvalues numerically, then mapped back by D^{-1/2}.
    """
    if g.node_count > MAX_DENSE_NODES:
        raise EigenSolverFailure(
            f"dense solver supports up to {MAX_DENSE_NODES} nodes, got {g.node_count}"
        )
    p = random_walk_matrix(g)
    root_deg = np.sqrt(np.asarray(g.degrees, dtype=float))
    sym = p * (root_deg[:, None] / root_deg[None, :])
    sym = 0.5 * (sym + sym.T)
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverFailure(f"eigh did not converge: {exc}") from exc
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order] / root_deg[:, None]
    vecs /= np.linalg.norm(vecs, axis=0, keepdims=True)
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]
        if nz.size and col[nz[0]] < 0:
            vecs[:, k] = -col
    return RandomWalkSpectrum(matrix=p, eigenvalues=vals, eigenvectors=vecs)


def bipartition(g: ContactGraph) -> Bipartition | None:
    """Breadth-first 2-coloring; None when the graph has an odd cycle."""
    color = [-1] * g.node_count
    color[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in g.neighbors[u]:
            if color[v] == -1:
                color[v] = 1 - color[u]
                queue.append(v)
            elif color[v] == color[u]:
                return None
    return Bipartition(
        set_a=tuple(i for i, c in enumerate(color) if c == 0),
        set_b=tuple(i for i, c in enumerate(color) if c == 1),
    )


# -- edge-list file format ---------------------------------------------------
#
# First non-comment line: "N E"; then E lines "i j" (0-based). '#' starts a
# comment. Duplicate or reversed repeats are rejected.

def parse_edge_list(text: str) -> ContactGraph:
    header: tuple[int, int] | None = None
    edges: list[tuple[int, int]] = []
    edge_lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListFormatError(f"expected two integers, got {line!r}", line=lineno)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListFormatError(f"expected two integers, got {line!r}", line=lineno)
        if header is None:
            header = (a, b)
        else:
            edges.append((a, b))
            edge_lines.append(lineno)
    if header is None:
        raise EdgeListFormatError("empty edge-list file")
    n, e = header
    if len(edges) != e:
        raise EdgeListFormatError(f"header promises {e} edges, found {len(edges)}")
    try:
        return build_graph(n, edges)
    except DuplicateEdgeError as exc:
        # Re-raise with the offending line for file inputs.
        seen: set[tuple[int, int]] = set()
        for (i, j), lineno in zip(edges, edge_lines):
            key = (min(i, j), max(i, j))
            if key in seen:
                raise DuplicateEdgeError(f"line {lineno}: {exc}") from exc
            seen.add(key)
        raise


def read_edge_list(path) -> ContactGraph:
    return parse_edge_list(Path(path).read_text())


def write_edge_list(g: ContactGraph, path) -> None:
    lines = [f"{g.node_count} {g.edge_count}"]
    lines += [f"{i} {j}" for i, j in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


# -- seeded random graphs (ensembles, property tests) ------------------------

def random_connected_graph(n: int, rng: np.random.Generator,
                           extra_edge_prob: float = 0.15) -> ContactGraph:
    """Random spanning tree plus independent extra edges; always connected."""
    edges = {(int(rng.integers(0, i)), i) for i in range(1, n)}
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges.add((i, j))
    return build_graph(n, sorted(edges))


def random_connected_bipartite(n: int, rng: np.random.Generator,
                               extra_edge_prob: float = 0.15) -> ContactGraph:
    """Random tree (bipartite) plus extra edges across its color classes only."""
    tree = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    bp = bipartition(build_graph(n, tree))
    edges = {(min(i, j), max(i, j)) for i, j in tree}
    for i in bp.set_a:
        for j in bp.set_b:
            key = (min(i, j), max(i, j))
            if key not in edges and rng.random() < extra_edge_prob:
                edges.add(key)
    return build_graph(n, sorted(edges))
