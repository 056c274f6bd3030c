"""Contact networks: ingestion, generators, spectral and centrality statistics,
and structural subsampling for robustness experiments."""
from __future__ import annotations

import csv
import io
import math
import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, shortest_path

from ._validation import check_fraction, check_probability, make_rng


class GraphFormatError(ValueError):
    """Raised for malformed edge-list input."""


class ConvergenceError(RuntimeError):
    """Raised when power iteration does not converge."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"power iteration did not converge after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )


class ContactNetwork:
    """Immutable undirected simple graph on nodes ``0..n-1``.

    Edges are stored canonically as sorted ``(u, v)`` pairs with ``u < v``.
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        n = int(n)
        if n < 1:
            raise ValueError(f"node count must be >= 1, got {n}")
        canon = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) has endpoint outside [0, {n})")
            canon.add((u, v) if u < v else (v, u))
        self._n = n
        self._edges = tuple(sorted(canon))

    @property
    def n(self) -> int:
        return self._n

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return self._edges

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def __len__(self) -> int:
        return self._n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContactNetwork):
            return NotImplemented
        return self._n == other._n and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self._n, self._edges))

    def __repr__(self) -> str:
        return f"ContactNetwork(n={self._n}, edges={self.num_edges})"

    @cached_property
    def edge_array(self) -> np.ndarray:
        """``(|E|, 2)`` int array of canonical edges."""
        if not self._edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.asarray(self._edges, dtype=np.int64)

    @cached_property
    def arcs(self) -> tuple[np.ndarray, np.ndarray]:
        """Both orientations of every edge as ``(src, dst)`` arrays."""
        e = self.edge_array
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        return src, dst

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        src, dst = self.arcs
        data = np.ones(src.size, dtype=np.float64)
        return sp.csr_matrix((data, (src, dst)), shape=(self._n, self._n))

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self._n, dtype=np.int64)
        if self._edges:
            np.add.at(deg, self.edge_array.ravel(), 1)
        return deg

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self._n)]
        for u, v in self._edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    def dense_adjacency(self) -> np.ndarray:
        return self.adjacency.toarray()

    def without_nodes(self, nodes: Iterable[int]) -> "ContactNetwork":
        """Drop every edge incident to ``nodes``; node ids are kept."""
        drop = set(int(v) for v in nodes)
        return ContactNetwork(
            self._n, [(u, v) for u, v in self._edges if u not in drop and v not in drop]
        )


@dataclass(frozen=True)
class NetworkStats:
    n: int
    num_edges: int
    spectral_radius: float
    avg_degree: float
    avg_shortest_path: float | None
    assortativity: float
    degenerate_assortativity: bool = False

    @property
    def inv_spectral_radius(self) -> float | None:
        return 1.0 / self.spectral_radius if self.spectral_radius > 0 else None

    CSV_HEADER = (
        "name", "n", "edges", "spectral_radius", "inv_spectral_radius",
        "avg_degree", "avg_shortest_path", "assortativity",
    )

    def to_csv_row(self, name: str) -> str:
        def fmt(x):
            if x is None:
                return "undefined"
            if isinstance(x, float):
                return repr(round(x, 12))
            return str(x)

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_HEADER)
        writer.writerow([
            name, self.n, self.num_edges, fmt(self.spectral_radius),
            fmt(self.inv_spectral_radius), fmt(self.avg_degree),
            fmt(self.avg_shortest_path), fmt(self.assortativity),
        ])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# ingestion and generators
# ---------------------------------------------------------------------------

_NODE_COUNT = re.compile(r"#\s*n\s*=\s*(\d+)\s*$")


def parse_edge_list(text: str) -> ContactNetwork:
    """Parse edge-list text.

    A comment of the form ``# n=<count>`` declares the node count, which keeps
    isolated trailing nodes (and edge-free graphs) representable.
    """
    edges = []
    max_id = -1
    declared = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            match = _NODE_COUNT.match(line)
            if match:
                declared = int(match.group(1))
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"line {lineno}: expected two node ids, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer node id in {line!r}") from None
        if u < 0 or v < 0:
            raise GraphFormatError(f"line {lineno}: negative node id in {line!r}")
        if u == v:
            raise GraphFormatError(f"line {lineno}: self-loop on node {u}")
        edges.append((u, v))
        max_id = max(max_id, u, v)
    if not edges and declared < 1:
        raise GraphFormatError("edge list is empty")
    return ContactNetwork(max(max_id + 1, declared), edges)


def load_edge_list(path: str | Path) -> ContactNetwork:
    """Read a whitespace-separated ``u v`` edge list ('#' lines are comments)."""
    return parse_edge_list(Path(path).read_text())


def format_edge_list(net: ContactNetwork, header: str | None = None) -> str:
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.append(f"# n={net.n}")
    lines.extend(f"{u} {v}" for u, v in net.edges)
    return "\n".join(lines) + "\n"


def save_edge_list(net: ContactNetwork, path: str | Path, header: str | None = None) -> None:
    Path(path).write_text(format_edge_list(net, header))


def generate_erdos_renyi(n: int, p: float, seed: int) -> ContactNetwork:
    check_probability(p, "p")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return ContactNetwork(n, zip(iu[keep].tolist(), ju[keep].tolist()))


def generate_barabasi_albert(n: int, m: int, seed: int) -> ContactNetwork:
    """Preferential attachment grown from an ``(m+1)``-clique.

    Each new node attaches to ``m`` distinct existing nodes drawn without
    replacement with probability proportional to current degree.
    """
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = make_rng(seed)
    edges = [(u, v) for u in range(m + 1) for v in range(u + 1, m + 1)]
    deg = np.zeros(n, dtype=np.float64)
    deg[: m + 1] = m
    for new in range(m + 1, n):
        w = deg[:new]
        targets = rng.choice(new, size=m, replace=False, p=w / w.sum())
        for t in targets:
            edges.append((int(t), new))
        deg[targets] += 1
        deg[new] = m
    return ContactNetwork(n, edges)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def spectral_radius(net: ContactNetwork, tol: float = 1e-8, max_iter: int = 10000) -> float:
    """Largest adjacency eigenvalue by power iteration.

    Iterates on ``A + I`` so that bipartite graphs (whose spectrum is
    symmetric about zero) still converge; the shift is removed at the end.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if net.num_edges == 0:
        return 0.0
    a = net.adjacency
    v = np.ones(net.n) / math.sqrt(net.n)
    rho = float(v @ (a @ v)) + 1.0
    residual = float("inf")
    for it in range(1, max_iter + 1):
        w = a @ v + v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        bv = a @ v + v
        new_rho = float(v @ bv)
        residual = float(np.linalg.norm(bv - new_rho * v))
        if abs(new_rho - rho) < tol and residual < math.sqrt(tol):
            return max(new_rho - 1.0, 0.0)
        rho = new_rho
    raise ConvergenceError(max_iter, residual)


def average_shortest_path(net: ContactNetwork) -> float | None:
    """Mean hop distance over ordered pairs in the largest connected component.

    Returns ``None`` when the graph has no edges.
    """
    if net.num_edges == 0:
        return None
    _, labels = connected_components(net.adjacency, directed=False)
    sizes = np.bincount(labels)
    comp = int(np.argmax(sizes))
    nodes = np.flatnonzero(labels == comp)
    sub = net.adjacency[nodes][:, nodes]
    dist = shortest_path(sub, method="D", directed=False, unweighted=True)
    k = nodes.size
    return float(dist.sum() / (k * (k - 1)))


def assortativity(net: ContactNetwork) -> tuple[float, bool]:
    """Degree assortativity and a flag set when the degree variance is zero."""
    if net.num_edges == 0:
        return 0.0, True
    src, dst = net.arcs
    x = net.degrees[src].astype(np.float64)
    y = net.degrees[dst].astype(np.float64)
    xc, yc = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        return 0.0, True
    r = float(xc @ yc) / denom
    return min(1.0, max(-1.0, r)), False


def network_stats(net: ContactNetwork) -> NetworkStats:
    r, degenerate = assortativity(net)
    return NetworkStats(
        n=net.n,
        num_edges=net.num_edges,
        spectral_radius=spectral_radius(net),
        avg_degree=2.0 * net.num_edges / net.n,
        avg_shortest_path=average_shortest_path(net),
        assortativity=r,
        degenerate_assortativity=degenerate,
    )


def betweenness(net: ContactNetwork) -> np.ndarray:
    """Unnormalised shortest-path betweenness (Brandes), each pair counted once."""
    n = net.n
    nbrs = net.neighbors
    cb = np.zeros(n)
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    # every unordered pair was visited from both ends
    return cb / 2.0


# ---------------------------------------------------------------------------
# structural uncertainty
# ---------------------------------------------------------------------------

def remove_edges(net: ContactNetwork, fraction: float, seed: int) -> ContactNetwork:
    """Delete ``floor(fraction * |E|)`` uniformly chosen edges."""
    check_fraction(fraction, "fraction")
    m = net.num_edges
    drop = int(math.floor(fraction * m))
    if drop == 0:
        return net
    rng = make_rng(seed)
    gone = set(rng.choice(m, size=drop, replace=False).tolist())
    return ContactNetwork(net.n, [e for i, e in enumerate(net.edges) if i not in gone])


def sample_nodes(n: int, fraction: float, seed: int) -> np.ndarray:
    check_fraction(fraction, "fraction")
    count = int(math.floor(fraction * n))
    rng = make_rng(seed)
    return np.sort(rng.choice(n, size=count, replace=False))


def remove_node_edges(net: ContactNetwork, fraction: float, seed: int) -> ContactNetwork:
    """Hide every edge incident to ``floor(fraction * n)`` sampled nodes."""
    nodes = sample_nodes(net.n, fraction, seed)
    if nodes.size == 0:
        return net
    return net.without_nodes(nodes.tolist())
