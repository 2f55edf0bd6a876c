"""Undirected communication graphs for multi-agent simulations.

Every experiment-facing generator returns a connected graph and is
deterministic for a fixed ``(parameters, seed)`` pair: redraw ``k`` uses the
``k``-th derived substream of the seed, so retries never desynchronize other
consumers of the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .seeding import substream

# Redraws of a disconnected/non-simple sample before giving up. Failures at
# sane parameters are astronomically rare; the cap turns an infinite loop
# into a diagnosable error.
RETRY_CAP = 1000


class GraphGenerationError(RuntimeError):
    """Raised when the retry cap is exhausted without an acceptable graph."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on agents ``0..n-1``.

    Edges are canonical ``(i, j)`` pairs with ``i < j``; self-loops and
    duplicates are rejected at construction.
    """

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"agent count must be positive, got {self.n}")
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"edge ({i},{j}) is not canonical for n={self.n}")

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "Graph":
        """Build a graph from unordered pairs, canonicalizing and deduplicating."""
        edges = set()
        for i, j in pairs:
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            a, b = (i, j) if i < j else (j, i)
            edges.add((int(a), int(b)))
        return cls(n=n, edges=frozenset(edges))

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        deg.flags.writeable = False
        return deg

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(sorted(v)) for v in nbrs)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a


def is_connected(g: Graph) -> bool:
    """True iff a search from vertex 0 reaches all ``n`` vertices."""
    if g.n == 1:
        return True
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    stack = [0]
    count = 1
    while stack:
        v = stack.pop()
        for u in g.neighbors[v]:
            if not seen[u]:
                seen[u] = True
                count += 1
                stack.append(u)
    return count == g.n


def gen_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """Connected Erdos-Renyi graph: each pair kept with probability ``p``.

    Disconnected samples are redrawn from derived substreams, up to
    ``RETRY_CAP`` attempts; raise ``p`` if that is ever exhausted.
    """
    if n < 2:
        raise ValueError(f"need at least 2 agents, got {n}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"edge probability must be in (0, 1], got {p}")
    iu, ju = np.triu_indices(n, k=1)
    for attempt in range(RETRY_CAP):
        rng = substream(seed, attempt)
        keep = rng.random(iu.shape[0]) < p
        g = Graph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))
        if is_connected(g):
            return g
    raise GraphGenerationError(
        f"no connected graph in {RETRY_CAP} draws for n={n}, p={p}; "
        "connectivity unattainable at this edge probability"
    )


def gen_random_regular(n: int, d: int, seed: int) -> Graph:
    """Connected random ``d``-regular graph via the pairing construction.

    Stubs are matched uniformly; matchings with self-loops or repeated edges
    are rejected, then disconnected graphs are rejected, both under the same
    retry cap.
    """
    if n < 2:
        raise ValueError(f"need at least 2 agents, got {n}")
    if not 0 < d < n:
        raise ValueError(f"degree must satisfy 0 < d < n, got d={d}, n={n}")
    if (n * d) % 2 != 0:
        raise ValueError(f"n*d must be even, got n={n}, d={d}")
    stubs = np.repeat(np.arange(n), d)
    for attempt in range(RETRY_CAP):
        rng = substream(seed, attempt)
        paired = rng.permutation(stubs).reshape(-1, 2)
        edges: set[tuple[int, int]] = set()
        simple = True
        for a, b in paired:
            if a == b:
                simple = False
                break
            e = (int(a), int(b)) if a < b else (int(b), int(a))
            if e in edges:
                simple = False
                break
            edges.add(e)
        if not simple:
            continue
        g = Graph(n, frozenset(edges))
        if is_connected(g):
            return g
    raise GraphGenerationError(
        f"no simple connected {d}-regular graph in {RETRY_CAP} draws for n={n}"
    )


def gen_path(n: int) -> Graph:
    """Path graph 0-1-...-(n-1)."""
    if n < 2:
        raise ValueError(f"need at least 2 agents, got {n}")
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def gen_complete(n: int) -> Graph:
    """Complete graph on ``n`` agents."""
    if n < 2:
        raise ValueError(f"need at least 2 agents, got {n}")
    iu, ju = np.triu_indices(n, k=1)
    return Graph(n, frozenset(zip(iu.tolist(), ju.tolist())))


def write_edge_list(g: Graph, path) -> None:
    """Dump as text: header ``"<n> <edge count>"`` then one ``"i j"`` per line."""
    lines = [f"{g.n} {len(g.edges)}"]
    lines.extend(f"{i} {j}" for i, j in sorted(g.edges))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    with open(path) as fh:
        header = fh.readline().split()
        n, m = int(header[0]), int(header[1])
        pairs = [tuple(int(v) for v in line.split()) for line in fh if line.strip()]
    if len(pairs) != m:
        raise ValueError(f"edge list declares {m} edges but contains {len(pairs)}")
    return Graph.from_pairs(n, pairs)
