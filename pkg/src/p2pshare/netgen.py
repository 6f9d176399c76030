"""Network construction: degree sequences, simple-graph realization, friends of friends."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphError(ValueError):
    """Malformed graph input."""


class NotGraphicalError(GraphError):
    """Degree sequence cannot be realized by a simple graph."""

    def __init__(self, message: str, prefix: int | None = None):
        super().__init__(message)
        self.prefix = prefix


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph on nodes ``0..n-1``.

    ``edges`` is an ``(m, 2)`` int array with ``u < v`` per row, rows sorted
    lexicographically. Use :meth:`from_edges` to build one from arbitrary pairs.
    """

    n: int
    edges: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        n = int(n)
        if n < 1:
            raise GraphError(f"node count must be positive, got {n}")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise GraphError("self-loop in edge list")
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = e[order]
        if len(e) > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
            raise GraphError("duplicate edge in edge list")
        # symmetric CSR adjacency, sorted neighbour lists
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        return cls(n, _readonly(e), _readonly(indptr), _readonly(cols))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> np.ndarray:
        return _readonly(np.diff(self.indptr))

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.m / self.n

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        k = np.searchsorted(nb, v)
        return bool(k < len(nb) and nb[k] == v)

    def edge_index(self, u: int, v: int) -> int:
        """Row of ``edges`` holding the pair {u, v}; KeyError if absent."""
        a, b = (u, v) if u < v else (v, u)
        lo = np.searchsorted(self.edges[:, 0], a, side="left")
        hi = np.searchsorted(self.edges[:, 0], a, side="right")
        k = lo + np.searchsorted(self.edges[lo:hi, 1], b)
        if k < hi and self.edges[k, 1] == b:
            return int(k)
        raise KeyError((u, v))

    def validate(self) -> None:
        """Re-check every structural invariant; raises GraphError."""
        e = self.edges
        if np.any(e[:, 0] >= e[:, 1]):
            raise GraphError("edges must satisfy u < v")
        deg = np.bincount(e.ravel(), minlength=self.n)
        if not np.array_equal(deg, self.degrees):
            raise GraphError("degree vector inconsistent with edges")
        if int(self.degrees.sum()) != 2 * self.m:
            raise GraphError("handshake identity violated")
        A = self.adjacency
        if (A != A.T).nnz:
            raise GraphError("adjacency not symmetric")

    def to_json(self) -> dict:
        return {"n": self.n, "edges": self.edges.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Graph":
        try:
            n, edges = obj["n"], obj["edges"]
        except (KeyError, TypeError) as exc:
            raise GraphError("graph JSON needs integer 'n' and array 'edges'") from exc
        if not isinstance(n, int):
            raise GraphError("'n' must be an integer")
        for pair in edges:
            if len(pair) != 2 or pair[0] >= pair[1]:
                raise GraphError(f"edge {pair} must be [u, v] with u < v")
        g = cls.from_edges(n, edges)
        if g.edges.tolist() != [list(p) for p in edges]:
            raise GraphError("edges must be sorted lexicographically")
        g.validate()
        return g

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Graph":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class DegreeSpec:
    mean_degree: float
    degree_sd: float
    min_degree: int = 5
    max_degree: int | None = None

    def __post_init__(self):
        if self.min_degree < 1:
            raise ValueError("min_degree must be >= 1")
        if not self.mean_degree > self.min_degree:
            raise ValueError(
                f"mean degree {self.mean_degree} must exceed min degree {self.min_degree}")
        if self.degree_sd < 0:
            raise ValueError("degree standard deviation must be nonnegative")


@dataclass(frozen=True)
class IncidenceView:
    """Edge/node incidence in sparse form (the matrix T with d = T·1)."""

    endpoints: np.ndarray      # (m, 2)
    node_ptr: np.ndarray       # CSR pointer, length n+1
    node_edges: np.ndarray     # incident edge ids, grouped by node

    @property
    def edge_ids(self) -> np.ndarray:
        return np.arange(len(self.endpoints))

    def incident(self, j: int) -> np.ndarray:
        return self.node_edges[self.node_ptr[j]:self.node_ptr[j + 1]]

    def matrix(self) -> sp.csr_matrix:
        m = len(self.endpoints)
        n = len(self.node_ptr) - 1
        rows = self.endpoints.ravel()
        cols = np.repeat(np.arange(m), 2)
        return sp.csr_matrix((np.ones(2 * m), (rows, cols)), shape=(n, m))


def sample_degree_sequence(spec: DegreeSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``min(min_degree + round(Delta), cap)`` per node, Delta ~ Gamma.

    Delta has mean ``mean_degree - min_degree`` and standard deviation
    ``degree_sd``; ``sd = 0`` makes it constant. The whole vector is redrawn
    until the degree sum is even.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    cap = n - 1 if spec.max_degree is None else min(spec.max_degree, n - 1)
    mu = spec.mean_degree - spec.min_degree
    sd = spec.degree_sd
    for _ in range(10_000):
        if sd == 0:
            delta = np.full(n, mu)
        else:
            delta = rng.gamma(shape=mu * mu / (sd * sd), scale=sd * sd / mu, size=n)
        d = np.minimum(spec.min_degree + np.floor(delta + 0.5).astype(np.int64), cap)
        if d.sum() % 2 == 0:
            return d
        if sd == 0:
            raise ValueError(f"constant degree {int(d[0])} on {n} nodes has an odd sum")
    raise RuntimeError("could not draw an even-sum degree vector")


def erdos_gallai_violation(degrees) -> int | None:
    """Smallest prefix k (1-based, descending order) failing Erdős–Gallai, or None."""
    d = np.sort(np.asarray(degrees, dtype=np.int64))[::-1]
    n = len(d)
    if n == 0:
        return None
    k = np.arange(1, n + 1)
    lhs = np.cumsum(d)
    # count of entries >= k, for each k (d is descending)
    asc = d[::-1]
    ge = n - np.searchsorted(asc, k, side="left")
    suffix = np.concatenate([np.cumsum(asc)[::-1], [0]])   # suffix[i] = sum d[i:]
    split = np.maximum(ge, k)          # tail entries from index `split` on are < k
    rhs = k * (k - 1) + k * np.maximum(ge - k, 0) + suffix[split]
    bad = np.nonzero(lhs > rhs)[0]
    return int(bad[0] + 1) if len(bad) else None


def _havel_hakimi(degrees: np.ndarray) -> np.ndarray:
    res = degrees.astype(np.int64).copy()
    n = len(res)
    idx = np.arange(n)
    edges = []
    active = idx[res > 0]
    while len(active):
        order = active[np.lexsort((active, -res[active]))]
        v = order[0]
        r = res[v]
        targets = order[1:r + 1]
        if len(targets) < r or res[targets[-1]] <= 0:
            raise NotGraphicalError("Havel-Hakimi construction failed")
        edges.append(np.column_stack([np.full(r, v), targets]))
        res[v] = 0
        res[targets] -= 1
        active = order[1:][res[order[1:]] > 0]
    if not edges:
        return np.zeros((0, 2), dtype=np.int64)
    return np.sort(np.concatenate(edges), axis=1)


def _double_edge_swaps(edges: np.ndarray, n: int, attempts: int, rng: np.random.Generator) -> int:
    """In-place degree-preserving swaps; returns the number accepted."""
    m = len(edges)
    if m < 2 or attempts <= 0:
        return 0
    present = set((edges[:, 0] * n + edges[:, 1]).tolist())
    E = edges.tolist()
    accepted = 0
    batch = 65536
    done = 0
    while done < attempts:
        k = min(batch, attempts - done)
        picks = rng.integers(0, m, size=(k, 2)).tolist()
        flips = (rng.random(k) < 0.5).tolist()
        for (e1, e2), flip in zip(picks, flips):
            if e1 == e2:
                continue
            a, b = E[e1]
            c, d = E[e2]
            if flip:
                c, d = d, c
            # (a,b),(c,d) -> (a,d),(c,b)
            if a == d or c == b:
                continue
            k1 = a * n + d if a < d else d * n + a
            k2 = c * n + b if c < b else b * n + c
            if k1 in present or k2 in present or k1 == k2:
                continue
            present.discard(a * n + b if a < b else b * n + a)
            present.discard(c * n + d if c < d else d * n + c)
            present.add(k1)
            present.add(k2)
            E[e1] = [a, d] if a < d else [d, a]
            E[e2] = [c, b] if c < b else [b, c]
            accepted += 1
        done += k
    edges[:] = np.asarray(E, dtype=np.int64)
    return accepted


def realize_graph(degrees, rng: np.random.Generator | None = None,
                  shuffle_swaps: int | None = None) -> Graph:
    """Simple graph with exactly the given degrees.

    Havel–Hakimi builds a deterministic realization; ``shuffle_swaps``
    double-edge swap attempts (default ``10 * |E|``, or none without an rng) then randomize it while
    keeping every degree. Swaps that would create a loop or a duplicate edge
    are rejected and still count as attempts.
    """
    d = np.asarray(degrees, dtype=np.int64)
    n = len(d)
    if n == 0:
        raise GraphError("empty degree sequence")
    if d.min() < 0 or d.max() > n - 1:
        raise NotGraphicalError("degrees must lie in [0, n-1]")
    if d.sum() % 2:
        raise NotGraphicalError("degree sum is odd")
    k = erdos_gallai_violation(d)
    if k is not None:
        raise NotGraphicalError(f"sequence is not graphical (Erdős–Gallai fails at prefix k={k})",
                                prefix=k)
    edges = _havel_hakimi(d)
    if shuffle_swaps is None:
        swaps = 0 if rng is None else 10 * len(edges)
    else:
        swaps = int(shuffle_swaps)
    if swaps > 0:
        if rng is None:
            raise ValueError("shuffle_swaps > 0 needs an rng")
        acc = _double_edge_swaps(edges, n, swaps, rng)
        logger.debug("double-edge swaps: %d of %d accepted", acc, swaps)
    return Graph.from_edges(n, edges)


def generate_graph(spec: DegreeSpec, n: int, rng: np.random.Generator,
                   swaps_per_edge: float = 10.0, max_tries: int = 100) -> Graph:
    """Sample a degree vector and realize it, retrying non-graphical draws."""
    last = None
    for _ in range(max_tries):
        d = sample_degree_sequence(spec, n, rng)
        if erdos_gallai_violation(d) is not None:
            last = d
            continue
        swaps = int(round(swaps_per_edge * d.sum() / 2))
        return realize_graph(d, rng, swaps)
    raise NotGraphicalError(
        f"no graphical degree sequence in {max_tries} draws "
        f"(last max degree {int(last.max())})")


def friends_of_friends(graph: Graph, eligible) -> Graph:
    """Pairs of eligible nodes joined by a length-2 path but not by an edge."""
    mask = np.zeros(graph.n, dtype=bool)
    elig = np.asarray(list(eligible) if not isinstance(eligible, np.ndarray) else eligible,
                      dtype=np.int64)
    if elig.size and (elig.min() < 0 or elig.max() >= graph.n):
        raise GraphError("eligible node out of range")
    mask[elig] = True
    if mask.sum() < 2 or graph.m == 0:
        return Graph.from_edges(graph.n, [])
    A = graph.adjacency
    Ae = A[mask]                       # eligible rows
    two = (Ae @ A[:, mask]).tocoo()    # length-2 walk counts among eligible
    ids = np.flatnonzero(mask)
    u, v = ids[two.row], ids[two.col]
    keep = u < v
    u, v = u[keep], v[keep]
    direct = np.asarray(A[u, v]).ravel() > 0 if len(u) else np.zeros(0, bool)
    u, v = u[~direct], v[~direct]
    return Graph.from_edges(graph.n, np.column_stack([u, v]))


def incidence(graph: Graph) -> IncidenceView:
    m = graph.m
    ends = graph.edges
    nodes = ends.ravel()
    eids = np.repeat(np.arange(m), 2)
    order = np.lexsort((eids, nodes))
    ptr = np.zeros(graph.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(nodes, minlength=graph.n), out=ptr[1:])
    return IncidenceView(ends, ptr, eids[order])
