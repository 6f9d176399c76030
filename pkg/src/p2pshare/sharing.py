"""Loss settlement across a network under the reciprocal-contract mechanisms.

Every kernel accepts loss arrays of shape ``(n,)`` or ``(reps, n)`` so that a
whole batch of replications settles with a handful of sparse products.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .lossmodel import ClaimSample
from .netgen import Graph, GraphError

LAYERS = ("self_first", "from_friends_received", "paid_to_friends",
          "from_fof_received", "paid_to_fof", "residual_self")


class CapacityError(ValueError):
    """Engagements exceed what a node may commit."""


@dataclass(frozen=True, eq=False)
class EngagementMap:
    """Per-edge magnitudes aligned with ``graph.edges``."""

    graph: Graph
    gamma: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float).reshape(-1)
        if len(g) != self.graph.m:
            raise GraphError(f"expected {self.graph.m} magnitudes, got {len(g)}")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("magnitudes must be finite and nonnegative")
        g.flags.writeable = False
        object.__setattr__(self, "gamma", g)

    @classmethod
    def from_triples(cls, graph: Graph, triples, info: dict | None = None) -> "EngagementMap":
        gamma = np.zeros(graph.m)
        for u, v, val in triples:
            try:
                gamma[graph.edge_index(int(u), int(v))] = float(val)
            except KeyError:
                raise GraphError(f"engagement on non-edge ({u}, {v})") from None
        return cls(graph, gamma, dict(info or {}))

    @classmethod
    def empty(cls, graph: Graph) -> "EngagementMap":
        return cls(graph, np.zeros(graph.m))

    @cached_property
    def coverage(self) -> np.ndarray:
        e = self.graph.edges
        cov = (np.bincount(e[:, 0], self.gamma, minlength=self.graph.n)
               + np.bincount(e[:, 1], self.gamma, minlength=self.graph.n))
        cov.flags.writeable = False
        return cov

    @property
    def total(self) -> float:
        return float(self.gamma.sum())

    @cached_property
    def weights(self) -> sp.csr_matrix:
        """Symmetric n×n matrix with γ on each edge."""
        e = self.graph.edges
        n = self.graph.n
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        vals = np.concatenate([self.gamma, self.gamma])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def to_json(self) -> dict:
        meta = {k: v for k, v in self.info.items()}
        triples = [[int(u), int(v), float(g)]
                   for (u, v), g in zip(self.graph.edges, self.gamma) if g > 0]
        return {"n": self.graph.n, "engagements": triples, **meta}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, graph: Graph) -> "EngagementMap":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj.get("n") != graph.n:
            raise GraphError("engagement file does not match the graph size")
        info = {k: v for k, v in obj.items() if k not in ("n", "engagements")}
        return cls.from_triples(graph, obj["engagements"], info)


@dataclass
class SettlementResult:
    xi: np.ndarray
    layers: dict
    total_in: float

    def conservation_gap(self) -> float:
        return float(abs(self.xi.sum() - self.total_in))

    def to_json(self) -> dict:
        return {"xi": self.xi.tolist(), "total_in": self.total_in,
                "layers": {k: v.tolist() for k, v in self.layers.items()}}


def _spread(W: sp.spmatrix, v: np.ndarray) -> np.ndarray:
    """Row-wise ``W @ v`` for v of shape (n,) or (reps, n)."""
    if v.ndim == 1:
        return W @ v
    return np.asarray((W @ v.T).T)


def _result(X, self_first, rec1, paid1, rec2=None, paid2=None) -> SettlementResult:
    zero = np.zeros_like(X)
    rec2 = zero if rec2 is None else rec2
    paid2 = zero if paid2 is None else paid2
    # the residual absorbs rounding, which keeps Σξ = ΣX to machine precision
    residual = np.maximum(X - self_first - rec1 - rec2, 0.0)
    xi = self_first + residual + paid1 + paid2
    layers = dict(zip(LAYERS, (self_first, rec1, paid1, rec2, paid2, residual)))
    return SettlementResult(xi, layers, float(X.sum()))


def uniform_contribution(x, d, gamma):
    """Per-friend contribution ``min(gamma, x / d)``."""
    d_arr = np.asarray(d)
    if np.any(d_arr < 1):
        raise GraphError("isolated node has no friends to contribute")
    out = np.minimum(gamma, np.asarray(x, dtype=float) / d_arr)
    return float(out) if out.ndim == 0 else out


def _require_no_isolated(graph: Graph) -> None:
    if graph.n and graph.degrees.min() < 1:
        raise GraphError("uniform mechanism needs every node to have a friend")


def uniform_kernel(graph: Graph, X: np.ndarray, gamma: float, z: float = 0.0) -> SettlementResult:
    _require_no_isolated(graph)
    d = graph.degrees
    self_first = np.minimum(X, z)
    excess = X - self_first
    C = np.minimum(gamma, excess / d)
    received = d * C
    paid = _spread(graph.adjacency, C)
    return _result(X, self_first, received, paid)


def settle_uniform(graph: Graph, claims: ClaimSample, s: float,
                   gamma: float | None = None) -> SettlementResult:
    """Every friend of a claimant pays ``min(gamma, X/d)``; default ``gamma = s / mean degree``."""
    if gamma is None:
        gamma = s / graph.mean_degree
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return uniform_kernel(graph, np.asarray(claims.X, dtype=float), gamma)


def settle_uniform_with_self(graph: Graph, claims: ClaimSample, s: float, z: float,
                             dbar: float | None = None) -> SettlementResult:
    """Claimant keeps the first ``z``; friends share the excess at ``gamma = (s - z) / dbar``.

    ``dbar`` defaults to the graph's mean degree.
    """
    if not 0 <= z <= s:
        raise ValueError(f"self contribution {z} outside [0, s]")
    dbar = graph.mean_degree if dbar is None else dbar
    return uniform_kernel(graph, np.asarray(claims.X, dtype=float), (s - z) / dbar, z)


def _ratio(excess: np.ndarray, cover: np.ndarray) -> np.ndarray:
    safe = np.where(cover > 0, cover, 1.0)
    return np.where(cover > 0, np.minimum(1.0, excess / safe), 0.0)


def _check_eng(eng: EngagementMap, graph: Graph) -> None:
    if eng.graph is not graph and not np.array_equal(eng.graph.edges, graph.edges):
        raise GraphError("engagement map belongs to a different graph")


def personalized_kernel(eng1: EngagementMap, X: np.ndarray, z: float = 0.0,
                        eng2: EngagementMap | None = None) -> SettlementResult:
    self_first = np.minimum(X, z)
    excess = X - self_first
    r1 = _ratio(excess, eng1.coverage)
    rec1 = eng1.coverage * r1
    paid1 = _spread(eng1.weights, r1)
    if eng2 is None or eng2.total == 0:
        return _result(X, self_first, rec1, paid1)
    excess2 = np.maximum(excess - rec1, 0.0)
    r2 = _ratio(excess2, eng2.coverage)
    rec2 = eng2.coverage * r2
    paid2 = _spread(eng2.weights, r2)
    return _result(X, self_first, rec1, paid1, rec2, paid2)


def settle_personalized(graph: Graph, eng: EngagementMap, claims: ClaimSample,
                        s: float) -> SettlementResult:
    """Friend i pays claimant j ``gamma_ij * min(1, X_j / coverage_j)``."""
    _check_eng(eng, graph)
    return personalized_kernel(eng, np.asarray(claims.X, dtype=float))


def settle_two_layer(graph: Graph, eng1: EngagementMap, fof_graph: Graph,
                     eng2: EngagementMap, claims: ClaimSample, s: float,
                     z: float = 0.0) -> SettlementResult:
    """Self ``z``, then friends, then friends of friends, then whatever is left."""
    _check_eng(eng1, graph)
    _check_eng(eng2, fof_graph)
    if fof_graph.n != graph.n:
        raise GraphError("friends-of-friends graph must share the node index space")
    if not 0 <= z <= s:
        raise ValueError(f"self contribution {z} outside [0, s]")
    load = eng1.coverage + eng2.coverage
    over = load > s - z + 1e-9 * max(1.0, s)
    if np.any(over):
        i = int(np.flatnonzero(over)[0])
        raise CapacityError(f"node {i} commits {load[i]:g} > s - z = {s - z:g}")
    return personalized_kernel(eng1, np.asarray(claims.X, dtype=float), z, eng2)


def settle_shares(graph: Graph, self_share: np.ndarray, edge_share: np.ndarray,
                  X: np.ndarray) -> SettlementResult:
    """Linear sharing ξ = W X with W given by self shares and symmetric edge shares."""
    X = np.asarray(X, dtype=float)
    eng = EngagementMap(graph, edge_share)
    col = self_share + eng.coverage
    if np.any(np.abs(col - 1.0) > 1e-6):
        raise CapacityError("share matrix columns must sum to one")
    kept = self_share * X
    rec = X - kept
    paid = _spread(eng.weights, X)
    return _result(X, kept, rec, paid)
