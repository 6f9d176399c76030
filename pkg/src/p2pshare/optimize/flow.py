"""Dinic maximum flow on real capacities, with an optional starting flow."""

from __future__ import annotations

from collections import deque

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.csgraph import maximum_flow as _int_max_flow

INT_BUDGET = 2**30


class FlowNetwork:
    """Directed network stored as paired arcs (``k`` forward, ``k ^ 1`` reverse)."""

    def __init__(self, n_nodes: int, tails, heads, caps):
        tails = np.asarray(tails, dtype=np.int64)
        heads = np.asarray(heads, dtype=np.int64)
        caps = np.asarray(caps, dtype=float)
        if np.any(caps < 0):
            raise ValueError("capacities must be nonnegative")
        m = len(tails)
        self.n = n_nodes
        self.m = m
        self.cap = caps
        a_tail = np.empty(2 * m, dtype=np.int64)
        a_head = np.empty(2 * m, dtype=np.int64)
        a_tail[0::2], a_tail[1::2] = tails, heads
        a_head[0::2], a_head[1::2] = heads, tails
        order = np.argsort(a_tail, kind="stable")
        ptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(a_tail, minlength=n_nodes), out=ptr[1:])
        self._head = a_head.tolist()
        self._adj = order.tolist()
        self._ptr = ptr.tolist()

    def max_flow(self, source: int, sink: int, init_flow=None, eps: float = 1e-12):
        """Return ``(value, flow)`` with ``flow`` per forward arc.

        ``init_flow`` must be a feasible flow; augmentation continues from it.
        """
        m = self.m
        flow0 = np.zeros(m) if init_flow is None else np.asarray(init_flow, dtype=float)
        res_np = np.empty(2 * m)
        res_np[0::2] = self.cap - flow0
        res_np[1::2] = flow0
        if np.any(res_np < -1e-9):
            raise ValueError("initial flow exceeds a capacity")
        res = np.maximum(res_np, 0.0).tolist()
        head, adj, ptr = self._head, self._adj, self._ptr
        n = self.n
        tol = eps * max(1.0, float(self.cap.max()) if m else 1.0)
        while True:
            level = [-1] * n
            level[source] = 0
            q = deque([source])
            while q:
                u = q.popleft()
                lu = level[u] + 1
                for k in range(ptr[u], ptr[u + 1]):
                    a = adj[k]
                    v = head[a]
                    if level[v] < 0 and res[a] > tol:
                        level[v] = lu
                        q.append(v)
            if level[sink] < 0:
                break
            it = ptr[:-1].copy()
            end = ptr[1:]
            path = []
            u = source
            while True:
                # iterative DFS; after a push we retreat only to the bottleneck
                while u != sink:
                    advanced = False
                    lu = level[u] + 1
                    while it[u] < end[u]:
                        a = adj[it[u]]
                        v = head[a]
                        if res[a] > tol and level[v] == lu:
                            path.append(a)
                            u = v
                            advanced = True
                            break
                        it[u] += 1
                    if not advanced:
                        if u == source:
                            break
                        level[u] = -1           # dead end, prune
                        a = path.pop()
                        u = head[a ^ 1]
                        it[u] += 1
                if u != sink:
                    break
                push = min(res[a] for a in path)
                cut = len(path)
                for k, a in enumerate(path):
                    res[a] -= push
                    res[a ^ 1] += push
                    if cut == len(path) and res[a] <= tol:
                        cut = k
                del path[cut:]
                u = head[path[-1]] if path else source
        res_np = np.asarray(res)
        flow = res_np[1::2]
        flow = np.minimum(flow, self.cap)
        out = np.asarray(self._source_arcs(source))
        value = float(flow[out // 2].sum()) if len(out) else 0.0
        back = [a for a in self._arcs_into(source)]
        if back:
            value -= float(flow[np.asarray(back) // 2].sum())
        return value, flow

    def _integer_round(self, f: np.ndarray, K: float, source: int, sink: int):
        """Augment ``f`` by an integer max flow on residual capacities scaled by K.

        Flooring keeps every arc within capacity. Capacities are also capped at
        INT_BUDGET, which is harmless while the remaining flow times K stays
        below it. Returns None when arcs are parallel or antiparallel.
        """
        tails = np.asarray(self._head)[1::2]
        heads = np.asarray(self._head)[0::2]
        rows = np.concatenate([tails, heads])
        cols = np.concatenate([heads, tails])
        fwd = np.maximum(self.cap - f, 0.0)
        bwd = np.maximum(f, 0.0)
        caps = np.minimum(np.floor(np.concatenate([fwd, bwd]) * K), INT_BUDGET)
        caps = caps.astype(np.int32)
        keep = caps > 0
        C = sp.csr_matrix((caps[keep], (rows[keep], cols[keep])), shape=(self.n, self.n))
        C.sum_duplicates()
        if C.nnz < int(keep.sum()):
            return None
        F = _int_max_flow(C, source, sink, method="dinic").flow.tocsr()
        delta = np.asarray(F[tails, heads]).ravel() / K
        return np.clip(f + delta, 0.0, self.cap)

    def cut_gap(self, source: int, sink: int, flow, tau: float) -> float:
        """Exact (cut capacity - flow value) for the cut reachable through residuals > tau.

        Returns ``inf`` when the sink is reachable. A small value certifies that
        ``flow`` is within that distance of the maximum.
        """
        flow = np.asarray(flow, dtype=float)
        tails = np.asarray(self._head)[1::2]
        heads = np.asarray(self._head)[0::2]
        fwd = self.cap - flow
        mask_f = fwd > tau
        mask_b = flow > tau
        rows = np.concatenate([tails[mask_f], heads[mask_b]])
        cols = np.concatenate([heads[mask_f], tails[mask_b]])
        R = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))
        reach = np.zeros(self.n, dtype=bool)
        reach[breadth_first_order(R, source, directed=True, return_predecessors=False)] = True
        if reach[sink]:
            return np.inf
        leaving = reach[tails] & ~reach[heads]
        entering = ~reach[tails] & reach[heads]
        return float(fwd[leaving].sum() + flow[entering].sum())

    def solve(self, source: int, sink: int, init_flow=None, gap_tol: float = 1e-7,
              max_rounds: int = 8):
        """Maximum flow from ``init_flow`` (or zero).

        Scaled integer rounds refine the flow; each round is checked with an
        exact cut certificate and the loop stops once cut capacity minus flow
        value is within ``gap_tol``. Dinic finishes the job if that never happens.
        """
        f = np.zeros(self.m) if init_flow is None else np.asarray(init_flow, dtype=float)
        if self.m == 0:
            return 0.0, f
        scale = max(1.0, float(self.cap.max()))
        k_max = 1e15 / scale              # finer than this, doubles lose the digits
        out = np.asarray(self._source_arcs(source), dtype=np.int64) // 2
        back = np.asarray(self._arcs_into(source), dtype=np.int64) // 2

        def value(fl):
            return float(fl[out].sum() - fl[back].sum())

        gap = float((self.cap - f)[out].sum() + f[back].sum())
        for _ in range(max_rounds):
            if gap <= 0:
                return value(f), f
            K = min(INT_BUDGET / gap, k_max)
            nxt = self._integer_round(f, K, source, sink)
            if nxt is None:
                break
            f = nxt
            cert = min(self.cut_gap(source, sink, f, t * scale) for t in (1e-15, 1e-12))
            if cert <= gap_tol:
                return value(f), f
            gap = min(2.0 * self.m / K, cert)
        return self.max_flow(source, sink, init_flow=f)

    def _source_arcs(self, source):
        return [a for a in self._adj[self._ptr[source]:self._ptr[source + 1]] if a % 2 == 0]

    def _arcs_into(self, node):
        return [a ^ 1 for a in self._adj[self._ptr[node]:self._ptr[node + 1]] if a % 2 == 1]
