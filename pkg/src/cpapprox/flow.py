"""Transport feasibility for the Prokhorov coupling test.

Given atoms ``x`` (masses ``a``) and ``y`` (masses ``b``), both sorted, the
question is how much mass can be moved from ``x`` to ``y`` using only
pairs with ``|x_i - y_k| <= eps``.  Two solvers answer it:

* :func:`dinic_transport` - Dinic max-flow on the bipartite graph with
  integer capacities (masses scaled by ``2**60``), exact up to that scaling.
* :func:`interval_transport` - a linear-time greedy.  On the line every
  atom's admissible partners form an interval whose two ends move right
  with the atom, and sending each ``x_i`` to the leftmost partner still
  holding mass is optimal for such graphs.
"""

from __future__ import annotations

from collections import deque

import numpy as np

SCALE = 1 << 60


def _admissible_ranges(x, y, eps):
    tol = 1e-12 * np.maximum(1.0, np.abs(x))
    left = np.searchsorted(y, x - eps - tol, side="left")
    right = np.searchsorted(y, x + eps + tol, side="right")
    return left, right


def interval_transport(x, a, y, b, eps, *, pairs: bool = False):
    """Maximal transported mass within distance ``eps`` (greedy, exact on the line)."""
    left, right = _admissible_ranges(x, y, eps)
    rem = np.array(b, dtype=np.float64)
    total = 0.0
    out = []
    k = 0
    for i in range(len(x)):
        need = float(a[i])
        k = max(k, int(left[i]))
        r = int(right[i])
        while need > 0 and k < r:
            take = min(need, rem[k])
            if take > 0:
                rem[k] -= take
                need -= take
                total += take
                if pairs:
                    out.append((i, k, take))
            if rem[k] <= 0:
                k += 1
        # k now points at the first partner with mass left; keep it for x_{i+1}
    return (total, out) if pairs else total


class _Dinic:
    __slots__ = ("n", "head", "to", "cap", "nxt")

    def __init__(self, n: int):
        self.n = n
        self.head = [-1] * n
        self.to: list[int] = []
        self.cap: list[int] = []
        self.nxt: list[int] = []

    def add_edge(self, u: int, v: int, c: int) -> int:
        e = len(self.to)
        self.to += [v, u]
        self.cap += [c, 0]
        self.nxt += [self.head[u], self.head[v]]
        self.head[u] = e
        self.head[v] = e + 1
        return e

    def _levels(self, s, t):
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            e = self.head[u]
            while e != -1:
                v = self.to[e]
                if self.cap[e] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    q.append(v)
                e = self.nxt[e]
        return level if level[t] >= 0 else None

    def max_flow(self, s: int, t: int) -> int:
        flow = 0
        while (level := self._levels(s, t)) is not None:
            it = list(self.head)
            while True:
                pushed = self._augment(s, t, level, it)
                if not pushed:
                    break
                flow += pushed
        return flow

    def _augment(self, s, t, level, it):
        # iterative DFS along the level graph; returns the bottleneck pushed
        path = []
        u = s
        while True:
            if u == t:
                f = min(self.cap[e] for e in path)
                for e in path:
                    self.cap[e] -= f
                    self.cap[e ^ 1] += f
                return f
            e = it[u]
            while e != -1 and not (self.cap[e] > 0 and level[self.to[e]] == level[u] + 1):
                e = self.nxt[e]
            it[u] = e
            if e == -1:
                if u == s:
                    return 0
                level[u] = -1
                back = path.pop()
                u = self.to[back ^ 1]
                it[u] = self.nxt[it[u]]
                continue
            path.append(e)
            u = self.to[e]


def dinic_transport(x, a, y, b, eps, *, pairs: bool = False):
    """Maximal transported mass within distance ``eps`` via integer max-flow."""
    m, n = len(x), len(y)
    s, t = m + n, m + n + 1
    g = _Dinic(m + n + 2)
    ca = [int(round(float(w) * SCALE)) for w in a]
    cb = [int(round(float(w) * SCALE)) for w in b]
    for i, c in enumerate(ca):
        g.add_edge(s, i, c)
    for k, c in enumerate(cb):
        g.add_edge(m + k, t, c)
    left, right = _admissible_ranges(x, y, eps)
    inf = sum(ca) + 1
    mid = []
    for i in range(m):
        for k in range(int(left[i]), int(right[i])):
            mid.append((i, k, g.add_edge(i, m + k, inf)))
    total = g.max_flow(s, t) / SCALE
    if not pairs:
        return total
    used = [(i, k, g.cap[e ^ 1] / SCALE) for i, k, e in mid if g.cap[e ^ 1] > 0]
    return total, used
