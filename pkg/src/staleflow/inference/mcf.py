"""Exact minimum-cost circulation on integer networks.

Negative-cost arcs must have finite capacity. They are saturated up front,
which leaves a residual graph with non-negative costs and a set of node
imbalances; the imbalances are then cancelled by successive shortest paths
(Dijkstra on reduced costs) with blocking-flow augmentation over the
zero-reduced-cost subgraph.
"""

from __future__ import annotations

from collections import deque
from heapq import heapify, heappop, heappush

UNBOUNDED = 1 << 62
_INF = float("inf")


class FlowNetwork:
    """Residual-graph network; arc ``a`` and its reverse ``a ^ 1`` are paired."""

    def __init__(self, num_nodes: int = 0):
        self.num_nodes = num_nodes
        self.adj: list[list[int]] = [[] for _ in range(num_nodes)]
        self.to: list[int] = []
        self.rcap: list[int] = []
        self.cost: list[int] = []
        self.capacity: list[int] = []  # indexed by forward arc // 2
        self.circulation_arc: int | None = None
        self.solved = False

    def add_node(self) -> int:
        self.adj.append([])
        self.num_nodes += 1
        return self.num_nodes - 1

    def add_arc(self, u: int, v: int, capacity: int = UNBOUNDED, cost: int = 0) -> int:
        if capacity < 0:
            raise ValueError("negative capacity")
        if cost < 0 and capacity >= UNBOUNDED:
            raise ValueError("negative-cost arcs need a finite capacity")
        a = len(self.to)
        self.to += (v, u)
        self.rcap += (capacity, 0)
        self.cost += (cost, -cost)
        self.capacity.append(capacity)
        self.adj[u].append(a)
        self.adj[v].append(a + 1)
        return a

    def tail(self, a: int) -> int:
        return self.to[a ^ 1]

    def flow(self, a: int) -> int:
        return self.rcap[a ^ 1]

    def arcs(self):
        """Yield (arc, from, to, capacity, cost, flow) for every forward arc."""
        for a in range(0, len(self.to), 2):
            yield a, self.to[a + 1], self.to[a], self.capacity[a >> 1], self.cost[a], self.rcap[a + 1]

    def total_cost(self) -> int:
        cost, rcap = self.cost, self.rcap
        return sum(cost[a] * rcap[a + 1] for a in range(0, len(cost), 2))

    def node_balance(self, v: int) -> int:
        """Inflow minus outflow at ``v``; zero everywhere for a circulation."""
        bal = 0
        for a in self.adj[v]:
            if a & 1:
                bal += self.rcap[a]  # reverse arc of an arc entering v
            else:
                bal -= self.rcap[a ^ 1]
        return bal


def solve_min_cost_flow(net: FlowNetwork) -> FlowNetwork:
    """Turn ``net`` (zero initial flow) into a minimum-cost circulation in place."""
    n = net.num_nodes
    to, rcap, cost, adj = net.to, net.rcap, net.cost, net.adj
    excess = [0] * n
    for a in range(0, len(to), 2):
        if cost[a] < 0 and rcap[a] > 0:
            c = rcap[a]
            rcap[a] = 0
            rcap[a + 1] += c
            excess[to[a]] += c
            excess[to[a + 1]] -= c
    pot = [0] * n
    remaining = sum(e for e in excess if e > 0)
    while remaining > 0:
        if not _dijkstra(n, adj, to, rcap, cost, pot, excess):
            raise RuntimeError("imbalance cannot be routed; network is infeasible")
        remaining -= _blocking_flows(n, adj, to, rcap, cost, pot, excess)
    net.solved = True
    return net


def _dijkstra(n, adj, to, rcap, cost, pot, excess) -> bool:
    dist = [_INF] * n
    heap = []
    for v in range(n):
        if excess[v] > 0:
            dist[v] = 0
            heap.append((0, v))
    heapify(heap)
    dstar = None
    while heap:
        d, u = heappop(heap)
        if d > dist[u]:
            continue
        if excess[u] < 0:
            dstar = d
            break
        base = d + pot[u]
        for a in adj[u]:
            if rcap[a]:
                v = to[a]
                nd = base + cost[a] - pot[v]
                if nd < dist[v]:
                    dist[v] = nd
                    heappush(heap, (nd, v))
    if dstar is None:
        return False
    for v in range(n):
        dv = dist[v]
        pot[v] += dv if dv < dstar else dstar
    return True


def _blocking_flows(n, adj, to, rcap, cost, pot, excess) -> int:
    """Augment along zero-reduced-cost paths until none remain; returns units moved."""
    moved = 0
    while True:
        level = [-1] * n
        queue = deque()
        for v in range(n):
            if excess[v] > 0:
                level[v] = 0
                queue.append(v)
        sources = list(queue)
        reached = False
        while queue:
            u = queue.popleft()
            if excess[u] < 0:
                reached = True
                continue
            lu = level[u] + 1
            pu = pot[u]
            for a in adj[u]:
                if rcap[a]:
                    v = to[a]
                    if level[v] < 0 and cost[a] + pu == pot[v]:
                        level[v] = lu
                        queue.append(v)
        if not reached:
            return moved
        it = [0] * n
        for s in sources:
            while excess[s] > 0:
                path = []
                u = s
                while excess[u] >= 0 or u == s:
                    lst = adj[u]
                    i = it[u]
                    lu = level[u] + 1
                    pu = pot[u]
                    while i < len(lst):
                        a = lst[i]
                        v = to[a]
                        if rcap[a] and level[v] == lu and cost[a] + pu == pot[v]:
                            break
                        i += 1
                    it[u] = i
                    if i < len(lst):
                        path.append(lst[i])
                        u = to[lst[i]]
                    else:
                        level[u] = -2  # dead end for the rest of this phase
                        if not path:
                            break
                        a = path.pop()
                        u = to[a ^ 1]
                        it[u] += 1
                if not path:
                    break
                t = u
                push = min(excess[s], -excess[t])
                for a in path:
                    if rcap[a] < push:
                        push = rcap[a]
                for a in path:
                    rcap[a] -= push
                    rcap[a ^ 1] += push
                excess[s] -= push
                excess[t] += push
                moved += push
