"""Leiden community detection under the Constant Potts Model.

Each pass runs fast local moving, refinement inside every community and
aggregation of the refined partition, repeating on the aggregate graph until
local moving leaves every aggregate node on its own. Passes are repeated from
the previous result until the partition is stable, which yields communities
that are connected and in which no single node can improve the objective by
moving. Small graphs get several randomized restarts (see :func:`leiden`).

With node sizes s and community sizes n, moving node v into community C
changes the objective by w(v, C) - gamma * s_v * n_C relative to v standing
alone, so every decision below compares that quantity.
"""

from __future__ import annotations

import math
import random
from collections import deque

from .graph import Partition, WeightedGraph, cpm_quality, is_connected_community

EPS = 1e-10
THETA = 0.01  # randomness of refinement merges
MOVE_THETA = 0.2  # randomness of the first local-moving sweep on restarts
START_BUDGET = 2000  # restarts scale as START_BUDGET / n, capped below
MAX_STARTS = 8
MAX_PASSES = 100


class _Level:
    """Graph at one aggregation level: node sizes and weighted neighbor dicts."""

    __slots__ = ("n", "size", "adj")

    def __init__(self, n, size, adj):
        self.n = n
        self.size = size
        self.adj = adj


def _sample(options, theta, rng):
    top = max(g for _, g in options)
    weights = [math.exp((g - top) / theta) for _, g in options]
    r = rng.random() * sum(weights)
    acc = 0.0
    for (c, _), w in zip(options, weights):
        acc += w
        if r < acc:
            return c
    return options[-1][0]


def _move_nodes_fast(
    lvl: _Level, memb: list[int], gamma: float, rng: random.Random, theta: float = 0.0
) -> list[int]:
    n = lvl.n
    memb = list(Partition(memb).labels)
    csize = [0.0] * (n + 1)
    for v in range(n):
        csize[memb[v]] += lvl.size[v]
    empty = [c for c in range(n + 1) if csize[c] == 0]

    order = list(range(n))
    rng.shuffle(order)
    queue = deque(order)
    queued = [True] * n
    while queue:
        v = queue.popleft()
        queued[v] = False
        cur = memb[v]
        sv = lvl.size[v]
        links: dict[int, float] = {}
        for u, w in lvl.adj[v].items():
            links[memb[u]] = links.get(memb[u], 0.0) + w
        stay = links.get(cur, 0.0) - gamma * sv * (csize[cur] - sv)
        options = []
        for c in sorted(links):
            if c == cur:
                continue
            gain = links[c] - gamma * sv * csize[c]
            if gain > stay + EPS:
                options.append((c, gain))
        # an empty community scores 0
        if csize[cur] > sv and 0.0 > stay + EPS:
            options.append((empty[-1], 0.0))
        best = cur
        if options:
            best = _sample(options, theta, rng) if theta > 0 else max(options, key=lambda o: o[1])[0]
        if best == cur:
            continue
        if csize[best] == 0:
            empty.pop()  # best was taken from the top of the stack
        csize[cur] -= sv
        if csize[cur] == 0:
            empty.append(cur)
        csize[best] += sv
        memb[v] = best
        for u in lvl.adj[v]:
            if memb[u] != best and not queued[u]:
                queued[u] = True
                queue.append(u)
    return memb


def _refine(lvl: _Level, memb: list[int], gamma: float, rng: random.Random) -> list[int]:
    n = lvl.n
    ref = list(range(n))
    rsize = list(lvl.size)
    singleton = [True] * n
    csize: dict[int, float] = {}
    for v in range(n):
        csize[memb[v]] = csize.get(memb[v], 0.0) + lvl.size[v]
    # weight from each refined community to the rest of its parent community
    rext = [0.0] * n
    for v in range(n):
        rext[v] = sum(w for u, w in lvl.adj[v].items() if memb[u] == memb[v])

    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(memb[v], []).append(v)

    for c in sorted(groups):
        nodes = groups[c]
        if len(nodes) == 1:
            continue
        nc = csize[c]
        rng.shuffle(nodes)
        for v in nodes:
            if not singleton[v]:
                continue
            sv = lvl.size[v]
            if rext[v] < gamma * sv * (nc - sv) - EPS:
                continue
            links: dict[int, float] = {}
            for u, w in lvl.adj[v].items():
                if memb[u] == c and ref[u] != ref[v]:
                    links[ref[u]] = links.get(ref[u], 0.0) + w
            options = []
            for t in sorted(links):
                nt = rsize[t]
                if rext[t] < gamma * nt * (nc - nt) - EPS:
                    continue
                gain = links[t] - gamma * sv * nt
                if gain > EPS:
                    options.append((t, gain))
            if not options:
                continue
            chosen = _sample(options, THETA, rng)
            old = ref[v]
            rext[chosen] = rext[chosen] + rext[v] - 2.0 * links[chosen]
            rsize[chosen] += sv
            rsize[old] -= sv
            ref[v] = chosen
            singleton[v] = False
            singleton[chosen] = False
    return ref


def _aggregate(lvl: _Level, ref: list[int]) -> tuple[_Level, list[int]]:
    """Collapse refined communities into nodes; returns the new level and the node map."""
    remap: dict[int, int] = {}
    node_of = []
    for v in range(lvl.n):
        if ref[v] not in remap:
            remap[ref[v]] = len(remap)
        node_of.append(remap[ref[v]])
    m = len(remap)
    size = [0.0] * m
    adj: list[dict[int, float]] = [dict() for _ in range(m)]
    for v in range(lvl.n):
        a = node_of[v]
        size[a] += lvl.size[v]
        for u, w in lvl.adj[v].items():
            b = node_of[u]
            if a != b:
                adj[a][b] = adj[a].get(b, 0.0) + w
    return _Level(m, size, adj), node_of


def _pass(
    g: WeightedGraph, start: list[int], gamma: float, rng: random.Random, move_theta: float = 0.0
) -> list[int]:
    lvl = _Level(g.n, [1.0] * g.n, [dict(a) for a in g.adj])
    memb = list(start)
    node_of_orig = list(range(g.n))
    first = len(set(start)) == g.n
    while True:
        memb = _move_nodes_fast(lvl, memb, gamma, rng, move_theta if first else 0.0)
        first = False
        if len(set(memb)) == lvl.n:
            break
        ref = _refine(lvl, memb, gamma, rng)
        new_lvl, node_of = _aggregate(lvl, ref)
        if new_lvl.n == lvl.n:
            # refinement merged nothing: collapse whole communities instead
            new_lvl, node_of = _aggregate(lvl, memb)
        agg_memb = [0] * new_lvl.n
        for v in range(lvl.n):
            agg_memb[node_of[v]] = memb[v]
        node_of_orig = [node_of[x] for x in node_of_orig]
        lvl, memb = new_lvl, agg_memb
    return [memb[node_of_orig[v]] for v in range(g.n)]


def _split_disconnected(g: WeightedGraph, p: Partition) -> Partition:
    labels = list(p.labels)
    nxt = p.k
    for members in p.communities():
        if is_connected_community(g, members):
            continue
        inside = set(members)
        seen: set[int] = set()
        first = True
        for s in members:
            if s in seen:
                continue
            comp, stack = [s], [s]
            seen.add(s)
            while stack:
                v = stack.pop()
                for u, w in g.adj[v].items():
                    if w > 0 and u in inside and u not in seen:
                        seen.add(u)
                        comp.append(u)
                        stack.append(u)
            if first:
                first = False
                continue
            for v in comp:
                labels[v] = nxt
            nxt += 1
    return Partition(labels)


def best_single_move(g: WeightedGraph, p: Partition, gamma: float) -> tuple[float, int, int]:
    """Largest objective gain available from moving one node (to another or a new community)."""
    sizes = p.sizes()
    best = (0.0, -1, -1)
    for v in range(g.n):
        cur = p[v]
        links: dict[int, float] = {}
        for u, w in g.adj[v].items():
            links[p[u]] = links.get(p[u], 0.0) + w
        stay = links.get(cur, 0.0) - gamma * (sizes[cur] - 1)
        if sizes[cur] > 1 and -stay > best[0]:
            best = (-stay, v, p.k)
        for c, w in links.items():
            if c != cur and w - gamma * sizes[c] - stay > best[0]:
                best = (w - gamma * sizes[c] - stay, v, c)
    return best


def _leiden_once(g: WeightedGraph, gamma: float, rng: random.Random, move_theta: float):
    current = Partition.singletons(g.n)
    quality = cpm_quality(g, current, gamma)
    for _ in range(MAX_PASSES):
        nxt = Partition(_pass(g, list(current.labels), gamma, rng, move_theta))
        nxt = _split_disconnected(g, nxt)
        q = cpm_quality(g, nxt, gamma)
        assert q >= quality - 1e-9 * max(1.0, abs(quality)), "CPM quality decreased between passes"
        if nxt == current:
            break
        current, quality = nxt, q
    return current, quality


def default_starts(n: int) -> int:
    return max(1, min(MAX_STARTS, START_BUDGET // max(n, 1)))


def leiden(g: WeightedGraph, gamma: float, seed: int = 0, starts: int | None = None) -> Partition:
    """Best-quality partition over ``starts`` Leiden runs driven by one seeded RNG.

    The first run is plain Leiden from singletons. Later runs randomize the very
    first local-moving sweep (improving moves sampled with weight
    exp(gain / MOVE_THETA) instead of always taking the best), which lets them
    settle in different local optima. Every run iterates passes until the
    partition is stable.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    rng = random.Random(seed)
    if starts is None:
        starts = default_starts(g.n)
    best, best_q = None, 0.0
    for k in range(max(1, starts)):
        p, q = _leiden_once(g, gamma, rng, 0.0 if k == 0 else MOVE_THETA)
        if best is None or q > best_q + EPS:
            best, best_q = p, q
    return best
