"""Independent reference implementations used only by the tests.

None of these import the code paths they check; they re-derive results
from first principles (Dijkstra with a heap, exhaustive enumeration,
direct formula evaluation).
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

INF = math.inf
DELTAS = ((0, 0), (0, -1), (0, 1), (-1, 0), (1, 0))


def dijkstra(blocked: np.ndarray, goal):
    """Unit-weight Dijkstra from ``goal``; returns float array with inf for unreachable/blocked."""
    h, w = blocked.shape
    dist = np.full((h, w), INF)
    gx, gy = goal
    dist[gy, gx] = 0.0
    heap = [(0.0, gx, gy)]
    while heap:
        d, x, y = heapq.heappop(heap)
        if d > dist[y, x]:
            continue
        for dx, dy in DELTAS[1:]:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and not blocked[ny, nx] and d + 1 < dist[ny, nx]:
                dist[ny, nx] = d + 1
                heapq.heappush(heap, (d + 1, nx, ny))
    return dist


def intended(blocked, pos, action):
    h, w = blocked.shape
    dx, dy = DELTAS[action]
    x, y = pos[0] + dx, pos[1] + dy
    if 0 <= x < w and 0 <= y < h and not blocked[y, x]:
        return (x, y)
    return None


def check_resolution(blocked, before, actions, after, priority=None):
    """Violations of the documented conflict rule for one executed step.

    Checks safety (no vertex/swap conflicts, unit moves onto free cells) and
    that every agent's outcome is mandated given everyone else's outcome:
    movers move exactly to their intended cell; a frozen agent with a valid
    intended move must be blocked by a swap intention with another mover,
    or by its target being finally held by another agent that is either a
    stayer or a higher-priority mover.
    """
    n = len(before)
    prio = list(range(n)) if priority is None else list(priority)
    rank = {a: r for r, a in enumerate(prio)}
    out = []
    if len(set(after)) != n:
        out.append("vertex conflict")
    for i in range(n):
        for j in range(i + 1, n):
            if after[i] == before[j] and after[j] == before[i] and before[i] != before[j] and after[i] != before[i]:
                out.append(f"swap {i}<->{j}")
    targets = [intended(blocked, before[i], actions[i]) for i in range(n)]
    moved = [after[i] != before[i] for i in range(n)]
    for i in range(n):
        t = targets[i]
        if moved[i]:
            if after[i] != t:
                out.append(f"agent {i} moved to {after[i]} instead of {t}")
            continue
        if t is None or t == before[i]:
            continue
        j_at = next((j for j in range(n) if j != i and before[j] == t), None)
        swap = j_at is not None and targets[j_at] == before[i]
        holder = next((j for j in range(n) if j != i and after[j] == t), None)
        blocked_by_holder = holder is not None and (not moved[holder] or rank[holder] < rank[i])
        if not (swap or blocked_by_holder):
            out.append(f"agent {i} frozen without a mandated reason")
    return out


def exhaustive_resolution(blocked, before, actions, priority=None):
    """All move subsets that satisfy :func:`check_resolution`; the rule should admit exactly one."""
    n = len(before)
    targets = [intended(blocked, before[i], actions[i]) for i in range(n)]
    movers = [i for i in range(n) if targets[i] is not None and targets[i] != before[i]]
    sols = []
    for mask in itertools.product((False, True), repeat=len(movers)):
        after = list(before)
        for i, m in zip(movers, mask):
            if m:
                after[i] = targets[i]
        if not check_resolution(blocked, before, actions, after, priority):
            sols.append(after)
    return sols


def puct_argmax(N, Q, P, c):
    """Brute-force argmax of Q + c * P * sqrt(sum N) / (1 + N), sqrt term 1 when sum N is 0."""
    total = sum(N)
    root = math.sqrt(total) if total > 0 else 1.0
    best, best_i = -INF, None
    for i, (n, q, p) in enumerate(zip(N, Q, P)):
        s = q + c * p * root / (1 + n)
        if s > best:
            best, best_i = s, i
    return best_i


def minmax_normalized(Q, N, lo, hi):
    if not hi > lo:
        return [0.0] * len(Q)
    return [(q - lo) / (hi - lo) if n > 0 else 0.0 for q, n in zip(Q, N)]


def g_return(rewards, leaf_value, gamma, k):
    """Direct evaluation of the discounted return from depth ``k`` of a length-l path.

    ``rewards[t]`` is r_{t+1}; the result is
    sum_{tau=0}^{l-1-k} gamma^tau r_{k+1+tau} + gamma^(l-k) v.
    """
    l = len(rewards)
    total = sum(gamma ** tau * rewards[k + tau] for tau in range(l - k))
    return total + gamma ** (l - k) * leaf_value


def geometric_value(d, gamma, r=1.0):
    """Sum of r * gamma^t for t < d, term by term."""
    return sum(r * gamma ** t for t in range(d))


def history_value(d, best, gamma, r=1.0):
    """Reward still collectable from distance d when only distances below ``best`` pay."""
    b = min(best, d)
    return gamma ** (d - b) * geometric_value(b, gamma, r)


def interaction_components(blocked, before, actions):
    """Groups of agents whose outcomes can depend on each other in one step.

    Two agents interact when one's intended cell is the other's current or
    intended cell; outcomes in different groups are independent.
    """
    n = len(before)
    targets = [intended(blocked, before[i], actions[i]) for i in range(n)]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(n):
            if i != j and targets[i] is not None and targets[i] in (before[j], targets[j]):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def componentwise_resolution(blocked, before, actions, priority=None):
    """All rule-consistent outcomes, enumerating mover subsets per interaction group."""
    n = len(before)
    prio = list(range(n)) if priority is None else list(priority)
    per_group = []
    for group in interaction_components(blocked, before, actions):
        order = [group.index(a) for a in prio if a in group]
        sols = exhaustive_resolution(blocked, [before[i] for i in group], [actions[i] for i in group], order)
        per_group.append((group, sols))
    out = []
    for combo in itertools.product(*[sols for _, sols in per_group]):
        after = list(before)
        for (group, _), sol in zip(per_group, combo):
            for i, cell in zip(group, sol):
                after[i] = cell
        out.append(after)
    return out


def joint_plan_length(blocked, starts, goals, horizon):
    """Shortest conflict-free joint schedule after which every agent has visited its goal.

    Breadth-first search over (positions, visited flags); each step picks any
    action per agent with no vertex or swap conflict. Returns ``None`` when
    no schedule fits in ``horizon`` steps.
    """
    n = len(starts)
    start = (tuple(starts), tuple(s == g for s, g in zip(starts, goals)))
    frontier, seen = [start], {start}
    for t in range(horizon + 1):
        nxt = []
        for pos, done in frontier:
            if all(done):
                return t
            options = [[c for c in (intended(blocked, p, a) for a in range(5)) if c is not None] for p in pos]
            for after in itertools.product(*options):
                if len(set(after)) < n:
                    continue
                if any(after[i] == pos[j] and after[j] == pos[i] and i != j and pos[i] != after[i]
                       for i in range(n) for j in range(n)):
                    continue
                state = (after, tuple(d or a == g for d, a, g in zip(done, after, goals)))
                if state not in seen:
                    seen.add(state)
                    nxt.append(state)
        frontier = nxt
    return None
