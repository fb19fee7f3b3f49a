"""Intrinsic MDP built from one agent's egocentric view.

The simulated world holds the full static map and only the agents the ego
agent currently sees. Branching is restricted to the ``K`` agents closest
to the ego agent (in-window BFS); every other simulated agent follows its
most probable policy action.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .costmap import CostField, CostFieldCache, LocalView, observe
from .grid import Cell, GridMap
from .policy import Policy, reward
from .world import resolve_moves


@dataclass(frozen=True, eq=False)
class IMDPState:
    """Simulated arrangement of the visible agents; index 0 is the ego agent.

    Positions are flat cell indices. ``best`` holds each agent's best
    distance to its goal since the IMDP was built; ``order`` lists agent
    indices by ascending world id, the conflict-resolution priority.
    """

    grid: GridMap
    ids: tuple[int, ...]
    positions: tuple[int, ...]
    goals: tuple[Cell, ...]
    best: tuple[int, ...]
    fields: tuple[CostField, ...]
    order: tuple[int, ...]
    step_in_sim: int = 0
    fov: int = 11

    @property
    def n_agents(self) -> int:
        return len(self.ids)

    def cells(self) -> list[Cell]:
        return [self.grid.cell(p) for p in self.positions]

    def dist(self, k: int) -> int:
        return int(self.fields[k].flat[self.positions[k]])

    def view_of(self, k: int) -> LocalView:
        """The view agent ``k`` would have inside the simulation."""
        cells = self.cells()
        m = self.fov
        r = m // 2
        cx, cy = cells[k]
        others = {
            self.ids[j]: (cells[j], self.goals[j])
            for j in range(self.n_agents)
            if j != k and abs(cells[j][0] - cx) <= r and abs(cells[j][1] - cy) <= r
        }
        return LocalView(self.grid, self.ids[k], cells[k], self.goals[k], others, m)


def build_imdp(view: LocalView, fields: CostFieldCache | None = None, m: int | None = None) -> IMDPState:
    m = view.fov if m is None else m
    grid = view.grid
    if fields is None:
        fields = CostFieldCache(grid)
    r = m // 2
    agents = [(view.agent_id, view.pos, view.goal)]
    for aid in sorted(view.others):
        pos, goal = view.others[aid]
        if aid != view.agent_id and abs(pos[0] - view.pos[0]) <= r and abs(pos[1] - view.pos[1]) <= r:
            agents.append((aid, pos, goal))
    cfs = tuple(fields(g) for _, _, g in agents)
    ids = tuple(a[0] for a in agents)
    return IMDPState(
        grid=grid,
        ids=ids,
        positions=tuple(grid.index(p) for _, p, _ in agents),
        goals=tuple(g for _, _, g in agents),
        best=tuple(cf[p] for cf, (_, p, _) in zip(cfs, agents)),
        fields=cfs,
        order=tuple(sorted(range(len(ids)), key=ids.__getitem__)),
        fov=m,
    )


def window_bfs(grid: GridMap, center: Cell, m: int) -> dict[int, int]:
    """Distances (flat index -> steps) from ``center`` through free cells of its window."""
    r = m // 2
    cx, cy = center
    moves = grid.move_lists
    w = grid.width
    start = grid.index(center)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in moves[cur][1:]:
            if nxt < 0 or nxt in dist:
                continue
            y, x = divmod(nxt, w)
            if abs(x - cx) <= r and abs(y - cy) <= r:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


def proximal_agents(state: IMDPState, K: int) -> list[int]:
    """World ids of the ``K`` agents nearest the ego agent, ego first.

    Nearness is BFS distance inside the ego window; agents not reachable
    inside the window rank after all reachable ones. Ties go to lower ids.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    ego = state.positions[0]
    d = window_bfs(state.grid, state.grid.cell(ego), state.fov)
    far = float("inf")
    ranked = sorted(range(1, state.n_agents), key=lambda k: (d.get(state.positions[k], far), state.ids[k]))
    return [state.ids[0]] + [state.ids[k] for k in ranked[:K - 1]]


class PolicyTable:
    """Memoised policy outputs for agents inside IMDPs.

    For policies that ignore the agents matrix the output depends only on
    (position, goal), so it is cached under that key. Other policies are
    evaluated on the simulated agent's full view every time.
    """

    def __init__(self, grid: GridMap, fields: CostFieldCache, policy: Policy, fov: int = 11):
        self.grid = grid
        self.fields = fields
        self.policy = policy
        self.fov = fov
        self._cache: dict[tuple[int, Cell], tuple] = {}

    def _pack(self, out, pos: int):
        priors = np.asarray(out.priors, dtype=np.float64)
        va = valid_actions(self.grid, pos)
        return priors, float(out.value), int(np.argmax(priors)), va, priors[list(va)]

    def lookup(self, state: IMDPState, k: int) -> tuple:
        """``(priors, value, argmax, valid_actions, priors_of_valid_actions)`` for agent ``k``."""
        pos = state.positions[k]
        if self.policy.uses_agents:
            return self._pack(self.policy.evaluate(observe(state.view_of(k), self.fields)), pos)
        key = (pos, state.goals[k])
        hit = self._cache.get(key)
        if hit is None:
            view = LocalView(self.grid, state.ids[k], self.grid.cell(pos), key[1], {}, self.fov)
            hit = self._cache[key] = self._pack(self.policy.evaluate(observe(view, self.fields)), pos)
        return hit


class JointActionSet:
    """Masked joint actions of one IMDP state with their normalised priors.

    Edge ``e`` decodes in mixed radix over the proximal agents' valid action
    lists, first proximal agent most significant (C order of the outer
    product of their priors).
    """

    __slots__ = ("proximal", "valid", "base", "priors")

    def __init__(self, proximal: tuple[int, ...], valid: tuple[tuple[int, ...], ...], base: list[int], priors: np.ndarray):
        self.proximal = proximal
        self.valid = valid
        self.base = base
        self.priors = priors

    def __len__(self):
        return len(self.priors)

    def decode(self, e: int) -> tuple[int, ...]:
        acts = list(self.base)
        for k, va in zip(reversed(self.proximal), reversed(self.valid)):
            e, i = divmod(e, len(va))
            acts[k] = va[i]
        return tuple(acts)

    def items(self) -> list[tuple[tuple[int, ...], float]]:
        return [(self.decode(e), float(p)) for e, p in enumerate(self.priors)]


def valid_actions(grid: GridMap, pos: int) -> tuple[int, ...]:
    """Actions from flat cell ``pos`` that stay on free cells."""
    return grid.valid_action_lists[pos]


def joint_actions(state: IMDPState, proximal: Sequence[int], table: PolicyTable) -> JointActionSet:
    """Enumerate joint actions; ``proximal`` holds simulated-agent indices."""
    prox = tuple(proximal)
    prox_set = set(prox)
    base = [0] * state.n_agents
    distant_factor = 1.0
    for k in range(state.n_agents):
        if k not in prox_set:
            priors, _, best, _, _ = table.lookup(state, k)
            base[k] = best
            distant_factor *= priors[best]
    valid = []
    joint = None
    for k in prox:
        _, _, _, va, pv = table.lookup(state, k)
        valid.append(va)
        joint = pv if joint is None else np.multiply.outer(joint, pv).ravel()
    joint = joint * distant_factor
    total = joint.sum()
    joint = joint / total if total > 0 else np.full(len(joint), 1.0 / len(joint))
    return JointActionSet(prox, tuple(valid), base, joint)


def imdp_step(state: IMDPState, joint: Sequence[int], r: float = 1.0) -> tuple[IMDPState, float]:
    """Apply ``joint`` (one action per simulated agent) and return the summed reward.

    Agents keep their goals on arrival; the running-minimum history means a
    parked agent earns nothing further.
    """
    new_pos = resolve_moves(state.grid.move_lists, state.positions, joint, state.order)
    total = 0.0
    best = list(state.best)
    for k, p in enumerate(new_pos):
        d = int(state.fields[k].flat[p])
        gain = reward(best[k], d, r)
        if gain:
            total += gain
            best[k] = d
    nxt = IMDPState(
        grid=state.grid,
        ids=state.ids,
        positions=tuple(new_pos),
        goals=state.goals,
        best=tuple(best),
        fields=state.fields,
        order=state.order,
        step_in_sim=state.step_in_sim + 1,
        fov=state.fov,
    )
    return nxt, total
