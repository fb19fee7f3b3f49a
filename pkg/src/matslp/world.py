"""Ground-truth lifelong MAPF environment.

All agents act synchronously. Proposed moves go through
:func:`resolve_moves`, which freezes agents instead of ever producing a
vertex or swap conflict. An agent that arrives at its goal is credited and
immediately handed a fresh goal by the external assigner.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .costmap import UNREACHABLE, CostFieldCache, LocalView, in_window
from .grid import Action, Cell, GridMap


def resolve_moves(
    moves: Sequence[Sequence[int]],
    positions: Sequence[int],
    actions: Sequence[int],
    order: Sequence[int] | None = None,
) -> list[int]:
    """Final flat positions after conflict resolution.

    ``moves`` is :attr:`GridMap.move_lists`. ``order`` lists agent indices in
    commit priority (default: index order). An agent is frozen when its
    destination is blocked or off-grid, when it and another mover intend to
    swap, when its destination is the cell of an agent that ends up staying,
    or when a higher-priority mover claims the same destination. Freezing is
    iterated to a fixed point; chains into vacated cells and rotations of
    three or more agents are allowed.
    """
    n = len(positions)
    if order is None:
        order = range(n)
    target = [moves[p][a] for p, a in zip(positions, actions)]
    moving = [t >= 0 and t != p for t, p in zip(target, positions)]
    occupant = {p: i for i, p in enumerate(positions)}
    for i in range(n):
        if moving[i]:
            j = occupant.get(target[i])
            if j is not None and moving[j] and target[j] == positions[i]:
                moving[i] = moving[j] = False
    changed = True
    while changed:
        changed = False
        stay = {positions[i] for i in range(n) if not moving[i]}
        claimed = set()
        for i in order:
            if not moving[i]:
                continue
            t = target[i]
            if t in stay or t in claimed:
                moving[i] = False
                changed = True
            else:
                claimed.add(t)
    return [target[i] if moving[i] else positions[i] for i in range(n)]


@dataclass
class AgentState:
    id: int
    pos: Cell
    goal: Cell | None = None
    best_dist: int = 0
    goals_completed: int = 0


@dataclass(frozen=True)
class GoalReached:
    agent_id: int
    cell: Cell
    time: int
    new_goal: Cell


@dataclass(frozen=True, eq=False)
class Instance:
    """Map, start cells and the seed of the goal stream.

    ``goal_pool`` restricts goal sampling (warehouse rule); ``goals`` pins the
    first goal of each agent, otherwise it is drawn from the stream.
    """

    grid: GridMap
    starts: tuple[Cell, ...]
    seed: int = 0
    goal_pool: tuple[Cell, ...] | None = None
    goals: tuple[Cell, ...] | None = None
    map_id: str = ""
    family: str = ""

    @property
    def n_agents(self) -> int:
        return len(self.starts)

    def to_json(self) -> str:
        doc = {
            "map_id": self.map_id,
            "family": self.family,
            "seed": self.seed,
            "map": self.grid.to_text().splitlines(),
            "agents": [[i, x, y] for i, (x, y) in enumerate(self.starts)],
        }
        if self.goals is not None:
            doc["goals"] = [list(g) for g in self.goals]
        if self.goal_pool is not None:
            doc["goal_pool"] = [list(g) for g in self.goal_pool]
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        doc = json.loads(text)
        grid = GridMap.from_text("\n".join(doc["map"]), name=doc.get("map_id", ""))
        agents = sorted(doc["agents"])
        if [a[0] for a in agents] != list(range(len(agents))):
            raise ValueError("agent ids must be 0..n-1")
        pool = doc.get("goal_pool")
        goals = doc.get("goals")
        return cls(
            grid=grid,
            starts=tuple((x, y) for _, x, y in agents),
            seed=int(doc.get("seed", 0)),
            goal_pool=None if pool is None else tuple(tuple(c) for c in pool),
            goals=None if goals is None else tuple(tuple(c) for c in goals),
            map_id=doc.get("map_id", ""),
            family=doc.get("family", ""),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "Instance":
        return cls.from_json(Path(path).read_text())


def validate_instance(grid: GridMap, agents: Sequence[AgentState]) -> list[str]:
    """Human-readable violations; an empty list means the instance is valid."""
    problems = []
    seen: dict[Cell, int] = {}
    for a in agents:
        for what, cell in (("start", a.pos), ("goal", a.goal)):
            if cell is None:
                continue
            if not grid.in_bounds(cell):
                problems.append(f"agent {a.id}: {what} {cell} out of bounds")
            elif not grid.is_free(cell):
                problems.append(f"agent {a.id}: {what} blocked at {cell}")
        if a.pos in seen:
            problems.append(f"agent {a.id}: duplicate start {a.pos} (agent {seen[a.pos]})")
        else:
            seen[a.pos] = a.id
    return problems


class WorldState:
    """Mutable simulation state; :func:`step` offers a copying interface."""

    def __init__(self, instance: Instance, fields: CostFieldCache | None = None):
        agents = [AgentState(i, tuple(s)) for i, s in enumerate(instance.starts)]
        if instance.goals is not None:
            for a, g in zip(agents, instance.goals):
                a.goal = tuple(g)
        problems = validate_instance(instance.grid, agents)
        if problems:
            raise ValueError("invalid instance: " + "; ".join(problems))
        self.grid = instance.grid
        self.agents = agents
        self.time = 0
        self.rng_seed = instance.seed
        self.rng = np.random.default_rng(instance.seed)
        self.fields = fields if fields is not None else CostFieldCache(self.grid)
        pool = instance.goal_pool if instance.goal_pool is not None else self.grid.free_cells()
        self.goal_pool = [tuple(c) for c in pool]
        self.total_goals = 0
        for a in self.agents:
            if a.goal is None:
                assign_goal(self, a.id, self.rng)
            else:
                a.best_dist = self.dist(a.id)

    def dist(self, agent_id: int) -> int:
        a = self.agents[agent_id]
        return self.fields(a.goal)[a.pos]

    def positions(self) -> list[Cell]:
        return [a.pos for a in self.agents]

    def local_view(self, agent_id: int, fov: int = 11) -> LocalView:
        me = self.agents[agent_id]
        others = {
            a.id: (a.pos, a.goal)
            for a in self.agents
            if a.id != agent_id and in_window(me.pos, a.pos, fov)
        }
        return LocalView(self.grid, agent_id, me.pos, me.goal, others, fov)

    def step(self, joint_action: Sequence[Action | int]) -> list[GoalReached]:
        if len(joint_action) != len(self.agents):
            raise ValueError(f"expected {len(self.agents)} actions, got {len(joint_action)}")
        g = self.grid
        flat = resolve_moves(
            g.move_lists,
            [g.index(a.pos) for a in self.agents],
            [int(x) for x in joint_action],
        )
        self.time += 1
        events = []
        for a, p in zip(self.agents, flat):
            a.pos = g.cell(p)
            if a.pos == a.goal:
                a.goals_completed += 1
                self.total_goals += 1
                new_goal = assign_goal(self, a.id, self.rng)
                events.append(GoalReached(a.id, a.pos, self.time, new_goal))
            else:
                d = self.dist(a.id)
                if d != UNREACHABLE:
                    a.best_dist = min(a.best_dist, d)
        return events

    def copy(self) -> "WorldState":
        new = object.__new__(WorldState)
        new.__dict__.update(self.__dict__)
        new.agents = [replace(a) for a in self.agents]
        new.rng = np.random.default_rng()
        new.rng.bit_generator.state = self.rng.bit_generator.state
        return new


def step(state: WorldState, joint_action: Sequence[Action | int]) -> tuple[WorldState, list[GoalReached]]:
    new = state.copy()
    events = new.step(joint_action)
    return new, events


def assign_goal(state: WorldState, agent_id: int, rng: np.random.Generator) -> Cell:
    """Draw a goal uniformly from the goal pool, excluding the agent's own cell."""
    a = state.agents[agent_id]
    pool = state.goal_pool
    try:
        skip = pool.index(a.pos)
    except ValueError:
        skip = -1
    n = len(pool) - (skip >= 0)
    if n <= 0:
        raise ValueError("no goal cell available besides the agent's position")
    k = int(rng.integers(n))
    if skip >= 0 and k >= skip:
        k += 1
    a.goal = pool[k]
    d = state.fields(a.goal)[a.pos]
    a.best_dist = d if d != UNREACHABLE else 0
    return a.goal


class Solver(Protocol):
    def fit(self, grid: GridMap): ...

    def predict(self, view: LocalView) -> Action: ...


@dataclass
class EpisodeMetrics:
    episode_length: int
    total_goals_reached: int
    throughput: float
    goals_per_agent: list[int] = field(default_factory=list)
    per_step_decision_time: list[float] = field(default_factory=list, compare=False)
    trace: list[dict] | None = field(default=None, compare=False, repr=False)

    @property
    def mean_decision_ms(self) -> float:
        t = self.per_step_decision_time
        return float(np.mean(t)) if t else 0.0


def run_episode(
    instance: Instance,
    solver: Solver,
    L: int = 512,
    fov: int = 11,
    record: bool = False,
) -> EpisodeMetrics:
    """Run ``L`` synchronised steps, querying each agent's solver on its own view."""
    state = WorldState(instance)
    solver.fit(instance.grid)
    timings = []
    trace = [] if record else None
    for _ in range(L):
        actions = []
        spent = 0.0
        for a in state.agents:
            view = state.local_view(a.id, fov)
            t0 = time.perf_counter()
            act = solver.predict(view)
            spent += time.perf_counter() - t0
            actions.append(Action(int(act)))
        timings.append(1000.0 * spent / max(len(state.agents), 1))
        before = state.positions()
        goals = [a.goal for a in state.agents]
        events = state.step(actions)
        if trace is not None:
            trace.append({
                "t": state.time,
                "before": [list(p) for p in before],
                "goals": [list(g) for g in goals],
                "actions": [int(x) for x in actions],
                "positions": [list(p) for p in state.positions()],
                "reached": [[e.agent_id, list(e.new_goal)] for e in events],
            })
    total = state.total_goals
    return EpisodeMetrics(
        episode_length=L,
        total_goals_reached=total,
        throughput=total / L if L else 0.0,
        goals_per_agent=[a.goals_completed for a in state.agents],
        per_step_decision_time=timings,
        trace=trace,
    )
