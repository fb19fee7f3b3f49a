"""BFS cost-to-go fields and the two-matrix egocentric observation."""

from __future__ import annotations

import string
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .grid import Cell, GridMap

UNREACHABLE = -1
OBSTACLE = -1.0


class CostField:
    """Exact 4-connected distance from every cell to one goal.

    ``dist`` is an ``(height, width)`` int array; blocked and unreachable
    cells hold :data:`UNREACHABLE`.
    """

    __slots__ = ("goal", "dist", "flat", "blocked")

    def __init__(self, goal: Cell, dist: np.ndarray, blocked: np.ndarray | None = None):
        dist.setflags(write=False)
        self.goal = goal
        self.dist = dist
        self.flat = dist.ravel()
        self.blocked = np.zeros(dist.shape, dtype=bool) if blocked is None else blocked

    def __getitem__(self, cell: Cell) -> int:
        return int(self.dist[cell[1], cell[0]])

    def reachable(self, cell: Cell) -> bool:
        return self[cell] != UNREACHABLE

    def dump(self) -> str:
        """ASCII rendering for test diagnostics.

        Distances are written base-36 (``z`` saturates), ``#`` marks
        obstacles and ``?`` free cells that cannot reach the goal.
        """
        digits = string.digits + string.ascii_lowercase
        free = ~self.blocked
        rows = []
        for y, row in enumerate(self.dist):
            chars = []
            for x, d in enumerate(row):
                if d == UNREACHABLE:
                    chars.append("?" if free[y, x] else "#")
                else:
                    chars.append(digits[min(int(d), 35)])
            rows.append("".join(chars))
        return "\n".join(rows)


def cost_to_go(grid: GridMap, goal: Cell) -> CostField:
    if not grid.is_free(goal):
        raise ValueError(f"goal {goal} is not a free cell")
    moves = grid.move_lists
    dist = [UNREACHABLE] * grid.n_cells
    start = grid.index(goal)
    dist[start] = 0
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        nd = dist[cur] + 1
        for nxt in moves[cur][1:]:
            if nxt >= 0 and dist[nxt] == UNREACHABLE:
                dist[nxt] = nd
                queue.append(nxt)
    arr = np.array(dist, dtype=np.int64).reshape(grid.height, grid.width)
    return CostField(goal, arr, grid.blocked)


class CostFieldCache:
    """Per-map memo of cost fields keyed by goal cell.

    Fields are pure functions of (map, goal); a duplicate computation under
    concurrency would produce an identical array.
    """

    def __init__(self, grid: GridMap):
        self.grid = grid
        self._fields: dict[Cell, CostField] = {}

    def __call__(self, goal: Cell) -> CostField:
        cf = self._fields.get(goal)
        if cf is None:
            cf = self._fields[goal] = cost_to_go(self.grid, goal)
        return cf

    def __len__(self):
        return len(self._fields)


@dataclass(frozen=True)
class LocalView:
    """What one agent knows at a decision point.

    The full static map, its own position and goal, and the positions and
    goals of the other agents inside its ``m x m`` window.
    """

    grid: GridMap
    agent_id: int
    pos: Cell
    goal: Cell
    others: dict[int, tuple[Cell, Cell]] = field(default_factory=dict)
    fov: int = 11


@dataclass(frozen=True, eq=False)
class Observation:
    agents_matrix: np.ndarray
    costmap_matrix: np.ndarray
    ego_pos: Cell
    ego_goal: Cell
    ego_dist: int
    visible_agent_goals: dict[int, Cell] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.costmap_matrix.shape[0]


def in_window(center: Cell, cell: Cell, m: int) -> bool:
    r = m // 2
    return abs(cell[0] - center[0]) <= r and abs(cell[1] - center[1]) <= r


def window_distances(grid: GridMap, cf: CostField, center: Cell, m: int) -> np.ndarray:
    """``m x m`` slice of ``cf.dist`` centred on ``center``; outside cells are UNREACHABLE."""
    r = m // 2
    x, y = center
    out = np.full((m, m), UNREACHABLE, dtype=np.int64)
    x0, y0 = x - r, y - r
    sx0, sy0 = max(x0, 0), max(y0, 0)
    sx1, sy1 = min(x0 + m, grid.width), min(y0 + m, grid.height)
    if sx0 < sx1 and sy0 < sy1:
        out[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = cf.dist[sy0:sy1, sx0:sx1]
    return out


def normalize_window(d: np.ndarray) -> np.ndarray:
    """Map window distances to inverted [0, 1] scores; UNREACHABLE becomes -1."""
    out = np.full(d.shape, OBSTACLE, dtype=np.float64)
    ok = d != UNREACHABLE
    if not ok.any():
        return out
    vals = d[ok]
    lo, hi = vals.min(), vals.max()
    if hi == lo:
        out[ok] = 1.0
    else:
        out[ok] = 1.0 - (vals - lo) / float(hi - lo)
    return out


def observe(view: LocalView, fields: CostFieldCache | None = None, m: int | None = None) -> Observation:
    m = view.fov if m is None else m
    if m < 1 or m % 2 == 0:
        raise ValueError(f"window size must be odd and positive, got {m}")
    if fields is None:
        fields = CostFieldCache(view.grid)
    cf = fields(view.goal)
    costmap = normalize_window(window_distances(view.grid, cf, view.pos, m))
    agents = np.zeros((m, m), dtype=np.float64)
    r = m // 2
    goals = {}
    for aid, (pos, goal) in view.others.items():
        if aid == view.agent_id or not in_window(view.pos, pos, m):
            continue
        agents[pos[1] - view.pos[1] + r, pos[0] - view.pos[0] + r] = 1.0
        goals[aid] = goal
    return Observation(
        agents_matrix=agents,
        costmap_matrix=costmap,
        ego_pos=view.pos,
        ego_goal=view.goal,
        ego_dist=cf[view.pos],
        visible_agent_goals=goals,
    )
