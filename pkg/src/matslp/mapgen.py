"""Map families used for evaluation and their instance placement rules.

* random: uniformly scattered obstacles at a given density,
* maze: width-1 corridors from a randomized depth-first spanning tree with
  a few extra openings to create loops,
* warehouse: a fixed 46 x 33 layout of 10 x 2 shelf blocks with open bands
  on both sides.

All randomness is integer draws from ``numpy.random.default_rng(seed)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import Cell, GridMap
from .world import Instance

FAMILIES = ("random", "maze", "warehouse")

WAREHOUSE_WIDTH = 46
WAREHOUSE_HEIGHT = 33
WAREHOUSE_SHELF = (10, 2)
WAREHOUSE_START_COLUMNS = 3
WAREHOUSE_START_ROWS = 32
WAREHOUSE_MAX_AGENTS = 2 * WAREHOUSE_START_COLUMNS * WAREHOUSE_START_ROWS  # 192


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MapSpec:
    family: str
    size: tuple[int, int] = (20, 20)
    density: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown map family {self.family!r}")
        if self.family == "random" and not 0.0 <= self.density <= 0.3:
            raise ValueError("random-map density must lie in [0, 0.3]")

    @property
    def map_id(self) -> str:
        w, h = self.size
        if self.family == "warehouse":
            return "warehouse-46x33"
        if self.family == "random":
            return f"random-{w}x{h}-d{round(100 * self.density):02d}-s{self.seed}"
        return f"maze-{w}x{h}-s{self.seed}"

    def build(self) -> GridMap:
        if self.family == "random":
            grid = random_map(self.size, self.density, self.seed)
        elif self.family == "maze":
            grid = maze_map(self.size, self.seed)
        else:
            grid = warehouse_map()
        return GridMap(grid.blocked, name=self.map_id)


def largest_component_fraction(blocked: np.ndarray) -> float:
    labels, n = ndimage.label(~blocked)
    if n == 0:
        return 0.0
    sizes = np.bincount(labels.ravel())[1:]
    return sizes.max() / sizes.sum()


def random_map(size: tuple[int, int], density: float, seed: int, min_component: float = 0.8, max_retries: int = 1000) -> GridMap:
    w, h = size
    if not 0.0 <= density < 1.0:
        raise ValueError("density must lie in [0, 1)")
    n_cells = w * h
    n_blocked = int(round(density * n_cells))
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        blocked = np.zeros(n_cells, dtype=bool)
        blocked[rng.permutation(n_cells)[:n_blocked]] = True
        blocked = blocked.reshape(h, w)
        if largest_component_fraction(blocked) >= min_component:
            return GridMap(blocked)
    raise GenerationError(f"no map with a {min_component:.0%} main component after {max_retries} tries")


def maze_map(size: tuple[int, int] | int, seed: int, loop_fraction: float = 0.1) -> GridMap:
    """Corridor maze on the even-coordinate lattice of a ``w x h`` grid.

    Lattice cells sit at even ``(x, y)``; a randomized depth-first search
    opens the wall cell between neighbours, then ``loop_fraction`` of the
    still-closed walls between lattice cells are opened too.
    """
    if isinstance(size, int):
        size = (size, size)
    w, h = size
    if w < 3 or h < 3:
        raise ValueError("maze needs at least 3 x 3 cells")
    rng = np.random.default_rng(seed)
    blocked = np.ones((h, w), dtype=bool)
    lw, lh = (w + 1) // 2, (h + 1) // 2
    visited = np.zeros((lh, lw), dtype=bool)
    start = (int(rng.integers(lw)), int(rng.integers(lh)))
    stack = [start]
    visited[start[1], start[0]] = True
    blocked[2 * start[1], 2 * start[0]] = False
    steps = ((0, -1), (0, 1), (-1, 0), (1, 0))
    while stack:
        cx, cy = stack[-1]
        options = [
            (cx + dx, cy + dy)
            for dx, dy in steps
            if 0 <= cx + dx < lw and 0 <= cy + dy < lh and not visited[cy + dy, cx + dx]
        ]
        if not options:
            stack.pop()
            continue
        nx, ny = options[int(rng.integers(len(options)))]
        visited[ny, nx] = True
        blocked[2 * ny, 2 * nx] = False
        blocked[cy + ny, cx + nx] = False
        stack.append((nx, ny))
    walls = [
        (x, y)
        for y in range(h)
        for x in range(w)
        if blocked[y, x] and (x % 2) != (y % 2)
        and ((x % 2 == 1 and x + 1 < w) or (y % 2 == 1 and y + 1 < h))
    ]
    n_open = int(round(loop_fraction * len(walls)))
    if n_open:
        for i in rng.permutation(len(walls))[:n_open]:
            x, y = walls[i]
            blocked[y, x] = False
    return GridMap(blocked)


def _shelf_origins() -> list[Cell]:
    sw, sh = WAREHOUSE_SHELF
    xs = [7, 7 + sw + 1, 7 + 2 * (sw + 1)]
    ys = [2 + 3 * i for i in range(10)]
    return [(x, y) for y in ys for x in xs]


def warehouse_map() -> GridMap:
    blocked = np.zeros((WAREHOUSE_HEIGHT, WAREHOUSE_WIDTH), dtype=bool)
    sw, sh = WAREHOUSE_SHELF
    for x, y in _shelf_origins():
        blocked[y:y + sh, x:x + sw] = True
    return GridMap(blocked, name="warehouse-46x33")


def warehouse_start_cells() -> list[Cell]:
    cols = list(range(WAREHOUSE_START_COLUMNS)) + [
        WAREHOUSE_WIDTH - 1 - i for i in reversed(range(WAREHOUSE_START_COLUMNS))
    ]
    return [(x, y) for y in range(WAREHOUSE_START_ROWS) for x in cols]


def warehouse_goal_cells(grid: GridMap) -> list[Cell]:
    """Free cells 4-adjacent to a shelf block."""
    out = []
    for x, y in grid.free_cells():
        if any(
            grid.in_bounds((x + dx, y + dy)) and grid.blocked[y + dy, x + dx]
            for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0))
        ):
            out.append((x, y))
    return out


def make_instance(grid: GridMap, n_agents: int, family: str, seed: int, map_id: str = "") -> Instance:
    if n_agents < 1:
        raise ValueError("need at least one agent")
    rng = np.random.default_rng([seed, 1])
    if family == "warehouse":
        if n_agents > WAREHOUSE_MAX_AGENTS:
            raise GenerationError(f"warehouse holds at most {WAREHOUSE_MAX_AGENTS} agents, asked for {n_agents}")
        candidates = warehouse_start_cells()
        pool = tuple(warehouse_goal_cells(grid))
    elif family in ("random", "maze"):
        candidates = grid.free_cells()
        if n_agents >= len(candidates):
            raise GenerationError(f"{n_agents} agents do not fit a map with {len(candidates)} free cells")
        pool = None
    else:
        raise ValueError(f"unknown map family {family!r}")
    picks = rng.permutation(len(candidates))[:n_agents]
    starts = tuple(candidates[i] for i in picks)
    return Instance(grid, starts, seed=seed, goal_pool=pool, map_id=map_id or grid.name, family=family)
