"""Static grid maps, the 5-action move set and the ASCII map format.

Cells are addressed as ``(x, y)`` with ``x`` the column and ``y`` the row,
``(0, 0)`` in the upper-left corner. Hot loops use the flat index
``y * width + x`` instead; :class:`GridMap` converts between the two.

Map files follow the MovingAI layout::

    type octile
    height 3
    width 4
    map
    ....
    .##.
    ....
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

Cell = tuple[int, int]


class Action(IntEnum):
    WAIT = 0
    UP = 1
    DOWN = 2
    LEFT = 3
    RIGHT = 4

    @property
    def delta(self) -> Cell:
        return DELTAS[self]


DELTAS: tuple[Cell, ...] = ((0, 0), (0, -1), (0, 1), (-1, 0), (1, 0))
N_ACTIONS = len(DELTAS)

FREE_CHARS = frozenset(".GS")
BLOCKED_CHARS = frozenset("#@OTW")


class MapFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridMap:
    """Immutable 4-connected obstacle grid.

    ``blocked`` is a ``(height, width)`` boolean array; it is copied and made
    read-only on construction.
    """

    blocked: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        arr = np.array(self.blocked, dtype=bool, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"blocked must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.all():
            raise ValueError("map has no free cell")
        arr.setflags(write=False)
        object.__setattr__(self, "blocked", arr)

    @property
    def height(self) -> int:
        return self.blocked.shape[0]

    @property
    def width(self) -> int:
        return self.blocked.shape[1]

    @property
    def n_cells(self) -> int:
        return self.blocked.size

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return np.array_equal(self.blocked, other.blocked)

    def __hash__(self):
        return hash((self.blocked.shape, self.blocked.tobytes()))

    # -- cell helpers -------------------------------------------------------

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.blocked[cell[1], cell[0]]

    def index(self, cell: Cell) -> int:
        return cell[1] * self.width + cell[0]

    def cell(self, index: int) -> Cell:
        y, x = divmod(int(index), self.width)
        return (x, y)

    def free_cells(self) -> list[Cell]:
        ys, xs = np.nonzero(~self.blocked)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    @cached_property
    def free_flat(self) -> np.ndarray:
        """Read-only boolean mask over flat indices."""
        out = ~self.blocked.ravel()
        out.setflags(write=False)
        return out

    @cached_property
    def moves(self) -> np.ndarray:
        """``(n_cells, 5)`` table of destination flat indices, ``-1`` if invalid.

        WAIT always maps a free cell to itself.
        """
        h, w = self.blocked.shape
        table = np.full((h * w, N_ACTIONS), -1, dtype=np.int64)
        ys, xs = np.mgrid[0:h, 0:w]
        xs = xs.ravel()
        ys = ys.ravel()
        free = self.free_flat
        for a, (dx, dy) in enumerate(DELTAS):
            nx, ny = xs + dx, ys + dy
            ok = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h) & free
            dest = np.where(ok, ny * w + nx, 0)
            ok &= free[dest]
            table[:, a] = np.where(ok, dest, -1)
        table.setflags(write=False)
        return table

    @cached_property
    def move_lists(self) -> tuple[tuple[int, ...], ...]:
        """Same as :attr:`moves` as nested tuples, for scalar hot loops."""
        return tuple(tuple(int(v) for v in row) for row in self.moves)

    @cached_property
    def valid_action_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(a for a, dest in enumerate(row) if dest >= 0) for row in self.move_lists)

    def step_cell(self, cell: Cell, action: Action | int) -> Cell | None:
        """Destination of ``action`` from ``cell`` or ``None`` if blocked/out of grid."""
        dx, dy = DELTAS[int(action)]
        nxt = (cell[0] + dx, cell[1] + dy)
        return nxt if self.is_free(nxt) else None

    # -- text format --------------------------------------------------------

    def to_text(self) -> str:
        rows = ["".join("#" if b else "." for b in row) for row in self.blocked]
        header = ["type octile", f"height {self.height}", f"width {self.width}", "map"]
        return "\n".join(header + rows) + "\n"

    @classmethod
    def from_text(cls, text: str, name: str = "") -> "GridMap":
        lines = text.splitlines()
        header: dict[str, str] = {}
        i = 0
        while i < len(lines):
            line = lines[i].strip()
            i += 1
            if line == "map":
                break
            if not line:
                continue
            key, _, value = line.partition(" ")
            header[key] = value.strip()
        else:
            raise MapFormatError("missing 'map' line")
        try:
            height = int(header["height"])
            width = int(header["width"])
        except (KeyError, ValueError) as exc:
            raise MapFormatError("header must declare integer 'height' and 'width'") from exc
        rows = lines[i:i + height]
        if len(rows) != height:
            raise MapFormatError(f"expected {height} rows, found {len(rows)}")
        blocked = np.zeros((height, width), dtype=bool)
        for y, row in enumerate(rows):
            if len(row) != width:
                raise MapFormatError(f"row {y} has length {len(row)}, expected {width}")
            for x, ch in enumerate(row):
                if ch in BLOCKED_CHARS:
                    blocked[y, x] = True
                elif ch not in FREE_CHARS:
                    raise MapFormatError(f"unknown map character {ch!r} at ({x}, {y})")
        if any(line.strip() for line in lines[i + height:]):
            raise MapFormatError("trailing content after map rows")
        return cls(blocked, name=name)

    @classmethod
    def from_rows(cls, rows: Iterable[str], name: str = "") -> "GridMap":
        """Build from bare ``.``/``#`` rows (no header); handy in tests."""
        rows = list(rows)
        blocked = np.array([[ch in BLOCKED_CHARS for ch in row] for row in rows], dtype=bool)
        return cls(blocked, name=name)

    @classmethod
    def empty(cls, width: int, height: int) -> "GridMap":
        return cls(np.zeros((height, width), dtype=bool))


def read_map(path: str | Path) -> GridMap:
    path = Path(path)
    return GridMap.from_text(path.read_text(), name=path.stem)


def write_map(grid: GridMap, path: str | Path) -> None:
    Path(path).write_text(grid.to_text())
