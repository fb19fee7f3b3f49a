"""Input checks shared by the solver estimators."""

from __future__ import annotations

import numpy as np

from .costmap import LocalView
from .grid import GridMap


def check_grid(grid) -> GridMap:
    """Accept a :class:`GridMap`, a boolean obstacle array or ``.``/``#`` rows."""
    if isinstance(grid, GridMap):
        return grid
    if isinstance(grid, (list, tuple)) and grid and isinstance(grid[0], str):
        return GridMap.from_rows(grid)
    arr = np.asarray(grid)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D obstacle grid, got array of shape {arr.shape}")
    if arr.dtype != bool and not np.isin(arr, (0, 1)).all():
        raise ValueError("obstacle grid must be boolean or 0/1")
    return GridMap(arr.astype(bool))


def check_view(view: LocalView, grid: GridMap) -> LocalView:
    if not isinstance(view, LocalView):
        raise TypeError(f"expected LocalView, got {type(view).__name__}")
    if view.grid is not grid and view.grid != grid:
        raise ValueError("view belongs to a different map than the one the solver was fitted on")
    if not grid.is_free(view.pos):
        raise ValueError(f"agent {view.agent_id} stands on a non-free cell {view.pos}")
    if view.goal is None or not grid.is_free(view.goal):
        raise ValueError(f"agent {view.agent_id} has an invalid goal {view.goal}")
    if view.fov < 1 or view.fov % 2 == 0:
        raise ValueError(f"fov must be odd and positive, got {view.fov}")
    return view


def check_in_range(name: str, value, lo=None, hi=None, *, lo_open=False, hi_open=False):
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ValueError(f"{name}={value!r} is below its valid range")
    if hi is not None and (value > hi or (hi_open and value == hi)):
        raise ValueError(f"{name}={value!r} is above its valid range")
    return value
