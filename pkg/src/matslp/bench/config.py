"""Flat ``key = value`` run configuration.

Example::

    # desk-scale maze ablation
    family = maze
    size = 20x20
    agents = 8,16
    episode_length = 128
    solvers = mats-lp, bare-policy, random-policy-mcts, mats-lp@K=1
    seeds = 0-9
    expansions = 100
    output = results/maze.csv

``seeds`` and ``map_seeds`` accept comma lists and ``a-b`` ranges. With
``map_seeds = paired`` (the default) every instance seed also seeds its own
map, i.e. one instance per map. A solver entry ``variant@key=value/key=value``
overrides search parameters for that entry only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from ..mapgen import FAMILIES, MapSpec
from ..solvers import VARIANTS

SEARCH_KEYS = {
    "expansions": int,
    "c": float,
    "gamma": float,
    "K": int,
    "root_noise_eps": float,
    "normalize_q": lambda s: _parse_bool(s),
    "history_value": lambda s: _parse_bool(s),
    "tau": float,
    "reward_scale": float,
    "fov": int,
}

# estimator parameter names for the SEARCH_KEYS that differ
ESTIMATOR_NAMES = {"K": "n_planning_agents"}


class ConfigError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def parse_int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, part)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def parse_solver(entry: str) -> tuple[str, dict]:
    """``'mats-lp@expansions=50/K=1'`` -> ``('mats-lp', {'expansions': 50, 'K': 1})``."""
    variant, _, rest = entry.strip().partition("@")
    if variant not in VARIANTS:
        raise ConfigError(f"unknown solver variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    overrides = {}
    for item in filter(None, rest.split("/")):
        key, sep, value = item.partition("=")
        if not sep or key not in SEARCH_KEYS:
            raise ConfigError(f"bad solver override {item!r} in {entry!r}")
        overrides[key] = SEARCH_KEYS[key](value)
    return variant, overrides


@dataclass
class RunConfig:
    family: str = "maze"
    size: tuple[int, int] = (20, 20)
    densities: list[float] = field(default_factory=lambda: [0.0])
    map_seeds: list[int] | None = None
    agents: list[int] = field(default_factory=lambda: [16])
    episode_length: int = 128
    solvers: list[str] = field(default_factory=lambda: ["mats-lp"])
    seeds: list[int] = field(default_factory=lambda: [0])
    search: dict = field(default_factory=dict)
    output: str = "results.csv"
    trace_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.episode_length < 0:
            raise ConfigError("episode_length must be >= 0")
        if not self.agents or min(self.agents) < 1:
            raise ConfigError("agents must list positive counts")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.family == "random" and any(not 0.0 <= d <= 0.3 for d in self.densities):
            raise ConfigError("densities must lie in [0, 0.3]")
        for key, value in self.search.items():
            _check_search_value(key, value)
        for entry in self.solvers:
            _, overrides = parse_solver(entry)
            for key, value in overrides.items():
                _check_search_value(key, value)

    def map_specs(self, seed: int) -> list[MapSpec]:
        """Maps an instance seed runs on."""
        map_seeds = [seed] if self.map_seeds is None else self.map_seeds
        if self.family == "warehouse":
            return [MapSpec("warehouse", (46, 33), seed=0)]
        densities = self.densities if self.family == "random" else [0.0]
        return [MapSpec(self.family, self.size, d, s) for d in densities for s in map_seeds]

    def solver_params(self, entry: str) -> tuple[str, dict]:
        variant, overrides = parse_solver(entry)
        merged = {**self.search, **overrides}
        return variant, {ESTIMATOR_NAMES.get(k, k): v for k, v in merged.items()}


def _check_search_value(key: str, value) -> None:
    ok = {
        "expansions": lambda v: v >= 1,
        "c": lambda v: v >= 0,
        "gamma": lambda v: 0 < v < 1,
        "K": lambda v: v >= 1,
        "root_noise_eps": lambda v: 0 <= v <= 1,
        "normalize_q": lambda v: isinstance(v, bool),
        "history_value": lambda v: isinstance(v, bool),
        "tau": lambda v: v > 0,
        "reward_scale": lambda v: v > 0,
        "fov": lambda v: v >= 3 and v % 2 == 1,
    }[key]
    if not ok(value):
        raise ConfigError(f"{key}={value!r} is outside its valid range")


def _parse_size(s: str) -> tuple[int, int]:
    w, _, h = s.lower().partition("x")
    return int(w), int(h or w)


def parse_config(text: str) -> RunConfig:
    kwargs: dict = {}
    search: dict = {}
    known = {f.name for f in fields(RunConfig)} - {"search"}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key in SEARCH_KEYS:
            search[key] = SEARCH_KEYS[key](value)
        elif key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        elif key == "size":
            kwargs[key] = _parse_size(value)
        elif key == "densities":
            kwargs[key] = [float(v) for v in value.split(",") if v.strip()]
        elif key in ("agents", "seeds"):
            kwargs[key] = parse_int_list(value)
        elif key == "map_seeds":
            kwargs[key] = None if value == "paired" else parse_int_list(value)
        elif key == "solvers":
            kwargs[key] = [v.strip() for v in value.split(",") if v.strip()]
        elif key in ("episode_length", "workers"):
            kwargs[key] = int(value)
        else:
            kwargs[key] = value
    return RunConfig(search=search, **kwargs)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())
