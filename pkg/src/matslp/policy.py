"""Per-agent action priors and value estimates consumed by the search.

:class:`SurrogatePolicy` is a closed-form stand-in for a learned policy:
each action scores the normalized cost-to-go of the cell it leads to and
the scores pass through a masked softmax. :class:`LinearPolicy` replaces
those scores with a linear map loaded from a weights file.

Weights file layout (little-endian)::

    MATSLP-WEIGHTS 1
    shape 5 2 11 11
    crc32 1a2b3c4d
    <5*2*11*11 float32 values, C order>

Axis 1 indexes the observation channel: 0 is the agents matrix, 1 the
costmap matrix.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costmap import UNREACHABLE, Observation
from .grid import DELTAS, N_ACTIONS

MAGIC = "MATSLP-WEIGHTS 1"


class WeightsFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PolicyOutput:
    priors: np.ndarray
    value: float

    @property
    def best_action(self) -> int:
        return int(np.argmax(self.priors))


def reward(best_dist_before: int, dist_after: int, r: float = 1.0) -> float:
    """``r`` when the agent beats its best distance so far on this goal, else 0."""
    if dist_after == UNREACHABLE:
        return 0.0
    if best_dist_before == UNREACHABLE or dist_after < best_dist_before:
        return r
    return 0.0


def discounted_progress(d: int, gamma: float, r: float = 1.0) -> float:
    """Discounted reward collected by closing a distance ``d`` one step at a time."""
    if d == UNREACHABLE or d <= 0:
        return 0.0
    return r * (1.0 - gamma ** d) / (1.0 - gamma)


def _center(obs: Observation) -> int:
    if obs.size < 3:
        raise ValueError("policies need an observation window of at least 3x3")
    return obs.size // 2


def history_value(d: int, best: int, gamma: float, r: float = 1.0) -> float:
    """Best discounted reward still collectable at distance ``d`` with running minimum ``best``."""
    if d == UNREACHABLE or best == UNREACHABLE:
        return 0.0
    b = min(best, d)
    return gamma ** (d - b) * discounted_progress(b, gamma, r)


def action_mask(obs: Observation) -> np.ndarray:
    """WAIT is always allowed; moves need a non-obstacle destination in the window."""
    c = _center(obs)
    cm = obs.costmap_matrix
    mask = np.ones(N_ACTIONS, dtype=bool)
    for a, (dx, dy) in enumerate(DELTAS[1:], start=1):
        mask[a] = cm[c + dy, c + dx] != -1.0
    return mask


def destination_scores(obs: Observation) -> np.ndarray:
    c = _center(obs)
    cm = obs.costmap_matrix
    return np.array([cm[c + dy, c + dx] for dx, dy in DELTAS])


def masked_softmax(scores: np.ndarray, mask: np.ndarray, tau: float) -> np.ndarray:
    z = np.where(mask, scores / tau, -np.inf)
    z -= z[mask].max()
    p = np.exp(z)
    return p / p.sum()


class Policy:
    """Base class. ``uses_agents`` tells callers whether output depends on the agents matrix."""

    uses_agents = False

    def evaluate(self, obs: Observation) -> PolicyOutput:
        raise NotImplementedError

    def leaf_value(self, value: float, d: int, best: int) -> float:
        """Value of a simulated agent at distance ``d`` whose best distance so far is ``best``.

        The default trusts the observation value; subclasses that know the
        reward rule can discount for the distance that no longer pays.
        """
        return value


class SurrogatePolicy(Policy):
    def __init__(self, tau: float = 0.1, gamma: float = 0.96, reward_scale: float = 1.0):
        if tau <= 0:
            raise ValueError("tau must be positive")
        if not 0.0 < gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        self.tau = tau
        self.gamma = gamma
        self.reward_scale = reward_scale

    def scores(self, obs: Observation) -> np.ndarray:
        return destination_scores(obs)

    def evaluate(self, obs: Observation) -> PolicyOutput:
        priors = masked_softmax(self.scores(obs), action_mask(obs), self.tau)
        return PolicyOutput(priors, discounted_progress(obs.ego_dist, self.gamma, self.reward_scale))

    def leaf_value(self, value: float, d: int, best: int) -> float:
        # steps from d back down to best earn nothing under the running minimum
        return history_value(d, best, self.gamma, self.reward_scale)

    def __repr__(self):
        return f"{type(self).__name__}(tau={self.tau}, gamma={self.gamma}, reward_scale={self.reward_scale})"


class RandomPolicy(Policy):
    def evaluate(self, obs: Observation) -> PolicyOutput:
        mask = action_mask(obs)
        return PolicyOutput(mask / mask.sum(), 0.0)

    def __repr__(self):
        return "RandomPolicy()"


def random_policy() -> RandomPolicy:
    return RandomPolicy()


class LinearPolicy(SurrogatePolicy):
    """Scores each action as ``<weights[a], [agents, costmap]>``."""

    def __init__(self, weights: np.ndarray, tau: float = 0.1, gamma: float = 0.96, reward_scale: float = 1.0):
        super().__init__(tau, gamma, reward_scale)
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 4 or w.shape[:2] != (N_ACTIONS, 2) or w.shape[2] != w.shape[3] or w.shape[2] % 2 == 0:
            raise WeightsFormatError(f"weights must have shape (5, 2, m, m) with odd m, got {w.shape}")
        self.weights = w
        self.uses_agents = bool(np.any(w[:, 0]))

    def scores(self, obs: Observation) -> np.ndarray:
        if obs.size != self.weights.shape[2]:
            raise WeightsFormatError(f"weights expect a {self.weights.shape[2]}-wide window, observation is {obs.size}")
        x = np.stack([obs.agents_matrix, obs.costmap_matrix])
        return np.tensordot(self.weights, x, axes=3)


def identity_weights(m: int = 11) -> np.ndarray:
    """Weights under which :class:`LinearPolicy` reproduces the surrogate scores."""
    w = np.zeros((N_ACTIONS, 2, m, m), dtype=np.float32)
    c = m // 2
    for a, (dx, dy) in enumerate(DELTAS):
        w[a, 1, c + dy, c + dx] = 1.0
    return w


def save_weights(weights: np.ndarray, path: str | Path) -> None:
    w = np.ascontiguousarray(weights, dtype="<f4")
    payload = w.tobytes()
    header = f"{MAGIC}\nshape {' '.join(map(str, w.shape))}\ncrc32 {zlib.crc32(payload):08x}\n"
    Path(path).write_bytes(header.encode("ascii") + payload)


def read_weights(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) != 4:
        raise WeightsFormatError("truncated header")
    magic, shape_line, crc_line, payload = parts
    if magic.decode("ascii", "replace") != MAGIC:
        raise WeightsFormatError(f"bad magic {magic[:32]!r}")
    try:
        key, *dims = shape_line.decode("ascii").split()
        shape = tuple(int(d) for d in dims)
        ckey, crc = crc_line.decode("ascii").split()
        crc = int(crc, 16)
    except ValueError as exc:
        raise WeightsFormatError("malformed header") from exc
    if key != "shape" or ckey != "crc32":
        raise WeightsFormatError("malformed header")
    if len(payload) != 4 * int(np.prod(shape)):
        raise WeightsFormatError(f"payload has {len(payload)} bytes, shape {shape} needs {4 * int(np.prod(shape))}")
    if zlib.crc32(payload) != crc:
        raise WeightsFormatError("checksum mismatch")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float64)


def load_policy(path: str | Path, tau: float = 0.1, gamma: float = 0.96, reward_scale: float = 1.0) -> LinearPolicy:
    return LinearPolicy(read_weights(path), tau=tau, gamma=gamma, reward_scale=reward_scale)
