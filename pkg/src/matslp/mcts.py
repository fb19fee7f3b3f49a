"""Prior-guided tree search over joint actions of an intrinsic MDP.

Each node holds one simulated state and per-edge statistics ``N``, ``Q``,
``R`` (the joint reward of the edge's transition) and ``P`` (the joint
prior). One iteration descends by PUCT, expands a single new node, scores
it with the summed per-agent values and backs the discounted return up the
path. The executed action is the ego component of the most visited root
edge.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields as dc_fields
from typing import IO, Sequence

import numpy as np

from .grid import Action
from .imdp import IMDPState, JointActionSet, PolicyTable, imdp_step, joint_actions, proximal_agents


@dataclass(frozen=True)
class SearchConfig:
    gamma: float = 0.96
    c: float = 4.4
    expansions: int = 250
    K: int = 3
    root_noise_eps: float = 0.6
    normalize_q: bool = True
    reward_scale: float = 1.0
    history_value: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.c < 0:
            raise ValueError("c must be non-negative")
        if self.expansions < 1:
            raise ValueError("expansions must be >= 1")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0.0 <= self.root_noise_eps <= 1.0:
            raise ValueError("root_noise_eps must lie in [0, 1]")

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dc_fields(cls))


class MinMaxStats:
    """Running bounds of backed-up returns, used to rescale Q into [0, 1]."""

    def __init__(self):
        self.lo = math.inf
        self.hi = -math.inf

    def update(self, value: float) -> None:
        if value < self.lo:
            self.lo = value
        if value > self.hi:
            self.hi = value

    def normalize(self, Q: np.ndarray, N: np.ndarray) -> np.ndarray:
        # unvisited edges and a degenerate range both map to 0
        if not self.hi > self.lo:
            return np.zeros_like(Q)
        return np.where(N > 0, (Q - self.lo) / (self.hi - self.lo), 0.0)


class TreeNode:
    __slots__ = ("state", "edges", "N", "Q", "R", "P", "children", "value", "is_root")

    def __init__(self, state: IMDPState | None, edges: JointActionSet | None, priors: np.ndarray, value: float = 0.0):
        n = len(priors)
        self.state = state
        self.edges = edges
        self.P = np.asarray(priors, dtype=np.float64)
        self.N = np.zeros(n)
        self.Q = np.zeros(n)
        self.R = np.zeros(n)
        self.children: list[TreeNode | None] = [None] * n
        self.value = value
        self.is_root = False

    @classmethod
    def bare(cls, priors: Sequence[float]) -> "TreeNode":
        """Node without a simulated state; for exercising the statistics."""
        return cls(None, None, np.asarray(priors, dtype=np.float64))


def puct_scores(N: np.ndarray, Q: np.ndarray, P: np.ndarray, c: float, bounds: MinMaxStats | None = None) -> np.ndarray:
    total = N.sum()
    # a fresh node would zero the exploration term; let the priors decide instead
    root = math.sqrt(total) if total > 0 else 1.0
    q = Q if bounds is None else bounds.normalize(Q, N)
    return q + c * P * root / (1.0 + N)


def select(node: TreeNode, config: SearchConfig, bounds: MinMaxStats | None = None) -> int:
    """Index of the PUCT-maximising edge; ties go to the first enumerated."""
    return int(np.argmax(puct_scores(node.N, node.Q, node.P, config.c, bounds)))


def root_noise(priors: np.ndarray, eps: float) -> np.ndarray:
    """Mix ``priors`` with the uniform distribution over the same edges."""
    priors = np.asarray(priors, dtype=np.float64)
    return (1.0 - eps) * priors + eps / len(priors)


def discounted_returns(rewards: Sequence[float], leaf_value: float, gamma: float) -> list[float]:
    """Return from each depth of a path: ``out[k]`` values edge ``k`` (0 = root edge)."""
    out = [0.0] * len(rewards)
    g = leaf_value
    for k in range(len(rewards) - 1, -1, -1):
        g = rewards[k] + gamma * g
        out[k] = g
    return out


def backprop(path: Sequence[tuple[TreeNode, int]], leaf_value: float, gamma: float, bounds: MinMaxStats | None = None) -> list[float]:
    """Fold the leaf value up ``path`` with running-mean Q updates; returns the returns used."""
    returns = discounted_returns([node.R[e] for node, e in path], leaf_value, gamma)
    for (node, e), g in zip(path, returns):
        n = node.N[e]
        node.Q[e] = (n * node.Q[e] + g) / (n + 1.0)
        node.N[e] = n + 1.0
        if bounds is not None:
            bounds.update(g)
    return returns


def best_root_edge(node: TreeNode) -> int:
    """Most visited edge; ties by higher Q, then first enumerated."""
    n_max = node.N.max()
    cand = np.flatnonzero(node.N == n_max)
    if len(cand) > 1:
        q = node.Q[cand]
        cand = cand[q == q.max()]
    return int(cand[0])


class Search:
    """One tree for one decision of one agent."""

    def __init__(self, root_state: IMDPState, table: PolicyTable, config: SearchConfig, trace: IO[str] | None = None):
        self.table = table
        self.config = config
        self.trace = trace
        ids = proximal_agents(root_state, config.K)
        self.proximal = tuple(root_state.ids.index(i) for i in ids)
        self.bounds = MinMaxStats() if config.normalize_q else None
        self.root = self.make_node(root_state)
        self.root.is_root = True
        if config.root_noise_eps > 0:
            self.root.P = root_noise(self.root.P, config.root_noise_eps)
        self.iterations = 0

    def make_node(self, state: IMDPState) -> TreeNode:
        edges = joint_actions(state, self.proximal, self.table)
        values = [self.table.lookup(state, k)[1] for k in range(state.n_agents)]
        if self.config.history_value:
            leaf = self.table.policy.leaf_value
            values = [leaf(v, state.dist(k), state.best[k]) for k, v in enumerate(values)]
        value = sum(values)
        return TreeNode(state, edges, edges.priors, value)

    def expand(self, node: TreeNode, e: int) -> tuple[TreeNode, float]:
        child_state, r = imdp_step(node.state, node.edges.decode(e), self.config.reward_scale)
        node.R[e] = r
        child = self.make_node(child_state)
        node.children[e] = child
        return child, child.value

    def iterate(self) -> None:
        node = self.root
        path = []
        while True:
            e = select(node, self.config, self.bounds)
            path.append((node, e))
            child = node.children[e]
            if child is None:
                break
            node = child
        _, value = self.expand(node, e)
        returns = backprop(path, value, self.config.gamma, self.bounds)
        self.iterations += 1
        if self.trace is not None:
            rec = {
                "iteration": self.iterations,
                "path": [list(n.edges.decode(i)) for n, i in path],
                "G0": returns[0],
                "root_N": [int(x) for x in self.root.N],
            }
            self.trace.write(json.dumps(rec) + "\n")

    def run(self) -> Action:
        for _ in range(self.config.expansions):
            self.iterate()
        return self.action()

    def action(self) -> Action:
        e = best_root_edge(self.root)
        return Action(self.root.edges.decode(e)[0])


def plan(root_state: IMDPState, table: PolicyTable, config: SearchConfig, trace: IO[str] | None = None) -> Action:
    return Search(root_state, table, config, trace).run()
