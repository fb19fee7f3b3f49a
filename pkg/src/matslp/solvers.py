"""Decentralised solvers with a scikit-learn style interface.

``fit(grid)`` binds the static map (and its cost-field cache);
``predict(view)`` returns one agent's next action from that agent's own
:class:`~matslp.costmap.LocalView`. Hyper-parameters live in ``__init__``
so ``get_params``/``set_params``/``clone`` work as usual.

>>> solver = MatsLPSolver(expansions=100).fit(grid)      # doctest: +SKIP
>>> solver.predict(world.local_view(0))                  # doctest: +SKIP
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .costmap import CostFieldCache, LocalView, observe
from .grid import Action
from .imdp import PolicyTable, build_imdp
from .mcts import Search, SearchConfig
from .policy import Policy, RandomPolicy, SurrogatePolicy, load_policy
from .validation import check_grid, check_in_range, check_view

VARIANTS = ("mats-lp", "bare-policy", "random-policy-mcts", "no-proximal")


def make_policy(spec, tau: float = 0.1, gamma: float = 0.96, reward_scale: float = 1.0) -> Policy:
    if isinstance(spec, Policy):
        return spec
    if spec == "surrogate":
        return SurrogatePolicy(tau=tau, gamma=gamma, reward_scale=reward_scale)
    if spec == "random":
        return RandomPolicy()
    if isinstance(spec, (str, Path)) and Path(spec).exists():
        return load_policy(spec, tau=tau, gamma=gamma, reward_scale=reward_scale)
    raise ValueError(f"unknown policy {spec!r}: use 'surrogate', 'random' or a weights file path")


class _PolicySolverBase(BaseEstimator):
    def fit(self, grid, y=None):
        self._validate_params()
        self.grid_ = check_grid(grid)
        self.fields_ = CostFieldCache(self.grid_)
        self.policy_ = make_policy(self.policy, self.tau, self.gamma, self.reward_scale)
        self.table_ = PolicyTable(self.grid_, self.fields_, self.policy_, self.fov)
        return self

    def _validate_params(self):
        check_in_range("fov", self.fov, 3)
        if self.fov % 2 == 0:
            raise ValueError("fov must be odd")
        check_in_range("tau", self.tau, 0, lo_open=True)
        check_in_range("gamma", self.gamma, 0, 1, lo_open=True, hi_open=True)

    def predict_joint(self, state) -> list[Action]:
        """Actions for every agent of a :class:`~matslp.world.WorldState`, each from its own view."""
        return [self.predict(state.local_view(a.id, self.fov)) for a in state.agents]


class BarePolicySolver(_PolicySolverBase):
    """Acts on the policy alone: the most probable action, no lookahead."""

    def __init__(self, policy="surrogate", tau=0.1, gamma=0.96, reward_scale=1.0, fov=11):
        self.policy = policy
        self.tau = tau
        self.gamma = gamma
        self.reward_scale = reward_scale
        self.fov = fov

    def predict_proba(self, view: LocalView) -> np.ndarray:
        check_is_fitted(self)
        view = check_view(view, self.grid_)
        return self.policy_.evaluate(observe(view, self.fields_, self.fov)).priors

    def predict(self, view: LocalView) -> Action:
        return Action(int(np.argmax(self.predict_proba(view))))


class MatsLPSolver(_PolicySolverBase):
    """Per-agent tree search over the intrinsic MDP built from the agent's view."""

    def __init__(
        self,
        expansions=250,
        c=4.4,
        gamma=0.96,
        n_planning_agents=3,
        root_noise_eps=0.6,
        normalize_q=True,
        history_value=True,
        policy="surrogate",
        tau=0.1,
        reward_scale=1.0,
        fov=11,
    ):
        self.expansions = expansions
        self.c = c
        self.gamma = gamma
        self.n_planning_agents = n_planning_agents
        self.root_noise_eps = root_noise_eps
        self.normalize_q = normalize_q
        self.history_value = history_value
        self.policy = policy
        self.tau = tau
        self.reward_scale = reward_scale
        self.fov = fov

    def fit(self, grid, y=None):
        super().fit(grid)
        self.config_ = SearchConfig(
            gamma=self.gamma,
            c=self.c,
            expansions=self.expansions,
            K=self.n_planning_agents,
            root_noise_eps=self.root_noise_eps,
            normalize_q=self.normalize_q,
            history_value=self.history_value,
            reward_scale=self.reward_scale,
        )
        return self

    def search(self, view: LocalView, trace=None) -> Search:
        """Run the search and return it, for inspecting the tree."""
        check_is_fitted(self)
        view = check_view(view, self.grid_)
        s = Search(build_imdp(view, self.fields_, self.fov), self.table_, self.config_, trace)
        s.run()
        return s

    def predict(self, view: LocalView) -> Action:
        return self.search(view).action()


def make_solver(variant: str, **overrides) -> BaseEstimator:
    """Solver for one of :data:`VARIANTS`, with estimator params overridden."""
    if variant == "bare-policy":
        keys = BarePolicySolver().get_params()
        return BarePolicySolver(**{k: v for k, v in overrides.items() if k in keys})
    if variant not in VARIANTS:
        raise ValueError(f"unknown solver variant {variant!r}; expected one of {VARIANTS}")
    params = dict(overrides)
    if variant == "random-policy-mcts":
        params["policy"] = "random"
    elif variant == "no-proximal":
        params["n_planning_agents"] = 1
    return MatsLPSolver(**params)
