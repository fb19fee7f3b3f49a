"""Decentralized lifelong multi-agent pathfinding with per-agent tree search."""

from .costmap import CostField, CostFieldCache, LocalView, Observation, cost_to_go, observe
from .grid import Action, GridMap, read_map, write_map
from .imdp import IMDPState, build_imdp, imdp_step, joint_actions, proximal_agents
from .mapgen import MapSpec, make_instance, maze_map, random_map, warehouse_map
from .mcts import SearchConfig, plan
from .policy import LinearPolicy, PolicyOutput, RandomPolicy, SurrogatePolicy, load_policy, random_policy, reward
from .solvers import BarePolicySolver, MatsLPSolver, make_solver
from .world import EpisodeMetrics, Instance, WorldState, assign_goal, run_episode, step, validate_instance

__version__ = "0.1.0"

__all__ = [
    "Action", "BarePolicySolver", "CostField", "CostFieldCache", "EpisodeMetrics", "GridMap",
    "IMDPState", "Instance", "LinearPolicy", "LocalView", "MapSpec", "MatsLPSolver", "Observation",
    "PolicyOutput", "RandomPolicy", "SearchConfig", "SurrogatePolicy", "WorldState", "assign_goal",
    "build_imdp", "cost_to_go", "imdp_step", "joint_actions", "load_policy", "make_instance",
    "make_solver", "maze_map", "observe", "plan", "proximal_agents", "random_map", "random_policy",
    "read_map", "reward", "run_episode", "step", "validate_instance", "warehouse_map", "write_map",
]
