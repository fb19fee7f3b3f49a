"""Suite execution, result tables, summaries and episode traces."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass
from multiprocessing import Pool
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from ..mapgen import MapSpec, make_instance
from ..solvers import make_solver
from ..world import EpisodeMetrics, Instance, WorldState, run_episode
from .config import RunConfig

log = logging.getLogger(__name__)

CSV_COLUMNS = ("map_id", "family", "n_agents", "solver", "seed", "throughput", "goals", "decision_ms", "wall_s", "status")
TIMING_COLUMNS = ("decision_ms", "wall_s")


@dataclass
class ResultRow:
    map_id: str
    family: str
    n_agents: int
    solver: str
    seed: int
    throughput: float
    goals: int
    decision_ms: float
    wall_s: float
    status: str = "ok"

    @property
    def key(self) -> tuple:
        return (self.map_id, self.n_agents, self.solver, self.seed)

    def to_csv(self) -> list[str]:
        return [
            self.map_id,
            self.family,
            str(self.n_agents),
            self.solver,
            str(self.seed),
            repr(float(self.throughput)),
            str(self.goals),
            f"{self.decision_ms:.4f}",
            f"{self.wall_s:.3f}",
            self.status,
        ]

    @classmethod
    def from_csv(cls, rec: dict) -> "ResultRow":
        return cls(
            map_id=rec["map_id"],
            family=rec["family"],
            n_agents=int(rec["n_agents"]),
            solver=rec["solver"],
            seed=int(rec["seed"]),
            throughput=float(rec["throughput"]),
            goals=int(rec["goals"]),
            decision_ms=float(rec["decision_ms"]),
            wall_s=float(rec["wall_s"]),
            status=rec["status"],
        )


@dataclass(frozen=True)
class Job:
    spec: MapSpec
    n_agents: int
    solver: str
    seed: int
    episode_length: int
    variant: str
    params: tuple
    trace_path: str | None = None

    @property
    def key(self) -> tuple:
        return (self.spec.map_id, self.n_agents, self.solver, self.seed)


def plan_jobs(config: RunConfig) -> list[Job]:
    jobs = []
    for seed in config.seeds:
        for spec in config.map_specs(seed):
            for n in config.agents:
                for entry in config.solvers:
                    variant, params = config.solver_params(entry)
                    trace = None
                    if config.trace_dir:
                        name = f"{spec.map_id}_n{n}_{entry.replace('/', '+')}_s{seed}.jsonl"
                        trace = str(Path(config.trace_dir) / name)
                    jobs.append(Job(spec, n, entry, seed, config.episode_length, variant, tuple(sorted(params.items())), trace))
    return jobs


def build_instance(spec: MapSpec, n_agents: int, seed: int) -> Instance:
    grid = spec.build()
    return make_instance(grid, n_agents, spec.family, seed, map_id=spec.map_id)


def run_job(job: Job) -> ResultRow:
    t0 = time.perf_counter()
    try:
        inst = build_instance(job.spec, job.n_agents, job.seed)
        solver = make_solver(job.variant, **dict(job.params))
        metrics = run_episode(inst, solver, job.episode_length, fov=solver.fov, record=job.trace_path is not None)
        if job.trace_path is not None:
            export_trace(metrics, job.trace_path)
        return ResultRow(
            job.spec.map_id, job.spec.family, job.n_agents, job.solver, job.seed,
            metrics.throughput, metrics.total_goals_reached, metrics.mean_decision_ms,
            time.perf_counter() - t0,
        )
    except Exception as exc:  # recorded per row; the suite keeps going
        log.exception("run %s failed", job.key)
        return ResultRow(
            job.spec.map_id, job.spec.family, job.n_agents, job.solver, job.seed,
            float("nan"), 0, float("nan"), time.perf_counter() - t0,
            status=f"error:{type(exc).__name__}",
        )


def read_results(path: str | Path) -> list[ResultRow]:
    path = Path(path)
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        return [ResultRow.from_csv(rec) for rec in csv.DictReader(fh)]


def write_results(rows: Iterable[ResultRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(row.to_csv())


def _jsonl_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".jsonl")


def run_suite(config: RunConfig, jobs: Sequence[Job] | None = None) -> list[ResultRow]:
    """Run every (instance, solver, seed) job, skipping those already in the output.

    Rows are appended in job order as they complete, so an interrupted suite
    resumes where it stopped. Failed rows are retried on resume.
    """
    out = Path(config.output)
    jobs = plan_jobs(config) if jobs is None else list(jobs)
    done = {r.key: r for r in read_results(out) if r.status == "ok"}
    keep = list(done.values())
    write_results(keep, out)
    with _jsonl_path(out).open("w") as fh:
        for r in keep:
            fh.write(json.dumps(asdict(r)) + "\n")
    todo = [j for j in jobs if j.key not in done]
    if config.trace_dir:
        Path(config.trace_dir).mkdir(parents=True, exist_ok=True)
    log.info("%d jobs planned, %d already done, %d to run", len(jobs), len(jobs) - len(todo), len(todo))
    new = {}
    pool = Pool(config.workers) if config.workers > 1 and len(todo) > 1 else None
    try:
        results = pool.imap(run_job, todo) if pool else map(run_job, todo)
        with out.open("a", newline="") as fh, _jsonl_path(out).open("a") as jf:
            w = csv.writer(fh, lineterminator="\n")
            for job, row in zip(todo, results):
                w.writerow(row.to_csv())
                fh.flush()
                jf.write(json.dumps(asdict(row)) + "\n")
                jf.flush()
                new[job.key] = row
                log.info("%s n=%d %s seed=%d: throughput %.4f", job.spec.map_id, job.n_agents, job.solver, job.seed, row.throughput)
    finally:
        if pool:
            pool.close()
            pool.join()
    merged = {**done, **new}
    return [merged[j.key] for j in jobs if j.key in merged]


@dataclass
class SummaryRow:
    family: str
    n_agents: int
    solver: str
    n_runs: int
    throughput_mean: float
    ci_low: float
    ci_high: float
    decision_ms_mean: float


def t_interval(values: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """Mean and Student-t half-width; half-width is NaN for fewer than two values."""
    x = np.asarray(values, dtype=float)
    mean = float(x.mean())
    if len(x) < 2:
        return mean, float("nan")
    sem = float(x.std(ddof=1)) / math.sqrt(len(x))
    return mean, float(stats.t.ppf(0.5 + level / 2, len(x) - 1)) * sem


def summarize(rows: Iterable[ResultRow]) -> list[SummaryRow]:
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        if r.status != "ok":
            continue
        groups.setdefault((r.family, r.n_agents, r.solver), []).append(r)
    out = []
    for (family, n, solver), members in sorted(groups.items()):
        if len(members) < 2:
            log.warning("group %s/%d/%s has %d run(s); confidence interval undefined", family, n, solver, len(members))
        mean, half = t_interval([m.throughput for m in members])
        out.append(SummaryRow(
            family, n, solver, len(members), mean, mean - half, mean + half,
            float(np.mean([m.decision_ms for m in members])),
        ))
    return out


def write_summary(summary: Iterable[SummaryRow], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ("family", "n_agents", "solver", "n_runs", "throughput_mean", "ci_low", "ci_high", "decision_ms_mean")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for s in summary:
            w.writerow([getattr(s, c) for c in cols])


def export_trace(metrics: EpisodeMetrics, path: str | Path) -> None:
    if metrics.trace is None:
        raise ValueError("episode was not recorded; run it with record=True")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rec in metrics.trace:
            fh.write(json.dumps(rec) + "\n")


def read_trace(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def replay(trace: Sequence[dict], instance: Instance) -> list[str]:
    """Re-execute recorded actions; returns mismatches (empty when the trace is faithful)."""
    state = WorldState(instance)
    problems = []
    for rec in trace:
        t = rec["t"]
        if [list(p) for p in state.positions()] != rec["before"]:
            problems.append(f"t={t}: start positions differ")
        if [list(a.goal) for a in state.agents] != rec["goals"]:
            problems.append(f"t={t}: goals differ")
        events = state.step(rec["actions"])
        if [list(p) for p in state.positions()] != rec["positions"]:
            problems.append(f"t={t}: positions differ after step")
        if [[e.agent_id, list(e.new_goal)] for e in events] != rec["reached"]:
            problems.append(f"t={t}: goal events differ")
    return problems
