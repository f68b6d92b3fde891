"""Batch evaluation: planner vs baseline vs exact social optimum.

Each scenario yields one report row comparing the socially-weighted plan
against the plain shortest-path baseline (weight 0) and the ground-truth
reference from exhaustive search. The reference uses a crossing-
prohibitive weight whenever the planner runs with a social weight, and
plain shortest paths when it does not, so the length ratio always
compares against "the best path that respects the objective actually
asked for".
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

from .env import QueueScenario, RewardConfig, run_episode
from .learner import DualQ, greedy_policy
from .oracle import social_optimal_path
from .planner import PlannerConfig, annotate_crossings, plan
from .rng import SplitMix64

# Weight at which a single crossing outweighs any detour on these maps.
PROHIBITIVE_WEIGHT = 1.0e6


@dataclass(frozen=True)
class EvalRow:
    scenario_id: int
    seed: int
    success: bool
    crossings: int
    actions: int
    oracle_actions: int
    length_ratio: float
    expanded: int
    far_social_max: float
    baseline_actions: int
    baseline_crossings: int
    baseline_expanded: int


EVAL_HEADER = [
    "scenario",
    "seed",
    "success",
    "crossings",
    "actions",
    "oracle_actions",
    "length_ratio",
    "expanded",
    "far_social_max",
    "baseline_actions",
    "baseline_crossings",
    "baseline_expanded",
]


def evaluate_scenarios(
    scenarios: Sequence[QueueScenario],
    dq: Optional[DualQ],
    cfg: PlannerConfig = PlannerConfig(),
    seed: int = 0,
) -> list:
    """One EvalRow per scenario; scenarios must carry fixed starts."""
    rows = []
    oracle_weight = 0.0 if cfg.weight == 0.0 else PROHIBITIVE_WEIGHT
    k_s = dq.rewards.crossing_penalty if dq is not None else 1.0
    for idx, scenario in enumerate(scenarios):
        start = scenario.start
        if start is None:
            raise ValueError(f"scenario {idx} has a random start; evaluation needs a pose")
        res = annotate_crossings(
            plan(scenario.grid, scenario.goal, scenario.people, start, dq, cfg), scenario
        )
        base = annotate_crossings(
            plan(
                scenario.grid,
                scenario.goal,
                scenario.people,
                start,
                dq,
                PlannerConfig(weight=0.0, threshold=cfg.threshold),
            ),
            scenario,
        )
        ref = social_optimal_path(scenario.grid, scenario, start, oracle_weight, k_s)
        ratio = (
            res.nav_cost / ref.actions_count
            if res.found and ref.found and ref.actions_count > 0
            else float("nan")
        )
        rows.append(
            EvalRow(
                scenario_id=idx,
                seed=seed,
                success=res.found,
                crossings=res.crossings,
                actions=res.nav_cost,
                oracle_actions=ref.actions_count,
                length_ratio=ratio,
                expanded=res.expanded,
                far_social_max=res.far_social_max,
                baseline_actions=base.nav_cost,
                baseline_crossings=base.crossings,
                baseline_expanded=base.expanded,
            )
        )
    return rows


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_eval_csv(rows: Sequence[EvalRow], path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVAL_HEADER)
        for r in rows:
            writer.writerow(
                [
                    _fmt(r.scenario_id),
                    _fmt(r.seed),
                    _fmt(r.success),
                    _fmt(r.crossings),
                    _fmt(r.actions),
                    _fmt(r.oracle_actions),
                    _fmt(r.length_ratio),
                    _fmt(r.expanded),
                    _fmt(r.far_social_max),
                    _fmt(r.baseline_actions),
                    _fmt(r.baseline_crossings),
                    _fmt(r.baseline_expanded),
                ]
            )


TRAIN_LOG_HEADER = ["episode", "return", "success", "crossings"]


def write_train_log(stats, path) -> None:
    """Per-episode training log (episode, return, success, crossings)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAIN_LOG_HEADER)
        for s in stats:
            writer.writerow(
                [_fmt(s.episode), _fmt(s.task_return), _fmt(s.reached), _fmt(s.crossings)]
            )


def rollout_success_rate(
    scenario: QueueScenario,
    dq: DualQ,
    episodes: int = 100,
    max_steps: int = 200,
    seed: int = 0,
    rewards: RewardConfig = RewardConfig(),
) -> tuple:
    """Greedy-policy rollouts from random starts.

    Returns (success_rate, mean_steps, mean_crossings); used to judge
    whether the task table actually learned to reach the goal.
    """
    rng = SplitMix64(seed)
    policy = greedy_policy(dq)
    randomized = QueueScenario(
        scenario.grid,
        scenario.goal,
        scenario.people,
        scenario.virtual_obstacles,
        scenario.opening,
        None,
    )
    successes = 0
    steps = 0
    crossings = 0
    for _ in range(episodes):
        transitions = run_episode(randomized, policy, rewards, max_steps, rng)
        if transitions and transitions[-1].pose_after.cell == scenario.goal:
            successes += 1
        elif not transitions:
            successes += 1  # started on the goal cell
        steps += len(transitions)
        crossings += sum(1 for t in transitions if t.social_reward != 0.0)
    return successes / episodes, steps / episodes, crossings / episodes
