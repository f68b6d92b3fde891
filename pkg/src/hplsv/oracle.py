"""Exact ground-truth solvers used to validate learned/heuristic results.

These operate on the full pose space (cell x heading), not the quantized
observation space: quantization is a learner artifact, so comparisons
against the learned social table project exact values through the
quantizer and report the aggregation spread.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .env import (
    HEADING_DX,
    HEADING_DY,
    Action,
    Cell,
    GridMap,
    Heading,
    Pose,
    QueueScenario,
    ScenarioError,
    observe,
    validate_pose,
)
from .learner import DualQ, QuantizerConfig, quantize

def dijkstra_actions(grid: GridMap, start: Pose, goal: Cell) -> Optional[int]:
    """Minimal action count from start to any pose at the goal cell.

    Unit costs make this plain breadth-first search over the pose graph;
    blocked moves are dropped rather than kept as self-loops. Returns None
    when the goal cell is unreachable.
    """
    validate_pose(grid, start)
    width = grid.width
    start_idx = (start.y * width + start.x) * 4 + int(start.heading)
    gx, gy = goal
    if (start.x, start.y) == (gx, gy):
        return 0
    dist = {start_idx: 0}
    queue = deque([(start_idx, start.x, start.y, int(start.heading))])
    while queue:
        idx, x, y, h = queue.popleft()
        d = dist[idx] + 1
        for action in range(4):
            if action <= 1:
                sign = 1 if action == 0 else -1
                nx = x + sign * HEADING_DX[h]
                ny = y + sign * HEADING_DY[h]
                nh = h
                if not grid.passable(nx, ny):
                    continue
            elif action == 2:
                nx, ny, nh = x, y, (h + 3) % 4
            else:
                nx, ny, nh = x, y, (h + 1) % 4
            nidx = (ny * width + nx) * 4 + nh
            if nidx in dist:
                continue
            if (nx, ny) == (gx, gy):
                return d
            dist[nidx] = d
            queue.append((nidx, nx, ny, nh))
    return None


@dataclass
class ExactValues:
    """Optimal social action values for every pose, from value iteration."""

    grid: GridMap
    goal: Cell
    values: np.ndarray  # shape (width*height*4, 4)
    iterations: int
    residual: float

    def _index(self, pose: Pose) -> int:
        return (pose.y * self.grid.width + pose.x) * 4 + int(pose.heading)

    def value(self, pose: Pose, action: Action) -> float:
        return float(self.values[self._index(pose), int(action)])

    def greedy_value(self, pose: Pose) -> float:
        return float(self.values[self._index(pose)].max())


def _pose_successors_and_rewards(
    scenario: QueueScenario, crossing_penalty: float
) -> tuple:
    """Vectorized transition tables for the exact pose-space MDP."""
    grid = scenario.grid
    width, height = grid.width, grid.height
    n = width * height * 4
    succ = np.empty((n, 4), dtype=np.int64)
    rew = np.zeros((n, 4), dtype=np.float64)
    valid = np.zeros(n, dtype=bool)
    terminal = np.zeros(n, dtype=bool)
    vobs = scenario.virtual_obstacles
    gx, gy = scenario.goal
    for y in range(height):
        for x in range(width):
            base = (y * width + x) * 4
            passable = grid.passable(x, y)
            for h in range(4):
                idx = base + h
                if not passable:
                    succ[idx] = idx
                    continue
                valid[idx] = True
                terminal[idx] = (x, y) == (gx, gy)
                for action in range(4):
                    if action <= 1:
                        sign = 1 if action == 0 else -1
                        nx = x + sign * HEADING_DX[h]
                        ny = y + sign * HEADING_DY[h]
                        nh = h
                        if not grid.passable(nx, ny):
                            nx, ny = x, y
                        if (nx, ny) in vobs:
                            rew[idx, action] = -crossing_penalty
                    elif action == 2:
                        nx, ny, nh = x, y, (h + 3) % 4
                    else:
                        nx, ny, nh = x, y, (h + 1) % 4
                    succ[idx, action] = (ny * width + nx) * 4 + nh
    return succ, rew, valid, terminal


def social_value_iteration(
    scenario: QueueScenario,
    gamma: float,
    crossing_penalty: float = 1.0,
    tol: float = 1e-9,
    max_iterations: int = 100000,
) -> ExactValues:
    """Exact optimal social values by synchronous Bellman backups.

    Rewards are -crossing_penalty when a move lands on a virtual obstacle
    and 0 otherwise; poses at the goal cell are terminal with value 0.
    Iterates until the max-norm update falls below ``tol``; since the
    update is a gamma-contraction, the returned values satisfy the Bellman
    optimality equation within gamma * tol at every state-action pair.
    """
    if not 0.0 <= gamma < 1.0:
        raise ScenarioError("gamma must be in [0, 1)")
    if tol <= 0:
        raise ScenarioError("tolerance must be positive")
    succ, rew, valid, terminal = _pose_successors_and_rewards(scenario, crossing_penalty)
    active = valid & ~terminal
    q = np.zeros_like(rew)
    iterations = 0
    residual = np.inf
    while iterations < max_iterations:
        iterations += 1
        v = q.max(axis=1)
        v[terminal] = 0.0
        v[~valid] = 0.0
        q_new = rew + gamma * v[succ]
        q_new[~active] = 0.0
        residual = float(np.abs(q_new - q).max())
        q = q_new
        if residual < tol:
            break
    return ExactValues(scenario.grid, scenario.goal, q, iterations, residual)


def bellman_residual(ev: ExactValues, scenario: QueueScenario, gamma: float,
                     crossing_penalty: float = 1.0) -> float:
    """Max |Q - TQ| over valid, non-terminal state-action pairs."""
    succ, rew, valid, terminal = _pose_successors_and_rewards(scenario, crossing_penalty)
    active = valid & ~terminal
    v = ev.values.max(axis=1)
    v[terminal] = 0.0
    v[~valid] = 0.0
    backup = rew + gamma * v[succ]
    backup[~active] = 0.0
    return float(np.abs(backup - ev.values)[active].max())


def project_exact_values(
    ev: ExactValues, scenario: QueueScenario, quantizer: QuantizerConfig
) -> dict:
    """Exact values grouped by quantized key: (key, action) -> value list.

    Terminal poses are skipped (their values are a convention, not a
    prediction). The caller aggregates the spread, typically max and mean.
    """
    grid = scenario.grid
    grouped: dict = {}
    for y in range(grid.height):
        for x in range(grid.width):
            if not grid.passable(x, y) or (x, y) == scenario.goal:
                continue
            for h in range(4):
                pose = Pose(x, y, Heading(h))
                key = quantize(quantizer, observe(scenario, pose))
                idx = (y * grid.width + x) * 4 + h
                for action in range(4):
                    grouped.setdefault((key, action), []).append(
                        float(ev.values[idx, action])
                    )
    return grouped


@dataclass
class DeviationReport:
    """Learned social table vs exact values, per quantized key."""

    rows: list  # (key, action, learned, exact_max, exact_mean, n_poses)
    max_abs_dev: float
    mean_abs_dev: float


def social_table_deviation(
    dq: DualQ, scenario: QueueScenario, ev: Optional[ExactValues] = None,
    tol: float = 1e-9,
) -> DeviationReport:
    """Compare the learned social table against value iteration.

    Deviation is measured against the per-key maximum of the exact values
    (the spec's aggregation), over every (quantized key, action) realized
    by a valid non-terminal pose.
    """
    if ev is None:
        ev = social_value_iteration(
            scenario, dq.gamma, dq.rewards.crossing_penalty, tol
        )
    grouped = project_exact_values(ev, scenario, dq.quantizer)
    rows = []
    devs = []
    for (key, action), values in sorted(grouped.items()):
        learned = dq.q_social.value(key, Action(action))
        exact_max = max(values)
        exact_mean = sum(values) / len(values)
        dev = abs(learned - exact_max)
        devs.append(dev)
        rows.append((key, Action(action), learned, exact_max, exact_mean, len(values)))
    return DeviationReport(rows, max(devs) if devs else 0.0,
                           sum(devs) / len(devs) if devs else 0.0)


@dataclass
class OptimalPath:
    found: bool
    path: list  # [(Pose, Optional[Action])]
    actions_count: int
    crossings: int
    combined_cost: float


def social_optimal_path(
    grid: GridMap,
    scenario: QueueScenario,
    start: Pose,
    weight: float,
    crossing_penalty: float = 1.0,
) -> OptimalPath:
    """Exact minimizer of action count + weight * crossing penalties.

    Uniform-cost search with the true edge cost 1 + weight * penalty on
    moves that land on a virtual obstacle. This sees the ground truth the
    planner is denied, so it serves as the reference optimum.
    """
    validate_pose(grid, start)
    width = grid.width
    vobs = scenario.virtual_obstacles
    gx, gy = scenario.goal
    start_idx = (start.y * width + start.x) * 4 + int(start.heading)
    dist = {start_idx: 0.0}
    via = {start_idx: (-1, None)}
    frontier = [(0.0, 0, start_idx, start.x, start.y, int(start.heading))]
    counter = 1
    goal_idx = -1
    while frontier:
        d, _, idx, x, y, h = heapq.heappop(frontier)
        if d != dist.get(idx):
            continue
        if (x, y) == (gx, gy):
            goal_idx = idx
            break
        for action in range(4):
            cost = 1.0
            if action <= 1:
                sign = 1 if action == 0 else -1
                nx = x + sign * HEADING_DX[h]
                ny = y + sign * HEADING_DY[h]
                nh = h
                if not grid.passable(nx, ny):
                    continue
                if (nx, ny) in vobs:
                    cost += weight * crossing_penalty
            elif action == 2:
                nx, ny, nh = x, y, (h + 3) % 4
            else:
                nx, ny, nh = x, y, (h + 1) % 4
            nidx = (ny * width + nx) * 4 + nh
            nd = d + cost
            if nd < dist.get(nidx, float("inf")):
                dist[nidx] = nd
                via[nidx] = (idx, action)
                heapq.heappush(frontier, (nd, counter, nidx, nx, ny, nh))
                counter += 1
    if goal_idx < 0:
        return OptimalPath(False, [], 0, 0, float("inf"))
    chain = []
    idx = goal_idx
    while idx != -1:
        parent, action = via[idx]
        cell = idx // 4
        pose = Pose(cell % width, cell // width, Heading(idx % 4))
        chain.append((pose, None if action is None else Action(action)))
        idx = parent
    chain.reverse()
    crossings = sum(
        1
        for pose, action in chain[1:]
        if action is not None and action.is_move and pose.cell in vobs
    )
    return OptimalPath(True, chain, len(chain) - 1, crossings, dist[goal_idx])
