"""A* over the pose graph with a learned social cost term.

The planner never sees the virtual obstacles. Its only social knowledge is
the trained social table: each generated transition is charged a cost
derived from the table value of (observation at the predecessor, action),
thresholded so weak evidence contributes nothing. Priority is

    f = resolution * (nav_steps + manhattan) + weight * (social_cost + incoming_social)

Navigation is costed in meters (one step traverses one cell of
``grid.resolution`` meters) while the social terms are dimensionless
expected crossings in [0, 1]; the weight prices a crossing in meters of
detour. social_cost accumulates the thresholded per-transition values
along the partial path and incoming_social is the thresholded value of
the edge that generated the node.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .env import (
    HEADING_DX,
    HEADING_DY,
    Action,
    Cell,
    GridMap,
    Heading,
    Person,
    Pose,
    QueueScenario,
    ScenarioError,
    observe_features,
    validate_pose,
)
from .learner import DualQ

# Expanded nodes farther than this (Chebyshev) from the goal and every
# person count toward the far-field social statistic.
FAR_FIELD_RADIUS = 20

_HEADINGS = (Heading.N, Heading.E, Heading.S, Heading.W)
_ACTIONS = (Action.FORWARD, Action.BACKWARD, Action.TURN_LEFT, Action.TURN_RIGHT)


@dataclass(frozen=True)
class PlannerConfig:
    weight: float = 1.0
    threshold: float = 0.3
    reopen_closed: bool = True

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ScenarioError("social weight must be >= 0")
        if not 0.0 <= self.threshold < 1.0:
            raise ScenarioError("threshold must be in [0, 1)")


@dataclass
class PlanResult:
    found: bool
    path: list  # [(Pose, Optional[Action])], action is the edge into the pose
    nav_cost: int
    social_cost: float
    per_step_social: list  # raw (unthresholded) per-transition costs
    expanded: int
    far_social_max: float
    crossings: Optional[int] = None  # ground truth, annotated after planning

    @property
    def actions(self) -> list:
        return [action for _, action in self.path[1:]]


def nav_heuristic(pose: Pose, goal: Cell) -> int:
    """Manhattan distance in cells; ignores heading, hence admissible."""
    return abs(goal[0] - pose.x) + abs(goal[1] - pose.y)


def transition_social_cost(dq: Optional[DualQ], obs_prev, action) -> float:
    """Social cost of taking ``action`` from the state observed as ``obs_prev``.

    The social table estimates the (negative) cumulative crossing penalty;
    dividing by the per-crossing penalty rescales it to roughly "expected
    crossings", and the clamp maps it into [0, 1] where 0 is socially safe.
    Unseen states read 0 from the table, so the cost is exactly 0 there.
    """
    if dq is None:
        return 0.0
    q = dq.social_value(obs_prev, action)
    c = -q / dq.rewards.crossing_penalty
    if c <= 0.0:
        return 0.0
    if c > 1.0:
        return 1.0
    return c


def social_heuristic(cost: float, threshold: float) -> float:
    """Confidence gate: pass the cost through only above the threshold."""
    return cost if cost > threshold else 0.0


def plan(
    grid: GridMap,
    goal: Cell,
    people: Sequence[Person],
    start: Pose,
    dq: Optional[DualQ] = None,
    cfg: PlannerConfig = PlannerConfig(),
) -> PlanResult:
    """Search for a pose path from start to the goal cell (any heading).

    Successor edges are the four actions, each costing one cell of
    travel (``grid.resolution`` meters); blocked moves are skipped. Ties
    break on (f, manhattan, insertion order). Because the weighted social
    term can make f non-monotone, a node is re-expanded whenever it is
    reached with strictly lower resolution*nav_steps + weight*social_cost.
    """
    validate_pose(grid, start)
    if not grid.passable(*goal):
        raise ScenarioError("goal must be a passable cell")

    weight = cfg.weight
    threshold = cfg.threshold
    width = grid.width
    res = grid.resolution
    people = tuple(people)
    px = [p.x for p in people]
    py = [p.y for p in people]
    gx, gy = goal

    def pose_index(x: int, y: int, h: int) -> int:
        return (y * width + x) * 4 + h

    start_idx = pose_index(start.x, start.y, int(start.heading))
    # pose index -> (parent index, action, raw cost, thresholded cost)
    via = {start_idx: (-1, None, 0.0, 0.0)}
    best = {start_idx: 0.0}
    g_nav = {start_idx: 0}
    g_soc = {start_idx: 0.0}
    closed = set()
    h0 = nav_heuristic(start, goal)
    # entries: (f, manhattan, fifo, combined-at-push, index, x, y, heading)
    frontier = [(res * h0, h0, 0, 0.0, start_idx, start.x, start.y, int(start.heading))]
    counter = 1
    expanded = 0
    far_social_max = 0.0
    goal_idx = -1

    while frontier:
        _, _, _, combined, idx, x, y, h = heapq.heappop(frontier)
        if combined != best.get(idx):
            continue  # superseded by a cheaper route to this pose
        if x == gx and y == gy:
            goal_idx = idx
            break
        expanded += 1
        closed.add(idx)
        if idx != start_idx:
            far = max(abs(x - gx), abs(y - gy)) > FAR_FIELD_RADIUS
            if far:
                for i in range(len(px)):
                    if max(abs(x - px[i]), abs(y - py[i])) <= FAR_FIELD_RADIUS:
                        far = False
                        break
            if far:
                gated_in = via[idx][3]
                if gated_in > far_social_max:
                    far_social_max = gated_in

        obs_prev = (
            observe_features(goal, people, Pose(x, y, _HEADINGS[h]))
            if dq is not None
            else None
        )
        nav = g_nav[idx]
        soc = g_soc[idx]

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

            raw = (
                transition_social_cost(dq, obs_prev, _ACTIONS[action])
                if obs_prev is not None
                else 0.0
            )
            gated = raw if raw > threshold else 0.0
            child_nav = nav + 1
            child_soc = soc + gated
            child_cost = res * child_nav + weight * child_soc
            child_idx = pose_index(nx, ny, nh)
            known = best.get(child_idx)
            if known is not None and child_cost >= known:
                continue
            if known is not None and child_idx in closed and not cfg.reopen_closed:
                continue
            best[child_idx] = child_cost
            g_nav[child_idx] = child_nav
            g_soc[child_idx] = child_soc
            via[child_idx] = (idx, action, raw, gated)
            hn = abs(gx - nx) + abs(gy - ny)
            fn = res * (child_nav + hn) + weight * (child_soc + gated)
            heapq.heappush(
                frontier, (fn, hn, counter, child_cost, child_idx, nx, ny, nh)
            )
            counter += 1

    if goal_idx < 0:
        return PlanResult(False, [], 0, 0.0, [], expanded, far_social_max)

    chain = []
    idx = goal_idx
    while idx != -1:
        parent, action, raw, _ = via[idx]
        cell = idx // 4
        pose = Pose(cell % width, cell // width, _HEADINGS[idx % 4])
        chain.append((pose, None if action is None else _ACTIONS[action], raw))
        idx = parent
    chain.reverse()
    path = [(pose, action) for pose, action, _ in chain]
    per_step = [raw for _, action, raw in chain if action is not None]
    return PlanResult(
        True,
        path,
        g_nav[goal_idx],
        g_soc[goal_idx],
        per_step,
        expanded,
        far_social_max,
    )


def annotate_crossings(result: PlanResult, scenario: QueueScenario) -> PlanResult:
    """Fill in the ground-truth crossing count from the full scenario."""
    if not result.found:
        return replace(result, crossings=0)
    total = 0
    for pose, action in result.path[1:]:
        if action is not None and action.is_move and pose.cell in scenario.virtual_obstacles:
            total += 1
    return replace(result, crossings=total)
