"""Deterministic gridworld for queue-joining scenarios.

The world is a bounded cell grid with an oriented agent (four headings,
four actions), a goal, a fixed line of people, and a ring of "virtual
obstacle" cells around the queue. Virtual obstacles never block movement;
moving onto one is the social violation ("cutting the queue") and is
penalized through the reward, not the dynamics.

Conventions:
  * x grows east, y grows north; N/E/S/W map to 90/0/270/180 degrees.
  * Bearings are relative to the agent heading, wrapped into (-pi, pi].
  * Distances are Euclidean and measured in cells; the map resolution in
    meters only matters when scenarios are built from metric parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Optional, Sequence

from .rng import SplitMix64

TWO_PI = 2.0 * math.pi

Cell = tuple[int, int]


class ScenarioError(ValueError):
    """Raised when poses, maps, or scenarios violate their invariants."""


class Heading(IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3

    @property
    def angle(self) -> float:
        return HEADING_ANGLE[self]

    @property
    def dx(self) -> int:
        return HEADING_DX[self]

    @property
    def dy(self) -> int:
        return HEADING_DY[self]

    def left(self) -> "Heading":
        return Heading((self - 1) % 4)

    def right(self) -> "Heading":
        return Heading((self + 1) % 4)

    @classmethod
    def from_letter(cls, letter: str) -> "Heading":
        try:
            return cls[letter.upper()]
        except KeyError:
            raise ScenarioError(f"unknown heading {letter!r}") from None


# Indexed by Heading value. N is +y and a left turn adds +90 degrees.
HEADING_ANGLE = (math.pi / 2.0, 0.0, -math.pi / 2.0, math.pi)
HEADING_DX = (0, 1, 0, -1)
HEADING_DY = (1, 0, -1, 0)


class Action(IntEnum):
    FORWARD = 0
    BACKWARD = 1
    TURN_LEFT = 2
    TURN_RIGHT = 3

    @property
    def is_move(self) -> bool:
        return self <= Action.BACKWARD


ACTIONS = (Action.FORWARD, Action.BACKWARD, Action.TURN_LEFT, Action.TURN_RIGHT)


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    resolution: float = 0.2
    static_obstacles: frozenset = frozenset()

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ScenarioError("grid dimensions must be positive")
        if not self.resolution > 0.0:
            raise ScenarioError("grid resolution must be positive")
        object.__setattr__(self, "static_obstacles", frozenset(self.static_obstacles))
        for cell in self.static_obstacles:
            if not self.in_bounds(*cell):
                raise ScenarioError(f"static obstacle {cell} out of bounds")

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def passable(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and (x, y) not in self.static_obstacles

    def free_cells(self) -> list:
        """All passable cells in row-major order (used for start sampling)."""
        return [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if (x, y) not in self.static_obstacles
        ]


@dataclass(frozen=True)
class Pose:
    x: int
    y: int
    heading: Heading

    @property
    def cell(self) -> Cell:
        return (self.x, self.y)


@dataclass(frozen=True)
class Person:
    x: int
    y: int
    facing: Heading

    @property
    def cell(self) -> Cell:
        return (self.x, self.y)


@dataclass(frozen=True)
class RewardConfig:
    """Reward constants: goal bonus, per-step penalty, crossing penalty, weight."""

    goal_bonus: float = 10.0
    step_penalty: float = 0.05
    crossing_penalty: float = 1.0
    social_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.goal_bonus <= 0 or self.step_penalty <= 0 or self.crossing_penalty <= 0:
            raise ScenarioError("reward constants must be strictly positive")
        if self.social_weight < 0:
            raise ScenarioError("social weight must be >= 0")


@dataclass(frozen=True)
class QueueScenario:
    grid: GridMap
    goal: Cell
    people: tuple
    virtual_obstacles: frozenset
    opening: frozenset
    start: Optional[Pose] = None  # None means "uniform over free cells"

    def __post_init__(self) -> None:
        object.__setattr__(self, "people", tuple(self.people))
        object.__setattr__(self, "virtual_obstacles", frozenset(self.virtual_obstacles))
        object.__setattr__(self, "opening", frozenset(self.opening))
        if not self.people:
            raise ScenarioError("scenario needs at least one person")
        if not self.grid.passable(*self.goal):
            raise ScenarioError("goal must be a passable cell")
        seen = {self.goal}
        for person in self.people:
            if not self.grid.in_bounds(person.x, person.y):
                raise ScenarioError(f"person at {person.cell} out of bounds")
            if person.cell in seen:
                raise ScenarioError(f"person cell {person.cell} duplicates goal/person")
            seen.add(person.cell)
        for cell in self.virtual_obstacles | self.opening:
            if not self.grid.in_bounds(*cell):
                raise ScenarioError(f"virtual obstacle cell {cell} out of bounds")
        if self.virtual_obstacles & seen:
            raise ScenarioError("virtual obstacles overlap goal or people")
        if self.virtual_obstacles & self.opening:
            raise ScenarioError("opening cells must not be virtual obstacles")
        if self.start is not None:
            validate_pose(self.grid, self.start)


@dataclass(frozen=True)
class Observation:
    """Ego-centric features: distance/bearing to goal, then to each person."""

    goal_dist: float
    goal_bearing: float
    people: tuple  # tuple of (dist, bearing), scenario person order

    def vector(self) -> list:
        out = [self.goal_dist, self.goal_bearing]
        for dist, bearing in self.people:
            out.append(dist)
            out.append(bearing)
        return out


@dataclass(frozen=True)
class Transition:
    pose_before: Pose
    obs_before: Observation
    action: Action
    nav_reward: float
    social_reward: float
    pose_after: Pose
    obs_after: Observation
    done: bool


def wrap_angle(angle: float) -> float:
    """Wrap into (-pi, pi]."""
    while angle <= -math.pi:
        angle += TWO_PI
    while angle > math.pi:
        angle -= TWO_PI
    return angle


def validate_pose(grid: GridMap, pose: Pose) -> None:
    if not grid.passable(pose.x, pose.y):
        raise ScenarioError(f"pose {(pose.x, pose.y)} is out of bounds or blocked")


def step(grid: GridMap, pose: Pose, action: Action) -> Pose:
    """Apply one action; blocked moves are no-ops, turns rotate in place."""
    validate_pose(grid, pose)
    if action == Action.TURN_LEFT:
        return Pose(pose.x, pose.y, pose.heading.left())
    if action == Action.TURN_RIGHT:
        return Pose(pose.x, pose.y, pose.heading.right())
    sign = 1 if action == Action.FORWARD else -1
    nx = pose.x + sign * pose.heading.dx
    ny = pose.y + sign * pose.heading.dy
    if not grid.passable(nx, ny):
        return pose
    return Pose(nx, ny, pose.heading)


def relative_feature(pose: Pose, target: Cell) -> tuple:
    """(distance, bearing) of a target cell as seen from a pose.

    The bearing of the agent's own cell is 0 by convention.
    """
    dx = target[0] - pose.x
    dy = target[1] - pose.y
    if dx == 0 and dy == 0:
        return 0.0, 0.0
    dist = math.sqrt(dx * dx + dy * dy)
    bearing = wrap_angle(math.atan2(dy, dx) - HEADING_ANGLE[pose.heading])
    return dist, bearing


def observe_features(goal: Cell, people: Sequence[Person], pose: Pose) -> Observation:
    goal_dist, goal_bearing = relative_feature(pose, goal)
    feats = tuple(relative_feature(pose, person.cell) for person in people)
    return Observation(goal_dist, goal_bearing, feats)


def observe(scenario: QueueScenario, pose: Pose) -> Observation:
    validate_pose(scenario.grid, pose)
    return observe_features(scenario.goal, scenario.people, pose)


def nav_reward(cfg: RewardConfig, d_prev: float, d_now: float, reached: bool) -> float:
    if d_prev < 0 or d_now < 0:
        raise ScenarioError("distances must be non-negative")
    if reached:
        return cfg.goal_bonus
    return d_prev - d_now - cfg.step_penalty


def social_reward(
    cfg: RewardConfig, scenario: QueueScenario, pose_after: Pose, action: Action
) -> float:
    """-crossing_penalty when a move lands on a virtual obstacle, else 0.

    Moves are single-cell, so membership of the landing cell is the whole
    crossing test; turns never cross. The value is unweighted: the task
    reward applies ``social_weight`` on top of it.
    """
    if action.is_move and pose_after.cell in scenario.virtual_obstacles:
        return -cfg.crossing_penalty
    return 0.0


def build_virtual_obstacles(
    goal: Cell, people: Sequence[Person], margin: int
) -> tuple:
    """Ring of penalty cells around a straight queue, with one entry gap.

    The bounding box of goal plus people is padded by ``margin`` cells; the
    one-cell-thick ring immediately surrounding that padded box becomes the
    virtual obstacles. On the side past the last person, the ring cells
    within ``margin`` of the queue axis (a gap 2*margin + 1 wide, centered
    on the axis) are returned separately as the opening.
    """
    if not people:
        raise ScenarioError("queue must contain at least one person")
    if margin < 1:
        raise ScenarioError("margin must be >= 1")
    cells = [goal] + [p.cell for p in people]
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    vertical = all(x == goal[0] for x in xs)
    horizontal = all(y == goal[1] for y in ys)
    if not (vertical or horizontal):
        raise ScenarioError("people must be collinear with the goal on one axis")

    pad = margin + 1
    x0, x1 = min(xs) - pad, max(xs) + pad
    y0, y1 = min(ys) - pad, max(ys) + pad
    ring = set()
    for x in range(x0, x1 + 1):
        ring.add((x, y0))
        ring.add((x, y1))
    for y in range(y0, y1 + 1):
        ring.add((x0, y))
        ring.add((x1, y))

    last = people[-1].cell
    if vertical:
        axis = goal[0]
        edge_y = y1 if last[1] > goal[1] else y0
        opening = {(x, edge_y) for x in range(axis - margin, axis + margin + 1)}
    else:
        axis = goal[1]
        edge_x = x1 if last[0] > goal[0] else x0
        opening = {(edge_x, y) for y in range(axis - margin, axis + margin + 1)}
    return frozenset(ring - opening), frozenset(opening)


def random_start(
    scenario: QueueScenario, rng: SplitMix64, free_cells: Optional[list] = None
) -> Pose:
    """Uniform start over passable cells and headings.

    Draw order (cell index, then heading) is part of the reproducibility
    contract shared with the training backends.
    """
    cells = free_cells if free_cells is not None else scenario.grid.free_cells()
    x, y = cells[rng.randrange(len(cells))]
    return Pose(x, y, Heading(rng.randrange(4)))


def run_episode(
    scenario: QueueScenario,
    policy: Callable[[Observation], Action],
    cfg: RewardConfig,
    max_steps: int = 200,
    rng: Optional[SplitMix64] = None,
) -> list:
    """Roll one episode; returns the full transition list.

    Starts from the scenario's fixed start, or samples one uniformly when
    the scenario declares a random start (``rng`` required in that case).
    The episode ends on reaching the goal cell or exhausting the budget.
    """
    if max_steps < 1:
        raise ScenarioError("step budget must be >= 1")
    if scenario.start is not None:
        pose = scenario.start
    else:
        if rng is None:
            raise ScenarioError("scenario has a random start; pass an rng")
        pose = random_start(scenario, rng)

    transitions = []
    obs = observe(scenario, pose)
    for t in range(max_steps):
        if pose.cell == scenario.goal:
            break
        action = policy(obs)
        nxt = step(scenario.grid, pose, action)
        obs_after = observe(scenario, nxt)
        reached = nxt.cell == scenario.goal
        r_nav = nav_reward(cfg, obs.goal_dist, obs_after.goal_dist, reached)
        r_soc = social_reward(cfg, scenario, nxt, action)
        done = reached or t == max_steps - 1
        transitions.append(
            Transition(pose, obs, action, r_nav, r_soc, nxt, obs_after, done)
        )
        pose, obs = nxt, obs_after
        if reached:
            break
    return transitions


def enclosed_cells(scenario: QueueScenario) -> frozenset:
    """Cells inside the ring: flood fill from the goal bounded by ring+opening."""
    barrier = scenario.virtual_obstacles | scenario.opening
    grid = scenario.grid
    seen = {scenario.goal}
    frontier = [scenario.goal]
    while frontier:
        x, y = frontier.pop()
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            cell = (nx, ny)
            if grid.in_bounds(nx, ny) and cell not in seen and cell not in barrier:
                seen.add(cell)
                frontier.append(cell)
    return frozenset(seen)
