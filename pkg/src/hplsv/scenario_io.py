"""Scenario text format, bundled scenarios, and the jittered generator.

The file format is one directive per line::

    version 1
    grid W H RESOLUTION
    goal X Y
    person X Y HEADING        # repeatable, front of the queue first
    start X Y HEADING         # or: start random
    margin M                  # or explicit cell lists:
    vobstacle X Y             # repeatable
    opening X Y               # repeatable

``#`` starts a comment; blank lines are ignored. ``margin`` and explicit
cell lists are mutually exclusive.
"""
from __future__ import annotations

import math
from importlib import resources
from typing import Optional

from .env import (
    GridMap,
    Heading,
    Person,
    Pose,
    QueueScenario,
    ScenarioError,
    build_virtual_obstacles,
)
from .rng import SplitMix64


class ScenarioParseError(ScenarioError):
    """Parse failure with the offending line number."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_scenario(text: str) -> QueueScenario:
    version: Optional[int] = None
    grid: Optional[GridMap] = None
    goal = None
    people = []
    start: Optional[Pose] = None
    start_seen = False
    margin: Optional[int] = None
    vobstacles = set()
    opening = set()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]

        def need(n: int) -> None:
            if len(parts) != n + 1:
                raise ScenarioParseError(line_no, f"{tag} expects {n} arguments")

        def cell(i: int) -> tuple:
            try:
                return (int(parts[i]), int(parts[i + 1]))
            except ValueError:
                raise ScenarioParseError(line_no, f"{tag} expects integer cells") from None

        try:
            if tag == "version":
                need(1)
                if version is not None:
                    raise ScenarioParseError(line_no, "duplicate version directive")
                version = int(parts[1])
                if version != 1:
                    raise ScenarioParseError(line_no, f"unsupported version {version}")
            elif tag == "grid":
                need(3)
                if grid is not None:
                    raise ScenarioParseError(line_no, "duplicate grid directive")
                grid = GridMap(int(parts[1]), int(parts[2]), float(parts[3]))
            elif tag == "goal":
                need(2)
                if goal is not None:
                    raise ScenarioParseError(line_no, "duplicate goal directive")
                goal = cell(1)
            elif tag == "person":
                need(3)
                x, y = cell(1)
                people.append(Person(x, y, Heading.from_letter(parts[3])))
            elif tag == "start":
                if start_seen:
                    raise ScenarioParseError(line_no, "duplicate start directive")
                start_seen = True
                if len(parts) == 2 and parts[1] == "random":
                    start = None
                else:
                    need(3)
                    x, y = cell(1)
                    start = Pose(x, y, Heading.from_letter(parts[3]))
            elif tag == "margin":
                need(1)
                if margin is not None:
                    raise ScenarioParseError(line_no, "duplicate margin directive")
                margin = int(parts[1])
            elif tag == "vobstacle":
                need(2)
                vobstacles.add(cell(1))
            elif tag == "opening":
                need(2)
                opening.add(cell(1))
            else:
                raise ScenarioParseError(line_no, f"unknown directive {tag!r}")
        except ScenarioParseError:
            raise
        except (ScenarioError, ValueError) as exc:
            raise ScenarioParseError(line_no, str(exc)) from None

    if version is None:
        raise ScenarioParseError(0, "missing version directive")
    if grid is None:
        raise ScenarioParseError(0, "missing grid directive")
    if goal is None:
        raise ScenarioParseError(0, "missing goal directive")
    if not people:
        raise ScenarioParseError(0, "missing person directive")
    if not start_seen:
        raise ScenarioParseError(0, "missing start directive")
    if margin is not None and (vobstacles or opening):
        raise ScenarioParseError(0, "margin and explicit vobstacle/opening lines are exclusive")
    if margin is None and not vobstacles:
        raise ScenarioParseError(0, "need either margin or explicit vobstacle lines")

    try:
        if margin is not None:
            vobs, opening_cells = build_virtual_obstacles(goal, people, margin)
        else:
            vobs, opening_cells = frozenset(vobstacles), frozenset(opening)
        return QueueScenario(grid, goal, tuple(people), vobs, opening_cells, start)
    except ScenarioParseError:
        raise
    except ScenarioError as exc:
        raise ScenarioParseError(0, str(exc)) from None


def print_scenario(scenario: QueueScenario) -> str:
    """Render a scenario back to the text format (explicit cell lists)."""
    grid = scenario.grid
    lines = ["version 1"]
    lines.append("grid %d %d %s" % (grid.width, grid.height, repr(grid.resolution)))
    lines.append("goal %d %d" % scenario.goal)
    for person in scenario.people:
        lines.append("person %d %d %s" % (person.x, person.y, person.facing.name))
    if scenario.start is None:
        lines.append("start random")
    else:
        s = scenario.start
        lines.append("start %d %d %s" % (s.x, s.y, s.heading.name))
    for x, y in sorted(scenario.virtual_obstacles):
        lines.append("vobstacle %d %d" % (x, y))
    for x, y in sorted(scenario.opening):
        lines.append("opening %d %d" % (x, y))
    return "\n".join(lines) + "\n"


def load_scenario(path) -> QueueScenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def bundled_scenario(name: str) -> QueueScenario:
    """Load a scenario shipped with the package (``demo``, ``demo_100x100``)."""
    text = resources.files(__package__).joinpath(f"scenarios/{name}.txt").read_text()
    return parse_scenario(text)


# Generator constants for the continuous-like scenario family: metric
# spacings snapped onto the 0.2 m grid, queue box kept clear of the border
# so the opening is always approachable.
GENERATOR_GRID = 30
GENERATOR_RESOLUTION = 0.2
GENERATOR_MARGIN = math.ceil(0.5 / GENERATOR_RESOLUTION)  # 0.5 m standoff

_DIRECTIONS = ((0, 1), (1, 0), (0, -1), (-1, 0))  # N, E, S, W queue growth
_FACING = (Heading.S, Heading.W, Heading.N, Heading.E)  # toward the goal


def generate_continuous_like(seed: int, count: int) -> list:
    """Deterministic random queue scenarios at 0.2 m resolution.

    Queue axis, direction, goal cell, person count (1-3), and metric
    person spacing (0.4-0.8 m, snapped to the grid) are sampled from a
    seeded generator; the start pose is uniform over free cells outside
    the queue box. Invalid layouts (ring touching the border) are
    rejected and resampled, so the sequence is reproducible for a given
    seed.
    """
    if count < 1:
        raise ScenarioError("count must be >= 1")
    rng = SplitMix64(seed)
    size = GENERATOR_GRID
    pad = GENERATOR_MARGIN + 1
    grid = GridMap(size, size, GENERATOR_RESOLUTION)
    out = []
    while len(out) < count:
        n_people = 1 + rng.randrange(3)
        direction = rng.randrange(4)
        dx, dy = _DIRECTIONS[direction]
        goal = (rng.randrange(size), rng.randrange(size))
        cells = []
        x, y = goal
        for _ in range(n_people):
            meters = 0.4 + 0.4 * rng.random()
            gap = round(meters / GENERATOR_RESOLUTION)
            x, y = x + dx * gap, y + dy * gap
            cells.append((x, y))
        xs = [goal[0]] + [c[0] for c in cells]
        ys = [goal[1]] + [c[1] for c in cells]
        # Keep one free row/column outside the ring on every side.
        if (
            min(xs) - pad < 1
            or max(xs) + pad > size - 2
            or min(ys) - pad < 1
            or max(ys) + pad > size - 2
        ):
            continue
        people = tuple(Person(cx, cy, _FACING[direction]) for cx, cy in cells)
        vobs, opening = build_virtual_obstacles(goal, people, GENERATOR_MARGIN)
        x0, x1 = min(xs) - pad, max(xs) + pad
        y0, y1 = min(ys) - pad, max(ys) + pad
        while True:
            sx, sy = rng.randrange(size), rng.randrange(size)
            if not (x0 <= sx <= x1 and y0 <= sy <= y1):
                break
        start = Pose(sx, sy, Heading(rng.randrange(4)))
        out.append(QueueScenario(grid, goal, people, vobs, opening, start))
    return out
