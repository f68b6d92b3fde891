"""Figure rendering: per-cell social cost shading plus scenario markers.

Two file outputs share the same geometry: a binary PPM with a fixed
palette (bit-exact across runs, used by the determinism checks) and an
SVG for humans. A terminal ASCII view rounds it out.

Palette: white background, gray ramp toward black for rising social
cost, red virtual obstacles, orange people (with a facing arrow), green
goal, cyan start, blue path dots.
"""
from __future__ import annotations

from typing import Optional, Sequence

from .env import (
    HEADING_DX,
    HEADING_DY,
    Action,
    GridMap,
    Heading,
    Pose,
    QueueScenario,
    observe_features,
)
from .learner import DualQ
from .planner import social_heuristic, transition_social_cost

WHITE = (255, 255, 255)
RED = (220, 40, 40)
ORANGE = (245, 150, 40)
ARROW = (120, 60, 0)
GREEN = (40, 180, 70)
CYAN = (40, 200, 220)
BLUE = (40, 80, 230)
DARK = (60, 60, 60)

_HEADINGS = (Heading.N, Heading.E, Heading.S, Heading.W)


def cost_field(
    grid: GridMap,
    goal,
    people,
    dq: Optional[DualQ],
    threshold: float = 0.3,
) -> list:
    """Per-cell social cost: max gated cost over transitions into the cell.

    For every pose at the cell, every action that could have produced it
    (moves from the neighbor behind, turns in place) is priced with the
    learned table; the cell keeps the maximum thresholded value. With no
    table the field is all zeros.
    """
    field = [[0.0] * grid.width for _ in range(grid.height)]
    if dq is None:
        return field
    people = tuple(people)
    for y in range(grid.height):
        for x in range(grid.width):
            if not grid.passable(x, y):
                continue
            best = 0.0
            for h in range(4):
                for action in range(4):
                    if action <= 1:
                        sign = 1 if action == 0 else -1
                        px = x - sign * HEADING_DX[h]
                        py = y - sign * HEADING_DY[h]
                        ph = h
                    elif action == 2:
                        px, py, ph = x, y, (h + 1) % 4
                    else:
                        px, py, ph = x, y, (h + 3) % 4
                    if not grid.passable(px, py):
                        continue
                    obs = observe_features(goal, people, Pose(px, py, _HEADINGS[ph]))
                    gated = social_heuristic(
                        transition_social_cost(dq, obs, Action(action)), threshold
                    )
                    if gated > best:
                        best = gated
            field[y][x] = best
    return field


def _shade(cost: float) -> tuple:
    if cost <= 0.0:
        return WHITE
    level = int(round(255.0 * (1.0 - cost)))
    if level < 0:
        level = 0
    return (level, level, level)


_ARROW_PIXELS = {
    # Unit-square offsets (8x8 template) per heading; y runs upward here.
    Heading.N: ((3, 6), (4, 6), (2, 5), (5, 5), (3, 5), (4, 5), (3, 4), (4, 4), (3, 3), (4, 3)),
    Heading.S: ((3, 1), (4, 1), (2, 2), (5, 2), (3, 2), (4, 2), (3, 3), (4, 3), (3, 4), (4, 4)),
    Heading.E: ((6, 3), (6, 4), (5, 2), (5, 5), (5, 3), (5, 4), (4, 3), (4, 4), (3, 3), (3, 4)),
    Heading.W: ((1, 3), (1, 4), (2, 2), (2, 5), (2, 3), (2, 4), (3, 3), (3, 4), (4, 3), (4, 4)),
}


def render_ppm(
    scenario: QueueScenario,
    path_cells: Optional[Sequence] = None,
    field: Optional[list] = None,
    cell_px: int = 8,
) -> bytes:
    """Binary P6 pixmap of the scenario, cost field, and planned path."""
    grid = scenario.grid
    width_px = grid.width * cell_px
    height_px = grid.height * cell_px
    pixels = bytearray()
    rows = [[WHITE] * grid.width for _ in range(grid.height)]
    if field is not None:
        for y in range(grid.height):
            for x in range(grid.width):
                rows[y][x] = _shade(field[y][x])
    for x, y in grid.static_obstacles:
        rows[y][x] = DARK
    for x, y in scenario.virtual_obstacles:
        rows[y][x] = RED
    for person in scenario.people:
        rows[person.y][person.x] = ORANGE
    gx, gy = scenario.goal
    rows[gy][gx] = GREEN
    if scenario.start is not None:
        rows[scenario.start.y][scenario.start.x] = CYAN

    # Rasterize: cell colors, then overdraw arrows and path dots.
    raster = [[None] * width_px for _ in range(height_px)]
    for y in range(grid.height):
        for x in range(grid.width):
            color = rows[y][x]
            top = (grid.height - 1 - y) * cell_px
            for dy in range(cell_px):
                row = raster[top + dy]
                for dx in range(cell_px):
                    row[x * cell_px + dx] = color
    for person in scenario.people:
        top = (grid.height - 1 - person.y) * cell_px
        left = person.x * cell_px
        for ox, oy in _ARROW_PIXELS[person.facing]:
            sx = left + (ox * cell_px) // 8
            sy = top + ((7 - oy) * cell_px) // 8
            raster[sy][sx] = ARROW
    if path_cells:
        dot = max(1, cell_px // 3)
        lo = (cell_px - dot) // 2
        for x, y in path_cells:
            top = (grid.height - 1 - y) * cell_px
            left = x * cell_px
            for dy in range(dot):
                for dx in range(dot):
                    raster[top + lo + dy][left + lo + dx] = BLUE

    for row in raster:
        for color in row:
            pixels.extend(color)
    header = b"P6\n%d %d\n255\n" % (width_px, height_px)
    return header + bytes(pixels)


def render_svg(
    scenario: QueueScenario,
    path_cells: Optional[Sequence] = None,
    field: Optional[list] = None,
) -> str:
    """Vector rendering with the same geometry as the pixmap."""
    grid = scenario.grid
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (grid.width * 10, grid.height * 10, grid.width, grid.height),
        '<rect width="%d" height="%d" fill="white"/>' % (grid.width, grid.height),
    ]

    def rect(x: int, y: int, color: str) -> str:
        return '<rect x="%d" y="%d" width="1" height="1" fill="%s"/>' % (
            x,
            grid.height - 1 - y,
            color,
        )

    def rgb(color: tuple) -> str:
        return "rgb(%d,%d,%d)" % color

    if field is not None:
        for y in range(grid.height):
            for x in range(grid.width):
                if field[y][x] > 0.0:
                    out.append(rect(x, y, rgb(_shade(field[y][x]))))
    for x, y in sorted(grid.static_obstacles):
        out.append(rect(x, y, rgb(DARK)))
    for x, y in sorted(scenario.virtual_obstacles):
        out.append(rect(x, y, rgb(RED)))
    for person in scenario.people:
        out.append(rect(person.x, person.y, rgb(ORANGE)))
        cx = person.x + 0.5
        cy = grid.height - 1 - person.y + 0.5
        dx = HEADING_DX[person.facing] * 0.35
        dy = -HEADING_DY[person.facing] * 0.35
        out.append(
            '<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f" '
            'stroke="%s" stroke-width="0.15"/>'
            % (cx - dx, cy - dy, cx + dx, cy + dy, rgb(ARROW))
        )
    out.append(rect(*scenario.goal, rgb(GREEN)))
    if scenario.start is not None:
        out.append(rect(scenario.start.x, scenario.start.y, rgb(CYAN)))
    if path_cells:
        for x, y in path_cells:
            out.append(
                '<circle cx="%.1f" cy="%.1f" r="0.22" fill="%s"/>'
                % (x + 0.5, grid.height - 1 - y + 0.5, rgb(BLUE))
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


_ASCII_RAMP = " .:-=+*#%@"


def render_ascii(
    scenario: QueueScenario,
    path_cells: Optional[Sequence] = None,
    field: Optional[list] = None,
) -> str:
    """Terminal view; top row is the north edge."""
    grid = scenario.grid
    path = set(path_cells or ())
    people = {p.cell for p in scenario.people}
    lines = []
    for y in range(grid.height - 1, -1, -1):
        row = []
        for x in range(grid.width):
            cell = (x, y)
            if cell == scenario.goal:
                ch = "G"
            elif cell in people:
                ch = "P"
            elif scenario.start is not None and cell == scenario.start.cell:
                ch = "S"
            elif cell in path:
                ch = "*"
            elif cell in scenario.virtual_obstacles:
                ch = "x"
            elif cell in scenario.opening:
                ch = "o"
            elif cell in grid.static_obstacles:
                ch = "#"
            elif field is not None and field[y][x] > 0.0:
                ch = _ASCII_RAMP[min(9, int(field[y][x] * 9.999))]
            else:
                ch = " "
            row.append(ch)
        lines.append("".join(row))
    return "\n".join(lines) + "\n"
