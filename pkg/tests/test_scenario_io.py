import pytest

from hplsv import (
    GridMap,
    Heading,
    Person,
    Pose,
    QueueScenario,
    bundled_scenario,
    enclosed_cells,
    generate_continuous_like,
    parse_scenario,
    print_scenario,
)
from hplsv.scenario_io import GENERATOR_MARGIN, ScenarioParseError

DEMO_TEXT = """\
version 1
grid 30 30 0.2
goal 15 15
person 15 17 S
person 15 19 S
start 2 2 E
margin 1
"""


class TestParse:
    def test_demo_file_geometry(self):
        scn = bundled_scenario("demo")
        assert scn.grid.width == 30 and scn.grid.height == 30
        assert scn.grid.resolution == 0.2
        assert scn.goal == (15, 15)
        assert [p.cell for p in scn.people] == [(15, 17), (15, 19)]
        assert scn.start == Pose(0, 0, Heading.N)
        assert scn.opening == {(14, 21), (15, 21), (16, 21)}
        assert len(scn.virtual_obstacles) == 21

    def test_scaled_file_parses(self):
        scn = bundled_scenario("demo_100x100")
        assert scn.grid.width == 100
        assert scn.goal == (50, 50)
        assert scn.start == Pose(50, 95, Heading.S)

    def test_margin_text(self):
        scn = parse_scenario(DEMO_TEXT)
        assert scn.start == Pose(2, 2, Heading.E)
        assert scn.opening == {(14, 21), (15, 21), (16, 21)}

    def test_missing_goal_named(self):
        text = DEMO_TEXT.replace("goal 15 15\n", "")
        with pytest.raises(ScenarioParseError, match="goal"):
            parse_scenario(text)

    def test_missing_version(self):
        text = DEMO_TEXT.replace("version 1\n", "")
        with pytest.raises(ScenarioParseError, match="version"):
            parse_scenario(text)

    def test_unknown_directive_line_number(self):
        text = DEMO_TEXT + "wibble 3\n"
        with pytest.raises(ScenarioParseError, match="line 8"):
            parse_scenario(text)

    def test_duplicate_grid(self):
        text = DEMO_TEXT + "grid 10 10 0.2\n"
        with pytest.raises(ScenarioParseError, match="duplicate grid"):
            parse_scenario(text)

    def test_margin_and_explicit_exclusive(self):
        text = DEMO_TEXT + "vobstacle 1 1\n"
        with pytest.raises(ScenarioParseError, match="exclusive"):
            parse_scenario(text)

    def test_out_of_bounds_cell(self):
        text = DEMO_TEXT.replace("goal 15 15", "goal 99 15")
        with pytest.raises(ScenarioParseError):
            parse_scenario(text)

    def test_explicit_cells_passthrough(self):
        text = (
            "version 1\n"
            "grid 10 10 0.2\n"
            "goal 5 5\n"
            "person 5 7 S\n"
            "start random\n"
            "vobstacle 3 3\n"
            "vobstacle 3 4\n"
            "opening 4 3\n"
        )
        scn = parse_scenario(text)
        assert scn.virtual_obstacles == {(3, 3), (3, 4)}
        assert scn.opening == {(4, 3)}
        assert scn.start is None

    def test_comments_and_blank_lines(self):
        text = "# header\n\n" + DEMO_TEXT.replace("goal 15 15", "goal 15 15  # middle")
        scn = parse_scenario(text)
        assert scn.goal == (15, 15)


class TestRoundTrip:
    def test_bundled(self):
        scn = bundled_scenario("demo")
        assert parse_scenario(print_scenario(scn)) == scn

    def test_generated(self):
        for scn in generate_continuous_like(3, 20):
            assert parse_scenario(print_scenario(scn)) == scn

    def test_random_start_roundtrip(self):
        people = (Person(5, 7, Heading.S),)
        scn = QueueScenario(
            GridMap(10, 10, 0.2), (5, 5), people, frozenset({(3, 3)}), frozenset(), None
        )
        assert parse_scenario(print_scenario(scn)) == scn


class TestGenerator:
    def test_deterministic(self):
        assert generate_continuous_like(7, 10) == generate_continuous_like(7, 10)

    def test_different_seeds_differ(self):
        assert generate_continuous_like(7, 10) != generate_continuous_like(8, 10)

    def test_invariant_sweep(self):
        scenarios = generate_continuous_like(7, 50)
        assert len(scenarios) == 50
        for scn in scenarios:
            assert 1 <= len(scn.people) <= 3
            # collinear with the goal along one axis
            xs = {scn.goal[0]} | {p.x for p in scn.people}
            ys = {scn.goal[1]} | {p.y for p in scn.people}
            assert len(xs) == 1 or len(ys) == 1
            # consecutive spacing: 0.4-0.8 m snapped to 0.2 m cells
            chain = [scn.goal] + [p.cell for p in scn.people]
            for a, b in zip(chain, chain[1:]):
                gap = abs(b[0] - a[0]) + abs(b[1] - a[1])
                assert 2 <= gap <= 4
            # the ring is closed: the inside never leaks to the border
            inside = enclosed_cells(scn)
            size = scn.grid.width
            border = {(x, y) for x in range(size) for y in (0, size - 1)}
            border |= {(x, y) for y in range(size) for x in (0, size - 1)}
            assert not (inside & border)
            # start outside the ring region, on a free cell
            assert scn.start is not None
            assert scn.start.cell not in inside
            assert scn.start.cell not in scn.virtual_obstacles
            assert scn.start.cell not in scn.opening
            # opening approachable: some neighbor of an opening cell is
            # outside the enclosed region and not a virtual obstacle
            reachable = False
            for ox, oy in scn.opening:
                for nx, ny in ((ox + 1, oy), (ox - 1, oy), (ox, oy + 1), (ox, oy - 1)):
                    if (
                        scn.grid.in_bounds(nx, ny)
                        and (nx, ny) not in inside
                        and (nx, ny) not in scn.virtual_obstacles
                        and (nx, ny) not in scn.opening
                    ):
                        reachable = True
            assert reachable

    def test_margin_is_half_meter(self):
        assert GENERATOR_MARGIN == 3

    def test_single_scenario(self):
        (scn,) = generate_continuous_like(99, 1)
        xs = {scn.goal[0]} | {p.x for p in scn.people}
        ys = {scn.goal[1]} | {p.y for p in scn.people}
        assert len(xs) == 1 or len(ys) == 1
