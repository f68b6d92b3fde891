import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hplsv import (
    Action,
    GridMap,
    Heading,
    Observation,
    Person,
    Pose,
    QuantizerConfig,
    QueueScenario,
    RewardConfig,
    ScenarioError,
    TrainConfig,
    ValueTable,
    build_virtual_obstacles,
    constant_source,
    load,
    quantize,
    save,
    train,
)
from hplsv.evaluate import rollout_success_rate
from hplsv.learner import BOOTSTRAP_MAX, ModelFormatError

Q = QuantizerConfig()


def obs(goal=(0.0, 0.0), people=()):
    return Observation(goal[0], goal[1], tuple(people))


class TestQuantize:
    def test_origin_bucket(self):
        key = quantize(Q, obs())
        assert key == (0, 0, 15, 0, 15, 0)  # padded person slots sit in the far bucket

    def test_distance_saturates_at_cap(self):
        key = quantize(Q, obs(goal=(40.0, 0.0)))
        assert key[0] == 15

    def test_sector_boundary(self):
        just_above = math.radians(22.5) + 1e-9
        key = quantize(Q, obs(goal=(3.0, just_above)))
        assert key[1] == 1
        key = quantize(Q, obs(goal=(3.0, math.radians(22.4))))
        assert key[1] == 0

    def test_negative_bearing_sector(self):
        key = quantize(Q, obs(goal=(3.0, -math.radians(45.0))))
        assert key[1] == 7

    def test_too_many_people_rejected(self):
        with pytest.raises(ScenarioError):
            quantize(Q, obs(people=[(1.0, 0.0)] * 3))

    @given(
        dist=st.floats(0.0, 60.0),
        bearing=st.floats(-math.pi, math.pi, exclude_min=True),
    )
    def test_key_in_range(self, dist, bearing):
        key = quantize(Q, obs(goal=(dist, bearing)))
        assert 0 <= key[0] <= 15
        assert 0 <= key[1] < 8

    @given(
        values=st.lists(
            st.tuples(st.floats(0.0, 40.0), st.floats(-3.141, 3.141)),
            min_size=1,
            max_size=3,
        )
    )
    def test_pack_unpack_roundtrip(self, values):
        q = QuantizerConfig(person_slots=2)
        key = quantize(q, obs(goal=values[0], people=values[1:]))
        assert q.unpack(q.pack(key)) == key


class TestValueTable:
    def test_unseen_reads_zero(self):
        table = ValueTable(Q)
        assert table.value((0, 0, 15, 0, 15, 0), Action.FORWARD) == 0.0

    def test_set_get(self):
        table = ValueTable(Q)
        key = (1, 2, 3, 4, 5, 6)
        table.set(key, Action.TURN_LEFT, -0.5)
        assert table.value(key, Action.TURN_LEFT) == -0.5
        assert table.value(key, Action.TURN_RIGHT) == 0.0

    def test_items_sorted_and_typed(self):
        table = ValueTable(Q)
        table.set((1, 0, 0, 0, 0, 0), Action.FORWARD, -1.0)
        table.set((0, 1, 0, 0, 0, 0), Action.BACKWARD, -2.0)
        items = list(table.items())
        assert len(items) == 2
        assert items[0][0] == (0, 1, 0, 0, 0, 0)
        assert isinstance(items[0][1], Action)


def corner_scenario():
    """Corner pose with both moves blocked, standing on a penalty cell."""
    grid = GridMap(4, 4, 0.2, frozenset({(0, 1)}))
    people = (Person(2, 2, Heading.S),)
    return QueueScenario(
        grid, (3, 3), people, frozenset({(0, 0)}), frozenset(), Pose(0, 0, Heading.N)
    )


class TestTrainingUpdates:
    def test_single_step_terminal_by_budget(self):
        # alpha=1, first action is a blocked crossing, budget 1, fresh
        # tables: the social entry lands exactly at -crossing_penalty.
        scn = corner_scenario()
        cfg = TrainConfig(
            episodes=1,
            max_steps=1,
            alpha=1.0,
            epsilon_start=0.0,
            epsilon_end=0.0,
            fixed_start_episodes=1,
            seed=0,
        )
        dq = train(constant_source(scn), cfg)
        values = list(dq.q_social.data.values())
        assert values == [-1.0]

    def test_no_crossing_leaves_social_table_empty_of_signal(self):
        grid = GridMap(12, 12, 0.2)
        people = (Person(9, 9, Heading.S),)
        vobs, opening = build_virtual_obstacles((9, 7), people, 1)
        scn = QueueScenario(grid, (9, 7), people, vobs, opening, Pose(0, 0, Heading.N))
        cfg = TrainConfig(
            episodes=5,
            max_steps=3,
            epsilon_start=0.0,
            epsilon_end=0.0,
            fixed_start_episodes=5,
            seed=0,
        )
        dq = train(constant_source(scn), cfg)
        assert len(dq.q_social.data) == 0

    def test_geometric_series_fixpoint(self):
        # Force a self-loop: pinned greedy action, constant reward, and a
        # bootstrap that always reads the looping entry. The value must
        # converge to reward / (1 - gamma).
        scn = corner_scenario()
        cfg = TrainConfig(
            episodes=1,
            max_steps=300,
            alpha=0.5,
            gamma=0.5,
            epsilon_start=0.0,
            epsilon_end=0.0,
            fixed_start_episodes=1,
            seed=0,
            social_bootstrap=BOOTSTRAP_MAX,
        )
        from hplsv import learner as learner_mod
        from hplsv.learner import CompiledScenario
        from hplsv.env import observe

        key = quantize(Q, observe(scn, scn.start))
        packed = Q.pack(key)
        kernel = learner_mod._kernel_mod.TrainerKernel(
            dist_bin_size=Q.dist_bin_size,
            dist_cap=Q.dist_cap,
            angle_bins=Q.angle_bins,
            person_slots=Q.person_slots,
            goal_bonus=10.0,
            step_penalty=0.05,
            crossing_penalty=1.0,
            social_weight=1.0,
            alpha=cfg.alpha,
            gamma=cfg.gamma,
            task_greedy_bootstrap=False,
        )
        # Pin FORWARD as permanently greedy and stop the social bootstrap
        # from escaping through the untouched zero entries.
        q_task = {packed * 4 + 0: 1.0e12}
        q_social = {packed * 4 + a: -1.0e15 for a in (1, 2, 3)}
        kernel.load_tables(q_task, q_social)
        kernel.run_episode(
            CompiledScenario(scn), 0, 0, int(Heading.N), 300, 0.0, 123, True
        )
        _, social = kernel.export_tables()
        expected = -1.0 / (1.0 - cfg.gamma)
        assert social[packed * 4 + 0] == pytest.approx(expected, abs=1e-6)

    def test_behavior_policy_independent_of_social_table(self, demo_scenario):
        cfg = TrainConfig(episodes=400, seed=9)
        full = train(constant_source(demo_scenario), cfg)
        frozen = train(constant_source(demo_scenario), cfg, learn_social=False)
        assert full.q_task.data == frozen.q_task.data
        assert all(v == 0.0 for v in frozen.q_social.data.values())

    def test_determinism(self, demo_scenario):
        cfg = TrainConfig(episodes=300, seed=21)
        a = train(constant_source(demo_scenario), cfg)
        b = train(constant_source(demo_scenario), cfg)
        assert a == b
        c = train(constant_source(demo_scenario), TrainConfig(episodes=300, seed=22))
        assert c != a

    def test_social_values_bounded(self, demo_scenario):
        for bootstrap in ("task_greedy", "max"):
            cfg = TrainConfig(episodes=500, seed=3, social_bootstrap=bootstrap)
            dq = train(constant_source(demo_scenario), cfg)
            bound = dq.rewards.crossing_penalty / (1.0 - dq.gamma)
            for value in dq.q_social.data.values():
                assert -bound <= value <= 0.0

    def test_epsilon_schedule(self):
        cfg = TrainConfig(episodes=1000)
        assert cfg.epsilon_at(0) == 1.0
        assert cfg.epsilon_at(700) == 0.05
        assert cfg.epsilon_at(999) == 0.05
        values = [cfg.epsilon_at(e) for e in range(0, 1000, 50)]
        assert values == sorted(values, reverse=True)

    def test_trained_greedy_policy_reaches_goal(self, demo_model, demo_scenario):
        rate, _, _ = rollout_success_rate(demo_scenario, demo_model, episodes=100, seed=77)
        assert rate >= 0.95

    def test_trained_greedy_from_fixed_start(self, demo_model, demo_scenario):
        from hplsv import greedy_policy, run_episode

        fixed = QueueScenario(
            demo_scenario.grid,
            demo_scenario.goal,
            demo_scenario.people,
            demo_scenario.virtual_obstacles,
            demo_scenario.opening,
            Pose(2, 2, Heading.E),
        )
        transitions = run_episode(fixed, greedy_policy(demo_model), RewardConfig(), 60)
        assert transitions and transitions[-1].pose_after.cell == demo_scenario.goal


class TestModelIO:
    def test_empty_roundtrip(self, tmp_path):
        from hplsv.learner import DualQ

        dq = DualQ(ValueTable(Q), ValueTable(Q), Q, 0.8, RewardConfig())
        path = tmp_path / "empty.model"
        save(dq, path)
        assert load(path) == dq

    def test_trained_roundtrip(self, tiny_model, tmp_path):
        path = tmp_path / "model.txt"
        save(tiny_model, path)
        loaded = load(path)
        assert loaded == tiny_model
        assert loaded.q_social.data == tiny_model.q_social.data

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "bad.model"
        path.write_text("HPLSV-MODEL v9\ngamma 0.8\n")
        with pytest.raises(ModelFormatError):
            load(path)

    def test_malformed_line_reports_number(self, tiny_model, tmp_path):
        path = tmp_path / "model.txt"
        save(tiny_model, path)
        text = path.read_text().splitlines()
        text[1] = "gamma notafloat"
        path.write_text("\n".join(text) + "\n")
        with pytest.raises(ModelFormatError, match="line 2"):
            load(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "empty.model"
        path.write_text("")
        with pytest.raises(ModelFormatError):
            load(path)

    def test_file_is_deterministic(self, tiny_model, tmp_path):
        a = tmp_path / "a.model"
        b = tmp_path / "b.model"
        save(tiny_model, a)
        save(tiny_model, b)
        assert a.read_bytes() == b.read_bytes()
