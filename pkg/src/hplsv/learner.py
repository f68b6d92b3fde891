"""Dual Q-learning on quantized ego-centric observations.

Two tables are learned from the same rollouts: the task table drives the
epsilon-greedy behavior (navigation reward plus weighted social reward)
while the social table accumulates the unweighted social reward only. The
social table never influences action selection; it is the artifact handed
to the planner.

The per-step inner loop lives in a backend kernel: ``hplsv._core`` when the
compiled extension is importable, ``hplsv._pure`` otherwise. Both produce
bit-identical tables for the same seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .env import (
    TWO_PI,
    Action,
    Observation,
    QueueScenario,
    RewardConfig,
    ScenarioError,
    random_start,
)
from .rng import SplitMix64

try:  # compiled hot loop, optional
    from . import _core as _kernel_mod

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    from . import _pure as _kernel_mod

    BACKEND = "pure"


def backend_name() -> str:
    """Which training kernel is active: "compiled" or "pure"."""
    return BACKEND


MODEL_HEADER = "HPLSV-MODEL v1"

# Social-table bootstrap: follow the task-greedy action (policy evaluation
# of the behavior target) or take the social table's own max.
BOOTSTRAP_TASK_GREEDY = "task_greedy"
BOOTSTRAP_MAX = "max"


@dataclass(frozen=True)
class QuantizerConfig:
    """Bins that make the continuous observation features tabulable."""

    dist_bin_size: float = 1.0
    dist_cap: float = 15.0
    angle_bins: int = 8
    person_slots: int = 2

    def __post_init__(self) -> None:
        if self.dist_bin_size <= 0 or self.dist_cap <= 0:
            raise ScenarioError("distance bins must be positive")
        if self.angle_bins < 4 or self.angle_bins % 2:
            raise ScenarioError("angle_bins must be even and >= 4")
        if self.person_slots < 1:
            raise ScenarioError("person_slots must be >= 1")

    @property
    def dist_bins(self) -> int:
        # Distances are clipped to dist_cap first, so the top index is the
        # shared "far" bucket.
        return int(math.floor(self.dist_cap / self.dist_bin_size)) + 1

    @property
    def entities(self) -> int:
        return 1 + self.person_slots

    @property
    def key_size(self) -> int:
        return 2 * self.entities

    def pack(self, key: tuple) -> int:
        nd, na = self.dist_bins, self.angle_bins
        packed = 0
        for i in range(0, len(key), 2):
            packed = (packed * nd + key[i]) * na + key[i + 1]
        return packed

    def unpack(self, packed: int) -> tuple:
        nd, na = self.dist_bins, self.angle_bins
        out = []
        for _ in range(self.entities):
            packed, sector = divmod(packed, na)
            packed, dist = divmod(packed, nd)
            out.append(sector)
            out.append(dist)
        out.reverse()
        # reverse() produced (dist, sector) pairs in entity order
        return tuple(out)


def quantize(cfg: QuantizerConfig, obs: Observation) -> tuple:
    """Quantized key: one (distance bin, bearing sector) pair per entity.

    Sector 0 is centered on bearing 0; missing person slots are padded with
    the far bucket at bearing 0, which is exactly what a person beyond the
    distance cap would produce.
    """
    feats = [(obs.goal_dist, obs.goal_bearing)]
    feats.extend(obs.people)
    if len(feats) > cfg.entities:
        raise ScenarioError(
            f"observation has {len(obs.people)} people, quantizer allows {cfg.person_slots}"
        )
    while len(feats) < cfg.entities:
        feats.append((cfg.dist_cap, 0.0))

    sector_width = TWO_PI / cfg.angle_bins
    half = sector_width / 2.0
    key = []
    for dist, bearing in feats:
        d = dist if dist < cfg.dist_cap else cfg.dist_cap
        key.append(int(math.floor(d / cfg.dist_bin_size)))
        key.append(int(math.floor((bearing + half) / sector_width)) % cfg.angle_bins)
    return tuple(key)


class ValueTable:
    """Sparse (observation key, action) -> value map; unseen entries read 0."""

    __slots__ = ("data", "quantizer")

    def __init__(self, quantizer: QuantizerConfig, data: Optional[dict] = None) -> None:
        self.quantizer = quantizer
        self.data = data if data is not None else {}

    def value(self, key: tuple, action: Action) -> float:
        return self.data.get(self.quantizer.pack(key) * 4 + int(action), 0.0)

    def value_packed(self, packed_key: int, action: int) -> float:
        return self.data.get(packed_key * 4 + action, 0.0)

    def set(self, key: tuple, action: Action, value: float) -> None:
        self.data[self.quantizer.pack(key) * 4 + int(action)] = value

    def items(self):
        """(key tuple, action, value) triples in deterministic sorted order."""
        for slot in sorted(self.data):
            packed_key, action = divmod(slot, 4)
            yield self.quantizer.unpack(packed_key), Action(action), self.data[slot]

    def __len__(self) -> int:
        return len(self.data)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ValueTable)
            and self.quantizer == other.quantizer
            and self.data == other.data
        )


@dataclass
class DualQ:
    """The trained pair of tables plus everything needed to reuse them."""

    q_task: ValueTable
    q_social: ValueTable
    quantizer: QuantizerConfig
    gamma: float
    rewards: RewardConfig

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DualQ)
            and self.quantizer == other.quantizer
            and self.gamma == other.gamma
            and self.rewards == other.rewards
            and self.q_task == other.q_task
            and self.q_social == other.q_social
        )

    def social_value(self, obs: Observation, action: Action) -> float:
        key = quantize(self.quantizer, obs)
        return self.q_social.value(key, action)

    def task_greedy_action(self, obs: Observation) -> Action:
        """First-maximum argmax over the task table (deterministic)."""
        packed = self.quantizer.pack(quantize(self.quantizer, obs))
        best, best_value = 0, self.q_task.value_packed(packed, 0)
        for a in (1, 2, 3):
            v = self.q_task.value_packed(packed, a)
            if v > best_value:
                best, best_value = a, v
        return Action(best)


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 30000
    max_steps: int = 200
    alpha: float = 0.1
    gamma: float = 0.8
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.7
    fixed_start_episodes: Optional[int] = None  # None -> 10% of episodes
    seed: int = 0
    social_bootstrap: str = BOOTSTRAP_TASK_GREEDY

    def __post_init__(self) -> None:
        if self.episodes < 1 or self.max_steps < 1:
            raise ScenarioError("episodes and max_steps must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ScenarioError("alpha must be in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ScenarioError("gamma must be in [0, 1)")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= eps <= 1.0:
                raise ScenarioError("epsilon must be in [0, 1]")
        if not 0.0 < self.epsilon_decay_fraction <= 1.0:
            raise ScenarioError("epsilon_decay_fraction must be in (0, 1]")
        if self.social_bootstrap not in (BOOTSTRAP_TASK_GREEDY, BOOTSTRAP_MAX):
            raise ScenarioError(f"unknown social bootstrap {self.social_bootstrap!r}")

    def epsilon_at(self, episode: int) -> float:
        span = self.epsilon_decay_fraction * self.episodes
        if episode >= span:
            return self.epsilon_end
        frac = episode / span
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


@dataclass(frozen=True)
class EpisodeStats:
    episode: int
    task_return: float
    steps: int
    reached: bool
    crossings: int
    epsilon: float


class CompiledScenario:
    """Flat buffers for the training kernels (masks, people, free cells)."""

    __slots__ = ("width", "height", "goal_x", "goal_y", "obstacles", "vobstacles",
                 "people_x", "people_y", "free_cells")

    def __init__(self, scenario: QueueScenario) -> None:
        grid = scenario.grid
        self.width = grid.width
        self.height = grid.height
        self.goal_x, self.goal_y = scenario.goal
        self.obstacles = bytearray(grid.width * grid.height)
        for x, y in grid.static_obstacles:
            self.obstacles[y * grid.width + x] = 1
        self.vobstacles = bytearray(grid.width * grid.height)
        for x, y in scenario.virtual_obstacles:
            self.vobstacles[y * grid.width + x] = 1
        self.people_x = [p.x for p in scenario.people]
        self.people_y = [p.y for p in scenario.people]
        self.free_cells = grid.free_cells()


def train(
    scenario_source: Callable[[int], QueueScenario],
    cfg: TrainConfig,
    rewards: RewardConfig = RewardConfig(),
    quantizer: QuantizerConfig = QuantizerConfig(),
    on_episode: Optional[Callable[[EpisodeStats], None]] = None,
    learn_social: bool = True,
    kernel_module=None,
) -> DualQ:
    """Run the full training loop and return the populated tables.

    ``scenario_source`` maps an episode index to its scenario, so a single
    fixed scenario and per-episode randomized sets use the same entry
    point. The start pose follows the curriculum: the scenario's fixed
    start for the first ``fixed_start_episodes`` episodes, then uniform
    random.

    ``learn_social=False`` disables social-table updates; it exists to
    check that the behavior policy is independent of the social table.
    ``kernel_module`` overrides the backend (used by the parity tests and
    the backend benchmark).
    """
    if kernel_module is None:
        kernel_module = _kernel_mod
    kernel = kernel_module.TrainerKernel(
        dist_bin_size=quantizer.dist_bin_size,
        dist_cap=quantizer.dist_cap,
        angle_bins=quantizer.angle_bins,
        person_slots=quantizer.person_slots,
        goal_bonus=rewards.goal_bonus,
        step_penalty=rewards.step_penalty,
        crossing_penalty=rewards.crossing_penalty,
        social_weight=rewards.social_weight,
        alpha=cfg.alpha,
        gamma=cfg.gamma,
        task_greedy_bootstrap=cfg.social_bootstrap == BOOTSTRAP_TASK_GREEDY,
    )
    rng = SplitMix64(cfg.seed)
    fixed_n = (
        cfg.fixed_start_episodes
        if cfg.fixed_start_episodes is not None
        else cfg.episodes // 10
    )
    compiled: dict = {}
    keepalive = []
    for episode in range(cfg.episodes):
        scenario = scenario_source(episode)
        comp = compiled.get(id(scenario))
        if comp is None:
            if quantizer.person_slots < len(scenario.people):
                raise ScenarioError(
                    "scenario has more people than the quantizer's person slots"
                )
            comp = CompiledScenario(scenario)
            compiled[id(scenario)] = comp
            keepalive.append(scenario)
        epsilon = cfg.epsilon_at(episode)
        if episode < fixed_n and scenario.start is not None:
            start = scenario.start
        else:
            start = random_start(scenario, rng, comp.free_cells)
        state, steps, task_return, reached, crossings = kernel.run_episode(
            comp,
            start.x,
            start.y,
            int(start.heading),
            cfg.max_steps,
            epsilon,
            rng.state,
            learn_social,
        )
        rng.state = state
        if on_episode is not None:
            on_episode(
                EpisodeStats(episode, task_return, steps, bool(reached), crossings, epsilon)
            )
    task_data, social_data = kernel.export_tables()
    return DualQ(
        ValueTable(quantizer, task_data),
        ValueTable(quantizer, social_data),
        quantizer,
        cfg.gamma,
        rewards,
    )


def constant_source(scenario: QueueScenario) -> Callable[[int], QueueScenario]:
    return lambda episode: scenario


def cycling_source(scenarios) -> Callable[[int], QueueScenario]:
    scenarios = list(scenarios)
    if not scenarios:
        raise ScenarioError("cycling_source needs at least one scenario")
    return lambda episode: scenarios[episode % len(scenarios)]


def greedy_policy(dq: DualQ) -> Callable[[Observation], Action]:
    """Policy that follows the task table greedily (evaluation rollouts)."""
    return dq.task_greedy_action


def _format_float(value: float) -> str:
    return "%.17g" % value


class ModelFormatError(ValueError):
    """Raised on malformed or wrong-version model files."""


def save(dq: DualQ, path) -> None:
    """Versioned line-oriented text dump; round-trips bit-exactly."""
    q = dq.quantizer
    lines = [MODEL_HEADER]
    lines.append("gamma %s" % _format_float(dq.gamma))
    lines.append(
        "rewards %s %s %s %s"
        % (
            _format_float(dq.rewards.goal_bonus),
            _format_float(dq.rewards.step_penalty),
            _format_float(dq.rewards.crossing_penalty),
            _format_float(dq.rewards.social_weight),
        )
    )
    lines.append(
        "quantizer %s %s %d %d"
        % (_format_float(q.dist_bin_size), _format_float(q.dist_cap), q.angle_bins, q.person_slots)
    )
    for letter, table in (("T", dq.q_task), ("S", dq.q_social)):
        for key, action, value in table.items():
            if value != 0.0:
                lines.append(
                    "%s %s %d %s"
                    % (letter, " ".join(str(k) for k in key), int(action), _format_float(value))
                )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def load(path) -> DualQ:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MODEL_HEADER:
        raise ModelFormatError(
            f"expected header {MODEL_HEADER!r}, got {lines[0]!r}" if lines else "empty model file"
        )

    def bad(line_no: int, message: str) -> ModelFormatError:
        return ModelFormatError(f"line {line_no}: {message}")

    gamma: Optional[float] = None
    rewards: Optional[RewardConfig] = None
    quantizer: Optional[QuantizerConfig] = None
    entries = {"T": {}, "S": {}}
    for line_no, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag == "gamma":
                gamma = float(parts[1])
            elif tag == "rewards":
                kg, kr, ks, w = (float(v) for v in parts[1:5])
                rewards = RewardConfig(kg, kr, ks, w)
            elif tag == "quantizer":
                quantizer = QuantizerConfig(
                    float(parts[1]), float(parts[2]), int(parts[3]), int(parts[4])
                )
            elif tag in entries:
                if quantizer is None:
                    raise bad(line_no, "table entry before quantizer line")
                *key, action, value = parts[1:]
                key_ints = tuple(int(k) for k in key)
                if len(key_ints) != quantizer.key_size:
                    raise bad(line_no, f"expected {quantizer.key_size} key indices")
                packed = quantizer.pack(key_ints) * 4 + int(action)
                entries[tag][packed] = float(value)
            else:
                raise bad(line_no, f"unknown line tag {tag!r}")
        except ModelFormatError:
            raise
        except (ValueError, IndexError) as exc:
            raise bad(line_no, f"malformed {tag!r} line: {exc}") from None
    if gamma is None or rewards is None or quantizer is None:
        raise ModelFormatError("model file is missing gamma, rewards, or quantizer")
    return DualQ(
        ValueTable(quantizer, entries["T"]),
        ValueTable(quantizer, entries["S"]),
        quantizer,
        gamma,
        rewards,
    )
