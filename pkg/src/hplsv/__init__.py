"""Queue-aware path planning from a learned social value function.

Train a tabular agent in a gridworld queue scenario; a second value
table, learned as a by-product on the (unweighted) social penalty alone,
becomes an extra cost-plus-heuristic term for A*, steering plans to join
the queue at its end instead of cutting through it.
"""

from .env import (
    Action,
    GridMap,
    Heading,
    Observation,
    Person,
    Pose,
    QueueScenario,
    RewardConfig,
    ScenarioError,
    Transition,
    build_virtual_obstacles,
    enclosed_cells,
    nav_reward,
    observe,
    run_episode,
    social_reward,
    step,
)
from .evaluate import evaluate_scenarios, rollout_success_rate, write_eval_csv
from .learner import (
    BOOTSTRAP_MAX,
    BOOTSTRAP_TASK_GREEDY,
    DualQ,
    EpisodeStats,
    ModelFormatError,
    QuantizerConfig,
    TrainConfig,
    ValueTable,
    backend_name,
    constant_source,
    cycling_source,
    greedy_policy,
    load,
    quantize,
    save,
    train,
)
from .oracle import (
    ExactValues,
    dijkstra_actions,
    social_optimal_path,
    social_table_deviation,
    social_value_iteration,
)
from .planner import (
    PlannerConfig,
    PlanResult,
    annotate_crossings,
    nav_heuristic,
    plan,
    social_heuristic,
    transition_social_cost,
)
from .render import cost_field, render_ascii, render_ppm, render_svg
from .rng import SplitMix64
from .scenario_io import (
    bundled_scenario,
    generate_continuous_like,
    load_scenario,
    parse_scenario,
    print_scenario,
)

__version__ = "0.1.0"
