"""Command-line workflow: train, plan, eval, oracle, render.

Exit codes: 0 on success, 1 when no path is found or an input fails
validation, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import learner
from .env import QueueScenario, RewardConfig, ScenarioError
from .evaluate import evaluate_scenarios, write_eval_csv, write_train_log
from .learner import (
    BOOTSTRAP_MAX,
    ModelFormatError,
    QuantizerConfig,
    TrainConfig,
    load,
    save,
    train,
)
from .oracle import social_table_deviation, social_value_iteration
from .planner import PlannerConfig, annotate_crossings, plan
from .render import cost_field, render_ascii, render_ppm, render_svg
from .scenario_io import generate_continuous_like, load_scenario

# Training profile for generated scenario sets: per-episode random starts
# and scenes, a finer quantizer against cross-scene aliasing, and the
# optimality-style social bootstrap that keeps the cost field localized.
GENERATED_TRAIN = dict(gamma=0.9, fixed_start_episodes=0, social_bootstrap=BOOTSTRAP_MAX)
GENERATED_QUANTIZER = QuantizerConfig(dist_bin_size=0.5, angle_bins=32, person_slots=3)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hplsv",
        description="Queue-aware grid path planning with a learned social value heuristic.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the dual value tables")
    src = p_train.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="scenario file to train on")
    src.add_argument(
        "--generated",
        type=int,
        metavar="N",
        help="train across N generated continuous-like scenarios",
    )
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--episodes", type=int, default=30000)
    p_train.add_argument("--out", type=Path, required=True, help="model file to write")
    p_train.add_argument(
        "--log", type=Path, default=None, help="training log CSV (default: <out>.log.csv)"
    )

    p_plan = sub.add_parser("plan", help="plan on a scenario with a trained model")
    p_plan.add_argument("--scenario", type=Path, required=True)
    p_plan.add_argument("--model", type=Path, required=True)
    p_plan.add_argument("--w", type=float, default=1.0, help="social weight")
    p_plan.add_argument("--kthresh", type=float, default=0.3, help="confidence threshold")
    p_plan.add_argument("--render", type=Path, default=None, help="write a pixmap here")

    p_eval = sub.add_parser("eval", help="batch-evaluate a model on generated scenarios")
    p_eval.add_argument("--generated", type=int, required=True, metavar="N")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--model", type=Path, required=True)
    p_eval.add_argument("--out", type=Path, required=True, help="report CSV")
    p_eval.add_argument("--w", type=float, default=1.0)
    p_eval.add_argument("--kthresh", type=float, default=0.3)

    p_oracle = sub.add_parser("oracle", help="compare a model against value iteration")
    p_oracle.add_argument("--scenario", type=Path, required=True)
    p_oracle.add_argument("--model", type=Path, required=True)
    p_oracle.add_argument("--out", type=Path, required=True, help="deviation CSV")

    p_render = sub.add_parser("render", help="render a scenario (and optional plan)")
    p_render.add_argument("--scenario", type=Path, required=True)
    p_render.add_argument("--model", type=Path, default=None)
    p_render.add_argument("--w", type=float, default=1.0)
    p_render.add_argument("--kthresh", type=float, default=0.3)
    p_render.add_argument("--out", type=Path, required=True, help="pixmap (.ppm) to write")
    return parser


def _load_scenario(path: Path) -> QueueScenario:
    try:
        return load_scenario(path)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}")


def _load_model(path: Path) -> learner.DualQ:
    try:
        return load(path)
    except FileNotFoundError:
        raise ScenarioError(f"model file not found: {path}")


def _cmd_train(args) -> int:
    stats = []
    if args.generated is not None:
        scenarios = generate_continuous_like(args.seed, args.generated)
        source = learner.cycling_source(scenarios)
        cfg = TrainConfig(episodes=args.episodes, seed=args.seed, **GENERATED_TRAIN)
        quantizer = GENERATED_QUANTIZER
    else:
        scenario = _load_scenario(args.scenario)
        source = learner.constant_source(scenario)
        cfg = TrainConfig(episodes=args.episodes, seed=args.seed)
        quantizer = QuantizerConfig(person_slots=max(2, len(scenario.people)))
    dq = train(source, cfg, RewardConfig(), quantizer, on_episode=stats.append)
    save(dq, args.out)
    log_path = args.log if args.log is not None else Path(str(args.out) + ".log.csv")
    write_train_log(stats, log_path)
    reached = sum(1 for s in stats[-1000:] if s.reached)
    window = min(len(stats), 1000)
    print(f"trained {cfg.episodes} episodes with kernel backend '{learner.backend_name()}'")
    print(f"late success rate: {reached}/{window}")
    print(f"model: {args.out}")
    print(f"log: {log_path}")
    return 0


def _cmd_plan(args) -> int:
    scenario = _load_scenario(args.scenario)
    dq = _load_model(args.model)
    if scenario.start is None:
        print("scenario has a random start; planning needs a fixed start pose", file=sys.stderr)
        return 1
    cfg = PlannerConfig(weight=args.w, threshold=args.kthresh)
    result = annotate_crossings(
        plan(scenario.grid, scenario.goal, scenario.people, scenario.start, dq, cfg),
        scenario,
    )
    if not result.found:
        print("no path found", file=sys.stderr)
        return 1
    for i, (pose, action) in enumerate(result.path):
        label = "start" if action is None else action.name.lower()
        print(f"{i:4d} {label:10s} ({pose.x}, {pose.y}) {pose.heading.name}")
    print(
        f"actions={result.nav_cost} crossings={result.crossings} "
        f"social_cost={result.social_cost:.6g} expanded={result.expanded}"
    )
    if args.render is not None:
        _write_figures(args.render, scenario, result, dq, args.kthresh)
    return 0


def _cmd_eval(args) -> int:
    dq = _load_model(args.model)
    scenarios = generate_continuous_like(args.seed, args.generated)
    cfg = PlannerConfig(weight=args.w, threshold=args.kthresh)
    rows = evaluate_scenarios(scenarios, dq, cfg, seed=args.seed)
    write_eval_csv(rows, args.out)
    free = sum(1 for r in rows if r.crossings == 0)
    success = sum(1 for r in rows if r.success)
    ratios = [r.length_ratio for r in rows if r.length_ratio == r.length_ratio]
    mean_ratio = sum(ratios) / len(ratios) if ratios else float("nan")
    print(f"evaluated {len(rows)} scenarios (seed {args.seed}, w={args.w})")
    print(f"success: {success}/{len(rows)}  crossing-free: {free}/{len(rows)}")
    print(f"mean length ratio vs social optimum: {mean_ratio:.4f}")
    print(f"report: {args.out}")
    return 0


def _cmd_oracle(args) -> int:
    scenario = _load_scenario(args.scenario)
    dq = _load_model(args.model)
    ev = social_value_iteration(scenario, dq.gamma, dq.rewards.crossing_penalty)
    report = social_table_deviation(dq, scenario, ev)
    with open(args.out, "w", encoding="ascii", newline="\n") as fh:
        fh.write("key,action,learned,exact_max,exact_mean,poses,abs_dev\n")
        for key, action, learned, exact_max, exact_mean, n in report.rows:
            fh.write(
                "%s,%d,%.17g,%.17g,%.17g,%d,%.17g\n"
                % (
                    "-".join(str(k) for k in key),
                    int(action),
                    learned,
                    exact_max,
                    exact_mean,
                    n,
                    abs(learned - exact_max),
                )
            )
    print(f"value iteration: {ev.iterations} sweeps, final residual {ev.residual:.3g}")
    print(f"max |learned - exact| = {report.max_abs_dev:.6g}")
    print(f"mean |learned - exact| = {report.mean_abs_dev:.6g}")
    print(f"report: {args.out}")
    return 0


def _cmd_render(args) -> int:
    scenario = _load_scenario(args.scenario)
    dq = _load_model(args.model) if args.model is not None else None
    if scenario.start is None:
        print("scenario has a random start; rendering needs a fixed start pose", file=sys.stderr)
        return 1
    weight = args.w if dq is not None else 0.0
    cfg = PlannerConfig(weight=weight, threshold=args.kthresh)
    result = annotate_crossings(
        plan(scenario.grid, scenario.goal, scenario.people, scenario.start, dq, cfg),
        scenario,
    )
    _write_figures(args.out, scenario, result if result.found else None, dq, args.kthresh)
    field = cost_field(scenario.grid, scenario.goal, scenario.people, dq, args.kthresh)
    print(render_ascii(scenario, _path_cells(result), field), end="")
    if result.found:
        print(f"actions={result.nav_cost} crossings={result.crossings}")
        return 0
    print("no path found", file=sys.stderr)
    return 1


def _path_cells(result) -> list:
    if result is None or not result.found:
        return []
    return [pose.cell for pose, _ in result.path]


def _write_figures(out: Path, scenario, result, dq, threshold: float) -> None:
    field = cost_field(scenario.grid, scenario.goal, scenario.people, dq, threshold)
    cells = _path_cells(result)
    ppm = render_ppm(scenario, cells, field)
    with open(out, "wb") as fh:
        fh.write(ppm)
    svg_path = out.with_suffix(".svg")
    with open(svg_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_svg(scenario, cells, field))
    print(f"figures: {out} {svg_path}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    handlers = {
        "train": _cmd_train,
        "plan": _cmd_plan,
        "eval": _cmd_eval,
        "oracle": _cmd_oracle,
        "render": _cmd_render,
    }
    try:
        return handlers[args.command](args)
    except (ScenarioError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
