import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from base.voa_base import VoaError
from base.voa_config_parser import load_scenario, resolve_scenario_path
from base import voa_pipeline
from utils import voa_utils

# Set up logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
logger = logging.getLogger("VOA")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voa",
        description="Value of assistance for sensing actions before a grasp.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", nargs="?", default=None, help="Scenario file (default: $VOA_SCENARIO, scenario.json, scenario.yaml)")
        p.add_argument("--out", type=Path, default=Path("out"), help="Output directory")
        p.add_argument("--threads", type=int, default=None, help="Worker threads for per-config VOA (default: $VOA_THREADS, 0 = auto)")
        return p

    p = command("predict-obs", "Write the predicted observation of one pose under one config")
    p.add_argument("--pose", required=True)
    p.add_argument("--config", required=True)
    p = command("simmat", "Write the similarity matrix of one config")
    p.add_argument("--config", required=True)
    command("voa", "VOA of every config and the selected one")
    command("select", "Print the config to use")
    p = command("eval", "Realized delta, delta* and advantage for a designated true pose")
    p.add_argument("--truth", required=True)
    command("rank-cams", "Rank camera configs by distance and visibility of the point of interest")
    command("run", "Full run with every pose taken as the truth in turn")
    command("obs-eval", "Compare predicted with recorded observations")
    return parser


def _fmt(value) -> str:
    return voa_utils.format_float(value) if value is None or isinstance(value, float) else str(value)


def dispatch(args: argparse.Namespace) -> int:
    scenario = load_scenario(resolve_scenario_path(args.scenario))
    out_dir: Path = args.out

    if args.command == "rank-cams":
        rankings = voa_pipeline.rank_cameras(scenario)
        voa_pipeline.write_rankings(rankings, out_dir)
        for r in rankings:
            print(f"{r.config_id}\tH={_fmt(r.h)}\tD={_fmt(r.distance)}\tV={_fmt(r.visibility)}")
        return 0

    run = voa_pipeline.prepare(scenario, with_matrices=args.command != "predict-obs")

    if args.command == "predict-obs":
        path = voa_pipeline.write_observation(run, args.pose, args.config, out_dir)
        print(path)
    elif args.command == "simmat":
        matrix = voa_pipeline.similarity_matrix_for(run, args.config)
        print(matrix.to_csv(out_dir / f"similarity-matrix-{args.config}.csv"))
    elif args.command in ("voa", "select"):
        result = voa_pipeline.run_selection(run, args.threads)
        if args.command == "voa":
            voa_pipeline.write_voa_outputs(run, result, out_dir)
            print(f"baseline\t{_fmt(result.baseline)}\t{result.baseline_grasp}")
            for config_id, value, _ in result.voa_rows():
                print(f"{config_id}\t{_fmt(value)}")
        print(f"selected\t{result.selected_id}")
        if not result.selected_improves:
            logger.warning("No configuration is expected to improve the grasp (maximal VOA is not positive).")
    elif args.command == "eval":
        result = voa_pipeline.run_selection(run, args.threads)
        evaluation = voa_pipeline.run_truth(run, args.truth, result.selected_id)
        rows = voa_pipeline.eval_rows(scenario, evaluation, result.selected_id)
        voa_utils.write_csv(out_dir / "eval-report.csv", voa_pipeline.EVAL_HEADER, rows)
        print(f"truth\t{evaluation.truth_id}\tg_i={evaluation.g_i}\tg*={evaluation.g_star}")
        for config_id in scenario.config_ids:
            m = evaluation.metrics[config_id]
            marker = "*" if config_id == result.selected_id else ""
            print(f"{config_id}{marker}\tg_f={evaluation.post_grasps[config_id]}\tdelta={_fmt(m.delta)}\tdelta*={_fmt(m.delta_star)}\tA={_fmt(m.advantage)}")
    elif args.command == "run":
        outcome = voa_pipeline.run_scenario(scenario, out_dir, args.threads)
        print(f"selected\t{outcome.result.selected_id}")
        for path in outcome.artifacts:
            print(path)
    elif args.command == "obs-eval":
        qualities = voa_pipeline.prediction_report(run)
        voa_pipeline.write_prediction_report(qualities, out_dir)
        for q in qualities:
            print(f"{q.config_id}\t{q.measure}\tavg={_fmt(q.average)}\tmin={_fmt(q.minimum)}\tmax={_fmt(q.maximum)}")
    return 0


def cli(argv: Optional[List[str]] = None) -> int:
    """
    Run one command. Returns 0 on success, 2 on input errors (including usage
    errors), 1 on computation errors.
    """
    level = os.environ.get("VOA_LOG_LEVEL")
    if level:
        try:
            logging.getLogger().setLevel(level.upper())
        except ValueError:
            logger.warning(f"Ignoring invalid VOA_LOG_LEVEL value '{level}'.")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    try:
        return dispatch(args)
    except VoaError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(cli())
