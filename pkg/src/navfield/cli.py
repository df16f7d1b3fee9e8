"""Command-line entry points.

Subcommands: simulate, evaluate, sweep-td, export-fields, convert.
Exit codes: 0 success, 2 usage/input error, 3 runtime/predictor error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .dataset import (
    convert_columns,
    extract_agents,
    load_trajectories,
    real_rows,
    resample,
)
from .errors import NoPathError, ParseError, PredictorUnavailableError
from .fields import (
    write_direction_field_csv,
    write_field_sidecar,
    write_matrix_csv,
)
from .grid import load_scene
from .metrics import (
    MetricsReport,
    ade,
    heatmap,
    jaccard_similarity,
    kde_export,
    trajectories_from_rows,
    travel_stats,
    write_heatmap_csv,
    write_kde_csv,
)
from .predictor import PredictorKind
from .sim import (
    SimConfig,
    agents_from_seeds,
    init_world,
    make_agent,
    read_trajectory_csv,
    run,
    step,
    write_summary_json,
    write_trajectory_csv,
)


def _sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace,
                    config: SimConfig | None, inputs: list, outputs: list) -> None:
    manifest = {
        "command": command,
        "args": {k: v for k, v in vars(args).items() if k != "func"},
        "config": config.to_dict() if config else None,
        "inputs": {str(p): _sha256(p) for p in inputs if p and Path(p).exists()},
        "outputs": [str(p) for p in outputs],
        "version": __version__,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _build_config(args: argparse.Namespace) -> SimConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            config = SimConfig.from_dict(json.load(fh))
    else:
        config = SimConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "max_steps", None) is not None:
        config = replace(config, max_steps=args.max_steps)
    if getattr(args, "td", None) is not None:
        config = replace(config, t_d=args.td)
    mode = getattr(args, "mode", None)
    if mode == "data-driven":
        if getattr(args, "trends", None):
            kind = PredictorKind("trend_file", args.trends)
        elif getattr(args, "lockstep_dir", None):
            kind = PredictorKind("lockstep", args.lockstep_dir,
                                 timeout=args.lockstep_timeout)
        else:
            raise ValueError("--mode data-driven needs --trends or --lockstep-dir")
        config = replace(config, predictor=kind)
    elif mode == "baseline":
        config = replace(config, predictor=PredictorKind("baseline"))
    return config


def _load_agents(args: argparse.Namespace, env, config: SimConfig):
    """Returns (agents, seeds); seeds is None for synthetic agent specs.

    In dataset mode, when neither --max-steps nor a config file pinned the
    step budget, it defaults to 4x the longest recorded trajectory.
    """
    if getattr(args, "agents", None):
        ds = load_trajectories(args.agents, frame_interval=args.source_interval)
        if abs(ds.frame_interval - config.dt) > 1e-12:
            ds = resample(ds, config.dt)
        extraction = extract_agents(ds, env, h_obs=config.h_obs, t_p=config.t_p)
        if not extraction.seeds:
            raise ValueError(f"no usable agents in {args.agents} "
                             f"({extraction.skipped} skipped)")
        if getattr(args, "max_steps", None) is None and not getattr(args, "config", None):
            longest = max(s.spawn_step + len(s.real_future) for s in extraction.seeds)
            config = replace(config, max_steps=max(4 * longest, 1))
        return agents_from_seeds(extraction.seeds, env, config), extraction, config
    if getattr(args, "agents_json", None):
        with open(args.agents_json) as fh:
            specs = json.load(fh)
        agents = [
            make_agent(
                int(s["id"]), tuple(s["start"]), tuple(s["destination"]),
                float(s["speed"]), env, h_obs=config.h_obs,
                spawn_step=int(s.get("spawn_step", 0)),
            )
            for s in specs
        ]
        return agents, None, config
    raise ValueError("need --agents (trajectory TSV) or --agents-json")


# ------------------------------------------------------------- subcommands

def cmd_simulate(args: argparse.Namespace) -> int:
    env = load_scene(args.scene)
    config = _build_config(args)
    agents, extraction, config = _load_agents(args, env, config)
    world = init_world(env, agents, config)
    summary = run(world)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(world.trajectory, out / "trajectory.csv")
    outputs = [out / "trajectory.csv", out / "summary.json"]
    if extraction is not None:
        summary["agents_skipped_at_extraction"] = extraction.skipped
        summary["agents_relocated_at_extraction"] = extraction.relocated
        write_trajectory_csv(real_rows(extraction.seeds), out / "real.csv")
        outputs.append(out / "real.csv")
    write_summary_json(summary, out / "summary.json")
    _write_manifest(out, "simulate", args, config,
                    [args.scene, getattr(args, "agents", None),
                     getattr(args, "agents_json", None), getattr(args, "trends", None),
                     getattr(args, "config", None)],
                    outputs)
    print(f"simulate: {summary['steps']} steps, "
          f"{summary['agents_arrived']}/{summary['agents_total']} arrived -> {out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    sim_rows = read_trajectory_csv(args.sim)
    real = read_trajectory_csv(args.real)
    env = load_scene(args.scene)
    ade_value = ade(trajectories_from_rows(sim_rows), trajectories_from_rows(real),
                    horizon=args.horizon)

    xmin, ymin, xmax, ymax = env.bounds
    def in_bounds(rows):
        return [r for r in rows if xmin <= r[2] < xmax and ymin <= r[3] < ymax]

    sim_in = in_bounds(sim_rows)
    real_in = in_bounds(real)
    h_sim = heatmap(sim_in, env)
    h_real = heatmap(real_in, env)
    jac = jaccard_similarity(h_sim, h_real, levels=args.levels)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    per_agent = {}
    for agent_id, steps in sorted(trajectories_from_rows(sim_rows).items()):
        pts = [steps[s] for s in sorted(steps)]
        if len(pts) >= 2:
            dist, speed = travel_stats(pts, args.dt)
            per_agent[agent_id] = {"distance_m": dist, "mean_speed_mps": speed}

    kde_files = {}
    if args.kde:
        for label, rows in (("sim", sim_rows), ("real", real)):
            trajs = trajectories_from_rows(rows)
            dists, speeds = [], []
            for steps in trajs.values():
                pts = [steps[s] for s in sorted(steps)]
                if len(pts) >= 2:
                    d, v = travel_stats(pts, args.dt)
                    dists.append(d)
                    speeds.append(v)
            for metric, samples in (("distance", dists), ("speed", speeds)):
                if not samples:
                    continue
                grid, dens = kde_export(samples)
                path = out / f"kde_{metric}_{label}.csv"
                write_kde_csv(grid, dens, path)
                kde_files[f"{metric}_{label}"] = str(path)

    write_heatmap_csv(h_sim, out / "heatmap_sim.csv")
    write_heatmap_csv(h_real, out / "heatmap_real.csv")
    report = MetricsReport(
        ade=ade_value, jaccard=jac, per_agent=per_agent, kde_files=kde_files,
        extras={
            "heatmap_files": {"sim": str(out / "heatmap_sim.csv"),
                              "real": str(out / "heatmap_real.csv")},
            "positions_outside_scene": {
                "sim": len(sim_rows) - len(sim_in),
                "real": len(real) - len(real_in),
            },
            "levels": args.levels,
        },
    )
    report.write(out / "report.json")
    _write_manifest(out, "evaluate", args, None,
                    [args.sim, args.real, args.scene],
                    [out / "report.json"])
    print(f"evaluate: ade={ade_value:.6g} m, jaccard={jac:.6g} -> {out / 'report.json'}")
    return 0


def _parse_td_values(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_sweep_td(args: argparse.Namespace) -> int:
    env = load_scene(args.scene)
    base = _build_config(args)
    td_values = _parse_td_values(args.td_values)
    if not td_values:
        raise ValueError("--td-values is empty")
    for td in td_values:
        if not (1 <= td <= base.t_p):
            raise ValueError(f"td={td} outside 1..{base.t_p}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for td in td_values:
        config = replace(base, t_d=td)
        agents, extraction, config = _load_agents(args, env, config)
        if extraction is None:
            raise ValueError("sweep-td needs --agents (recorded TSV) to score ADE")
        world = init_world(env, agents, config)
        run(world)
        ade_value = ade(
            trajectories_from_rows(world.trajectory),
            trajectories_from_rows(real_rows(extraction.seeds)),
            horizon=config.t_p,
        )
        results.append((td, ade_value))
        print(f"sweep-td: td={td} ade={ade_value:.6g}")
    sweep_path = out / "sweep.csv"
    with open(sweep_path, "w") as fh:
        fh.write("td,ade\n")
        for td, val in results:
            fh.write(f"{td},{val:.10g}\n")
    _write_manifest(out, "sweep-td", args, base,
                    [args.scene, args.agents], [sweep_path])
    return 0


def cmd_export_fields(args: argparse.Namespace) -> int:
    env = load_scene(args.scene)
    config = _build_config(args)
    agents, _, config = _load_agents(args, env, config)
    world = init_world(env, agents, config)
    for _ in range(args.step):
        step(world)
    if args.agent not in world.crowd:
        raise ValueError(f"agent {args.agent} is not active at step {args.step}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    matrices = {
        "navigation": world.m_f[args.agent],
        "obstacle": world.m_c,
        "pedestrian": world.m_i[args.agent],
        "global": world.m_g[args.agent],
    }
    outputs = []
    for name, matrix in matrices.items():
        path = out / f"field_{name}.csv"
        write_matrix_csv(matrix, path)
        outputs.append(path)
    direction_path = out / "direction_field.csv"
    write_direction_field_csv(world.direction[args.agent], env, direction_path)
    outputs.append(direction_path)
    write_field_sidecar(
        config.field_params,
        {"agent": args.agent, "step": args.step, "seed": config.seed,
         "kinds": sorted(matrices)},
        out / "fields.json",
    )
    _write_manifest(out, "export-fields", args, config,
                    [args.scene, getattr(args, "agents", None),
                     getattr(args, "agents_json", None)],
                    outputs)
    print(f"export-fields: agent {args.agent} at step {args.step} -> {out}")
    return 0


def cmd_convert(args: argparse.Namespace) -> int:
    count = convert_columns(args.input, args.output, args.cols)
    print(f"convert: {count} rows -> {args.output}")
    return 0


# ------------------------------------------------------------------ parser

def _add_common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=None, help="simulation RNG seed")
    p.add_argument("--config", default=None, help="config JSON path")
    p.add_argument("--out", required=out_required, help="output directory")


def _add_agent_sources(p: argparse.ArgumentParser) -> None:
    p.add_argument("--agents", default=None, help="recorded trajectory TSV")
    p.add_argument("--agents-json", default=None,
                   help="synthetic agent list JSON")
    p.add_argument("--source-interval", type=float, default=0.4,
                   help="seconds between recorded frames (default 0.4)")


def _add_sim_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["baseline", "data-driven"], default="baseline")
    p.add_argument("--trends", default=None, help="trend JSONL for data-driven mode")
    p.add_argument("--lockstep-dir", default=None,
                   help="directory for lockstep file exchange")
    p.add_argument("--lockstep-timeout", type=float, default=30.0)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--td", type=int, default=None, help="data-driven period override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="navfield",
        description="Grid crowd simulation on predicted-trend navigation fields",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation")
    p.add_argument("--scene", required=True)
    _add_agent_sources(p)
    _add_sim_options(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="compare simulated vs recorded trajectories")
    p.add_argument("--sim", required=True, help="simulated trajectory CSV")
    p.add_argument("--real", required=True, help="recorded trajectory CSV")
    p.add_argument("--scene", required=True)
    p.add_argument("--horizon", type=int, default=12)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--dt", type=float, default=0.4)
    p.add_argument("--kde", action="store_true", help="export kernel-density curves")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-td", help="ADE across data-driven periods")
    p.add_argument("--scene", required=True)
    p.add_argument("--td-values", required=True,
                   help="comma list or range, e.g. 1,6,12 or 1..12")
    _add_agent_sources(p)
    _add_sim_options(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep_td)

    p = sub.add_parser("export-fields", help="dump one agent's field matrices")
    p.add_argument("--scene", required=True)
    p.add_argument("--step", type=int, required=True)
    p.add_argument("--agent", type=int, required=True)
    _add_agent_sources(p)
    _add_sim_options(p)
    _add_common(p)
    p.set_defaults(func=cmd_export_fields)

    p = sub.add_parser("convert", help="reorder trajectory columns into canonical TSV")
    p.add_argument("--cols", required=True, help="input column order, e.g. frame,id,y,x")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PredictorUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NoPathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ParseError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
