"""Command line interface: ``spiralseg {solve,analyze,sweep,selftest}``.

Exit codes: 0 success, 1 an analysis check failed, 2 bad configuration or
input file, 3 the solver did not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .analysis import analyze_state, write_report
from .config import ConfigError, ExperimentConfig, load_config, parse_config_text, preset
from .io import FormatError, load_checkpoint, save_checkpoint
from .solver import ContinuationError, continuation_sweep

EXIT_OK, EXIT_ANALYSIS, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
CHECKPOINTS = "checkpoints"

log = logging.getLogger("spiralseg")


def _grid_arg(text):
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NxM, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spiralseg",
                                description="Strongly competing systems near a multiple point.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value experiment file")
        sp.add_argument("--preset", help="fig1a, fig1b or fig1c")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--beta-max", type=float, help="truncate the beta schedule")
        sp.add_argument("--grid", type=_grid_arg, help="NxM grid (n_theta x n_y)")

    sp = sub.add_parser("solve", help="run the beta continuation and write checkpoints")
    common(sp)
    sp = sub.add_parser("analyze", help="analyze a run directory or a single checkpoint")
    sp.add_argument("checkpoint", help="run directory or checkpoint directory")
    common(sp)
    sp = sub.add_parser("sweep", help="solve and analyze after every beta")
    common(sp)
    sub.add_parser("selftest", help="fast synthetic checks, no PDE solve")
    return p


def resolve_config(args, fallback: ExperimentConfig | None = None) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    elif fallback is not None:
        cfg = fallback
    else:
        raise ConfigError("no experiment given: use --config FILE or --preset NAME")
    over = {}
    if args.grid:
        over["n_theta"], over["n_y"] = args.grid
    if args.out:
        over["out"] = args.out
    if over:
        try:
            cfg = cfg.with_overrides(**over)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    if args.beta_max is not None:
        cfg = cfg.truncated(args.beta_max)
    return cfg


def _checkpoint_dir(out: Path, n: int, beta: float) -> Path:
    return out / CHECKPOINTS / f"{n:02d}_beta_{beta:.6g}"


def run_solve(cfg: ExperimentConfig, on_state=None):
    """Continuation sweep writing one checkpoint per beta; returns the trajectory."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    grid = cfg.grid()
    traces = cfg.traces().sample(grid, cfg.n_species)
    count = [0]

    def persist(state):
        d = _checkpoint_dir(out, count[0], state.beta)
        save_checkpoint(state, d, {"config": cfg.to_text(), "history": state.history})
        count[0] += 1
        log.info("beta=%g converged=%s defect=%.2e -> %s", state.beta, state.converged,
                 state.residual.max(), d)
        if on_state is not None:
            on_state(state, d)

    return continuation_sweep(grid, cfg.competition(), traces, cfg.beta_schedule, tol=cfg.tol,
                              method=cfg.method, max_outer=cfg.max_outer, callback=persist)


def load_run(path):
    """``(trajectory, config)`` from a run directory or a single checkpoint."""
    path = Path(path)
    if (path / CHECKPOINTS).is_dir():
        dirs = sorted(d for d in (path / CHECKPOINTS).iterdir() if d.is_dir())
        if not dirs:
            raise FormatError(path / CHECKPOINTS, 0, "no checkpoints")
    else:
        dirs = [path]
    loaded = [load_checkpoint(d) for d in dirs]
    traj = sorted((s for s, _ in loaded), key=lambda s: s.beta)
    text = loaded[-1][1].get("config")
    cfg = parse_config_text(text, str(dirs[-1] / "manifest.json")) if text else None
    return traj, cfg


def run_analyze(traj, cfg, out_dir):
    report = analyze_state(traj[-1], cfg, traj)
    write_report(report, out_dir, traj[-1])
    return report


def _print_report(report, out_dir):
    print(f"analysis of {report.name} -> {out_dir}")
    for line in report.summary_lines():
        print("  " + line)


def cmd_solve(args) -> int:
    cfg = resolve_config(args)
    run_solve(cfg)
    print(f"checkpoints written to {Path(cfg.out) / CHECKPOINTS}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    traj, stored = load_run(args.checkpoint)
    cfg = resolve_config(args, stored)
    out_dir = Path(args.out) if args.out else Path(args.checkpoint) / "analysis"
    report = run_analyze(traj, cfg, out_dir)
    _print_report(report, out_dir)
    return EXIT_OK if report.passed else EXIT_ANALYSIS


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    traj = []
    reports = []

    def analyze_step(state, d):
        traj.append(state)
        out_dir = Path(cfg.out) / "analysis" / d.name
        reports.append(run_analyze(list(traj), cfg, out_dir))
        _print_report(reports[-1], out_dir)

    run_solve(cfg, analyze_step)
    return EXIT_OK if reports and reports[-1].passed else EXIT_ANALYSIS


def cmd_selftest(args) -> int:
    from .selftest import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_ANALYSIS


COMMANDS = {"solve": cmd_solve, "analyze": cmd_analyze, "sweep": cmd_sweep, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FormatError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContinuationError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
