"""Command-line front end.

    amlgame [--config PATH] [--seed U64] [--out DIR] [--workers N] [--no-gate] <command> ...

Commands: train, curves, nash, fp, level, cost-sweep. Global flags may also be
given after the command name. Exit codes: 0 ok, 1 validation, 2 accuracy gate,
3 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable

from . import __version__
from .classifier import evaluate, load_model, save_model, train
from .config import STREAM_DATASET, STREAM_SPLIT, ConfigError, RunConfig, load_config
from .engagement import CurvesFormatError, load_curves, save_curves, sweep_defense
from .fictitious_play import convergence_check, run_fp, save_trace
from .level_game import LevelGameSpec, save_sweep, solution_report, solve_level_equilibrium, sweep_cost
from .matrix_game import equilibrium_report, from_curves, nash_equilibria
from .waveform import gen_dataset, split_dataset

logger = logging.getLogger("amlgame")

EXIT_OK, EXIT_VALIDATION, EXIT_GATE, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- helpers


def _header(cmd: str, cfg: RunConfig) -> str:
    return f"amlgame {cmd} seed={cfg.seed} config_sha256={cfg.digest()}"


def _meta(cmd: str, cfg: RunConfig, **extra) -> dict:
    return {"command": cmd, "seed": cfg.seed, "config_sha256": cfg.digest(), "version": __version__, **extra}


def _target(path: str | None, cfg: RunConfig, default_name: str) -> Path:
    p = Path(path) if path else Path(cfg.output_dir) / default_name
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {p.parent}: {exc}", EXIT_IO) from exc
    if not os.access(p.parent, os.W_OK):
        raise CliError(f"{p.parent} is not writable", EXIT_IO)
    return p


def _atomic(path: Path, write: Callable[[Path], None]) -> None:
    tmp = path.with_name(f".{path.name}.part")
    try:
        write(tmp)
        os.replace(tmp, path)
    except OSError as exc:
        raise CliError(f"writing {path} failed: {exc}", EXIT_IO) from exc
    finally:
        if tmp.exists():
            tmp.unlink()


def _write_json(path: Path, obj: dict) -> None:
    def w(tmp):
        tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    _atomic(path, w)


def _curves(path: str):
    try:
        return load_curves(path)
    except CurvesFormatError as exc:
        where = f"{path}:{exc.line}: " if exc.line else f"{path}: "
        raise CliError(where + str(exc), EXIT_VALIDATION) from exc
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


# ---------------------------------------------------------------- commands


def cmd_train(args, cfg: RunConfig) -> int:
    out = _target(args.model, cfg, "model.bin")
    ds = gen_dataset(cfg.dataset.n_samples, cfg.occupancy(), cfg.channel_params(), cfg.rng_seed(STREAM_DATASET))
    train_set, test_set = split_dataset(ds, cfg.dataset.train_fraction, cfg.rng_seed(STREAM_SPLIT))
    model = train(train_set, cfg.train_config())
    model.accuracy = evaluate(model, test_set)
    gate = cfg.training.accuracy_gate
    report = {
        "accuracy": model.accuracy,
        "gate": gate,
        "passed": model.accuracy >= gate,
        "n_train": len(train_set),
        "n_test": len(test_set),
        "loss": model.loss_history,
    }
    if not report["passed"] and not args.no_gate:
        _emit({**report, "model": None})
        logger.error("accuracy %.4f below gate %.2f; model not saved", model.accuracy, gate)
        return EXIT_GATE
    _atomic(out, lambda tmp: save_model(model, tmp, meta=_meta("train", cfg)))
    _emit({**report, "model": str(out)})
    return EXIT_OK


def cmd_curves(args, cfg: RunConfig) -> int:
    out = _target(args.output, cfg, "curves.csv")
    model_path = args.model or str(Path(cfg.output_dir) / "model.bin")
    try:
        model = load_model(model_path)
    except OSError as exc:
        raise CliError(f"cannot read {model_path}: {exc}", EXIT_IO) from exc
    reps = args.replications or cfg.engagement.replications
    curves = sweep_defense(cfg.engagement_config(), cfg.d_grid(), model, reps, cfg.workers)
    _atomic(out, lambda tmp: save_curves(curves, tmp, [_header("curves", cfg) + f" replications={reps}"]))
    _emit({"curves": str(out), "rows": len(curves.d_grid), "replications": reps})
    return EXIT_OK


def cmd_nash(args, cfg: RunConfig) -> int:
    g_cfg = cfg.games
    curves = _curves(args.curves)
    kind = args.kind or g_cfg.reward_kind
    d = g_cfg.d if args.d is None else args.d
    c_A = g_cfg.c_A if args.c_a is None else args.c_a
    game = from_curves(curves, d, kind, c_A)
    eqs = nash_equilibria(game)
    report = equilibrium_report(game, eqs)
    report["meta"] = _meta("nash", cfg, curves=str(args.curves))
    out = _target(args.output, cfg, "nash.json")
    _write_json(out, report)
    _emit({"output": str(out), "equilibria": [[e["p_D"], e["p_A"]] for e in report["equilibria"]]})
    return EXIT_OK


def cmd_fp(args, cfg: RunConfig) -> int:
    g_cfg = cfg.games
    curves = _curves(args.curves)
    game = from_curves(
        curves,
        g_cfg.d if args.d is None else args.d,
        args.kind or g_cfg.reward_kind,
        g_cfg.c_A if args.c_a is None else args.c_a,
    )
    fp_cfg = cfg.fp_config(rounds=args.rounds)
    trace = run_fp(game, fp_cfg)
    out = _target(args.output, cfg, "fp_trace.csv")
    _atomic(out, lambda tmp: save_trace(trace, tmp, [_header("fp", cfg)]))
    window = min(g_cfg.fp.window, len(trace))
    limit = convergence_check(trace, window, g_cfg.fp.eps)
    _emit(
        {
            "output": str(out),
            "rounds": len(trace),
            "final_belief": [trace.final_belief.p_D, trace.final_belief.p_A],
            "converged": limit is not None,
        }
    )
    return EXIT_OK


def _level_spec(args, cfg: RunConfig, c_A1: float | None = None) -> LevelGameSpec:
    g_cfg = cfg.games
    return LevelGameSpec(
        _curves(args.curves),
        args.kind or g_cfg.reward_kind,
        c_A1=g_cfg.c_A1 if c_A1 is None else c_A1,
        c_A2=g_cfg.c_A2 if args.c_a2 is None else args.c_a2,
        smooth=g_cfg.smooth or args.smooth,
    )


def cmd_level(args, cfg: RunConfig) -> int:
    spec = _level_spec(args, cfg, args.c_a1)
    sols = solve_level_equilibrium(spec)
    report = solution_report(spec, sols)
    report["meta"] = _meta("level", cfg, curves=str(args.curves))
    out = _target(args.output, cfg, "level.json")
    _write_json(out, report)
    best = sols[0]
    _emit({"output": str(out), "d_star": best.d_star, "p_A_star": best.p_A_star, "verified": best.verified})
    return EXIT_OK if best.verified else EXIT_VALIDATION


def cmd_cost_sweep(args, cfg: RunConfig) -> int:
    spec = _level_spec(args, cfg)
    grid = [float(v) for v in args.grid.split(",")] if args.grid else list(cfg.games.c_A1_grid)
    rows = sweep_cost(spec, grid)
    out = _target(args.output, cfg, "cost_sweep.csv")
    _atomic(out, lambda tmp: save_sweep(rows, tmp, [_header("cost-sweep", cfg)]))
    _emit({"output": str(out), "points": len(rows), "all_verified": all(r["verified"] for r in rows)})
    return EXIT_OK


# ---------------------------------------------------------------- parsing


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # The same flags are accepted before and after the command; SUPPRESS keeps
    # the sub-parser from overwriting values given up front.
    dflt = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=dflt, help="YAML or JSON run configuration")
    p.add_argument("--seed", type=int, default=dflt, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", default=dflt, help="output directory")
    p.add_argument("--workers", type=int, default=dflt, help="processes for the defense sweep")
    p.add_argument("--no-gate", action="store_true", default=argparse.SUPPRESS if suppress else False)
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amlgame", parents=[_global_flags(False)], description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"amlgame {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _global_flags(True)

    p = sub.add_parser("train", parents=[common], help="train the defender's sensing classifier")
    p.add_argument("--model", help="model output path (default OUT/model.bin)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("curves", parents=[common], help="sweep the defense level and write curves CSV")
    p.add_argument("--model", help="trained model (default OUT/model.bin)")
    p.add_argument("--replications", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_curves)

    for name, func, extra in (("nash", cmd_nash, False), ("fp", cmd_fp, True)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("curves", help="curves CSV")
        p.add_argument("--d", type=float)
        p.add_argument("--kind", choices=("throughput", "success_ratio"))
        p.add_argument("--c-a", dest="c_a", type=float)
        if extra:
            p.add_argument("--rounds", type=int)
        p.add_argument("--output")
        p.set_defaults(func=func)

    for name, func in (("level", cmd_level), ("cost-sweep", cmd_cost_sweep)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("curves", help="curves CSV")
        p.add_argument("--kind", choices=("throughput", "success_ratio"))
        p.add_argument("--c-a2", dest="c_a2", type=float)
        p.add_argument("--smooth", action="store_true")
        if name == "level":
            p.add_argument("--c-a1", dest="c_a1", type=float)
        else:
            p.add_argument("--grid", help="comma-separated c_A1 values")
        p.add_argument("--output")
        p.set_defaults(func=func)
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    return cfg.validate()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        return args.func(args, cfg)
    except CliError as exc:
        print(f"amlgame: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ValueError) as exc:
        print(f"amlgame: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"amlgame: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
