"""Command-line entry points: generate, run, serve, report."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..inference import BpOptions
from ..mlr import TEACHER_MODES, TeacherConfig
from . import dataio
from .dataio import config_float, config_int, load_config
from .session import STRATEGIES, SessionConfig, SessionState, run_session
from .synth import GeneratorConfig, train_test_pair


def generator_config(cfg: dict[str, str]) -> GeneratorConfig:
    return GeneratorConfig(
        instance_count=config_int(cfg, "n", 2000),
        seed=config_int(cfg, "seed", 0),
        feature_dim=config_int(cfg, "feature_dim", 16),
        context_strength=config_float(cfg, "context_strength", 0.9),
        feature_noise=config_float(cfg, "feature_noise", 1.4),
        object_rate=config_float(cfg, "object_rate", 0.85),
        person_rate=config_float(cfg, "person_rate", 0.6),
        person_noise=config_float(cfg, "person_noise", 0.6),
        run_length=(config_int(cfg, "run_min", 5), config_int(cfg, "run_max", 9)),
    )


def session_config(cfg: dict[str, str], strategy: str | None = None,
                   mode: str | None = None) -> SessionConfig:
    k_fraction = config_float(cfg, "k", 0.25) if "K" not in cfg else None
    k_absolute = config_int(cfg, "K", 0) if "K" in cfg else None
    teacher = TeacherConfig(
        delta=config_float(cfg, "delta", 0.9),
        k_absolute=k_absolute,
        k_fraction=k_fraction,
        mode=mode or cfg.get("mode", "strong_only"),
    )
    bp = BpOptions(
        max_iters=config_int(cfg, "bp_iters", 100),
        tol=config_float(cfg, "bp_tol", 1e-6),
        damping=config_float(cfg, "damping", 0.5),
    )
    return SessionConfig(
        batch_size=config_int(cfg, "batch", 50),
        strategy=strategy or cfg.get("strategy", "caqs"),
        teacher=teacher,
        bp=bp,
        seed=config_int(cfg, "seed", 0),
        init_fraction=config_float(cfg, "init_fraction", 0.1),
        init_epochs=config_int(cfg, "init_epochs", 300),
        eval_every=config_int(cfg, "eval_every", 1),
        weight_decay=config_float(cfg, "lambda", 1e-3),
        learning_rate=config_float(cfg, "alpha", 0.1),
        buffer_capacity=config_int(cfg, "buffer", 32),
        flush_epochs=config_int(cfg, "flush_epochs", 10),
        bins=config_int(cfg, "bins", 8),
    )


def cmd_generate(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    gen = generator_config(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = train_test_pair(gen, test_count=config_int(cfg, "test_n", 500))
    dataio.save_dataset(out / "train.jsonl", train)
    dataio.save_dataset(out / "test.jsonl", test)
    print(f"wrote {len(train)} train / {len(test)} test instances to {out}")
    return 0


def cmd_run(args) -> int:
    from . import report

    cfg = load_config(args.config) if args.config else {}
    sc = session_config(cfg, strategy=args.strategy, mode=args.mode)
    train = dataio.load_dataset(args.data)
    test = dataio.load_dataset(args.test_data)
    result = run_session(train, test, sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_curve(out / "curve.csv", list(result.curve), arm=sc.strategy)
    report.write_result(out / "result.json", result, extra={
        "strategy": sc.strategy, "mode": sc.teacher.mode, "seed": sc.seed})
    print(f"final accuracy {result.final_accuracy:.4f} after {result.rounds} rounds "
          f"({result.strong_total} manual labels); outputs in {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = load_config(args.config) if args.config else {}
    sc = session_config(cfg, strategy=args.strategy, mode=args.mode)
    train = dataio.load_dataset(args.data)
    test = dataio.load_dataset(args.test_data) if args.test_data else None
    state = SessionState(train, sc, test_dataset=test)
    state.bootstrap()
    app = create_app(state, oracle=args.oracle)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_report(args) -> int:
    from . import report

    arms = {}
    for run_dir in args.runs:
        run_dir = Path(run_dir)
        curve_path = run_dir / "curve.csv"
        if not curve_path.exists():
            raise FileNotFoundError(f"{curve_path} not found")
        for arm, points in report.read_curves(curve_path).items():
            key = arm if arm not in arms else f"{run_dir.name}/{arm}"
            arms[key] = points
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_curves(out / "curves.csv", arms)
    finals = {}
    for arm, points in arms.items():
        evaluated = [pt for pt in points if pt.accuracy is not None]
        if not evaluated:
            raise ValueError(f"arm {arm!r} has no evaluated curve points")
        last = evaluated[-1]
        from .session import SessionResult
        finals[arm] = SessionResult(
            final_accuracy=last.accuracy, curve=tuple(points),
            strong_total=last.strong_total, weak_total=last.weak_total,
            seen=last.seen, rounds=last.round_index)
    report.write_summary(out / "summary.csv", finals)
    report.render_curves(out / "learning_curves.png", arms)
    print(f"report for {len(arms)} arms in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxal",
        description="context-aware active learning over event streams")
    sub = parser.add_subparsers(dest="command", required=True)

    con = argparse.ArgumentParser(add_help=False)
    con.add_argument("--config", help="flat key = value configuration file")

    gen = sub.add_parser("generate", parents=[con],
                         help="write synthetic train/test JSONL datasets")
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", parents=[con],
                         help="drive a full labeling session with oracle answers")
    run.add_argument("--data", required=True, help="training stream JSONL")
    run.add_argument("--test-data", required=True, help="held-out JSONL")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--strategy", choices=STRATEGIES, help="override config strategy")
    run.add_argument("--mode", choices=TEACHER_MODES, help="override teacher mode")
    run.set_defaults(func=cmd_run)

    srv = sub.add_parser("serve", parents=[con],
                         help="expose the labeling session over HTTP")
    srv.add_argument("--data", required=True, help="training stream JSONL")
    srv.add_argument("--test-data", help="held-out JSONL for curve accuracy")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--oracle", action="store_true",
                     help="allow auto-answering from dataset labels")
    srv.add_argument("--strategy", choices=STRATEGIES, help="override config strategy")
    srv.add_argument("--mode", choices=TEACHER_MODES, help="override teacher mode")
    srv.set_defaults(func=cmd_serve)

    rep = sub.add_parser("report", help="aggregate run outputs into curves and figures")
    rep.add_argument("--runs", nargs="+", required=True, help="run output directories")
    rep.add_argument("--out", required=True, help="report directory")
    rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
