"""``seqpool`` command line.

Subcommands: synth, pool, train, predict, eval, viz. Every run that writes
to disk also writes a flags echo file next to its output. The file lists the
subcommand and every resolved flag, one token per line, so
``seqpool @path/to/run.flags`` replays the run. ``--jobs`` is left out of
the echo because outputs never depend on it.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import classify, evalharness, featmap, parampool, pipeline, rankpool, smooth
from .seqcore import DIRECTIONS, DataError, Descriptor, LabeledDescriptor, read_descriptor, read_manifest, read_sequence
from .solvers import SolverConfig

log = logging.getLogger("seqpool")

SEED_ENV = "SEQPOOL_SEED"
EXPERIMENTS = ("basic", "framedrop", "length")
_NOT_ECHOED = {"jobs", "command"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {s}")
    return v


def _nonneg_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if v < 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be non-negative, got {s}")
    return v


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {s}")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s) if s.lstrip("-").isdigit() else None
    if v is None or v < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {s!r}")
    return v


def _seed_option(p):
    p.add_argument("--seed", type=_nonneg_int, default=None, help=f"master seed (default: ${SEED_ENV} or 0)")


def _jobs_option(p):
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes (outputs do not depend on it)")


def _solver_options(p, pooling=True):
    g = p.add_argument_group("solver")
    if pooling:
        g.add_argument("--solver", choices=rankpool.SOLVERS, default="svr")
        g.add_argument("--C", type=_positive_float, default=1.0, help="pooling regularization constant")
        g.add_argument("--epsilon", type=_nonneg_float, default=0.1, help="SVR insensitive-tube half width")
    g.add_argument("--tol", type=_positive_float, default=1e-4, help="stopping tolerance on the max dual violation")
    default_passes = 1000 if pooling else classify.CLASSIFIER_SOLVER.max_passes
    g.add_argument("--max-passes", type=_positive_int, default=default_passes)


def _map_options(p):
    g = p.add_argument_group("feature maps")
    g.add_argument("--chi2-order", type=_nonneg_int, default=1)
    g.add_argument("--chi2-period", type=_positive_float, default=0.65)


def _pooling_options(p):
    g = p.add_argument_group("pooling")
    g.add_argument("--pooler", choices=pipeline.POOLERS, default="rank")
    g.add_argument("--smooth", choices=smooth.STRATEGIES, default=None,
                   help="default: tvm for rank/subspace/nn, none for the baselines")
    g.add_argument("--ma-window", type=_positive_int, default=20)
    g.add_argument("--pre-map", choices=featmap.MAPS, default="posneg")
    g.add_argument("--direction", choices=DIRECTIONS, default="both")
    g.add_argument("--subspace-d", type=_positive_int, default=1)
    g.add_argument("--subspace-variant", choices=parampool.SUBSPACE_VARIANTS, default="robust")
    g.add_argument("--nn-hidden", type=_positive_int, default=10)
    g.add_argument("--nn-epochs", type=_positive_int, default=200)
    g.add_argument("--nn-lr", type=_positive_float, default=0.01)
    _solver_options(p)


def _classifier_options(p):
    g = p.add_argument_group("classifier")
    g.add_argument("--post-map", choices=featmap.MAPS, default="posneg")
    g.add_argument("--cv-metric", choices=classify.CV_METRICS, default="acc")
    g.add_argument("--c-grid", type=_positive_float, nargs="+", default=list(classify.DEFAULT_C_GRID),
                   help="classifier C values tried by 2-fold cross-validation")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seqpool", description=__doc__.split("\n")[0], fromfile_prefix_chars="@")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic benchmark dataset")
    p.add_argument("--preset", choices=sorted(evalharness.PRESETS), default="drift4")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=_nonneg_int, default=None, help=f"dataset seed (default: ${SEED_ENV} or 7)")

    p = sub.add_parser("pool", help="pool every sequence of a manifest into a descriptor")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="descriptor directory (mirrors manifest paths)")
    _pooling_options(p)
    _map_options(p)
    _seed_option(p)
    _jobs_option(p)

    p = sub.add_parser("train", help="train one-vs-all classifiers on pooled descriptors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--desc-dir", nargs="+", required=True, help="one directory per channel")
    p.add_argument("--model", required=True, help="output model file")
    _classifier_options(p)
    _map_options(p)
    _solver_options(p, pooling=False)
    _seed_option(p)

    p = sub.add_parser("predict", help="classify descriptor files")
    p.add_argument("--model", required=True)
    p.add_argument("--desc", nargs="+", required=True, help="one descriptor file per channel")
    p.add_argument("--out", default=None, help="JSON output file (default: stdout)")

    p = sub.add_parser("eval", help="metrics for descriptors or for a whole experiment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--experiment", choices=EXPERIMENTS, default="basic")
    p.add_argument("--model", default=None, help="score precomputed descriptors with this model")
    p.add_argument("--desc-dir", nargs="+", default=None, help="descriptor directories, with --model")
    p.add_argument("--split", default="test")
    p.add_argument("--out", default=None, help="JSON report file (default: stdout)")
    p.add_argument("--drop-fractions", type=_nonneg_float, nargs="+",
                   default=list(evalharness.DEFAULT_DROP_FRACTIONS))
    p.add_argument("--buckets", type=_positive_int, default=3)
    _pooling_options(p)
    _classifier_options(p)
    _map_options(p)
    _seed_option(p)
    _jobs_option(p)

    p = sub.add_parser("viz", help="render the rank-pooling weights of a pixel sequence as a PGM image")
    p.add_argument("--seq", required=True)
    p.add_argument("--width", type=_positive_int, required=True)
    p.add_argument("--height", type=_positive_int, required=True)
    p.add_argument("--out", required=True, help="output .pgm file")
    _solver_options(p)
    _seed_option(p)
    parser.subcommands = sub.choices
    return parser


# -- config resolution ---------------------------------------------------------


def _resolve_seed(args, default: int) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return default
    try:
        seed = int(env)
    except ValueError:
        raise UsageError(f"seqpool: error: {SEED_ENV}={env!r} is not an integer") from None
    if seed < 0:
        raise UsageError(f"seqpool: error: {SEED_ENV} must be non-negative, got {seed}")
    return seed


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(
        C=getattr(args, "C", 1.0),
        epsilon=getattr(args, "epsilon", 0.1),
        tol=args.tol,
        max_passes=args.max_passes,
        seed=args.seed,
    )


def _chi2(args) -> featmap.Chi2MapConfig:
    return featmap.Chi2MapConfig(order=args.chi2_order, period=args.chi2_period)


def _pipeline_cfg(args) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig(
        pooler=args.pooler,
        smoothing=args.smooth,
        ma_window=args.ma_window,
        pre_map=args.pre_map,
        solver=args.solver,
        direction=args.direction,
        solver_cfg=_solver_cfg(args),
        chi2=_chi2(args),
        subspace=parampool.SubspaceConfig(args.subspace_d, args.subspace_variant),
        nn=parampool.NNPoolConfig(args.nn_hidden, args.nn_lr, args.nn_epochs, args.seed),
    )
    args.smooth = cfg.resolved_smoothing
    return cfg


def _eval_cfg(args) -> evalharness.EvalConfig:
    return evalharness.EvalConfig(
        pipeline=_pipeline_cfg(args),
        post_map=args.post_map,
        c_grid=tuple(args.c_grid),
        cv_metric=args.cv_metric,
        seed=args.seed,
        chi2=_chi2(args),
    )


def _flag_token(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def echo_lines(parser: argparse.ArgumentParser, args) -> list[str]:
    """Replayable flags for ``args``, one token per line, in parser order."""
    subparser = parser.subcommands[args.command]
    lines = [args.command]
    for action in subparser._actions:
        if not action.option_strings or action.dest in _NOT_ECHOED or action.dest == "help":
            continue
        value = getattr(args, action.dest, None)
        if value is None:
            continue
        flag = max(action.option_strings, key=len)
        if isinstance(value, (list, tuple)):
            lines.append(flag)
            lines.extend(_flag_token(v) for v in value)
        else:
            lines.extend([flag, _flag_token(value)])
    return lines


def write_echo(parser, args, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(echo_lines(parser, args)) + "\n")


def _write_json(obj, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _read_channels(manifest, records, desc_dirs):
    """Concatenate per-channel descriptors for each record; returns (values, channel sizes)."""
    rows, sizes = [], None
    for r in records:
        chans = [read_descriptor(Path(d) / r.path).values for d in desc_dirs]
        s = tuple(c.size for c in chans)
        if sizes is None:
            sizes = s
        elif s != sizes:
            raise DataError(f"{r.path}: channel lengths {list(s)} differ from {list(sizes)}")
        rows.append(np.concatenate(chans))
    return rows, sizes


# -- subcommands ---------------------------------------------------------------


def cmd_synth(parser, args):
    args.seed = _resolve_seed(args, 7)
    cfg = evalharness.PRESETS[args.preset](seed=args.seed)
    manifest, _ = evalharness.generate_synthetic(cfg, args.out)
    log.info("wrote %d sequences to %s", len(manifest), args.out)
    write_echo(parser, args, Path(args.out) / "synth.flags")


def cmd_pool(parser, args):
    args.seed = _resolve_seed(args, 0)
    cfg = _pipeline_cfg(args)
    manifest = read_manifest(args.manifest)
    written = pipeline.pool_manifest(manifest, cfg, args.out, jobs=args.jobs)
    log.info("wrote %d descriptors to %s", len(written), args.out)
    write_echo(parser, args, Path(args.out) / "pool.flags")


def cmd_train(parser, args):
    args.seed = _resolve_seed(args, 0)
    manifest = read_manifest(args.manifest)
    manifest.check_trainable()
    train = manifest.split("train")
    rows, sizes = _read_channels(manifest, train, args.desc_dir)
    data = [LabeledDescriptor(Descriptor(v), r.label) for v, r in zip(rows, train)]
    model = classify.train_ova(
        data,
        post_map=args.post_map,
        c_grid=args.c_grid,
        seed=args.seed,
        cv_metric=args.cv_metric,
        channel_sizes=sizes,
        chi2=_chi2(args),
        solver_cfg=_solver_cfg(args),
    )
    classify.save_model(model, args.model)
    log.info("selected C=%s; model written to %s", model.c_selected, args.model)
    write_echo(parser, args, Path(args.model + ".flags"))


def cmd_predict(parser, args):
    model = classify.load_model(args.model)
    values = np.concatenate([read_descriptor(p).values for p in args.desc])
    pred = classify.predict(model, values)
    _write_json({"label": pred.label, "scores": pred.scores}, args.out)
    if args.out is not None:
        write_echo(parser, args, Path(args.out + ".flags"))


def _report_basic(args, manifest):
    if args.model is None:
        return evalharness.evaluate(manifest, _eval_cfg(args), split=args.split, jobs=args.jobs).to_dict()
    if args.desc_dir is None:
        raise UsageError("seqpool eval: error: --model needs --desc-dir")
    model = classify.load_model(args.model)
    records = manifest.split(args.split)
    if not records:
        raise DataError(f"manifest has no {args.split!r} records")
    rows, _ = _read_channels(manifest, records, args.desc_dir)
    return evalharness.evaluate_descriptors(model, rows, [r.label for r in records]).to_dict()


def cmd_eval(parser, args):
    args.seed = _resolve_seed(args, 0)
    if args.experiment != "basic" and args.model is not None:
        raise UsageError("seqpool eval: error: --model only applies to --experiment basic")
    if args.model is None:
        args.desc_dir = None
    manifest = read_manifest(args.manifest)
    if args.experiment == "basic":
        report = _report_basic(args, manifest)
    elif args.experiment == "framedrop":
        for p in args.drop_fractions:
            if p > 0.9:
                raise UsageError(f"seqpool eval: error: argument --drop-fractions: {p} is above 0.9")
        baseline, rows = evalharness.frame_drop_experiment(
            manifest, _eval_cfg(args), args.drop_fractions, seed=args.seed, jobs=args.jobs
        )
        report = {
            "baseline": baseline.to_dict(),
            "rows": [
                {
                    "fraction": r.fraction,
                    "delta_accuracy": r.delta_accuracy,
                    "delta_map": r.delta_map,
                    "report": r.report.to_dict(),
                }
                for r in rows
            ],
        }
    else:
        overall, rows = evalharness.length_bucket_report(manifest, _eval_cfg(args), args.buckets, jobs=args.jobs)
        report = {
            "overall": overall.to_dict(),
            "buckets": [
                {"bucket": r.bucket, "min_T": r.min_T, "max_T": r.max_T, "report": r.report.to_dict()} for r in rows
            ],
        }
    _write_json(report, args.out)
    if args.out is not None:
        write_echo(parser, args, Path(args.out + ".flags"))


def cmd_viz(parser, args):
    args.seed = _resolve_seed(args, 0)
    x = read_sequence(args.seq)
    cfg = rankpool.PoolingConfig(smoothing="independent", solver=args.solver, solver_cfg=_solver_cfg(args))
    evalharness.visualize_dynamics(x, args.width, args.height, cfg, path=args.out)
    write_echo(parser, args, Path(args.out + ".flags"))


COMMANDS = {
    "synth": cmd_synth,
    "pool": cmd_pool,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "viz": cmd_viz,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
        COMMANDS[args.command](parser, args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except DataError as e:
        print(f"seqpool: data error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"seqpool: data error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        # invalid combinations that survive per-flag checks
        print(f"seqpool: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
