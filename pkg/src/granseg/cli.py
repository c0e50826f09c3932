"""Command-line front end.

Exit status: 0 on success, 2 on bad input or configuration, 1 on internal errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import jsonl
from .analysis import (
    SWEEP_COLUMNS,
    SweepGrid,
    check_same_corpus,
    compare_methods,
    format_comparison,
    sweep,
    sweep_rows,
    write_csv,
)
from .corpus import CanonRule, corpus_stats, derive_gold, ingest, write_corpus, write_gold
from .metrics import Matching, MetricsReport, evaluate, format_bor, parse_cutoffs
from .pipeline import RunConfig, corpus_scores, load_corpus, run_method
from .scoring import (
    TEMPERATURE_BOUNDS,
    ScoreKind,
    apply_temperature,
    binary_nll,
    fit_temperature,
    load_scores,
    write_scores,
)
from .selection import TRACE_COLUMNS, trace_rows, write_boundaries

log = logging.getLogger("granseg")

EVAL_COLUMNS = (
    "dataset", "method", "tau", "g", "wf1", "f1", "bor", "purity", "coverage",
    "pred_count", "gold_count", "regime",
)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument plumbing


def _common(parser: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    g = parser.add_argument_group("shared options")
    g.add_argument("--config", help="JSON run configuration; flags override its values")
    g.add_argument("--seed", type=int, default=S, help="master seed for all randomness")
    g.add_argument("--window", type=int, default=S, help="boundary tolerance w (default 1)")
    g.add_argument("--matching", choices=[m.value for m in Matching], default=S)
    g.add_argument("--regime-cutoffs", dest="regime_cutoffs", type=parse_cutoffs, default=S,
                   metavar="LO,HI", help="BOR cutoffs for regime labels (default 0.80,1.25)")
    g.add_argument("--threads", type=int, default=S, help="worker threads; results do not depend on it")


def _corpus_args(parser: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    parser.add_argument("--corpus", default=S, help="canonical dialogue file")
    parser.add_argument("--gold", default=S, help="gold export file")
    parser.add_argument("--rule", default=S, help="derive gold instead: segment_id, boundary_marker or label")
    parser.add_argument("--unit", default=S, help="U (utterance) or T (speaker turn)")
    parser.add_argument("--dataset", default=S, help="dataset label for reports")


def _method_args(parser: argparse.ArgumentParser, scorer_only: bool = False) -> None:
    S = argparse.SUPPRESS
    if not scorer_only:
        parser.add_argument("--method", default=S,
                            choices=["static", "adaptive", "no-boundary", "periodic", "oracle-random",
                                     "oracle-periodic", "predictions"])
        parser.add_argument("--period", type=int, default=S, help="N for the periodic baseline")
        parser.add_argument("--predictions", default=S, help="predicted-boundary file")
        parser.add_argument("--tau", type=float, default=S)
        parser.add_argument("--rho", type=float, default=S, help="adaptive target selection rate")
        parser.add_argument("--eta", type=float, default=S, help="adaptive step size")
        parser.add_argument("--rate-window", dest="rate_window", type=int, default=S)
        parser.add_argument("--tau0", type=float, default=S)
        parser.add_argument("--max-age", dest="max_age", type=int, default=S)
        parser.add_argument("--candidate-threshold", dest="candidate_threshold", type=float, default=S)
    parser.add_argument("--name", default=S, help="method label for reports")
    parser.add_argument("--scorer", default=S, help="lexical, random, constant:<v> or file:<path>")
    parser.add_argument("--context", type=int, default=S, help="lexical scorer window k")
    parser.add_argument("--temperature", type=float, default=S, help="temperature for logit score files")
    parser.add_argument("--gap", type=int, default=S, help="minimum spacing g")


def _config(args: argparse.Namespace, skip: Sequence[str] = ()) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "func", *skip)}
    if args.config:
        return RunConfig.load(args.config, overrides)
    return RunConfig.from_mapping(overrides)


def _header_lines(meta: dict[str, Any]) -> list[str]:
    return [f"{key}: {jsonl.dumps(value)}" for key, value in sorted(meta.items())]


def _write_text(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")


def _format_report(rep: MetricsReport, cfg: RunConfig) -> str:
    lines = [
        f"dataset: {cfg.dataset_label()}",
        f"method: {cfg.method_label()}",
        f"dialogues: {rep.num_dialogues}",
        f"W-F1 (macro, w={rep.window}, {rep.matching.value}): {rep.wf1:.3f}",
        f"F1 (micro): {rep.f1:.3f}",
        f"BOR: {format_bor(rep.bor)} ({rep.pred_count}/{rep.gold_count})",
        f"regime: {rep.regime.value}",
        f"purity: {rep.purity:.3f}",
        f"coverage: {rep.coverage:.3f}",
    ]
    return "\n".join(lines) + "\n"


def _eval_row(rep: MetricsReport, cfg: RunConfig) -> dict[str, str]:
    thresholded = cfg.method == "static"
    return {
        "dataset": cfg.dataset_label(),
        "method": cfg.method_label(),
        "tau": f"{cfg.tau:.2f}" if thresholded else "",
        "g": str(cfg.gap) if cfg.method in ("static", "adaptive") else "",
        "wf1": f"{rep.wf1:.6f}",
        "f1": f"{rep.f1:.6f}",
        "bor": "undefined" if rep.bor is None else f"{rep.bor:.6f}",
        "purity": f"{rep.purity:.6f}",
        "coverage": f"{rep.coverage:.6f}",
        "pred_count": str(rep.pred_count),
        "gold_count": str(rep.gold_count),
        "regime": rep.regime.value,
    }


# --------------------------------------------------------------------------
# commands


def cmd_canonicalize(args: argparse.Namespace) -> int:
    rule = CanonRule.parse(args.rule, args.unit, args.drop_speaker or ())
    dialogues = [derive_gold(d, rule) for d in ingest(args.input)]
    if not dialogues:
        raise UsageError(f"{args.input}: corpus is empty")
    meta = {"rule": rule.describe(), "inputs_sha256": jsonl.file_sha256(args.input)}
    write_corpus(args.output, dialogues, meta=meta)
    out = Path(args.output)
    gold_path = args.gold_output or str(out.with_name(out.stem + ".gold" + out.suffix))
    write_gold(gold_path, dialogues, meta=meta)
    stats = corpus_stats(dialogues)
    print(f"dialogues: {stats['dialogues']}")
    print(f"messages: {stats['messages']}")
    print(f"gold boundaries: {stats['gold_boundaries']}")
    print(f"mean segment length: {stats['mean_segment_length']:.2f}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _config(args)
    dialogues = load_corpus(cfg)
    if not dialogues:
        raise UsageError("corpus is empty")
    out = run_method(cfg, dialogues)
    rep = evaluate(dialogues, out.predictions, cfg.window, cfg.matching_mode, cfg.regime_cutoffs)
    meta = cfg.header()
    text = _format_report(rep, cfg)
    print(text, end="")
    _write_text(cfg.report, "".join(f"# {line}\n" for line in _header_lines(meta)) + text)
    if cfg.output_csv:
        write_csv(cfg.output_csv, EVAL_COLUMNS, [_eval_row(rep, cfg)], _header_lines(meta))
    if cfg.boundaries_output:
        write_boundaries(cfg.boundaries_output, out.predictions, [d.id for d in dialogues], meta=meta)
    if cfg.trace_output:
        if out.trace is None:
            raise UsageError("--trace-output only applies to the adaptive method")
        write_csv(cfg.trace_output, TRACE_COLUMNS, trace_rows(out.trace), _header_lines(meta))
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if cfg.method not in ("no-boundary", "periodic", "oracle-random", "oracle-periodic"):
        raise UsageError("baseline needs --method no-boundary, periodic, oracle-random or oracle-periodic")
    dialogues = load_corpus(cfg)
    if not dialogues:
        raise UsageError("corpus is empty")
    out = run_method(cfg, dialogues)
    if cfg.output:
        write_boundaries(cfg.output, out.predictions, [d.id for d in dialogues], meta=cfg.header())
    rep = evaluate(dialogues, out.predictions, cfg.window, cfg.matching_mode, cfg.regime_cutoffs)
    print(_format_report(rep, cfg), end="")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if not cfg.output:
        raise UsageError("sweep needs --output")
    dialogues = load_corpus(cfg)
    if len(dialogues) < 2 and cfg.resamples:
        raise UsageError("bootstrap intervals need at least two dialogues (use --resamples 0)")
    cfg.method = "static"
    scores = corpus_scores(cfg, dialogues)
    grid = SweepGrid(cfg.tau_min, cfg.tau_max, cfg.tau_step, cfg.gap)
    header = _header_lines(cfg.header())
    points = sweep(dialogues, scores, grid, w=cfg.window, matching=Matching.COVERAGE,
                   cutoffs=cfg.regime_cutoffs, resamples=cfg.resamples, seed=cfg.seed, threads=cfg.threads)
    write_csv(cfg.output, SWEEP_COLUMNS, sweep_rows(cfg.method_label(), points), header)
    written = [cfg.output]
    if cfg.matching_mode is Matching.ONE_TO_ONE:
        path = Path(cfg.output)
        second = str(path.with_name(path.stem + ".one-to-one" + path.suffix))
        points_1to1 = sweep(dialogues, scores, grid, w=cfg.window, matching=Matching.ONE_TO_ONE,
                            cutoffs=cfg.regime_cutoffs, resamples=cfg.resamples, seed=cfg.seed,
                            threads=cfg.threads)
        write_csv(second, SWEEP_COLUMNS, sweep_rows(cfg.method_label(), points_1to1), header)
        written.append(second)
    print(f"{len(points)} operating points written to {', '.join(written)}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "func", "config_a", "config_b", "output")}
    cfg_a = RunConfig.load(args.config_a, overrides)
    cfg_b = RunConfig.load(args.config_b, overrides)
    dialogues_a, dialogues_b = load_corpus(cfg_a), load_corpus(cfg_b)
    check_same_corpus(dialogues_a, dialogues_b)
    for cfg_x, cfg_y in ((cfg_a, cfg_b), (cfg_b, cfg_a)):
        for key in ("window", "matching", "regime_cutoffs"):
            if getattr(cfg_x, key) != getattr(cfg_y, key):
                raise UsageError(f"configs disagree on {key}; metric settings must match")
    preds_a = run_method(cfg_a, dialogues_a).predictions
    preds_b = run_method(cfg_b, dialogues_a).predictions
    comp = compare_methods(
        dialogues_a, preds_a, preds_b, w=cfg_a.window, matching=cfg_a.matching_mode,
        cutoffs=cfg_a.regime_cutoffs, resamples=cfg_a.resamples, seed=cfg_a.seed,
    )
    text = format_comparison(comp, cfg_a.method_label(), cfg_b.method_label(), cfg_a.dataset_label())
    print(text, end="")
    if args.output:
        meta = {"config_a": cfg_a.embedded(), "config_b": cfg_b.embedded(),
                "inputs_sha256": jsonl.file_sha256(*cfg_a.input_files(), *cfg_b.input_files())}
        _write_text(args.output, "".join(f"# {line}\n" for line in _header_lines(meta)) + text)
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _config(args, skip=("scores",))
    dialogues = load_corpus(cfg)
    vectors = load_scores(args.scores, dialogues)
    ordered = [vectors[d.id] for d in dialogues]
    if any(v.kind is not ScoreKind.LOGIT for v in ordered):
        raise UsageError("calibration needs a logit score file")
    golds = [d.gold for d in dialogues]
    t = fit_temperature(ordered, golds)
    before, after = binary_nll(ordered, golds, 1.0), binary_nll(ordered, golds, t)
    print(f"temperature: {t:.4f}")
    print(f"nll before: {before:.6f}")
    print(f"nll after: {after:.6f}")
    lo, hi = TEMPERATURE_BOUNDS
    if t <= lo * 1.001 or t >= hi * 0.999:
        print(f"warning: temperature hit the search bound [{lo}, {hi}]; "
              "scores may be perfectly separated", file=sys.stderr)
    if cfg.output:
        meta = {"config": cfg.embedded(), "temperature": t,
                "inputs_sha256": jsonl.file_sha256(*cfg.input_files(), args.scores)}
        write_scores(cfg.output, [apply_temperature(v, t) for v in ordered], meta=meta)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="granseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("canonicalize", help="derive gold boundaries and write canonical files")
    p.add_argument("--input", required=True)
    p.add_argument("--rule", required=True, help="segment_id, boundary_marker or label")
    p.add_argument("--unit", default="U", help="U (utterance) or T (speaker turn)")
    p.add_argument("--drop-speaker", action="append", help="remove messages by this speaker label")
    p.add_argument("--output", required=True)
    p.add_argument("--gold-output", help="gold export path (default: <output stem>.gold<suffix>)")
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("evaluate", help="score one method and report W-F1, F1, BOR, purity, coverage")
    _common(p)
    _corpus_args(p)
    _method_args(p)
    S = argparse.SUPPRESS
    p.add_argument("--output-csv", dest="output_csv", default=S)
    p.add_argument("--report", default=S, help="write the text report here too")
    p.add_argument("--boundaries-output", dest="boundaries_output", default=S)
    p.add_argument("--trace-output", dest="trace_output", default=S, help="adaptive threshold trace CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="emit boundaries for a non-semantic baseline")
    _common(p)
    _corpus_args(p)
    p.add_argument("--method", default=S, required=True,
                   choices=["no-boundary", "periodic", "oracle-random", "oracle-periodic"])
    p.add_argument("--period", type=int, default=S)
    p.add_argument("--name", default=S)
    p.add_argument("--output", default=S, help="predicted-boundary file")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="density-quality sweep over the threshold grid")
    _common(p)
    _corpus_args(p)
    _method_args(p, scorer_only=True)
    p.add_argument("--tau-min", dest="tau_min", type=float, default=S)
    p.add_argument("--tau-max", dest="tau_max", type=float, default=S)
    p.add_argument("--tau-step", dest="tau_step", type=float, default=S)
    p.add_argument("--resamples", type=int, default=S, help="bootstrap resamples (0 disables CIs)")
    p.add_argument("--output", default=S)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="paired bootstrap comparison of two method configs")
    _common(p)
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("--resamples", type=int, default=S)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="fit a global temperature to logit scores")
    _common(p)
    _corpus_args(p)
    p.add_argument("--scores", required=True, help="logit score file")
    p.add_argument("--output", default=S, help="calibrated probability score file")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = args.func
    del args.verbose
    try:
        return func(args)
    except (UsageError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except Exception:
        log.exception("internal error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
