"""Command line interface: annotate, playout, evaluate, experiment, lang, check.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 solver/enumeration cap reached.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .errors import ConfigError, EMDCapExceeded, EmptyLogError, LanguageTooLarge, ReconError
from .logio import EventLog, length_histogram, load_log, write_log
from .metrics import DEFAULT_EMD_CAP, METRIC_KEYS, EvaluationReport, evaluate
from .playout import Strategy, StrategyConfig, run_experiment
from .ptree import ProcessTree, enumerate_language, load_tree, save_tree
from .replay import annotate, verify_annotation

log = logging.getLogger("ptrecon")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CAP = 0, 1, 2, 3

TABLE_COLUMNS = ("strategy", "kind", "variance", "playouts") + METRIC_KEYS

DEFAULT_STRATEGIES = (("A", None), ("B", None), ("C", None), ("D", 0.5), ("D", 1.0),
                      ("D", 3.0), ("D", 5.0), ("SOTA", None))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# experiment specification


@dataclass
class ExperimentSpec:
    tree: Path
    log: Path
    strategies: list[StrategyConfig]
    out: Path
    playouts: int = 100
    seed: int = 0
    log_format: str | None = None
    annotate: bool = True
    emd_cap: int | None = DEFAULT_EMD_CAP
    ef_strict: bool = False
    ef_absent: str = "never"
    names: list[str] = field(default_factory=list)


def _strategy(kind: str, variance, traces, seed: int, playouts: int) -> StrategyConfig:
    return StrategyConfig(kind, variance=variance,
                          trace_count=traces if kind in ("A", "B") else None,
                          seed=seed, playouts=playouts)


def load_spec(path) -> ExperimentSpec:
    """Read an INI experiment file. Relative paths resolve against its folder.

    Strategies A and B default to as many traces as the original log has.
    """
    path = Path(path)
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read experiment file {path}")
    if "experiment" not in parser:
        raise ConfigError("missing [experiment] section")
    exp = parser["experiment"]
    base = path.parent
    try:
        tree = base / exp["tree"]
        log_path = base / exp["log"]
    except KeyError as exc:
        raise ConfigError(f"[experiment] lacks key {exc}") from None
    try:
        playouts = exp.getint("playouts", 100)
        seed = exp.getint("seed", 0)
        cap_text = exp.get("emd_cap", str(DEFAULT_EMD_CAP)).strip().lower()
        emd_cap = None if cap_text in ("none", "off") else int(cap_text)
        do_annotate = exp.getboolean("annotate", True)
        strict = exp.getboolean("ef_strict", False)
    except ValueError as exc:
        raise ConfigError(f"[experiment]: {exc}") from None
    spec = ExperimentSpec(
        tree=tree, log=log_path, strategies=[], out=base / exp.get("out", "results"),
        playouts=playouts, seed=seed, log_format=exp.get("log_format"),
        annotate=do_annotate, emd_cap=emd_cap, ef_strict=strict,
        ef_absent=exp.get("ef_absent", "never"),
    )

    log_size = None

    def default_traces() -> int:
        nonlocal log_size
        if log_size is None:
            log_size = len(load_log(spec.log, spec.log_format))
        return log_size

    sections = [s for s in parser.sections() if s.startswith("strategy")]
    if sections:
        for name in sections:
            sec = parser[name]
            kind = sec.get("kind", "").strip().upper()
            try:
                variance = sec.getfloat("variance")
                traces = sec.getint("traces")
            except ValueError as exc:
                raise ConfigError(f"[{name}]: {exc}") from None
            if traces is None and kind in ("A", "B"):
                traces = default_traces()
            config = _strategy(kind, variance, traces, seed, playouts)
            spec.strategies.append(config)
            spec.names.append(name[len("strategy"):].strip() or config.name)
    else:
        for kind, variance in DEFAULT_STRATEGIES:
            traces = default_traces() if kind in ("A", "B") else None
            config = _strategy(kind, variance, traces, seed, playouts)
            spec.strategies.append(config)
            spec.names.append(config.name)
    return spec


PlayoutFn = Callable[[ProcessTree, StrategyConfig], list[EventLog]]


def _play_and_score(args) -> tuple[EvaluationReport, Counter]:
    tree, config, original, alphabet, spec_opts, playout_fn = args
    logs = (playout_fn or run_experiment)(tree, config)
    report = evaluate(original, logs, alphabet, **spec_opts)
    pooled: Counter = Counter()
    for lg in logs:
        if lg:
            pooled.update(length_histogram(lg))
    return report, pooled


def run_spec(spec: ExperimentSpec, playout_fn: PlayoutFn | None = None,
             jobs: int = 1) -> dict:
    """Annotate, play out and evaluate every strategy; write all result files.

    ``playout_fn`` replaces :func:`run_experiment`, e.g. to inject known logs.
    """
    if not spec.strategies:
        raise ConfigError("no strategies configured")
    tree = load_tree(spec.tree)
    original = load_log(spec.log, spec.log_format)
    if spec.annotate:
        tree = annotate(tree, original)
    for config in spec.strategies:
        if config.needs_annotation and not tree.is_annotated:
            raise ConfigError(f"strategy {config.name} needs an annotated tree "
                              "(set annotate = yes or supply weights)")
    alphabet = tree.labels() | original.alphabet
    opts = dict(emd_cap=spec.emd_cap, strict=spec.ef_strict, absent=spec.ef_absent)
    tasks = [(tree, c, original, alphabet, opts, playout_fn) for c in spec.strategies]
    if jobs > 1 and playout_fn is None:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_play_and_score, tasks))
    else:
        results = [_play_and_score(t) for t in tasks]

    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    if tree.is_annotated:
        save_tree(tree, out / "annotated.tree")
    original_hist = length_histogram(original)
    rows, report_json = [], {}
    hist_dir = out / "histograms"
    hist_dir.mkdir(exist_ok=True)
    for name, config, (report, pooled) in zip(spec.names, spec.strategies, results):
        rows.append(_table_row(name, config, report))
        report_json[name] = {
            "kind": config.kind.value, "variance": config.variance,
            "playouts": config.playouts, "seed": config.seed,
            "emd_computed": report.emd_computed,
            "means": report.means, "per_playout": report.per_playout,
        }
        write_histogram(hist_dir / f"{_safe(name)}.csv", original_hist, pooled, config.playouts)
    write_table(out / "table.csv", rows)
    (out / "report.json").write_text(json.dumps(report_json, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return report_json


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _table_row(name: str, config: StrategyConfig, report: EvaluationReport) -> dict:
    row = {"strategy": name, "kind": config.kind.value,
           "variance": config.variance, "playouts": len(report.per_playout)}
    row.update(report.means)
    return row


def write_table(path, rows: Sequence[dict]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in TABLE_COLUMNS])


def write_histogram(path, original: Counter, pooled: Counter, playouts: int):
    lengths = sorted(set(original) | set(pooled))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("length", "original", "playout_total", "playout_mean"))
        for n in lengths:
            writer.writerow((n, original.get(n, 0), pooled.get(n, 0),
                             _fmt(pooled.get(n, 0) / playouts)))


# --------------------------------------------------------------------------
# subcommands


def cmd_annotate(args) -> int:
    tree = load_tree(args.tree)
    try:
        original = load_log(args.log, args.log_format)
    except EmptyLogError:
        original = EventLog()
    annotated = annotate(tree, original)
    if not original:
        log.warning("empty log: all weights are zero")
    problems = verify_annotation(annotated, len(original))
    for p in problems:
        log.warning("annotation check: %s", p)
    save_tree(annotated, args.out)
    return EXIT_OK


def cmd_playout(args) -> int:
    tree = load_tree(args.tree)
    config = StrategyConfig(args.strategy, variance=args.variance, trace_count=args.traces,
                            seed=args.seed, playouts=args.playouts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = len(str(config.playouts - 1))
    for i, lg in enumerate(run_experiment(tree, config)):
        write_log(lg, out / f"playout_{i:0{width}d}.variants")
    return EXIT_OK


def _collect_logs(paths: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(f for f in p.iterdir() if f.is_file()))
        else:
            files.append(p)
    return files


def cmd_evaluate(args) -> int:
    original = load_log(args.original, args.log_format)
    logs = [load_log(p) for p in _collect_logs(args.playouts)]
    if not logs:
        raise ConfigError("no play-out logs given")
    alphabet = set(original.alphabet).union(*(lg.alphabet for lg in logs))
    if args.tree:
        alphabet |= load_tree(args.tree).labels()
    report = evaluate(original, logs, alphabet, emd_cap=args.emd_cap,
                      strict=args.ef_strict, absent=args.ef_absent)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    row = {"strategy": args.name, "kind": args.name, "variance": None,
           "playouts": len(logs), **report.means}
    write_table(out / "table.csv", [row])
    pooled: Counter = Counter()
    for lg in logs:
        if lg:
            pooled.update(length_histogram(lg))
    write_histogram(out / "histogram.csv", length_histogram(original), pooled, len(logs))
    payload = {"emd_computed": report.emd_computed, "means": report.means,
               "per_playout": report.per_playout}
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return EXIT_OK if report.emd_computed else EXIT_CAP


def cmd_experiment(args) -> int:
    spec = load_spec(args.spec)
    if args.emd_cap is not None:
        spec.emd_cap = args.emd_cap
    if args.out:
        spec.out = Path(args.out)
    report = run_spec(spec, jobs=args.jobs)
    with open(Path(spec.out) / "table.csv", encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    capped = any(not r["emd_computed"] for r in report.values())
    return EXIT_CAP if capped else EXIT_OK


def cmd_lang(args) -> int:
    tree = load_tree(args.tree)
    for trace in sorted(enumerate_language(tree, args.unrolls, cap=args.cap),
                        key=lambda t: (len(t), t)):
        print(",".join(trace))
    return EXIT_OK


def cmd_check(args) -> int:
    tree = load_tree(args.tree)
    problems = verify_annotation(tree, args.log_size)
    for p in problems:
        print(p)
    if not problems:
        print("ok")
    return EXIT_DATA if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ptrecon", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("annotate", help="weight a tree by replaying a log")
    p.add_argument("--tree", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--log-format", choices=("csv", "variants"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("playout", help="generate logs with one strategy")
    p.add_argument("--tree", required=True)
    p.add_argument("--strategy", required=True, choices=[s.value for s in Strategy])
    p.add_argument("--variance", type=float)
    p.add_argument("--traces", type=int)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--playouts", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_playout)

    p = sub.add_parser("evaluate", help="score play-out logs against the original")
    p.add_argument("--original", required=True)
    p.add_argument("--log-format", choices=("csv", "variants"))
    p.add_argument("--playouts", required=True, nargs="+",
                   help="variants files or directories of them")
    p.add_argument("--tree", help="tree whose labels complete the activity alphabet")
    p.add_argument("--name", default="playout")
    p.add_argument("--out", required=True)
    _metric_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run the full annotate/playout/evaluate pipeline")
    p.add_argument("spec")
    p.add_argument("--out")
    p.add_argument("--emd-cap", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("lang", help="enumerate the language with bounded loop unrolling")
    p.add_argument("--tree", required=True)
    p.add_argument("--unrolls", type=int, default=1)
    p.add_argument("--cap", type=int, default=100_000)
    p.set_defaults(func=cmd_lang)

    p = sub.add_parser("check", help="verify the consistency of an annotated tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--log-size", type=int)
    p.set_defaults(func=cmd_check)
    return parser


def _metric_options(p):
    p.add_argument("--emd-cap", type=int, default=DEFAULT_EMD_CAP)
    p.add_argument("--ef-strict", action="store_true",
                   help="'always follows' must hold in every trace, not only those containing a")
    p.add_argument("--ef-absent", choices=("never", "exclude"), default="never")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EMDCapExceeded, LanguageTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ReconError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
