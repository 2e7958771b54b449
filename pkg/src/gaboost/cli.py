"""Command-line entry point.

Subcommands::

    vectorize  CSV corpus -> matrix.txt, vocab.tsv, labels.txt
    optimize   genetic search (single run or a sensitivity sweep)
    validate   repeated stratified CV of a best-chromosome file
    compare    Wilcoxon / Kruskal-Wallis tables over per-fold CSVs,
               optional chi-square and PCA comparison arms
    report     descriptive statistics, Ham-positive metrics, feature frequency

Options may also come from a JSON config file (``--config``); explicit flags
win over the file, which wins over built-in defaults. Every random stream is
derived from ``--seed``.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from gaboost import __version__, baselines, corpus, evaluation, ga, stats
from gaboost._seeding import derive_seed

log = logging.getLogger("gaboost")

OUTPUT_ENV = "GABOOST_OUTPUT_DIR"


class CliError(Exception):
    pass


# ----------------------------------------------------------------- helpers

def _ratio(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"ratio must be in (0, 1], got {v}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _int_range(text: str) -> list[int]:
    """``1:20`` (inclusive) or ``1,5,10``."""
    if ":" in text:
        a, b = (int(x) for x in text.split(":"))
        return list(range(a, b + 1))
    return [int(x) for x in text.split(",")]


SWEEP_KEYS = {"crossover": "crossover_ratio", "F": "feature_percent",
              "P": "population_size", "G": "generations"}


def parse_sweep(specs: list[str]) -> list[dict]:
    """``crossover=0.1:1.0:0.1`` or ``F=1,5,10``; several specs form a grid."""
    axes = []
    for spec in specs:
        if "=" not in spec:
            raise CliError(f"bad sweep spec {spec!r}; expected name=start:stop:step or name=a,b,c")
        name, values = spec.split("=", 1)
        if name not in SWEEP_KEYS:
            raise CliError(f"unknown sweep axis {name!r}; choose from {sorted(SWEEP_KEYS)}")
        if ":" in values:
            start, stop, step = (float(x) for x in values.split(":"))
            n = int(round((stop - start) / step)) + 1
            vals = [round(start + i * step, 10) for i in range(n)]
        else:
            vals = [float(x) for x in values.split(",")]
        if name in ("P", "G"):
            vals = [int(v) for v in vals]
        axes.append([(SWEEP_KEYS[name], v) for v in vals])
    return [dict(combo) for combo in itertools.product(*axes)]


def _load_dataset(args) -> corpus.LabeledDataset:
    if getattr(args, "data", None):
        return corpus.load_saved_dataset(args.data, args.positive)
    if not getattr(args, "csv", None):
        raise CliError("a dataset is required: pass --csv FILE or --data DIR")
    classes = tuple(c.strip() for c in args.classes.split(","))
    if len(classes) != 2:
        raise CliError(f"--classes needs exactly two names, got {args.classes!r}")
    if args.positive not in classes:
        raise CliError(f"--positive {args.positive!r} is not one of {list(classes)}")
    return corpus.load_dataset(args.csv, args.text_col, args.label_col, classes,
                               args.positive, args.encoding)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sidecar(out: Path, command: str, **info) -> None:
    # timestamps and timings live only here, never in the artifacts
    with open(out / "run.log", "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"time": time.strftime("%Y-%m-%dT%H:%M:%S"),
                             "command": command, **info}, default=str) + "\n")


class _CurveWriter:
    """Writes fitness-curve rows as generations finish, flushing each one."""

    def __init__(self, path: Path, with_id: bool = False):
        self.fh = open(path, "w", encoding="utf-8", newline="")
        self.with_id = with_id
        self.fh.write(("experiment_id," if with_id else "")
                      + "generation,best_fitness,mean_fitness\n")
        self.fh.flush()

    def __call__(self, s: ga.GenerationStats, eid: str | None = None) -> None:
        prefix = f"{eid}," if self.with_id else ""
        self.fh.write(f"{prefix}{s.generation},{s.best_fitness:.10f},{s.mean_fitness:.10f}\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


# --------------------------------------------------------------- commands

def cmd_vectorize(args) -> int:
    ds = _load_dataset(args)
    out = _out_dir(args)
    corpus.save_dataset(ds, out)
    print(f"rows={ds.n_rows} features={ds.n_features} positive={100 * ds.positive_rate():.1f}%")
    _sidecar(out, "vectorize", rows=ds.n_rows, features=ds.n_features,
             idf="ln((1+N)/(1+df))+1", row_norm="l2")
    return 0


def _ga_config(args, **overrides) -> ga.GaConfig:
    kw = dict(feature_percent=args.F, population_size=args.P, generations=args.G,
              crossover_count=args.C, crossover_ratio=args.crossover_ratio,
              master_seed=derive_seed(args.seed, "optimize"), split_fraction=args.split,
              threads=args.threads)
    kw.update(overrides)
    if "crossover_ratio" in overrides:
        kw["crossover_count"] = None
    try:
        return ga.GaConfig(**kw)
    except ga.GaError as exc:
        raise CliError(str(exc)) from exc


def cmd_optimize(args) -> int:
    ds = _load_dataset(args)
    out = _out_dir(args)
    if args.sweep:
        grid = [_ga_config(args, **point) for point in parse_sweep(args.sweep)]
        writer = _CurveWriter(out / "sweep_curves.csv", with_id=True)
        try:
            records = ga.sensitivity_sweep(ds.matrix, ds.labels, grid,
                                           on_generation=lambda c, s: writer(s, c.experiment_id))
        finally:
            writer.close()
        ga.write_experiment_table(records, out / "sweep_experiments.csv")
        for r in records:
            line = "NA" if r.error else f"{r.best_fitness:.4f}"
            print(f"{r.experiment_id}, {line}")
        _sidecar(out, "optimize-sweep", runs=[(r.experiment_id, r.wall_clock) for r in records])
        return 0 if all(r.error is None for r in records) else 1

    cfg = _ga_config(args)
    eid = cfg.experiment_id
    writer = _CurveWriter(out / f"{eid}_curve.csv")
    try:
        record = ga.run(ds.matrix, ds.labels, cfg, on_generation=writer)
    finally:
        writer.close()
    ga.write_best(record, out / f"{eid}_best.json", ds.vocabulary)
    ga.write_experiment_table([record], out / f"{eid}_experiment.csv")
    print(f"{eid}, {record.best_fitness:.4f} ({len(record.best.feature_genes)} features, "
          f"best at generation {record.best_generation})")
    _sidecar(out, "optimize", experiment_id=eid, wall_clock=record.wall_clock,
             evaluations=record.evaluations)
    return 0


def cmd_validate(args) -> int:
    ds = _load_dataset(args)
    out = _out_dir(args)
    chrom, doc = ga.read_best(args.chromosome)
    if any(not 0 <= f < ds.n_features for f in chrom.feature_genes):
        raise CliError(f"{args.chromosome}: feature index out of range for a matrix "
                       f"with {ds.n_features} columns")
    name = args.name or doc.get("experiment_id", Path(args.chromosome).stem)
    t0 = time.perf_counter()
    summary = evaluation.repeated_cv(ds.matrix, ds.labels, chrom.booster_params(),
                                     chrom.feature_genes, args.repeats, args.folds,
                                     derive_seed(args.seed, "validate"), args.threads)
    summary.write_folds(out / f"{name}_folds.csv")
    summary.write_summary(out / f"{name}_summary.csv")
    g = summary.stats["gmean"]
    print(f"{name}: {len(summary.records)} folds, GMean avg {100 * g['avg']:.2f} "
          f"(SD {g['sd']:.3f}, min {100 * g['min']:.2f}, max {100 * g['max']:.2f})")
    if summary.flagged:
        print(f"warning: {len(summary.flagged)} fold(s) had undefined ratios set to 0",
              file=sys.stderr)
    _sidecar(out, "validate", name=name, seconds=time.perf_counter() - t0)
    return 0


def _fold_samples(paths, names, metric):
    if names and len(names) != len(paths):
        raise CliError("--names must match --runs one to one")
    samples, keys = {}, None
    for i, p in enumerate(paths):
        rows = evaluation.read_fold_csv(p)
        if metric not in (rows[0] if rows else {}):
            raise CliError(f"{p}: no column {metric!r}")
        these = [(r["repeat"], r["fold"]) for r in rows]
        if keys is None:
            keys = these
        elif these != keys:
            raise CliError(f"{p}: folds do not pair up with {paths[0]} "
                           f"({len(these)} vs {len(keys)} records)")
        name = names[i] if names else Path(p).stem.removesuffix("_folds")
        samples[name] = [r[metric] for r in rows]
    return samples


def cmd_compare(args) -> int:
    out = _out_dir(args)
    runs = list(args.runs or [])
    if args.chi2_k or args.pca_k:
        ds = _load_dataset(args)
        cv_seed = derive_seed(args.seed, "validate")
        if args.chi2_k:
            scores = baselines.chi2_scores(ds.matrix, ds.labels)
            feats = baselines.chi2_select(scores, args.chi2_k)
            baselines.write_chi2_dump(scores, ds.vocabulary, out / "chi2_features.tsv", feats)
            summary = evaluation.repeated_cv(ds.matrix, ds.labels, baselines.DEFAULT_PARAMS,
                                             np.sort(feats), args.repeats, args.folds,
                                             cv_seed, args.threads)
            summary.write_folds(out / "chi2_folds.csv")
            summary.write_summary(out / "chi2_summary.csv")
            runs.append(str(out / "chi2_folds.csv"))
            if args.names:
                args.names.append("chi2")
            print(f"chi2 top-{args.chi2_k}: GMean avg {100 * summary.stats['gmean']['avg']:.2f}")
        if args.pca_k:
            rows = baselines.pca_sweep(ds.matrix, ds.labels, args.pca_k, args.repeats,
                                       args.folds, cv_seed, threads=args.threads)
            baselines.write_pca_table(rows, out / "pca.csv")
            for k, m, sd in rows:
                print(f"{k}, {100 * m:.2f}, {sd:.3f}")
    if len(runs) < 2:
        if args.chi2_k or args.pca_k:
            return 0
        raise CliError("compare needs at least two per-fold CSVs (--runs)")
    samples = _fold_samples(runs, args.names, args.metric)
    stats.write_wilcoxon_matrix(samples, out / "wilcoxon.csv")
    pv = stats.pairwise_wilcoxon(samples)
    for (a, b), p in pv.items():
        print(f"wilcoxon {a} vs {b}: {stats.format_p(p)}")
    if len(samples) >= 3:
        combos = stats.kruskal_combinations(samples)
        stats.write_kruskal_table(combos, out / "kruskal.csv", args.top)
    return 0


def cmd_report(args) -> int:
    out = _out_dir(args)
    wrote = False
    if args.runs:
        names = args.names or [Path(p).stem.removesuffix("_folds") for p in args.runs]
        with open(out / "describe.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("run,mean,sd,min,q25,median,q75,max\n")
            for name, p in zip(names, args.runs):
                vals = [r[args.metric] for r in evaluation.read_fold_csv(p)]
                d = evaluation.describe(vals)
                fh.write(f"{name},{100 * d['mean']:.2f},{d['sd']:.3f},{100 * d['min']:.2f},"
                         f"{100 * d['q25']:.2f},{100 * d['median']:.2f},{100 * d['q75']:.2f},"
                         f"{100 * d['max']:.2f}\n")
        with open(out / "ham_positive.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("run,stat,precision,recall,accuracy,f1\n")
            for name, p in zip(names, args.runs):
                rows = evaluation.read_fold_csv(p)
                sw = [evaluation.swapped_from_report(_report_from_row(r)) for r in rows]
                for stat_name, fn in (("avg", np.mean), ("min", np.min), ("max", np.max),
                                      ("sd", np.std)):
                    vals = [fn([s[m] for s in sw]) for m in ("precision", "recall", "accuracy", "f1")]
                    fmt = (lambda v: f"{v:.3f}") if stat_name == "sd" else (lambda v: f"{100 * v:.2f}")
                    fh.write(",".join([name, stat_name] + [fmt(v) for v in vals]) + "\n")
        wrote = True
    if args.chromosomes:
        records = []
        vocab_terms: dict[int, str] = {}
        for p in args.chromosomes:
            chrom, doc = ga.read_best(p)
            vocab_terms.update(zip(doc.get("features", []), doc.get("terms", [])))
            cfg = doc.get("config", {})
            rec = ga.ExperimentRecord(doc.get("experiment_id", Path(p).stem), None, [], chrom,
                                      float(doc.get("fitness", 0.0)), -1,
                                      int(cfg.get("master_seed", 0)))
            records.append(rec)
        vocab = _TermLookup(vocab_terms)
        rows = ga.feature_frequency(records, vocab)
        ga.write_frequency_table(rows, records, out / "feature_frequency.csv")
        wrote = True
    if not wrote:
        raise CliError("report needs --runs and/or --chromosomes")
    return 0


class _TermLookup:
    def __init__(self, terms: dict[int, str]):
        self.terms = terms

    def term(self, i: int) -> str:
        return self.terms.get(i, str(i))


def _report_from_row(r: dict) -> evaluation.MetricsReport:
    return evaluation.MetricsReport(**{m: r[m] for m in evaluation.METRIC_NAMES})


# ------------------------------------------------------------------ parser

def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("dataset")
    g.add_argument("--csv", help="labelled text CSV with a header row")
    g.add_argument("--data", help="directory written by `vectorize` (instead of --csv)")
    g.add_argument("--text-col", default="text")
    g.add_argument("--label-col", default="label")
    g.add_argument("--classes", default="Ham,Spam", help="the two class names")
    g.add_argument("--positive", default="Spam", help="class encoded as 1")
    g.add_argument("--encoding", default="utf-8", choices=["utf-8", "iso-8859-1", "latin-1"])


def _add_cv_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--repeats", type=_positive_int, default=50)
    p.add_argument("--folds", type=_positive_int, default=10)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults")
    common.add_argument("--seed", type=int, default=723)
    common.add_argument("--threads", type=_positive_int, default=1)
    common.add_argument("--out", default=os.environ.get(OUTPUT_ENV, "out"),
                        help=f"output directory (default ${OUTPUT_ENV} or ./out)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gaboost", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vectorize", parents=[common], help="build the TF-IDF matrix")
    _add_dataset_args(p)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("optimize", parents=[common], help="run the genetic search")
    _add_dataset_args(p)
    p.add_argument("--F", type=float, default=10.0, help="percent of features per chromosome")
    p.add_argument("--P", type=_positive_int, default=400, help="population size")
    p.add_argument("--C", type=_positive_int, default=None,
                   help="parents kept for crossover (overrides --crossover-ratio)")
    p.add_argument("--crossover-ratio", type=_ratio, default=0.6)
    p.add_argument("--G", type=_positive_int, default=50, help="generations")
    p.add_argument("--split", type=float, default=0.30, help="held-out share for fitness")
    p.add_argument("--sweep", action="append",
                   help="sweep axis, e.g. crossover=0.1:1.0:0.1 (repeatable)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("validate", parents=[common], help="repeated stratified CV")
    _add_dataset_args(p)
    _add_cv_args(p)
    p.add_argument("--chromosome", required=True, help="best-chromosome JSON from optimize")
    p.add_argument("--name", help="prefix of the output files")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compare", parents=[common], help="significance tests and baselines")
    _add_dataset_args(p)
    _add_cv_args(p)
    p.add_argument("--runs", nargs="+", help="per-fold CSVs to compare")
    p.add_argument("--names", nargs="+", help="display names for --runs")
    p.add_argument("--metric", default="gmean", choices=list(evaluation.METRIC_NAMES))
    p.add_argument("--top", type=_positive_int, help="keep only the top Kruskal combinations")
    p.add_argument("--chi2-k", type=_positive_int, help="add a chi-square top-k arm")
    p.add_argument("--pca-k", type=_int_range, help="PCA sweep, e.g. 1:20")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", parents=[common], help="summary tables")
    p.add_argument("--runs", nargs="+", help="per-fold CSVs")
    p.add_argument("--names", nargs="+")
    p.add_argument("--metric", default="gmean", choices=list(evaluation.METRIC_NAMES))
    p.add_argument("--chromosomes", nargs="+", help="best-chromosome JSON files")
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    with open(known.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise CliError(f"{known.config}: expected a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        for sp in action.choices.values():
            sp.set_defaults(**cfg)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
    except (OSError, ValueError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("interrupted; partial outputs were flushed", file=sys.stderr)
        return 130
    except (CliError, corpus.CorpusError, ga.GaError, evaluation.EvaluationError,
            baselines.BaselineError, stats.StatsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
