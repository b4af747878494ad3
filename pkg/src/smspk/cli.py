"""Command-line entry point (``smspk``).

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 no pathway passed the screen.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import cohort as cohort_io
from .clustering import kernel_kmeans, read_assignment, write_assignment
from .errors import ConfigError, DataError, NoPathwayPassedError, SmspkError
from .graph import all_shortest_paths
from .kernel import cosine_normalize, pathway_kernel, read_kernel, write_kernel
from .pathway_io import load_pathway_set, read_pathway, write_pathway
from .pipeline import Cohort, injected_signal_cohort, load_config, sweep
from .smoothing import SmoothingConfig
from .survival import km_curves, logrank_test, write_km_csv
from .synthetic import benchmark_pathway, run_simulation_grid, write_grid

logger = logging.getLogger("smspk")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NO_PASS = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _load_cohort(args, impacts):
    pathways = load_pathway_set(args.pathways)
    if not pathways:
        raise DataError(f"no usable pathway files in {args.pathways}")
    catalog = cohort_io.load_mutations(_read_text(args.mutations), impacts)
    clinical = cohort_io.load_clinical(_read_text(args.clinical))
    return Cohort.build(pathways, catalog, clinical)


def cmd_parse(args):
    graphs = load_pathway_set(args.pathways)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for g in graphs:
        write_pathway(g, out / f"{g.id}.pathway")
        print(f"{g.id}\t{g.n_genes} genes\t{len(g.edges())} edges")
    return EXIT_OK


def cmd_kernel(args):
    graphs = load_pathway_set(args.pathways)
    catalog = cohort_io.load_mutations(_read_text(args.mutations))
    if args.clinical:
        catalog, _ = cohort_io.align_cohort(catalog, cohort_io.load_clinical(_read_text(args.clinical)))
    cfg = SmoothingConfig(alpha=args.alpha, normalization=args.normalization)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for g in graphs:
        K = pathway_kernel(g, cohort_io.label_matrix(catalog, g), cfg, catalog.patients, all_shortest_paths(g))
        if args.normalize:
            K = cosine_normalize(K)
        write_kernel(K, out / f"{g.id}.tsv")
        flag = "\tdegenerate" if K.degenerate else ""
        print(f"{g.id}\t{len(K)} patients{flag}")
    return EXIT_OK


def cmd_cluster(args):
    K = read_kernel(args.kernel)
    a = kernel_kmeans(K, args.k, restarts=args.restarts, seed=args.seed)
    write_assignment(a, args.out)
    print(f"objective\t{a.objective:.10g}")
    print(f"sizes\t{','.join(map(str, a.sizes()))}")
    return EXIT_OK


def cmd_survival(args):
    table = cohort_io.load_clinical(_read_text(args.clinical))
    a = read_assignment(args.clusters)
    result = logrank_test(table, a)
    if args.km_out:
        write_km_csv(km_curves(table, a), args.km_out)
    print(f"statistic\t{result.statistic:.10g}")
    print(f"df\t{result.degrees_of_freedom}")
    print(f"p_value\t{result.p_value:.10g}")
    return EXIT_OK


def cmd_pipeline(args):
    cfg = load_config(
        args.config,
        k_values=args.k, alpha_values=args.alpha, p_thresholds=args.p_threshold,
        seed=args.seed, restarts=args.restarts, bonferroni=True if args.bonferroni else None,
    )
    data = _load_cohort(args, cfg.impacts)
    report = sweep(cfg, data, args.out)
    sys.stdout.write(report.to_tsv())
    if not any(c.ok for c in report.cells):
        raise NoPathwayPassedError(report)
    return EXIT_OK


def cmd_simulate(args):
    g = read_pathway(args.pathway) if args.pathway else benchmark_pathway()
    rows = run_simulation_grid(
        g, args.p_in, args.p_out, args.alpha, repetitions=args.reps, seed=args.seed,
        groups=args.groups, patients_per_group=args.patients_per_group,
        restarts=args.restarts, n_jobs=args.jobs, normalize=not args.raw_kernel,
    )
    write_grid(rows, args.out)
    for r in rows:
        print(r.csv_line())
    return EXIT_OK


def cmd_make_demo(args):
    inj = injected_signal_cohort(args.seed, n_patients=args.patients)
    out = Path(args.out)
    (out / "pathways").mkdir(parents=True, exist_ok=True)
    for g in inj.cohort.pathways:
        write_pathway(g, out / "pathways" / f"{g.id}.pathway")
    (out / "mutations.tsv").write_text(cohort_io.format_mutations(inj.cohort.catalog))
    (out / "clinical.tsv").write_text(cohort_io.format_clinical(inj.cohort.clinical))
    truth = ["patient\tgroup"] + [f"{p}\t{inj.true_group[p]}" for p in inj.cohort.patients]
    (out / "truth.tsv").write_text("\n".join(truth) + "\n")
    print(f"wrote {len(inj.cohort.pathways)} pathways and {len(inj.cohort.patients)} patients to {out}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="smspk", description="Smoothed shortest path kernel patient stratification")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("parse", help="validate and normalise pathway files")
    s.add_argument("--pathways", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("kernel", help="per-pathway smSPK kernel matrices")
    s.add_argument("--pathways", required=True)
    s.add_argument("--mutations", required=True)
    s.add_argument("--clinical", help="restrict/extend the cohort to these patients")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--normalization", default="symmetric", choices=("symmetric", "random_walk"))
    s.add_argument("--normalize", action="store_true", help="cosine-normalise each kernel")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("cluster", help="kernel k-means on a kernel TSV")
    s.add_argument("--kernel", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--restarts", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("survival", help="log-rank test and KM curves for a clustering")
    s.add_argument("--clinical", required=True)
    s.add_argument("--clusters", required=True)
    s.add_argument("--km-out")
    s.set_defaults(func=cmd_survival)

    s = sub.add_parser("pipeline", help="screen, combine, cluster and sweep")
    s.add_argument("--pathways", required=True)
    s.add_argument("--mutations", required=True)
    s.add_argument("--clinical", required=True)
    s.add_argument("--config")
    s.add_argument("--k", type=_ints)
    s.add_argument("--alpha", type=_floats)
    s.add_argument("--p-threshold", type=_floats)
    s.add_argument("--seed", type=int)
    s.add_argument("--restarts", type=int)
    s.add_argument("--bonferroni", action="store_true", help="also report Bonferroni-adjusted screen p-values")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("simulate", help="synthetic accuracy grid")
    s.add_argument("--pathway", help="pathway file (default: bundled 45-gene benchmark)")
    s.add_argument("--p-in", type=_floats, required=True)
    s.add_argument("--p-out", type=_floats, required=True)
    s.add_argument("--alpha", type=_floats, required=True)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--groups", type=int, default=3)
    s.add_argument("--patients-per-group", type=int, default=200)
    s.add_argument("--restarts", type=int, default=100)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--raw-kernel", action="store_true", help="skip cosine normalisation")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("make-demo", help="write an injected-signal example cohort")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--patients", type=int, default=120)
    s.set_defaults(func=cmd_make_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NoPathwayPassedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_PASS
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SmspkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
