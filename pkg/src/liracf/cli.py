"""Command-line front end: evaluation grids, synthetic experiments, pair scores.

Subcommands: ``eval`` (MAE/RMSE grid over scores and k on MovieLens-style
splits), ``resolution`` (synthetic two-cluster resolution grid and
inter-cluster curve), ``sim`` (score one user pair, from a file or inline
vectors), and ``gen`` (write a synthetic dataset to disk).  Data goes to
stdout or --out files; progress and notices go to stderr.  Exit codes:
0 success, 1 usage or domain error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError
from .evaluation import (
    EvalSplit,
    MOVIELENS_SPLIT_NAMES,
    evaluate_grid,
    grid_to_csv,
    movielens_splits,
)
from .ratings import FORMATS, RatingMatrix, diff_histogram, parse_ratings, parse_ratings_pair
from .similarity import SCORE_NAMES, score_pair
from .synthetic import (
    ClusterParams,
    DEFAULT_M,
    DEFAULT_MISSING_RATES,
    DEFAULT_N_VALUES,
    DEFAULT_SEED_COUNT,
    EXPERIMENT_SCORES,
    apply_missing,
    generate_clusters,
    inter_cluster_curve,
    inter_curve_to_csv,
    resolution_grid,
    resolution_to_csv,
)

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2

DEFAULT_K_GRID = (5, 10, 20, 40, 80, 160)


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors on exit code 1 (2 is reserved for I/O)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _score_list(text: str) -> list[str]:
    names = [part.strip() for part in text.split(",") if part.strip()]
    for name in names:
        if name not in SCORE_NAMES:
            raise argparse.ArgumentTypeError(
                f"unknown score {name!r}; choose from {', '.join(SCORE_NAMES)}")
    if not names:
        raise argparse.ArgumentTypeError("score list is empty")
    return names


def _name_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_shared(sub: argparse.ArgumentParser, *, out_required: bool = False,
                out_help: str = "write output here instead of stdout") -> None:
    sub.add_argument("--seed", type=int, default=None,
                     help="base random seed (default 0, announced on stderr)")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker count for parallel sections (joblib semantics; default 1)")
    sub.add_argument("--scale-d", type=int, default=5, dest="scale_d",
                     help="number of rating values, scale is 1..d (default 5)")
    sub.add_argument("--out", type=Path, default=None, required=out_required,
                     help=out_help)


def _resolve_seed(args) -> int:
    if args.seed is None:
        print("seed: 0 (default; pass --seed to change)", file=sys.stderr)
        return 0
    return args.seed


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(text: str, out: Path | None, label: str) -> None:
    """Write a fully built output in one shot; stdout when no path given."""
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")
        print(f"wrote {label} to {out}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="liracf",
                     description="Likelihood-ratio similarity and kNN rating "
                                 "prediction experiments")
    subs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p_eval = subs.add_parser(
        "eval", help="MAE/RMSE grid over similarity scores and k",
        description="Evaluate kNN prediction error per (split, score, k) and "
                    "emit one CSV row per cell.")
    p_eval.add_argument("--train", type=Path, help="training ratings file")
    p_eval.add_argument("--test", type=Path, help="test ratings file")
    p_eval.add_argument("--data", type=Path,
                        help="MovieLens 100K directory (u1..u5 base/test pairs, "
                             "or u.data for seeded random splits)")
    p_eval.add_argument("--splits", type=_name_list,
                        default=list(MOVIELENS_SPLIT_NAMES),
                        help="split names under --data (default u1,u2,u3,u4,u5)")
    p_eval.add_argument("--format", choices=sorted(FORMATS), default="tab",
                        help="ratings line format (default tab)")
    p_eval.add_argument("--scores", type=_score_list,
                        default=list(EXPERIMENT_SCORES),
                        help="comma-separated scores (default lira,pearson,cosine,bcf)")
    p_eval.add_argument("--k", type=_int_list, default=list(DEFAULT_K_GRID),
                        help="comma-separated neighborhood sizes "
                             "(default 5,10,20,40,80,160)")
    _add_shared(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_res = subs.add_parser(
        "resolution", help="synthetic two-cluster resolution experiment",
        description="Generate two-cluster data over an (n, missing-rate, seed) "
                    "grid, score the cluster resolution of each similarity "
                    "score, and emit the grid CSV plus the fixed-n "
                    "inter-cluster curve CSV.")
    p_res.add_argument("--m", type=int, default=DEFAULT_M,
                       help="users per dataset (default 40)")
    p_res.add_argument("--n", type=_int_list, default=list(DEFAULT_N_VALUES),
                       help="comma-separated item counts (default 5,10,20,40,80)")
    p_res.add_argument("--missing", type=_float_list,
                       default=list(DEFAULT_MISSING_RATES),
                       help="comma-separated missing rates "
                            "(default 0.1,...,0.9,0.95)")
    p_res.add_argument("--scores", type=_score_list,
                       default=list(EXPERIMENT_SCORES),
                       help="comma-separated scores (default lira,pearson,cosine,bcf)")
    p_res.add_argument("--seeds", type=int, default=DEFAULT_SEED_COUNT,
                       help="number of seeds per cell, values seed..seed+count-1 "
                            "(default 20)")
    p_res.add_argument("--clusters", type=int, default=2,
                       help="number of user clusters (default 2)")
    p_res.add_argument("--curve-n", type=int, default=80, dest="curve_n",
                       help="item count for the inter-cluster curve (default 80)")
    p_res.add_argument("--curve-out", type=Path, default=None, dest="curve_out",
                       help="write the inter-cluster curve CSV here (default: "
                            "derived from --out, or stdout after the grid)")
    _add_shared(p_res)
    p_res.set_defaults(func=cmd_resolution)

    p_sim = subs.add_parser(
        "sim", help="score one user pair",
        description="Print each requested similarity score for a user pair, "
                    "plus their rating-difference histogram.  The pair comes "
                    "from a ratings file (--train with --users) or from two "
                    "inline vectors like 1,1,-,-,-,2 where - marks a missing "
                    "rating.")
    p_sim.add_argument("--vectors", nargs=2, metavar=("VEC_U", "VEC_V"),
                       help="two inline rating vectors, comma-separated, - for missing")
    p_sim.add_argument("--train", type=Path, help="ratings file holding the users")
    p_sim.add_argument("--users", nargs=2, type=int, metavar=("USER_U", "USER_V"),
                       help="two user ids as they appear in the ratings file")
    p_sim.add_argument("--format", choices=sorted(FORMATS), default="tab",
                       help="ratings line format (default tab)")
    p_sim.add_argument("--scores", type=_score_list, default=list(SCORE_NAMES),
                       help="comma-separated scores (default: all five)")
    _add_shared(p_sim)
    p_sim.set_defaults(func=cmd_sim)

    p_gen = subs.add_parser(
        "gen", help="write a synthetic two-cluster dataset",
        description="Generate a synthetic two-cluster dataset and write a "
                    "tab-format ratings file plus <stem>_labels.csv "
                    "(user,cluster) and <stem>_params.csv (cluster,item,rho,mu).")
    p_gen.add_argument("--m", type=int, default=DEFAULT_M,
                       help="users (default 40)")
    p_gen.add_argument("--n", type=int, default=80, help="items (default 80)")
    p_gen.add_argument("--clusters", type=int, default=2,
                       help="number of user clusters (default 2)")
    p_gen.add_argument("--missing", type=float, default=0.0,
                       help="fraction of cells to delete (default 0)")
    _add_shared(p_gen, out_required=True,
                out_help="ratings file path (labels/params CSVs are siblings); required")
    p_gen.set_defaults(func=cmd_gen)

    return parser


def cmd_eval(args) -> int:
    seed = _resolve_seed(args)
    if args.data is not None:
        if args.train is not None or args.test is not None:
            raise DomainError("--data and --train/--test are mutually exclusive")
        splits = movielens_splits(args.data, names=args.splits,
                                  scale_d=args.scale_d, seed=seed)
    elif args.train is not None and args.test is not None:
        train, test = parse_ratings_pair(args.train, args.test,
                                         args.format, args.scale_d)
        splits = [EvalSplit(name=args.train.stem, train=train, test=test)]
    else:
        raise DomainError("provide either --data DIR or both --train and --test")

    rows = evaluate_grid(splits, args.scores, args.k,
                         n_jobs=args.threads, progress=_progress)
    _emit(grid_to_csv(rows), args.out, f"{len(rows)} evaluation rows")
    return EXIT_OK


def cmd_resolution(args) -> int:
    seed = _resolve_seed(args)
    if args.seeds < 1:
        raise DomainError(f"--seeds must be at least 1, got {args.seeds}")
    seed_values = [seed + j for j in range(args.seeds)]

    rows = resolution_grid(m=args.m, d=args.scale_d, n_values=args.n,
                           missing_rates=args.missing, scores=args.scores,
                           seeds=seed_values, num_clusters=args.clusters,
                           n_jobs=args.threads, progress=_progress)
    curve = inter_cluster_curve(m=args.m, d=args.scale_d, n=args.curve_n,
                                missing_rates=args.missing, scores=args.scores,
                                seeds=seed_values, num_clusters=args.clusters,
                                n_jobs=args.threads, progress=_progress)

    grid_csv = resolution_to_csv(rows)
    curve_csv = inter_curve_to_csv(curve)

    curve_out = args.curve_out
    if curve_out is None and args.out is not None:
        curve_out = args.out.with_name(args.out.stem + "_inter" + (args.out.suffix or ".csv"))
    _emit(grid_csv, args.out, f"{len(rows)} resolution rows")
    if curve_out is None and args.out is None:
        sys.stdout.write("\n")  # blank line separates the two CSV blocks on stdout
    _emit(curve_csv, curve_out, f"{len(curve)} inter-cluster rows")
    return EXIT_OK


def _parse_inline_vector(text: str, who: str) -> list[tuple[int, int]]:
    """(item index, rating) entries of a vector like '1,1,-,-,-,2'."""
    entries = []
    for pos, token in enumerate(text.split(",")):
        token = token.strip()
        if token in ("-", ""):
            continue
        try:
            entries.append((pos, int(token)))
        except ValueError:
            raise DomainError(
                f"vector {who}: entry {pos + 1} ({token!r}) is neither an "
                f"integer nor the - placeholder")
    return entries


def cmd_sim(args) -> int:
    if args.vectors is not None:
        if args.train is not None or args.users is not None:
            raise DomainError("--vectors and --train/--users are mutually exclusive")
        length = len(args.vectors[0].split(","))
        if len(args.vectors[1].split(",")) != length:
            raise DomainError("the two vectors must have the same length")
        triples = [(who, i, r)
                   for who, text in enumerate(args.vectors)
                   for i, r in _parse_inline_vector(text, "uv"[who])]
        matrix = RatingMatrix.from_triples(
            np.array(triples, dtype=np.int64).reshape(-1, 3),
            scale_d=args.scale_d, num_users=2, num_items=length)
        u, v = 0, 1
    elif args.train is not None and args.users is not None:
        matrix = parse_ratings(args.train, args.format, args.scale_d)
        try:
            u = matrix.user_index(args.users[0])
            v = matrix.user_index(args.users[1])
        except KeyError as exc:
            raise DomainError(f"user id {exc.args[0]} does not appear in {args.train}")
    else:
        raise DomainError("provide either --vectors V1 V2 or --train FILE --users A B")

    hist = diff_histogram(matrix, u, v)
    lines = [f"co_rated: {hist.total}",
             f"diff_histogram: {hist.counts.tolist()}"]
    for name in args.scores:
        lines.append(f"{name}: {score_pair(name, matrix, u, v):.6f}")
    _emit("\n".join(lines) + "\n", args.out, "pair report")
    return EXIT_OK


def cmd_gen(args) -> int:
    seed = _resolve_seed(args)
    params = ClusterParams(m=args.m, n=args.n, d=args.scale_d,
                           num_clusters=args.clusters, seed=seed)
    dataset = generate_clusters(params)
    if args.missing:
        dataset = apply_missing(dataset, args.missing, seed)

    # ratings file ids are 1-based like the MovieLens originals; the
    # timestamp column is a constant 0 so regeneration stays byte-identical
    triples = dataset.matrix.triples()
    ratings_lines = [f"{t[0] + 1}\t{t[1] + 1}\t{t[2]}\t0" for t in triples]
    labels_lines = ["user,cluster"] + [
        f"{u + 1},{c}" for u, c in enumerate(dataset.labels)]
    mu = dataset.params.mu
    params_lines = ["cluster,item,rho,mu"]
    for c in range(args.clusters):
        for i in range(args.n):
            for rho in range(1, args.scale_d + 1):
                params_lines.append(f"{c},{i + 1},{rho},{mu[c, i, rho - 1]:.17g}")

    out: Path = args.out
    labels_out = out.with_name(out.stem + "_labels.csv")
    params_out = out.with_name(out.stem + "_params.csv")
    _emit("\n".join(ratings_lines) + "\n", out, f"{len(ratings_lines)} ratings")
    _emit("\n".join(labels_lines) + "\n", labels_out, "cluster labels")
    _emit("\n".join(params_lines) + "\n", params_out, "generator parameters")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, ParseError) as exc:
        print(f"liracf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"liracf {args.command}: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
