"""Two-cluster synthetic rating data and the similarity-resolution experiment.

Users are split into equal-size taste clusters; each (cluster, item) pair
carries a categorical distribution over the rating scale, drawn from the
flat Dirichlet unless supplied explicitly, and every user rates every item
with one draw from their cluster's distribution.  A deletion pass then
knocks out a controlled fraction of cells, and the resolution analysis asks
how well each similarity score still separates same-cluster pairs from
cross-cluster pairs.

All randomness is derived per grid cell: generation streams from
SeedSequence([seed, n]) and deletion streams from
SeedSequence([seed, n, round(missing_rate * 1000)]), so a cell's data is a
pure function of (seed, n, missing_rate) regardless of evaluation order or
worker scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from joblib import Parallel, delayed

from .errors import DomainError
from .ratings import RatingMatrix
from .similarity import fitted_measure

__all__ = [
    "ClusterParams",
    "ClusterDataset",
    "ResolutionReport",
    "ResolutionRow",
    "InterClusterRow",
    "generate_clusters",
    "apply_missing",
    "resolution",
    "resolution_grid",
    "inter_cluster_curve",
    "resolution_to_csv",
    "inter_curve_to_csv",
    "DEFAULT_M",
    "DEFAULT_D",
    "DEFAULT_N_VALUES",
    "DEFAULT_MISSING_RATES",
    "DEFAULT_SEED_COUNT",
    "EXPERIMENT_SCORES",
]

DEFAULT_M = 40
DEFAULT_D = 5
DEFAULT_N_VALUES = (5, 10, 20, 40, 80)
DEFAULT_MISSING_RATES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
DEFAULT_SEED_COUNT = 20
#: Scores compared in the experiments (Jaccard stays available by request).
EXPERIMENT_SCORES = ("lira", "pearson", "cosine", "bcf")


@dataclass(frozen=True)
class ClusterParams:
    """Shape and per-(cluster, item) rating distributions of a dataset.

    ``mu`` is a (num_clusters, n, d) array of categorical probabilities; pass
    None to have :func:`generate_clusters` draw it from the flat Dirichlet.
    """

    m: int
    n: int
    d: int = DEFAULT_D
    num_clusters: int = 2
    seed: int = 0
    mu: np.ndarray | None = None


@dataclass(frozen=True)
class ClusterDataset:
    """Generated ratings with their cluster labels and parameters."""

    matrix: RatingMatrix
    labels: np.ndarray
    params: ClusterParams
    missing_rate: float = 0.0


@dataclass(frozen=True)
class ResolutionReport:
    """Separation of intra- from inter-cluster pairs under one score.

    Means run over ALL unordered pairs of the respective kind; pairs whose
    score is undefined (no co-observed items, or a degenerate Pearson
    overlap) contribute the sentinel 0 to the means and are tallied in
    undefined_pairs.
    """

    score_name: str
    n: int
    missing_rate: float
    resolution: float
    intra_mean: float
    inter_mean: float
    undefined_pairs: int


@dataclass(frozen=True)
class ResolutionRow:
    """One grid cell realization plus its score-level scaled value.

    ``scaled_resolution`` is the cell's seed-averaged resolution divided by
    the largest-magnitude seed-averaged resolution that score reaches
    anywhere on the grid, so it is shared by all seeds of a cell and lies in
    [-1, 1].
    """

    score: str
    n: int
    missing_rate: float
    seed: int
    resolution: float
    intra_mean: float
    inter_mean: float
    undefined_pairs: int
    scaled_resolution: float


@dataclass(frozen=True)
class InterClusterRow:
    """Seed-averaged inter-cluster mean at one missing rate, plus scaling."""

    score: str
    missing_rate: float
    inter_mean: float
    scaled_inter_mean: float


def _validate_params(params: ClusterParams) -> None:
    if params.num_clusters < 1:
        raise DomainError(f"need at least one cluster, got {params.num_clusters}")
    if params.m % params.num_clusters != 0:
        raise DomainError(
            f"m={params.m} is not divisible by num_clusters={params.num_clusters}")
    if params.m < params.num_clusters:
        raise DomainError(f"m={params.m} leaves some cluster empty")
    if params.n < 1:
        raise DomainError(f"need at least one item, got n={params.n}")
    if params.d < 2:
        raise DomainError(f"rating scale must have at least 2 values, got d={params.d}")
    if params.seed < 0:
        raise DomainError(f"seed must be non-negative, got {params.seed}")


def generate_clusters(params: ClusterParams) -> ClusterDataset:
    """Draw a complete m x n rating matrix from the cluster model.

    Cluster k owns users k*m/kappa .. (k+1)*m/kappa - 1.  When params.mu is
    None, each (cluster, item) distribution is an independent flat-Dirichlet
    draw; an explicit mu (simplex rows, shape (kappa, n, d)) is used as
    given, which pins down degenerate cases like point masses.  The returned
    dataset's params carry the realized mu.
    """
    _validate_params(params)
    m, n, d, kappa = params.m, params.n, params.d, params.num_clusters
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, n]))

    if params.mu is None:
        mu = rng.dirichlet(np.ones(d), size=(kappa, n))
    else:
        mu = np.array(params.mu, dtype=np.float64)
        if mu.shape != (kappa, n, d):
            raise DomainError(
                f"mu must have shape {(kappa, n, d)}, got {mu.shape}")
        if (mu < 0).any() or np.abs(mu.sum(axis=-1) - 1.0).max() > 1e-12:
            raise DomainError("each mu row must be a probability vector over 1..d")
    mu.setflags(write=False)

    labels = np.repeat(np.arange(kappa), m // kappa)
    labels.setflags(write=False)

    # one categorical draw per cell, inverted through the per-cell cdf
    cdf = np.cumsum(mu, axis=-1)
    draws = rng.random((m, n))
    values = (draws[:, :, None] > cdf[labels]).sum(axis=2) + 1
    values = np.minimum(values, d)

    triples = np.column_stack([
        np.repeat(np.arange(m), n),
        np.tile(np.arange(n), m),
        values.ravel(),
    ])
    matrix = RatingMatrix.from_triples(triples, scale_d=d, num_users=m, num_items=n)
    return ClusterDataset(matrix=matrix, labels=labels,
                          params=replace(params, mu=mu), missing_rate=0.0)


def apply_missing(dataset: ClusterDataset, missing_rate: float,
                  seed: int) -> ClusterDataset:
    """Delete each observed cell independently with probability missing_rate.

    Labels, params, and matrix dimensions are preserved, so users who lose
    every rating stay addressable (their pairs simply become undefined).
    The deletion stream is derived from (seed, n, missing_rate), independent
    of the generation stream.
    """
    if not 0.0 <= missing_rate < 1.0:
        raise DomainError(f"missing_rate must be in [0, 1), got {missing_rate}")
    if seed < 0:
        raise DomainError(f"seed must be non-negative, got {seed}")
    if missing_rate == 0.0:
        return dataset
    matrix = dataset.matrix
    rng = np.random.default_rng(np.random.SeedSequence(
        [seed, dataset.params.n, round(missing_rate * 1000)]))
    triples = matrix.triples()
    keep = rng.random(len(triples)) >= missing_rate
    pruned = RatingMatrix.from_triples(
        triples[keep], scale_d=matrix.scale_d,
        num_users=matrix.num_users, num_items=matrix.num_items,
        user_ids=matrix.user_ids, item_ids=matrix.item_ids)
    return replace(dataset, matrix=pruned, missing_rate=missing_rate)


def resolution(dataset: ClusterDataset, score) -> ResolutionReport:
    """Mean intra-cluster similarity minus mean inter-cluster similarity.

    Every unordered user pair lands in exactly one of the two means
    (self-pairs excluded); undefined pairs contribute 0 and are counted.
    """
    labels = dataset.labels
    counts = np.bincount(labels)
    if counts.min() < 2:
        raise DomainError("resolution needs at least 2 users in every cluster")
    measure = fitted_measure(dataset.matrix, score)

    m = dataset.matrix.num_users
    intra_sum = inter_sum = 0.0
    intra_cnt = inter_cnt = 0
    undefined = 0
    for u in range(m - 1):
        values = measure.row(u)[u + 1:]
        defined = measure.defined_row(u)[u + 1:]
        values = np.where(defined, values, 0.0)
        same = labels[u + 1:] == labels[u]
        intra_sum += float(values[same].sum())
        inter_sum += float(values[~same].sum())
        intra_cnt += int(same.sum())
        inter_cnt += int(len(same) - same.sum())
        undefined += int((~defined).sum())

    intra_mean = intra_sum / intra_cnt if intra_cnt else 0.0
    inter_mean = inter_sum / inter_cnt if inter_cnt else 0.0
    return ResolutionReport(
        score_name=measure.name, n=dataset.params.n,
        missing_rate=dataset.missing_rate,
        resolution=intra_mean - inter_mean,
        intra_mean=intra_mean, inter_mean=inter_mean,
        undefined_pairs=undefined)


def _seed_list(seeds) -> list[int]:
    if isinstance(seeds, (int, np.integer)):
        return list(range(int(seeds)))
    return [int(s) for s in seeds]


def _grid_cell(m, d, n, kappa, seed, missing_rates, scores):
    """All (missing_rate, score) reports for one (n, seed) base dataset."""
    base = generate_clusters(ClusterParams(m=m, n=n, d=d,
                                           num_clusters=kappa, seed=seed))
    out = {}
    for rate in missing_rates:
        ds = apply_missing(base, rate, seed)
        for score in scores:
            out[(score, rate)] = resolution(ds, score)
    return out


def _collect_reports(m, d, n_values, missing_rates, scores, seeds,
                     kappa=2, n_jobs=1, progress=None):
    """Reports for every (score, n, missing_rate, seed) cell of the grid."""
    seeds = _seed_list(seeds)
    if not (len(n_values) and len(missing_rates) and len(scores) and len(seeds)):
        raise DomainError("n_values, missing_rates, scores, and seeds must be non-empty")
    cells = [(n, seed) for n in n_values for seed in seeds]
    if progress is not None:
        progress(f"resolution grid: {len(n_values)} n-values x "
                 f"{len(missing_rates)} missing rates x {len(scores)} scores "
                 f"x {len(seeds)} seeds")
    runner = Parallel(n_jobs=n_jobs, prefer="threads")
    results = runner(
        delayed(_grid_cell)(m, d, n, kappa, seed, tuple(missing_rates), tuple(scores))
        for n, seed in cells)
    reports = {}
    for (n, seed), cell in zip(cells, results):
        for (score, rate), report in cell.items():
            reports[(score, n, rate, seed)] = report
    return reports, seeds


def resolution_grid(m: int = DEFAULT_M, d: int = DEFAULT_D,
                    n_values: Sequence[int] = DEFAULT_N_VALUES,
                    missing_rates: Sequence[float] = DEFAULT_MISSING_RATES,
                    scores: Sequence[str] = EXPERIMENT_SCORES,
                    seeds: int | Iterable[int] = DEFAULT_SEED_COUNT,
                    num_clusters: int = 2, n_jobs: int = 1,
                    progress=None) -> list[ResolutionRow]:
    """Resolution of every score over the (n, missing_rate, seed) grid.

    ``seeds`` is either a count (seeds 0..count-1) or an explicit list.
    Each row carries its realization's raw numbers plus the score-level
    scaled resolution: seed-averaged cell resolution over the maximum
    seed-averaged |resolution| that score attains on the grid.
    """
    reports, seeds = _collect_reports(m, d, n_values, missing_rates, scores,
                                      seeds, kappa=num_clusters, n_jobs=n_jobs,
                                      progress=progress)
    averaged = {
        (score, n, rate): float(np.mean(
            [reports[(score, n, rate, s)].resolution for s in seeds]))
        for score in scores for n in n_values for rate in missing_rates}
    rows = []
    for score in scores:
        peak = max(abs(v) for (sc, _, _), v in averaged.items() if sc == score)
        for n in n_values:
            for rate in missing_rates:
                scaled = averaged[(score, n, rate)] / peak if peak else 0.0
                for seed in seeds:
                    rep = reports[(score, n, rate, seed)]
                    rows.append(ResolutionRow(
                        score=score, n=n, missing_rate=rate, seed=seed,
                        resolution=rep.resolution, intra_mean=rep.intra_mean,
                        inter_mean=rep.inter_mean,
                        undefined_pairs=rep.undefined_pairs,
                        scaled_resolution=scaled))
    return rows


def inter_cluster_curve(m: int = DEFAULT_M, d: int = DEFAULT_D, n: int = 80,
                        missing_rates: Sequence[float] = DEFAULT_MISSING_RATES,
                        scores: Sequence[str] = EXPERIMENT_SCORES,
                        seeds: int | Iterable[int] = DEFAULT_SEED_COUNT,
                        num_clusters: int = 2, n_jobs: int = 1,
                        progress=None) -> list[InterClusterRow]:
    """Seed-averaged inter-cluster mean per missing rate at fixed n.

    Per score, values are scaled by the largest magnitude over the missing
    rates, so each curve lives in [-1, 1] with at least one endpoint of
    magnitude 1.  Cells reuse the same derived streams as resolution_grid,
    so shared (n, missing_rate, seed) cells agree exactly.
    """
    reports, seeds = _collect_reports(m, d, [n], missing_rates, scores, seeds,
                                      kappa=num_clusters, n_jobs=n_jobs,
                                      progress=progress)
    rows = []
    for score in scores:
        averaged = {
            rate: float(np.mean(
                [reports[(score, n, rate, s)].inter_mean for s in seeds]))
            for rate in missing_rates}
        peak = max(abs(v) for v in averaged.values())
        for rate in missing_rates:
            scaled = averaged[rate] / peak if peak else 0.0
            rows.append(InterClusterRow(score=score, missing_rate=rate,
                                        inter_mean=averaged[rate],
                                        scaled_inter_mean=scaled))
    return rows


def resolution_to_csv(rows: Iterable[ResolutionRow]) -> str:
    """Grid rows as CSV, one line per (score, n, missing_rate, seed)."""
    lines = ["score,n,missing_rate,seed,resolution,intra_mean,inter_mean,"
             "undefined_pairs,scaled_resolution"]
    for r in rows:
        lines.append(
            f"{r.score},{r.n},{r.missing_rate:g},{r.seed},{r.resolution:.6f},"
            f"{r.intra_mean:.6f},{r.inter_mean:.6f},{r.undefined_pairs},"
            f"{r.scaled_resolution:.6f}")
    return "\n".join(lines) + "\n"


def inter_curve_to_csv(rows: Iterable[InterClusterRow]) -> str:
    """Inter-cluster curve rows as CSV, one line per (score, missing_rate)."""
    lines = ["score,missing_rate,inter_mean,scaled_inter_mean"]
    for r in rows:
        lines.append(f"{r.score},{r.missing_rate:g},{r.inter_mean:.6f},"
                     f"{r.scaled_inter_mean:.6f}")
    return "\n".join(lines) + "\n"
