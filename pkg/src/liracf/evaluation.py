"""MAE/RMSE metrics and the (split x score x k) evaluation harness.

The harness consumes train/test splits in the MovieLens layout: the five
published u1..u5 base/test pairs when they exist on disk, otherwise seeded
random 80/20 splits of the raw ratings file (with a warning, since results
then depend on the seed rather than the published protocol).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .errors import DomainError, EmptyEvaluationError
from .knn import Fallback, PredictionRecord, _test_user_blocks, _user_block_multi_k
from .ratings import RatingMatrix, parse_ratings, parse_ratings_pair, split_random
from .similarity import make_similarity

__all__ = [
    "ErrorReport",
    "GridRow",
    "EvalSplit",
    "mae",
    "rmse",
    "error_report",
    "evaluate_grid",
    "grid_to_csv",
    "movielens_splits",
    "MOVIELENS_SPLIT_NAMES",
]

logger = logging.getLogger(__name__)

MOVIELENS_SPLIT_NAMES = ("u1", "u2", "u3", "u4", "u5")


@dataclass(frozen=True)
class ErrorReport:
    """Accuracy of one (score, k) cell, with and without fallback records.

    The headline mae/rmse cover every test record (fallback predictions
    included, so coverage is total); the _nofallback variants cover only
    records with at least one neighbor and are None when no such record
    exists.
    """

    score_name: str
    k: int
    mae: float
    rmse: float
    n_test: int
    n_fallback: int
    mae_nofallback: float | None
    rmse_nofallback: float | None


@dataclass(frozen=True)
class GridRow:
    """One evaluation-grid cell: an ErrorReport tagged with its split."""

    split: str
    score: str
    k: int
    mae: float
    rmse: float
    n_test: int
    n_fallback: int
    mae_nofallback: float | None
    rmse_nofallback: float | None


@dataclass(frozen=True)
class EvalSplit:
    """A named train matrix plus (user, item, truth) test triples."""

    name: str
    train: RatingMatrix
    test: np.ndarray


def _truth_pred_arrays(records) -> tuple[np.ndarray, np.ndarray]:
    if len(records) == 0:
        raise EmptyEvaluationError("no prediction records to evaluate")
    truths = np.empty(len(records))
    preds = np.empty(len(records))
    for pos, record in enumerate(records):
        if record.truth is None:
            raise DomainError("cannot evaluate a record without a truth value")
        truths[pos] = record.truth
        preds[pos] = record.prediction
    return truths, preds


def mae(records) -> float:
    """Mean absolute error over prediction records."""
    truths, preds = _truth_pred_arrays(records)
    return float(np.abs(truths - preds).mean())


def rmse(records) -> float:
    """Root mean squared error over prediction records."""
    truths, preds = _truth_pred_arrays(records)
    return float(np.sqrt(((truths - preds) ** 2).mean()))


def error_report(records, score_name: str, k: int) -> ErrorReport:
    """Bundle mae/rmse (all records and non-fallback-only) into one report."""
    non_fallback = [r for r in records if r.fallback is Fallback.NONE]
    return ErrorReport(
        score_name=score_name,
        k=k,
        mae=mae(records),
        rmse=rmse(records),
        n_test=len(records),
        n_fallback=len(records) - len(non_fallback),
        mae_nofallback=mae(non_fallback) if non_fallback else None,
        rmse_nofallback=rmse(non_fallback) if non_fallback else None,
    )


def evaluate_grid(splits, scores, k_values, n_jobs: int = 1,
                  progress=None) -> list[GridRow]:
    """Run kNN prediction for every (split, score, k) cell and report errors.

    k values are deduplicated and sorted; scores are deduplicated in order.
    All k values for one (split, score) share each test user's similarity
    row and candidate ranking, which keeps the grid a single pass over the
    test set per score; per-cell results are bit-identical to independent
    predict_all runs.  ``progress`` is an optional callable handed one
    status line per (split, score).
    """
    ks = sorted({int(k) for k in k_values})
    if not ks:
        raise DomainError("k grid must not be empty")
    if ks[0] < 1:
        raise DomainError(f"k must be at least 1, got {ks[0]}")
    score_names = list(dict.fromkeys(scores))
    if not score_names:
        raise DomainError("score list must not be empty")
    splits = list(splits)
    if not splits:
        raise DomainError("split list must not be empty")

    rows: list[GridRow] = []
    for split in splits:
        test = np.asarray(split.test, dtype=np.int64)
        if test.ndim != 2 or test.shape[1] != 3 or len(test) == 0:
            raise DomainError(
                f"split {split.name!r} needs a non-empty (n, 3) test array")
        if split.train.n_ratings == 0:
            raise DomainError(f"split {split.name!r} has an empty training matrix")
        blocks = _test_user_blocks(test)
        for score_name in score_names:
            if progress is not None:
                progress(f"evaluating split={split.name} score={score_name} "
                         f"k={','.join(map(str, ks))}")
            measure = make_similarity(score_name).fit(split.train)
            runner = Parallel(n_jobs=n_jobs, prefer="threads")
            results = runner(
                delayed(_user_block_multi_k)(
                    split.train, measure, int(test[block[0], 0]),
                    test[block, 1], test[block, 2], ks)
                for block in blocks)
            for k in ks:
                records: list[PredictionRecord | None] = [None] * len(test)
                for block, block_records in zip(blocks, results):
                    for pos, record in zip(block, block_records[k]):
                        records[pos] = record
                report = error_report(records, score_name, k)
                rows.append(GridRow(
                    split=split.name, score=score_name, k=k,
                    mae=report.mae, rmse=report.rmse,
                    n_test=report.n_test, n_fallback=report.n_fallback,
                    mae_nofallback=report.mae_nofallback,
                    rmse_nofallback=report.rmse_nofallback))
    return rows


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def grid_to_csv(rows) -> str:
    """Render grid rows as CSV, floats at 6 decimals, one line per cell."""
    lines = ["split,score,k,mae,rmse,n_test,n_fallback,mae_nofallback,rmse_nofallback"]
    for r in rows:
        lines.append(
            f"{r.split},{r.score},{r.k},{r.mae:.6f},{r.rmse:.6f},"
            f"{r.n_test},{r.n_fallback},{_fmt(r.mae_nofallback)},{_fmt(r.rmse_nofallback)}")
    return "\n".join(lines) + "\n"


def movielens_splits(root, names=MOVIELENS_SPLIT_NAMES, scale_d: int = 5,
                     seed: int = 0, test_fraction: float = 0.2) -> list[EvalSplit]:
    """Load the published base/test split pairs from a MovieLens directory.

    Expects ``<name>.base`` / ``<name>.test`` tab-format files for each
    requested name.  When any pair is missing, falls back to seeded random
    splits of ``u.data`` (one per requested name, seeds seed, seed+1, ...)
    and logs a warning, since that abandons the published protocol.
    """
    root = Path(root)
    pairs = [(root / f"{name}.base", root / f"{name}.test") for name in names]
    if all(base.exists() and test.exists() for base, test in pairs):
        out = []
        for name, (base, test) in zip(names, pairs):
            train, test_triples = parse_ratings_pair(base, test, "tab", scale_d)
            out.append(EvalSplit(name=name, train=train, test=test_triples))
        return out

    data = root / "u.data"
    if not data.exists():
        raise FileNotFoundError(
            f"{root} has neither the published split pairs "
            f"({names[0]}.base/.test, ...) nor a u.data ratings file")
    logger.warning(
        "published base/test pairs not found under %s; using seeded random "
        "%d/%d splits of u.data instead (seed %d)",
        root, round((1 - test_fraction) * 100), round(test_fraction * 100), seed)
    full = parse_ratings(data, "tab", scale_d)
    out = []
    for idx in range(len(names)):
        train, test_triples = split_random(full, test_fraction, seed + idx)
        out.append(EvalSplit(name=f"rand{idx + 1}", train=train, test=test_triples))
    return out
