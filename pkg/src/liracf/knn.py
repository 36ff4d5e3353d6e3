"""User-based kNN rating prediction.

For a target (user, item) pair the candidate pool is every training user who
rated the item, excluding the target user.  The k most similar candidates
(ties broken by ascending user index) vote with an unweighted average of
their ratings of the item.  When there are no candidates at all, a fallback
chain supplies the prediction and is recorded on the result so evaluation
can report errors with and without fallbacks.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import DomainError
from .ratings import RatingMatrix
from .similarity import fitted_measure

__all__ = [
    "Fallback",
    "NeighborList",
    "PredictionRecord",
    "neighbors",
    "predict",
    "predict_all",
    "KNNRatingPredictor",
]


class Fallback(Enum):
    """How a prediction was produced when no neighbors voted."""

    NONE = "none"
    USER_MEAN = "user_mean"
    GLOBAL_MEAN = "global_mean"
    MIDPOINT = "midpoint"


@dataclass(frozen=True)
class NeighborList:
    """Up to k (user, similarity) pairs, best first.

    Sorted by similarity descending, ties by ascending user index; every
    listed user rated the target item in training.
    """

    users: np.ndarray
    similarities: np.ndarray

    def __len__(self) -> int:
        return len(self.users)


@dataclass(frozen=True)
class PredictionRecord:
    """One test-triple prediction with its provenance."""

    user: int
    item: int
    truth: int | None
    prediction: float
    neighbors_used: int
    fallback: Fallback


_EMPTY = np.empty(0, dtype=np.int64)


def _top_k_order(scores: np.ndarray, k: int) -> np.ndarray:
    """Positions of the top-k scores, ordered by (score desc, position asc).

    Candidate positions arrive in ascending user order, so position order is
    the user-id tie-break.  Uses an O(n) partition plus an O(k log k) sort of
    the survivors rather than sorting all candidates; ties at the cut line
    are resolved toward smaller positions, which makes the result identical
    to taking the first k of a full (score desc, position asc) sort.
    """
    n = len(scores)
    if k >= n:
        return np.lexsort((np.arange(n), -scores))
    cut = np.argpartition(-scores, k - 1)
    threshold = scores[cut[k - 1]]
    above = np.flatnonzero(scores > threshold)
    at = np.flatnonzero(scores == threshold)
    chosen = np.concatenate([above, at[: k - len(above)]])
    return chosen[np.lexsort((chosen, -scores[chosen]))]


def _candidates(train: RatingMatrix, u: int, i: int):
    """Raters of item i minus u, with their ratings; empty when u is unusable.

    A user index outside the matrix or with no training ratings has no
    similarity evidence to rank candidates by, so it gets the empty pool
    (and therefore the fallback chain).
    """
    if not (0 <= i < train.num_items) or not (0 <= u < train.num_users):
        return _EMPTY, _EMPTY
    if train.user_count(u) == 0:
        return _EMPTY, _EMPTY
    users, ratings = train.item_profile(i)
    keep = users != u
    return users[keep], ratings[keep]


def neighbors(train: RatingMatrix, score, u: int, i: int, k: int,
              _row: np.ndarray | None = None) -> NeighborList:
    """Top-k raters of item i by similarity to u.

    Shorter than k when fewer users rated i; empty when nobody did, or when
    u itself is absent from training.  ``_row`` lets a caller reuse an
    already computed similarity row for u.
    """
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    measure = fitted_measure(train, score)
    cand_users, _ = _candidates(train, u, i)
    if len(cand_users) == 0:
        return NeighborList(users=_EMPTY, similarities=np.empty(0))
    row = measure.row(u) if _row is None else _row
    scores = row[cand_users]
    order = _top_k_order(scores, k)
    return NeighborList(users=cand_users[order], similarities=scores[order])


def _fallback_prediction(train: RatingMatrix, u: int) -> tuple[float, Fallback]:
    if 0 <= u < train.num_users and train.user_count(u) > 0:
        _, ratings = train.user_profile(u)
        return float(ratings.mean()), Fallback.USER_MEAN
    if train.n_ratings > 0:
        return train.global_mean(), Fallback.GLOBAL_MEAN
    return (1.0 + train.scale_d) / 2.0, Fallback.MIDPOINT


def predict(train: RatingMatrix, score, u: int, i: int, k: int,
            truth: int | None = None,
            _row: np.ndarray | None = None) -> PredictionRecord:
    """Predict u's rating of i as the unweighted mean of its top-k neighbors.

    With no candidates the fallback chain applies: u's training mean, then
    the global training mean, then the scale midpoint for an empty matrix.
    """
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    measure = fitted_measure(train, score)
    cand_users, cand_ratings = _candidates(train, u, i)
    if len(cand_users) == 0:
        value, fallback = _fallback_prediction(train, u)
        return PredictionRecord(user=u, item=i, truth=truth, prediction=value,
                                neighbors_used=0, fallback=fallback)
    row = measure.row(u) if _row is None else _row
    order = _top_k_order(row[cand_users], k)
    value = float(cand_ratings[order].mean())
    return PredictionRecord(user=u, item=i, truth=truth, prediction=value,
                            neighbors_used=len(order), fallback=Fallback.NONE)


def _user_block_multi_k(train, measure, u, items, truths, ks):
    """Prediction records for one test user at several k values at once.

    The user's similarity row is computed once and the candidate ranking for
    each item is shared across all k: the top-k set at any k is a prefix of
    the full (similarity desc, user asc) candidate order, and the prefix
    ratings are averaged exactly as :func:`predict` averages its selected
    neighbors, so per-k results are bit-identical to independent
    :func:`predict` calls.
    """
    row = None
    out = {k: [] for k in ks}
    for i, t in zip(items, truths):
        i, t = int(i), int(t)
        cand_users, cand_ratings = _candidates(train, u, i)
        if len(cand_users) == 0:
            value, fb = _fallback_prediction(train, u)
            for k in ks:
                out[k].append(PredictionRecord(u, i, t, value, 0, fb))
            continue
        if row is None:
            row = measure.row(u)
        order = np.argsort(-row[cand_users], kind="stable")
        ranked_ratings = cand_ratings[order]
        for k in ks:
            kk = min(k, len(cand_users))
            pred = float(ranked_ratings[:kk].mean())
            out[k].append(PredictionRecord(u, i, t, pred, kk, Fallback.NONE))
    return out


def _test_user_blocks(test: np.ndarray) -> list[np.ndarray]:
    """Index blocks of test rows grouped by user, preserving row identity."""
    order = np.argsort(test[:, 0], kind="stable")
    boundaries = np.flatnonzero(np.diff(test[order, 0])) + 1
    return np.split(order, boundaries)


def predict_all(train: RatingMatrix, test: np.ndarray, score, k: int,
                n_jobs: int = 1) -> list[PredictionRecord]:
    """One PredictionRecord per (user, item, truth) test triple, input order.

    Test triples are grouped by user so each user's similarity row is
    computed once; groups run in parallel when n_jobs is not 1.  Every
    record is a pure function of (train, score, triple), so the output is
    identical for any worker count.
    """
    test = np.asarray(test, dtype=np.int64)
    if test.size == 0:
        return []
    if test.ndim != 2 or test.shape[1] != 3:
        raise DomainError("test must be an (n, 3) array of user, item, truth")
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    measure = fitted_measure(train, score)

    blocks = _test_user_blocks(test)
    runner = Parallel(n_jobs=n_jobs, prefer="threads")
    results = runner(
        delayed(_user_block_multi_k)(
            train, measure, int(test[block[0], 0]),
            test[block, 1], test[block, 2], (k,))
        for block in blocks)

    records: list[PredictionRecord | None] = [None] * len(test)
    for block, block_records in zip(blocks, results):
        for pos, record in zip(block, block_records[k]):
            records[pos] = record
    return records  # type: ignore[return-value]


class KNNRatingPredictor(BaseEstimator, RegressorMixin):
    """Estimator wrapper: fit on ratings, predict ratings for (user, item) pairs.

    Parameters
    ----------
    score : str or SimilarityMeasure, default "lira"
        Similarity ranking the candidate neighbors.
    k : int, default 10
        Neighborhood size cap.
    scale_d : int, default 5
        Rating scale upper bound, used when fit receives raw triples.
    n_jobs : int, default 1
        Worker count for batch prediction.
    """

    def __init__(self, score="lira", k: int = 10, scale_d: int = 5, n_jobs: int = 1):
        self.score = score
        self.k = k
        self.scale_d = scale_d
        self.n_jobs = n_jobs

    def fit(self, X, y=None) -> "KNNRatingPredictor":
        """X is a RatingMatrix or an (n, 3) array of (user, item, rating)."""
        if isinstance(X, RatingMatrix):
            self.matrix_ = X
        else:
            self.matrix_ = RatingMatrix.from_triples(np.asarray(X), scale_d=self.scale_d)
        if self.k < 1:
            raise DomainError(f"k must be at least 1, got {self.k}")
        self.measure_ = fitted_measure(self.matrix_, self.score)
        return self

    def _check_is_fitted(self):
        if not hasattr(self, "matrix_"):
            raise DomainError("predictor is not fitted; call fit first")

    def predict_records(self, X) -> list[PredictionRecord]:
        """Full provenance records for an (n, 2) or (n, 3) query array."""
        self._check_is_fitted()
        X = np.asarray(X, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] not in (2, 3):
            raise DomainError("expected an (n, 2) or (n, 3) array of user, item[, truth]")
        if X.shape[1] == 2:
            X = np.column_stack([X, np.zeros(len(X), dtype=np.int64)])
            triples = predict_all(self.matrix_, X, self.measure_, self.k,
                                  n_jobs=self.n_jobs)
            return [PredictionRecord(r.user, r.item, None, r.prediction,
                                     r.neighbors_used, r.fallback)
                    for r in triples]
        return predict_all(self.matrix_, X, self.measure_, self.k, n_jobs=self.n_jobs)

    def predict(self, X) -> np.ndarray:
        """Predicted ratings for an (n, 2) or (n, 3) array, row for row."""
        return np.array([r.prediction for r in self.predict_records(X)])

    def kneighbors(self, u: int, i: int) -> NeighborList:
        """The neighbor list the predictor would use for (u, i)."""
        self._check_is_fitted()
        return neighbors(self.matrix_, self.measure_, u, i, self.k)
