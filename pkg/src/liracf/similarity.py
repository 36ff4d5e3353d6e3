"""User-user similarity scores over a :class:`~liracf.ratings.RatingMatrix`.

Five scores live here behind one interface: a likelihood-ratio score on the
histogram of rating differences (lira), Pearson correlation restricted to
co-rated items, cosine with full-profile norms, a Jaccard overlap ratio, and
a Bhattacharyya-weighted correlation score (bcf).

Every score has two evaluation paths.  The plain kernel functions compute a
single pair and are the reference semantics; the measure classes add a
vectorized ``row(u)`` that scores one user against all users at once through
a handful of sparse matrix-vector products, which is what the kNN predictor
and the cluster-resolution experiment run on.  Kernel and row agree to
floating-point roundoff; Pearson, cosine, and Jaccard agree bit-for-bit
because both paths reduce the same exact integer sums with the same
operations.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator

from .errors import DomainError, EmptyProfileError
from .ratings import (
    DiffHistogram,
    ItemDistribution,
    RatingMatrix,
    diff_histogram,
    item_distribution,
    user_stats,
)

__all__ = [
    "SCORE_NAMES",
    "chance_diff_probs",
    "cluster_diff_probs",
    "lira_weights",
    "lira",
    "pearson",
    "cosine",
    "jaccard",
    "bhattacharyya_coeff",
    "bcf",
    "score_pair",
    "SimilarityMeasure",
    "LiRaSimilarity",
    "PearsonSimilarity",
    "CosineSimilarity",
    "JaccardSimilarity",
    "BCFSimilarity",
    "make_similarity",
]

#: Canonical score names accepted by :func:`make_similarity` and the CLI.
SCORE_NAMES = ("lira", "pearson", "cosine", "jaccard", "bcf")


# -- difference-probability models ----------------------------------------


def chance_diff_probs(d: int) -> np.ndarray:
    """Distribution of |a - b| when a, b are independent uniform on 1..d.

    Entry 0 is 1/d (the d diagonal pairs out of d^2); entry delta is
    2(d - delta)/d^2 for delta >= 1 (the two off-diagonal bands).
    """
    if d < 2:
        raise DomainError(f"rating scale must have at least 2 values, got {d}")
    values = np.empty(d)
    values[0] = 1.0 / d
    deltas = np.arange(1, d)
    values[1:] = 2.0 * (d - deltas) / (d * d)
    return values


def cluster_diff_probs(d: int) -> np.ndarray:
    """Difference distribution claimed for users of one taste cluster.

    Each extra step of disagreement halves the probability: entry delta is
    (1/2)^(delta+1), except the last entry, which is raised to (1/2)^(d-1)
    so the vector sums to exactly 1.
    """
    if d < 2:
        raise DomainError(f"rating scale must have at least 2 values, got {d}")
    values = 0.5 ** (np.arange(d) + 1.0)
    values[d - 1] = 0.5 ** (d - 1.0)
    return values


@lru_cache(maxsize=None)
def lira_weights(d: int) -> np.ndarray:
    """Per-difference log10 likelihood ratios, cached per scale d.

    ``weights[delta]`` is what one co-rated item with absolute difference
    delta adds to the lira score.
    """
    weights = np.log10(cluster_diff_probs(d) / chance_diff_probs(d))
    weights.setflags(write=False)
    return weights


# -- pair kernels ----------------------------------------------------------


def lira(hist: DiffHistogram, d: int) -> float:
    """Log10 likelihood ratio of cluster vs chance for a difference histogram.

    Additive over histograms; an empty histogram scores 0 (no evidence).
    """
    if len(hist.counts) != d:
        raise DomainError(
            f"histogram covers {len(hist.counts)} differences, scale d={d} needs {d}")
    return float(hist.counts.astype(np.float64) @ lira_weights(d))


def _pearson_from_sums(n, su, sv, suu, svv, suv):
    """Pearson correlation from co-rated sums; works on scalars and arrays.

    The sums are exact small integers in float64, so this reduction is the
    single source of rounding for both the pair kernel and the row path,
    which makes the two paths bit-identical.  Degenerate pairs (fewer than
    two co-rated items, or zero variance on either side) come back as the
    sentinel 0 with ``defined`` False.
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        cov = suv - su * sv / n
        var_u = suu - su * su / n
        var_v = svv - sv * sv / n
        r = cov / np.sqrt(var_u * var_v)
        r = np.clip(r, -1.0, 1.0)
    defined = (n >= 2) & (var_u > 0) & (var_v > 0)
    return np.where(defined, r, 0.0), defined


def _co_rated(matrix: RatingMatrix, u: int, v: int) -> tuple[np.ndarray, np.ndarray]:
    """Rating vectors of u and v restricted to their co-rated items."""
    items_u, ratings_u = matrix.user_profile(u)
    items_v, ratings_v = matrix.user_profile(v)
    _, idx_u, idx_v = np.intersect1d(items_u, items_v,
                                     assume_unique=True, return_indices=True)
    return ratings_u[idx_u], ratings_v[idx_v]


def pearson(matrix: RatingMatrix, u: int, v: int) -> float:
    """Pearson correlation over co-rated items, means taken over those only.

    Degenerate pairs (under two co-rated items, or constant ratings on
    either side of the overlap) return the sentinel 0.
    """
    ru, rv = _co_rated(matrix, u, v)
    # np.float64 scalars so the degenerate divisions quietly produce
    # nan/inf under errstate exactly like the vectorized row path
    n = np.float64(len(ru))
    su, sv = np.float64(ru.sum()), np.float64(rv.sum())
    suu, svv = np.float64(ru @ ru), np.float64(rv @ rv)
    suv = np.float64(ru @ rv)
    value, _ = _pearson_from_sums(n, su, sv, suu, svv, suv)
    return float(value)


def cosine(matrix: RatingMatrix, u: int, v: int) -> float:
    """Cosine of the two full rating vectors, zero-filled off each profile.

    The numerator only sees co-rated items, but the norms cover each user's
    whole profile, so growing either profile outside the overlap drags the
    value down.  Positive rating values keep the result in [0, 1].
    """
    items_u, ratings_u = matrix.user_profile(u)
    items_v, ratings_v = matrix.user_profile(v)
    if len(ratings_u) == 0:
        raise EmptyProfileError(f"user {u} has no ratings")
    if len(ratings_v) == 0:
        raise EmptyProfileError(f"user {v} has no ratings")
    ru, rv = _co_rated(matrix, u, v)
    suv = float(ru @ rv)
    suu = float(ratings_u @ ratings_u)
    svv = float(ratings_v @ ratings_v)
    # single sqrt over the exact integer product: identical vectors hit 1.0,
    # and the row path reduces with the same operations bit for bit
    return suv / np.sqrt(suu * svv)


def jaccard(matrix: RatingMatrix, u: int, v: int,
            union_denominator: bool = False) -> float:
    """Overlap count over the SUM of profile sizes (default), or the union.

    The sum denominator caps the value at 1/2 (identical profiles); pass
    ``union_denominator=True`` for the conventional set-Jaccard instead.
    Two empty profiles score 0.
    """
    items_u, _ = matrix.user_profile(u)
    items_v, _ = matrix.user_profile(v)
    n_co = len(np.intersect1d(items_u, items_v, assume_unique=True))
    denom = len(items_u) + len(items_v)
    if union_denominator:
        denom -= n_co
    if denom == 0:
        return 0.0
    return n_co / denom


def bhattacharyya_coeff(dist_i: ItemDistribution, dist_j: ItemDistribution) -> float:
    """Overlap of two items' rating distributions: sum of sqrt(p_i * p_j).

    1 for identical distributions, 0 for disjoint supports.  An item with
    zero raters carries an all-zero vector and so contributes 0.
    """
    return float(np.sqrt(dist_i.probs * dist_j.probs).sum())


def _bcf_context(matrix: RatingMatrix):
    """Precompute what bcf needs: sqrt item distributions and user stats.

    Returns (phi, means, stds, counts): phi is the items-by-d matrix of
    square-rooted rating distributions (zero rows for unrated items), and
    means/stds are whole-profile per-user statistics (population stddev),
    zero-filled for users with no ratings.
    """
    d = matrix.scale_d
    raters = np.diff(matrix.item_indptr)
    item_of = np.repeat(np.arange(matrix.num_items), raters)
    counts_by_value = np.zeros((matrix.num_items, d))
    np.add.at(counts_by_value, (item_of, matrix.item_ratings - 1), 1.0)
    with np.errstate(invalid="ignore"):
        probs = counts_by_value / raters[:, None]
    probs[raters == 0] = 0.0
    phi = np.sqrt(probs)

    means = np.zeros(matrix.num_users)
    stds = np.zeros(matrix.num_users)
    for u in range(matrix.num_users):
        _, ratings = matrix.user_profile(u)
        if len(ratings):
            # same reduction as user_stats, so the sigma == 0 test below
            # agrees exactly with the per-pair statistics
            means[u] = ratings.mean()
            stds[u] = ratings.std()
    counts = np.diff(matrix.user_indptr)
    return phi, means, stds, counts


def _bcf_with_context(ctx, matrix: RatingMatrix, u: int, v: int) -> float:
    phi, means, stds, counts = ctx
    if counts[u] == 0:
        raise EmptyProfileError(f"user {u} has no ratings")
    if counts[v] == 0:
        raise EmptyProfileError(f"user {v} has no ratings")
    jac = jaccard(matrix, u, v)
    if stds[u] == 0.0 or stds[v] == 0.0:
        return jac
    items_u, ratings_u = matrix.user_profile(u)
    items_v, ratings_v = matrix.user_profile(v)
    w_u = (ratings_u - means[u]) @ phi[items_u]
    w_v = (ratings_v - means[v]) @ phi[items_v]
    return jac + float(w_u @ w_v) / (stds[u] * stds[v])


def bcf(matrix: RatingMatrix, u: int, v: int) -> float:
    """Jaccard term plus distribution-weighted correlation over item pairs.

    The correlation term couples every item i of u with every item j of v,
    weighted by how alike the two items' rating distributions are
    (:func:`bhattacharyya_coeff`) and by the product of centered ratings
    over whole-profile stats.  Since the distribution overlap factorizes
    over rating values, the double sum collapses to a d-dimensional dot
    product per user pair; the quadratic form is kept as a test oracle.
    Users with constant profiles (zero stddev) contribute only the Jaccard
    term.
    """
    return _bcf_with_context(_bcf_context(matrix), matrix, u, v)


# -- measure classes -------------------------------------------------------


def _binary_csr(matrix: RatingMatrix) -> sparse.csr_matrix:
    return sparse.csr_matrix(
        (np.ones(matrix.n_ratings), matrix.user_items, matrix.user_indptr),
        shape=(matrix.num_users, matrix.num_items))


def _ratings_csr(matrix: RatingMatrix, power: int = 1) -> sparse.csr_matrix:
    data = matrix.user_ratings.astype(np.float64) ** power
    return sparse.csr_matrix(
        (data, matrix.user_items, matrix.user_indptr),
        shape=(matrix.num_users, matrix.num_items))


class SimilarityMeasure(BaseEstimator):
    """Base class: one similarity score bound to a fitted rating matrix.

    ``fit`` precomputes whatever the score reuses across evaluations; after
    that the instance is read-only and safe to share across workers.
    ``pair`` is the reference kernel for one user pair; ``row`` scores one
    user against every user at once and substitutes the sentinel 0 where the
    score is undefined (no co-rated items, or a degenerate Pearson overlap)
    instead of raising; ``defined_row`` reports that mask.
    """

    name: str = ""

    def fit(self, matrix: RatingMatrix) -> "SimilarityMeasure":
        if not isinstance(matrix, RatingMatrix):
            raise DomainError("fit expects a RatingMatrix")
        self.matrix_ = matrix
        self._precompute(matrix)
        return self

    def _precompute(self, matrix: RatingMatrix) -> None:
        raise NotImplementedError

    def _check_fitted(self) -> RatingMatrix:
        if not hasattr(self, "matrix_"):
            raise DomainError(f"{type(self).__name__} is not fitted; call fit(matrix) first")
        return self.matrix_

    def pair(self, u: int, v: int) -> float:
        raise NotImplementedError

    def row(self, u: int) -> np.ndarray:
        raise NotImplementedError

    def defined_row(self, u: int) -> np.ndarray:
        """Boolean mask over users: True where pair (u, v) has a defined score."""
        matrix = self._check_fitted()
        bu = np.zeros(matrix.num_items)
        bu[matrix.user_profile(u)[0]] = 1.0
        return (self._binary_ @ bu) > 0

    def _dense_profile(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """Indicator and rating vectors of u over the full item axis."""
        matrix = self.matrix_
        items, ratings = matrix.user_profile(u)
        bu = np.zeros(matrix.num_items)
        ru = np.zeros(matrix.num_items)
        bu[items] = 1.0
        ru[items] = ratings
        return bu, ru


class LiRaSimilarity(SimilarityMeasure):
    """Likelihood-ratio score: sum of per-difference log10 weights.

    The row path splits the candidate side by rating value (one binary
    matrix per value b); a single matvec per value accumulates the weights
    w[|x_u - b|] over co-rated items, which reproduces the histogram dot
    product up to summation order.
    """

    name = "lira"

    def _precompute(self, matrix: RatingMatrix) -> None:
        self._binary_ = _binary_csr(matrix)
        self.weights_ = lira_weights(matrix.scale_d)
        by_value = []
        for b in range(1, matrix.scale_d + 1):
            data = (matrix.user_ratings == b).astype(np.float64)
            by_value.append(sparse.csr_matrix(
                (data, matrix.user_items, matrix.user_indptr),
                shape=(matrix.num_users, matrix.num_items)))
        self._by_value_ = by_value

    def pair(self, u: int, v: int) -> float:
        matrix = self._check_fitted()
        return lira(diff_histogram(matrix, u, v), matrix.scale_d)

    def row(self, u: int) -> np.ndarray:
        matrix = self._check_fitted()
        items_u, ratings_u = matrix.user_profile(u)
        out = np.zeros(matrix.num_users)
        g = np.zeros(matrix.num_items)
        for b in range(1, matrix.scale_d + 1):
            g[:] = 0.0
            g[items_u] = self.weights_[np.abs(ratings_u - b)]
            out += self._by_value_[b - 1] @ g
        return out


class PearsonSimilarity(SimilarityMeasure):
    """Pearson correlation over co-rated items, sentinel 0 when degenerate.

    The row path gathers the six co-rated sums (count, linear, squared,
    cross) as exact integer-valued matvecs and feeds them through the same
    closed-form reduction as the pair kernel, so the two paths agree
    bit-for-bit.
    """

    name = "pearson"

    def _precompute(self, matrix: RatingMatrix) -> None:
        self._binary_ = _binary_csr(matrix)
        self._ratings_ = _ratings_csr(matrix)
        self._squared_ = _ratings_csr(matrix, power=2)

    def pair(self, u: int, v: int) -> float:
        return pearson(self._check_fitted(), u, v)

    def _sums(self, u: int):
        bu, ru = self._dense_profile(u)
        n = self._binary_ @ bu
        su = self._binary_ @ ru
        suu = self._binary_ @ (ru * ru)
        sv = self._ratings_ @ bu
        svv = self._squared_ @ bu
        suv = self._ratings_ @ ru
        return n, su, sv, suu, svv, suv

    def row(self, u: int) -> np.ndarray:
        self._check_fitted()
        values, _ = _pearson_from_sums(*self._sums(u))
        return values

    def defined_row(self, u: int) -> np.ndarray:
        self._check_fitted()
        _, defined = _pearson_from_sums(*self._sums(u))
        return defined


class CosineSimilarity(SimilarityMeasure):
    """Cosine with co-rated numerator and full-profile norms.

    Users with empty profiles get sentinel 0 in rows (the pair kernel raises
    for them instead).
    """

    name = "cosine"

    def _precompute(self, matrix: RatingMatrix) -> None:
        self._binary_ = _binary_csr(matrix)
        self._ratings_ = _ratings_csr(matrix)
        self.sq_sums_ = np.bincount(
            np.repeat(np.arange(matrix.num_users), np.diff(matrix.user_indptr)),
            weights=matrix.user_ratings.astype(np.float64) ** 2,
            minlength=matrix.num_users)

    def pair(self, u: int, v: int) -> float:
        return cosine(self._check_fitted(), u, v)

    def row(self, u: int) -> np.ndarray:
        matrix = self._check_fitted()
        _, ru = self._dense_profile(u)
        suv = self._ratings_ @ ru
        denom = np.sqrt(self.sq_sums_[u] * self.sq_sums_)
        with np.errstate(invalid="ignore", divide="ignore"):
            values = suv / denom
        return np.where(denom > 0, values, 0.0)


class JaccardSimilarity(SimilarityMeasure):
    """Co-rated count over the sum (or union) of profile sizes."""

    name = "jaccard"

    def __init__(self, union_denominator: bool = False):
        self.union_denominator = union_denominator

    def _precompute(self, matrix: RatingMatrix) -> None:
        self._binary_ = _binary_csr(matrix)
        self.counts_ = np.diff(matrix.user_indptr).astype(np.float64)

    def pair(self, u: int, v: int) -> float:
        return jaccard(self._check_fitted(), u, v,
                       union_denominator=self.union_denominator)

    def row(self, u: int) -> np.ndarray:
        matrix = self._check_fitted()
        bu = np.zeros(matrix.num_items)
        bu[matrix.user_profile(u)[0]] = 1.0
        n = self._binary_ @ bu
        denom = self.counts_[u] + self.counts_
        if self.union_denominator:
            denom = denom - n
        with np.errstate(invalid="ignore", divide="ignore"):
            values = n / denom
        return np.where(denom > 0, values, 0.0)


class BCFSimilarity(SimilarityMeasure):
    """Jaccard plus distribution-weighted correlation term.

    fit collapses each user's profile to a d-vector W_u (centered ratings
    pushed through the sqrt item distributions); the correlation term for a
    pair is then W_u . W_v over the stddev product.
    """

    name = "bcf"

    def _precompute(self, matrix: RatingMatrix) -> None:
        self._binary_ = _binary_csr(matrix)
        self.counts_ = np.diff(matrix.user_indptr).astype(np.float64)
        ctx = _bcf_context(matrix)
        self._ctx_ = ctx
        phi, means, stds, _ = ctx
        centered = matrix.user_ratings.astype(np.float64) - np.repeat(
            means, np.diff(matrix.user_indptr))
        centered_csr = sparse.csr_matrix(
            (centered, matrix.user_items, matrix.user_indptr),
            shape=(matrix.num_users, matrix.num_items))
        self.w_ = centered_csr @ phi
        self.stds_ = stds

    def pair(self, u: int, v: int) -> float:
        return _bcf_with_context(self._ctx_, self._check_fitted(), u, v)

    def row(self, u: int) -> np.ndarray:
        matrix = self._check_fitted()
        bu = np.zeros(matrix.num_items)
        bu[matrix.user_profile(u)[0]] = 1.0
        n = self._binary_ @ bu
        denom = self.counts_[u] + self.counts_
        with np.errstate(invalid="ignore", divide="ignore"):
            jac = np.where(denom > 0, n / denom, 0.0)
            sig = self.stds_[u] * self.stds_
            corr = (self.w_ @ self.w_[u]) / sig
        return jac + np.where(sig > 0, corr, 0.0)


_MEASURES = {cls.name: cls for cls in
             (LiRaSimilarity, PearsonSimilarity, CosineSimilarity,
              JaccardSimilarity, BCFSimilarity)}


def make_similarity(name: str, **params) -> SimilarityMeasure:
    """Construct an unfitted measure by canonical name (see SCORE_NAMES)."""
    try:
        cls = _MEASURES[name]
    except KeyError:
        raise DomainError(f"unknown similarity score {name!r}; expected one of {SCORE_NAMES}")
    return cls(**params)


def fitted_measure(matrix: RatingMatrix, score) -> SimilarityMeasure:
    """Coerce a score name, unfitted measure, or fitted measure to fitted form.

    A measure already fitted on a different matrix is rejected rather than
    silently refitted, since that usually signals crossed plumbing.
    """
    if isinstance(score, str):
        return make_similarity(score).fit(matrix)
    if isinstance(score, SimilarityMeasure):
        if getattr(score, "matrix_", None) is None:
            return score.fit(matrix)
        if score.matrix_ is not matrix:
            raise DomainError("measure was fitted on a different matrix")
        return score
    raise DomainError(f"score must be a name or SimilarityMeasure, got {type(score)!r}")


def score_pair(name: str, matrix: RatingMatrix, u: int, v: int, **params) -> float:
    """One-shot dispatch: fit the named measure on matrix, score pair (u, v)."""
    return make_similarity(name, **params).fit(matrix).pair(u, v)
