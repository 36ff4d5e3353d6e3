"""Sparse discrete-rating data model, MovieLens ingestion, and splitting.

The central type is :class:`RatingMatrix`, an immutable user-by-item store of
integer ratings on a 1..d scale, kept in CSR form along both axes so that
per-user and per-item profiles are contiguous sorted arrays.  All similarity
and prediction code in the package reads from this structure.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError, EmptyProfileError, ParseError

__all__ = [
    "RatingMatrix",
    "DiffHistogram",
    "UserStats",
    "ItemDistribution",
    "FORMATS",
    "parse_ratings",
    "parse_ratings_pair",
    "diff_histogram",
    "user_stats",
    "item_distribution",
    "split_random",
]

#: Supported ratings-file formats: field separator per line
#: user / item / rating / timestamp.  Timestamps are validated and discarded.
FORMATS = {"tab": "\t", "doublecolon": "::"}

DEFAULT_SCALE = 5


@dataclass(frozen=True)
class UserStats:
    """Mean, population standard deviation, and count of one user's ratings."""

    mean: float
    stddev: float
    count: int


@dataclass(frozen=True)
class ItemDistribution:
    """Empirical distribution of one item's ratings over the scale 1..d.

    ``probs[rho - 1]`` is the fraction of the item's raters who gave value
    ``rho``.  An unrated item carries ``raters == 0`` and an all-zero vector;
    consumers must treat that case explicitly.
    """

    probs: np.ndarray
    raters: int


@dataclass(frozen=True)
class DiffHistogram:
    """Counts of absolute rating differences over a user pair's co-rated items.

    ``counts[delta]`` is the number of co-rated items on which the two users'
    ratings differ by exactly ``delta``; the vector has one slot per possible
    difference 0..d-1.
    """

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        """Number of co-rated items, i.e. the histogram mass."""
        return int(self.counts.sum())

    def __add__(self, other: "DiffHistogram") -> "DiffHistogram":
        if len(self.counts) != len(other.counts):
            raise DomainError("cannot add histograms built on different scales")
        return DiffHistogram(self.counts + other.counts)


class RatingMatrix:
    """Immutable sparse user-item matrix of integer ratings in 1..scale_d.

    Both a user-major and an item-major CSR view are materialized at
    construction: profiles come back as sorted contiguous arrays, which the
    similarity kernels rely on for linear-merge co-rated scans.  Instances
    never mutate after construction, so they are safe to share across any
    number of concurrent readers.
    """

    def __init__(
        self,
        user_indptr: np.ndarray,
        user_items: np.ndarray,
        user_ratings: np.ndarray,
        item_indptr: np.ndarray,
        item_users: np.ndarray,
        item_ratings: np.ndarray,
        scale_d: int,
        user_ids: np.ndarray,
        item_ids: np.ndarray,
    ):
        self.user_indptr = user_indptr
        self.user_items = user_items
        self.user_ratings = user_ratings
        self.item_indptr = item_indptr
        self.item_users = item_users
        self.item_ratings = item_ratings
        self.scale_d = int(scale_d)
        #: external id of each dense user / item index (for reporting)
        self.user_ids = user_ids
        self.item_ids = item_ids
        for arr in (user_indptr, user_items, user_ratings, item_indptr,
                    item_users, item_ratings, user_ids, item_ids):
            arr.setflags(write=False)
        self._user_lookup = {int(u): idx for idx, u in enumerate(user_ids)}
        self._item_lookup = {int(i): idx for idx, i in enumerate(item_ids)}

    # -- construction ---------------------------------------------------

    @classmethod
    def from_triples(
        cls,
        triples: np.ndarray | Iterable[tuple[int, int, int]],
        scale_d: int = DEFAULT_SCALE,
        num_users: int | None = None,
        num_items: int | None = None,
        user_ids: np.ndarray | None = None,
        item_ids: np.ndarray | None = None,
        _linenos: np.ndarray | None = None,
    ) -> "RatingMatrix":
        """Build a matrix from (user, item, rating) triples.

        Without explicit ``num_users``/``num_items``, external ids are
        remapped to dense 0-based indices in ascending id order and the id
        maps are retained.  With explicit dimensions the indices are taken
        as already dense (identity map), which keeps users or items with no
        surviving ratings addressable; this is what the synthetic-deletion
        code relies on.
        """
        triples = np.asarray(list(triples) if not isinstance(triples, np.ndarray) else triples,
                             dtype=np.int64)
        if triples.size == 0:
            triples = triples.reshape(0, 3)
        if triples.ndim != 2 or triples.shape[1] != 3:
            raise DomainError("triples must be an (n, 3) array of user, item, rating")
        if scale_d < 1:
            raise DomainError(f"scale_d must be positive, got {scale_d}")

        raw_users, raw_items, ratings = triples[:, 0], triples[:, 1], triples[:, 2]
        bad = (ratings < 1) | (ratings > scale_d)
        if bad.any():
            pos = int(np.flatnonzero(bad)[0])
            msg = f"rating {int(ratings[pos])} outside 1..{scale_d}"
            if _linenos is not None:
                raise ParseError(msg, int(_linenos[pos]))
            raise DomainError(msg)

        if num_users is None:
            user_ids, users = np.unique(raw_users, return_inverse=True)
            num_users = len(user_ids)
        else:
            users = raw_users
            if user_ids is None:
                user_ids = np.arange(num_users, dtype=np.int64)
            if users.size and (users.min() < 0 or users.max() >= num_users):
                raise DomainError("user index out of range for explicit num_users")
        if num_items is None:
            item_ids, items = np.unique(raw_items, return_inverse=True)
            num_items = len(item_ids)
        else:
            items = raw_items
            if item_ids is None:
                item_ids = np.arange(num_items, dtype=np.int64)
            if items.size and (items.min() < 0 or items.max() >= num_items):
                raise DomainError("item index out of range for explicit num_items")

        order = np.lexsort((items, users))
        u_sorted, i_sorted, r_sorted = users[order], items[order], ratings[order]
        dup = (u_sorted[1:] == u_sorted[:-1]) & (i_sorted[1:] == i_sorted[:-1])
        if dup.any():
            pos = int(np.flatnonzero(dup)[0])
            uid = int(user_ids[u_sorted[pos]])
            iid = int(item_ids[i_sorted[pos]])
            msg = f"duplicate rating for user {uid}, item {iid}"
            if _linenos is not None:
                raise ParseError(msg, int(_linenos[order[pos + 1]]))
            raise DomainError(msg)

        user_indptr = np.zeros(num_users + 1, dtype=np.int64)
        np.cumsum(np.bincount(u_sorted, minlength=num_users), out=user_indptr[1:])

        iorder = np.lexsort((u_sorted, i_sorted))
        item_indptr = np.zeros(num_items + 1, dtype=np.int64)
        np.cumsum(np.bincount(i_sorted, minlength=num_items), out=item_indptr[1:])

        return cls(
            user_indptr=user_indptr,
            user_items=np.ascontiguousarray(i_sorted, dtype=np.int64),
            user_ratings=np.ascontiguousarray(r_sorted, dtype=np.int64),
            item_indptr=item_indptr,
            item_users=np.ascontiguousarray(u_sorted[iorder], dtype=np.int64),
            item_ratings=np.ascontiguousarray(r_sorted[iorder], dtype=np.int64),
            scale_d=scale_d,
            user_ids=np.asarray(user_ids, dtype=np.int64),
            item_ids=np.asarray(item_ids, dtype=np.int64),
        )

    # -- shape and access -----------------------------------------------

    @property
    def num_users(self) -> int:
        return len(self.user_indptr) - 1

    @property
    def num_items(self) -> int:
        return len(self.item_indptr) - 1

    @property
    def n_ratings(self) -> int:
        return len(self.user_items)

    def check_user(self, u: int) -> int:
        if not 0 <= u < self.num_users:
            raise DomainError(f"user index {u} out of range 0..{self.num_users - 1}")
        return u

    def check_item(self, i: int) -> int:
        if not 0 <= i < self.num_items:
            raise DomainError(f"item index {i} out of range 0..{self.num_items - 1}")
        return i

    def user_profile(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted item indices and matching ratings of user ``u``."""
        self.check_user(u)
        lo, hi = self.user_indptr[u], self.user_indptr[u + 1]
        return self.user_items[lo:hi], self.user_ratings[lo:hi]

    def item_profile(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted user indices and matching ratings of item ``i``."""
        self.check_item(i)
        lo, hi = self.item_indptr[i], self.item_indptr[i + 1]
        return self.item_users[lo:hi], self.item_ratings[lo:hi]

    def user_count(self, u: int) -> int:
        return int(self.user_indptr[u + 1] - self.user_indptr[u])

    def item_count(self, i: int) -> int:
        return int(self.item_indptr[i + 1] - self.item_indptr[i])

    def global_mean(self) -> float:
        if self.n_ratings == 0:
            raise EmptyProfileError("matrix holds no ratings")
        return float(self.user_ratings.mean())

    def triples(self) -> np.ndarray:
        """All (user, item, rating) triples as an (n, 3) array, user-major."""
        users = np.repeat(np.arange(self.num_users), np.diff(self.user_indptr))
        return np.column_stack([users, self.user_items, self.user_ratings])

    def user_index(self, external_id: int) -> int:
        """Dense index of an external user id, or raise ``KeyError``."""
        return self._user_lookup[int(external_id)]

    def item_index(self, external_id: int) -> int:
        return self._item_lookup[int(external_id)]

    def __repr__(self) -> str:
        return (f"RatingMatrix({self.num_users} users x {self.num_items} items, "
                f"{self.n_ratings} ratings, scale 1..{self.scale_d})")


# -- parsing -------------------------------------------------------------


def _iter_lines(source) -> Iterable[tuple[int, str]]:
    """Yield (1-based line number, stripped line), skipping blank lines."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from _iter_lines(fh)
        return
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, io.IOBase) and not isinstance(source, io.TextIOBase):
        source = io.TextIOWrapper(source, encoding="utf-8")
    for lineno, line in enumerate(source, start=1):
        line = line.strip("\r\n")
        if line.strip():
            yield lineno, line


def _parse_raw(source, fmt: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse a ratings stream into raw (user, item, rating) triples.

    Returns the (n, 3) triple array and the matching 1-based line numbers.
    Field-count and integer-conversion problems raise :class:`ParseError`
    with the offending line; range and duplicate checks happen later, when
    the matrix is assembled.
    """
    try:
        sep = FORMATS[fmt]
    except KeyError:
        raise DomainError(f"unknown ratings format {fmt!r}; expected one of {sorted(FORMATS)}")
    users, items, ratings, linenos = [], [], [], []
    for lineno, line in _iter_lines(source):
        parts = line.split(sep)
        if len(parts) != 4:
            raise ParseError(f"expected 4 {fmt}-separated fields, got {len(parts)}", lineno)
        try:
            u, i, r = int(parts[0]), int(parts[1]), int(parts[2])
            int(parts[3])  # timestamp: validated, then discarded
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno)
        users.append(u)
        items.append(i)
        ratings.append(r)
        linenos.append(lineno)
    triples = np.array([users, items, ratings], dtype=np.int64).T
    return triples.reshape(-1, 3), np.asarray(linenos, dtype=np.int64)


def parse_ratings(source, fmt: str = "tab", scale_d: int = DEFAULT_SCALE) -> RatingMatrix:
    """Parse a MovieLens-style ratings file into a :class:`RatingMatrix`.

    ``fmt`` selects the line layout: ``"tab"`` for
    ``user<TAB>item<TAB>rating<TAB>timestamp`` (100K style) or
    ``"doublecolon"`` for ``user::item::rating::timestamp`` (1M style).
    ``source`` may be a path, bytes, or an open file.  External ids are
    remapped to dense indices; the original ids stay available through
    ``user_ids`` / ``item_ids`` on the result.
    """
    triples, linenos = _parse_raw(source, fmt)
    return RatingMatrix.from_triples(triples, scale_d=scale_d, _linenos=linenos)


def parse_ratings_pair(
    train_source,
    test_source,
    fmt: str = "tab",
    scale_d: int = DEFAULT_SCALE,
) -> tuple[RatingMatrix, np.ndarray]:
    """Parse a train/test file pair against one shared dense index space.

    The id maps cover the union of both files, so test triples refer to
    valid indices even for users or items that never appear in training
    (those fall to the predictor's fallback chain).  Returns the training
    matrix and the test triples as an (n, 3) dense-index array.
    """
    train_raw, train_lines = _parse_raw(train_source, fmt)
    test_raw, test_lines = _parse_raw(test_source, fmt)

    user_ids = np.unique(np.concatenate([train_raw[:, 0], test_raw[:, 0]]))
    item_ids = np.unique(np.concatenate([train_raw[:, 1], test_raw[:, 1]]))

    def densify(raw, lines):
        out = raw.copy()
        out[:, 0] = np.searchsorted(user_ids, raw[:, 0])
        out[:, 1] = np.searchsorted(item_ids, raw[:, 1])
        bad = (raw[:, 2] < 1) | (raw[:, 2] > scale_d)
        if bad.any():
            pos = int(np.flatnonzero(bad)[0])
            raise ParseError(f"rating {int(raw[pos, 2])} outside 1..{scale_d}",
                             int(lines[pos]))
        return out

    train = densify(train_raw, train_lines)
    test = densify(test_raw, test_lines)
    matrix = RatingMatrix.from_triples(
        train,
        scale_d=scale_d,
        num_users=len(user_ids),
        num_items=len(item_ids),
        user_ids=user_ids,
        item_ids=item_ids,
        _linenos=train_lines,
    )
    return matrix, test


# -- per-user / per-item statistics ---------------------------------------


def diff_histogram(matrix: RatingMatrix, u: int, v: int) -> DiffHistogram:
    """Histogram of absolute rating differences over items rated by both users.

    Items observed by only one of the pair contribute nothing; two disjoint
    profiles yield the all-zero histogram.
    """
    items_u, ratings_u = matrix.user_profile(u)
    items_v, ratings_v = matrix.user_profile(v)
    _, idx_u, idx_v = np.intersect1d(items_u, items_v,
                                     assume_unique=True, return_indices=True)
    diffs = np.abs(ratings_u[idx_u] - ratings_v[idx_v])
    return DiffHistogram(np.bincount(diffs, minlength=matrix.scale_d))


def user_stats(matrix: RatingMatrix, u: int) -> UserStats:
    """Mean and population standard deviation over all of one user's ratings."""
    _, ratings = matrix.user_profile(u)
    if len(ratings) == 0:
        raise EmptyProfileError(f"user {u} has no ratings")
    # population (ddof=0) form: a single rating gives stddev 0, not NaN
    return UserStats(mean=float(ratings.mean()),
                     stddev=float(ratings.std()),
                     count=len(ratings))


def item_distribution(matrix: RatingMatrix, i: int) -> ItemDistribution:
    """Empirical rating distribution of one item; all-zero when unrated."""
    _, ratings = matrix.item_profile(i)
    d = matrix.scale_d
    if len(ratings) == 0:
        return ItemDistribution(probs=np.zeros(d), raters=0)
    counts = np.bincount(ratings - 1, minlength=d)
    return ItemDistribution(probs=counts / len(ratings), raters=len(ratings))


# -- splitting -------------------------------------------------------------


def split_random(
    matrix: RatingMatrix, test_fraction: float, seed: int
) -> tuple[RatingMatrix, np.ndarray]:
    """Split ratings into train matrix and test triples, Bernoulli per triple.

    Every triple lands in the test set independently with probability
    ``test_fraction``; the remainder forms the training matrix.  The split is
    a partition (disjoint, union preserving) and is deterministic for a fixed
    seed.  The training matrix keeps the parent's dimensions and id maps, so
    test indices stay valid against it.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DomainError(f"test_fraction must be in (0, 1), got {test_fraction}")
    triples = matrix.triples()
    rng = np.random.default_rng(seed)
    in_test = rng.random(len(triples)) < test_fraction
    train = RatingMatrix.from_triples(
        triples[~in_test],
        scale_d=matrix.scale_d,
        num_users=matrix.num_users,
        num_items=matrix.num_items,
        user_ids=matrix.user_ids,
        item_ids=matrix.item_ids,
    )
    return train, triples[in_test]
