"""Similarity kernels, their vectorized row counterparts, and the estimators."""

import math
from fractions import Fraction

import numpy as np
import pytest

from liracf.errors import DomainError, EmptyProfileError
from liracf.ratings import (
    DiffHistogram,
    RatingMatrix,
    diff_histogram,
    item_distribution,
)
from liracf.similarity import (
    SCORE_NAMES,
    bcf,
    bhattacharyya_coeff,
    chance_diff_probs,
    cluster_diff_probs,
    cosine,
    jaccard,
    lira,
    lira_weights,
    make_similarity,
    pearson,
    score_pair,
)

KERNELS = {
    "lira": lambda m, u, v: lira(diff_histogram(m, u, v), m.scale_d),
    "pearson": pearson,
    "cosine": cosine,
    "jaccard": jaccard,
    "bcf": bcf,
}


def exact_chance_probs(d):
    """Brute-force chance model: both ratings uniform and independent on 1..d."""
    probs = [Fraction(0)] * d
    for a in range(1, d + 1):
        for b in range(1, d + 1):
            probs[abs(a - b)] += Fraction(1, d * d)
    return probs


class TestDiffModels:
    def test_chance_matches_exhaustive_enumeration(self):
        for d in range(2, 13):
            expected = exact_chance_probs(d)
            got = chance_diff_probs(d)
            for delta in range(d):
                assert got[delta] == float(expected[delta]), (d, delta)

    def test_chance_d5_frozen(self):
        np.testing.assert_array_equal(chance_diff_probs(5),
                                      [0.2, 0.32, 0.24, 0.16, 0.08])

    def test_cluster_d5_frozen(self):
        np.testing.assert_array_equal(cluster_diff_probs(5),
                                      [0.5, 0.25, 0.125, 0.0625, 0.0625])

    def test_cluster_halving_with_doubled_tail(self):
        for d in range(2, 13):
            probs = cluster_diff_probs(d)
            for delta in range(d - 1):
                assert probs[delta] == 0.5 ** (delta + 1)
            assert probs[d - 1] == 0.5 ** (d - 1)

    def test_both_sum_to_one(self):
        for d in range(2, 13):
            assert math.fsum(chance_diff_probs(d)) == pytest.approx(1.0, abs=1e-12)
            assert math.fsum(cluster_diff_probs(d)) == pytest.approx(1.0, abs=1e-12)

    def test_small_scale_rejected(self):
        for fn in (chance_diff_probs, cluster_diff_probs, lira_weights):
            with pytest.raises(DomainError):
                fn(1)

    def test_weights_are_log_ratios(self):
        for d in (2, 5, 10):
            w = lira_weights(d)
            expected = np.log10(cluster_diff_probs(d) / chance_diff_probs(d))
            np.testing.assert_array_equal(w, expected)

    def test_weight_sign_flips_with_scale(self):
        # a one-step difference is evidence against same-cluster on a 5-point
        # scale (0.32 > 0.25) but for it on a 10-point scale (0.18 < 0.25)
        assert chance_diff_probs(5)[1] == 0.32
        assert chance_diff_probs(10)[1] == pytest.approx(0.18)
        assert lira_weights(5)[1] < 0
        assert lira_weights(10)[1] > 0


class TestLira:
    def test_three_exact_matches(self):
        h = DiffHistogram(np.array([3, 0, 0, 0, 0]))
        assert lira(h, 5) == pytest.approx(1.1938200260161127, rel=1e-15)

    def test_doubling_matches_doubles_score(self):
        h3 = DiffHistogram(np.array([3, 0, 0, 0, 0]))
        h6 = DiffHistogram(np.array([6, 0, 0, 0, 0]))
        assert lira(h6, 5) == 2.0 * lira(h3, 5)

    def test_identical_profiles_closed_form(self):
        # t exact matches contribute t*log10(d/2) each scale
        for d in (2, 5, 10):
            for t in (1, 4, 9):
                counts = np.zeros(d, dtype=int)
                counts[0] = t
                assert lira(DiffHistogram(counts), d) == pytest.approx(
                    t * math.log10(d / 2.0), rel=1e-12)

    def test_additive_over_histograms(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            d = int(rng.integers(2, 9))
            a = DiffHistogram(rng.integers(0, 5, size=d))
            b = DiffHistogram(rng.integers(0, 5, size=d))
            assert lira(a + b, d) == pytest.approx(lira(a, d) + lira(b, d),
                                                   rel=1e-12, abs=1e-12)

    def test_empty_histogram_scores_zero(self):
        assert lira(DiffHistogram(np.zeros(5, dtype=int)), 5) == 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(DomainError):
            lira(DiffHistogram(np.array([1, 0])), 5)


class TestPairKernels:
    def test_pearson_perfect_agreement(self):
        m = RatingMatrix.from_triples(
            [(0, 0, 1), (0, 1, 3), (0, 2, 5), (1, 0, 1), (1, 1, 3), (1, 2, 5)],
            scale_d=5)
        assert pearson(m, 0, 1) == 1.0

    def test_pearson_perfect_disagreement(self):
        m = RatingMatrix.from_triples(
            [(0, 0, 1), (0, 1, 5), (1, 0, 5), (1, 1, 1)], scale_d=5)
        assert pearson(m, 0, 1) == -1.0

    def test_pearson_degenerate_cases_sentinel_zero(self):
        # one co-rated item; constant profile; no overlap
        m = RatingMatrix.from_triples(
            [(0, 0, 1), (0, 1, 2), (1, 0, 5), (2, 1, 3), (2, 2, 3),
             (3, 1, 4), (3, 2, 4)], scale_d=5)
        assert pearson(m, 0, 1) == 0.0   # single co-rated item
        assert pearson(m, 2, 3) == 0.0   # user 2 has zero variance
        assert pearson(m, 1, 3) == 0.0   # no overlap

    def test_cosine_worked_example(self):
        # overlap dot 9, full norms 3 and 5
        m = RatingMatrix.from_triples(
            [(0, 0, 1), (0, 1, 2), (0, 2, 2), (1, 0, 1), (1, 1, 4),
             (1, 3, 2), (1, 4, 2)], scale_d=5)
        assert cosine(m, 0, 1) == pytest.approx(9.0 / 15.0, rel=1e-15)

    def test_cosine_identical_profiles_exactly_one(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            n = int(rng.integers(1, 12))
            items = np.arange(n)
            ratings = rng.integers(1, 6, size=n)
            triples = [(u, int(i), int(r)) for u in (0, 1)
                       for i, r in zip(items, ratings)]
            m = RatingMatrix.from_triples(triples, scale_d=5)
            assert cosine(m, 0, 1) == 1.0

    def test_cosine_empty_profile_raises(self):
        m = RatingMatrix.from_triples([(0, 0, 3)], scale_d=5,
                                      num_users=2, num_items=1)
        with pytest.raises(EmptyProfileError):
            cosine(m, 0, 1)

    def test_cosine_no_overlap_is_zero(self):
        m = RatingMatrix.from_triples([(0, 0, 3), (1, 1, 4)], scale_d=5)
        assert cosine(m, 0, 1) == 0.0

    def test_jaccard_worked_example(self):
        # 1 shared item, profile sizes 2 and 4 -> 1/6
        m = RatingMatrix.from_triples(
            [(0, 0, 1), (0, 1, 2), (1, 1, 4), (1, 2, 2), (1, 3, 3), (1, 4, 1)],
            scale_d=5)
        assert jaccard(m, 0, 1) == pytest.approx(1.0 / 6.0, rel=1e-15)
        # union denominator variant: 1 / |{0..4}| = 1/5
        assert jaccard(m, 0, 1, union_denominator=True) == pytest.approx(0.2)

    def test_jaccard_identical_profiles_cap_half(self):
        m = RatingMatrix.from_triples(
            [(0, 0, 1), (0, 1, 2), (1, 0, 1), (1, 1, 2)], scale_d=5)
        assert jaccard(m, 0, 1) == 0.5
        assert jaccard(m, 0, 1, union_denominator=True) == 1.0

    def test_jaccard_both_empty_is_zero(self):
        m = RatingMatrix.from_triples([(0, 0, 3)], scale_d=5,
                                      num_users=3, num_items=1)
        assert jaccard(m, 1, 2) == 0.0
        assert jaccard(m, 1, 2, union_denominator=True) == 0.0

    def test_symmetry_all_scores(self, matrix_factory):
        rng = np.random.default_rng(42)
        for _ in range(30):
            m = matrix_factory(rng, m=6, n=8, density=0.6)
            users = [(u, v) for u in range(6) for v in range(u, 6)
                     if m.user_count(u) and m.user_count(v)]
            for name, kernel in KERNELS.items():
                for u, v in users:
                    assert kernel(m, u, v) == kernel(m, v, u), name

    def test_ranges(self, matrix_factory):
        rng = np.random.default_rng(7)
        for _ in range(30):
            m = matrix_factory(rng, m=6, n=8, density=0.6)
            for u in range(6):
                for v in range(6):
                    if not (m.user_count(u) and m.user_count(v)):
                        continue
                    assert -1.0 <= pearson(m, u, v) <= 1.0
                    assert 0.0 <= cosine(m, u, v) <= 1.0
                    assert 0.0 <= jaccard(m, u, v) <= 0.5


class TestBhattacharyya:
    def test_identical_distributions_give_one(self):
        m = RatingMatrix.from_triples([(0, 0, 2), (1, 0, 2), (0, 1, 2)], scale_d=5)
        di = item_distribution(m, 0)
        dj = item_distribution(m, 1)
        assert bhattacharyya_coeff(di, di) == pytest.approx(1.0)
        # item 0: half mass matches item 1's point mass at rating 2
        assert bhattacharyya_coeff(di, dj) == pytest.approx(1.0)

    def test_half_overlap(self):
        m = RatingMatrix.from_triples(
            [(0, 0, 1), (1, 0, 2), (0, 1, 2), (1, 1, 2)], scale_d=5)
        # item 0 splits {1: .5, 2: .5}; item 1 is all at 2
        got = bhattacharyya_coeff(item_distribution(m, 0), item_distribution(m, 1))
        assert got == pytest.approx(math.sqrt(0.5), rel=1e-15)

    def test_disjoint_supports_give_zero(self):
        m = RatingMatrix.from_triples([(0, 0, 1), (0, 1, 5)], scale_d=5)
        assert bhattacharyya_coeff(item_distribution(m, 0),
                                   item_distribution(m, 1)) == 0.0

    def test_unrated_item_contributes_zero(self):
        m = RatingMatrix.from_triples([(0, 0, 3)], scale_d=5,
                                      num_users=1, num_items=2)
        assert bhattacharyya_coeff(item_distribution(m, 0),
                                   item_distribution(m, 1)) == 0.0
        assert 0.0 <= bhattacharyya_coeff(item_distribution(m, 1),
                                          item_distribution(m, 1)) == 0.0


def bcf_oracle(matrix, u, v):
    """Independent double-loop route over all item pairs, including i == j."""
    iu, ru = matrix.user_profile(u)
    iv, rv = matrix.user_profile(v)
    if len(iu) == 0 or len(iv) == 0:
        raise EmptyProfileError("empty")
    jac = len(np.intersect1d(iu, iv)) / (len(iu) + len(iv))
    mu, su = np.mean(ru), np.std(ru)
    mv, sv = np.mean(rv), np.std(rv)
    if su == 0.0 or sv == 0.0:
        return jac
    total = 0.0
    for i, x_ui in zip(iu, ru):
        for j, x_vj in zip(iv, rv):
            bc = bhattacharyya_coeff(item_distribution(matrix, int(i)),
                                     item_distribution(matrix, int(j)))
            total += bc * (x_ui - mu) * (x_vj - mv) / (su * sv)
    return jac + total


class TestBCF:
    def test_matches_double_loop_oracle(self, matrix_factory):
        rng = np.random.default_rng(42)
        for _ in range(25):
            m = matrix_factory(rng, m=5, n=7, density=0.7)
            for u in range(5):
                for v in range(u + 1, 5):
                    if not (m.user_count(u) and m.user_count(v)):
                        continue
                    assert bcf(m, u, v) == pytest.approx(
                        bcf_oracle(m, u, v), rel=1e-10, abs=1e-12)

    def test_zero_variance_falls_back_to_jaccard(self):
        m = RatingMatrix.from_triples(
            [(0, 0, 3), (0, 1, 3), (1, 0, 1), (1, 1, 5), (1, 2, 3)], scale_d=5)
        assert bcf(m, 0, 1) == jaccard(m, 0, 1)

    def test_single_shared_item_profiles(self):
        # both users rate exactly one common item: correlation term dies
        # (both stddevs zero) leaving jaccard 1/2
        m = RatingMatrix.from_triples([(0, 0, 2), (1, 0, 5)], scale_d=5)
        assert bcf(m, 0, 1) == 0.5

    def test_empty_profile_raises(self):
        m = RatingMatrix.from_triples([(0, 0, 3)], scale_d=5,
                                      num_users=2, num_items=1)
        with pytest.raises(EmptyProfileError):
            bcf(m, 0, 1)


class TestMeasureObjects:
    def test_registry_covers_all_names(self):
        assert set(SCORE_NAMES) == {"lira", "pearson", "cosine", "jaccard", "bcf"}
        for name in SCORE_NAMES:
            assert make_similarity(name).name == name

    def test_unknown_name_rejected(self):
        with pytest.raises(DomainError, match="unknown"):
            make_similarity("tanimoto")

    def test_pair_before_fit_rejected(self):
        with pytest.raises(DomainError):
            make_similarity("lira").pair(0, 1)

    def test_get_params_roundtrip(self):
        meas = make_similarity("jaccard", union_denominator=True)
        assert meas.get_params() == {"union_denominator": True}
        assert meas.set_params(union_denominator=False).pair is not None

    def test_score_pair_matches_kernels_bitwise(self, matrix_factory):
        rng = np.random.default_rng(42)
        for _ in range(20):
            m = matrix_factory(rng, m=6, n=9, density=0.7)
            for name, kernel in KERNELS.items():
                for u in range(6):
                    for v in range(6):
                        if not (m.user_count(u) and m.user_count(v)):
                            continue
                        assert score_pair(name, m, u, v) == kernel(m, u, v)

    def test_rows_match_pairs(self, matrix_factory):
        rng = np.random.default_rng(42)
        exact = {"pearson", "cosine", "jaccard"}
        for _ in range(15):
            m = matrix_factory(rng, m=7, n=9, density=0.6)
            for name in SCORE_NAMES:
                meas = make_similarity(name).fit(m)
                for u in range(7):
                    if m.user_count(u) == 0:
                        continue
                    row = meas.row(u)
                    defined = meas.defined_row(u)
                    assert row.shape == (7,)
                    for v in range(7):
                        if m.user_count(v) == 0:
                            assert not defined[v]
                            assert row[v] == 0.0
                            continue
                        expected = meas.pair(u, v)
                        if name in exact:
                            assert row[v] == expected, (name, u, v)
                        else:
                            assert row[v] == pytest.approx(expected, rel=1e-11,
                                                           abs=1e-12)

    def test_defined_row_semantics(self):
        m = RatingMatrix.from_triples(
            [(0, 0, 1), (0, 1, 2), (1, 0, 5), (2, 1, 3), (2, 2, 3),
             (3, 1, 4), (3, 2, 4)], scale_d=5, num_users=5, num_items=3)
        for name in ("lira", "cosine", "jaccard", "bcf"):
            meas = make_similarity(name).fit(m)
            defined = meas.defined_row(0)
            # any co-rated item suffices; user 4 is empty
            assert defined.tolist() == [True, True, True, True, False]
        pmeas = make_similarity("pearson").fit(m)
        # pearson additionally needs >= 2 co-rated items and variance on
        # both sides; only the self pair of user 0 clears that bar here
        assert pmeas.defined_row(0).tolist() == [True, False, False, False, False]
        assert pmeas.defined_row(2).tolist() == [False] * 5  # constant ratings

    def test_fit_rejects_empty_matrix_user_queries(self):
        m = RatingMatrix.from_triples([(0, 0, 3)], scale_d=5)
        meas = make_similarity("cosine").fit(m)
        with pytest.raises(DomainError):
            meas.row(5)
