import itertools

import numpy as np
import pytest

from src.models.mv_dissect import (
    IntervalModel,
    TwoVsOneTest,
    lod2_partition,
    mv_fit,
    mv_lod,
    mv_scan1,
    mv_scan2_cut,
    order_traits,
    test_2v1 as two_vs_one,
)
from src.models.regression import null_design, position_design
from src.models.scan import scan1
from src.utils.classes import CovariateSet, Interval
from src.utils.errors import InputError

WHOLE = Interval("1", 0.0, 100.0)


@pytest.fixture(scope="module")
def two_qtl_model(two_qtl_cross, two_qtl_genoprob):
    return IntervalModel(two_qtl_genoprob, two_qtl_cross.covariates, WHOLE)


def direct_two_qtl_lod(Y, X1, X2, X0, c):
    """LOD of the two-QTL model from explicit least-squares residuals."""
    def residuals(X, block):
        beta, *_ = np.linalg.lstsq(X, block, rcond=None)
        return block - X @ beta

    E = np.hstack([residuals(X1, Y[:, :c]), residuals(X2, Y[:, c:])])
    E0 = residuals(X0, Y)
    n = Y.shape[0]
    return n / 2 * (np.log10(np.linalg.det(E0.T @ E0)) - np.log10(np.linalg.det(E.T @ E)))


def test_mv_fit_and_lod_match_determinants(two_qtl_cross, two_qtl_genoprob):
    Y = two_qtl_cross.phenotypes
    X0 = null_design(two_qtl_cross.covariates)
    X1 = position_design(two_qtl_genoprob, "1", 10, two_qtl_cross.covariates)
    null, alt = mv_fit(Y, X0), mv_fit(Y, X1)
    assert (alt.n, alt.p, alt.q) == (150, 6, 3)
    assert alt.log10_det_rss == pytest.approx(np.log10(np.linalg.det(alt.rss)), abs=1e-9)
    assert mv_lod(null, alt) == pytest.approx(direct_two_qtl_lod(Y, X1, X1, X0, 3), abs=1e-8)


def test_single_trait_reduces_to_univariate_scan(two_qtl_cross, two_qtl_genoprob, two_qtl_model):
    for j in range(two_qtl_cross.phenotypes.shape[1]):
        y = two_qtl_cross.phenotypes[:, [j]]
        multivariate = np.maximum(two_qtl_model.single_qtl_curve(two_qtl_model.prepare(y)), 0.0)
        univariate = scan1(y[:, 0], two_qtl_genoprob, two_qtl_cross.covariates).lod["1"]
        np.testing.assert_allclose(multivariate, univariate, atol=1e-8)


def test_pair_lod_matches_direct_fit(two_qtl_cross, two_qtl_genoprob, two_qtl_model):
    Y = two_qtl_cross.phenotypes
    state = two_qtl_model.prepare(Y)
    X0 = null_design(two_qtl_cross.covariates)
    for first, second, c in [(10, 16, 3), (3, 18, 1), (12, 5, 4)]:
        fast = two_qtl_model.two_qtl_lod(state, np.array([first]), np.array([second]), c)[0]
        X1 = position_design(two_qtl_genoprob, "1", first, two_qtl_cross.covariates)
        X2 = position_design(two_qtl_genoprob, "1", second, two_qtl_cross.covariates)
        assert fast == pytest.approx(direct_two_qtl_lod(Y, X1, X2, X0, c), abs=1e-8)


def test_same_position_pair_equals_single_qtl_lod(two_qtl_cross, two_qtl_model):
    state = two_qtl_model.prepare(two_qtl_cross.phenotypes)
    single = two_qtl_model.single_qtl_curve(state)
    everywhere = np.arange(two_qtl_model.n_positions)
    for c in range(1, 6):
        np.testing.assert_allclose(two_qtl_model.two_qtl_lod(state, everywhere, everywhere, c), single, atol=1e-9)


def test_two_qtl_split_is_recovered(two_qtl_cross, two_qtl_genoprob, two_qtl_model):
    shuffled = [4, 0, 5, 2, 1, 3]
    Y = two_qtl_cross.phenotypes[:, shuffled]
    ids = [two_qtl_cross.trait_ids[j] for j in shuffled]
    result = two_vs_one(Y, two_qtl_genoprob, two_qtl_cross.covariates, WHOLE, ids, mode="exhaustive", model=two_qtl_model)
    assert result.c_hat == 3
    assert abs(result.lambda1_hat - 50.0) <= 10.0
    assert abs(result.lambda2_hat - 80.0) <= 10.0
    assert result.lod_2v1 > 3.0
    assert np.argmax(result.per_cutpoint_lod_2v1) + 1 == result.c_hat
    assert result.per_cutpoint_lod_2v1.max() == pytest.approx(result.lod_2v1)
    left = {t["id"] for t in result.to_dict()["traits"] if t["side"] == "left"}
    assert left == {"trait1", "trait2", "trait3"}


def test_single_qtl_gives_smaller_statistic(single_qtl_cross, single_qtl_genoprob, two_qtl_cross, two_qtl_model):
    null = two_vs_one(single_qtl_cross.phenotypes, single_qtl_genoprob, single_qtl_cross.covariates, WHOLE)
    alternative = TwoVsOneTest(two_qtl_model).run(two_qtl_cross.phenotypes)
    assert 0.0 <= null.lod_2v1 < alternative.lod_2v1
    assert null.M2 >= null.M1


def test_coordinate_search_matches_exhaustive(two_qtl_cross, two_qtl_model):
    Y = two_qtl_cross.phenotypes
    exhaustive = TwoVsOneTest(two_qtl_model, mode="exhaustive").run(Y)
    coordinate = TwoVsOneTest(two_qtl_model, mode="coordinate", starts=5).run(Y)
    assert coordinate.M2 == pytest.approx(exhaustive.M2, abs=1e-6)
    assert coordinate.M1 == exhaustive.M1
    for cut_c, cut_e in zip(coordinate.per_cutpoint, exhaustive.per_cutpoint):
        assert cut_c.M2_c <= cut_e.M2_c + 1e-9


def test_cut_points_match_all_partitions(two_qtl_cross, two_qtl_model):
    Y = two_qtl_cross.phenotypes[:, [0, 1, 3, 4]]
    result = TwoVsOneTest(two_qtl_model, mode="exhaustive").run(Y)
    partitions = [(True, *rest) for rest in itertools.product([True, False], repeat=3)]
    best = max(lod2_partition(Y, two_qtl_model, mask) for mask in partitions)
    assert len(partitions) == 8
    assert result.M2 == pytest.approx(best, abs=1e-8)


def test_profiles_pass_through_maximum(two_qtl_cross, two_qtl_model):
    result = TwoVsOneTest(two_qtl_model, mode="coordinate").run(two_qtl_cross.phenotypes)
    i1 = int(np.flatnonzero(result.positions == result.lambda1_hat)[0])
    i2 = int(np.flatnonzero(result.positions == result.lambda2_hat)[0])
    assert result.profile_left[i1] == pytest.approx(result.M2, abs=1e-10)
    assert result.profile_right[i2] == pytest.approx(result.M2, abs=1e-10)
    assert np.all(result.profile_left <= result.M2 + 1e-9)


def test_scan_wrappers(two_qtl_cross, two_qtl_genoprob):
    Y = two_qtl_cross.phenotypes
    single = mv_scan1(Y, two_qtl_genoprob, two_qtl_cross.covariates, WHOLE)
    cut = mv_scan2_cut(Y, two_qtl_genoprob, two_qtl_cross.covariates, WHOLE, 3, mode="exhaustive")
    assert single.M1 == pytest.approx(single.lod.max())
    assert cut.M2_c >= single.M1 - 1e-9
    with pytest.raises(InputError):
        mv_scan2_cut(Y, two_qtl_genoprob, two_qtl_cross.covariates, WHOLE, 6)


def test_single_position_interval_has_zero_statistic(two_qtl_cross, two_qtl_genoprob):
    result = two_vs_one(two_qtl_cross.phenotypes, two_qtl_genoprob, two_qtl_cross.covariates, Interval("1", 50.0, 50.0))
    assert result.lod_2v1 == pytest.approx(0.0, abs=1e-9)


def test_too_many_traits(two_qtl_genoprob, two_qtl_cross):
    Y = np.random.default_rng(0).normal(size=(150, 146))
    with pytest.raises(InputError, match="too many"):
        mv_scan1(Y, two_qtl_genoprob, two_qtl_cross.covariates, WHOLE)


def test_order_traits_is_stable_under_seed():
    positions = [30.0, 10.0, 30.0, 20.0, 30.0]
    first = order_traits(list("abcde"), positions, seed=7)
    again = order_traits(list("abcde"), positions, seed=7)
    assert first.trait_ids == again.trait_ids
    assert first.trait_ids[:2] == ["b", "d"]
    assert sorted(first.trait_ids[2:]) == ["a", "c", "e"]
    assert np.all(np.diff(first.positions) >= 0)


def test_same_seed_same_report(two_qtl_cross, two_qtl_model):
    first = TwoVsOneTest(two_qtl_model, seed=3).run(two_qtl_cross.phenotypes).to_dict()
    second = TwoVsOneTest(two_qtl_model, seed=3).run(two_qtl_cross.phenotypes).to_dict()
    assert first == second
    expected = {"M1", "lambda_1qtl", "M2", "c_hat", "lambda1", "lambda2", "lod_2v1", "seed", "per_cutpoint", "profiles", "traits"}
    assert set(first) >= expected


def test_mv_lod_ignores_trait_column_order(two_qtl_cross, two_qtl_genoprob):
    Y = two_qtl_cross.phenotypes
    X0 = null_design(two_qtl_cross.covariates)
    X1 = position_design(two_qtl_genoprob, "1", 12, two_qtl_cross.covariates)
    permuted = Y[:, [5, 2, 0, 4, 1, 3]]
    assert mv_lod(mv_fit(permuted, X0), mv_fit(permuted, X1)) == pytest.approx(mv_lod(mv_fit(Y, X0), mv_fit(Y, X1)), abs=1e-9)


def test_exhaustive_scan_is_symmetric_under_reversal(two_qtl_cross, two_qtl_model):
    Y = two_qtl_cross.phenotypes
    p = Y.shape[1]
    test = TwoVsOneTest(two_qtl_model, mode="exhaustive")
    forward = test.exhaustive_cuts(two_qtl_model.prepare(Y), range(1, p))
    backward = test.exhaustive_cuts(two_qtl_model.prepare(Y[:, ::-1]), range(1, p))
    for cut in forward:
        mirrored = backward[p - cut.c - 1]
        assert mirrored.c == p - cut.c
        assert mirrored.M2_c == pytest.approx(cut.M2_c, abs=1e-9)


def test_interactive_covariate_in_interval_model(two_qtl_cross, two_qtl_genoprob, two_qtl_model):
    n = two_qtl_cross.n_individuals
    sex = (np.arange(n) % 2).astype(float)[:, None]
    covariates = CovariateSet(additive=np.zeros((n, 0)), interactive=sex, interactive_names=["sex"])
    Y = two_qtl_cross.phenotypes + sex
    model = IntervalModel(two_qtl_genoprob, covariates, WHOLE)
    state = model.prepare(Y)
    X0 = null_design(covariates)
    for first, second, c in [(10, 16, 3), (4, 19, 2)]:
        X1 = position_design(two_qtl_genoprob, "1", first, covariates)
        X2 = position_design(two_qtl_genoprob, "1", second, covariates)
        assert X1.shape[1] == 6
        fast = model.two_qtl_lod(state, np.array([first]), np.array([second]), c)[0]
        assert fast == pytest.approx(direct_two_qtl_lod(Y, X1, X2, X0, c), abs=1e-8)

    without = two_qtl_model.single_qtl_curve(two_qtl_model.prepare(Y))
    assert np.all(model.single_qtl_curve(state) >= without - 1e-9)
    cuts = range(1, Y.shape[1])
    with_sex = TwoVsOneTest(model, mode="exhaustive").exhaustive_cuts(state, cuts)
    plain = TwoVsOneTest(two_qtl_model, mode="exhaustive").exhaustive_cuts(two_qtl_model.prepare(Y), cuts)
    for larger, smaller in zip(with_sex, plain):
        assert larger.M2_c >= smaller.M2_c - 1e-9
