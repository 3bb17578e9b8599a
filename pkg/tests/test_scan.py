from dataclasses import replace

import numpy as np
import pytest

from src.genetics.genoprob import GenoProb, calc_genoprob, insert_pseudomarkers
from src.models.scan import (
    EffectEstimate,
    TraitPeak,
    curves_table,
    estimate_effects,
    scan1,
    scan_all,
    scan_traits,
    signed_lod,
)
from src.utils.classes import CovariateSet, GeneticMap
from src.utils.errors import EmptyGenotypeClassError
from tests.conftest import HALDANE_HMM


def direct_lod(y, probs):
    """Haley-Knott LOD by plain least squares."""
    n = len(y)
    X0 = np.ones((n, 1))
    X1 = np.column_stack([np.ones(n), probs[:, 2] - probs[:, 0], probs[:, 1]])
    rss0 = np.sum((y - X0 @ np.linalg.lstsq(X0, y, rcond=None)[0]) ** 2)
    rss1 = np.sum((y - X1 @ np.linalg.lstsq(X1, y, rcond=None)[0]) ** 2)
    return max(n / 2 * np.log10(rss0 / rss1), 0.0)


def test_lod_matches_direct_regression(single_qtl_cross, single_qtl_genoprob):
    y = single_qtl_cross.phenotypes[:, 0]
    scan = scan1(y, single_qtl_genoprob, single_qtl_cross.covariates)
    probs = single_qtl_genoprob.probs["1"]
    expected = [direct_lod(y, probs[:, k, :]) for k in range(probs.shape[1])]
    np.testing.assert_allclose(scan.lod["1"], expected, atol=1e-8)


def test_peak_near_simulated_qtl(single_qtl_cross, single_qtl_genoprob):
    scan = scan1(single_qtl_cross.phenotypes[:, 1], single_qtl_genoprob, single_qtl_cross.covariates)
    assert abs(scan.peak.position - 50.0) <= 10.0
    assert scan.peak.lod > 10.0
    assert scan.effects.additive > 0


def test_effects_from_class_means():
    grid = insert_pseudomarkers(GeneticMap({"1": [("m1", 0.0)]}), 1.0)
    codes = np.array([0, 0, 1, 1, 2, 2])
    gp = GenoProb(grid=grid, probs={"1": np.eye(3)[codes][:, None, :]}, individuals=list("abcdef"))
    effects = estimate_effects(np.array([1.0, 3.0, 4.0, 4.0, 6.0, 8.0]), gp, "1", 0)
    assert (effects.mu_bb, effects.mu_br, effects.mu_rr) == (2.0, 4.0, 7.0)
    assert effects.additive == 2.5
    assert effects.dominance == pytest.approx(-0.5)


def test_empty_genotype_class():
    grid = insert_pseudomarkers(GeneticMap({"1": [("m1", 0.0)]}), 1.0)
    codes = np.array([0, 0, 1, 1])
    gp = GenoProb(grid=grid, probs={"1": np.eye(3)[codes][:, None, :]}, individuals=list("abcd"))
    with pytest.raises(EmptyGenotypeClassError) as error:
        estimate_effects(np.arange(4.0), gp, "1", 0)
    assert error.value.genotype == "RR"


def test_signed_lod_follows_additive_effect(single_qtl_cross, single_qtl_genoprob):
    flipped = single_qtl_cross.with_phenotypes(-single_qtl_cross.phenotypes)
    peaks = {p.id_trait: p for p in scan_all(flipped, single_qtl_genoprob, lod_min=5.0)}
    assert peaks["trait1"].signed_lod == -peaks["trait1"].lod


def test_missing_values_scanned_on_observed_rows(single_qtl_cross, single_qtl_genoprob):
    phenotypes = single_qtl_cross.phenotypes.copy()
    phenotypes[:20, 0] = np.nan
    cross = single_qtl_cross.with_phenotypes(phenotypes)
    scans = {s.id_trait: s for s in scan_traits(cross, single_qtl_genoprob, keep_curves=True)}
    alone = scan1(phenotypes[:, 0], single_qtl_genoprob, CovariateSet.empty(cross.n_individuals))
    np.testing.assert_allclose(scans["trait1"].lod["1"], alone.lod["1"], atol=1e-10)


def test_huge_threshold_gives_no_peaks(single_qtl_cross, single_qtl_genoprob):
    assert scan_all(single_qtl_cross, single_qtl_genoprob, lod_min=1e9) == []


def test_thread_count_does_not_change_results(single_qtl_cross, single_qtl_genoprob):
    one = scan_all(single_qtl_cross, single_qtl_genoprob, lod_min=0.0, threads=1)
    four = scan_all(single_qtl_cross, single_qtl_genoprob, lod_min=0.0, threads=4)
    assert [p.to_dict() for p in one] == [p.to_dict() for p in four]


def test_additive_covariate_absorbs_shift(single_qtl_cross, single_qtl_genoprob):
    n = single_qtl_cross.n_individuals
    batch = (np.arange(n) % 2).astype(float)[:, None]
    y = single_qtl_cross.phenotypes[:, 0] + 5.0 * batch[:, 0]
    covariates = CovariateSet(additive=batch, interactive=np.zeros((n, 0)))
    shifted = scan1(y, single_qtl_genoprob, covariates)
    plain = scan1(single_qtl_cross.phenotypes[:, 0], single_qtl_genoprob, covariates)
    np.testing.assert_allclose(shifted.lod["1"], plain.lod["1"], atol=1e-8)


def test_peak_dict_round_trip_and_curves(single_qtl_cross, single_qtl_genoprob):
    scans = scan_traits(single_qtl_cross, single_qtl_genoprob, trait_ids=["trait2"], keep_curves=True)
    rows = curves_table(scans, single_qtl_genoprob)
    assert len(rows) == single_qtl_genoprob.grid.n_positions()
    peak = TraitPeak("t", "1", 50.0, 10, 12.0, -12.0, EffectEstimate(1.0, 0.5, -1.0))
    restored = TraitPeak.from_dict(peak.to_dict(), single_qtl_genoprob)
    assert restored.effects == peak.effects
    assert restored.signed_lod == -12.0


def direct_lod_with_designs(y, X0, X1):
    rss0 = np.sum((y - X0 @ np.linalg.lstsq(X0, y, rcond=None)[0]) ** 2)
    rss1 = np.sum((y - X1 @ np.linalg.lstsq(X1, y, rcond=None)[0]) ** 2)
    return max(len(y) / 2 * np.log10(rss0 / rss1), 0.0)


def sex_covariate(n, interactive=True) -> CovariateSet:
    sex = (np.arange(n) % 2).astype(float)[:, None]
    empty = np.zeros((n, 0))
    if interactive:
        return CovariateSet(additive=empty, interactive=sex, interactive_names=["sex"])
    return CovariateSet(additive=sex, interactive=empty, additive_names=["sex"])


def test_lod_unchanged_by_affine_transform(single_qtl_cross, single_qtl_genoprob):
    y = single_qtl_cross.phenotypes[:, 2]
    plain = scan1(y, single_qtl_genoprob, single_qtl_cross.covariates)
    rescaled = scan1(3.0 * y + 7.0, single_qtl_genoprob, single_qtl_cross.covariates)
    np.testing.assert_allclose(rescaled.lod["1"], plain.lod["1"], atol=1e-8)
    assert rescaled.peak.position == plain.peak.position


def test_interactive_covariate_enters_alternative(single_qtl_cross, single_qtl_genoprob):
    n = single_qtl_cross.n_individuals
    covariates = sex_covariate(n)
    sex = covariates.interactive[:, 0]
    y = single_qtl_cross.phenotypes[:, 0] + 0.5 * sex
    with_sex = scan1(y, single_qtl_genoprob, covariates)
    without = scan1(y, single_qtl_genoprob, CovariateSet.empty(n))
    assert np.all(with_sex.lod["1"] >= without.lod["1"] - 1e-9)

    probs = single_qtl_genoprob.probs["1"]
    for k in (0, 10, probs.shape[1] - 1):
        codings = np.column_stack([probs[:, k, 2] - probs[:, k, 0], probs[:, k, 1]])
        X1 = np.column_stack([np.ones(n), sex, codings, sex[:, None] * codings])
        assert with_sex.lod["1"][k] == pytest.approx(direct_lod_with_designs(y, np.ones((n, 1)), X1), abs=1e-8)


def test_interactive_covariate_in_null_model(single_qtl_cross, single_qtl_genoprob):
    n = single_qtl_cross.n_individuals
    covariates = sex_covariate(n)
    sex = covariates.interactive[:, 0]
    y = single_qtl_cross.phenotypes[:, 0] + 2.0 * sex
    scan = scan1(y, single_qtl_genoprob, covariates, null_includes_interactive=True)
    default = scan1(y, single_qtl_genoprob, covariates)
    probs = single_qtl_genoprob.probs["1"][:, 10, :]
    codings = np.column_stack([probs[:, 2] - probs[:, 0], probs[:, 1]])
    X0 = np.column_stack([np.ones(n), sex])
    X1 = np.column_stack([X0, codings, sex[:, None] * codings])
    assert scan.lod["1"][10] == pytest.approx(direct_lod_with_designs(y, X0, X1), abs=1e-8)
    assert np.all(scan.lod["1"] <= default.lod["1"] + 1e-9)


def test_scan_traits_with_interactive_covariate(single_qtl_cross, single_qtl_genoprob):
    cross = replace(single_qtl_cross, covariates=sex_covariate(single_qtl_cross.n_individuals))
    scans = {s.id_trait: s for s in scan_traits(cross, single_qtl_genoprob, keep_curves=True)}
    alone = scan1(cross.phenotypes[:, 3], single_qtl_genoprob, cross.covariates)
    np.testing.assert_allclose(scans["trait4"].lod["1"], alone.lod["1"], atol=1e-10)


def test_missing_genotype_class_leaves_effects_empty(single_qtl_cross):
    genotypes = np.where(single_qtl_cross.genotypes == 2, 1, single_qtl_cross.genotypes).astype(single_qtl_cross.genotypes.dtype)
    cross = replace(single_qtl_cross, genotypes=genotypes)
    gp = calc_genoprob(cross, HALDANE_HMM)
    scan = scan1(cross.phenotypes[:, 0], gp, cross.covariates, id_trait="trait1")
    assert scan.effects is None
    assert signed_lod(scan) == scan.peak.lod
    peaks = scan_all(cross, gp, lod_min=0.0)
    assert len(peaks) == len(cross.trait_ids)
    assert all(peak.effects is None and peak.signed_lod == peak.lod for peak in peaks)


def test_sparse_trait_is_skipped(single_qtl_cross, single_qtl_genoprob):
    sparse = np.full(single_qtl_cross.n_individuals, np.nan)
    sparse[:5] = 1.0
    cross = replace(
        single_qtl_cross,
        phenotypes=np.column_stack([single_qtl_cross.phenotypes, sparse]),
        trait_ids=[*single_qtl_cross.trait_ids, "sparse"],
    )
    scans = scan_traits(cross, single_qtl_genoprob)
    assert [s.id_trait for s in scans] == sorted(single_qtl_cross.trait_ids)
    assert "sparse" not in {p.id_trait for p in scan_all(cross, single_qtl_genoprob, lod_min=0.0)}
