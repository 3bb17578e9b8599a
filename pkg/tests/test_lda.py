from dataclasses import replace

import numpy as np
import pytest

from src.genetics.genoprob import classify_recombinants
from src.models.hotspot import HotspotInterval
from src.models.lda import distance_summary, lda_fit_project, two_locus_labels
from src.utils.errors import ComputationError

HOTSPOT = HotspotInterval(chromosome="1", center=50.0, peak_count=6, lo=40.0, hi=60.0)


@pytest.fixture(scope="module")
def projection(single_qtl_cross, single_qtl_genoprob):
    return lda_fit_project(single_qtl_cross, single_qtl_genoprob, HOTSPOT, trait_ids=single_qtl_cross.trait_ids)


def training_scatter(cross, gp):
    calls = classify_recombinants(cross, gp, HOTSPOT.interval)
    Y = cross.phenotypes
    groups = [np.flatnonzero(calls.nonrecombinant & (calls.genotype == g)) for g in range(3)]
    center = Y[np.concatenate(groups)].mean(axis=0)
    within = sum((Y[g] - Y[g].mean(axis=0)).T @ (Y[g] - Y[g].mean(axis=0)) for g in groups)
    between = sum(len(g) * np.outer(Y[g].mean(axis=0) - center, Y[g].mean(axis=0) - center) for g in groups)
    return within, between, sum(len(g) for g in groups)


def test_training_projection_is_reproduced(projection, single_qtl_cross):
    np.testing.assert_allclose(projection.project(single_qtl_cross.phenotypes), projection.coordinates, atol=1e-12)


def test_basis_is_unit_under_within_class_covariance(projection, single_qtl_cross, single_qtl_genoprob):
    within, _, n_train = training_scatter(single_qtl_cross, single_qtl_genoprob)
    metric = within / (n_train - 3)
    np.testing.assert_allclose(projection.basis.T @ metric @ projection.basis, np.eye(2), atol=1e-8)


def test_first_discriminant_maximizes_separation(projection, single_qtl_cross, single_qtl_genoprob):
    within, between, _ = training_scatter(single_qtl_cross, single_qtl_genoprob)

    def ratio(v):
        return (v @ between @ v) / (v @ within @ v)

    best = ratio(projection.basis[:, 0])
    directions = np.random.default_rng(1).normal(size=(1000, within.shape[0]))
    assert all(ratio(v) <= best + 1e-9 for v in directions)


def test_rr_class_mean_is_non_negative(projection):
    assert projection.class_labels == ["BB", "BR", "RR"]
    assert np.all(projection.class_means[-1] >= 0)


def test_recombinant_copying_a_non_recombinant(projection, single_qtl_cross, single_qtl_genoprob):
    recombinant = int(np.flatnonzero(projection.is_recombinant)[0])
    donor = int(np.flatnonzero(~projection.is_recombinant)[0])
    phenotypes = single_qtl_cross.phenotypes.copy()
    phenotypes[recombinant] = phenotypes[donor]
    copied = lda_fit_project(
        single_qtl_cross.with_phenotypes(phenotypes), single_qtl_genoprob, HOTSPOT, trait_ids=single_qtl_cross.trait_ids
    )
    np.testing.assert_allclose(copied.basis, projection.basis, atol=1e-12)
    np.testing.assert_allclose(copied.coordinates[recombinant], copied.coordinates[donor], atol=1e-12)


def test_two_classes_give_one_discriminant(single_qtl_cross, single_qtl_genoprob):
    calls = classify_recombinants(single_qtl_cross, single_qtl_genoprob, HOTSPOT.interval)
    rows = np.flatnonzero(~(calls.nonrecombinant & (calls.genotype == 2)))
    cross = replace(
        single_qtl_cross,
        individuals=[single_qtl_cross.individuals[i] for i in rows],
        genotypes=single_qtl_cross.genotypes[rows],
        phenotypes=single_qtl_cross.phenotypes[rows],
        covariates=single_qtl_cross.covariates.subset(rows),
    )
    result = lda_fit_project(cross, single_qtl_genoprob.subset(rows), HOTSPOT, trait_ids=cross.trait_ids)
    assert result.class_labels == ["BB", "BR"]
    assert np.all(result.coordinates[:, 1] == 0.0)


def test_singular_scatter_needs_ridge(single_qtl_cross, single_qtl_genoprob):
    rng = np.random.default_rng(3)
    ids = [f"g{k}" for k in range(200)]
    noise = rng.normal(size=(single_qtl_cross.n_individuals, 200))
    wide = replace(single_qtl_cross, phenotypes=noise, trait_ids=ids, trait_meta={})
    with pytest.raises(ComputationError, match="ridge"):
        lda_fit_project(wide, single_qtl_genoprob, HOTSPOT, trait_ids=ids)
    regularized = lda_fit_project(wide, single_qtl_genoprob, HOTSPOT, trait_ids=ids, ridge=1.0)
    assert np.all(np.isfinite(regularized.coordinates))


def test_two_locus_labels(single_qtl_genoprob):
    same = two_locus_labels(single_qtl_genoprob, "1", 50.0, 50.0)
    assert all(a == b for a, b in same)
    pairs = two_locus_labels(single_qtl_genoprob, "1", 40.0, 60.0)
    assert len(pairs) == single_qtl_genoprob.n_individuals


def test_scatter_rows_and_summary(single_qtl_cross, single_qtl_genoprob):
    projection = lda_fit_project(
        single_qtl_cross, single_qtl_genoprob, HOTSPOT, trait_ids=single_qtl_cross.trait_ids, lambdas=(45.0, 55.0)
    )
    rows = projection.rows()
    assert set(rows[0]) == {"id", "ld1", "ld2", "class", "geno_l1", "geno_l2"}
    non_recombinant = [r for r, rec in zip(rows, projection.is_recombinant) if not rec]
    assert all(r["class"] in ("BB", "BR", "RR") for r in non_recombinant)
    summary = distance_summary(projection)
    assert summary["nonrecombinant"]["n"] + summary["recombinant"]["n"] == len(rows)
    assert summary["nonrecombinant"]["median"] < summary["nonrecombinant"]["p95"]
