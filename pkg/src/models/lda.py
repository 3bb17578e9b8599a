"""Linear discriminant diagnostic: do recombinant individuals fall in the clusters of the non-recombinants?"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, eigh

from src.config import LDA_CONFIG
from src.constants import GENOTYPE_LABELS, RECOMBINANT_LABEL, Genotype
from src.genetics.genoprob import GenoProb, classify_recombinants, impute_genotype
from src.models.hotspot import HotspotInterval, select_top_traits
from src.models.regression import log10_det
from src.utils.classes import Cross
from src.utils.custom_logger import get_logger
from src.utils.errors import ComputationError, InputError, SingularMatrixError

logger = get_logger("LDA")


@dataclass
class LdaProjection:
    """Discriminant coordinates of every complete-case individual.

    The basis is scaled so the pooled within-class covariance (plus ridge) is the identity in
    discriminant space; distances are therefore in within-class standard deviations.
    """

    individuals: list[str]
    coordinates: np.ndarray  # individuals x 2
    classes: list[str]
    basis: np.ndarray  # traits x 2
    center: np.ndarray
    class_labels: list[str]
    class_means: np.ndarray  # classes x 2
    eigenvalues: np.ndarray
    trait_ids: list[str]
    reference_genotype: np.ndarray
    two_locus: Optional[list[tuple[str, str]]] = None

    @property
    def is_recombinant(self) -> np.ndarray:
        return np.array([c == RECOMBINANT_LABEL for c in self.classes])

    def project(self, Y: np.ndarray) -> np.ndarray:
        return (np.asarray(Y, dtype=float) - self.center) @ self.basis

    def rows(self) -> list[dict]:
        """Scatter-plot rows id, ld1, ld2, class, geno_l1, geno_l2."""
        pairs = self.two_locus or [("", "")] * len(self.individuals)
        return [
            {"id": id_ind, "ld1": float(x[0]), "ld2": float(x[1]), "class": label, "geno_l1": g1, "geno_l2": g2}
            for id_ind, x, label, (g1, g2) in zip(self.individuals, self.coordinates, self.classes, pairs)
        ]


def two_locus_labels(gp: GenoProb, chromosome: str, lambda1: float, lambda2: float) -> list[tuple[str, str]]:
    """Imputed genotype pair at lambda1 and lambda2 for every individual."""
    first = impute_genotype(gp, chromosome, gp.grid.nearest_index(chromosome, lambda1))
    second = impute_genotype(gp, chromosome, gp.grid.nearest_index(chromosome, lambda2))
    return [(GENOTYPE_LABELS[g1], GENOTYPE_LABELS[g2]) for g1, g2 in zip(first, second)]


def _scatter_matrices(Y: np.ndarray, groups: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    center = Y[np.concatenate(groups)].mean(axis=0)
    p = Y.shape[1]
    within, between = np.zeros((p, p)), np.zeros((p, p))
    for rows in groups:
        block = Y[rows]
        mean = block.mean(axis=0)
        deviations = block - mean
        within += deviations.T @ deviations
        between += len(rows) * np.outer(mean - center, mean - center)
    return within, between, center


def lda_fit_project(
    cross: Cross,
    gp: GenoProb,
    hotspot: HotspotInterval,
    top_k: int = LDA_CONFIG["top_k"],
    ridge: float = LDA_CONFIG["ridge"],
    lambdas: Optional[tuple[float, float]] = None,
    trait_ids: Optional[list[str]] = None,
) -> LdaProjection:
    """Fit discriminants on the non-recombinants of the hotspot interval and project everybody.

    With `lambdas` the two-locus genotype labels at (lambda1, lambda2) are attached to each row.
    """
    if ridge < 0:
        raise InputError(f"ridge must be non-negative, got {ridge}")
    trait_ids = trait_ids or select_top_traits(hotspot, cross, top_k)
    Y = cross.trait_matrix(trait_ids)
    complete = ~np.isnan(Y).any(axis=1)
    if not complete.all():
        logger.warning(f"{int((~complete).sum())} individuals with missing expression values left out")
    calls = classify_recombinants(cross, gp, hotspot.interval)

    groups, class_labels = [], []
    for code, label in enumerate(GENOTYPE_LABELS):
        rows = np.flatnonzero(complete & calls.nonrecombinant & (calls.genotype == code))
        if len(rows) < LDA_CONFIG["min_class_size"]:
            logger.warning(f"Class {label} has {len(rows)} non-recombinant individuals and is left out")
            continue
        groups.append(rows)
        class_labels.append(label)
    if len(groups) < 2:
        raise InputError(f"only {len(groups)} genotype classes among non-recombinants; need at least 2")

    within, between, center = _scatter_matrices(Y, groups)
    n_train = sum(len(rows) for rows in groups)
    p = Y.shape[1]
    if n_train - len(groups) < 1:
        raise InputError("too few non-recombinant individuals to estimate the within-class covariance")
    metric = within / (n_train - len(groups)) + ridge * np.eye(p)
    try:
        log10_det(metric)
        eigenvalues, vectors = eigh(between, metric)
    except (SingularMatrixError, LinAlgError) as error:
        raise ComputationError(
            f"within-class scatter of {p} traits is singular; use --ridge > 0 or a smaller --top"
        ) from error

    n_axes = min(2, len(groups) - 1)
    if n_axes < 2:
        logger.warning("Two genotype classes only: a single discriminant, second coordinate set to 0")
    order = np.argsort(eigenvalues)[::-1][:n_axes]
    basis = np.zeros((p, 2))
    basis[:, :n_axes] = vectors[:, order]

    # orient each axis so the most-R class mean is non-negative
    reference = groups[-1]
    signs = np.where(((Y[reference] - center) @ basis).mean(axis=0) < 0, -1.0, 1.0)
    basis *= signs

    kept = np.flatnonzero(complete)
    coordinates = (Y[kept] - center) @ basis
    labels = calls.labels()
    two_locus = None
    if lambdas is not None:
        pairs = two_locus_labels(gp, hotspot.chromosome, *lambdas)
        two_locus = [pairs[i] for i in kept]
    center_index = gp.grid.nearest_index(hotspot.chromosome, hotspot.center)
    logger.info(
        f"LDA on {p} traits, {n_train} non-recombinants in classes {class_labels}, "
        f"{int(calls.is_recombinant[kept].sum())} recombinants projected"
    )
    return LdaProjection(
        individuals=[cross.individuals[i] for i in kept],
        coordinates=coordinates,
        classes=[labels[i] for i in kept],
        basis=basis,
        center=center,
        class_labels=class_labels,
        class_means=np.array([((Y[rows] - center) @ basis).mean(axis=0) for rows in groups]),
        eigenvalues=eigenvalues[order],
        trait_ids=list(trait_ids),
        reference_genotype=impute_genotype(gp, hotspot.chromosome, center_index)[kept],
        two_locus=two_locus,
    )


def distance_summary(projection: LdaProjection) -> dict:
    """Distances to the nearest class mean, per group, and the recombinants' distance to their imputed class."""
    gaps = np.linalg.norm(projection.coordinates[:, None, :] - projection.class_means[None, :, :], axis=2)
    nearest = gaps.min(axis=1)
    recombinant = projection.is_recombinant

    summary = {}
    for name, rows in (("nonrecombinant", ~recombinant), ("recombinant", recombinant)):
        values = nearest[rows]
        summary[name] = {
            "n": int(rows.sum()),
            "median": float(np.median(values)) if len(values) else None,
            "p95": float(np.percentile(values, 95)) if len(values) else None,
        }

    class_of = {Genotype.from_label(label).value: k for k, label in enumerate(projection.class_labels)}
    own = [
        gaps[i, class_of[g]]
        for i, g in enumerate(projection.reference_genotype)
        if recombinant[i] and int(g) in class_of
    ]
    summary["recombinant"]["within_3sd_of_imputed_class"] = float(np.mean(np.array(own) <= 3.0)) if own else None
    summary["nearest_distance"] = nearest.tolist()
    return summary
