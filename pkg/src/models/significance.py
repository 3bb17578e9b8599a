"""Null distribution of LOD_2v1 by parametric bootstrap or stratified permutation, and p-values."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from src.config import DISSECTION_CONFIG, SCAN_CONFIG, SIGNIFICANCE_CONFIG
from src.constants import GENOTYPE_LABELS, NullMethod, SearchMode
from src.genetics.genoprob import GenoProb, impute_genotype
from src.models.mv_dissect import IntervalModel, MvModelFit, TwoVsOneResult, TwoVsOneTest, mv_fit
from src.utils.classes import CovariateSet, Interval
from src.utils.custom_logger import get_logger
from src.utils.errors import ComputationError, InputError, SingularMatrixError
from src.utils.seeding import derive_rng

logger = get_logger("Significance")


@dataclass
class NullReplicateSet:
    """LOD_2v1 statistics of the null replicates."""

    method: NullMethod
    stats: np.ndarray
    seed: int

    @property
    def n_reps(self) -> int:
        return len(self.stats)


@dataclass
class DissectionContext:
    """Everything needed to rerun the full one-vs-two QTL analysis on a new trait matrix."""

    gp: GenoProb
    covariates: CovariateSet
    interval: Interval
    Y: np.ndarray
    trait_ids: list[str]
    mode: SearchMode = SearchMode(DISSECTION_CONFIG["mode"])
    starts: int = DISSECTION_CONFIG["starts"]
    seed: int = 1
    null_includes_interactive: bool = SCAN_CONFIG["null_includes_interactive"]
    model: Optional[IntervalModel] = field(default=None, repr=False)

    def __post_init__(self):
        self.mode = SearchMode(self.mode)
        if self.model is None:
            self.model = IntervalModel(self.gp, self.covariates, self.interval, self.null_includes_interactive)

    def tester(self, model: Optional[IntervalModel] = None) -> TwoVsOneTest:
        return TwoVsOneTest(model or self.model, mode=self.mode, starts=self.starts, seed=self.seed)

    def analyze(self, Y: np.ndarray, model: Optional[IntervalModel] = None) -> TwoVsOneResult:
        return self.tester(model).run(Y, self.trait_ids)

    def single_qtl_fit(self, index: int) -> MvModelFit:
        """Multivariate fit of the single-QTL model at grid index `index` of the interval."""
        return mv_fit(self.Y, self.model.designs[index])


def _run_replicates(
    replicate: Callable[[int], float], n_reps: int, threads: int, description: str, progress: bool
) -> np.ndarray:
    """Evaluate replicates 0..n_reps-1; results are index-addressed so the thread count does not matter."""
    stats = np.empty(n_reps)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        iterator = executor.map(replicate, range(n_reps))
        for k, value in enumerate(tqdm(iterator, total=n_reps, desc=description, disable=not progress)):
            stats[k] = value
    if np.any(stats < -1e-9):
        raise ComputationError(f"negative LOD_2v1 in {description} replicates: {stats.min():g}")
    return stats


def _lambda_index(context: DissectionContext, lambda_hat: float) -> int:
    return int(np.argmin(np.abs(context.model.positions - lambda_hat)))


def parametric_bootstrap(
    context: DissectionContext,
    lambda_hat: float,
    n_reps: int = SIGNIFICANCE_CONFIG["n_reps"],
    seed: int = 1,
    threads: int = 1,
    progress: bool = False,
) -> NullReplicateSet:
    """Simulate Y* = X beta + E* from the single-QTL fit at lambda_hat, rows of E* ~ N(0, RSS/n), and rerun the analysis."""
    if n_reps < 0:
        raise InputError(f"n_reps must be non-negative, got {n_reps}")
    fit = context.single_qtl_fit(_lambda_index(context, lambda_hat))
    sigma = fit.rss / fit.n
    try:
        factor = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as error:
        raise SingularMatrixError("estimated residual covariance is not positive definite") from error
    logger.info(f"Parametric bootstrap: {n_reps} replicates from the single-QTL model at {lambda_hat:g} cM")

    def replicate(k: int) -> float:
        rng = derive_rng(seed, k)
        noise = rng.standard_normal((fit.n, fit.p)) @ factor.T
        return context.analyze(fit.fitted + noise).lod_2v1

    stats = _run_replicates(replicate, n_reps, threads, "bootstrap", progress)
    return NullReplicateSet(method=NullMethod.BOOTSTRAP, stats=stats, seed=seed)


def genotype_strata(genotypes: np.ndarray) -> list[np.ndarray]:
    """Row indices of each genotype class that can be permuted (at least two members)."""
    strata = []
    for code, label in enumerate(GENOTYPE_LABELS):
        members = np.flatnonzero(genotypes == code)
        if len(members) < 2:
            logger.warning(f"Genotype stratum {label} has {len(members)} individuals and is left unpermuted")
            continue
        strata.append(members)
    return strata


def stratified_shuffle(strata: Sequence[np.ndarray], n: int, rng: np.random.Generator) -> np.ndarray:
    """A row permutation that only moves individuals within their stratum."""
    permutation = np.arange(n)
    for members in strata:
        permutation[members] = members[rng.permutation(len(members))]
    return permutation


def stratified_permutation(
    context: DissectionContext,
    lambda_hat: float,
    n_reps: int = SIGNIFICANCE_CONFIG["n_reps"],
    seed: int = 1,
    threads: int = 1,
    permute_covariates: bool = SIGNIFICANCE_CONFIG["permute_covariates"],
    progress: bool = False,
) -> NullReplicateSet:
    """Permute phenotype rows within the imputed genotype classes at lambda_hat and rerun the analysis.

    Genotypes stay with their individuals; covariate rows travel with the phenotypes only when
    permute_covariates is set.
    """
    if n_reps < 0:
        raise InputError(f"n_reps must be non-negative, got {n_reps}")
    grid_index = int(context.model.indices[_lambda_index(context, lambda_hat)])
    genotypes = impute_genotype(context.gp, context.interval.chromosome, grid_index)
    strata = genotype_strata(genotypes)
    n = len(genotypes)
    logger.info(f"Stratified permutation: {n_reps} replicates, strata at {lambda_hat:g} cM")

    def replicate(k: int) -> float:
        permutation = stratified_shuffle(strata, n, derive_rng(seed, k))
        model = None
        if permute_covariates:
            model = IntervalModel(
                context.gp, context.covariates.subset(permutation), context.interval, context.null_includes_interactive
            )
        return context.analyze(context.Y[permutation], model).lod_2v1

    stats = _run_replicates(replicate, n_reps, threads, "permutation", progress)
    return NullReplicateSet(method=NullMethod.PERMUTATION, stats=stats, seed=seed)


def null_replicates(
    context: DissectionContext,
    lambda_hat: float,
    method: Union[NullMethod, str] = SIGNIFICANCE_CONFIG["method"],
    n_reps: int = SIGNIFICANCE_CONFIG["n_reps"],
    seed: int = 1,
    threads: int = 1,
    permute_covariates: bool = SIGNIFICANCE_CONFIG["permute_covariates"],
    progress: bool = False,
) -> NullReplicateSet:
    if NullMethod(method) is NullMethod.BOOTSTRAP:
        return parametric_bootstrap(context, lambda_hat, n_reps, seed, threads, progress)
    return stratified_permutation(context, lambda_hat, n_reps, seed, threads, permute_covariates, progress)


def pvalue(observed: float, nulls: NullReplicateSet, plus_one: bool = SIGNIFICANCE_CONFIG["plus_one"]) -> float:
    """Share of null statistics >= observed; with plus_one, (r + 1) / (N + 1)."""
    if nulls.n_reps == 0:
        raise InputError("p-value needs at least one null replicate")
    exceed = int(np.sum(nulls.stats >= observed))
    if plus_one:
        return (exceed + 1) / (nulls.n_reps + 1)
    return exceed / nulls.n_reps


def significance_report(observed: float, nulls: NullReplicateSet, plus_one: bool = False) -> dict:
    return {
        "method": nulls.method.value,
        "n_reps": nulls.n_reps,
        "seed": nulls.seed,
        "observed": observed,
        "pvalue": pvalue(observed, nulls, plus_one) if nulls.n_reps else None,
        "plus_one": plus_one,
        "null_stats": nulls.stats.tolist(),
    }
