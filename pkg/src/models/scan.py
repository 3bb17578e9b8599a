"""Single-trait Haley-Knott genome scans, peaks and QTL effect estimates."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.config import SCAN_CONFIG
from src.constants import GENOTYPE_LABELS, RSS_FLOOR
from src.genetics.genoprob import GenoProb, impute_genotype
from src.models.regression import full_design, null_design, orthonormal_basis
from src.utils.classes import CovariateSet, Cross
from src.utils.custom_logger import get_logger, with_context
from src.utils.errors import ComputationError, EmptyGenotypeClassError, InputError

logger = get_logger("Scan")


@dataclass
class EffectEstimate:
    """Genotype class means and the additive / dominance effects derived from them."""

    mu_bb: float
    mu_br: float
    mu_rr: float

    @property
    def additive(self) -> float:
        return (self.mu_rr - self.mu_bb) / 2.0

    @property
    def dominance(self) -> float:
        return self.mu_br - (self.mu_bb + self.mu_rr) / 2.0


@dataclass
class Peak:
    """Largest LOD score on one chromosome (leftmost on ties)."""

    chromosome: str
    position: float
    index: int
    lod: float


@dataclass
class TraitScan:
    """Genome scan of one trait."""

    id_trait: str
    lod: dict[str, np.ndarray]
    peaks: list[Peak]
    effects: Optional[EffectEstimate] = None

    @property
    def peak(self) -> Peak:
        """Genome-wide peak: maximum of the per-chromosome peaks, first chromosome on ties."""
        return max(self.peaks, key=lambda pk: pk.lod)


@dataclass
class TraitPeak:
    """A per-chromosome peak of one trait, with its signed LOD and effect estimates."""

    id_trait: str
    chromosome: str
    position: float
    index: int
    lod: float
    signed_lod: float
    effects: Optional[EffectEstimate] = field(default=None)

    def to_dict(self) -> dict:
        return {
            "trait": self.id_trait,
            "chr": self.chromosome,
            "pos": self.position,
            "lod": self.lod,
            "signed_lod": self.signed_lod,
            "a": None if self.effects is None else self.effects.additive,
            "d": None if self.effects is None else self.effects.dominance,
            "means": None if self.effects is None else [self.effects.mu_bb, self.effects.mu_br, self.effects.mu_rr],
        }

    @classmethod
    def from_dict(cls, data: dict, gp: Optional[GenoProb] = None) -> "TraitPeak":
        effects = None
        if data.get("means") is not None:
            effects = EffectEstimate(*data["means"])
        index = gp.grid.nearest_index(str(data["chr"]), float(data["pos"])) if gp is not None else -1
        return cls(
            id_trait=str(data["trait"]),
            chromosome=str(data["chr"]),
            position=float(data["pos"]),
            index=index,
            lod=float(data["lod"]),
            signed_lod=float(data["signed_lod"]),
            effects=effects,
        )


def _signed(lod: float, effects: Optional[EffectEstimate]) -> float:
    if effects is None or effects.additive >= 0:
        return lod
    return -lod


def signed_lod(scan: TraitScan) -> float:
    """Peak LOD carrying the sign of the estimated additive effect (+ when the effect is 0)."""
    return _signed(scan.peak.lod, scan.effects)


def estimate_effects(trait: np.ndarray, gp: GenoProb, chromosome: str, index: int) -> EffectEstimate:
    """Mean trait value in each imputed genotype class at a grid position."""
    trait = np.asarray(trait, dtype=float)
    observed = ~np.isnan(trait)
    genotypes = impute_genotype(gp, chromosome, index)[observed]
    values = trait[observed]
    means = []
    for code, label in enumerate(GENOTYPE_LABELS):
        members = values[genotypes == code]
        if len(members) == 0:
            raise EmptyGenotypeClassError(label, f"no individual imputed as {label} at {chromosome}:{index}")
        means.append(float(members.mean()))
    return EffectEstimate(*means)


def _residual_ss(Q: np.ndarray, Y: np.ndarray) -> np.ndarray:
    residuals = Y - Q @ (Q.T @ Y)
    return np.maximum(np.einsum("ij,ij->j", residuals, residuals), RSS_FLOOR)


def _chromosome_lod(
    Y: np.ndarray,
    probs: np.ndarray,
    covariates: CovariateSet,
    rss0: np.ndarray,
) -> tuple[np.ndarray, int]:
    """LOD (traits x positions) along one chromosome, and the number of rank-deficient positions."""
    n = Y.shape[0]
    lod = np.empty((Y.shape[1], probs.shape[1]))
    deficient = 0
    for k in range(probs.shape[1]):
        X = full_design(probs[:, k, :], covariates)
        Q, kept = orthonormal_basis(X)
        deficient += int(len(kept) < X.shape[1])
        lod[:, k] = (n / 2.0) * np.log10(rss0 / _residual_ss(Q, Y))
    return np.maximum(lod, 0.0), deficient


def scan_lod(
    Y: np.ndarray,
    gp: GenoProb,
    covariates: CovariateSet,
    null_includes_interactive: bool = SCAN_CONFIG["null_includes_interactive"],
    threads: int = 1,
) -> dict[str, np.ndarray]:
    """Haley-Knott LOD curves for complete columns of Y; returns (traits x positions) per chromosome."""
    n = Y.shape[0]
    if n < SCAN_CONFIG["min_individuals"]:
        raise InputError(f"a scan needs at least {SCAN_CONFIG['min_individuals']} individuals, got {n}")
    Q0, _ = orthonormal_basis(null_design(covariates, null_includes_interactive))
    rss0 = _residual_ss(Q0, Y)

    def run(chrom: str) -> tuple[np.ndarray, int]:
        return _chromosome_lod(Y, gp.probs[chrom], covariates, rss0)

    chromosomes = gp.grid.chromosomes
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(executor.map(run, chromosomes))
    deficient = sum(r[1] for r in results)
    if deficient:
        logger.warning(f"Collinear design columns dropped at {deficient} grid positions")
    return {chrom: result[0] for chrom, result in zip(chromosomes, results)}


def _peaks(gp: GenoProb, curves: dict[str, np.ndarray]) -> list[Peak]:
    peaks = []
    for chrom in gp.grid.chromosomes:
        index = int(np.argmax(curves[chrom]))
        peaks.append(Peak(chrom, float(gp.grid.positions[chrom][index]), index, float(curves[chrom][index])))
    return peaks


def _safe_effects(id_trait: str, trait: np.ndarray, gp: GenoProb, peak: Peak) -> Optional[EffectEstimate]:
    try:
        return estimate_effects(trait, gp, peak.chromosome, peak.index)
    except EmptyGenotypeClassError as error:
        trait_logger = with_context(logger, trait=id_trait, chr=peak.chromosome)
        trait_logger.warning(f"effects not estimated at {peak.position:g} cM ({error})")
        return None


def scan1(
    trait: np.ndarray,
    gp: GenoProb,
    covariates: CovariateSet,
    id_trait: str = "trait",
    null_includes_interactive: bool = SCAN_CONFIG["null_includes_interactive"],
) -> TraitScan:
    """Genome scan of a single trait; individuals with a missing value are dropped."""
    trait = np.asarray(trait, dtype=float)
    rows = np.flatnonzero(~np.isnan(trait))
    if len(rows) == 0:
        raise InputError(f"trait {id_trait} has no observed value")
    curves = scan_lod(trait[rows, None], gp.subset(rows), covariates.subset(rows), null_includes_interactive)
    curves = {chrom: lod[0] for chrom, lod in curves.items()}
    peaks = _peaks(gp, curves)
    scan = TraitScan(id_trait=id_trait, lod=curves, peaks=peaks)
    scan.effects = _safe_effects(id_trait, trait, gp, scan.peak)
    return scan


def scan_traits(
    cross: Cross,
    gp: GenoProb,
    trait_ids: Optional[list[str]] = None,
    null_includes_interactive: bool = SCAN_CONFIG["null_includes_interactive"],
    threads: int = 1,
    keep_curves: bool = False,
) -> list[TraitScan]:
    """Scan many traits; traits sharing a missing-value pattern are regressed together."""
    trait_ids = sorted(cross.trait_ids if trait_ids is None else trait_ids)
    if not trait_ids:
        return []
    Y = cross.trait_matrix(trait_ids)
    observed = ~np.isnan(Y)
    if not observed.any(axis=0).all():
        empty = [t for t, ok in zip(trait_ids, observed.any(axis=0)) if not ok]
        raise InputError(f"traits with no observed value: {empty[:10]}")

    patterns: dict[bytes, list[int]] = {}
    for j in range(Y.shape[1]):
        patterns.setdefault(np.packbits(observed[:, j]).tobytes(), []).append(j)
    logger.info(f"Scanning {len(trait_ids)} traits in {len(patterns)} missing-value groups")

    scans: list[Optional[TraitScan]] = [None] * len(trait_ids)
    for columns in patterns.values():
        rows = np.flatnonzero(observed[:, columns[0]])
        if len(rows) < SCAN_CONFIG["min_individuals"]:
            skipped = [trait_ids[j] for j in columns]
            logger.warning(
                f"{len(skipped)} traits observed in {len(rows)} individuals, fewer than "
                f"{SCAN_CONFIG['min_individuals']}, are not scanned: {skipped[:10]}"
            )
            continue
        curves = scan_lod(
            Y[np.ix_(rows, columns)], gp.subset(rows), cross.covariates.subset(rows), null_includes_interactive, threads
        )
        for position, j in enumerate(columns):
            trait_curves = {chrom: lod[position] for chrom, lod in curves.items()}
            peaks = _peaks(gp, trait_curves)
            scan = TraitScan(id_trait=trait_ids[j], lod=trait_curves if keep_curves else {}, peaks=peaks)
            scan.effects = _safe_effects(trait_ids[j], Y[:, j], gp, scan.peak)
            scans[j] = scan
    return [scan for scan in scans if scan is not None]


def scan_all(
    cross: Cross,
    gp: GenoProb,
    lod_min: float = SCAN_CONFIG["lod_min"],
    null_includes_interactive: bool = SCAN_CONFIG["null_includes_interactive"],
    threads: int = 1,
) -> list[TraitPeak]:
    """Per-chromosome peaks with LOD >= lod_min for every trait, ordered by trait id then chromosome."""
    if np.isinf(lod_min) and lod_min > 0:
        return []
    scans = scan_traits(cross, gp, null_includes_interactive=null_includes_interactive, threads=threads)
    return peaks_from_scans(scans, cross, gp, lod_min)


def peaks_from_scans(scans: list[TraitScan], cross: Cross, gp: GenoProb, lod_min: float) -> list[TraitPeak]:
    peaks = []
    for scan in scans:
        trait = cross.trait_values(scan.id_trait)
        for peak in scan.peaks:
            if peak.lod < lod_min:
                continue
            if scan.effects is not None and peak is scan.peak:
                effects = scan.effects
            else:
                effects = _safe_effects(scan.id_trait, trait, gp, peak)
            peaks.append(
                TraitPeak(
                    id_trait=scan.id_trait,
                    chromosome=peak.chromosome,
                    position=peak.position,
                    index=peak.index,
                    lod=peak.lod,
                    signed_lod=_signed(peak.lod, effects),
                    effects=effects,
                )
            )
    logger.info(f"{len(peaks)} peaks with LOD >= {lod_min}")
    return peaks


def curves_table(scans: list[TraitScan], gp: GenoProb) -> list[tuple[str, str, float, float]]:
    """Rows (trait, chr, pos, lod) of the full LOD curves."""
    rows = []
    for scan in scans:
        if not scan.lod:
            raise ComputationError(f"curves of trait {scan.id_trait} were not kept")
        for chrom in gp.grid.chromosomes:
            for pos, lod in zip(gp.grid.positions[chrom], scan.lod[chrom]):
                rows.append((scan.id_trait, chrom, float(pos), float(lod)))
    return rows
