"""Detection of trans-eQTL hotspots from per-trait peaks."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.config import HOTSPOT_CONFIG
from src.genetics.genoprob import Grid
from src.models.scan import TraitPeak
from src.utils.classes import Cross, Interval, TraitMeta
from src.utils.custom_logger import get_logger, with_context
from src.utils.errors import InputError

logger = get_logger("Hotspot")


@dataclass
class HotspotCriteria:
    """Thresholds defining trans-eQTL and hotspots."""

    lod_min: float = HOTSPOT_CONFIG["lod_min"]
    window: float = HOTSPOT_CONFIG["window"]
    local_exclusion: float = HOTSPOT_CONFIG["local_exclusion"]
    count_min: int = HOTSPOT_CONFIG["count_min"]
    pad: float = HOTSPOT_CONFIG["pad"]

    def __post_init__(self):
        if self.window <= 0 or self.local_exclusion < 0 or self.pad < 0 or self.count_min < 0:
            raise InputError("window must be positive; local_exclusion, pad and count_min non-negative")


@dataclass
class HotspotInterval:
    """A hotspot: chromosome interval plus the trans traits mapping into it, by descending LOD."""

    chromosome: str
    center: float
    peak_count: int
    lo: float
    hi: float
    traits: list[TraitPeak] = field(default_factory=list)
    counts: Optional[np.ndarray] = None

    @property
    def interval(self) -> Interval:
        return Interval(self.chromosome, self.lo, self.hi)

    @property
    def trait_ids(self) -> list[str]:
        return [t.id_trait for t in self.traits]

    def to_dict(self) -> dict:
        return {
            "chr": self.chromosome,
            "lo": self.lo,
            "hi": self.hi,
            "peak_pos": self.center,
            "peak_count": self.peak_count,
            "traits": [{"id": t.id_trait, "lod": t.lod, "pos": t.position} for t in self.traits],
        }


def is_local(peak: TraitPeak, meta: TraitMeta, local_exclusion: float) -> bool:
    """A peak is local when it lies on the gene's chromosome within local_exclusion cM; unannotated genes are trans."""
    if not meta.is_annotated:
        return False
    return meta.chromosome == peak.chromosome and abs(meta.position - peak.position) < local_exclusion


def trans_peaks(
    peaks: list[TraitPeak],
    trait_meta: dict[str, TraitMeta],
    lod_min: float,
    local_exclusion: float,
) -> list[TraitPeak]:
    """Peaks with LOD >= lod_min that are not local."""
    unannotated = {p.id_trait for p in peaks if not trait_meta.get(p.id_trait, TraitMeta(p.id_trait)).is_annotated}
    if unannotated:
        logger.warning(f"{len(unannotated)} traits without genomic position are treated as trans")
    return [
        p
        for p in peaks
        if p.lod >= lod_min and not is_local(p, trait_meta.get(p.id_trait, TraitMeta(p.id_trait)), local_exclusion)
    ]


def count_trans_eqtl(
    peaks: list[TraitPeak],
    trait_meta: dict[str, TraitMeta],
    grid: Grid,
    lod_min: float = HOTSPOT_CONFIG["lod_min"],
    window: float = HOTSPOT_CONFIG["window"],
    local_exclusion: float = HOTSPOT_CONFIG["local_exclusion"],
) -> dict[str, np.ndarray]:
    """Number of trans peaks within window/2 cM of each grid position."""
    qualifying = trans_peaks(peaks, trait_meta, lod_min, local_exclusion)
    counts = {}
    for chrom in grid.chromosomes:
        peak_positions = np.array([p.position for p in qualifying if p.chromosome == chrom])
        grid_positions = grid.positions[chrom]
        if len(peak_positions) == 0:
            counts[chrom] = np.zeros(len(grid_positions), dtype=int)
            continue
        near = np.abs(peak_positions[None, :] - grid_positions[:, None]) <= window / 2.0
        counts[chrom] = near.sum(axis=1).astype(int)
    return counts


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive (start, stop) index pairs of the True runs in a boolean vector."""
    padded = np.concatenate([[False], mask, [False]]).astype(int)
    edges = np.diff(padded)
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1) - 1))


def define_hotspots(
    counts: dict[str, np.ndarray],
    grid: Grid,
    peaks: list[TraitPeak],
    trait_meta: dict[str, TraitMeta],
    criteria: Optional[HotspotCriteria] = None,
) -> list[HotspotInterval]:
    """One hotspot per contiguous region with count > count_min, padded and clipped to the chromosome.

    An empty list means no hotspot.
    """
    criteria = criteria or HotspotCriteria()
    qualifying = trans_peaks(peaks, trait_meta, criteria.lod_min, criteria.local_exclusion)
    hotspots = []
    for chrom in grid.chromosomes:
        positions = grid.positions[chrom]
        for start, stop in _runs(counts[chrom] > criteria.count_min):
            run = counts[chrom][start : stop + 1]
            center_index = start + int(np.argmax(run))
            lo = max(float(positions[start]) - criteria.pad, float(positions[0]))
            hi = min(float(positions[stop]) + criteria.pad, float(positions[-1]))
            members = sorted(
                (p for p in qualifying if p.chromosome == chrom and lo <= p.position <= hi),
                key=lambda p: (-p.lod, p.id_trait),
            )
            hotspots.append(
                HotspotInterval(
                    chromosome=chrom,
                    center=float(positions[center_index]),
                    peak_count=int(counts[chrom][center_index]),
                    lo=lo,
                    hi=hi,
                    traits=members,
                    counts=counts[chrom],
                )
            )
    if hotspots:
        logger.info(f"{len(hotspots)} hotspots: {', '.join(str(h.interval) for h in hotspots)}")
    else:
        logger.info(f"No hotspot: no count exceeds {criteria.count_min}")
    return hotspots


def hotspot_from_interval(
    interval: Interval,
    peaks: list[TraitPeak],
    trait_meta: dict[str, TraitMeta],
    criteria: Optional[HotspotCriteria] = None,
) -> HotspotInterval:
    """Hotspot for a user-given interval: the trans peaks inside it, by descending LOD."""
    criteria = criteria or HotspotCriteria()
    members = sorted(
        (
            p
            for p in trans_peaks(peaks, trait_meta, criteria.lod_min, criteria.local_exclusion)
            if interval.contains(p.chromosome, p.position)
        ),
        key=lambda p: (-p.lod, p.id_trait),
    )
    center = members[0].position if members else (interval.lo + interval.hi) / 2.0
    return HotspotInterval(interval.chromosome, center, len(members), interval.lo, interval.hi, members)


def select_top_traits(
    hotspot: HotspotInterval,
    cross: Cross,
    k: int,
    exclude_same_chr: bool = False,
) -> list[str]:
    """The k highest-LOD traits of a hotspot (ties by trait id), optionally without genes on its chromosome."""
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}")
    traits = hotspot.traits
    if exclude_same_chr:
        traits = [t for t in traits if cross.meta(t.id_trait).chromosome != hotspot.chromosome]
    if not traits:
        raise InputError(f"hotspot {hotspot.interval} has no trait to select")
    ordered = sorted(traits, key=lambda t: (-t.lod, t.id_trait))
    selected = [t.id_trait for t in ordered[:k]]
    if len(selected) < k:
        logger.info(f"Hotspot {hotspot.interval} has {len(selected)} traits, fewer than the {k} requested")
    return selected


def hotspot_effects(hotspot: HotspotInterval) -> list[dict]:
    """Signed LOD, position and effect estimates of every trait in the hotspot."""
    rows = []
    for peak in hotspot.traits:
        if peak.effects is None:
            with_context(logger, trait=peak.id_trait, chr=peak.chromosome).warning("no effect estimates")
        rows.append(
            {
                "trait": peak.id_trait,
                "chr": peak.chromosome,
                "pos": peak.position,
                "lod": peak.lod,
                "signed_lod": peak.signed_lod,
                "a": None if peak.effects is None else peak.effects.additive,
                "d": None if peak.effects is None else peak.effects.dominance,
            }
        )
    return rows
