"""Conditional genotype probabilities on a pseudomarker grid, by a hidden Markov model."""

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.config import HMM_CONFIG
from src.constants import GENOPROB_MAGIC, GENOTYPE_LABELS, MISSING_GENOTYPE, Genotype, MapFunction
from src.genetics.map_functions import recfrac_array
from src.utils.classes import Cross, GeneticMap, Interval
from src.utils.custom_logger import get_logger
from src.utils.errors import ComputationError, CrossFormatError, InputError

logger = get_logger("GenoProb")

_PRIOR = np.array([0.25, 0.5, 0.25])


@dataclass
class HmmConfig:
    """Genotyping error rate, map function and maximal grid spacing."""

    error_rate: float = HMM_CONFIG["error_rate"]
    map_function: str = HMM_CONFIG["map_function"]
    step: float = HMM_CONFIG["step"]

    def __post_init__(self):
        if not 0 <= self.error_rate < 0.5:
            raise InputError(f"error_rate must lie in [0, 0.5), got {self.error_rate}")
        if not self.step > 0:
            raise InputError(f"step must be positive, got {self.step}")
        self.map_function = MapFunction(self.map_function).value


@dataclass
class Grid:
    """Per-chromosome positions: markers plus inserted pseudomarkers."""

    chromosomes: list[str]
    positions: dict[str, np.ndarray]
    ids: dict[str, list[str]]
    marker_columns: dict[str, np.ndarray]  # genotype column, -1 for pseudomarkers

    def n_positions(self, chromosome: Optional[str] = None) -> int:
        if chromosome is not None:
            return len(self.positions[chromosome])
        return sum(len(self.positions[c]) for c in self.chromosomes)

    def interval_indices(self, interval: Interval) -> np.ndarray:
        """Grid indices on the interval's chromosome with lo <= pos <= hi."""
        if interval.chromosome not in self.positions:
            raise InputError(f"chromosome {interval.chromosome} not on the grid")
        positions = self.positions[interval.chromosome]
        indices = np.flatnonzero((positions >= interval.lo) & (positions <= interval.hi))
        if len(indices) == 0:
            raise InputError(f"interval {interval} contains no grid position")
        return indices

    def nearest_index(self, chromosome: str, position: float) -> int:
        return int(np.argmin(np.abs(self.positions[chromosome] - position)))

    def to_dict(self) -> dict:
        return {
            chrom: {
                "ids": self.ids[chrom],
                "pos": self.positions[chrom].tolist(),
                "marker_column": self.marker_columns[chrom].tolist(),
            }
            for chrom in self.chromosomes
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Grid":
        return cls(
            chromosomes=list(data.keys()),
            positions={c: np.array(v["pos"], dtype=float) for c, v in data.items()},
            ids={c: list(v["ids"]) for c, v in data.items()},
            marker_columns={c: np.array(v["marker_column"], dtype=int) for c, v in data.items()},
        )


@dataclass
class GenoProb:
    """Genotype probabilities: per chromosome an (individuals x positions x 3) array over (BB, BR, RR)."""

    grid: Grid
    probs: dict[str, np.ndarray]
    individuals: list[str]
    config: HmmConfig = field(default_factory=HmmConfig)

    @property
    def n_individuals(self) -> int:
        return len(self.individuals)

    def at(self, chromosome: str, index: int) -> np.ndarray:
        """Probability triples (n x 3) at one grid position."""
        return self.probs[chromosome][:, index, :]

    def subset(self, rows: np.ndarray) -> "GenoProb":
        rows = np.asarray(rows)
        return GenoProb(
            grid=self.grid,
            probs={c: p[rows] for c, p in self.probs.items()},
            individuals=[self.individuals[i] for i in rows],
            config=self.config,
        )


def _pseudomarker_id(chromosome: str, position: float) -> str:
    return f"c{chromosome}.loc{round(position, 2):g}"


def insert_pseudomarkers(genetic_map: GeneticMap, step: float) -> Grid:
    """Add equally spaced pseudomarkers so adjacent grid positions are at most `step` cM apart."""
    positions, ids, columns = {}, {}, {}
    for chrom in genetic_map.chromosomes:
        markers = genetic_map.markers[chrom]
        chrom_pos: list[float] = [markers[0].position]
        chrom_ids: list[str] = [markers[0].id_marker]
        chrom_cols: list[int] = [genetic_map.column_of(markers[0].id_marker)]
        for left, right in zip(markers[:-1], markers[1:]):
            gap = right.position - left.position
            n_sub = max(1, math.ceil(gap / step - 1e-9))
            for k in range(1, n_sub):
                pos = left.position + gap * k / n_sub
                chrom_pos.append(pos)
                chrom_ids.append(_pseudomarker_id(chrom, pos))
                chrom_cols.append(-1)
            chrom_pos.append(right.position)
            chrom_ids.append(right.id_marker)
            chrom_cols.append(genetic_map.column_of(right.id_marker))
        positions[chrom] = np.array(chrom_pos)
        ids[chrom] = chrom_ids
        columns[chrom] = np.array(chrom_cols, dtype=int)
    return Grid(list(genetic_map.chromosomes), positions, ids, columns)


def transition_matrices(recfracs: np.ndarray) -> np.ndarray:
    """F2 transition matrices (gaps x 3 x 3) for two independent meioses."""
    r = np.asarray(recfracs, dtype=float)
    s = 1.0 - r
    T = np.empty((len(r), 3, 3))
    T[:, 0, 0] = s**2
    T[:, 0, 1] = 2 * r * s
    T[:, 0, 2] = r**2
    T[:, 1, 0] = r * s
    T[:, 1, 1] = s**2 + r**2
    T[:, 1, 2] = r * s
    T[:, 2, 0] = r**2
    T[:, 2, 1] = 2 * r * s
    T[:, 2, 2] = s**2
    return T


def _emissions(observed: np.ndarray, marker_columns: np.ndarray, error_rate: float) -> np.ndarray:
    """Emission probabilities (n x positions x 3); pseudomarkers and missing calls emit 1."""
    n = observed.shape[0]
    emit = np.ones((n, len(marker_columns), 3))
    for k, column in enumerate(marker_columns):
        if column < 0:
            continue
        calls = observed[:, column]
        typed = calls != MISSING_GENOTYPE
        emit[typed, k, :] = error_rate / 2.0
        emit[np.flatnonzero(typed), k, calls[typed]] = 1.0 - error_rate
    return emit


def _normalize(values: np.ndarray, chromosome: str, individuals: list[str]) -> np.ndarray:
    totals = values.sum(axis=-1, keepdims=True)
    if np.any(totals <= 0):
        bad = individuals[int(np.flatnonzero(totals[..., 0] <= 0)[0])]
        raise ComputationError(
            f"genotypes of individual {bad} on chromosome {chromosome} are impossible under error rate 0"
        )
    return values / totals


def _forward_backward(emit: np.ndarray, T: np.ndarray, chromosome: str, individuals: list[str]) -> np.ndarray:
    n, L, _ = emit.shape
    alpha = np.empty((n, L, 3))
    beta = np.empty((n, L, 3))
    alpha[:, 0, :] = _normalize(_PRIOR * emit[:, 0, :], chromosome, individuals)
    for k in range(1, L):
        alpha[:, k, :] = _normalize((alpha[:, k - 1, :] @ T[k - 1]) * emit[:, k, :], chromosome, individuals)
    beta[:, L - 1, :] = 1.0
    for k in range(L - 2, -1, -1):
        beta[:, k, :] = _normalize((emit[:, k + 1, :] * beta[:, k + 1, :]) @ T[k].T, chromosome, individuals)
    return _normalize(alpha * beta, chromosome, individuals)


def calc_genoprob(cross: Cross, config: Optional[HmmConfig] = None) -> GenoProb:
    """Forward-backward smoothing per individual and chromosome on the pseudomarker grid."""
    config = config or HmmConfig()
    logger.info(
        f"Computing genotype probabilities (error rate {config.error_rate}, "
        f"{config.map_function}, step {config.step} cM)"
    )
    grid = insert_pseudomarkers(cross.genetic_map, config.step)
    probs = {}
    for chrom in grid.chromosomes:
        gaps = np.diff(grid.positions[chrom])
        T = transition_matrices(recfrac_array(gaps, config.map_function))
        emit = _emissions(cross.genotypes, grid.marker_columns[chrom], config.error_rate)
        probs[chrom] = _forward_backward(emit, T, chrom, cross.individuals)
    logger.info(f"Genotype probabilities computed at {grid.n_positions()} grid positions")
    return GenoProb(grid=grid, probs=probs, individuals=list(cross.individuals), config=config)


def impute_genotype(gp: GenoProb, chromosome: str, index: int) -> np.ndarray:
    """Most probable genotype per individual; ties resolve to BB < BR < RR."""
    return np.argmax(gp.at(chromosome, index), axis=1).astype(int)


@dataclass
class RecombinantCalls:
    """Recombinant status in an interval; genotype is -1 for recombinants."""

    interval: Interval
    is_recombinant: np.ndarray
    genotype: np.ndarray

    @property
    def nonrecombinant(self) -> np.ndarray:
        return ~self.is_recombinant

    def labels(self) -> list[str]:
        return ["recombinant" if rec else GENOTYPE_LABELS[g] for rec, g in zip(self.is_recombinant, self.genotype)]


def classify_recombinants(cross: Cross, gp: GenoProb, interval: Interval) -> RecombinantCalls:
    """Call individuals recombinant when observed marker genotypes inside the interval disagree.

    Individuals with fewer than two typed markers in the interval fall back on the imputed
    genotypes at the interval ends.
    """
    genetic_map = cross.genetic_map
    if interval.chromosome not in genetic_map.chromosomes:
        raise InputError(f"chromosome {interval.chromosome} not in the map")
    positions = genetic_map.positions(interval.chromosome)
    inside = (positions >= interval.lo) & (positions <= interval.hi)
    if not inside.any():
        raise InputError(f"interval {interval} contains no genotyped marker")

    calls = cross.genotypes[:, genetic_map.columns(interval.chromosome)[inside]]
    typed = calls != MISSING_GENOTYPE
    n_typed = typed.sum(axis=1)
    lowest = np.where(typed, calls, len(Genotype)).min(axis=1)
    highest = np.where(typed, calls, -1).max(axis=1)

    indices = gp.grid.interval_indices(interval)
    left = impute_genotype(gp, interval.chromosome, int(indices[0]))
    right = impute_genotype(gp, interval.chromosome, int(indices[-1]))

    sparse = n_typed < 2
    is_recombinant = np.where(sparse, left != right, lowest != highest)
    genotype = np.where(sparse, left, lowest)
    genotype = np.where(is_recombinant, -1, genotype)
    logger.info(
        f"Interval {interval}: {int(is_recombinant.sum())} recombinant, "
        f"{int((~is_recombinant).sum())} non-recombinant individuals"
    )
    return RecombinantCalls(interval=interval, is_recombinant=is_recombinant, genotype=genotype.astype(int))


def genotype_fingerprint(cross: Cross) -> str:
    """SHA-256 over individuals, map and genotypes: what genotype probabilities depend on."""
    digest = hashlib.sha256()
    digest.update("\n".join(cross.individuals).encode())
    for marker in cross.genetic_map.iter_markers():
        digest.update(f"{marker.id_marker}@{marker.chromosome}:{marker.position!r}".encode())
    digest.update(np.ascontiguousarray(cross.genotypes, dtype="<i1").tobytes())
    return digest.hexdigest()


def write_genoprob_cache(gp: GenoProb, path: Union[str, Path], fingerprint: str = "") -> None:
    """Binary tensor (magic, little-endian dims, row-major float64) plus a JSON sidecar with the grid."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensor = np.concatenate([gp.probs[c] for c in gp.grid.chromosomes], axis=1)
    with open(path, "wb") as file:
        file.write(GENOPROB_MAGIC)
        file.write(struct.pack("<III", *tensor.shape))
        file.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    sidecar = {
        "individuals": gp.individuals,
        "config": asdict(gp.config),
        "fingerprint": fingerprint,
        "grid": gp.grid.to_dict(),
    }
    with open(f"{path}.json", "w", encoding="utf-8") as file:
        file.write(json.dumps(sidecar, indent=4))
    logger.info(f"Genotype probabilities cached in {path}")


def read_genoprob_cache(path: Union[str, Path]) -> GenoProb:
    """Inverse of write_genoprob_cache."""
    path = Path(path)
    try:
        with open(f"{path}.json", "r", encoding="utf-8") as file:
            sidecar = json.load(file)
        with open(path, "rb") as file:
            payload = file.read()
    except FileNotFoundError as error:
        logger.error(f"Genotype probability cache {path} not found")
        raise InputError(f"file not found: {error.filename}") from error

    header = len(GENOPROB_MAGIC)
    if payload[:header] != GENOPROB_MAGIC:
        raise CrossFormatError(path, "not a genotype probability cache (bad magic bytes)")
    dims = struct.unpack("<III", payload[header : header + 12])
    tensor = np.frombuffer(payload[header + 12 :], dtype="<f8")
    if tensor.size != dims[0] * dims[1] * dims[2]:
        raise CrossFormatError(path, f"tensor size {tensor.size} does not match dims {dims}")
    tensor = tensor.reshape(dims).astype(float)

    grid = Grid.from_dict(sidecar["grid"])
    probs, start = {}, 0
    for chrom in grid.chromosomes:
        stop = start + grid.n_positions(chrom)
        probs[chrom] = tensor[:, start:stop, :]
        start = stop
    return GenoProb(grid=grid, probs=probs, individuals=sidecar["individuals"], config=HmmConfig(**sidecar["config"]))


def _cache_is_fresh(path: Path, cross: Cross, config: HmmConfig, fingerprint: str) -> bool:
    with open(f"{path}.json", "r", encoding="utf-8") as file:
        sidecar = json.load(file)
    return (
        sidecar.get("fingerprint") == fingerprint
        and sidecar.get("individuals") == list(cross.individuals)
        and HmmConfig(**sidecar["config"]) == config
    )


def cached_genoprob(cross: Cross, config: HmmConfig, cache_path: Optional[Union[str, Path]] = None) -> GenoProb:
    """Genotype probabilities from the cache when it matches the cross and configuration, else recomputed."""
    if cache_path is None:
        return calc_genoprob(cross, config)
    cache_path = Path(cache_path)
    fingerprint = genotype_fingerprint(cross)
    if cache_path.exists() and Path(f"{cache_path}.json").exists():
        if _cache_is_fresh(cache_path, cross, config, fingerprint):
            logger.info(f"Genotype probabilities read from cache {cache_path}")
            return read_genoprob_cache(cache_path)
        logger.warning(f"Cache {cache_path} does not match the cross or HMM settings; recomputing")
    gp = calc_genoprob(cross, config)
    write_genoprob_cache(gp, cache_path, fingerprint)
    return gp
