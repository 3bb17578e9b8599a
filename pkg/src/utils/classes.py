"""Module for classes used in the data model of a cross."""

import hashlib
import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from src.utils.errors import InputError


@dataclass(frozen=True)
class Marker:
    """A genotyped marker on the genetic map."""

    id_marker: str
    chromosome: str
    position: float  # cM


class GeneticMap:
    """Ordered chromosomes, each with markers in map order."""

    def __init__(self, markers_by_chr: dict[str, list[tuple[str, float]]]):
        self.chromosomes: list[str] = list(markers_by_chr.keys())
        self.markers: dict[str, list[Marker]] = {
            chrom: [Marker(id_marker, chrom, float(pos)) for id_marker, pos in markers]
            for chrom, markers in markers_by_chr.items()
        }
        self._column: dict[str, int] = {}
        for marker in self.iter_markers():
            self._column[marker.id_marker] = len(self._column)

    def __str__(self):
        return f"GeneticMap({len(self.chromosomes)} chromosomes, {self.n_markers} markers)"

    @property
    def n_markers(self) -> int:
        return len(self._column)

    def iter_markers(self):
        """Markers across the genome in map order."""
        for chrom in self.chromosomes:
            yield from self.markers[chrom]

    def marker_ids(self) -> list[str]:
        return [marker.id_marker for marker in self.iter_markers()]

    def positions(self, chromosome: str) -> np.ndarray:
        return np.array([marker.position for marker in self.markers[chromosome]], dtype=float)

    def columns(self, chromosome: str) -> np.ndarray:
        """Genotype-matrix columns of the markers on a chromosome."""
        return np.array([self._column[marker.id_marker] for marker in self.markers[chromosome]], dtype=int)

    def column_of(self, id_marker: str) -> int:
        return self._column[id_marker]

    def chromosome_range(self, chromosome: str) -> tuple[float, float]:
        positions = self.positions(chromosome)
        return float(positions[0]), float(positions[-1])


@dataclass(frozen=True)
class TraitMeta:
    """Genomic location of the gene behind an expression trait, when known."""

    id_trait: str
    chromosome: Optional[str] = None
    position: Optional[float] = None

    @property
    def is_annotated(self) -> bool:
        return self.chromosome is not None and self.position is not None


@dataclass
class CovariateSet:
    """Additive and interactive covariate columns, one row per individual."""

    additive: np.ndarray
    interactive: np.ndarray
    additive_names: list[str] = field(default_factory=list)
    interactive_names: list[str] = field(default_factory=list)

    @classmethod
    def empty(cls, n: int) -> "CovariateSet":
        return cls(additive=np.zeros((n, 0)), interactive=np.zeros((n, 0)))

    @property
    def n(self) -> int:
        return self.additive.shape[0]

    def subset(self, rows: np.ndarray) -> "CovariateSet":
        return replace(self, additive=self.additive[rows], interactive=self.interactive[rows])


@dataclass
class Cross:
    """An F2 intercross: genotypes, genetic map, expression traits and covariates."""

    individuals: list[str]
    genotypes: np.ndarray  # individuals x markers, codes 0/1/2, MISSING_GENOTYPE for NA
    genetic_map: GeneticMap
    phenotypes: np.ndarray  # individuals x traits, NaN for NA
    trait_ids: list[str]
    trait_meta: dict[str, TraitMeta]
    covariates: CovariateSet

    def __post_init__(self):
        n = len(self.individuals)
        if self.genotypes.shape != (n, self.genetic_map.n_markers):
            raise InputError(
                f"genotype matrix is {self.genotypes.shape}, expected ({n}, {self.genetic_map.n_markers})"
            )
        if self.phenotypes.shape != (n, len(self.trait_ids)):
            raise InputError(f"phenotype matrix is {self.phenotypes.shape}, expected ({n}, {len(self.trait_ids)})")
        if len(set(self.trait_ids)) != len(self.trait_ids):
            raise InputError("trait ids are not unique")
        if self.covariates.n != n:
            raise InputError(f"covariates have {self.covariates.n} rows, expected {n}")

    def __str__(self):
        return (
            f"Cross({self.n_individuals} individuals, {self.genetic_map.n_markers} markers, "
            f"{len(self.trait_ids)} traits)"
        )

    @property
    def n_individuals(self) -> int:
        return len(self.individuals)

    def trait_index(self, id_trait: str) -> int:
        try:
            return self.trait_ids.index(id_trait)
        except ValueError as error:
            raise InputError(f"unknown trait {id_trait}") from error

    def trait_values(self, id_trait: str) -> np.ndarray:
        return self.phenotypes[:, self.trait_index(id_trait)]

    def trait_matrix(self, trait_ids: list[str]) -> np.ndarray:
        return self.phenotypes[:, [self.trait_index(t) for t in trait_ids]]

    def meta(self, id_trait: str) -> TraitMeta:
        return self.trait_meta.get(id_trait, TraitMeta(id_trait))

    def with_phenotypes(self, phenotypes: np.ndarray) -> "Cross":
        return replace(self, phenotypes=phenotypes)

    def fingerprint(self) -> str:
        """SHA-256 over the in-memory model, stable across loads of identical files."""
        digest = hashlib.sha256()
        digest.update("\n".join(self.individuals).encode())
        digest.update("\n".join(self.genetic_map.marker_ids()).encode())
        for marker in self.genetic_map.iter_markers():
            digest.update(f"{marker.chromosome}:{marker.position!r}".encode())
        digest.update(np.ascontiguousarray(self.genotypes, dtype="<i1").tobytes())
        digest.update("\n".join(self.trait_ids).encode())
        digest.update(np.ascontiguousarray(self.phenotypes, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.covariates.additive, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.covariates.interactive, dtype="<f8").tobytes())
        return digest.hexdigest()


_INTERVAL_PATTERN = re.compile(r"^\s*([^:\s]+)\s*:\s*([-+0-9.eE]+)\s*-\s*([-+0-9.eE]+)\s*$")


@dataclass(frozen=True)
class Interval:
    """A chromosome interval [lo, hi] in cM."""

    chromosome: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise InputError(f"interval {self} has lo > hi")

    def __str__(self):
        return f"{self.chromosome}:{self.lo:g}-{self.hi:g}"

    @classmethod
    def parse(cls, text: str) -> "Interval":
        """Parse 'chr:lo-hi'."""
        match = _INTERVAL_PATTERN.match(text)
        if match is None:
            raise InputError(f"cannot parse interval '{text}', expected chr:lo-hi")
        return cls(match.group(1), float(match.group(2)), float(match.group(3)))

    def contains(self, chromosome: str, position: float) -> bool:
        return chromosome == self.chromosome and self.lo <= position <= self.hi
