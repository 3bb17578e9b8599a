"""Simulation of F2 intercross genotypes and additive multi-trait phenotypes."""

from typing import Optional, Union

import numpy as np

from src.constants import MapFunction
from src.genetics.map_functions import recfrac_array
from src.utils.classes import CovariateSet, Cross, GeneticMap, TraitMeta
from src.utils.scenario import PowerScenario


def even_map(n_markers: int, chr_length: float, chromosome: str = "1") -> GeneticMap:
    """Markers equally spaced on [0, chr_length], endpoints included."""
    positions = np.linspace(0.0, chr_length, n_markers)
    return GeneticMap({chromosome: [(f"m{k + 1}", float(pos)) for k, pos in enumerate(positions)]})


def _simulate_gametes(rng: np.random.Generator, n: int, recfracs: np.ndarray) -> np.ndarray:
    """Gamete alleles (n x markers), 0 = B and 1 = R, switching independently in each gap."""
    first = rng.random((n, 1)) < 0.5
    switches = rng.random((n, len(recfracs))) < recfracs
    return (np.cumsum(np.hstack([first, switches]), axis=1) % 2).astype(np.int8)


def sim_f2(
    n_ind: int,
    genetic_map: GeneticMap,
    map_function: Union[MapFunction, str] = MapFunction.HALDANE,
    seed: Optional[int] = None,
) -> np.ndarray:
    """F2 genotypes (n_ind x markers, codes 0/1/2 = BB/BR/RR) from two independent gametes per individual."""
    rng = np.random.default_rng(seed)
    blocks = []
    for chrom in genetic_map.chromosomes:
        recfracs = recfrac_array(np.diff(genetic_map.positions(chrom)), map_function)
        maternal = _simulate_gametes(rng, n_ind, recfracs)
        paternal = _simulate_gametes(rng, n_ind, recfracs)
        blocks.append(maternal + paternal)
    return np.hstack(blocks).astype(np.int8)


def qtl_columns(genetic_map: GeneticMap, scenario: PowerScenario, chromosome: str = "1") -> tuple[int, int]:
    """Genotype columns of the left and right QTL, snapped to the nearest marker."""
    positions = genetic_map.positions(chromosome)
    columns = genetic_map.columns(chromosome)
    left = columns[int(np.argmin(np.abs(positions - scenario.left_position)))]
    right = columns[int(np.argmin(np.abs(positions - (scenario.left_position + scenario.distance))))]
    return int(left), int(right)


def sim_traits(
    genotypes: np.ndarray,
    scenario: PowerScenario,
    genetic_map: GeneticMap,
    rng: np.random.Generator,
) -> np.ndarray:
    """Traits a * g + N(0, 1), with g in (-1, 0, 1) at the QTL assigned to each trait.

    The first left_count traits are driven by the left QTL and the rest by the right QTL.
    """
    left, right = qtl_columns(genetic_map, scenario)
    coding = genotypes.astype(float) - 1.0
    assigned = np.array([left] * scenario.left_count + [right] * scenario.right_count)
    signal = scenario.a * coding[:, assigned]
    return signal + rng.standard_normal((genotypes.shape[0], scenario.p))


def simulate_cross(scenario: PowerScenario, seed: int) -> Cross:
    """A complete simulated cross for one power-study replicate."""
    rng = np.random.default_rng(seed)
    genetic_map = even_map(scenario.n_markers, scenario.chr_length)
    genotypes = sim_f2(scenario.n_ind, genetic_map, MapFunction.HALDANE, seed=rng.integers(2**63))
    phenotypes = sim_traits(genotypes, scenario, genetic_map, rng)
    trait_ids = [f"trait{j + 1}" for j in range(scenario.p)]
    return Cross(
        individuals=[f"ind{i + 1}" for i in range(scenario.n_ind)],
        genotypes=genotypes,
        genetic_map=genetic_map,
        phenotypes=phenotypes,
        trait_ids=trait_ids,
        trait_meta={t: TraitMeta(t) for t in trait_ids},
        covariates=CovariateSet.empty(scenario.n_ind),
    )
