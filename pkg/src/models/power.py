"""Power study of the one-vs-two QTL test on simulated intercrosses."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Optional

import numpy as np
from tqdm import tqdm

from src.config import DISSECTION_CONFIG, POWER_CONFIG
from src.constants import MapFunction, SearchMode
from src.genetics.genoprob import HmmConfig, calc_genoprob
from src.genetics.simulation import simulate_cross
from src.models.significance import DissectionContext, parametric_bootstrap, pvalue
from src.utils.classes import Interval
from src.utils.custom_logger import get_logger, with_context
from src.utils.errors import InputError
from src.utils.scenario import PowerScenario
from src.utils.seeding import derive_seed

logger = get_logger("Power")


@dataclass
class ReplicateRecord:
    """Outcome of one simulated data set."""

    scenario_id: str
    a: float
    distance: float
    p: int
    split: str
    rep: int
    lod_2v1: float
    pvalue: float
    lambda1: float
    lambda2: float
    c_hat: int


@dataclass
class PowerEstimate:
    scenario: PowerScenario
    records: list[ReplicateRecord]
    alpha: float

    @property
    def power(self) -> float:
        return float(np.mean([r.pvalue <= self.alpha for r in self.records]))

    @property
    def standard_error(self) -> float:
        return float(np.sqrt(self.power * (1.0 - self.power) / len(self.records)))

    def summary(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario.id_scenario,
            "a": self.scenario.a,
            "distance": self.scenario.distance,
            "p": self.scenario.p,
            "split": self.scenario.split,
            "is_null": self.scenario.is_null,
            "n_reps": len(self.records),
            "null_reps": self.scenario.null_reps,
            "alpha": self.alpha,
            "power": self.power,
            "se": self.standard_error,
        }


def simulate_replicate(
    scenario: PowerScenario,
    rep: int,
    mode: SearchMode = SearchMode(DISSECTION_CONFIG["mode"]),
    starts: int = DISSECTION_CONFIG["starts"],
) -> ReplicateRecord:
    """Simulate, dissect the whole chromosome and compute the bootstrap p-value of one replicate."""
    cross = simulate_cross(scenario, derive_seed(scenario.seed, rep))
    gp = calc_genoprob(cross, HmmConfig(map_function=MapFunction.HALDANE.value, step=scenario.grid_step))
    chromosome = cross.genetic_map.chromosomes[0]
    context = DissectionContext(
        gp=gp,
        covariates=cross.covariates,
        interval=Interval(chromosome, *cross.genetic_map.chromosome_range(chromosome)),
        Y=cross.phenotypes,
        trait_ids=cross.trait_ids,
        mode=mode,
        starts=starts,
        seed=derive_seed(scenario.seed, rep, 1),
    )
    observed = context.analyze(context.Y)
    nulls = parametric_bootstrap(
        context, observed.lambda_hat_1qtl, scenario.null_reps, seed=derive_seed(scenario.seed, rep, 2)
    )
    return ReplicateRecord(
        scenario_id=scenario.id_scenario,
        a=scenario.a,
        distance=scenario.distance,
        p=scenario.p,
        split=scenario.split,
        rep=rep,
        lod_2v1=observed.lod_2v1,
        pvalue=pvalue(observed.lod_2v1, nulls),
        lambda1=observed.lambda1_hat,
        lambda2=observed.lambda2_hat,
        c_hat=observed.c_hat,
    )


def run_power(
    scenario: PowerScenario,
    threads: int = 1,
    alpha: float = POWER_CONFIG["alpha"],
    mode: SearchMode = SearchMode(DISSECTION_CONFIG["mode"]),
    starts: int = DISSECTION_CONFIG["starts"],
    progress: bool = False,
) -> PowerEstimate:
    """Fraction of replicates with bootstrap p-value <= alpha."""
    if scenario.null_reps < 1:
        raise InputError("a power estimate needs null_reps >= 1")
    context_logger = with_context(logger, scenario=scenario.id_scenario)
    context_logger.info(f"{scenario.n_reps} replicates x {scenario.null_reps} bootstrap samples")

    def replicate(rep: int) -> ReplicateRecord:
        return simulate_replicate(scenario, rep, mode, starts)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        records = list(
            tqdm(
                executor.map(replicate, range(scenario.n_reps)),
                total=scenario.n_reps,
                desc=scenario.id_scenario,
                disable=not progress,
            )
        )
    estimate = PowerEstimate(scenario=scenario, records=records, alpha=alpha)
    context_logger.info(f"power {estimate.power:.3f} (se {estimate.standard_error:.3f})")
    return estimate


def scenarios_from_grid(
    grid: dict, overrides: Optional[dict[str, Any]] = None, panels: Optional[list[str]] = None
) -> list[PowerScenario]:
    """Every (panel, a, distance) cell of a design grid; overrides replace the grid defaults."""
    defaults = {**grid.get("defaults", {}), **(overrides or {})}
    selected = panels or sorted(grid["panels"])
    unknown = set(selected) - set(grid["panels"])
    if unknown:
        raise InputError(f"unknown panels {sorted(unknown)}; available: {sorted(grid['panels'])}")
    scenarios = []
    for panel in selected:
        for a in grid["a"]:
            for distance in grid["distance"]:
                scenarios.append(PowerScenario(a=float(a), distance=float(distance), **grid["panels"][panel], **defaults))
    return scenarios


def run_power_grid(
    grid: dict,
    overrides: Optional[dict[str, Any]] = None,
    panels: Optional[list[str]] = None,
    threads: int = 1,
    alpha: float = POWER_CONFIG["alpha"],
    progress: bool = False,
) -> list[PowerEstimate]:
    scenarios = scenarios_from_grid(grid, overrides, panels)
    logger.info(f"Power grid with {len(scenarios)} scenarios")
    return [run_power(scenario, threads=threads, alpha=alpha, progress=progress) for scenario in scenarios]


def record_rows(estimates: list[PowerEstimate]) -> list[dict[str, Any]]:
    return [asdict(record) for estimate in estimates for record in estimate.records]
