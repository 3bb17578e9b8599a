"""Shared fixtures: toy cross files and small simulated intercrosses."""

from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import pytest

from src.constants import GENOTYPE_LABELS
from src.genetics.genoprob import HmmConfig, calc_genoprob
from src.genetics.simulation import simulate_cross
from src.utils.classes import Cross
from src.utils.scenario import PowerScenario

HALDANE_HMM = HmmConfig(error_rate=0.002, map_function="haldane", step=2.0)


def write_csv(path: Path, rows: list[list], header: list[str]) -> Path:
    pd.DataFrame(rows, columns=header).to_csv(path, index=False)
    return path


def write_cross_files(directory: Path, cross: Cross, trait_meta: Optional[dict[str, tuple]] = None) -> dict[str, Path]:
    """Write a cross as genotype, map, phenotype (and trait annotation) CSV files."""
    markers = cross.genetic_map.marker_ids()
    individuals, phenotypes = cross.individuals, cross.phenotypes
    geno_rows = [[ind, *[GENOTYPE_LABELS[g] if g >= 0 else "NA" for g in row]] for ind, row in zip(individuals, cross.genotypes)]
    pheno_rows = [[ind, *["NA" if np.isnan(v) else repr(float(v)) for v in row]] for ind, row in zip(individuals, phenotypes)]
    map_rows = [[m.id_marker, m.chromosome, m.position] for m in cross.genetic_map.iter_markers()]
    paths = {
        "geno": write_csv(directory / "geno.csv", geno_rows, ["id", *markers]),
        "map": write_csv(directory / "map.csv", map_rows, ["marker", "chr", "pos_cM"]),
        "pheno": write_csv(directory / "pheno.csv", pheno_rows, ["id", *cross.trait_ids]),
    }
    if trait_meta is not None:
        meta_rows = [[t, chrom, pos] for t, (chrom, pos) in trait_meta.items()]
        paths["trait_meta"] = write_csv(directory / "trait_meta.csv", meta_rows, ["trait", "chr", "pos_cM"])
    return paths


@pytest.fixture
def toy_files(tmp_path) -> dict[str, Path]:
    """Three individuals, two markers, two traits."""
    (tmp_path / "geno.csv").write_text("id,m1,m2\nA,BB,BR\nB,RR,NA\nC,BR,BR\n", encoding="utf-8")
    (tmp_path / "map.csv").write_text("marker,chr,pos_cM\nm1,1,0.0\nm2,1,10.0\n", encoding="utf-8")
    (tmp_path / "pheno.csv").write_text("id,t1,t2\nA,1.5,NA\nB,2.0,3.0\nC,0.5,1.0\n", encoding="utf-8")
    return {"geno": tmp_path / "geno.csv", "map": tmp_path / "map.csv", "pheno": tmp_path / "pheno.csv"}


def small_scenario(**changes) -> PowerScenario:
    settings = dict(a=1.0, distance=0.0, p=6, left_count=3, n_ind=150, n_markers=21, chr_length=100.0, n_reps=1, null_reps=1)
    settings.update(changes)
    return PowerScenario(**settings)


@pytest.fixture(scope="session")
def single_qtl_cross() -> Cross:
    """150 individuals, 21 markers every 5 cM, 6 traits driven by one QTL at 50 cM."""
    return simulate_cross(small_scenario(), seed=11)


@pytest.fixture(scope="session")
def single_qtl_genoprob(single_qtl_cross):
    return calc_genoprob(single_qtl_cross, HALDANE_HMM)


@pytest.fixture(scope="session")
def two_qtl_cross() -> Cross:
    """3 traits at a QTL at 50 cM and 3 at a QTL at 80 cM, strong effects."""
    return simulate_cross(small_scenario(distance=30.0, a=1.0), seed=12)


@pytest.fixture(scope="session")
def two_qtl_genoprob(two_qtl_cross):
    return calc_genoprob(two_qtl_cross, HALDANE_HMM)
