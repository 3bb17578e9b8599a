"""Constants for the application."""

from enum import Enum, IntEnum
from pathlib import Path

ROOT_DIR = Path(__file__).resolve().parents[1]
DATA_DIR = ROOT_DIR / "data"
RESULTS_DIR = ROOT_DIR / "results"

# Paths
PATH_ROOT_SCENARIO = DATA_DIR / "scenarios/"
PATH_POWER_GRID = PATH_ROOT_SCENARIO / "power_grid.json"

# File formats
NA_TOKEN = "NA"
MISSING_GENOTYPE = -1
GENOPROB_MAGIC = b"GPRB1"
RSS_FLOOR = 1e-12


class Genotype(IntEnum):
    """F2 genotype codes; B is the first parental strain allele, R the second."""

    BB = 0
    BR = 1
    RR = 2

    @classmethod
    def from_label(cls, label: str) -> "Genotype":
        return cls[label]


GENOTYPE_LABELS = [g.name for g in Genotype]
RECOMBINANT_LABEL = "recombinant"


class MapFunction(Enum):
    """Genetic map functions (distance in cM to recombination fraction)."""

    HALDANE = "haldane"
    CARTER_FALCONER = "carter_falconer"


class SearchMode(Enum):
    """How the two-QTL surface is maximized for each cut-point."""

    EXHAUSTIVE = "exhaustive"
    COORDINATE = "coordinate"


class NullMethod(Enum):
    """Procedures to generate the null distribution of LOD_2v1."""

    BOOTSTRAP = "bootstrap"
    PERMUTATION = "permutation"
