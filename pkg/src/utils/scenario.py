"""Module for the power-study Scenario class."""

from dataclasses import dataclass

from src.config import POWER_CONFIG
from src.utils.errors import InputError


@dataclass
class PowerScenario:
    """One cell of the power study: p traits split between a left QTL and a QTL `distance` cM to its right."""

    a: float
    distance: float
    p: int = 10
    left_count: int = 5
    n_ind: int = POWER_CONFIG["n_ind"]
    n_markers: int = POWER_CONFIG["n_markers"]
    chr_length: float = POWER_CONFIG["chr_length"]
    left_position: float = POWER_CONFIG["left_position"]
    n_reps: int = POWER_CONFIG["n_reps"]
    null_reps: int = POWER_CONFIG["null_reps"]
    seed: int = 1
    grid_step: float = POWER_CONFIG["grid_step"]

    def __post_init__(self):
        if self.p < 2:
            raise InputError(f"a power scenario needs at least 2 traits, got p={self.p}")
        if not 0 <= self.left_count <= self.p:
            raise InputError(f"left_count must lie in [0, p], got {self.left_count}")
        if self.right_count < 1:
            raise InputError("the right QTL must affect at least one trait")
        if self.distance < 0:
            raise InputError(f"distance must be non-negative, got {self.distance}")
        if self.left_position + self.distance > self.chr_length:
            raise InputError("right QTL falls beyond the end of the chromosome")
        if self.n_markers < 2 or self.n_ind < 1 or self.n_reps < 1 or self.null_reps < 0:
            raise InputError("n_markers >= 2, n_ind >= 1, n_reps >= 1 and null_reps >= 0 are required")

    def __str__(self):
        return f"PowerScenario {self.id_scenario}"

    @property
    def right_count(self) -> int:
        return self.p - self.left_count

    @property
    def split(self) -> str:
        return f"{self.left_count}/{self.right_count}"

    @property
    def is_null(self) -> bool:
        return self.distance == 0

    @property
    def id_scenario(self) -> str:
        return f"p{self.p}_s{self.left_count}-{self.right_count}_a{self.a:g}_d{self.distance:g}"
