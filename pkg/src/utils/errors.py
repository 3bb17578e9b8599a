"""Exceptions raised by the dissection pipeline."""

from pathlib import Path
from typing import Optional, Union


class DissectionError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DissectionError):
    """Invalid user input: files, formats or option values."""

    exit_code = 2


class CrossFormatError(InputError):
    """A malformed input file, addressed by path and (1-based) line."""

    def __init__(self, path: Union[str, Path], message: str, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class ComputationError(DissectionError):
    """A numerical failure during the analysis."""

    exit_code = 1


class SingularMatrixError(ComputationError):
    """A residual or scatter matrix is not positive definite."""


class EmptyGenotypeClassError(ComputationError):
    """No individual is assigned to a genotype class where one is required."""

    def __init__(self, genotype: str, message: Optional[str] = None):
        self.genotype = genotype
        super().__init__(message or f"genotype class {genotype} is empty")
