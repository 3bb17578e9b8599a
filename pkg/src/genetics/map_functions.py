"""Conversion of genetic distance (cM) to recombination fraction."""

import math
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.optimize import bisect

from src.constants import MapFunction
from src.utils.errors import InputError

_R_UPPER = 0.5 - 1e-15
_TOLERANCE = 1e-12


def _carter_falconer_morgans(r: float) -> float:
    """Map distance m(r) = [atanh(2r) + atan(2r)] / 4, in Morgans."""
    return 0.25 * (math.atanh(2.0 * r) + math.atan(2.0 * r))


@lru_cache(maxsize=65536)
def _carter_falconer_inverse(morgans: float) -> float:
    if morgans >= _carter_falconer_morgans(_R_UPPER):
        return _R_UPPER
    # |m(r) - d| < 1e-12 wherever float spacing in r allows it (all distances below a few hundred cM)
    return bisect(lambda x: _carter_falconer_morgans(x) - morgans, 0.0, _R_UPPER, xtol=_TOLERANCE * 1e-3, maxiter=200)


def map_to_recfrac(distance: float, map_function: Union[MapFunction, str] = MapFunction.CARTER_FALCONER) -> float:
    """Recombination fraction for a distance in cM under the Haldane or Carter-Falconer map function."""
    map_function = MapFunction(map_function)
    if distance < 0:
        raise InputError(f"genetic distance must be non-negative, got {distance}")
    if distance == 0:
        return 0.0
    if map_function is MapFunction.HALDANE:
        return 0.5 * (1.0 - math.exp(-2.0 * distance / 100.0))
    return _carter_falconer_inverse(float(distance) / 100.0)


def recfrac_array(distances: np.ndarray, map_function: Union[MapFunction, str]) -> np.ndarray:
    """Vectorized map_to_recfrac over an array of distances."""
    return np.array([map_to_recfrac(float(d), map_function) for d in np.ravel(distances)]).reshape(np.shape(distances))
