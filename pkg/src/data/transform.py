"""Transformations applied to expression traits before mapping."""

import numpy as np
from scipy.stats import norm, rankdata

from src.utils.classes import Cross
from src.utils.custom_logger import get_logger
from src.utils.errors import InputError

logger = get_logger("Transform")


def quantile_normalize(values: np.ndarray) -> np.ndarray:
    """Map non-missing values to normal quantiles, Phi^-1((R_i - 0.5) / n), with average ranks for ties.

    Missing values (NaN) stay missing; n counts the non-missing values only.
    """
    values = np.asarray(values, dtype=float)
    observed = ~np.isnan(values)
    n = int(observed.sum())
    if n < 2:
        raise InputError(f"quantile normalization needs at least 2 non-missing values, got {n}")

    result = np.full(values.shape, np.nan)
    ranks = rankdata(values[observed], method="average")
    result[observed] = norm.ppf((ranks - 0.5) / n)
    return result


def normalize_phenotypes(cross: Cross) -> Cross:
    """Return a copy of the cross with every trait transformed to normal quantiles."""
    logger.info(f"Transforming {len(cross.trait_ids)} traits to normal quantiles")
    transformed = np.empty_like(cross.phenotypes)
    for j, id_trait in enumerate(cross.trait_ids):
        try:
            transformed[:, j] = quantile_normalize(cross.phenotypes[:, j])
        except InputError as error:
            raise InputError(f"trait {id_trait}: {error}") from error
    return cross.with_phenotypes(transformed)
