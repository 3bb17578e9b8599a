"""Least-squares building blocks shared by the univariate and multivariate scans."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr

from src.genetics.genoprob import GenoProb
from src.utils.classes import CovariateSet
from src.utils.errors import SingularMatrixError

_RANK_TOLERANCE = 1e-10
_DET_TOLERANCE = 1e-12


def orthonormal_basis(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the column space of X via pivoted QR; collinear columns are dropped.

    Returns (Q, kept) where kept holds the indices of the retained columns, in original order.
    """
    if X.shape[1] == 0:
        return np.zeros((X.shape[0], 0)), np.zeros(0, dtype=int)
    Q, R, pivots = qr(X, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(R))
    rank = int(np.sum(diagonal > _RANK_TOLERANCE * max(diagonal[0], 1.0)))
    return Q[:, :rank], np.sort(pivots[:rank])


@dataclass
class LeastSquaresFit:
    """Coefficients over the kept design columns and the residual matrix."""

    beta: np.ndarray
    residuals: np.ndarray
    kept: np.ndarray
    n_columns: int

    @property
    def dropped(self) -> int:
        return self.n_columns - len(self.kept)


def fit_least_squares(X: np.ndarray, Y: np.ndarray) -> LeastSquaresFit:
    """beta = (X'X)^-1 X'Y over the linearly independent columns of X."""
    Y2 = Y.reshape(Y.shape[0], -1)
    _, kept = orthonormal_basis(X)
    beta, *_ = np.linalg.lstsq(X[:, kept], Y2, rcond=None)
    residuals = Y2 - X[:, kept] @ beta
    return LeastSquaresFit(beta=beta, residuals=residuals, kept=kept, n_columns=X.shape[1])


def log10_det(matrices: np.ndarray) -> np.ndarray:
    """log10 determinant of symmetric positive definite matrices (stacked on leading axes) via Cholesky."""
    matrices = np.asarray(matrices, dtype=float)
    scale = np.max(np.abs(np.diagonal(matrices, axis1=-2, axis2=-1)), axis=-1, keepdims=True)
    try:
        chol = np.linalg.cholesky(matrices)
    except np.linalg.LinAlgError as error:
        raise SingularMatrixError("residual matrix is singular; use fewer traits") from error
    diagonal = np.diagonal(chol, axis1=-2, axis2=-1)
    if np.any(diagonal**2 <= _DET_TOLERANCE * scale):
        raise SingularMatrixError("residual matrix is numerically singular; use fewer traits")
    return 2.0 * np.sum(np.log10(diagonal), axis=-1)


def null_design(covariates: CovariateSet, include_interactive: bool = False) -> np.ndarray:
    """Intercept and additive covariates (optionally also the interactive covariates)."""
    columns = [np.ones((covariates.n, 1)), covariates.additive]
    if include_interactive:
        columns.append(covariates.interactive)
    return np.hstack(columns)


def genotype_codings(probs: np.ndarray) -> np.ndarray:
    """Additive P(RR) - P(BB) and dominance P(BR) codings from (n x 3) probabilities."""
    return np.column_stack([probs[:, 2] - probs[:, 0], probs[:, 1]])


def full_design(probs: np.ndarray, covariates: CovariateSet) -> np.ndarray:
    """Intercept, covariates, genotype codings and interactive covariate x genotype coding columns."""
    codings = genotype_codings(probs)
    interactions = [covariates.interactive[:, [k]] * codings for k in range(covariates.interactive.shape[1])]
    return np.hstack([np.ones((covariates.n, 1)), covariates.additive, covariates.interactive, codings, *interactions])


def position_design(gp: GenoProb, chromosome: str, index: int, covariates: CovariateSet) -> np.ndarray:
    return full_design(gp.at(chromosome, index), covariates)
