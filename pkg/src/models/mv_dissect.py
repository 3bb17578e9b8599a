"""One-vs-two QTL dissection of a hotspot with a multivariate linear model.

For a design X at a putative QTL position, Y = X beta + E with RSS = E'E, and
LOD = (n/2) log10(|RSS_0| / |RSS|). The two-QTL model assigns the first c
position-sorted traits to a QTL at lambda_1 and the others to a QTL at lambda_2;
both trait blocks are fitted with their own design and their residuals pooled
into one p x p cross-product matrix.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from src.config import DISSECTION_CONFIG, SCAN_CONFIG
from src.constants import RSS_FLOOR, SearchMode
from src.genetics.genoprob import GenoProb
from src.models.regression import fit_least_squares, log10_det, null_design, orthonormal_basis, position_design
from src.utils.classes import CovariateSet, Interval
from src.utils.custom_logger import get_logger
from src.utils.errors import InputError
from src.utils.seeding import derive_rng

logger = get_logger("MvDissect")


@dataclass
class MvModelFit:
    """Least-squares fit of a multivariate linear model."""

    n: int
    p: int
    q: int
    beta_hat: np.ndarray
    rss: np.ndarray
    log10_det_rss: float
    fitted: np.ndarray = field(repr=False, default=None)


def check_trait_count(n: int, p: int, q: int) -> None:
    """The residual matrix needs p <= n - q - 2 to be usable."""
    if p > n - q - 2:
        raise InputError(f"{p} traits is too many for {n} individuals and {q} design columns (max {n - q - 2})")


def mv_fit(Y: np.ndarray, X: np.ndarray) -> MvModelFit:
    """beta = (X'X)^-1 X'Y, RSS = E'E and log10 |RSS| (by Cholesky)."""
    Y = np.asarray(Y, dtype=float).reshape(Y.shape[0], -1)
    n, p = Y.shape
    fit = fit_least_squares(X, Y)
    q = len(fit.kept)
    check_trait_count(n, p, q)
    rss = fit.residuals.T @ fit.residuals
    return MvModelFit(
        n=n,
        p=p,
        q=q,
        beta_hat=fit.beta,
        rss=rss,
        log10_det_rss=float(log10_det(rss)),
        fitted=Y - fit.residuals,
    )


def mv_lod(fit_null: MvModelFit, fit_alt: MvModelFit) -> float:
    """(n/2) (log10 |RSS_0| - log10 |RSS|)."""
    if fit_null.n != fit_alt.n or fit_null.p != fit_alt.p:
        raise InputError(f"fits differ in dimension: ({fit_null.n}, {fit_null.p}) vs ({fit_alt.n}, {fit_alt.p})")
    return fit_null.n / 2.0 * (fit_null.log10_det_rss - fit_alt.log10_det_rss)


@dataclass
class _PreparedTraits:
    """Projections of one trait matrix onto every position's design."""

    Y: np.ndarray
    W: np.ndarray  # positions x q x p, Q'Y
    S: np.ndarray  # positions x p x p, Y'PY
    R: np.ndarray  # positions x p x p, residual cross-products
    YtY: np.ndarray
    null_log10_det: float
    rss0_diagonal: np.ndarray


class IntervalModel:
    """Designs for every grid position of an interval, shared by all scans of one data set."""

    def __init__(
        self,
        gp: GenoProb,
        covariates: CovariateSet,
        interval: Interval,
        null_includes_interactive: bool = SCAN_CONFIG["null_includes_interactive"],
    ):
        self.interval = interval
        self.chromosome = interval.chromosome
        self.indices = gp.grid.interval_indices(interval)
        self.positions = gp.grid.positions[self.chromosome][self.indices]
        self.n = gp.n_individuals
        self.covariates = covariates

        self.null_design = null_design(covariates, null_includes_interactive)
        self.null_basis, _ = orthonormal_basis(self.null_design)

        self.designs, bases = [], []
        for index in self.indices:
            X = position_design(gp, self.chromosome, int(index), covariates)
            Q, kept = orthonormal_basis(X)
            self.designs.append(X[:, kept])
            bases.append(Q)
        self.q = max(Q.shape[1] for Q in bases)
        self.bases = np.zeros((len(bases), self.n, self.q))
        for k, Q in enumerate(bases):
            self.bases[k, :, : Q.shape[1]] = Q
        # overlap[l, m] = Q_l' Q_m
        self.overlap = np.transpose(np.tensordot(self.bases, self.bases, axes=([1], [1])), (0, 2, 1, 3)).copy()

    def __str__(self):
        return f"IntervalModel({self.interval}, {len(self.positions)} positions, n={self.n}, q={self.q})"

    @property
    def n_positions(self) -> int:
        return len(self.positions)

    def prepare(self, Y: np.ndarray) -> _PreparedTraits:
        Y = np.asarray(Y, dtype=float)
        if Y.shape[0] != self.n:
            raise InputError(f"trait matrix has {Y.shape[0]} rows, expected {self.n}")
        check_trait_count(self.n, Y.shape[1], self.q)
        W = np.matmul(np.swapaxes(self.bases, 1, 2), Y)
        S = np.matmul(np.swapaxes(W, 1, 2), W)
        YtY = Y.T @ Y
        R = YtY[None, :, :] - S
        W0 = self.null_basis.T @ Y
        rss0 = YtY - W0.T @ W0
        return _PreparedTraits(
            Y=Y,
            W=W,
            S=S,
            R=R,
            YtY=YtY,
            null_log10_det=float(log10_det(rss0)),
            rss0_diagonal=np.maximum(np.diag(rss0).copy(), RSS_FLOOR),
        )

    def lod_from_log10_det(self, state: _PreparedTraits, values: np.ndarray) -> np.ndarray:
        return self.n / 2.0 * (state.null_log10_det - values)

    def single_qtl_curve(self, state: _PreparedTraits) -> np.ndarray:
        return self.lod_from_log10_det(state, log10_det(state.R))

    def univariate_curves(self, state: _PreparedTraits) -> np.ndarray:
        """Per-trait Haley-Knott LOD curves (positions x traits)."""
        rss1 = np.maximum(np.diagonal(state.R, axis1=1, axis2=2), RSS_FLOOR)
        return np.maximum(self.n / 2.0 * np.log10(state.rss0_diagonal[None, :] / rss1), 0.0)

    def cross_products(self, state: _PreparedTraits, first: np.ndarray, second: np.ndarray) -> np.ndarray:
        """E(first)' E(second) for paired position indices, (m x p x p)."""
        middle = np.matmul(np.matmul(np.swapaxes(state.W[first], 1, 2), self.overlap[first, second]), state.W[second])
        return state.YtY[None, :, :] - state.S[first] - state.S[second] + middle

    def two_qtl_lod(
        self, state: _PreparedTraits, first: np.ndarray, second: np.ndarray, c: int, G: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """LOD_2^(c) for paired positions: first c traits at `first`, the rest at `second`."""
        if G is None:
            G = self.cross_products(state, first, second)
        rss = G.copy()
        rss[:, :c, :c] = state.R[first][:, :c, :c]
        rss[:, c:, c:] = state.R[second][:, c:, c:]
        rss[:, c:, :c] = np.swapaxes(rss[:, :c, c:], 1, 2)
        return self.lod_from_log10_det(state, log10_det(rss))

    def row(self, state: _PreparedTraits, first: int, c: int) -> np.ndarray:
        """LOD_2^(c)(first, lambda_2) for all lambda_2."""
        everywhere = np.arange(self.n_positions)
        return self.two_qtl_lod(state, np.full(self.n_positions, first), everywhere, c)

    def column(self, state: _PreparedTraits, second: int, c: int) -> np.ndarray:
        """LOD_2^(c)(lambda_1, second) for all lambda_1."""
        everywhere = np.arange(self.n_positions)
        return self.two_qtl_lod(state, everywhere, np.full(self.n_positions, second), c)


@dataclass
class MvScan1Result:
    """Single-QTL multivariate scan over an interval."""

    positions: np.ndarray
    lod: np.ndarray
    M1: float
    index: int

    @property
    def position(self) -> float:
        return float(self.positions[self.index])


@dataclass
class CutResult:
    """Maximum of LOD_2^(c) and where it is attained."""

    c: int
    M2_c: float
    index1: int
    index2: int


@dataclass
class TraitOrder:
    """Traits sorted by univariate QTL position, ties shuffled with a recorded seed."""

    trait_ids: list[str]
    order: np.ndarray
    positions: np.ndarray
    lods: np.ndarray
    seed: int


@dataclass
class TwoVsOneResult:
    """Outcome of the one-vs-two QTL test for one hotspot."""

    M1: float
    lambda_hat_1qtl: float
    M2: float
    c_hat: int
    lambda1_hat: float
    lambda2_hat: float
    lod_2v1: float
    positions: np.ndarray
    lod_1qtl: np.ndarray
    per_cutpoint: list[CutResult]
    profile_left: np.ndarray
    profile_right: np.ndarray
    trait_order: TraitOrder
    mode: str
    seed: int
    pvalue: Optional[float] = None

    @property
    def per_cutpoint_lod_2v1(self) -> np.ndarray:
        return np.array([cut.M2_c - self.M1 for cut in self.per_cutpoint])

    def sides(self) -> list[str]:
        return ["left" if k < self.c_hat else "right" for k in range(len(self.trait_order.trait_ids))]

    def to_dict(self) -> dict:
        order = self.trait_order
        return {
            "M1": self.M1,
            "lambda_1qtl": self.lambda_hat_1qtl,
            "M2": self.M2,
            "c_hat": self.c_hat,
            "lambda1": self.lambda1_hat,
            "lambda2": self.lambda2_hat,
            "lod_2v1": self.lod_2v1,
            "pvalue": self.pvalue,
            "mode": self.mode,
            "seed": self.seed,
            "per_cutpoint": [
                {
                    "c": cut.c,
                    "M2_c": cut.M2_c,
                    "lod_2v1_c": cut.M2_c - self.M1,
                    "lambda1": float(self.positions[cut.index1]),
                    "lambda2": float(self.positions[cut.index2]),
                }
                for cut in self.per_cutpoint
            ],
            "profiles": {
                "pos": self.positions.tolist(),
                "lod_1qtl": self.lod_1qtl.tolist(),
                "left": self.profile_left.tolist(),
                "right": self.profile_right.tolist(),
            },
            "traits": [
                {"id": id_trait, "side": side, "univariate_pos": float(pos), "univariate_lod": float(lod)}
                for id_trait, side, pos, lod in zip(order.trait_ids, self.sides(), order.positions, order.lods)
            ],
        }


def order_traits(
    trait_ids: Sequence[str], positions: Sequence[float], seed: int, lods: Optional[Sequence[float]] = None
) -> TraitOrder:
    """Ascending by position; traits at the same position are put in a seeded random order."""
    positions = np.asarray(positions, dtype=float)
    tie_breaker = derive_rng(seed, 0).permutation(len(positions))
    order = np.lexsort((tie_breaker, positions))
    lods = np.zeros(len(positions)) if lods is None else np.asarray(lods, dtype=float)
    return TraitOrder(
        trait_ids=[trait_ids[k] for k in order],
        order=order,
        positions=positions[order],
        lods=lods[order],
        seed=seed,
    )


def _better(value: float, pair: tuple[int, int], best: Optional[tuple[float, int, int]]) -> bool:
    if best is None or value > best[0]:
        return True
    return value == best[0] and pair < (best[1], best[2])


class TwoVsOneTest:
    """Runs the full one-vs-two QTL analysis of a trait matrix on an IntervalModel."""

    def __init__(
        self,
        model: IntervalModel,
        mode: Union[SearchMode, str] = DISSECTION_CONFIG["mode"],
        starts: int = DISSECTION_CONFIG["starts"],
        max_iterations: int = DISSECTION_CONFIG["max_iterations"],
        seed: int = 1,
    ):
        if starts < 1:
            raise InputError(f"starts must be at least 1, got {starts}")
        self.model = model
        self.mode = SearchMode(mode)
        self.starts = starts
        self.max_iterations = max_iterations
        self.seed = seed

    def scan1(self, state: _PreparedTraits) -> MvScan1Result:
        lod = self.model.single_qtl_curve(state)
        index = int(np.argmax(lod))
        return MvScan1Result(positions=self.model.positions, lod=lod, M1=float(lod[index]), index=index)

    def start_indices(self, single_index: int) -> list[int]:
        rng = derive_rng(self.seed, 1)
        extra = rng.integers(0, self.model.n_positions, size=self.starts - 1).tolist()
        return [single_index, *[int(k) for k in extra]]

    def coordinate_cut(self, state: _PreparedTraits, c: int, starts: list[int]) -> CutResult:
        """Alternate maximization over lambda_1 and lambda_2 from each start; best over starts."""
        best: Optional[tuple[float, int, int]] = None
        for start in starts:
            first, second = start, start
            value = float(self.model.two_qtl_lod(state, np.array([first]), np.array([second]), c)[0])
            for _ in range(self.max_iterations):
                new_first = int(np.argmax(self.model.column(state, second, c)))
                row = self.model.row(state, new_first, c)
                new_second = int(np.argmax(row))
                value = float(row[new_second])
                if (new_first, new_second) == (first, second):
                    break
                first, second = new_first, new_second
            if _better(value, (first, second), best):
                best = (value, first, second)
        return CutResult(c=c, M2_c=best[0], index1=best[1], index2=best[2])

    def exhaustive_cuts(self, state: _PreparedTraits, cuts: Sequence[int]) -> list[CutResult]:
        """Full two-dimensional grid for every cut-point, sharing the cross-products of each row."""
        L = self.model.n_positions
        best: dict[int, Optional[tuple[float, int, int]]] = {c: None for c in cuts}
        everywhere = np.arange(L)
        for first in range(L):
            firsts = np.full(L, first)
            G = self.model.cross_products(state, firsts, everywhere)
            for c in cuts:
                lods = self.model.two_qtl_lod(state, firsts, everywhere, c, G=G)
                second = int(np.argmax(lods))
                if _better(float(lods[second]), (first, second), best[c]):
                    best[c] = (float(lods[second]), first, second)
        return [CutResult(c=c, M2_c=best[c][0], index1=best[c][1], index2=best[c][2]) for c in cuts]

    def scan2_cut(self, state: _PreparedTraits, c: int, single_index: int) -> CutResult:
        p = state.Y.shape[1]
        if not 1 <= c <= p - 1:
            raise InputError(f"cut-point must lie in [1, {p - 1}], got {c}")
        if self.mode is SearchMode.EXHAUSTIVE:
            return self.exhaustive_cuts(state, [c])[0]
        return self.coordinate_cut(state, c, self.start_indices(single_index))

    def order(self, Y: np.ndarray, trait_ids: Sequence[str]) -> TraitOrder:
        curves = self.model.univariate_curves(self.model.prepare(Y))
        peaks = np.argmax(curves, axis=0)
        columns = np.arange(curves.shape[1])
        return order_traits(trait_ids, self.model.positions[peaks], self.seed, curves[peaks, columns])

    def run(self, Y: np.ndarray, trait_ids: Optional[Sequence[str]] = None) -> TwoVsOneResult:
        """Sort traits by univariate position, scan one- and two-QTL models, and assemble the result."""
        Y = np.asarray(Y, dtype=float)
        p = Y.shape[1]
        if p < 2:
            raise InputError(f"the two-QTL test needs at least 2 traits, got {p}")
        trait_ids = list(trait_ids) if trait_ids is not None else [f"trait{j + 1}" for j in range(p)]

        order = self.order(Y, trait_ids)
        state = self.model.prepare(Y[:, order.order])
        single = self.scan1(state)

        cuts = list(range(1, p))
        if self.mode is SearchMode.EXHAUSTIVE:
            per_cut = self.exhaustive_cuts(state, cuts)
        else:
            starts = self.start_indices(single.index)
            per_cut = [self.coordinate_cut(state, c, starts) for c in cuts]

        best = per_cut[int(np.argmax([cut.M2_c for cut in per_cut]))]
        left, right = profile_curves(self.model, state, best)
        positions = self.model.positions
        return TwoVsOneResult(
            M1=single.M1,
            lambda_hat_1qtl=single.position,
            M2=best.M2_c,
            c_hat=best.c,
            lambda1_hat=float(positions[best.index1]),
            lambda2_hat=float(positions[best.index2]),
            lod_2v1=best.M2_c - single.M1,
            positions=positions,
            lod_1qtl=single.lod,
            per_cutpoint=per_cut,
            profile_left=left,
            profile_right=right,
            trait_order=order,
            mode=self.mode.value,
            seed=self.seed,
        )


def profile_curves(model: IntervalModel, state: _PreparedTraits, best: CutResult) -> tuple[np.ndarray, np.ndarray]:
    """Slices LOD_2^(c)(lambda_1, lambda_2-hat) and LOD_2^(c)(lambda_1-hat, lambda_2) at the estimated cut-point."""
    return model.column(state, best.index2, best.c), model.row(state, best.index1, best.c)


def mv_scan1(
    Y: np.ndarray, gp: GenoProb, covariates: CovariateSet, interval: Interval, model: Optional[IntervalModel] = None
) -> MvScan1Result:
    """Single-QTL multivariate LOD curve over an interval, its maximum M1 and location."""
    model = model or IntervalModel(gp, covariates, interval)
    return TwoVsOneTest(model).scan1(model.prepare(Y))


def mv_scan2_cut(
    Y: np.ndarray,
    gp: GenoProb,
    covariates: CovariateSet,
    interval: Interval,
    c: int,
    mode: Union[SearchMode, str] = DISSECTION_CONFIG["mode"],
    starts: int = DISSECTION_CONFIG["starts"],
    seed: int = 1,
    model: Optional[IntervalModel] = None,
) -> CutResult:
    """M2^(c) for traits already in left-to-right order: first c traits at lambda_1, the rest at lambda_2."""
    model = model or IntervalModel(gp, covariates, interval)
    test = TwoVsOneTest(model, mode=mode, starts=starts, seed=seed)
    state = model.prepare(Y)
    return test.scan2_cut(state, c, test.scan1(state).index)


def test_2v1(
    Y: np.ndarray,
    gp: GenoProb,
    covariates: CovariateSet,
    interval: Interval,
    trait_ids: Optional[Sequence[str]] = None,
    mode: Union[SearchMode, str] = DISSECTION_CONFIG["mode"],
    starts: int = DISSECTION_CONFIG["starts"],
    seed: int = 1,
    model: Optional[IntervalModel] = None,
) -> TwoVsOneResult:
    """One-vs-two QTL test; traits are sorted internally by their univariate peak in the interval."""
    model = model or IntervalModel(gp, covariates, interval)
    logger.info(f"Testing one vs two QTL on {model} with {Y.shape[1]} traits ({SearchMode(mode).value} search)")
    result = TwoVsOneTest(model, mode=mode, starts=starts, seed=seed).run(Y, trait_ids)
    logger.info(
        f"M1 = {result.M1:.2f} at {result.lambda_hat_1qtl:g}; M2 = {result.M2:.2f} at "
        f"({result.lambda1_hat:g}, {result.lambda2_hat:g}) with c = {result.c_hat}; LOD_2v1 = {result.lod_2v1:.2f}"
    )
    return result


test_2v1.__test__ = False  # keep pytest from collecting it


def lod2_partition(
    Y: np.ndarray,
    model: IntervalModel,
    left_mask: Sequence[bool],
    mode: Union[SearchMode, str] = SearchMode.EXHAUSTIVE,
    starts: int = DISSECTION_CONFIG["starts"],
    seed: int = 1,
) -> float:
    """Maximum two-QTL LOD for an arbitrary assignment of traits to the left QTL (mask True) or right QTL."""
    left_mask = np.asarray(left_mask, dtype=bool)
    c = int(left_mask.sum())
    columns = np.concatenate([np.flatnonzero(left_mask), np.flatnonzero(~left_mask)])
    test = TwoVsOneTest(model, mode=mode, starts=starts, seed=seed)
    state = model.prepare(np.asarray(Y, dtype=float)[:, columns])
    single = test.scan1(state)
    if c in (0, len(left_mask)):
        return single.M1
    return test.scan2_cut(state, c, single.index).M2_c
