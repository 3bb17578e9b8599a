"""Module of class Main, orchestrating the hotspot dissection pipeline."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from src.config import DISSECTION_CONFIG, HMM_CONFIG, HOTSPOT_CONFIG, LDA_CONFIG, POWER_CONFIG, SCAN_CONFIG, SIGNIFICANCE_CONFIG
from src.constants import PATH_POWER_GRID, RESULTS_DIR
from src.data.etl import load_cross, load_power_grid, read_genetic_map, read_trait_meta
from src.data.transform import normalize_phenotypes
from src.genetics.genoprob import GenoProb, HmmConfig, cached_genoprob, insert_pseudomarkers
from src.models.hotspot import (
    HotspotCriteria,
    count_trans_eqtl,
    define_hotspots,
    hotspot_effects,
    hotspot_from_interval,
    select_top_traits,
)
from src.models.lda import distance_summary, lda_fit_project
from src.models.mv_dissect import test_2v1
from src.models.power import record_rows, run_power, run_power_grid
from src.models.scan import TraitPeak, curves_table, peaks_from_scans, scan_traits
from src.models.significance import DissectionContext, null_replicates, pvalue, significance_report
from src.utils.classes import Cross, Interval
from src.utils.custom_logger import get_logger
from src.utils.errors import CrossFormatError
from src.utils.output import read_json, write_csv, write_json
from src.utils.scenario import PowerScenario

logger = get_logger("Main Dissection")

PEAK_COLUMNS = ["trait", "chr", "pos", "lod", "signed_lod", "a", "d"]
POWER_RECORD_COLUMNS = ["scenario_id", "a", "distance", "p", "split", "rep", "lod_2v1", "pvalue", "lambda1", "lambda2", "c_hat"]
POWER_SUMMARY_COLUMNS = ["scenario_id", "a", "distance", "p", "split", "is_null", "n_reps", "null_reps", "alpha", "power", "se"]


@dataclass
class RunConfig:
    """Everything a run depends on; serialized into every artifact."""

    command: str
    seed: int = 1
    threads: int = 1
    out_dir: Path = RESULTS_DIR
    progress: bool = True
    options: dict[str, Any] = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        value = self.options.get(key)
        return default if value is None else value

    def to_dict(self) -> dict[str, Any]:
        """Parallelism and display settings are left out: they never change results."""
        options = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(self.options.items())}
        return {"command": self.command, "seed": self.seed, **options}


class Main:
    """Runs one subcommand of the pipeline from a RunConfig."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = Path(config.out_dir)

    # Shared loading steps

    def hmm_config(self) -> HmmConfig:
        return HmmConfig(
            error_rate=self.config.get("error_rate", HMM_CONFIG["error_rate"]),
            map_function=self.config.get("map_function", HMM_CONFIG["map_function"]),
            step=self.config.get("step", HMM_CONFIG["step"]),
        )

    def null_includes_interactive(self) -> bool:
        return bool(self.config.get("null_includes_interactive", SCAN_CONFIG["null_includes_interactive"]))

    def criteria(self) -> HotspotCriteria:
        return HotspotCriteria(
            lod_min=self.config.get("hotspot_lod_min", HOTSPOT_CONFIG["lod_min"]),
            window=self.config.get("window", HOTSPOT_CONFIG["window"]),
            local_exclusion=self.config.get("local_exclusion", HOTSPOT_CONFIG["local_exclusion"]),
            count_min=self.config.get("count_min", HOTSPOT_CONFIG["count_min"]),
            pad=self.config.get("pad", HOTSPOT_CONFIG["pad"]),
        )

    def load_cross(self) -> tuple[Cross, GenoProb]:
        """Cross (normal-quantile transformed unless disabled) and its genotype probabilities."""
        cross = load_cross(
            geno_path=self.config.get("geno"),
            map_path=self.config.get("map"),
            pheno_path=self.config.get("pheno"),
            covar_path=self.config.get("covar"),
            additive=self.config.get("additive", []),
            interactive=self.config.get("interactive", []),
            trait_meta_path=self.config.get("trait_meta"),
        )
        if not self.config.get("no_normalize", False):
            cross = normalize_phenotypes(cross)
        gp = cached_genoprob(cross, self.hmm_config(), self.config.get("genoprob_cache"))
        return cross, gp

    def read_peaks(self, gp: Optional[GenoProb] = None) -> list[TraitPeak]:
        path = self.config.get("peaks")
        document = read_json(path)
        try:
            return [TraitPeak.from_dict(row, gp) for row in document.get("peaks", [])]
        except (KeyError, TypeError, ValueError) as error:
            raise CrossFormatError(path, f"malformed peak record ({error})") from error

    def select_traits(self, cross: Cross, peaks: list[TraitPeak], interval: Interval, top_k: int, exclude: bool) -> list[str]:
        if self.config.get("traits"):
            return list(self.config.get("traits"))
        hotspot = hotspot_from_interval(interval, peaks, cross.trait_meta, self.criteria())
        return select_top_traits(hotspot, cross, top_k, exclude_same_chr=exclude)

    # Subcommands

    def scan(self) -> list[TraitPeak]:
        """Genome scans of every trait; peaks to JSON, curves to CSV on request."""
        cross, gp = self.load_cross()
        lod_min = self.config.get("lod_min", SCAN_CONFIG["lod_min"])
        keep_curves = bool(self.config.get("curves", False))
        scans = scan_traits(
            cross,
            gp,
            null_includes_interactive=self.null_includes_interactive(),
            threads=self.config.threads,
            keep_curves=keep_curves,
        )
        peaks = peaks_from_scans(scans, cross, gp, lod_min)
        run_config = self.config.to_dict()
        write_json(self.out_dir / "peaks.json", {"peaks": [p.to_dict() for p in peaks]}, run_config)
        write_csv(self.out_dir / "peaks.csv", [p.to_dict() for p in peaks], PEAK_COLUMNS, run_config)
        if keep_curves:
            rows = [dict(zip(["trait", "chr", "pos", "lod"], row)) for row in curves_table(scans, gp)]
            write_csv(self.out_dir / "scan_curves.csv", rows, ["trait", "chr", "pos", "lod"], run_config)
        return peaks

    def hotspots(self) -> list:
        """Sliding-window trans-eQTL counts, hotspot intervals and the effects of their traits."""
        genetic_map = read_genetic_map(self.config.get("map"))
        grid = insert_pseudomarkers(genetic_map, self.hmm_config().step)
        trait_meta = read_trait_meta(self.config.get("trait_meta"))
        peaks = self.read_peaks()
        criteria = self.criteria()
        counts = count_trans_eqtl(peaks, trait_meta, grid, criteria.lod_min, criteria.window, criteria.local_exclusion)
        hotspots = define_hotspots(counts, grid, peaks, trait_meta, criteria)

        run_config = self.config.to_dict()
        count_rows = [
            {"chr": chrom, "pos": float(pos), "count": int(count)}
            for chrom in grid.chromosomes
            for pos, count in zip(grid.positions[chrom], counts[chrom])
        ]
        write_csv(self.out_dir / "hotspot_counts.csv", count_rows, ["chr", "pos", "count"], run_config)
        write_json(
            self.out_dir / "hotspots.json",
            {"n_hotspots": len(hotspots), "hotspots": [h.to_dict() for h in hotspots]},
            run_config,
        )
        for k, hotspot in enumerate(hotspots, start=1):
            write_csv(self.out_dir / f"hotspot_{k}_effects.csv", hotspot_effects(hotspot), PEAK_COLUMNS, run_config)
        if not hotspots:
            logger.info("No hotspot found")
        return hotspots

    def dissect(self) -> dict:
        """One-vs-two QTL test on the top traits of an interval, with an optional null distribution."""
        cross, gp = self.load_cross()
        interval = Interval.parse(self.config.get("interval"))
        trait_ids = self.select_traits(
            cross,
            self.read_peaks(gp),
            interval,
            self.config.get("top", DISSECTION_CONFIG["top_k"]),
            self.config.get("exclude_same_chr", DISSECTION_CONFIG["exclude_same_chr"]),
        )
        Y = cross.trait_matrix(trait_ids)
        rows = np.flatnonzero(~np.isnan(Y).any(axis=1))
        if len(rows) < cross.n_individuals:
            logger.warning(f"{cross.n_individuals - len(rows)} individuals with missing values in the selected traits dropped")
        context = DissectionContext(
            gp=gp.subset(rows),
            covariates=cross.covariates.subset(rows),
            interval=interval,
            Y=Y[rows],
            trait_ids=trait_ids,
            mode=self.config.get("mode", DISSECTION_CONFIG["mode"]),
            starts=self.config.get("starts", DISSECTION_CONFIG["starts"]),
            seed=self.config.seed,
            null_includes_interactive=self.null_includes_interactive(),
        )
        result = test_2v1(
            context.Y,
            context.gp,
            context.covariates,
            interval,
            trait_ids,
            mode=context.mode,
            starts=context.starts,
            seed=context.seed,
            model=context.model,
        )

        report = {"interval": str(interval), "n_individuals": int(len(rows)), **result.to_dict()}
        n_reps = self.config.get("n_reps", 0)
        if n_reps > 0:
            plus_one = self.config.get("plus_one", SIGNIFICANCE_CONFIG["plus_one"])
            nulls = null_replicates(
                context,
                result.lambda_hat_1qtl,
                method=self.config.get("method", SIGNIFICANCE_CONFIG["method"]),
                n_reps=n_reps,
                seed=self.config.seed,
                threads=self.config.threads,
                permute_covariates=self.config.get("permute_covariates", SIGNIFICANCE_CONFIG["permute_covariates"]),
                progress=self.config.progress,
            )
            result.pvalue = pvalue(result.lod_2v1, nulls, plus_one)
            report["pvalue"] = result.pvalue
            report["significance"] = significance_report(result.lod_2v1, nulls, plus_one)
            logger.info(f"p-value of LOD_2v1 = {result.lod_2v1:.2f}: {result.pvalue:g} ({nulls.n_reps} replicates)")
        write_json(self.out_dir / "dissection.json", report, self.config.to_dict())
        return report

    def lda(self) -> dict:
        """Discriminant scatter data of the interval's top traits."""
        cross, gp = self.load_cross()
        interval = Interval.parse(self.config.get("interval"))
        peaks = self.read_peaks(gp)
        hotspot = hotspot_from_interval(interval, peaks, cross.trait_meta, self.criteria())
        lambdas = self.config.get("lambdas")
        if lambdas is None and self.config.get("dissection"):
            path = self.config.get("dissection")
            previous = read_json(path)
            if previous.get("lambda1") is None or previous.get("lambda2") is None:
                raise CrossFormatError(path, "no lambda1/lambda2 positions; is this a dissection.json?")
            lambdas = (previous["lambda1"], previous["lambda2"])
        projection = lda_fit_project(
            cross,
            gp,
            hotspot,
            top_k=self.config.get("top", LDA_CONFIG["top_k"]),
            ridge=self.config.get("ridge", LDA_CONFIG["ridge"]),
            lambdas=tuple(lambdas) if lambdas is not None else None,
            trait_ids=self.config.get("traits"),
        )
        run_config = self.config.to_dict()
        write_csv(
            self.out_dir / "lda_scatter.csv",
            projection.rows(),
            ["id", "ld1", "ld2", "class", "geno_l1", "geno_l2"],
            run_config,
        )
        summary = distance_summary(projection)
        write_json(
            self.out_dir / "lda_summary.json",
            {
                "interval": str(interval),
                "traits": projection.trait_ids,
                "classes": projection.class_labels,
                "class_means": projection.class_means,
                "eigenvalues": projection.eigenvalues,
                **summary,
            },
            run_config,
        )
        return summary

    def power(self) -> list:
        """Power of the one-vs-two QTL test for one scenario or a whole design grid."""
        overrides = {
            key: self.config.get(key)
            for key in ("n_ind", "n_markers", "chr_length", "n_reps", "null_reps")
            if self.config.get(key) is not None
        }
        overrides["seed"] = self.config.seed
        alpha = self.config.get("alpha", POWER_CONFIG["alpha"])
        if self.config.get("a") is not None and self.config.get("distance") is not None:
            scenario = PowerScenario(
                a=self.config.get("a"),
                distance=self.config.get("distance"),
                p=self.config.get("p", 10),
                left_count=self.config.get("left_count", self.config.get("p", 10) // 2),
                **overrides,
            )
            estimates = [run_power(scenario, threads=self.config.threads, alpha=alpha, progress=self.config.progress)]
        else:
            grid = load_power_grid(self.config.get("grid", PATH_POWER_GRID))
            estimates = run_power_grid(
                grid,
                overrides,
                panels=self.config.get("panels"),
                threads=self.config.threads,
                alpha=alpha,
                progress=self.config.progress,
            )
        run_config = self.config.to_dict()
        write_csv(self.out_dir / "power_records.csv", record_rows(estimates), POWER_RECORD_COLUMNS, run_config)
        write_csv(self.out_dir / "power_summary.csv", [e.summary() for e in estimates], POWER_SUMMARY_COLUMNS, run_config)
        return estimates
