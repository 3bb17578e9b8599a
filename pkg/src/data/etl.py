"""Module for ETL processes: reading cross files and study designs."""

import json
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.constants import GENOTYPE_LABELS, MISSING_GENOTYPE, NA_TOKEN, PATH_POWER_GRID
from src.utils.classes import CovariateSet, Cross, GeneticMap, TraitMeta
from src.utils.custom_logger import get_logger
from src.utils.errors import CrossFormatError, InputError

logger = get_logger("ETL")

PathLike = Union[str, Path]

_GENOTYPE_CODES = {label: code for code, label in enumerate(GENOTYPE_LABELS)}
_GENOTYPE_CODES[NA_TOKEN] = MISSING_GENOTYPE


def _read_table(path: PathLike, required: Optional[Sequence[str]] = None) -> tuple[list[str], pd.DataFrame]:
    """Read a UTF-8 CSV as strings; returns header and body (body row i is file line i + 2)."""
    path = Path(path)
    if not path.exists():
        logger.error(f"File {path} not found")
        raise InputError(f"file not found: {path}")
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as error:
        raise CrossFormatError(path, f"malformed CSV ({error})") from error

    header = [str(h).strip() for h in raw.iloc[0].tolist()]
    duplicated = pd.Index(header)[pd.Index(header).duplicated()].tolist()
    if duplicated:
        raise CrossFormatError(path, f"duplicate column names {duplicated}", line=1)
    if required is not None:
        missing = [col for col in required if col not in header]
        if missing:
            raise CrossFormatError(path, f"missing required columns {missing}", line=1)

    body = raw.iloc[1:].reset_index(drop=True)
    body.columns = header
    body = body.apply(lambda col: col.str.strip())
    return header, body


def _check_unique(path: PathLike, values: pd.Series, what: str) -> None:
    duplicated = values.duplicated()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated.to_numpy())[0])
        raise CrossFormatError(path, f"duplicate {what} '{values.iloc[row]}'", line=row + 2)


def _to_float(path: PathLike, body: pd.DataFrame, column: str, allow_na: bool = True) -> np.ndarray:
    """Convert a string column to floats; NA_TOKEN becomes NaN."""
    values = np.empty(len(body), dtype=float)
    for row, cell in enumerate(body[column].tolist()):
        if cell == NA_TOKEN and allow_na:
            values[row] = np.nan
            continue
        try:
            values[row] = float(cell)
        except ValueError as error:
            raise CrossFormatError(path, f"column '{column}': '{cell}' is not a number", line=row + 2) from error
    return values


def read_genetic_map(map_path: PathLike) -> GeneticMap:
    """Read the marker map (marker, chr, pos_cM); positions must be non-decreasing per chromosome."""
    _, body = _read_table(map_path, required=["marker", "chr", "pos_cM"])
    _check_unique(map_path, body["marker"], "marker id")
    positions = _to_float(map_path, body, "pos_cM", allow_na=False)

    markers_by_chr: dict[str, list[tuple[str, float]]] = {}
    for row, (id_marker, chrom) in enumerate(zip(body["marker"], body["chr"])):
        markers = markers_by_chr.setdefault(chrom, [])
        if markers and positions[row] < markers[-1][1]:
            raise CrossFormatError(
                map_path,
                f"map positions not monotone on chromosome {chrom}: {positions[row]} after {markers[-1][1]}",
                line=row + 2,
            )
        markers.append((id_marker, float(positions[row])))

    genetic_map = GeneticMap(markers_by_chr)
    logger.info(f"Map loaded: {genetic_map}")
    return genetic_map


def read_genotypes(geno_path: PathLike) -> tuple[list[str], list[str], np.ndarray]:
    """Read the genotype table; returns individual ids, marker ids and the code matrix."""
    header, body = _read_table(geno_path, required=["id"])
    if header[0] != "id":
        raise CrossFormatError(geno_path, "first column must be 'id'", line=1)
    _check_unique(geno_path, body["id"], "individual id")

    markers = header[1:]
    cells = body[markers].to_numpy(dtype=object)
    codes = np.full(cells.shape, MISSING_GENOTYPE, dtype=np.int8)
    for label, code in _GENOTYPE_CODES.items():
        codes[cells == label] = code
    known = np.isin(cells, list(_GENOTYPE_CODES.keys()))
    if not known.all():
        row, col = (int(v[0]) for v in np.nonzero(~known))
        raise CrossFormatError(
            geno_path,
            f"genotype '{cells[row, col]}' for marker {markers[col]} not in {{BB,BR,RR,NA}}",
            line=row + 2,
        )
    return body["id"].tolist(), markers, codes


def read_phenotypes(pheno_path: PathLike) -> tuple[list[str], list[str], np.ndarray]:
    """Read the phenotype table; returns individual ids, trait ids and values (NaN for NA)."""
    header, body = _read_table(pheno_path, required=["id"])
    if header[0] != "id":
        raise CrossFormatError(pheno_path, "first column must be 'id'", line=1)
    _check_unique(pheno_path, body["id"], "individual id")
    traits = header[1:]
    values = np.column_stack([_to_float(pheno_path, body, t) for t in traits]) if traits else np.zeros((len(body), 0))
    return body["id"].tolist(), traits, values


def read_trait_meta(meta_path: Optional[PathLike]) -> dict[str, TraitMeta]:
    """Read trait annotations (trait, chr, pos_cM), chr/pos may be NA."""
    if meta_path is None:
        return {}
    _, body = _read_table(meta_path, required=["trait", "chr", "pos_cM"])
    _check_unique(meta_path, body["trait"], "trait id")
    positions = _to_float(meta_path, body, "pos_cM")
    meta = {}
    for row, (id_trait, chrom) in enumerate(zip(body["trait"], body["chr"])):
        chromosome = None if chrom == NA_TOKEN else chrom
        position = None if np.isnan(positions[row]) else float(positions[row])
        meta[id_trait] = TraitMeta(id_trait, chromosome, position)
    return meta


def _expand_covariate(path: PathLike, body: pd.DataFrame, column: str) -> tuple[np.ndarray, list[str]]:
    """Numeric columns pass through; categorical columns become indicators with the first level dropped."""
    cells = body[column]
    observed = cells[cells != NA_TOKEN]
    numeric = pd.to_numeric(observed, errors="coerce")
    if not numeric.isna().any():
        values = np.full(len(cells), np.nan)
        values[(cells != NA_TOKEN).to_numpy()] = numeric.to_numpy(dtype=float)
        return values[:, None], [column]

    levels = sorted(observed.unique().tolist())
    if len(levels) < 2:
        logger.warning(f"{path}: covariate '{column}' has a single level and is ignored")
        return np.zeros((len(cells), 0)), []
    columns, names = [], []
    for level in levels[1:]:
        indicator = (cells == level).to_numpy(dtype=float)
        indicator[(cells == NA_TOKEN).to_numpy()] = np.nan
        columns.append(indicator)
        names.append(f"{column}[{level}]")
    return np.column_stack(columns), names


def read_covariates(
    covar_path: Optional[PathLike],
    individuals: list[str],
    additive: Sequence[str] = (),
    interactive: Sequence[str] = (),
) -> tuple[CovariateSet, np.ndarray]:
    """Read covariates for the given individuals; returns the set and a mask of complete rows."""
    n = len(individuals)
    if covar_path is None:
        if additive or interactive:
            raise InputError("covariate columns requested but no covariate file given")
        return CovariateSet.empty(n), np.ones(n, dtype=bool)

    _, body = _read_table(covar_path, required=["id", *additive, *interactive])
    _check_unique(covar_path, body["id"], "individual id")
    body = body.set_index("id").reindex(individuals, fill_value=NA_TOKEN).reset_index()

    def expand(columns: Sequence[str]) -> tuple[np.ndarray, list[str]]:
        blocks = [_expand_covariate(covar_path, body, col) for col in columns]
        if not blocks:
            return np.zeros((n, 0)), []
        return np.column_stack([b[0] for b in blocks]), [name for b in blocks for name in b[1]]

    add_values, add_names = expand(additive)
    int_values, int_names = expand(interactive)
    complete = ~(np.isnan(add_values).any(axis=1) | np.isnan(int_values).any(axis=1))
    covariates = CovariateSet(
        additive=np.nan_to_num(add_values),
        interactive=np.nan_to_num(int_values),
        additive_names=add_names,
        interactive_names=int_names,
    )
    return covariates, complete


def load_cross(
    geno_path: PathLike,
    map_path: PathLike,
    pheno_path: PathLike,
    covar_path: Optional[PathLike] = None,
    additive: Sequence[str] = (),
    interactive: Sequence[str] = (),
    trait_meta_path: Optional[PathLike] = None,
) -> Cross:
    """Load and validate a cross; individuals are intersected across files in genotype-file order."""
    logger.info(f"Loading cross from {geno_path}, {map_path}, {pheno_path}")
    genetic_map = read_genetic_map(map_path)
    geno_ids, markers, codes = read_genotypes(geno_path)
    pheno_ids, traits, values = read_phenotypes(pheno_path)
    trait_meta = read_trait_meta(trait_meta_path)

    mapped = set(genetic_map.marker_ids())
    unmapped = [m for m in markers if m not in mapped]
    if unmapped:
        raise CrossFormatError(geno_path, f"markers absent from the map: {unmapped[:10]}", line=1)
    genotyped = set(markers)
    ungenotyped = [m for m in genetic_map.marker_ids() if m not in genotyped]
    if ungenotyped:
        logger.warning(f"{len(ungenotyped)} map markers have no genotype column and are dropped")
        genetic_map = GeneticMap(
            {
                chrom: [(m.id_marker, m.position) for m in genetic_map.markers[chrom] if m.id_marker in genotyped]
                for chrom in genetic_map.chromosomes
                if any(m.id_marker in genotyped for m in genetic_map.markers[chrom])
            }
        )

    pheno_set = set(pheno_ids)
    individuals = [i for i in geno_ids if i in pheno_set]
    dropped = sorted((set(geno_ids) ^ pheno_set))
    if dropped:
        logger.warning(f"{len(dropped)} individuals not present in both genotype and phenotype files dropped: {dropped[:10]}")
    if not individuals:
        raise InputError("no individual is shared by the genotype and phenotype files")

    covariates, complete = read_covariates(covar_path, individuals, additive, interactive)
    if not complete.all():
        removed = [i for i, ok in zip(individuals, complete) if not ok]
        logger.warning(f"{len(removed)} individuals with missing covariates dropped: {removed[:10]}")
        individuals = [i for i, ok in zip(individuals, complete) if ok]
        covariates = covariates.subset(np.flatnonzero(complete))

    geno_rows = {ind: row for row, ind in enumerate(geno_ids)}
    pheno_rows = {ind: row for row, ind in enumerate(pheno_ids)}
    marker_cols = {m: col for col, m in enumerate(markers)}
    genotypes = codes[np.ix_([geno_rows[i] for i in individuals], [marker_cols[m] for m in genetic_map.marker_ids()])]
    phenotypes = values[[pheno_rows[i] for i in individuals], :]

    cross = Cross(
        individuals=individuals,
        genotypes=genotypes,
        genetic_map=genetic_map,
        phenotypes=phenotypes,
        trait_ids=traits,
        trait_meta=trait_meta,
        covariates=covariates,
    )
    logger.info(f"Cross loaded: {cross}")
    return cross


def load_power_grid(path: PathLike = PATH_POWER_GRID) -> dict:
    """Read the power-study design grid."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as file:
            return json.load(file)
    except FileNotFoundError as error:
        logger.error(f"File {path} not found")
        raise InputError(f"file not found: {path}") from error
    except json.JSONDecodeError as error:
        raise CrossFormatError(path, f"invalid JSON ({error.msg})", line=error.lineno) from error
