import numpy as np
import pytest

from src.constants import MISSING_GENOTYPE
from src.data.etl import load_cross, load_power_grid, read_covariates, read_genetic_map
from src.utils.errors import CrossFormatError, InputError


def test_toy_cross_is_loaded_as_is(toy_files):
    cross = load_cross(toy_files["geno"], toy_files["map"], toy_files["pheno"])
    assert cross.genotypes.shape == (3, 2)
    assert cross.individuals == ["A", "B", "C"]
    assert cross.genotypes.tolist() == [[0, 1], [2, MISSING_GENOTYPE], [1, 1]]
    assert np.isnan(cross.phenotypes[0, 1])
    assert cross.genetic_map.positions("1").tolist() == [0.0, 10.0]


def test_non_monotone_map_reports_line(tmp_path):
    path = tmp_path / "map.csv"
    path.write_text("marker,chr,pos_cM\nm1,1,5.0\nm2,1,3.0\n", encoding="utf-8")
    with pytest.raises(CrossFormatError) as error:
        read_genetic_map(path)
    assert error.value.line == 3
    assert str(path) in str(error.value)


def test_unknown_genotype_code(toy_files):
    toy_files["geno"].write_text("id,m1,m2\nA,BB,XX\n", encoding="utf-8")
    with pytest.raises(CrossFormatError, match="XX"):
        load_cross(toy_files["geno"], toy_files["map"], toy_files["pheno"])


def test_duplicate_individual(toy_files):
    toy_files["geno"].write_text("id,m1,m2\nA,BB,BB\nA,BR,BR\n", encoding="utf-8")
    with pytest.raises(CrossFormatError, match="duplicate"):
        load_cross(toy_files["geno"], toy_files["map"], toy_files["pheno"])


def test_marker_missing_from_map(toy_files):
    toy_files["geno"].write_text("id,m1,m9\nA,BB,BB\n", encoding="utf-8")
    with pytest.raises(CrossFormatError, match="m9"):
        load_cross(toy_files["geno"], toy_files["map"], toy_files["pheno"])


def test_phenotype_only_individual_is_dropped(toy_files):
    toy_files["pheno"].write_text("id,t1\nA,1\nB,2\nC,3\nZ,4\n", encoding="utf-8")
    cross = load_cross(toy_files["geno"], toy_files["map"], toy_files["pheno"])
    assert cross.individuals == ["A", "B", "C"]
    assert cross.phenotypes[:, 0].tolist() == [1.0, 2.0, 3.0]


def test_missing_file_names_path(tmp_path, toy_files):
    missing = tmp_path / "nowhere.csv"
    with pytest.raises(InputError, match="nowhere.csv"):
        load_cross(missing, toy_files["map"], toy_files["pheno"])


def test_categorical_covariate_drops_first_level(tmp_path):
    path = tmp_path / "covar.csv"
    path.write_text("id,batch,sex\nA,b1,0\nB,b2,1\nC,b3,NA\n", encoding="utf-8")
    covariates, complete = read_covariates(path, ["A", "B", "C"], additive=["batch"], interactive=["sex"])
    assert covariates.additive_names == ["batch[b2]", "batch[b3]"]
    assert covariates.additive.tolist() == [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    assert covariates.interactive_names == ["sex"]
    assert complete.tolist() == [True, True, False]


def test_individual_with_missing_covariate_is_dropped(toy_files, tmp_path):
    covar = tmp_path / "covar.csv"
    covar.write_text("id,sex\nA,0\nB,NA\nC,1\n", encoding="utf-8")
    cross = load_cross(toy_files["geno"], toy_files["map"], toy_files["pheno"], covar, interactive=["sex"])
    assert cross.individuals == ["A", "C"]
    assert cross.covariates.interactive[:, 0].tolist() == [0.0, 1.0]


def test_load_is_deterministic(toy_files):
    first = load_cross(toy_files["geno"], toy_files["map"], toy_files["pheno"])
    second = load_cross(toy_files["geno"], toy_files["map"], toy_files["pheno"])
    assert first.fingerprint() == second.fingerprint()


def test_power_grid_panels():
    grid = load_power_grid()
    assert grid["panels"]["C"] == {"p": 40, "left_count": 5}
    assert grid["a"] == [0.1, 0.2, 0.3, 0.4, 0.5]
    assert 0 in grid["distance"]
