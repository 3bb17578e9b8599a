import json

import pytest

from src.constants import PATH_POWER_GRID
from src.models.power import PowerEstimate, ReplicateRecord, record_rows, run_power, scenarios_from_grid
from src.utils.errors import InputError
from src.utils.scenario import PowerScenario
from tests.conftest import small_scenario


@pytest.fixture(scope="module")
def grid():
    with open(PATH_POWER_GRID, "r", encoding="utf-8") as file:
        return json.load(file)


def test_grid_covers_every_cell(grid):
    scenarios = scenarios_from_grid(grid)
    assert len(scenarios) == 3 * 5 * 9
    assert {(s.p, s.left_count) for s in scenarios} == {(10, 5), (40, 20), (40, 5)}
    assert all(s.n_ind == 500 and s.null_reps == 1000 for s in scenarios)


def test_grid_panels_and_overrides(grid):
    scenarios = scenarios_from_grid(grid, overrides={"n_reps": 3, "null_reps": 7}, panels=["C"])
    assert len(scenarios) == 45
    assert all(s.split == "5/35" and s.n_reps == 3 and s.null_reps == 7 for s in scenarios)
    with pytest.raises(InputError, match="unknown panels"):
        scenarios_from_grid(grid, panels=["Z"])


def test_scenario_validation():
    with pytest.raises(InputError):
        PowerScenario(a=0.1, distance=5.0, p=1, left_count=0)
    with pytest.raises(InputError):
        PowerScenario(a=0.1, distance=5.0, p=4, left_count=4)
    with pytest.raises(InputError):
        PowerScenario(a=0.1, distance=60.0, chr_length=100.0, left_position=50.0)
    scenario = PowerScenario(a=0.2, distance=0.0, p=10, left_count=5)
    assert scenario.is_null
    assert scenario.id_scenario == "p10_s5-5_a0.2_d0"


def test_power_and_standard_error():
    scenario = small_scenario(n_reps=4)
    pvalues = [0.01, 0.2, 0.04, 0.5]
    records = [
        ReplicateRecord(scenario.id_scenario, 1.0, 0.0, 6, "3/3", k, 1.0, pv, 40.0, 60.0, 3) for k, pv in enumerate(pvalues)
    ]
    estimate = PowerEstimate(scenario=scenario, records=records, alpha=0.05)
    assert estimate.power == pytest.approx(0.5)
    assert estimate.standard_error == pytest.approx(0.25)
    summary = estimate.summary()
    assert summary["is_null"] and summary["n_reps"] == 4


def test_run_power_is_reproducible_across_threads():
    scenario = small_scenario(distance=20.0, n_ind=80, n_reps=2, null_reps=3, seed=5)
    first = run_power(scenario, threads=1, starts=2)
    second = run_power(scenario, threads=2, starts=2)
    assert record_rows([first]) == record_rows([second])
    assert [r["rep"] for r in record_rows([first])] == [0, 1]
    assert all(0.0 <= r.pvalue <= 1.0 for r in first.records)


def test_run_power_needs_bootstrap_samples():
    with pytest.raises(InputError, match="null_reps"):
        run_power(small_scenario(null_reps=0))
