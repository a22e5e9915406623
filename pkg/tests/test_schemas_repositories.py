import json
import math

import pytest
from pydantic import ValidationError

from zbstein.core.config import override_settings
from zbstein.core.errors import InvariantViolation
from zbstein.repositories import (
    DistributionRepository,
    FamilyRepository,
    PopulationRepository,
    ResultsRepository,
    atomic_write_text,
)
from zbstein.schemas import (
    Command,
    DistributionFile,
    ExperimentConfig,
    ExperimentRow,
    ResidualRow,
    Tolerances,
)
from zbstein.services.coupling import rho_from_family
from zbstein.services.srs import load_population


def test_distribution_file_lengths_must_match():
    with pytest.raises(ValidationError):
        DistributionFile(atoms=[-1.0, 1.0], probs=[1.0])


def test_load_distribution_fixture(fixture_root):
    d = DistributionRepository(fixture_root / "distributions").load("skewed.json")
    assert d.atoms == (-2.0, 0.5)
    assert d.probs == pytest.approx((0.2, 0.8))


def test_unnormalized_distribution_file(tmp_path):
    (tmp_path / "bad.json").write_text('{"atoms": [-1, 1], "probs": [0.5, 0.6]}')
    with pytest.raises(InvariantViolation):
        DistributionRepository(tmp_path).load("bad.json")


def test_missing_input_file(tmp_path):
    with pytest.raises(InvariantViolation) as exc:
        DistributionRepository(tmp_path).load("absent.json")
    assert exc.value.invariant == "input-file"


def test_repository_lists_by_suffix(fixture_root):
    names = [p.name for p in PopulationRepository(fixture_root).list("populations")]
    assert names == sorted(names)
    assert "pm12.txt" in names
    assert all(name.endswith(".txt") for name in names)
    assert PopulationRepository(fixture_root).list("nowhere") == []


def test_population_file_with_comments(tmp_path):
    (tmp_path / "pop.txt").write_text("# four values\n-2\n-1\n\n1\n2\n")
    pop = PopulationRepository(tmp_path).load("pop.txt")
    assert pop.size == 4
    assert pop.values[0] == pytest.approx(-2 / math.sqrt(10))


def test_empty_population_file(tmp_path):
    (tmp_path / "empty.txt").write_text("# nothing here\n")
    with pytest.raises(InvariantViolation) as exc:
        PopulationRepository(tmp_path).load("empty.txt")
    assert exc.value.invariant == "population-size"


def test_population_file_with_two_columns(tmp_path):
    (tmp_path / "wide.txt").write_text("-1,1\n1,-1\n")
    with pytest.raises(InvariantViolation) as exc:
        PopulationRepository(tmp_path).load("wide.txt")
    assert exc.value.invariant == "input-file"


def test_save_population(tmp_path):
    repo = PopulationRepository(tmp_path)
    target = repo.save("out/pop.txt", load_population([-1.0, 1.0]))
    assert target.read_text().count("\n") == 2
    assert repo.load("out/pop.txt").values == pytest.approx((-1 / math.sqrt(2), 1 / math.sqrt(2)))


def test_family_fixture(fixture_root):
    fam = FamilyRepository(fixture_root / "families").load("independent_pm1.json")
    assert fam.n == 2
    assert rho_from_family(fam) == pytest.approx(0.0, abs=1e-12)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "nested" / "file.txt"
    atomic_write_text(target, "first\n")
    atomic_write_text(target, "second\n")
    assert target.read_text() == "second\n"
    assert [p.name for p in target.parent.iterdir()] == ["file.txt"]


def test_sidecar_path():
    assert ResultsRepository.sidecar_path("out/grid.csv").as_posix() == "out/grid.csv.run.json"


def _row(n: int) -> ExperimentRow:
    return ExperimentRow(
        N=2 * n, n=n, f=0.5, sigma2=0.5, C1=1.0, C2=2.0, bound=0.1, gap_exact_or_mc=0.01,
        gap_stderr=0.0, seed=1, exact=True, B1=1.0, B2=2.0, asymptotic_bound=0.3, n_abs_gap=0.01 * n,
    )


def test_render_csv_with_footer():
    text = ResultsRepository().render_csv([_row(2), _row(4)], ["N", "n", "bound"], ["loglog_slope=-1.0"])
    assert text == "N,n,bound\n4,2,0.1\n8,4,0.1\n# loglog_slope=-1.0\n"


def test_write_json(tmp_path):
    repo = ResultsRepository(tmp_path)
    row = ResidualRow(suite="stein", case="cos", quantity="residual", residual=0.0, tolerance=1e-8, passed=True)
    target = repo.write_json("report.json", row)
    assert json.loads(target.read_text())["case"] == "cos"


def test_infinite_residual_serializes():
    row = ResidualRow(suite="load", case="bad", quantity="load", residual=math.inf, tolerance=1e-12, passed=False)
    assert "Infinity" in row.model_dump_json()


def test_stochastic_command_needs_seed():
    with pytest.raises(ValidationError, match="seed-required"):
        ExperimentConfig(command=Command.SRS_EXPERIMENT, n_grid=[8])
    assert ExperimentConfig(command=Command.VERIFY).seed is None


@pytest.mark.parametrize("grid", [[8, 4], [0, 4], [4, 4]])
def test_n_grid_must_increase(grid):
    with pytest.raises(ValidationError, match="n-grid"):
        ExperimentConfig(command=Command.SRS_EXPERIMENT, seed=1, n_grid=grid)


def test_tolerances_fall_back_to_settings():
    with override_settings(identity_tolerance=1e-10):
        resolved = Tolerances(mass_tolerance=1e-6).resolved()
    assert resolved["identity_tolerance"] == 1e-10
    assert resolved["mass_tolerance"] == 1e-6


def test_negative_tolerance_is_rejected():
    with pytest.raises(ValidationError):
        ExperimentConfig(command=Command.VERIFY, tolerances={"identity_tolerance": -1.0})
