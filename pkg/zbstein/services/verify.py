"""Verification suites: exact-enumeration residuals for every identity the library relies on."""

import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from zbstein.core.config import settings
from zbstein.core.errors import InvariantViolation, VerificationFailed
from zbstein.core.workers import make_rng
from zbstein.models import DependentFamily, DiscreteDistribution, Population, SumModel
from zbstein.repositories import DistributionRepository, FamilyRepository, PopulationRepository, ResultsRepository
from zbstein.schemas import ExperimentConfig, ResidualRow
from zbstein.services.base import BaseCommandService
from zbstein.services.bound import standardized_moments
from zbstein.services.coupling import (
    exact_dependent_w_star,
    exact_independent_w_star,
    rho_from_family,
    rho_from_identity,
    verify_family_conditions,
)
from zbstein.services.dist import (
    abs_moment,
    center,
    convolve_all,
    is_symmetric,
    make_discrete,
    normal_discretization,
)
from zbstein.services.srs import (
    enumerate_couple_srs,
    enumerate_srs,
    exact_coupling_bound,
    exact_srs_w_star,
    hat_law_residual,
    load_population,
    srs_bound,
    srs_constants,
    srs_family,
    srs_variance,
    verify_variance_terms,
)
from zbstein.services.stein import (
    clt_iid_bound,
    clt_independent_bound,
    expectation_gap,
    get_test_function,
    iid_fourth_moment_bound,
    normal_expectation,
    registered_test_functions,
    stein_residual,
)
from zbstein.services.zerobias import (
    characterization_residual,
    density_difference,
    density_mass,
    density_moment,
    interpolation_density,
    is_symmetric_density,
    is_unimodal,
    square_bias_pair,
    wasserstein_to_discrete,
    zero_bias_abs_moment,
    zero_bias_density,
    zero_bias_moment,
)

logger = logging.getLogger(__name__)

FIXTURE_ROOT = Path(__file__).resolve().parent.parent / "fixtures"
RESIDUAL_COLUMNS = ["suite", "case", "quantity", "residual", "tolerance", "passed"]

RANDOM_CASES = 50
MAX_RANDOM_ATOMS = 10
MAX_POLYNOMIAL_DEGREE = 6
POLYNOMIALS_PER_CASE = 3
COUPLING_MAX_N = 7
FAMILY_MAX_N = 6
IID_SUMMANDS = 10
RHO_MAX_N = 50
FIXED_POINT_DISTANCE = 0.01
STEIN_POINTS = (-3.0, -1.0, 0.0, 0.5, 2.0)
STEIN_SIGMAS = (1.0, 2.5)


def random_distribution(rng: np.random.Generator) -> DiscreteDistribution:
    """Centered law on at most ten sixteenth-grid atoms with integer weights."""
    k = int(rng.integers(2, MAX_RANDOM_ATOMS + 1))
    atoms = rng.choice(np.arange(-32, 33), size=k, replace=False) / 16.0
    weights = rng.integers(1, 21, size=k).astype(float)
    return center(make_discrete(atoms.tolist(), (weights / weights.sum()).tolist()))


def random_polynomial(rng: np.random.Generator) -> List[float]:
    degree = int(rng.integers(1, MAX_POLYNOMIAL_DEGREE + 1))
    return rng.integers(-1, 2, size=degree + 1).astype(float).tolist()


def grid_population(N: int) -> Population:
    """Equispaced symmetric population of size N."""
    return load_population([k - (N - 1) / 2.0 for k in range(N)])


class VerifyService(BaseCommandService[List[ResidualRow]]):
    """Service for the verify command."""

    def __init__(
        self,
        distributions: Optional[DistributionRepository] = None,
        populations: Optional[PopulationRepository] = None,
        families: Optional[FamilyRepository] = None,
        results: Optional[ResultsRepository] = None,
    ):
        super().__init__(results)
        self.distributions = distributions or DistributionRepository()
        self.populations = populations or PopulationRepository()
        self.families = families or FamilyRepository()

    # Row helpers
    @staticmethod
    def _row(suite: str, case: str, quantity: str, residual: float, tolerance: float) -> ResidualRow:
        residual = float(residual)
        return ResidualRow(
            suite=suite,
            case=case,
            quantity=quantity,
            residual=residual,
            tolerance=tolerance,
            passed=bool(residual <= tolerance),
        )

    def _guard(self, suite: str, case: str, check: Callable[[], List[ResidualRow]]) -> List[ResidualRow]:
        """Run one case; a domain error becomes a failed row instead of aborting the suite."""
        try:
            return check()
        except ValueError as e:
            logger.warning(f"{suite}/{case}: {e}")
            return [self._row(suite, case, f"error: {e}", math.inf, 0.0)]

    def _load_all(self, repository, folder: Path, suite: str) -> Tuple[Dict[str, object], List[ResidualRow]]:
        loaded: Dict[str, object] = {}
        failures: List[ResidualRow] = []
        for path in repository.list(folder):
            try:
                loaded[path.stem] = repository.load(path)
            except ValueError as e:
                logger.warning(f"Fixture {path} rejected: {e}")
                failures.append(self._row(suite, path.stem, f"load: {e}", math.inf, 0.0))
        return loaded, failures

    # Suites
    def characterization_suite(self, seed: int) -> List[ResidualRow]:
        """Characterizing and moment identities over seeded random laws."""
        tol = settings.identity_tolerance
        rng = make_rng(seed, 0)
        rows = []
        for case in range(RANDOM_CASES):
            d = random_distribution(rng)
            polys = [random_polynomial(rng) for _ in range(POLYNOMIALS_PER_CASE)]
            name = f"random-{case}"

            def check(d=d, polys=polys, name=name) -> List[ResidualRow]:
                worst = 0.0
                for coefficients in polys:
                    f = np.polynomial.Polynomial(coefficients)
                    scale = max(1.0, math.fsum(p * abs(a * f(a)) for a, p in zip(d.atoms, d.probs)))
                    worst = max(worst, abs(characterization_residual(d, f)) / scale)
                density = zero_bias_density(d)
                moments = 0.0
                for n in range(1, 5):
                    expected = zero_bias_moment(d, n)
                    moments = max(moments, abs(density_moment(density, n) - expected) / max(1.0, abs(expected)))
                return [
                    self._row("characterization", name, "EWf(W) - sigma^2 Ef'(W*)", worst, tol),
                    self._row("characterization", name, "E(W*)^n - EW^(n+2)/((n+1)sigma^2)", moments, tol),
                ]

            rows.extend(self._guard("characterization", name, check))
        return rows

    def distribution_suite(self, laws: Dict[str, DiscreteDistribution]) -> List[ResidualRow]:
        """Structural properties of the zero-bias density on the fixture laws."""
        tol = settings.identity_tolerance
        rows = []
        for name, d in laws.items():

            def check(d=d) -> List[ResidualRow]:
                density = zero_bias_density(d)
                sigma2 = d.probs_array @ d.atoms_array ** 2
                out = [
                    self._row("distribution", name, "mass", abs(density_mass(density) - 1.0), tol),
                    self._row("distribution", name, "unimodal", 0.0 if is_unimodal(density) else 1.0, 0.0),
                    self._row(
                        "distribution", name, "square-bias interpolation",
                        density_difference(interpolation_density(square_bias_pair(d)), density), tol,
                    ),
                    self._row(
                        "distribution", name, "E|W*| - E|W|^3/(2 sigma^2)",
                        abs(zero_bias_abs_moment(d) - abs_moment(d, 3) / (2.0 * sigma2)), tol,
                    ),
                ]
                if is_symmetric(d):
                    out.append(
                        self._row("distribution", name, "symmetric", 0.0 if is_symmetric_density(density) else 1.0, 0.0)
                    )
                summands = SumModel(summands=(d,) * 3)
                out.append(
                    self._row(
                        "distribution", name, "independent w* law",
                        density_difference(
                            interpolation_density(exact_independent_w_star(summands)),
                            zero_bias_density(convolve_all(summands.summands)),
                        ),
                        tol,
                    )
                )
                return out

            rows.extend(self._guard("distribution", name, check))

        def fixed_point() -> List[ResidualRow]:
            grid = normal_discretization()
            distance = wasserstein_to_discrete(grid, zero_bias_density(grid))
            return [self._row("distribution", "normal-grid", "W1(W, W*)", distance, FIXED_POINT_DISTANCE)]

        rows.extend(self._guard("distribution", "normal-grid", fixed_point))
        return rows

    def family_suite(self, families: Dict[str, DependentFamily], pops: Dict[str, Population]) -> List[ResidualRow]:
        """Family conditions, rho consistency and the law of the dependent construction."""
        tol = settings.identity_tolerance
        cases: List[Tuple[str, Callable[[], DependentFamily], bool]] = [
            (name, (lambda fam=fam: fam), False) for name, fam in families.items()
        ]
        for name, pop in pops.items():
            if pop.distinct and pop.size <= FAMILY_MAX_N:
                cases.append((f"srs:{name}:n=2", (lambda pop=pop: srs_family(pop, 2)), True))

        rows = []
        for name, build, conditional in cases:

            def check(build=build, conditional=conditional, name=name) -> List[ResidualRow]:
                fam = build()
                report = verify_family_conditions(fam, conditional=conditional)
                w_law = make_discrete(fam.base.sums().tolist(), list(fam.base.probs))
                return [
                    self._row("family", name, "family conditions", report.max_residual, tol),
                    self._row(
                        "family", name, "rho from variances vs identity",
                        abs(rho_from_family(fam) - rho_from_identity(fam)), tol,
                    ),
                    self._row(
                        "family", name, "dependent w* law",
                        density_difference(interpolation_density(exact_dependent_w_star(fam)), zero_bias_density(w_law)),
                        tol,
                    ),
                ]

            rows.extend(self._guard("family", name, check))

        def rho_grid() -> List[ResidualRow]:
            worst = 0.0
            for N in range(3, RHO_MAX_N + 1):
                pop = grid_population(N)
                for n in range(1, N - 1):
                    c = srs_constants(pop, n)
                    worst = max(worst, abs(c.rho - (1.0 - n * c.v1_sq / (2.0 * srs_variance(pop, n)))))
            return [self._row("family", f"srs:3<=N<={RHO_MAX_N}", "rho = -n/(N-n)", worst, tol)]

        rows.extend(self._guard("family", "rho-grid", rho_grid))
        return rows

    def _srs_instances(self, pops: Dict[str, Population], distinct_only: bool) -> List[Tuple[str, Population, int]]:
        instances = []
        for name, pop in pops.items():
            if pop.size > COUPLING_MAX_N or (distinct_only and not pop.distinct):
                continue
            for n in (2, 3):
                if n <= pop.size - 1:
                    instances.append((f"{name}:n={n}", pop, n))
        return instances

    def coupling_suite(self, pops: Dict[str, Population]) -> List[ResidualRow]:
        """Exhaustive enumeration of the SRS coupling against its target laws."""
        tol = settings.identity_tolerance
        rows = []
        for name, pop, n in self._srs_instances(pops, distinct_only=True):

            def check(pop=pop, n=n, name=name) -> List[ResidualRow]:
                outcomes = enumerate_couple_srs(pop, n)
                w_law = enumerate_srs(pop, n)
                marginal: Dict[float, List[float]] = {}
                for o in outcomes:
                    marginal.setdefault(math.fsum(pop.values[k] for k in o.sample), []).append(o.prob)
                expected = dict(zip(w_law.atoms, w_law.probs))
                marginal_gap = max(
                    abs(math.fsum(marginal.get(a, [])) - expected.get(a, 0.0)) for a in set(marginal) | set(expected)
                )
                star = interpolation_density(exact_srs_w_star(pop, n, outcomes))
                report = verify_variance_terms(pop, n)
                return [
                    self._row("coupling", name, "hat-vector law", hat_law_residual(pop, n, outcomes), tol),
                    self._row("coupling", name, "w marginal", marginal_gap, tol),
                    self._row("coupling", name, "w* law", density_difference(star, zero_bias_density(w_law)), tol),
                    self._row("coupling", name, "Var(E{W*-W|W}) - C1^2", max(report.cond_variance - report.c1_sq, 0.0), tol),
                    self._row("coupling", name, "E(W*-W)^2 - C2", max(report.sq_diff - report.c2, 0.0), tol),
                ]

            rows.extend(self._guard("coupling", name, check))
        return rows

    def stein_suite(self) -> List[ResidualRow]:
        """Residual of the Stein equation at a few points for every registered function."""
        tol = settings.stein_residual_tolerance
        rows = []
        for h_name in registered_test_functions():

            def check(h_name=h_name) -> List[ResidualRow]:
                h = get_test_function(h_name)
                phi = normal_expectation(h)
                worst = max(
                    abs(stein_residual(h, sigma, x, phi)) for sigma in STEIN_SIGMAS for x in STEIN_POINTS
                )
                return [self._row("stein", h_name, "x f'(x) - sigma^2 f''(x) - h~(x)", worst, tol)]

            rows.extend(self._guard("stein", h_name, check))
        return rows

    def domination_suite(self, laws: Dict[str, DiscreteDistribution], pops: Dict[str, Population]) -> List[ResidualRow]:
        """|gap| never exceeds any assembled bound that applies."""
        tol = settings.identity_tolerance
        mean_tol = settings.mean_tolerance
        h_names = registered_test_functions()
        rows = []

        def excess(gap, report) -> float:
            return max(abs(gap.value) - report.bound, 0.0)

        for name, pop, n in self._srs_instances(pops, distinct_only=False):

            def check(pop=pop, n=n, name=name) -> List[ResidualRow]:
                w_law = enumerate_srs(pop, n)
                sigma = math.sqrt(srs_variance(pop, n))
                out = []
                for h_name in h_names:
                    h = get_test_function(h_name)
                    gap = expectation_gap(w_law, sigma, h)
                    out.append(self._row("domination", f"{name}:{h_name}", "srs bound", excess(gap, srs_bound(pop, n, h)), tol))
                    if pop.distinct:
                        out.append(
                            self._row(
                                "domination", f"{name}:{h_name}", "coupling bound",
                                excess(gap, exact_coupling_bound(pop, n, h)), tol,
                            )
                        )
                return out

            rows.extend(self._guard("domination", name, check))

        for name, d in laws.items():

            def iid_check(d=d, name=name) -> List[ResidualRow]:
                third, fourth, abs3 = standardized_moments(d)
                w_law = convolve_all([d] * IID_SUMMANDS)
                sigma = math.sqrt(IID_SUMMANDS * float(d.probs_array @ d.atoms_array ** 2))
                out = []
                for h_name in h_names:
                    h = get_test_function(h_name)
                    gap = expectation_gap(w_law, sigma, h)
                    case = f"{name}:n={IID_SUMMANDS}:{h_name}"
                    out.append(self._row("domination", case, "clt bound", excess(gap, clt_iid_bound(IID_SUMMANDS, abs3, h)), tol))
                    if abs(third) <= mean_tol:
                        report = iid_fourth_moment_bound(IID_SUMMANDS, fourth, h)
                        out.append(self._row("domination", case, "iid bound", excess(gap, report), tol))
                return out

            rows.extend(self._guard("domination", f"{name}:iid", iid_check))

        if laws:

            def mixed_check() -> List[ResidualRow]:
                model = SumModel(summands=tuple(laws.values()))
                w_law = convolve_all(model.summands)
                sigma = math.sqrt(model.total_variance)
                out = []
                for h_name in h_names:
                    h = get_test_function(h_name)
                    gap = expectation_gap(w_law, sigma, h)
                    out.append(
                        self._row("domination", f"mixed:{h_name}", "independent clt bound",
                                  excess(gap, clt_independent_bound(model, h)), tol)
                    )
                return out

            rows.extend(self._guard("domination", "mixed", mixed_check))
        return rows

    # Command
    def execute(self, config: ExperimentConfig) -> List[ResidualRow]:
        root = config.fixtures or FIXTURE_ROOT
        if not Path(root).is_dir():
            raise InvariantViolation("input-file", f"fixture directory {root} does not exist")
        seed = 0 if config.seed is None else config.seed
        laws, rows = self._load_all(self.distributions, root / "distributions", "distribution")
        pops, failed = self._load_all(self.populations, root / "populations", "population")
        rows.extend(failed)
        families, failed = self._load_all(self.families, root / "families", "family")
        rows.extend(failed)
        if config.input is not None:
            try:
                families[Path(config.input).stem] = self.families.load(config.input)
            except ValueError as e:
                rows.append(self._row("family", Path(config.input).stem, f"load: {e}", math.inf, 0.0))
        logger.info(f"Loaded {len(laws)} distributions, {len(pops)} populations, {len(families)} families from {root}")

        suites = [
            ("characterization", lambda: self.characterization_suite(seed)),
            ("distribution", lambda: self.distribution_suite(laws)),
            ("family", lambda: self.family_suite(families, pops)),
            ("coupling", lambda: self.coupling_suite(pops)),
            ("stein", self.stein_suite),
            ("domination", lambda: self.domination_suite(laws, pops)),
        ]
        for name, suite in suites:
            produced = suite()
            logger.info(f"Suite {name}: {len(produced)} checks, {sum(not r.passed for r in produced)} failed")
            rows.extend(produced)
        return rows

    def row_count(self, result: List[ResidualRow]) -> int:
        return len(result)

    def record_extras(self, result: List[ResidualRow]) -> Dict:
        return {"failures": sum(not r.passed for r in result)}

    def write(self, config: ExperimentConfig, rows: List[ResidualRow]) -> str:
        """Render (and write, with --out) the residual CSV."""
        if config.out is not None:
            self.results.write_csv(config.out, rows, RESIDUAL_COLUMNS)
            self.write_record(config)
        return self.results.render_csv(rows, RESIDUAL_COLUMNS)

    @staticmethod
    def check(rows: List[ResidualRow]) -> None:
        failed = [r for r in rows if not r.passed]
        if failed:
            worst = failed[0]
            raise VerificationFailed(
                f"{len(failed)} of {len(rows)} checks failed; first: {worst.suite}/{worst.case} "
                f"{worst.quantity} residual {worst.residual!r} > {worst.tolerance!r}",
                failures=len(failed),
            )
