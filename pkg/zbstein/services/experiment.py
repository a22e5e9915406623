"""Sampling-rate experiment: exact (or Monte Carlo) gaps against the SRS bound over an n-grid."""

import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from zbstein.core.errors import EnumerationCapExceeded, InvariantViolation, VerificationFailed
from zbstein.core.workers import make_rng, run_ordered
from zbstein.models import Population, TestFunction
from zbstein.repositories import PopulationRepository, ResultsRepository
from zbstein.schemas import ExperimentConfig, ExperimentRow, YLaw
from zbstein.services.base import BaseCommandService
from zbstein.services.bound import resolve_test_function
from zbstein.services.srs import enumerate_srs, srs_bound, srs_constants, symmetrize_population
from zbstein.services.stein import expectation_gap

logger = logging.getLogger(__name__)

EXPERIMENT_COLUMNS = [
    "N", "n", "f", "sigma2", "C1", "C2", "bound", "gap_exact_or_mc", "gap_stderr", "seed",
    "exact", "B1", "B2", "asymptotic_bound", "n_abs_gap",
]

# Streams per grid point: symmetrization draws, Monte Carlo fallback
_POPULATION_STREAM = 0
_MONTE_CARLO_STREAM = 1


def draw_y(law: YLaw, rng: np.random.Generator, count: int) -> np.ndarray:
    if law == YLaw.PM1:
        return rng.choice(np.array([-1.0, 1.0]), size=count)
    if law == YLaw.NORMAL:
        return rng.standard_normal(count)
    return rng.uniform(-1.0, 1.0, size=count)


def loglog_slope(ns: List[int], gaps: List[float]) -> Optional[float]:
    """Least-squares slope of log|gap| against log n; None when undefined."""
    points = [(math.log(n), math.log(abs(g))) for n, g in zip(ns, gaps) if g != 0]
    if len(points) < 2:
        return None
    x, y = np.asarray(points).T
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


class SrsExperimentService(BaseCommandService[Tuple[List[ExperimentRow], Optional[float]]]):
    """Service for the srs-experiment command."""

    def __init__(
        self,
        populations: Optional[PopulationRepository] = None,
        results: Optional[ResultsRepository] = None,
    ):
        super().__init__(results)
        self.populations = populations or PopulationRepository()

    def _population(self, config: ExperimentConfig, n: int, fixed: Optional[Population]) -> Population:
        if fixed is not None:
            return fixed
        if config.fraction is None:
            raise InvariantViolation("missing-input", "give --input or --fraction for symmetrized populations")
        N = n / config.fraction
        if abs(N - round(N)) > 1e-9 or round(N) % 2:
            raise InvariantViolation("sampling-fraction", f"n/f = {N:g} must be an even integer")
        N = int(round(N))
        rng = make_rng(config.seed, n, _POPULATION_STREAM)
        return symmetrize_population(draw_y(config.y_law, rng, N // 2), N)

    def _row(self, config: ExperimentConfig, h: TestFunction, n: int, fixed: Optional[Population]) -> ExperimentRow:
        pop = self._population(config, n, fixed)
        constants = srs_constants(pop, n)
        sigma = math.sqrt(constants.sigma2)
        bound = srs_bound(pop, n, h)
        try:
            gap = expectation_gap(enumerate_srs(pop, n), sigma, h)
        except EnumerationCapExceeded as exc:
            logger.warning(f"n={n}: {exc}; falling back to {config.reps} Monte Carlo draws")
            values = pop.values_array

            def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
                return np.asarray([values[rng.permutation(pop.size)[:n]].sum() for _ in range(count)])

            gap = expectation_gap(sampler, sigma, h, rng=make_rng(config.seed, n, _MONTE_CARLO_STREAM), count=config.reps)

        asymptotic = (constants.b1 * h.norm(3) + constants.b2 * h.norm(4)) / n
        logger.info(f"n={n} N={pop.size}: gap={gap.value!r} bound={bound.bound!r}")
        return ExperimentRow(
            N=pop.size,
            n=n,
            f=constants.f,
            sigma2=constants.sigma2,
            C1=constants.c1,
            C2=constants.c2,
            bound=bound.bound,
            gap_exact_or_mc=gap.value,
            gap_stderr=gap.stderr,
            seed=config.seed,
            exact=gap.exact,
            B1=constants.b1,
            B2=constants.b2,
            asymptotic_bound=asymptotic,
            n_abs_gap=n * abs(gap.value),
        )

    def execute(self, config: ExperimentConfig) -> Tuple[List[ExperimentRow], Optional[float]]:
        if not config.n_grid:
            raise InvariantViolation("n-grid", "srs-experiment needs --n-grid")
        h = resolve_test_function(config.h)
        fixed = self.populations.load(config.input) if config.input is not None else None

        rows = run_ordered(lambda _, n: self._row(config, h, n, fixed), config.n_grid)
        self.check(rows)
        slope = loglog_slope([r.n for r in rows], [r.gap_exact_or_mc for r in rows])
        logger.info(f"log-log slope of |gap| against n: {slope}")
        return rows, slope

    @staticmethod
    def check(rows: List[ExperimentRow]) -> None:
        """Every row must satisfy |gap| <= bound; exact rows also n|gap| <= B1||h'''|| + B2||h''''||."""
        failures = []
        for r in rows:
            slack = 3.0 * r.gap_stderr
            if abs(r.gap_exact_or_mc) - slack > r.bound:
                failures.append(f"n={r.n}: |gap| {abs(r.gap_exact_or_mc)!r} exceeds bound {r.bound!r}")
            if r.exact and r.n_abs_gap > r.asymptotic_bound * r.n:
                failures.append(f"n={r.n}: n|gap| {r.n_abs_gap!r} exceeds asymptotic constant")
        if failures:
            raise VerificationFailed("; ".join(failures), failures=len(failures))

    def row_count(self, result) -> int:
        return len(result[0])

    def record_extras(self, result) -> Dict:
        return {"loglog_slope": result[1]}

    def write(self, config: ExperimentConfig, result) -> str:
        """Render (and write, with --out) the CSV; the slope goes in a trailing comment line."""
        rows, slope = result
        footer = [f"loglog_slope={slope!r}"]
        if config.out is not None:
            self.results.write_csv(config.out, rows, EXPERIMENT_COLUMNS, footer)
            self.write_record(config)
        return self.results.render_csv(rows, EXPERIMENT_COLUMNS, footer)
