"""Finite discrete distributions: construction, moments, convolution and sampling."""

import logging
import math
from functools import reduce
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy import stats

from zbstein.core.config import settings
from zbstein.core.errors import InvariantViolation
from zbstein.models import DiscreteDistribution, MomentSummary

logger = logging.getLogger(__name__)


def compensated_cumsum(values: Iterable[float]) -> np.ndarray:
    """Running sums with Neumaier compensation."""
    out: List[float] = []
    total = 0.0
    comp = 0.0
    for x in values:
        t = total + x
        if abs(total) >= abs(x):
            comp += (total - t) + x
        else:
            comp += (x - t) + total
        total = t
        out.append(total + comp)
    return np.asarray(out, dtype=float)


def make_discrete(
    atoms: Sequence[float],
    probs: Sequence[float],
    tolerance: Optional[float] = None,
) -> DiscreteDistribution:
    """Build a canonical distribution: sorted, duplicates merged, zero mass dropped."""
    tolerance = settings.prob_sum_tolerance if tolerance is None else tolerance
    if len(atoms) != len(probs):
        raise InvariantViolation("length-mismatch", f"{len(atoms)} atoms but {len(probs)} probabilities")
    if not atoms:
        raise InvariantViolation("empty-distribution", "at least one atom is required")
    if any(not math.isfinite(float(a)) for a in atoms):
        raise InvariantViolation("finite-atoms", "atoms must be finite")
    if any(not math.isfinite(float(p)) or p < 0 for p in probs):
        raise InvariantViolation("nonnegative-probs", "probabilities must be finite and nonnegative")

    total = math.fsum(float(p) for p in probs)
    if abs(total - 1.0) > tolerance:
        raise InvariantViolation("prob-sum", f"probabilities sum to {total!r}, not 1 within {tolerance:g}")

    # Merge exact duplicates
    merged: dict = {}
    for a, p in zip(atoms, probs):
        if p > 0:
            merged.setdefault(float(a), []).append(float(p))
    keys = sorted(merged)
    masses = [math.fsum(merged[a]) for a in keys]
    norm = math.fsum(masses)
    return DiscreteDistribution(atoms=tuple(keys), probs=tuple(m / norm for m in masses))


def point_mass(atom: float) -> DiscreteDistribution:
    return DiscreteDistribution(atoms=(float(atom),), probs=(1.0,))


def moment(d: DiscreteDistribution, k: int) -> float:
    """E X^k by correctly rounded summation."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    return math.fsum(p * a ** k for a, p in zip(d.atoms, d.probs))


def abs_moment(d: DiscreteDistribution, k: int) -> float:
    """E |X|^k."""
    return math.fsum(p * abs(a) ** k for a, p in zip(d.atoms, d.probs))


def mean(d: DiscreteDistribution) -> float:
    return moment(d, 1)


def variance(d: DiscreteDistribution) -> float:
    m = mean(d)
    return math.fsum(p * (a - m) ** 2 for a, p in zip(d.atoms, d.probs))


def moment_summary(d: DiscreteDistribution) -> MomentSummary:
    m = mean(d)
    centered = [(a - m, p) for a, p in zip(d.atoms, d.probs)]
    return MomentSummary(
        mean=m,
        variance=math.fsum(p * x * x for x, p in centered),
        third=moment(d, 3),
        fourth=moment(d, 4),
        abs_third=abs_moment(d, 3),
    )


def center(d: DiscreteDistribution) -> DiscreteDistribution:
    """Shift d to mean zero; an already centered input is returned unchanged."""
    m = mean(d)
    if m == 0.0:
        return d
    shifted = [a - m for a in d.atoms]
    # A second pass removes the residual left by rounding in the first shift
    residual = math.fsum(p * a for a, p in zip(shifted, d.probs))
    shifted = [a - residual for a in shifted]
    return make_discrete(shifted, d.probs)


def require_mean_zero(d: DiscreteDistribution, tolerance: Optional[float] = None) -> float:
    """Return sigma^2 after checking mean zero and nonzero variance."""
    tolerance = settings.mean_tolerance if tolerance is None else tolerance
    m = mean(d)
    scale = max(1.0, max(abs(d.atoms[0]), abs(d.atoms[-1])))
    if abs(m) > tolerance * scale:
        raise InvariantViolation("mean-zero", f"mean is {m!r}; center the distribution first")
    sigma2 = moment(d, 2)
    if d.size < 2 or sigma2 <= 0:
        raise InvariantViolation("zero-variance", "distribution has zero variance")
    return sigma2


def is_symmetric(d: DiscreteDistribution, tolerance: float = 1e-12) -> bool:
    """Atom/probability list invariant under negation."""
    atoms = d.atoms_array
    probs = d.probs_array
    return bool(
        np.allclose(atoms, -atoms[::-1], rtol=0.0, atol=tolerance)
        and np.allclose(probs, probs[::-1], rtol=0.0, atol=tolerance)
    )


def convolve(d1: DiscreteDistribution, d2: DiscreteDistribution) -> DiscreteDistribution:
    """Exact law of X + Y for independent X ~ d1, Y ~ d2."""
    atoms = np.add.outer(d1.atoms_array, d2.atoms_array).ravel()
    probs = np.multiply.outer(d1.probs_array, d2.probs_array).ravel()
    return make_discrete(atoms.tolist(), probs.tolist())


def convolve_all(ds: Sequence[DiscreteDistribution]) -> DiscreteDistribution:
    if not ds:
        return point_mass(0.0)
    return reduce(convolve, ds)


def sample(d: DiscreteDistribution, rng: np.random.Generator, count: int) -> np.ndarray:
    """I.i.d. draws by inversion of the cumulative distribution."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    cdf = compensated_cumsum(d.probs)
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    return d.atoms_array[np.minimum(idx, d.size - 1)]


def cdf(d: DiscreteDistribution, x: np.ndarray) -> np.ndarray:
    """P(X <= x)."""
    cumulative = compensated_cumsum(d.probs)
    idx = np.searchsorted(d.atoms_array, np.asarray(x, dtype=float), side="right")
    padded = np.concatenate(([0.0], np.minimum(cumulative, 1.0)))
    return padded[idx]


def normal_discretization(num_points: int = 401, half_width: float = 6.0) -> DiscreteDistribution:
    """Equispaced grid on [-half_width, half_width] weighted by the normal density, centered."""
    grid = np.linspace(-half_width, half_width, num_points)
    weights = stats.norm.pdf(grid)
    weights = weights / math.fsum(weights)
    return center(make_discrete(grid.tolist(), weights.tolist()))


class AliasTable:
    """Vose alias table for O(1) draws from a finite mixture."""

    def __init__(self, probs: Sequence[float]):
        probs = np.asarray(probs, dtype=float)
        k = len(probs)
        if k == 0:
            raise ValueError("alias table needs at least one outcome")
        scaled = probs * k / probs.sum()
        self.prob = np.ones(k)
        self.alias = np.arange(k)

        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = g
            scaled[g] = scaled[g] + scaled[s] - 1.0
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)
        # Leftovers carry probability one up to rounding
        for i in small + large:
            self.prob[i] = 1.0

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        columns = rng.integers(0, len(self.prob), size=count)
        keep = rng.random(count) < self.prob[columns]
        return np.where(keep, columns, self.alias[columns])


def ks_critical_value(count: int, confidence: Optional[float] = None) -> float:
    """Asymptotic one-sample KS critical value at the given confidence."""
    confidence = settings.confidence if confidence is None else confidence
    return float(stats.kstwobign.ppf(confidence)) / math.sqrt(count)


def ks_statistic(samples: np.ndarray, cdf_fn) -> float:
    """Sup distance between the empirical CDF of samples and cdf_fn."""
    return float(stats.kstest(np.asarray(samples, dtype=float), cdf_fn).statistic)


def two_sample_ks_critical_value(m: int, n: int, confidence: Optional[float] = None) -> float:
    confidence = settings.confidence if confidence is None else confidence
    return float(stats.kstwobign.ppf(confidence)) * math.sqrt((m + n) / (m * n))


