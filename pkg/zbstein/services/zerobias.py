"""The zero-bias transformation of finite mean-zero laws.

Zero-biased laws of discrete variables are mixtures of uniforms, so every
result here is an exact ``PiecewiseUniformDensity`` and every expectation of
a polynomial against it is closed form.
"""

import logging
import math
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial

from zbstein.core.config import settings
from zbstein.core.errors import DegenerateCouplingError, InvariantViolation
from zbstein.models import DiscreteDistribution, PairDistribution, PiecewiseUniformDensity
from zbstein.services.dist import (
    AliasTable,
    cdf,
    compensated_cumsum,
    moment,
    require_mean_zero,
)

logger = logging.getLogger(__name__)

PolynomialLike = Union[Polynomial, Sequence[float]]

# Above this many atoms suffix sums switch from fsum to a compensated scan
_EXACT_SUFFIX_LIMIT = 4096


def as_polynomial(f: PolynomialLike) -> Polynomial:
    return f if isinstance(f, Polynomial) else Polynomial(np.asarray(f, dtype=float))


# Density construction
def zero_bias_density(d: DiscreteDistribution) -> PiecewiseUniformDensity:
    """Density sigma^-2 E[W; W > w] on the consecutive atom intervals of d."""
    sigma2 = require_mean_zero(d)
    weighted = [p * a for a, p in zip(d.atoms, d.probs)]
    m = len(weighted)
    if m <= _EXACT_SUFFIX_LIMIT:
        suffix = [math.fsum(weighted[i + 1:]) for i in range(m - 1)]
    else:
        suffix = compensated_cumsum(reversed(weighted[1:]))[::-1].tolist()
    densities = tuple(max(s / sigma2, 0.0) for s in suffix)
    return PiecewiseUniformDensity(breakpoints=d.atoms, densities=densities)


def zero_bias_moment(d: DiscreteDistribution, n: int) -> float:
    """E (W*)^n = E W^{n+2} / ((n+1) sigma^2)."""
    if n < 1:
        raise ValueError("moment order must be at least 1")
    sigma2 = require_mean_zero(d)
    return moment(d, n + 2) / ((n + 1) * sigma2)


def zero_bias_abs_moment(d: DiscreteDistribution) -> float:
    """E|W*| by exact integration of |w| against the zero-bias density."""
    density = zero_bias_density(d)
    terms = []
    for a, b, c in zip(density.breakpoints, density.breakpoints[1:], density.densities):
        if a >= 0:
            terms.append(c * (b * b - a * a) / 2.0)
        elif b <= 0:
            terms.append(c * (a * a - b * b) / 2.0)
        else:
            terms.append(c * (a * a + b * b) / 2.0)
    return math.fsum(terms)


# Exact integration against piecewise-uniform densities
def density_mass(density: PiecewiseUniformDensity) -> float:
    b = density.breakpoints
    return math.fsum(c * (b[i + 1] - b[i]) for i, c in enumerate(density.densities))


def expect_polynomial(density: PiecewiseUniformDensity, g: PolynomialLike) -> float:
    """Integral of g against the density via the antiderivative at the breakpoints."""
    antiderivative = as_polynomial(g).integ()
    values = antiderivative(density.breakpoints_array)
    return math.fsum(c * (values[i + 1] - values[i]) for i, c in enumerate(density.densities))


def density_moment(density: PiecewiseUniformDensity, n: int) -> float:
    if n < 0:
        raise ValueError("moment order must be nonnegative")
    return expect_polynomial(density, Polynomial.basis(n))


def characterization_residual(d: DiscreteDistribution, f: PolynomialLike) -> float:
    """E W f(W) - sigma^2 E f'(W*), both sides computed exactly."""
    sigma2 = require_mean_zero(d)
    f = as_polynomial(f)
    fw = f(d.atoms_array)
    lhs = math.fsum(p * a * v for a, p, v in zip(d.atoms, d.probs, fw))
    rhs = sigma2 * expect_polynomial(zero_bias_density(d), f.deriv())
    return lhs - rhs


def density_pdf(density: PiecewiseUniformDensity, x) -> np.ndarray:
    """Density value at x; intervals are right-open."""
    x = np.asarray(x, dtype=float)
    b = density.breakpoints_array
    c = density.densities_array
    idx = np.searchsorted(b, x, side="right") - 1
    inside = (idx >= 0) & (idx < len(c))
    return np.where(inside, c[np.clip(idx, 0, len(c) - 1)], 0.0)


def density_cdf(density: PiecewiseUniformDensity, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    b = density.breakpoints_array
    c = density.densities_array
    masses = c * np.diff(b)
    cumulative = np.concatenate(([0.0], compensated_cumsum(masses)))
    idx = np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(c) - 1)
    values = cumulative[idx] + c[idx] * (x - b[idx])
    values = np.where(x < b[0], 0.0, values)
    values = np.where(x >= b[-1], cumulative[-1], values)
    return np.clip(values, 0.0, 1.0)


def density_difference(
    a: PiecewiseUniformDensity,
    b: PiecewiseUniformDensity,
    merge_tolerance: float = 1e-9,
) -> float:
    """Max pointwise gap between two piecewise-uniform densities.

    Breakpoints closer than merge_tolerance (relative to the support scale)
    are treated as one, so rounding slivers between equal breakpoints
    computed along different routes do not register as differences.
    """
    points = np.union1d(a.breakpoints_array, b.breakpoints_array)
    scale = max(1.0, float(np.max(np.abs(points))))
    keep = np.concatenate(([True], np.diff(points) > merge_tolerance * scale))
    points = points[keep]
    if len(points) < 2:
        return 0.0
    mids = (points[:-1] + points[1:]) / 2.0
    return float(np.max(np.abs(density_pdf(a, mids) - density_pdf(b, mids))))


def is_unimodal(density: PiecewiseUniformDensity, tolerance: Optional[float] = None) -> bool:
    """Nondecreasing left of zero, nonincreasing right of zero."""
    c = density.densities_array
    b = density.breakpoints_array
    tolerance = (settings.identity_tolerance if tolerance is None else tolerance) * max(1.0, float(c.max()))
    for i in range(len(c) - 1):
        step = c[i + 1] - c[i]
        if b[i + 2] <= 0 and step < -tolerance:
            return False
        if b[i + 1] >= 0 and step > tolerance:
            return False
    return True


def is_symmetric_density(density: PiecewiseUniformDensity, tolerance: Optional[float] = None) -> bool:
    tolerance = settings.identity_tolerance if tolerance is None else tolerance
    b = density.breakpoints_array
    c = density.densities_array
    return bool(
        np.allclose(b, -b[::-1], rtol=0.0, atol=tolerance)
        and np.allclose(c, c[::-1], rtol=0.0, atol=tolerance)
    )


def wasserstein_to_discrete(d: DiscreteDistribution, density: PiecewiseUniformDensity) -> float:
    """Exact W1 distance: integral of |F_d - F_density| over the merged grid."""
    grid = np.union1d(d.atoms_array, density.breakpoints_array)
    fd = cdf(d, grid)
    fz = density_cdf(density, grid)
    total = []
    for k in range(len(grid) - 1):
        h = grid[k + 1] - grid[k]
        e0 = fz[k] - fd[k]
        e1 = fz[k + 1] - fd[k]
        if e0 * e1 >= 0:
            total.append(h * (abs(e0) + abs(e1)) / 2.0)
        else:
            total.append(h * (e0 * e0 + e1 * e1) / (2.0 * (abs(e0) + abs(e1))))
    return math.fsum(total)


def sample_density(density: PiecewiseUniformDensity, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draws from the mixture of uniforms: pick a piece by alias table, then a point in it."""
    b = density.breakpoints_array
    widths = np.diff(b)
    table = AliasTable(density.densities_array * widths)
    pieces = table.draw(rng, count)
    return b[pieces] + rng.random(count) * widths[pieces]


# Pair constructions
def square_bias_pair(d: DiscreteDistribution) -> PairDistribution:
    """Pair law with mass (u - v)^2 p(u) p(v) / (2 sigma^2); the diagonal carries nothing."""
    sigma2 = require_mean_zero(d)
    atoms = d.atoms_array
    probs = d.probs_array
    gaps = (atoms[:, None] - atoms[None, :]) ** 2
    masses = gaps * (probs[:, None] * probs[None, :]) / (2.0 * sigma2)
    rows, cols = np.nonzero(~np.eye(len(atoms), dtype=bool))
    selected = masses[rows, cols]
    norm = math.fsum(selected)
    pairs = tuple((d.atoms[i], d.atoms[j]) for i, j in zip(rows, cols))
    return PairDistribution(pairs=pairs, probs=tuple(float(m) / norm for m in selected), exchangeable=True)


def product_pair(d: DiscreteDistribution) -> PairDistribution:
    """Joint law of two independent copies of d."""
    pairs = tuple((u, v) for u in d.atoms for v in d.atoms)
    probs = tuple(pu * pv for pu in d.probs for pv in d.probs)
    return PairDistribution(pairs=pairs, probs=probs, exchangeable=True)


def _swap_residual(joint: PairDistribution) -> float:
    mass: Dict[Tuple[float, float], float] = {}
    for pair, p in zip(joint.pairs, joint.probs):
        mass[pair] = mass.get(pair, 0.0) + p
    return max(abs(p - mass.get((v, u), 0.0)) for (u, v), p in mass.items())


def exchangeable_pair_zero_bias(joint: PairDistribution) -> PairDistribution:
    """Reweight an exchangeable pair (W, W') by (w - w')^2 / E(W - W')^2."""
    if _swap_residual(joint) > settings.mass_tolerance:
        raise InvariantViolation("exchangeable", "pair law is not invariant under swapping coordinates")
    first = joint.first_array
    second = joint.second_array
    scale = max(1.0, float(np.max(np.abs(first))))
    marginal_mean = math.fsum(p * w for w, p in zip(first, joint.probs))
    if abs(marginal_mean) > settings.mean_tolerance * scale:
        raise InvariantViolation("mean-zero", f"marginal mean is {marginal_mean!r}")

    masses = (first - second) ** 2 * joint.probs_array
    denominator = math.fsum(masses)
    if denominator <= 0:
        raise DegenerateCouplingError("W' equals W almost surely, E(W - W')^2 = 0")

    keep = masses > 0
    kept = masses[keep]
    norm = math.fsum(kept)
    pairs = tuple(pair for pair, k in zip(joint.pairs, keep) if k)
    return PairDistribution(pairs=pairs, probs=tuple(float(m) / norm for m in kept), exchangeable=True)


def interpolation_density(pair: PairDistribution) -> PiecewiseUniformDensity:
    """Exact law of U x' + (1 - U) x'' for (x', x'') ~ pair and U uniform, independent."""
    first = pair.first_array
    second = pair.second_array
    probs = pair.probs_array
    live = probs > 0
    lo = np.minimum(first, second)[live]
    hi = np.maximum(first, second)[live]
    probs = probs[live]
    if np.any(hi <= lo):
        raise InvariantViolation("point-mass", "pair law puts mass on x' = x''; the interpolation has an atom")

    breakpoints = np.unique(np.concatenate([lo, hi]))
    rates = probs / (hi - lo)
    delta = np.zeros(len(breakpoints))
    np.add.at(delta, np.searchsorted(breakpoints, lo), rates)
    np.add.at(delta, np.searchsorted(breakpoints, hi), -rates)
    densities = compensated_cumsum(delta)[:-1]
    # Cancellation leaves round-off where the density should vanish
    densities[densities < settings.identity_tolerance * max(1.0, float(rates.max()))] = 0.0
    return PiecewiseUniformDensity(breakpoints=tuple(breakpoints.tolist()), densities=tuple(densities.tolist()))


def sample_zero_bias(pair: PairDistribution, rng: np.random.Generator, u: Optional[float] = None) -> float:
    """One draw of U x' + (1 - U) x''; u fixes U for deterministic checks."""
    cumulative = compensated_cumsum(pair.probs)
    idx = min(int(np.searchsorted(cumulative, rng.random(), side="right")), len(pair.pairs) - 1)
    x1, x2 = pair.pairs[idx]
    u = rng.random() if u is None else u
    return u * x1 + (1.0 - u) * x2


def sample_zero_bias_many(pair: PairDistribution, rng: np.random.Generator, count: int) -> np.ndarray:
    table = AliasTable(pair.probs)
    idx = table.draw(rng, count)
    u = rng.random(count)
    return u * pair.first_array[idx] + (1.0 - u) * pair.second_array[idx]
