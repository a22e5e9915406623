"""Joint constructions of (W, W*) for independent and dependent sums."""

import itertools
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from zbstein.core.errors import DegenerateCouplingError, InvariantViolation
from zbstein.models import (
    CouplingSample,
    DependentFamily,
    DiscreteDistribution,
    FamilyConditionReport,
    FamilyOutcome,
    JointLaw,
    PairDistribution,
    SumModel,
)
from zbstein.services.dist import (
    AliasTable,
    compensated_cumsum,
    convolve_all,
    moment,
    require_mean_zero,
    sample,
)
from zbstein.services.zerobias import PolynomialLike, as_polynomial, square_bias_pair

logger = logging.getLogger(__name__)


def _draw_index(weights: Sequence[float], rng: np.random.Generator) -> int:
    cumulative = compensated_cumsum(weights)
    return min(int(np.searchsorted(cumulative, rng.random(), side="right")), len(weights) - 1)


def _require_independent(model: SumModel) -> Tuple[DiscreteDistribution, ...]:
    if not model.independent:
        raise InvariantViolation("independent-model", "operation needs independent summand laws")
    for d in model.summands:
        require_mean_zero(d)
    return model.summands


# Independent sums
def replacement_weights(model: SumModel) -> List[float]:
    """P(I = i) = sigma_i^2 / sigma^2."""
    _require_independent(model)
    variances = model.variances
    total = math.fsum(variances)
    if total <= 0:
        raise InvariantViolation("zero-variance", "total variance is zero")
    weights = [v / total for v in variances]
    norm = math.fsum(weights)
    return [w / norm for w in weights]


def independent_sum_coupling(model: SumModel, rng: np.random.Generator) -> CouplingSample:
    """Draw X_1..X_n, pick I by variance, replace X_I with an independent X_I*."""
    summands = _require_independent(model)
    weights = replacement_weights(model)
    xs = [float(sample(d, rng, 1)[0]) for d in summands]
    index = _draw_index(weights, rng)

    pair = square_bias_pair(summands[index])
    x1, x2 = pair.pairs[_draw_index(pair.probs, rng)]
    u = float(rng.random())
    rest = xs[:index] + xs[index + 1:]
    w_star = math.fsum(rest) + (u * x1 + (1.0 - u) * x2)
    return CouplingSample(
        w=math.fsum(xs),
        w_star=w_star,
        index=index,
        u=u,
        summands=tuple(xs),
        replaced=(x1, x2),
    )


def sample_independent_coupling(
    model: SumModel, rng: np.random.Generator, count: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized (W, W*) draws of the replacement coupling."""
    summands = _require_independent(model)
    weights = replacement_weights(model)
    draws = np.column_stack([sample(d, rng, count) for d in summands])
    w = draws.sum(axis=1)
    index = AliasTable(weights).draw(rng, count)

    x_star = np.empty(count)
    for i, d in enumerate(summands):
        mask = index == i
        hits = int(mask.sum())
        if hits == 0:
            continue
        pair = square_bias_pair(d)
        picks = AliasTable(pair.probs).draw(rng, hits)
        u = rng.random(hits)
        x_star[mask] = u * pair.first_array[picks] + (1.0 - u) * pair.second_array[picks]
    w_star = w - draws[np.arange(count), index] + x_star
    return w, w_star


def exact_independent_w_star(model: SumModel) -> PairDistribution:
    """Endpoint law (W_I + x', W_I + x'') of the replacement coupling; U stays symbolic."""
    summands = _require_independent(model)
    weights = replacement_weights(model)
    pairs: List[Tuple[float, float]] = []
    probs: List[float] = []
    for i, d in enumerate(summands):
        rest = convolve_all(summands[:i] + summands[i + 1:])
        pair = square_bias_pair(d)
        for s, ps in zip(rest.atoms, rest.probs):
            for (x1, x2), q in zip(pair.pairs, pair.probs):
                pairs.append((s + x1, s + x2))
                probs.append(weights[i] * ps * q)
    norm = math.fsum(probs)
    return PairDistribution(pairs=tuple(pairs), probs=tuple(p / norm for p in probs))


def independent_family(model: SumModel) -> DependentFamily:
    """Family with X_i', X_i'' independent replicates of X_i."""
    summands = _require_independent(model)
    outcomes = []
    base_probs = []
    for combo in itertools.product(*(zip(d.atoms, d.probs) for d in summands)):
        outcomes.append(tuple(a for a, _ in combo))
        base_probs.append(math.prod(p for _, p in combo))
    base = JointLaw(outcomes=tuple(outcomes), probs=tuple(base_probs))

    laws = []
    for i, d in enumerate(summands):
        law = tuple(
            FamilyOutcome(values=values, alt=alt, prob=p * q)
            for values, p in zip(outcomes, base_probs)
            for alt, q in zip(d.atoms, d.probs)
        )
        laws.append(law)
    return DependentFamily(base=base, laws=tuple(laws))


def iid_squared_difference(d: DiscreteDistribution) -> float:
    """E(X* - X)^2 = EX^4 / (3 sigma^2) + sigma^2 for X* independent of X."""
    sigma2 = require_mean_zero(d)
    return moment(d, 4) / (3.0 * sigma2) + sigma2


def resampled_exchangeable_pair(d: DiscreteDistribution, n: int, j: int) -> PairDistribution:
    """(W, W') for an i.i.d. sum of n copies of d where W' redraws j of the summands.

    E(W' | W) = (1 - j/n) W, so the pair qualifies for the exchangeable
    reweighting.
    """
    if not 1 <= j <= n:
        raise ValueError("need 1 <= j <= n")
    kept = convolve_all([d] * (n - j))
    redrawn = convolve_all([d] * j)
    mass: Dict[Tuple[float, float], float] = {}
    for s, ps in zip(kept.atoms, kept.probs):
        for a, pa in zip(redrawn.atoms, redrawn.probs):
            for b, pb in zip(redrawn.atoms, redrawn.probs):
                key = (s + a, s + b)
                mass[key] = mass.get(key, 0.0) + ps * (pa * pb)
    norm = math.fsum(mass.values())
    return PairDistribution(
        pairs=tuple(mass), probs=tuple(p / norm for p in mass.values()), exchangeable=True
    )


# Dependent families
def rho_from_family(fam: DependentFamily) -> float:
    """rho = 1 - sum v_i^2 / (2 sigma^2)."""
    sigma2 = fam.sigma2
    if sigma2 <= 0:
        raise InvariantViolation("zero-variance", "family base law has zero variance")
    return 1.0 - math.fsum(fam.v_squared) / (2.0 * sigma2)


def _rest_plus(values: Tuple[float, ...], i: int, x: float) -> float:
    """W_i + x computed canonically."""
    return math.fsum(values[:i] + (x,) + values[i + 1:])


def rho_from_identity(fam: DependentFamily) -> float:
    """rho recovered from sum_i E X_i' (W_i + X_i'') = rho E W^2."""
    sigma2 = fam.sigma2
    if sigma2 <= 0:
        raise InvariantViolation("zero-variance", "family base law has zero variance")
    lhs = math.fsum(
        o.prob * o.values[i] * _rest_plus(o.values, i, o.alt)
        for i, law in enumerate(fam.laws)
        for o in law
    )
    return lhs / sigma2


def _accumulate(entries) -> Dict[tuple, float]:
    mass: Dict[tuple, List[float]] = {}
    for key, p in entries:
        mass.setdefault(key, []).append(p)
    return {key: math.fsum(ps) for key, ps in mass.items()}


def _max_gap(a: Dict[tuple, float], b: Dict[tuple, float]) -> float:
    keys = set(a) | set(b)
    return max((abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys), default=0.0)


def verify_family_conditions(
    fam: DependentFamily,
    f: Optional[PolynomialLike] = None,
    conditional: bool = False,
) -> FamilyConditionReport:
    """Exact residuals of swap symmetry, marginal consistency and the linearity identity.

    With f unset the identity is checked for f(x) = x and f(x) = x^2.
    ``conditional`` adds the residual of E{X_i' | W_i + X_i''} = (rho/n)(W_i + X_i'').
    """
    rho = rho_from_family(fam)
    base = _accumulate(zip(fam.base.outcomes, fam.base.probs))

    swap = 0.0
    marginal = 0.0
    for i, law in enumerate(fam.laws):
        joint = _accumulate(((o.values, o.alt), o.prob) for o in law)
        swapped = {
            (values[:i] + (alt,) + values[i + 1:], values[i]): p for (values, alt), p in joint.items()
        }
        swap = max(swap, _max_gap(joint, swapped))
        marginal = max(marginal, _max_gap(_accumulate((o.values, o.prob) for o in law), base))

    polynomials = [as_polynomial([0.0, 1.0]), as_polynomial([0.0, 0.0, 1.0])] if f is None else [as_polynomial(f)]
    sums = fam.base.sums()
    linearity = 0.0
    for poly in polynomials:
        lhs = math.fsum(
            o.prob * o.values[i] * float(poly(_rest_plus(o.values, i, o.alt)))
            for i, law in enumerate(fam.laws)
            for o in law
        )
        rhs = rho * math.fsum(p * w * float(poly(w)) for w, p in zip(sums, fam.base.probs))
        linearity = max(linearity, abs(lhs - rhs))

    conditional_residual = None
    if conditional:
        conditional_residual = 0.0
        for i, law in enumerate(fam.laws):
            groups: Dict[float, List[Tuple[float, float]]] = {}
            for o in law:
                groups.setdefault(_rest_plus(o.values, i, o.alt), []).append((o.prob, o.values[i]))
            for t, entries in groups.items():
                mass = math.fsum(p for p, _ in entries)
                if mass <= 0:
                    continue
                cond_mean = math.fsum(p * x for p, x in entries) / mass
                conditional_residual = max(conditional_residual, abs(cond_mean - rho / fam.n * t))

    report = FamilyConditionReport(
        rho=rho,
        swap_residual=swap,
        marginal_residual=marginal,
        linearity_residual=linearity,
        conditional_residual=conditional_residual,
    )
    logger.debug(f"Family conditions: {report}")
    return report


def dependent_index_weights(fam: DependentFamily) -> List[float]:
    """P(I = i) = v_i^2 / sum_j v_j^2."""
    v2 = fam.v_squared
    total = math.fsum(v2)
    if total <= 0:
        raise DegenerateCouplingError("all v_i^2 vanish; the coupling is undefined")
    return [v / total for v in v2]


def _hat_weights(fam: DependentFamily, i: int) -> List[float]:
    """Reweighted law (x_i' - x_i'')^2 dF_{n,i} / v_i^2."""
    law = fam.laws[i]
    masses = [(o.values[i] - o.alt) ** 2 * o.prob for o in law]
    total = math.fsum(masses)
    return [m / total for m in masses]


def dependent_coupling(fam: DependentFamily, rng: np.random.Generator) -> CouplingSample:
    """W* = U X_I' + (1 - U) X_I'' + W_I under the reweighted family law.

    The recorded w is an independent draw of the base law; the general
    construction couples W* to W in distribution only.
    """
    weights = dependent_index_weights(fam)
    index = _draw_index(weights, rng)
    outcome = fam.laws[index][_draw_index(_hat_weights(fam, index), rng)]
    u = float(rng.random())
    x1 = outcome.values[index]
    x2 = outcome.alt
    rest = outcome.values[:index] + outcome.values[index + 1:]
    w_star = math.fsum(rest) + (u * x1 + (1.0 - u) * x2)

    base = fam.base.outcomes[_draw_index(fam.base.probs, rng)]
    return CouplingSample(
        w=math.fsum(base),
        w_star=w_star,
        index=index,
        u=u,
        summands=base,
        replaced=(x1, x2),
        hat_values=outcome.values,
    )


def sample_dependent_coupling(fam: DependentFamily, rng: np.random.Generator, count: int) -> np.ndarray:
    """Vectorized W* draws of the dependent construction."""
    weights = dependent_index_weights(fam)
    index = AliasTable(weights).draw(rng, count)
    w_star = np.empty(count)
    for i, law in enumerate(fam.laws):
        mask = index == i
        hits = int(mask.sum())
        if hits == 0:
            continue
        first = np.asarray([o.values[i] for o in law])
        second = np.asarray([o.alt for o in law])
        rest = np.asarray([math.fsum(o.values) - o.values[i] for o in law])
        picks = AliasTable(_hat_weights(fam, i)).draw(rng, hits)
        u = rng.random(hits)
        w_star[mask] = rest[picks] + u * first[picks] + (1.0 - u) * second[picks]
    return w_star


def exact_dependent_w_star(fam: DependentFamily) -> PairDistribution:
    """Endpoint law (W_I + x_I', W_I + x_I'') of the dependent construction."""
    weights = dependent_index_weights(fam)
    pairs: List[Tuple[float, float]] = []
    probs: List[float] = []
    for i, law in enumerate(fam.laws):
        if weights[i] == 0:
            continue
        for o, q in zip(law, _hat_weights(fam, i)):
            if q == 0:
                continue
            pairs.append((_rest_plus(o.values, i, o.values[i]), _rest_plus(o.values, i, o.alt)))
            probs.append(weights[i] * q)
    norm = math.fsum(probs)
    return PairDistribution(pairs=tuple(pairs), probs=tuple(p / norm for p in probs))
