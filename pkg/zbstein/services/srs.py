"""Simple random sampling without replacement: populations, the zero-bias
coupling of the sample sum, bound constants and exact enumeration oracles."""

import itertools
import logging
import math
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from zbstein.core.config import settings
from zbstein.core.errors import EnumerationCapExceeded, InvariantViolation
from zbstein.core.workers import run_ordered
from zbstein.models import (
    BoundMethod,
    BoundReport,
    DependentFamily,
    DiscreteDistribution,
    FamilyOutcome,
    JointLaw,
    PairDistribution,
    Population,
    SrsConstants,
    SrsCouplingSample,
    TestFunction,
    VarianceTermReport,
)
from zbstein.services.dist import make_discrete
from zbstein.services.stein import zero_bias_bound

logger = logging.getLogger(__name__)


class CoupledOutcome(NamedTuple):
    """One (sample, pair, fill) outcome of the coupling, by population index."""
    sample: Tuple[int, ...]
    first: int
    second: int
    filled: Tuple[int, ...]
    r: int
    prob: float


def falling_factorial(N: int, k: int) -> int:
    return math.perm(N, k)


# Populations
def load_population(values: Sequence[float], tolerance: Optional[float] = None) -> Population:
    """Rescale to <2> = 1 and check <1> = <3> = 0."""
    tolerance = settings.identity_tolerance if tolerance is None else tolerance
    raw = [float(v) for v in values]
    if len(raw) < 2:
        raise InvariantViolation("population-size", "population needs at least two values")
    if any(not math.isfinite(v) for v in raw):
        raise InvariantViolation("finite-values", "population values must be finite")
    second = math.fsum(v * v for v in raw)
    if second <= 0:
        raise InvariantViolation("zero-power-sum", "all population values are zero")

    scale = math.sqrt(second)
    scaled = sorted(v / scale for v in raw)
    power_sums = {k: math.fsum(v ** k for v in scaled) for k in range(1, 7)}
    for k in (1, 3):
        if abs(power_sums[k]) > tolerance:
            raise InvariantViolation(
                "moment-conditions", f"<{k}> = {power_sums[k]!r} after rescaling; need <1> = <3> = 0"
            )
    return Population.model_validate(
        {"values": tuple(scaled), "distinct": len(set(scaled)) == len(scaled), "power_sums": power_sums},
        context={"tolerance": tolerance},
    )


def symmetrize_population(y_values: Sequence[float], N: int) -> Population:
    """The N/2 values y / (2 sum y^2)^(1/2) together with their negatives."""
    if N < 2 or N % 2:
        raise InvariantViolation("population-size", "N must be a positive even number")
    y = [float(v) for v in y_values]
    if len(y) != N // 2:
        raise InvariantViolation("population-size", f"need N/2 = {N // 2} draws, got {len(y)}")
    total = math.fsum(v * v for v in y)
    if total <= 0:
        raise InvariantViolation("zero-power-sum", "all symmetrization draws are zero")
    scale = math.sqrt(2.0 * total)
    half = [v / scale for v in y]
    return load_population(half + [-v for v in half])


def _require_sample_size(pop: Population, n: int, upper: Optional[int] = None) -> None:
    upper = pop.size - 1 if upper is None else upper
    if not 0 < n <= upper:
        raise InvariantViolation("sample-size", f"need 0 < n <= {upper} for N = {pop.size}, got n = {n}")


def _require_distinct(pop: Population) -> None:
    if not pop.distinct:
        raise InvariantViolation("distinct-population", "operation needs distinct population values")


def srs_variance(pop: Population, n: int) -> float:
    """EW^2 = n (N - n) / (N (N - 1)) under <2> = 1."""
    _require_sample_size(pop, n)
    N = pop.size
    return n * (N - n) / (N * (N - 1))


def asymptotic_constants(f: float, n4: float, n6: float) -> Tuple[float, float]:
    """(B1, B2) for sampling fraction f with n4 = n<4> and n6 = n^2<6>."""
    if not 0 < f < 1:
        raise InvariantViolation("sampling-fraction", f"need 0 < f < 1, got {f!r}")
    if n4 < 0 or n6 < 0:
        raise InvariantViolation("nonnegative-input", "n<4> and n^2<6> must be nonnegative")
    spread = f * (1 - f)
    b1 = math.sqrt(8.0) / 3.0 * math.sqrt(spread / 4.0 + n6 + 2.0 * (f / (1 - f)) ** 2) / math.sqrt(spread)
    b2 = (11.0 * n4 + 45.0 * f) / (8.0 * spread)
    return b1, b2


def srs_constants(pop: Population, n: int) -> SrsConstants:
    _require_sample_size(pop, n)
    N = pop.size
    sigma2 = srs_variance(pop, n)
    alpha = (n - 1) / (N * (N - n)) - 1.0
    beta = -2.0 * (n - 1) / (N * (N - n + 1)) + (n - 3) / (N * (N - n)) - 1.0 / N
    gamma = -2.0 / (N * (N - n) * (N - n + 1))
    eta = (3.0 - N) / (N * (N - n))
    c1 = math.sqrt(8.0) * math.sqrt(
        sigma2 / (4.0 * n * n)
        + pop.power_sums[6] * alpha ** 2
        + beta ** 2
        + gamma ** 2 * (n - 1) ** 2
        + eta ** 2
    )
    c2 = 11.0 * pop.power_sums[4] + 45.0 / N
    f = n / N
    b1, b2 = asymptotic_constants(f, n * pop.power_sums[4], n * n * pop.power_sums[6])
    return SrsConstants(
        N=N,
        n=n,
        sigma2=sigma2,
        v1_sq=2.0 / (N - 1),
        rho=-n / (N - n),
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        eta=eta,
        c1=c1,
        c2=c2,
        f=f,
        b1=b1,
        b2=b2,
    )


def srs_bound(pop: Population, n: int, h: TestFunction) -> BoundReport:
    """C1 ||h'''|| / (3 sigma) + C2 ||h''''|| / (8 sigma^2); duplicates allowed."""
    constants = srs_constants(pop, n)
    sigma = math.sqrt(constants.sigma2)
    first = constants.c1 * h.norm(3) / (3.0 * sigma)
    second = constants.c2 * h.norm(4) / (8.0 * constants.sigma2)
    return BoundReport(
        method=BoundMethod.SRS,
        sigma=sigma,
        norm3=h.norm(3),
        norm4=h.norm(4),
        n=n,
        N=pop.size,
        c1=constants.c1,
        c2=constants.c2,
        first_term=first,
        second_term=second,
        bound=first + second,
    )


# Sampling and the coupling
def sample_srs(pop: Population, n: int, rng: np.random.Generator) -> np.ndarray:
    """Ordered draw, uniform over the N_n ordered vectors."""
    _require_sample_size(pop, n, upper=pop.size)
    return pop.values_array[rng.permutation(pop.size)[:n]]


@lru_cache(maxsize=64)
def _q_table(values: Tuple[float, ...]) -> Tuple[Tuple[Tuple[int, int], ...], Tuple[float, ...]]:
    N = len(values)
    pairs = tuple((i, j) for i in range(N) for j in range(N) if i != j)
    masses = tuple((values[i] - values[j]) ** 2 / (2.0 * N) for i, j in pairs)
    total = math.fsum(masses)
    if abs(total - 1.0) > settings.identity_tolerance:
        raise InvariantViolation("q-mass", f"q sums to {total!r}, not 1; population not normalized")
    return pairs, masses


def draw_q_pair(pop: Population, rng: np.random.Generator) -> Tuple[float, float]:
    """Ordered pair (u, v) with probability (u - v)^2 / (2N)."""
    _require_distinct(pop)
    i, j = _draw_q_indices(pop, rng)
    return pop.values[i], pop.values[j]


def _draw_q_indices(pop: Population, rng: np.random.Generator) -> Tuple[int, int]:
    pairs, masses = _q_table(pop.values)
    cumulative = np.cumsum(masses)
    k = min(int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right")), len(pairs) - 1)
    return pairs[k]


def _complement(N: int, used: Sequence[int]) -> List[int]:
    taken = set(used)
    return [k for k in range(N) if k not in taken]


def couple_srs(pop: Population, n: int, rng: np.random.Generator, u: Optional[float] = None) -> SrsCouplingSample:
    """Draw X, an independent q-pair for coordinate one, and refill the colliding coordinates."""
    _require_distinct(pop)
    _require_sample_size(pop, n)
    N = pop.size
    values = pop.values
    sample = [int(k) for k in rng.permutation(N)[:n]]
    first, second = _draw_q_indices(pop, rng)

    filled = list(sample[1:])
    collided = [pos for pos, k in enumerate(filled) if k in (first, second)]
    spare = _complement(N, [first, second] + filled)
    if len(collided) == 1:
        filled[collided[0]] = spare[int(rng.integers(len(spare)))]
    elif len(collided) == 2:
        a, b = rng.choice(len(spare), size=2, replace=False)
        filled[collided[0]] = spare[int(a)]
        filled[collided[1]] = spare[int(b)]

    u = float(rng.random()) if u is None else u
    x1, x2 = values[first], values[second]
    hat_rest = math.fsum(values[k] for k in filled)
    return SrsCouplingSample(
        sample=tuple(values[k] for k in sample),
        first=x1,
        second=x2,
        filled=tuple(values[k] for k in filled),
        r=len(collided),
        u=u,
        w=math.fsum(values[k] for k in sample),
        w_star=hat_rest + (u * x1 + (1.0 - u) * x2),
    )


# Exact enumeration
def _composition_count(multiplicities: Sequence[int], n: int) -> int:
    ways = [1] + [0] * n
    for m in multiplicities:
        nxt = [0] * (n + 1)
        for total, count in enumerate(ways):
            if count:
                for k in range(min(m, n - total) + 1):
                    nxt[total + k] += count
        ways = nxt
    return ways[n]


def _compositions(multiplicities: Sequence[int], n: int, start: int = 0):
    if start == len(multiplicities):
        if n == 0:
            yield ()
        return
    remaining = sum(multiplicities[start + 1:])
    for k in range(max(0, n - remaining), min(multiplicities[start], n) + 1):
        for rest in _compositions(multiplicities, n - k, start + 1):
            yield (k,) + rest


def enumerate_srs(pop: Population, n: int, cap: Optional[int] = None) -> DiscreteDistribution:
    """Exact law of W by enumerating how many copies of each distinct value are drawn."""
    _require_sample_size(pop, n, upper=pop.size)
    cap = settings.enumeration_cap if cap is None else cap
    distinct = sorted(set(pop.values))
    multiplicities = [pop.values.count(v) for v in distinct]
    size = _composition_count(multiplicities, n)
    if size > cap:
        raise EnumerationCapExceeded(size, cap)

    total = math.comb(pop.size, n)
    head = multiplicities[0]
    tail = multiplicities[1:]

    def branch(_: int, k0: int) -> List[Tuple[float, float]]:
        rows = []
        for rest in _compositions(tail, n - k0):
            counts = (k0,) + rest
            members = [v for v, k in zip(distinct, counts) for _ in range(k)]
            weight = math.prod(math.comb(m, k) for m, k in zip(multiplicities, counts))
            rows.append((math.fsum(members), weight / total))
        return rows

    # Split by how many copies of the first value enter the sample
    leading = list(range(max(0, n - sum(tail)), min(head, n) + 1))
    rows = [row for part in run_ordered(branch, leading) for row in part]
    logger.debug(f"Enumerated {len(rows)} compositions for N={pop.size}, n={n}")
    return make_discrete([a for a, _ in rows], [p for _, p in rows])


def enumerate_couple_srs(pop: Population, n: int, cap: Optional[int] = None) -> List[CoupledOutcome]:
    """Every (sample, pair, fill) outcome of couple_srs with its exact probability."""
    _require_distinct(pop)
    _require_sample_size(pop, n)
    cap = settings.enumeration_cap if cap is None else cap
    N = pop.size
    samples = falling_factorial(N, n)
    size = samples * N * (N - 1)
    if size > cap:
        raise EnumerationCapExceeded(size, cap)

    pairs, masses = _q_table(pop.values)
    outcomes: List[CoupledOutcome] = []
    for sample in itertools.permutations(range(N), n):
        for (first, second), q in zip(pairs, masses):
            base = q / samples
            rest = list(sample[1:])
            collided = [pos for pos, k in enumerate(rest) if k in (first, second)]
            spare = _complement(N, [first, second] + rest)
            if not collided:
                outcomes.append(CoupledOutcome(sample, first, second, tuple(rest), 0, base))
            elif len(collided) == 1:
                for k in spare:
                    rest[collided[0]] = k
                    outcomes.append(CoupledOutcome(sample, first, second, tuple(rest), 1, base / len(spare)))
            else:
                share = base / (len(spare) * (len(spare) - 1))
                for a, b in itertools.permutations(spare, 2):
                    rest[collided[0]] = a
                    rest[collided[1]] = b
                    outcomes.append(CoupledOutcome(sample, first, second, tuple(rest), 2, share))
    return outcomes


def hat_law_residual(pop: Population, n: int, outcomes: Optional[List[CoupledOutcome]] = None) -> float:
    """Max deviation of the hat-vector law from (x' - x'')^2 / (2N) / (N-2)_{n-1}."""
    outcomes = enumerate_couple_srs(pop, n) if outcomes is None else outcomes
    N = pop.size
    values = pop.values
    observed: Dict[Tuple[int, ...], List[float]] = {}
    for o in outcomes:
        observed.setdefault((o.first, o.second) + o.filled, []).append(o.prob)

    spread = falling_factorial(N - 2, n - 1)
    residual = 0.0
    for first, second in itertools.permutations(range(N), 2):
        expected = (values[first] - values[second]) ** 2 / (2.0 * N) / spread
        for filled in itertools.permutations(_complement(N, [first, second]), n - 1):
            got = math.fsum(observed.pop((first, second) + filled, []))
            residual = max(residual, abs(got - expected))
    # Anything left is a hat vector outside the support
    for probs in observed.values():
        residual = max(residual, math.fsum(probs))
    return residual


def exact_srs_w_star(pop: Population, n: int, outcomes: Optional[List[CoupledOutcome]] = None) -> PairDistribution:
    """Endpoint law of W* = U x' + (1 - U) x'' + sum of the filled coordinates."""
    outcomes = enumerate_couple_srs(pop, n) if outcomes is None else outcomes
    values = pop.values
    mass: Dict[Tuple[float, float], List[float]] = {}
    for o in outcomes:
        rest = [values[k] for k in o.filled]
        key = (math.fsum(rest + [values[o.first]]), math.fsum(rest + [values[o.second]]))
        mass.setdefault(key, []).append(o.prob)
    probs = [math.fsum(ps) for ps in mass.values()]
    norm = math.fsum(probs)
    return PairDistribution(pairs=tuple(mass), probs=tuple(p / norm for p in probs))


def srs_family(pop: Population, n: int) -> DependentFamily:
    """Exchangeable family: an ordered sample of size n + 1 supplies X_i' and X_i''."""
    _require_sample_size(pop, n)
    N = pop.size
    values = pop.values
    base_prob = 1.0 / falling_factorial(N, n)
    law_prob = 1.0 / falling_factorial(N, n + 1)
    draws = list(itertools.permutations(range(N), n))
    base = JointLaw(
        outcomes=tuple(tuple(values[k] for k in draw) for draw in draws),
        probs=(base_prob,) * len(draws),
    )
    laws = []
    for i in range(n):
        law = []
        for draw in draws:
            for extra in _complement(N, draw):
                law.append(FamilyOutcome(values=tuple(values[k] for k in draw), alt=values[extra], prob=law_prob))
        laws.append(tuple(law))
    return DependentFamily(base=base, laws=tuple(laws))


# Variance terms of the coupling
def _abs_linear_mean(d: float, c: float) -> float:
    """E|U d + c| for U uniform on [0, 1]."""
    if d == 0:
        return abs(c)
    root = -c / d
    if root <= 0 or root >= 1:
        return abs(d / 2.0 + c)
    return (c * c + (d + c) ** 2) / (2.0 * abs(d))


def _variance_terms_exact(pop: Population, n: int) -> VarianceTermReport:
    outcomes = enumerate_couple_srs(pop, n)
    values = pop.values
    by_w: Dict[float, List[Tuple[float, float]]] = {}
    sq_terms, mean_terms, abs_terms = [], [], []
    for o in outcomes:
        w = math.fsum(values[k] for k in o.sample)
        d = values[o.first] - values[o.second]
        c = values[o.second] + math.fsum(values[k] for k in o.filled) - w
        by_w.setdefault(w, []).append((o.prob, d / 2.0 + c))
        sq_terms.append(o.prob * (d * d / 3.0 + d * c + c * c))
        mean_terms.append(o.prob * (d / 2.0 + c))
        abs_terms.append(o.prob * _abs_linear_mean(d, c))

    cond_means = []
    for entries in by_w.values():
        mass = math.fsum(p for p, _ in entries)
        cond_means.append((mass, math.fsum(p * m for p, m in entries) / mass))
    second_moment = math.fsum(p * m * m for p, m in cond_means)
    mean_diff = math.fsum(mean_terms)
    constants = srs_constants(pop, n)
    return VarianceTermReport(
        exact=True,
        cond_variance=max(second_moment - mean_diff ** 2, 0.0),
        cond_second_moment=second_moment,
        sq_diff=math.fsum(sq_terms),
        mean_diff=mean_diff,
        abs_diff=math.fsum(abs_terms),
        c1_sq=constants.c1 ** 2,
        c2=constants.c2,
    )


def _variance_terms_monte_carlo(
    pop: Population, n: int, rng: np.random.Generator, reps: int, batches: int = 10
) -> VarianceTermReport:
    w = np.empty(reps)
    diff = np.empty(reps)
    for r in range(reps):
        s = couple_srs(pop, n, rng)
        w[r] = s.w
        diff[r] = s.w_star - s.w

    def cond_stats(ws: np.ndarray, ds: np.ndarray) -> Tuple[float, float]:
        keys, inverse = np.unique(ws, return_inverse=True)
        sums = np.bincount(inverse, weights=ds)
        counts = np.bincount(inverse)
        means = sums / counts
        second = float(np.sum(counts * means ** 2) / len(ds))
        return second - float(np.mean(ds)) ** 2, second

    cond_variance, second_moment = cond_stats(w, diff)
    batch_cond = [cond_stats(wb, db)[0] for wb, db in zip(np.array_split(w, batches), np.array_split(diff, batches))]
    batch_sq = [float(np.mean(db ** 2)) for db in np.array_split(diff, batches)]
    constants = srs_constants(pop, n)
    return VarianceTermReport(
        exact=False,
        cond_variance=max(cond_variance, 0.0),
        cond_variance_stderr=float(np.std(batch_cond, ddof=1)) / math.sqrt(batches),
        cond_second_moment=second_moment,
        sq_diff=float(np.mean(diff ** 2)),
        sq_diff_stderr=float(np.std(batch_sq, ddof=1)) / math.sqrt(batches),
        mean_diff=float(np.mean(diff)),
        abs_diff=float(np.mean(np.abs(diff))),
        c1_sq=constants.c1 ** 2,
        c2=constants.c2,
    )


def verify_variance_terms(
    pop: Population,
    n: int,
    rng: Optional[np.random.Generator] = None,
    reps: int = 20_000,
) -> VarianceTermReport:
    """Var(E{W* - W | W}) and E(W* - W)^2 against C1^2 and C2, exact when enumerable."""
    try:
        return _variance_terms_exact(pop, n)
    except EnumerationCapExceeded as exc:
        if rng is None:
            raise
        logger.warning(f"{exc}; estimating variance terms from {reps} coupled draws")
        return _variance_terms_monte_carlo(pop, n, rng, reps)


def exact_coupling_bound(pop: Population, n: int, h: TestFunction) -> BoundReport:
    """Coupling bound assembled from exactly enumerated variance terms."""
    terms = _variance_terms_exact(pop, n)
    sigma = math.sqrt(srs_variance(pop, n))
    return zero_bias_bound(sigma, h, terms.cond_second_moment, terms.sq_diff)
