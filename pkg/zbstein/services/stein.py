"""Stein equation solutions, test-function registry and error bounds."""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, special

from zbstein.core.config import settings
from zbstein.core.errors import InvariantViolation, QuadratureError
from zbstein.models import (
    BoundMethod,
    BoundReport,
    DiscreteDistribution,
    FunctionFamily,
    GapEstimate,
    SumModel,
    TestFunction,
)
from zbstein.services.dist import abs_moment

logger = logging.getLogger(__name__)

Sampler = Callable[[np.random.Generator, int], np.ndarray]

# Registration checks declared norms on this grid
VALIDATION_RANGE = (-20.0, 20.0)
VALIDATION_STEP = 1e-3


def _logistic_fourth_norm() -> float:
    # Extremum of u (1 - u^2) (3u^2 - 2) / 4 with u = 2s - 1
    u = math.sqrt((15.0 - math.sqrt(105.0)) / 30.0)
    return abs(u * (1.0 - u * u) * (3.0 * u * u - 2.0)) / 4.0


LOGISTIC_NORMS = (0.25, math.sqrt(3.0) / 18.0, 0.125, _logistic_fourth_norm())


# Test-function factories
def cos_function(omega: float = 1.0) -> TestFunction:
    """h(x) = cos(omega x); ||h^(j)|| = omega^j."""
    w = float(omega)
    return TestFunction(
        name="cos" if w == 1.0 else f"cos:{w:g}",
        family=FunctionFamily.COS,
        derivatives=(
            lambda x: np.cos(w * x),
            lambda x: -w * np.sin(w * x),
            lambda x: -w ** 2 * np.cos(w * x),
            lambda x: w ** 3 * np.sin(w * x),
            lambda x: w ** 4 * np.cos(w * x),
        ),
        norms=(abs(w), w ** 2, abs(w) ** 3, w ** 4),
    )


def sin_function(omega: float = 1.0) -> TestFunction:
    """h(x) = sin(omega x); ||h^(j)|| = omega^j."""
    w = float(omega)
    return TestFunction(
        name="sin" if w == 1.0 else f"sin:{w:g}",
        family=FunctionFamily.SIN,
        derivatives=(
            lambda x: np.sin(w * x),
            lambda x: w * np.cos(w * x),
            lambda x: -w ** 2 * np.sin(w * x),
            lambda x: -w ** 3 * np.cos(w * x),
            lambda x: w ** 4 * np.sin(w * x),
        ),
        norms=(abs(w), w ** 2, abs(w) ** 3, w ** 4),
    )


def logistic_function() -> TestFunction:
    """h = expit, derivatives written in s = expit(x)."""

    def d1(x):
        s = special.expit(x)
        return s * (1 - s)

    def d2(x):
        s = special.expit(x)
        return s * (1 - s) * (1 - 2 * s)

    def d3(x):
        s = special.expit(x)
        return s * (1 - s) * (1 - 6 * s + 6 * s * s)

    def d4(x):
        s = special.expit(x)
        return s * (1 - s) * (1 - 2 * s) * (1 - 12 * s + 12 * s * s)

    return TestFunction(
        name="logistic",
        family=FunctionFamily.LOGISTIC,
        derivatives=(special.expit, d1, d2, d3, d4),
        norms=LOGISTIC_NORMS,
    )


def _poly_sup(p: Polynomial, lo: float, hi: float) -> float:
    candidates = [lo, hi]
    for root in p.deriv().roots() if p.degree() > 1 else []:
        if abs(root.imag) < 1e-12 and lo <= root.real <= hi:
            candidates.append(root.real)
    return float(np.max(np.abs(p(np.asarray(candidates)))))


def polynomial_function(coefficients: Sequence[float], lo: float, hi: float, name: Optional[str] = None) -> TestFunction:
    """Polynomial restricted to [lo, hi]; norms are exact maxima over the compact."""
    if not lo < hi:
        raise InvariantViolation("compact-domain", "need lo < hi")
    p = Polynomial(np.asarray(coefficients, dtype=float))
    chain = [p]
    for _ in range(4):
        chain.append(chain[-1].deriv())
    norms = tuple(_poly_sup(q, lo, hi) for q in chain[1:])
    return TestFunction(
        name=name or f"poly[{lo:g},{hi:g}]",
        family=FunctionFamily.POLYNOMIAL,
        derivatives=tuple(chain),
        norms=norms,
        domain=(float(lo), float(hi)),
    )


def user_function(
    name: str,
    derivatives: Sequence[Callable],
    norms: Sequence[float],
    domain: Tuple[float, float] = VALIDATION_RANGE,
) -> TestFunction:
    return TestFunction(
        name=name,
        family=FunctionFamily.USER,
        derivatives=tuple(derivatives),
        norms=tuple(float(v) for v in norms),
        domain=domain,
    )


def validate_norms(h: TestFunction, step: float = VALIDATION_STEP) -> None:
    """Check declared norms bound |h^(j)| on a dense grid over the validation range."""
    lo = max(VALIDATION_RANGE[0], h.domain[0])
    hi = min(VALIDATION_RANGE[1], h.domain[1])
    grid = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    for j in range(1, 5):
        observed = float(np.max(np.abs(np.broadcast_to(h.derivative(j)(grid), grid.shape))))
        declared = h.norm(j)
        if observed > declared * (1.0 + 1e-12) + 1e-15:
            raise InvariantViolation(
                "declared-norm",
                f"{h.name}: sup |h^({j})| on the grid is {observed!r}, declared {declared!r}",
            )


_REGISTRY: Dict[str, TestFunction] = {}


def register_test_function(h: TestFunction, validate: bool = True) -> TestFunction:
    if validate:
        validate_norms(h)
    _REGISTRY[h.name] = h
    logger.debug(f"Registered test function {h.name} with norms {h.norms}")
    return h


def _ensure_builtins() -> None:
    if not _REGISTRY:
        for factory in (cos_function, sin_function, logistic_function):
            register_test_function(factory())


def registered_test_functions() -> List[str]:
    _ensure_builtins()
    return sorted(_REGISTRY)


def get_test_function(name: str) -> TestFunction:
    """Look up a registered function; ``cos:<omega>`` and ``sin:<omega>`` build scaled variants."""
    _ensure_builtins()
    if name in _REGISTRY:
        return _REGISTRY[name]
    family, _, parameter = name.partition(":")
    if family in ("cos", "sin") and parameter:
        try:
            omega = float(parameter)
        except ValueError:
            raise InvariantViolation("unknown-test-function", f"bad frequency in {name!r}")
        factory = cos_function if family == "cos" else sin_function
        return register_test_function(factory(omega))
    raise InvariantViolation("unknown-test-function", f"no test function named {name!r}")


# Normal expectations and the Stein solution
def normal_expectation(h: Union[TestFunction, Callable], nodes: Optional[int] = None) -> float:
    """Phi h = E h(Z) by Gauss-Hermite quadrature in the probabilists' scaling."""
    nodes = settings.gauss_hermite_nodes if nodes is None else nodes
    knots, weights = np.polynomial.hermite.hermgauss(nodes)
    knots = knots * np.sqrt(2.0)
    weights = weights / np.sqrt(np.pi)
    return math.fsum(weights * np.asarray(h(knots), dtype=float))


def _require_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise InvariantViolation("positive-sigma", f"sigma must be positive, got {sigma!r}")


def _quad(integrand: Callable[[float], float], upper: float, x: float) -> float:
    tolerance = settings.quadrature_tolerance
    result = integrate.quad(
        integrand, 0.0, upper, epsabs=tolerance * 1e-2, epsrel=tolerance, limit=200, full_output=1
    )
    if len(result) > 3:
        raise QuadratureError(f"no convergence at x={x!r}: {result[3]}", x=x)
    return result[0]


def _kernel(h: TestFunction, sigma: float, x: float, phi: float):
    """Integrands for f' and f'' on [0, upper] with the Gaussian tail made explicit."""
    s2 = sigma * sigma
    upper = -abs(x) + math.sqrt(x * x + 80.0 * s2)
    sign = 1.0 if x >= 0 else -1.0
    h0 = h.derivative(0)
    h1 = h.derivative(1)

    def centered(t: float) -> float:
        return float(h0(t / sigma)) - phi

    def weight(s: float) -> float:
        return math.exp(-(2.0 * abs(x) * s + s * s) / (2.0 * s2))

    def first(s: float) -> float:
        return centered(x + sign * s) * weight(s)

    def second(s: float) -> float:
        t = x + sign * s
        return (float(h1(t / sigma)) / sigma - sign * (s / s2) * centered(t)) * weight(s)

    return upper, sign, first, second


def stein_solution(h: TestFunction, sigma: float, x: float, phi: Optional[float] = None) -> float:
    """f'(x) for x f'(x) - sigma^2 f''(x) = h(x/sigma) - Phi h."""
    _require_sigma(sigma)
    phi = normal_expectation(h) if phi is None else phi
    upper, sign, first, _ = _kernel(h, sigma, float(x), phi)
    return sign * _quad(first, upper, x) / (sigma * sigma)


def stein_solution_derivative(h: TestFunction, sigma: float, x: float, phi: Optional[float] = None) -> float:
    """f''(x) from its own integral representation."""
    _require_sigma(sigma)
    phi = normal_expectation(h) if phi is None else phi
    upper, sign, _, second = _kernel(h, sigma, float(x), phi)
    return sign * _quad(second, upper, x) / (sigma * sigma)


def stein_residual(h: TestFunction, sigma: float, x: float, phi: Optional[float] = None) -> float:
    phi = normal_expectation(h) if phi is None else phi
    g = stein_solution(h, sigma, x, phi)
    dg = stein_solution_derivative(h, sigma, x, phi)
    return x * g - sigma * sigma * dg - (float(h(x / sigma)) - phi)


def solution_norm_bound(sigma: float, j: int, h_norm: float) -> float:
    """||f^(j)|| <= ||h^(j)|| / (j sigma^j)."""
    _require_sigma(sigma)
    if not 1 <= j <= 4:
        raise InvariantViolation("derivative-order", "j must lie in 1..4")
    return h_norm / (j * sigma ** j)


# Error bounds
def _nonnegative(name: str, value: float) -> None:
    if not value >= 0:
        raise InvariantViolation("nonnegative-input", f"{name} must be nonnegative, got {value!r}")


def zero_bias_bound(sigma: float, h: TestFunction, cond_var: float, sq_diff: float) -> BoundReport:
    """||h'''|| sqrt(cond_var) / (3 sigma) + ||h''''|| sq_diff / (8 sigma^2)."""
    _require_sigma(sigma)
    _nonnegative("cond_var", cond_var)
    _nonnegative("sq_diff", sq_diff)
    cond_term = math.sqrt(cond_var)
    first = h.norm(3) * cond_term / (3.0 * sigma)
    second = h.norm(4) * sq_diff / (8.0 * sigma * sigma)
    return BoundReport(
        method=BoundMethod.COUPLING,
        sigma=sigma,
        norm3=h.norm(3),
        norm4=h.norm(4),
        cond_var_term=cond_term,
        sq_diff_term=sq_diff,
        first_term=first,
        second_term=second,
        bound=first + second,
    )


def first_order_bound(sigma: float, h: TestFunction, abs_diff: float) -> BoundReport:
    """||h'''|| E|W* - W| / (3 sigma)."""
    _require_sigma(sigma)
    _nonnegative("abs_diff", abs_diff)
    first = h.norm(3) * abs_diff / (3.0 * sigma)
    return BoundReport(
        method=BoundMethod.FIRST_ORDER,
        sigma=sigma,
        norm3=h.norm(3),
        norm4=h.norm(4),
        abs_diff_term=abs_diff,
        first_term=first,
        second_term=0.0,
        bound=first,
    )


def iid_fourth_moment_bound(n: int, fourth_moment: float, h: TestFunction, third_moment: float = 0.0) -> BoundReport:
    """(1/n)(||h'''|| / 3 + ||h''''|| EX^4 / 6) for standardized i.i.d. summands with EX^3 = 0."""
    if n < 1:
        raise InvariantViolation("sample-size", "n must be at least 1")
    _nonnegative("EX^4", fourth_moment)
    if abs(third_moment) > settings.mean_tolerance:
        raise InvariantViolation("vanishing-third-moment", f"EX^3 = {third_moment!r}; the bound needs EX^3 = 0")
    first = h.norm(3) / (3.0 * n)
    second = h.norm(4) * fourth_moment / (6.0 * n)
    return BoundReport(
        method=BoundMethod.IID_FOURTH_MOMENT,
        sigma=math.sqrt(n),
        norm3=h.norm(3),
        norm4=h.norm(4),
        cond_var_term=1.0 / math.sqrt(n),
        sq_diff_term=4.0 * fourth_moment / 3.0,
        fourth_moment=fourth_moment,
        n=n,
        first_term=first,
        second_term=second,
        bound=first + second,
    )


def clt_iid_bound(n: int, abs3: float, h: TestFunction) -> BoundReport:
    """||h'''|| E|X|^3 / (2 sqrt(n)) for standardized i.i.d. summands."""
    if n < 1:
        raise InvariantViolation("sample-size", "n must be at least 1")
    _nonnegative("E|X|^3", abs3)
    first = h.norm(3) * abs3 / (2.0 * math.sqrt(n))
    return BoundReport(
        method=BoundMethod.CLT_THIRD_MOMENT,
        sigma=math.sqrt(n),
        norm3=h.norm(3),
        norm4=h.norm(4),
        abs3=abs3,
        n=n,
        first_term=first,
        second_term=0.0,
        bound=first,
    )


def clt_independent_bound(model: SumModel, h: TestFunction) -> BoundReport:
    """First-order bound for independent summands with E|W* - W| bounded by
    sum_i E|X_i|^3 / (2 sigma^2) + sum_i (sigma_i^2 / sigma^2) E|X_i|."""
    if not model.independent:
        raise InvariantViolation("independent-model", "operation needs independent summand laws")
    sigma2 = model.total_variance
    if sigma2 <= 0:
        raise InvariantViolation("zero-variance", "total variance is zero")
    abs_diff = math.fsum(
        abs_moment(d, 3) / (2.0 * sigma2) + v / sigma2 * abs_moment(d, 1)
        for d, v in zip(model.summands, model.variances)
    )
    return first_order_bound(math.sqrt(sigma2), h, abs_diff)


# Expectation gaps
def expectation_gap(
    law: Union[DiscreteDistribution, Sampler],
    sigma: float,
    h: TestFunction,
    rng: Optional[np.random.Generator] = None,
    count: Optional[int] = None,
) -> GapEstimate:
    """E h(W / sigma) - Phi h: exact for a finite law, Monte Carlo for a sampler."""
    _require_sigma(sigma)
    phi = normal_expectation(h)
    if isinstance(law, DiscreteDistribution):
        values = np.asarray(h(law.atoms_array / sigma), dtype=float)
        value = math.fsum(law.probs_array * values) - phi
        return GapEstimate(value=value, stderr=0.0, exact=True)

    if rng is None or not count or count < 2:
        raise InvariantViolation("monte-carlo", "a sampler needs an rng and count >= 2")
    values = np.asarray(h(np.asarray(law(rng, count), dtype=float) / sigma), dtype=float)
    mean = math.fsum(values) / count
    stderr = float(np.std(values, ddof=1)) / math.sqrt(count)
    return GapEstimate(value=mean - phi, stderr=stderr, exact=False, count=count)


def stein_identity_gap(d: DiscreteDistribution, sigma: float, h: TestFunction) -> float:
    """E[W f'(W) - sigma^2 f''(W)] with f the Stein solution for h."""
    _require_sigma(sigma)
    phi = normal_expectation(h)
    terms = []
    for a, p in zip(d.atoms, d.probs):
        g = stein_solution(h, sigma, a, phi)
        dg = stein_solution_derivative(h, sigma, a, phi)
        terms.append(p * (a * g - sigma * sigma * dg))
    return math.fsum(terms)
