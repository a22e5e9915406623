import math
from enum import Enum
from typing import Any, Callable, ClassVar, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, model_validator

from zbstein.core.config import settings

CANONICAL_MASS_TOLERANCE = 1e-12


class BaseModelConfig(BaseModel):
    """Base model with common configuration."""
    model_config = ConfigDict(frozen=True, extra="forbid")


def _check_probabilities(probs: Tuple[float, ...], what: str) -> None:
    if not probs:
        raise ValueError(f"{what} must be non-empty")
    if any(not math.isfinite(p) or p < 0 for p in probs):
        raise ValueError(f"{what} probabilities must be finite and nonnegative")
    total = math.fsum(probs)
    if abs(total - 1.0) > CANONICAL_MASS_TOLERANCE:
        raise ValueError(f"{what} probabilities sum to {total!r}, not 1")


# Distributions
class DiscreteDistribution(BaseModelConfig):
    """Finite law with strictly increasing atoms and positive probabilities."""
    atoms: Tuple[float, ...]
    probs: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_canonical(self) -> "DiscreteDistribution":
        if len(self.atoms) != len(self.probs):
            raise ValueError("atoms and probs must have equal length")
        if any(not math.isfinite(a) for a in self.atoms):
            raise ValueError("atoms must be finite")
        if any(b <= a for a, b in zip(self.atoms, self.atoms[1:])):
            raise ValueError("atoms must be strictly increasing")
        if any(p <= 0 for p in self.probs):
            raise ValueError("probabilities must be positive")
        _check_probabilities(self.probs, "distribution")
        return self

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def atoms_array(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float)

    @property
    def probs_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


class MomentSummary(BaseModelConfig):
    """Moments of a discrete law."""
    mean: float
    variance: float = Field(..., ge=0.0)
    third: float
    fourth: float
    abs_third: float = Field(..., ge=0.0)


class PiecewiseUniformDensity(BaseModelConfig):
    """Constant density on each right-open interval [b_i, b_{i+1})."""
    breakpoints: Tuple[float, ...]
    densities: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_shape(self) -> "PiecewiseUniformDensity":
        if len(self.breakpoints) < 2:
            raise ValueError("at least two breakpoints are required")
        if len(self.densities) != len(self.breakpoints) - 1:
            raise ValueError("need exactly one density per interval")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(not math.isfinite(v) or v < 0 for v in self.densities):
            raise ValueError("densities must be finite and nonnegative")
        return self

    @property
    def breakpoints_array(self) -> np.ndarray:
        return np.asarray(self.breakpoints, dtype=float)

    @property
    def densities_array(self) -> np.ndarray:
        return np.asarray(self.densities, dtype=float)

    @property
    def support(self) -> Tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]


class PairDistribution(BaseModelConfig):
    """Finite joint law of a pair (x', x'')."""
    pairs: Tuple[Tuple[float, float], ...]
    probs: Tuple[float, ...]
    exchangeable: bool = False

    @model_validator(mode="after")
    def _check_pairs(self) -> "PairDistribution":
        if len(self.pairs) != len(self.probs):
            raise ValueError("pairs and probs must have equal length")
        _check_probabilities(self.probs, "pair law")
        if self.exchangeable:
            mass: Dict[Tuple[float, float], float] = {}
            for pair, p in zip(self.pairs, self.probs):
                mass[pair] = mass.get(pair, 0.0) + p
            for (u, v), p in mass.items():
                if abs(p - mass.get((v, u), 0.0)) > CANONICAL_MASS_TOLERANCE:
                    raise ValueError(f"pair law flagged exchangeable but mass({u}, {v}) != mass({v}, {u})")
        return self

    @property
    def first_array(self) -> np.ndarray:
        return np.asarray([pair[0] for pair in self.pairs], dtype=float)

    @property
    def second_array(self) -> np.ndarray:
        return np.asarray([pair[1] for pair in self.pairs], dtype=float)

    @property
    def probs_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


# Sums and couplings
class JointLaw(BaseModelConfig):
    """Finite joint law of a vector (X_1, ..., X_n)."""
    outcomes: Tuple[Tuple[float, ...], ...]
    probs: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_outcomes(self) -> "JointLaw":
        if len(self.outcomes) != len(self.probs):
            raise ValueError("outcomes and probs must have equal length")
        _check_probabilities(self.probs, "joint law")
        lengths = {len(outcome) for outcome in self.outcomes}
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError("all outcome vectors must share one positive length")
        return self

    @property
    def dimension(self) -> int:
        return len(self.outcomes[0])

    def sums(self) -> np.ndarray:
        """W = X_1 + ... + X_n for every outcome."""
        return np.asarray([math.fsum(outcome) for outcome in self.outcomes], dtype=float)


class SumModel(BaseModelConfig):
    """W = X_1 + ... + X_n given by independent summands or by an explicit joint law."""
    summands: Optional[Tuple[DiscreteDistribution, ...]] = None
    joint: Optional[JointLaw] = None

    @model_validator(mode="after")
    def _check_model(self) -> "SumModel":
        if (self.summands is None) == (self.joint is None):
            raise ValueError("give exactly one of summands or joint")
        if self.summands is not None and not self.summands:
            raise ValueError("at least one summand is required")
        return self

    @property
    def independent(self) -> bool:
        return self.summands is not None

    @property
    def n(self) -> int:
        if self.summands is not None:
            return len(self.summands)
        return self.joint.dimension

    @property
    def variances(self) -> Tuple[float, ...]:
        """Per-index variances sigma_i^2 (summands are mean zero)."""
        if self.summands is not None:
            return tuple(
                math.fsum(p * a * a for a, p in zip(d.atoms, d.probs)) for d in self.summands
            )
        return tuple(
            math.fsum(p * outcome[i] ** 2 for outcome, p in zip(self.joint.outcomes, self.joint.probs))
            for i in range(self.joint.dimension)
        )

    @property
    def total_variance(self) -> float:
        if self.summands is not None:
            return math.fsum(self.variances)
        sums = self.joint.sums()
        return math.fsum(p * w * w for w, p in zip(sums, self.joint.probs))


class FamilyOutcome(BaseModelConfig):
    """One outcome of F_{n,i}: values[i] holds X_i', alt holds X_i''."""
    values: Tuple[float, ...]
    alt: float
    prob: float = Field(..., ge=0.0)


class DependentFamily(BaseModelConfig):
    """Base law of (X_1..X_n) plus, per index i, a joint law adding X_i''."""
    base: JointLaw
    laws: Tuple[Tuple[FamilyOutcome, ...], ...]

    @model_validator(mode="after")
    def _check_family(self) -> "DependentFamily":
        n = self.base.dimension
        if len(self.laws) != n:
            raise ValueError(f"expected {n} per-index laws, got {len(self.laws)}")
        for i, law in enumerate(self.laws):
            if any(len(outcome.values) != n for outcome in law):
                raise ValueError(f"law {i} has outcome vectors of the wrong length")
            _check_probabilities(tuple(outcome.prob for outcome in law), f"law {i}")
        return self

    @property
    def n(self) -> int:
        return self.base.dimension

    @property
    def sigma2(self) -> float:
        sums = self.base.sums()
        return math.fsum(p * w * w for w, p in zip(sums, self.base.probs))

    @property
    def v_squared(self) -> Tuple[float, ...]:
        """v_i^2 = E(X_i' - X_i'')^2 for every index."""
        return tuple(
            math.fsum(o.prob * (o.values[i] - o.alt) ** 2 for o in law)
            for i, law in enumerate(self.laws)
        )


class CouplingSample(BaseModelConfig):
    """One realization of (W, W*) with construction metadata."""
    w: float
    w_star: float
    index: int = Field(..., ge=0)
    u: float = Field(..., ge=0.0, le=1.0)
    summands: Tuple[float, ...]
    replaced: Optional[Tuple[float, float]] = None
    hat_values: Optional[Tuple[float, ...]] = None
    case: Optional[int] = None

    @model_validator(mode="after")
    def _check_sum(self) -> "CouplingSample":
        total = math.fsum(self.summands)
        if abs(self.w - total) > 1e-12 * max(1.0, abs(total)):
            raise ValueError("recorded w does not equal the sum of recorded summands")
        return self


# Simple random sampling
class Population(BaseModelConfig):
    """Finite population normalized to <2> = 1 with <1> = <3> = 0."""
    values: Tuple[float, ...]
    distinct: bool
    power_sums: Dict[int, float]

    @model_validator(mode="after")
    def _check_moments(self, info: ValidationInfo) -> "Population":
        if len(self.values) < 2:
            raise ValueError("population needs at least two values")
        tolerance = (info.context or {}).get("tolerance", settings.identity_tolerance)
        for k in (1, 3):
            if abs(self.power_sums[k]) > tolerance:
                raise ValueError(f"power sum <{k}> = {self.power_sums[k]!r} is not zero")
        if abs(self.power_sums[2] - 1.0) > tolerance:
            raise ValueError(f"power sum <2> = {self.power_sums[2]!r} is not one")
        return self

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def values_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class SrsCouplingSample(BaseModelConfig):
    """Simple random sample X plus the zero-bias vector built from it."""
    sample: Tuple[float, ...]
    first: float
    second: float
    filled: Tuple[float, ...]
    r: int = Field(..., ge=0, le=2)
    u: float = Field(..., ge=0.0, le=1.0)
    w: float
    w_star: float

    @model_validator(mode="after")
    def _check_construction(self) -> "SrsCouplingSample":
        hat = (self.first, self.second, *self.filled)
        if len(set(hat)) != len(hat):
            raise ValueError("hat vector must consist of distinct population elements")
        overlap = len(set(self.sample[1:]) & {self.first, self.second})
        if overlap != self.r:
            raise ValueError(f"recorded R={self.r} but overlap is {overlap}")
        return self


class SrsConstants(BaseModelConfig):
    """Bound constants for a population of size N sampled n at a time."""
    N: int
    n: int
    sigma2: float
    v1_sq: float
    rho: float
    alpha: float
    beta: float
    gamma: float
    eta: float
    c1: float
    c2: float
    f: Optional[float] = None
    b1: Optional[float] = None
    b2: Optional[float] = None

    @model_validator(mode="after")
    def _check_rho(self) -> "SrsConstants":
        expected = -self.n / (self.N - self.n)
        scale = max(1.0, abs(expected))
        if abs(self.rho - expected) > 1e-12 * scale:
            raise ValueError("rho differs from -n/(N-n)")
        from_variance = 1.0 - self.n * self.v1_sq / (2.0 * self.sigma2)
        if abs(self.rho - from_variance) > 1e-12 * scale:
            raise ValueError("rho differs from 1 - n v1^2 / (2 sigma^2)")
        return self


# Stein machinery
class FunctionFamily(str, Enum):
    """Families of test functions with known derivative sup norms."""
    POLYNOMIAL = "polynomial-on-compact"
    SIN = "sin"
    COS = "cos"
    LOGISTIC = "logistic"
    USER = "user"


class TestFunction(BaseModel):
    """Test function h with derivatives h', ..., h'''' and declared sup norms."""
    __test__: ClassVar[bool] = False
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    family: FunctionFamily
    derivatives: Tuple[Callable[..., Any], ...]
    norms: Tuple[float, float, float, float]
    domain: Tuple[float, float] = (-20.0, 20.0)

    @model_validator(mode="after")
    def _check_derivatives(self) -> "TestFunction":
        if len(self.derivatives) != 5:
            raise ValueError("need h and its first four derivatives")
        if any(math.isnan(v) or v < 0 for v in self.norms):
            raise ValueError("norms must be nonnegative; inf marks an undeclared norm")
        return self

    def __call__(self, x: Any) -> Any:
        return self.derivatives[0](x)

    def derivative(self, j: int) -> Callable[..., Any]:
        return self.derivatives[j]

    def norm(self, j: int) -> float:
        """Declared sup norm of the j-th derivative, j = 1..4."""
        if not 1 <= j <= 4:
            raise ValueError("norms are declared for j = 1..4")
        return self.norms[j - 1]


class BoundMethod(str, Enum):
    """Which error bound a report assembles."""
    COUPLING = "coupling"
    FIRST_ORDER = "first-order"
    IID_FOURTH_MOMENT = "iid-fourth-moment"
    CLT_THIRD_MOMENT = "clt-third-moment"
    SRS = "srs"


class BoundReport(BaseModelConfig):
    """Error bound together with every term it is assembled from."""
    method: BoundMethod
    sigma: float = Field(..., gt=0.0)
    norm3: float = Field(..., ge=0.0)
    norm4: float = Field(..., ge=0.0)
    cond_var_term: Optional[float] = None
    sq_diff_term: Optional[float] = None
    abs_diff_term: Optional[float] = None
    abs3: Optional[float] = None
    fourth_moment: Optional[float] = None
    n: Optional[int] = None
    N: Optional[int] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    first_term: float = Field(..., ge=0.0)
    second_term: float = Field(..., ge=0.0)
    bound: float = Field(..., ge=0.0)

    @model_validator(mode="after")
    def _check_assembly(self) -> "BoundReport":
        if self.bound != self.first_term + self.second_term:
            raise ValueError("bound must equal first_term + second_term")
        return self


class GapEstimate(BaseModelConfig):
    """Eh(W/sigma) - Phi h, exact or Monte Carlo."""
    value: float
    stderr: float = Field(..., ge=0.0)
    exact: bool
    count: Optional[int] = None


class FamilyConditionReport(BaseModelConfig):
    """Exact-enumeration residuals of the dependent-family conditions."""
    rho: float
    swap_residual: float
    marginal_residual: float
    linearity_residual: float
    conditional_residual: Optional[float] = None

    @property
    def max_residual(self) -> float:
        residuals = [self.swap_residual, self.marginal_residual, self.linearity_residual]
        if self.conditional_residual is not None:
            residuals.append(self.conditional_residual)
        return max(residuals)


class VarianceTermReport(BaseModelConfig):
    """Var(E{W*-W|W}) and E(W*-W)^2 against C1^2 and C2."""
    exact: bool
    cond_variance: float
    cond_variance_stderr: float = 0.0
    cond_second_moment: float
    sq_diff: float
    sq_diff_stderr: float = 0.0
    mean_diff: float
    abs_diff: float
    c1_sq: float
    c2: float

    @property
    def cond_variance_ok(self) -> bool:
        return self.cond_variance <= self.c1_sq

    @property
    def sq_diff_ok(self) -> bool:
        return self.sq_diff <= self.c2


__all__ = [
    "BaseModelConfig",
    "DiscreteDistribution", "MomentSummary", "PiecewiseUniformDensity", "PairDistribution",
    "JointLaw", "SumModel", "FamilyOutcome", "DependentFamily", "CouplingSample",
    "Population", "SrsCouplingSample", "SrsConstants",
    "FunctionFamily", "TestFunction", "BoundMethod", "BoundReport", "GapEstimate",
    "FamilyConditionReport", "VarianceTermReport",
]
