"""
Distribution dependent coefficient pairs (b, σ) and their
declared assumption constants.

Coefficients are vectorized over particles: ``drift(points,
summary)`` maps an ``(N, d)`` array to an ``(N, d)`` array and
``diffusion(points, summary)`` returns an ``(N, d, d)`` array.
The measure argument is passed as a :class:`MeasureSummary`
that holds only the features the model declares it needs, so
mean-field models cost O(N) per step.
"""
import dataclasses
import logging
import math
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    Mapping,
    Optional,
    Tuple,
)

import numpy as np
from typing_extensions import Literal, Protocol

from ._errors import ModelError
from ._measures import EmpiricalMeasure, wasserstein_lp

logger = logging.getLogger(__name__)

MeasureFeature = Literal["mean", "cloud"]
ALL_FEATURES: FrozenSet[str] = frozenset({"mean", "cloud"})


@dataclasses.dataclass(frozen=True, eq=False)
class MeasureSummary:
    """
    The parts of a measure that coefficient functions consume.

    Attributes:
      mean
        Mean vector of the measure, shape ``(d,)``

      cloud
        The full measure when the model declared the
        ``"cloud"`` feature, otherwise :data:`None`.
    """

    mean: np.ndarray
    cloud: Optional[EmpiricalMeasure] = None


def summarize(measure: EmpiricalMeasure, features: Iterable[str]) -> MeasureSummary:
    """
    Build the :class:`MeasureSummary` of *measure* for *features*.
    """
    return MeasureSummary(
        mean=measure.mean(), cloud=measure if "cloud" in features else None
    )


class DriftFunction(Protocol):
    def __call__(self, points: np.ndarray, summary: MeasureSummary) -> np.ndarray:
        ...


class DiffusionFunction(Protocol):
    def __call__(self, points: np.ndarray, summary: MeasureSummary) -> np.ndarray:
        ...


@dataclasses.dataclass(frozen=True)
class AssumptionConstants:
    """
    Declared constants of the dissipativity conditions.

    Attributes:
      p
        Wasserstein order (>= 1)

      K0
        One-sided dissipativity constant

      delta
        Interaction strength, coefficient of ``W_p(mu, nu)^2``

      sigma0
        Uniform ellipticity constant (``σσ* >= sigma0^2 I``)

      sigma_sup
        Supremum of the Hilbert–Schmidt norm of σ, may be ``inf``

      K1
        Dissipativity constant outside the ball of radius *r0*,
        :data:`None` when the model only declares the global form

      r0
        Radius of the ball where dissipativity may fail
    """

    p: float = 1.0
    K0: float = 0.0
    delta: float = 0.0
    sigma0: float = 0.0
    sigma_sup: float = math.inf
    K1: Optional[float] = None
    r0: Optional[float] = None

    def __post_init__(self):
        if not self.p >= 1:
            raise ModelError(f"p must be >= 1, got {self.p}")
        if not self.delta >= 0:
            raise ModelError(f"delta must be >= 0, got {self.delta}")
        if not self.sigma0 >= 0:
            raise ModelError(f"sigma0 must be >= 0, got {self.sigma0}")
        if not self.sigma_sup > 0:
            raise ModelError(f"sigma_sup must be > 0, got {self.sigma_sup}")
        if self.sigma0 > self.sigma_sup:
            raise ModelError(
                f"sigma0 ({self.sigma0}) exceeds sigma_sup ({self.sigma_sup})"
            )
        if (self.K1 is None) != (self.r0 is None):
            raise ModelError("K1 and r0 must be given together")
        if self.K1 is not None and not (self.K1 > 0 and self.r0 > 0):
            raise ModelError("K1 and r0 must be positive")

    @property
    def has_local_dissipativity(self) -> bool:
        return self.K1 is not None


def a2_sigma_factor(constants: AssumptionConstants, dim: int) -> float:
    """
    Hilbert–Schmidt coefficient ``2 sigma_sup^2 / sigma0^2 - [d == 1]``
    of the local dissipativity condition.

    The factor is derived from the stored constants, it is
    not a separate model field.
    """
    if constants.sigma0 <= 0 or math.isinf(constants.sigma_sup):
        return math.inf
    return 2 * constants.sigma_sup ** 2 / constants.sigma0 ** 2 - (1 if dim == 1 else 0)


@dataclasses.dataclass(frozen=True)
class ModelSpec:
    """
    A distribution dependent SDE ``dX = b(X, L(X))dt + σ(X, L(X))dB``.

    Attributes:
      name
        Model identifier

      dim
        State dimension

      drift
        Vectorized drift ``b``

      diffusion
        Vectorized diffusion ``σ``

      measure_features
        Summaries of the measure the coefficients consume

      constants
        Declared assumption constants

      additive_noise
        True when σ depends on neither the state nor the
        measure; simulations then evaluate it once

      params
        The parameters the model was built from
    """

    name: str
    dim: int
    drift: DriftFunction
    diffusion: DiffusionFunction
    measure_features: FrozenSet[str]
    constants: AssumptionConstants
    additive_noise: bool = False
    params: Mapping[str, Any] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ModelError(f"dimension must be positive, got {self.dim}")
        unknown = set(self.measure_features) - ALL_FEATURES
        if unknown:
            raise ModelError(f"unknown measure features: {sorted(unknown)}")

    def with_constants(self, **changes: Any) -> "ModelSpec":
        """
        Return a copy with some declared constants replaced.
        """
        return dataclasses.replace(
            self, constants=dataclasses.replace(self.constants, **changes)
        )


def _point(model: ModelSpec, x) -> np.ndarray:
    point = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if point.shape[0] != model.dim:
        raise ModelError(
            f"point has dimension {point.shape[0]}, model {model.name!r} "
            f"has dimension {model.dim}"
        )
    return point


def _check_measure(model: ModelSpec, mu: EmpiricalMeasure):
    if mu.dim != model.dim:
        raise ModelError(
            f"measure has dimension {mu.dim}, model {model.name!r} "
            f"has dimension {model.dim}"
        )


def eval_drift(model: ModelSpec, x, mu: EmpiricalMeasure) -> np.ndarray:
    """
    Evaluate ``b(x, mu)`` at a single point.

    Raises:
      ModelError: *x* or *mu* does not match the model dimension.
    """
    point = _point(model, x)
    _check_measure(model, mu)
    summary = summarize(mu, model.measure_features)
    return np.asarray(model.drift(point[None, :], summary), dtype=float)[0]


def eval_diffusion(model: ModelSpec, x, mu: EmpiricalMeasure) -> np.ndarray:
    """
    Evaluate ``σ(x, mu)`` at a single point as a ``d x d`` matrix.

    Raises:
      ModelError: *x* or *mu* does not match the model dimension.
    """
    point = _point(model, x)
    _check_measure(model, mu)
    summary = summarize(mu, model.measure_features)
    return np.asarray(model.diffusion(point[None, :], summary), dtype=float)[0]


#
# Model zoo
#

ModelFactory = Callable[[Mapping[str, Any]], ModelSpec]

_PARAM_ALIASES = {"θ1": "theta1", "θ2": "theta2", "σ": "s", "β": "beta"}
_MISSING = object()


def _normalize_params(params: Mapping[str, Any]) -> Dict[str, Any]:
    return {_PARAM_ALIASES.get(key, key): value for key, value in params.items()}


def _number(
    model: str,
    params: Mapping[str, Any],
    key: str,
    default: Any = _MISSING,
    check: Optional[Callable[[float], bool]] = None,
    requirement: str = "",
) -> float:
    if key not in params:
        if default is _MISSING:
            raise ModelError(f"model {model!r} requires parameter {key!r}", key=key)
        return default
    try:
        value = float(params[key])
    except (TypeError, ValueError):
        raise ModelError(
            f"parameter {key!r} of model {model!r} must be a number, "
            f"got {params[key]!r}",
            key=key,
        ) from None
    if not math.isfinite(value) or (check is not None and not check(value)):
        raise ModelError(
            f"parameter {key!r} of model {model!r} must be {requirement}, "
            f"got {value!r}",
            key=key,
        )
    return value


def _dimension(model: str, params: Mapping[str, Any], default: int = 1) -> int:
    value = _number(model, params, "d", default, lambda v: v >= 1, ">= 1")
    if value != int(value):
        raise ModelError(f"parameter 'd' of model {model!r} must be an integer")
    return int(value)


def _constant_diffusion(matrix: np.ndarray) -> DiffusionFunction:
    matrix = np.array(matrix, dtype=float)
    matrix.setflags(write=False)

    def diffusion(points: np.ndarray, summary: MeasureSummary) -> np.ndarray:
        return np.broadcast_to(matrix, (points.shape[0],) + matrix.shape)

    return diffusion


def mean_field_ou(params: Mapping[str, Any]) -> ModelSpec:
    """
    Linear mean-field model ``b(x, mu) = -a x + c mean(mu)``,
    ``σ = s I``.

    The declared constants come from the Young split
    ``2c<m_mu - m_nu, x - y> <= |x - y|^2 + c^2 W_1^2``, so
    ``K0 = 1 - 2a`` and ``delta = |c|``. Without interaction
    (``c = 0``) no split is needed and ``K0 = -2a``.
    """
    params = _normalize_params(params)
    a = _number("mean_field_ou", params, "a")
    c = _number("mean_field_ou", params, "c")
    s = _number("mean_field_ou", params, "s", check=lambda v: v >= 0, requirement=">= 0")
    dim = _dimension("mean_field_ou", params)

    def drift(points: np.ndarray, summary: MeasureSummary) -> np.ndarray:
        return -a * points + c * summary.mean

    constants = AssumptionConstants(
        p=1.0,
        K0=-2 * a if c == 0 else 1 - 2 * a,
        delta=abs(c),
        sigma0=abs(s),
        sigma_sup=abs(s) * math.sqrt(dim) if s != 0 else math.inf,
    )
    return ModelSpec(
        name="mean_field_ou",
        dim=dim,
        drift=drift,
        diffusion=_constant_diffusion(s * np.eye(dim)),
        measure_features=frozenset({"mean"}),
        constants=constants,
        additive_noise=True,
        params={"a": a, "c": c, "s": s, "d": dim},
    )


def _double_well_constants(
    theta1: float, theta2: float, coupling: float, sigma0: float, sigma_sup: float
) -> AssumptionConstants:
    # 2<b1(x)-b1(y), x-y> <= -theta1|e|^4 + theta2|e|^2 and the quadratic
    # interaction adds (2|c| + 1)|e|^2 + c^2 W_1^2.
    k0 = theta2 + 2 * abs(coupling) + 1
    k1 = 1.0
    return AssumptionConstants(
        p=1.0,
        K0=k0,
        delta=math.sqrt(2) * abs(coupling),
        sigma0=sigma0,
        sigma_sup=sigma_sup if sigma_sup > 0 else math.inf,
        K1=k1,
        r0=math.sqrt((k0 + k1) / theta1),
    )


def granular_media_1d(params: Mapping[str, Any]) -> ModelSpec:
    """
    One dimensional granular media model with double-well
    confinement and quadratic interaction::

        b(x, mu) = -2 theta1 x^3 + (theta2 / 2) x + c (mean(mu) - x)
        σ = s
    """
    params = _normalize_params(params)
    theta1 = _number(
        "granular_media_1d", params, "theta1", check=lambda v: v > 0, requirement="> 0"
    )
    theta2 = _number(
        "granular_media_1d", params, "theta2", check=lambda v: v >= 0, requirement=">= 0"
    )
    c = _number("granular_media_1d", params, "c")
    s = _number("granular_media_1d", params, "s", check=lambda v: v >= 0, requirement=">= 0")

    def drift(points: np.ndarray, summary: MeasureSummary) -> np.ndarray:
        return (
            -2 * theta1 * points ** 3
            + 0.5 * theta2 * points
            + c * (summary.mean - points)
        )

    return ModelSpec(
        name="granular_media_1d",
        dim=1,
        drift=drift,
        diffusion=_constant_diffusion([[s]]),
        measure_features=frozenset({"mean"}),
        constants=_double_well_constants(theta1, theta2, c, abs(s), abs(s)),
        additive_noise=True,
        params={"theta1": theta1, "theta2": theta2, "c": c, "s": s},
    )


def curie_weiss(params: Mapping[str, Any]) -> ModelSpec:
    """
    Curie–Weiss mean-field model in R^d at inverse temperature
    *beta* with coupling *J*::

        b(x, mu) = -|x|^2 x + x + J (mean(mu) - x)
        σ = sqrt(2 / beta) I
    """
    params = _normalize_params(params)
    beta = _number("curie_weiss", params, "beta", check=lambda v: v > 0, requirement="> 0")
    coupling = _number("curie_weiss", params, "J", check=lambda v: v >= 0, requirement=">= 0")
    dim = _dimension("curie_weiss", params)
    s = math.sqrt(2 / beta)

    def drift(points: np.ndarray, summary: MeasureSummary) -> np.ndarray:
        radius2 = np.sum(points ** 2, axis=1, keepdims=True)
        return -radius2 * points + points + coupling * (summary.mean - points)

    return ModelSpec(
        name="curie_weiss",
        dim=dim,
        drift=drift,
        diffusion=_constant_diffusion(s * np.eye(dim)),
        measure_features=frozenset({"mean"}),
        constants=_double_well_constants(0.5, 2.0, coupling, s, s * math.sqrt(dim)),
        additive_noise=True,
        params={"beta": beta, "J": coupling, "d": dim},
    )


def _vectorize(function: Callable, dim: int, matrix: bool) -> Callable:
    def vectorized(points: np.ndarray, summary: MeasureSummary) -> np.ndarray:
        values = []
        for point in points:
            value = np.asarray(function(point, summary), dtype=float)
            if matrix and value.ndim == 0:
                value = value * np.eye(dim)
            values.append(value)
        return np.stack(values)

    return vectorized


def custom_model(params: Mapping[str, Any]) -> ModelSpec:
    """
    Build a model from user supplied callables.

    Recognized parameters:

    - ``drift``, ``diffusion``: callables ``(x, summary)``
      returning a vector and a matrix (a scalar diffusion is
      multiplied by the identity)
    - ``dim``: state dimension (default 1)
    - ``vectorized``: the callables already accept ``(N, d)``
      arrays (default false)
    - ``measure_features``: summaries the callables need
      (default ``{"mean", "cloud"}``)
    - ``additive_noise``: σ is constant (default false)
    - ``name`` and any :class:`AssumptionConstants` field
    """
    params = dict(params)
    drift = params.get("drift")
    diffusion = params.get("diffusion")
    if not callable(drift) or not callable(diffusion):
        raise ModelError("model 'custom' requires callable 'drift' and 'diffusion'")
    dim = int(params.get("dim", 1))
    if not params.get("vectorized", False):
        drift = _vectorize(drift, dim, matrix=False)
        diffusion = _vectorize(diffusion, dim, matrix=True)

    field_names = {field.name for field in dataclasses.fields(AssumptionConstants)}
    constants = AssumptionConstants(
        **{key: value for key, value in params.items() if key in field_names}
    )
    return ModelSpec(
        name=str(params.get("name", "custom")),
        dim=dim,
        drift=drift,
        diffusion=diffusion,
        measure_features=frozenset(params.get("measure_features", ALL_FEATURES)),
        constants=constants,
        additive_noise=bool(params.get("additive_noise", False)),
        params={
            key: value
            for key, value in params.items()
            if key not in ("drift", "diffusion")
        },
    )


_REGISTRY: Dict[str, ModelFactory] = {
    "mean_field_ou": mean_field_ou,
    "granular_media_1d": granular_media_1d,
    "curie_weiss": curie_weiss,
    "custom": custom_model,
}


def register_model(name: str, factory: ModelFactory) -> None:
    """
    Make *factory* available as ``builtin_model(name, ...)``.

    Raises:
      ModelError: *name* is already registered.
    """
    if name in _REGISTRY:
        raise ModelError(f"model {name!r} is already registered")
    _REGISTRY[name] = factory


def available_models() -> Tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def builtin_model(name: str, params: Mapping[str, Any]) -> ModelSpec:
    """
    Instantiate the model registered as *name*.

    Raises:
      ModelError: Unknown model or invalid parameters.
    """
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ModelError(
            f"unknown model {name!r}, expected one of {', '.join(available_models())}"
        ) from None
    model = factory(params)
    logger.debug("built model %s with constants %s", name, model.constants)
    return model


#
# Empirical checks of the declared constants
#

Tuple4 = Tuple[np.ndarray, np.ndarray, EmpiricalMeasure, EmpiricalMeasure]
PairSampler = Callable[[np.random.Generator], Tuple4]


def gaussian_tuple_sampler(
    dim: int, n_atoms: int = 8, scale: float = 2.0
) -> PairSampler:
    """
    Sampler of ``(x, y, mu, nu)`` tuples for the dissipativity
    checks.

    Points are Gaussian with standard deviation *scale*; half of
    the tuples place *y* close to *x*. The measures are Gaussian
    clouds of *n_atoms* points around random centers, or point
    masses for a quarter of the tuples.
    """

    def sample(rng: np.random.Generator) -> Tuple4:
        x = scale * rng.standard_normal(dim)
        if rng.random() < 0.5:
            y = x + 0.1 * scale * rng.standard_normal(dim)
        else:
            y = scale * rng.standard_normal(dim)

        def measure():
            center = scale * rng.standard_normal(dim)
            if rng.random() < 0.25:
                return EmpiricalMeasure.dirac(center)
            return EmpiricalMeasure(center + rng.standard_normal((n_atoms, dim)))

        return x, y, measure(), measure()

    return sample


@dataclasses.dataclass(frozen=True, eq=False)
class Witness:
    """
    The tuple at which a condition was most violated.
    """

    x: np.ndarray
    y: np.ndarray
    mu: EmpiricalMeasure
    nu: EmpiricalMeasure


@dataclasses.dataclass(frozen=True)
class ConditionCheck:
    """
    Result of checking one dissipativity condition.

    Attributes:
      condition
        ``"A1"`` (global), ``"A2"`` (local, with the derived σ
        factor) or ``"A2'"`` (local, constant-in-x σ, W_2)

      max_value
        Largest observed ``lhs - rhs``

      scaled_max
        Largest observed ``(lhs - rhs) / (1 + |x - y|^2)``

      witness
        Tuple attaining *scaled_max*
    """

    condition: str
    max_value: float
    scaled_max: float
    witness: Optional[Witness]


@dataclasses.dataclass(frozen=True)
class ViolationReport:
    """
    Outcome of :func:`check_dissipativity`.

    A report without violations certifies nothing beyond the
    sample; a violation is a concrete counterexample.
    """

    checks: Mapping[str, ConditionCheck]
    n_checked: int
    tolerance: float

    @property
    def max_violation(self) -> float:
        return self.checks["A1"].max_value

    @property
    def witness(self) -> Optional[Witness]:
        return self.checks["A1"].witness

    @property
    def violated(self) -> bool:
        return any(check.scaled_max > self.tolerance for check in self.checks.values())


def check_dissipativity(
    model: ModelSpec,
    sampler: Optional[PairSampler] = None,
    n: int = 10_000,
    seed: int = 0,
    tolerance: float = 1e-9,
) -> ViolationReport:
    """
    Search for violations of the declared dissipativity constants.

    For every sampled tuple this evaluates::

        L = 2<b(x,mu) - b(y,nu), x - y> + c ||σ(x,mu) - σ(y,nu)||_HS^2
            - rhs(|x - y|) - delta^2 W(mu, nu)^2

    for the global condition (``c = 1 + (p-2)+``, ``rhs = K0 |x-y|^2``,
    W = W_p) and, when K1 and r0 are declared, for the local
    condition (``c`` from :func:`a2_sigma_factor`, W = W_1) and its
    constant-σ variant (``c = 1``, W = W_2, additive noise models only).
    Distances between the sampled measures are exact (transport
    linear program), so sampled measures must stay small.

    Reports are informational and never raise for violations.
    """
    if n < 1:
        raise ModelError(f"sample count must be positive, got {n}")
    if sampler is None:
        sampler = gaussian_tuple_sampler(model.dim)

    constants = model.constants
    conditions = ["A1"]
    if constants.has_local_dissipativity:
        conditions.append("A2")
        if model.additive_noise:
            conditions.append("A2'")

    best: Dict[str, Tuple[float, float, Optional[Witness]]] = {
        name: (-math.inf, -math.inf, None) for name in conditions
    }
    rng = np.random.Generator(np.random.Philox(seed))
    delta2 = constants.delta ** 2

    for _ in range(n):
        x, y, mu, nu = sampler(rng)
        x = _point(model, x)
        y = _point(model, y)
        diff = x - y
        dist2 = float(diff @ diff)

        drift_term = 2 * float((eval_drift(model, x, mu) - eval_drift(model, y, nu)) @ diff)
        sigma_gap = eval_diffusion(model, x, mu) - eval_diffusion(model, y, nu)
        hs2 = float(np.sum(sigma_gap ** 2))

        values = {}
        wp = wasserstein_lp(mu, nu, constants.p)
        values["A1"] = (
            drift_term
            + (1 + max(constants.p - 2, 0)) * hs2
            - constants.K0 * dist2
            - delta2 * wp ** 2
        )
        if constants.has_local_dissipativity:
            inside = math.sqrt(dist2) <= constants.r0
            local = ((constants.K0 + constants.K1) * inside - constants.K1) * dist2
            w1 = wasserstein_lp(mu, nu, 1)
            factor = a2_sigma_factor(constants, model.dim)
            hs_term = factor * hs2 if hs2 > 0 else 0.0
            values["A2"] = drift_term + hs_term - local - delta2 * w1 ** 2
            if model.additive_noise:
                w2 = wasserstein_lp(mu, nu, 2)
                values["A2'"] = drift_term + hs2 - local - delta2 * w2 ** 2

        for name, value in values.items():
            scaled = value / (1 + dist2)
            if scaled > best[name][1]:
                best[name] = (value, scaled, Witness(x, y, mu, nu))

    checks = {
        name: ConditionCheck(name, value, scaled, witness)
        for name, (value, scaled, witness) in best.items()
    }
    for check in checks.values():
        if check.scaled_max > tolerance:
            logger.warning(
                "model %s violates %s: max scaled L = %.3g",
                model.name,
                check.condition,
                check.scaled_max,
            )
    return ViolationReport(checks, n, tolerance)


@dataclasses.dataclass(frozen=True)
class EllipticityReport:
    """
    Extreme values of σ observed by :func:`check_ellipticity`.
    """

    min_singular_value: float
    max_hs_norm: float
    sigma0_ok: bool
    sigma_sup_ok: bool


def check_ellipticity(
    model: ModelSpec,
    sampler: Optional[PairSampler] = None,
    n: int = 1_000,
    seed: int = 0,
    tolerance: float = 1e-12,
) -> EllipticityReport:
    """
    Compare sampled singular values and Hilbert–Schmidt norms
    of σ with the declared ``sigma0`` and ``sigma_sup``.
    """
    if sampler is None:
        sampler = gaussian_tuple_sampler(model.dim)
    rng = np.random.Generator(np.random.Philox(seed))
    smallest = math.inf
    largest = 0.0
    for _ in range(n):
        x, _y, mu, _nu = sampler(rng)
        sigma = eval_diffusion(model, x, mu)
        smallest = min(smallest, float(np.linalg.svd(sigma, compute_uv=False)[-1]))
        largest = max(largest, float(np.linalg.norm(sigma)))

    constants = model.constants
    return EllipticityReport(
        min_singular_value=smallest,
        max_hs_norm=largest,
        sigma0_ok=smallest >= constants.sigma0 - tolerance,
        sigma_sup_ok=largest <= constants.sigma_sup + tolerance,
    )
