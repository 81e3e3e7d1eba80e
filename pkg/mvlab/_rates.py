"""
Thresholds and rates for uniqueness of stationary distributions
and exponential convergence.

Each ``delta*`` function evaluates one threshold on the
interaction strength δ from user supplied constants
(:class:`RateInputs`) and returns a :class:`RateCertificate`
with the optimizer locations, a verdict for ``inputs.delta``
and, where the argument provides one, the rate λ̄ and prefactor
C̄ of ``W_p(law_t, μ̄) <= C̄ exp(-λ̄ t) W_p(law_0, μ̄)``.
"""
import dataclasses
import logging
import math
from typing import Any, Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate
from typing_extensions import Literal

from ._errors import ConfigError
from ._optimize import (
    Axis,
    Extremum,
    bisect_decreasing,
    maximize_1d,
    maximize_2d,
    minimize_2d,
    threshold_bisect,
)

logger = logging.getLogger(__name__)

Verdict = Literal["unique_stationary", "exponential_convergence", "inconclusive"]
ThresholdName = Literal[
    "delta0_prop21",
    "delta0_thm22",
    "delta1_thm23",
    "delta2_thm24",
    "delta0_cor25",
    "delta2_cor25",
    "delta0_cor26",
]

SERIES_CUTOFF = 1e-6
QUAD_TOLERANCE = 1e-8
T_SPAN = 1e6
DEFAULT_BOX = ((0.05, 50.0), (0.05, 100.0))


class TabulatedKappa:
    """
    Piecewise-linear ``t -> κ_t`` through tabulated points,
    constant beyond the table.
    """

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if len(self.times) < 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.values <= 0):
            raise ValueError("kappa_t must be positive")

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def __repr__(self):
        return f"TabulatedKappa(times={self.times.tolist()}, values={self.values.tolist()})"


KappaT = Union[float, Callable[[float], float]]


def _positive(name: str, value: Optional[float]):
    if value is not None and not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}", key=f"rates.{name}")


@dataclasses.dataclass(frozen=True)
class RateInputs:
    """
    Constants consumed by the rate formulas. Optional fields
    are only required by the formulas that use them.

    Attributes:
      p
        Wasserstein order, at least 1

      K0, K1, K3
        Dissipativity constants and the sub-Gaussian constant
        of the initial law

      delta
        Interaction strength the verdicts are given for

      sigma0, sigma_sup
        Lower ellipticity bound and supremum norm of σ

      C_hat, lambda_hat
        Exponential ergodicity constants of the frozen dynamics

      kappa
        Talagrand constant of the invariant laws

      kappa_t
        Twinned Talagrand coefficient, a constant or a function
        of time (for instance :class:`TabulatedKappa`)
    """

    p: float = 2.0
    K0: float = 0.0
    K1: Optional[float] = None
    K3: Optional[float] = None
    delta: float = 0.0
    sigma0: Optional[float] = None
    sigma_sup: Optional[float] = None
    C_hat: float = 1.0
    lambda_hat: Optional[float] = None
    kappa: Optional[float] = None
    kappa_t: Optional[KappaT] = None

    def __post_init__(self):
        if not self.p >= 1:
            raise ConfigError(f"p must be >= 1, got {self.p}", key="rates.p")
        if not self.C_hat >= 1:
            raise ConfigError(f"C_hat must be >= 1, got {self.C_hat}", key="rates.C_hat")
        if not self.delta >= 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}", key="rates.delta")
        if not math.isfinite(self.K0):
            raise ConfigError("K0 must be finite", key="rates.K0")
        for name in ("K1", "K3", "sigma0", "sigma_sup", "lambda_hat", "kappa"):
            _positive(name, getattr(self, name))
        if isinstance(self.kappa_t, (int, float)):
            _positive("kappa_t", self.kappa_t)

    @property
    def q(self) -> float:
        return max(self.p, 2.0)

    @property
    def t0(self) -> float:
        self.require("lambda_hat")
        return math.log(self.C_hat) / self.lambda_hat

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"{name} is required", key=f"rates.{name}")

    @property
    def kappa_is_constant(self) -> bool:
        return self.kappa_t is None or isinstance(self.kappa_t, (int, float))

    def kappa_at(self, t: float) -> float:
        if self.kappa_t is None:
            self.require("kappa")
            return float(self.kappa)  # type: ignore
        if callable(self.kappa_t):
            return float(self.kappa_t(t))
        return float(self.kappa_t)

    def replace(self, **changes: Any) -> "RateInputs":
        return dataclasses.replace(self, **changes)

    def echo(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if value is None:
                continue
            if field.name == "kappa_t" and not isinstance(value, (int, float)):
                value = repr(value)
            result[field.name] = value
        return result


def _finite(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


@dataclasses.dataclass(frozen=True)
class RateCertificate:
    """
    A computed threshold with its verdict.

    Attributes:
      threshold_name
        Which threshold *value* is

      value
        The threshold, at least 0

      optimizers
        Locations (keys ``t``, ``m``, ``theta``) attaining or
        approaching the supremum or infimum; ``inf`` marks a
        limit at infinity

      verdict
        Conclusion for ``inputs.delta``

      lambda_bar, C_bar
        Convergence rate and prefactor when available

      boundary_flag
        The extremum sits on the boundary of the searched domain

      refinement
        Values at the last two grid levels

      extras
        Intermediate quantities of the formula

      attached
        Certificates of related thresholds

      inputs_echo
        The inputs the certificate was computed from
    """

    threshold_name: ThresholdName
    value: float
    optimizers: Dict[str, float]
    verdict: Verdict
    lambda_bar: Optional[float] = None
    C_bar: Optional[float] = None
    boundary_flag: bool = False
    refinement: Tuple[float, float] = (math.nan, math.nan)
    extras: Dict[str, Any] = dataclasses.field(default_factory=dict)
    attached: Dict[str, "RateCertificate"] = dataclasses.field(default_factory=dict)
    inputs_echo: Dict[str, Any] = dataclasses.field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.threshold_name,
            "value": self.value,
            "optimizers": {key: _finite(value) for key, value in self.optimizers.items()},
            "verdict": self.verdict,
            "lambda_bar": _finite(self.lambda_bar),
            "C_bar": _finite(self.C_bar),
            "boundary_flag": self.boundary_flag,
            "refinement": [_finite(value) for value in self.refinement],
            "extras": {
                key: _finite(value) if isinstance(value, float) else value
                for key, value in self.extras.items()
            },
            "attached": {key: cert.to_dict() for key, cert in self.attached.items()},
            "inputs_echo": self.inputs_echo,
        }


def _certificate(
    name: ThresholdName,
    found: Extremum,
    keys: Sequence[str],
    verdict: Verdict,
    inputs: RateInputs,
    **kwds: Any,
) -> RateCertificate:
    return RateCertificate(
        threshold_name=name,
        value=max(0.0, found.value),
        optimizers=dict(zip(keys, found.location)),
        verdict=verdict,
        boundary_flag=found.boundary is not None,
        refinement=found.refinement,
        inputs_echo=inputs.echo(),
        **kwds,
    )


def _uniqueness(inputs: RateInputs, value: float) -> Verdict:
    return "unique_stationary" if inputs.delta < value else "inconclusive"


def k_constant(m: float, p: float, K0: float) -> float:
    """
    ``K(m, p) = 2^(-1/q) (q (2m - K0) - (p-2)^+)^(1/q)`` with
    ``q = max(p, 2)``.

    Raises:
      ValueError: The radicand is negative.
    """
    q = max(p, 2.0)
    radicand = q * (2 * m - K0) - max(p - 2.0, 0.0)
    if radicand < 0:
        raise ValueError(f"K(m={m}, p={p}) undefined: negative radicand {radicand}")
    return 2 ** (-1 / q) * radicand ** (1 / q)


def _m0(p: float, K0: float) -> float:
    q = max(p, 2.0)
    return max(max(p - 2.0, 0.0) / (2 * q) + K0 / 2, 0.0)


def _phi(x: float) -> float:
    # (1 - exp(-x)) / x, continued by 1 at 0
    if abs(x) < SERIES_CUTOFF:
        return 1.0 - x / 2 + x * x / 6
    return float(-np.expm1(-x) / x)


def delta0_prop21(inputs: RateInputs, n: int = 200) -> RateCertificate:
    """
    Uniqueness threshold for the case without Talagrand input::

      δ0 = sup_{t > t0} (2t (1 - exp(-A t/2)) / A)^(-1/q) (1 - Ĉ exp(-λ̂ t))

    with ``A = q K0 + (p-2)^+``; the bracket tends to ``t²`` as
    ``A -> 0``.
    """
    inputs.require("lambda_hat")
    q = inputs.q
    lam, C = inputs.lambda_hat, inputs.C_hat
    A = q * inputs.K0 + max(inputs.p - 2.0, 0.0)

    def objective(t: float) -> float:
        bracket = t * t * _phi(A * t / 2)
        return bracket ** (-1 / q) * (1 - C * math.exp(-lam * t))

    lower_limit = lam if (C == 1 and q == 2) else 0.0
    t0 = inputs.t0
    found = maximize_1d(
        objective, t0, t0 + T_SPAN / lam, n, limits={"lower": lower_limit, "upper": 0.0}
    )
    return _certificate(
        "delta0_prop21",
        found,
        ["t"],
        _uniqueness(inputs, found.value),
        inputs,
        extras={"A": A, "t0": t0},
    )


def delta0_thm22(inputs: RateInputs, n: int = 24) -> RateCertificate:
    """
    Uniqueness threshold using the Talagrand constant κ: the
    supremum over ``t > t0``, ``m > m0`` of::

      σ0 (1 - Ĉ exp(-λ̂ t)) K(m,2) X / (σ0 K(m,2) + m sqrt(κ t) X)

    where ``X = max(K(m,p), t^(-1/q))``. When ``m0 = 0`` the
    value in the limit ``m -> 0``, ``t -> inf`` is ``K(0, p)``.
    """
    inputs.require("lambda_hat", "sigma0", "kappa")
    p, q, K0 = inputs.p, inputs.q, inputs.K0
    lam, C, s0, kappa = inputs.lambda_hat, inputs.C_hat, inputs.sigma0, inputs.kappa
    m0 = _m0(p, K0)
    t0 = inputs.t0

    def objective(t: float, m: float) -> float:
        K2 = k_constant(m, 2, K0)
        X = max(k_constant(m, p, K0), t ** (-1 / q))
        numerator = s0 * (1 - C * math.exp(-lam * t)) * K2 * X
        return numerator / (s0 * K2 + m * math.sqrt(kappa * t) * X)

    scale = max(1.0, abs(K0))
    found = maximize_2d(
        objective,
        Axis(t0, 1e-4 / lam, 1e4 / lam),
        Axis(m0, 1e-6 * scale, 1e4 * scale),
        n,
    )
    limit = k_constant(m0, p, K0) if m0 == 0 else 0.0
    if limit >= found.value:
        coarse, _ = found.refinement
        found = Extremum(limit, (math.inf, m0), "lower", (max(coarse, limit), limit))
    return _certificate(
        "delta0_thm22",
        found,
        ["t", "m"],
        _uniqueness(inputs, found.value),
        inputs,
        extras={"m0": m0, "t0": t0},
    )


def k0_pka_condition(p: float, K0: float, sigma0: float, kappa: float) -> bool:
    """
    Whether ``K0 < s - ((sqrt((p-2)/p) - sqrt(s))^+)²`` with
    ``s = σ0² / (2^(3-4/p) κ)``, the dissipativity condition of
    the convergence theorem with a Talagrand inequality.
    """
    s = sigma0 ** 2 / (2 ** (3 - 4 / p) * kappa)
    gap = max(math.sqrt(max(p - 2.0, 0.0) / p) - math.sqrt(s), 0.0)
    return K0 < s - gap ** 2


def m_hat_general(p: float, sigma0: float, kappa: float) -> float:
    """
    The recommended ``m̂ = sqrt(max(s, (p-2)/p)) sqrt(s)``,
    ``s = σ0² / (2^(3-4/p) κ)``.
    """
    s = sigma0 ** 2 / (2 ** (3 - 4 / p) * kappa)
    return math.sqrt(max(s, (p - 2.0) / p)) * math.sqrt(s)


def phi_thm23(x: float, beta_hat: float, v_min: float = 1e-8, v_max: float = 1e3) -> float:
    """
    ``inf {v > 0 : v (v β̂ + β̂ - 2)^(-1/v) <= x}``.

    The condition is scanned on a log grid and the first
    crossing refined by bisection; the result satisfies the
    condition. Returns 0 when it already holds at *v_min*
    and ``inf`` when it never holds below *v_max*.
    """

    def g(v: float) -> float:
        base = v * beta_hat + beta_hat - 2
        if base <= 0:
            return math.inf
        with np.errstate(over="ignore"):
            return float(v * np.exp(-np.log(base) / v))

    grid = np.geomspace(v_min, v_max, 4000)
    satisfied = [g(v) <= x for v in grid]
    if satisfied[0]:
        return 0.0
    if not any(satisfied):
        return math.inf
    index = satisfied.index(True)
    low, high = float(grid[index - 1]), float(grid[index])
    while high - low > 1e-13 * high:
        middle = 0.5 * (low + high)
        if g(middle) <= x:
            high = middle
        else:
            low = middle
    return high


def _sup_ratio(gamma: Callable[[float], float], t_hat: float) -> float:
    # sup_{0 <= t <= t_hat} γ(t) / γ(t_hat)
    times = np.linspace(0.0, t_hat, 401)
    return max(gamma(float(t)) for t in times) / gamma(t_hat)


def thm23_p2_certificate(inputs: RateInputs) -> RateCertificate:
    """
    Closed-form convergence threshold for ``p = 2``.

    With ``m̂ = σ0²/(2κ)``, ``k = 2m̂ - K0`` and
    ``β̂ = 2(1 + κ m̂²/(σ0² k))`` the threshold bound is
    ``sqrt(k β̂⁻¹ min(Φ(2), 1/2))``. Below it the rate is
    ``λ̄ = -log(γ(t̂)²)/(2 t̂)`` at the minimizing time t̂ of::

      γ(t)² = 2k exp(-kt)/(g+k) + (2g/(g+k) + β̂ - 2) exp(gt),  g = δ² β̂
    """
    inputs.require("sigma0", "kappa")
    _check_p("thm23_p2", inputs)
    s0, kappa, K0, delta = inputs.sigma0, inputs.kappa, inputs.K0, inputs.delta
    m_hat = s0 ** 2 / (2 * kappa)
    extras: Dict[str, Any] = {"m_hat": m_hat}
    if not K0 < m_hat:
        logger.warning("K0=%g violates K0 < sigma0^2/(2 kappa)=%g", K0, m_hat)
        return RateCertificate(
            "delta1_thm23",
            0.0,
            {"m": m_hat},
            "inconclusive",
            extras=extras,
            inputs_echo=inputs.echo(),
        )

    k = 2 * m_hat - K0
    beta = 2 * (1 + kappa * m_hat ** 2 / (s0 ** 2 * k))
    phi2 = phi_thm23(2.0, beta)
    bound = math.sqrt(k / beta * min(phi2, 0.5))
    extras.update(beta_hat=beta, phi=phi2)

    verdict: Verdict = "exponential_convergence" if delta < bound else "inconclusive"
    lambda_bar = C_bar = None
    optimizers: Dict[str, float] = {"m": m_hat}
    if 0 < delta < bound:
        g = delta ** 2 * beta
        u = k / g
        B = beta / 2 + (beta / 2 - 1) * u
        ratio = u * u / B
        extras["u"] = u
        if ratio > 1:
            t_hat = math.log(ratio) / (g + k)
            gamma2 = 2 * B ** (u / (u + 1)) * u ** ((1 - u) / (1 + u))
            extras.update(t_hat=t_hat, gamma2=gamma2)
            if gamma2 < 1:
                lambda_bar = -math.log(gamma2) / (2 * t_hat)
                extras["lambda_bar_formula"] = (g / 2) * (
                    u - (1 + u) * math.log(2 * u) / math.log(ratio)
                )

                def gamma(t: float) -> float:
                    square = 2 * k * math.exp(-k * t) / (g + k) + (
                        2 * g / (g + k) + beta - 2
                    ) * math.exp(g * t)
                    return math.sqrt(square)

                C_bar = _sup_ratio(gamma, t_hat)
                optimizers["t"] = t_hat
        if lambda_bar is None:
            verdict = "inconclusive"

    return RateCertificate(
        threshold_name="delta1_thm23",
        value=bound,
        optimizers=optimizers,
        verdict=verdict,
        lambda_bar=lambda_bar,
        C_bar=C_bar,
        refinement=(bound, bound),
        extras=extras,
        inputs_echo=inputs.echo(),
    )


def gamma_thm23(inputs: RateInputs, delta: float, m: float, t: float) -> float:
    """
    Gronwall factor ``γ`` with ``W_p(law_t, μ̄) <= γ W_p(law_0, μ̄)``::

      γ^p = a1(t) + δ^p a2(t) ∫_0^t exp(δ^p ∫_s^t a2) a1(s) ds

    For ``p = 2`` the integral is evaluated in closed form,
    otherwise by adaptive quadrature.

    Raises:
      ValueError: ``m <= m0``, ``p < 2`` or ``t <= 0``.
    """
    inputs.require("sigma0", "kappa")
    p, K0 = inputs.p, inputs.K0
    if p < 2:
        raise ValueError(f"gamma_thm23 needs p >= 2, got {p}")
    m0 = _m0(p, K0)
    if not m > m0:
        raise ValueError(f"m={m} must exceed m0={m0}")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")

    k = 2 * m - K0
    tail = inputs.kappa ** (p / 2) * m ** p / (inputs.sigma0 ** p * k ** (p / 2))
    rate = k_constant(m, p, K0) ** p

    def a1(s: float) -> float:
        return 2 ** (p - 1) * math.exp(-rate * s) + 2 ** (3 * p / 2 - 2) * tail

    dp = delta ** p
    if dp == 0:
        return a1(t) ** (1 / p)

    if p == 2:
        g = dp * 2 * (1 + tail)
        with np.errstate(over="ignore"):
            square = 2 * rate * math.exp(-rate * t) / (g + rate) + (
                2 * g / (g + rate) + 2 * tail
            ) * float(np.exp(g * t))
        return math.sqrt(square)

    coefficient = 2 ** (p / 2 - 1) * tail

    def A2(s: float) -> float:
        return 2 ** (p - 1) * (s + coefficient * (2 / p) * s ** (p / 2))

    a2 = 2 ** (p - 1) * (1 + coefficient * t ** (p / 2 - 1))
    total = A2(t)
    with np.errstate(over="ignore"):
        integral, _ = integrate.quad(
            lambda s: float(np.exp(dp * (total - A2(s)))) * a1(s),
            0.0,
            t,
            epsrel=QUAD_TOLERANCE,
            limit=200,
        )
    return (a1(t) + dp * a2 * integral) ** (1 / p)


def _best_rate(
    gamma: Callable[[float, float], float], first: Axis, second: Axis, n: int
) -> Optional[Tuple[float, float, float, float]]:
    # sup of t⁻¹ log(1/γ) over the box: (λ̄, C̄, t₁, y₁), or None
    def rate(t: float, y: float) -> float:
        value = gamma(t, y)
        if not value > 0:
            return -math.inf
        return -math.log(value) / t

    found = maximize_2d(rate, first, second, n)
    if not found.value > 0:
        return None
    t1, y1 = found.location

    def along(t: float) -> float:
        return gamma(max(t, first.low * 1e-3), y1)

    return found.value, _sup_ratio(along, t1), t1, y1


def delta1_thm23_general(inputs: RateInputs, n: int = 12) -> RateCertificate:
    """
    ``δ1 = inf {δ > 0 : inf_{t>0, m>m0} γ(δ, m, t) >= 1}`` by
    bisection on δ with a box search over ``(t, m)`` seeded at
    the recommended m̂.
    """
    inputs.require("sigma0", "kappa")
    _check_p("thm23_general", inputs)
    p, K0 = inputs.p, inputs.K0
    if not k0_pka_condition(p, K0, inputs.sigma0, inputs.kappa):
        logger.warning("dissipativity condition K0-pka fails for K0=%g", K0)
        return RateCertificate(
            "delta1_thm23", 0.0, {}, "inconclusive", inputs_echo=inputs.echo()
        )

    m0 = _m0(p, K0)
    m_hat = m_hat_general(p, inputs.sigma0, inputs.kappa)
    scale = max(1.0, m_hat)
    t_axis = Axis(0.0, 1e-3, 1e2)
    m_axis = Axis(m0, 1e-4 * scale, 1e2 * scale)
    starts = [(t, m_hat) for t in (0.1, 1.0, 10.0)] if m_hat > m0 else []

    def threshold(points: int) -> float:
        def holds(delta: float) -> bool:
            found = minimize_2d(
                lambda t, m: gamma_thm23(inputs, delta, m, t),
                t_axis,
                m_axis,
                points,
                stop_below=1.0,
                starts=starts,
            )
            return found.value >= 1.0

        return threshold_bisect(holds)

    coarse = threshold(max(4, n // 2))
    value = threshold(n)
    extras: Dict[str, Any] = {"m0": m0, "m_hat": m_hat}
    optimizers: Dict[str, float] = {}
    boundary = False
    if 0 < value < math.inf:
        witness = minimize_2d(
            lambda t, m: gamma_thm23(inputs, value * (1 - 1e-3), m, t),
            t_axis,
            m_axis,
            n,
            starts=starts,
        )
        optimizers = {"t": witness.location[0], "m": witness.location[1]}
        extras["gamma_witness"] = witness.value
        boundary = witness.boundary is not None

    verdict: Verdict = "inconclusive"
    lambda_bar = C_bar = None
    delta = inputs.delta
    if delta < value:
        verdict = "exponential_convergence"
        if delta > 0:
            best = _best_rate(
                lambda t, m: gamma_thm23(inputs, delta, m, t), t_axis, m_axis, n
            )
            if best is not None:
                lambda_bar, C_bar, t1, m1 = best
                extras.update(t1=t1, m1=m1)

    return RateCertificate(
        threshold_name="delta1_thm23",
        value=value,
        optimizers=optimizers,
        verdict=verdict,
        lambda_bar=lambda_bar,
        C_bar=C_bar,
        boundary_flag=boundary,
        refinement=(coarse, value),
        extras=extras,
        inputs_echo=inputs.echo(),
    )


def c1_thm24(inputs: RateInputs, t: float) -> float:
    """
    The m-optimized coefficient ``C1(t)``. It is 1 when
    ``max(|K0|, (p-2)^+/q)`` vanishes.
    """
    q = inputs.q
    shift = max(inputs.p - 2.0, 0.0) / q
    floor = max(abs(inputs.K0), shift)
    coefficient = inputs.K0 + max(shift, abs(inputs.K0))
    if floor == 0 or coefficient == 0:
        return 1.0
    inputs.require("sigma0")
    growth = t ** ((q - 2) / (2 * q)) * math.sqrt(inputs.kappa_at(t))
    return (1 + growth * coefficient / (2 * inputs.sigma0 * math.sqrt(floor))) ** q


def _c1_is_constant(inputs: RateInputs) -> bool:
    return inputs.q == 2 and inputs.kappa_is_constant


def gamma_thm24(inputs: RateInputs, delta: float, t: float, theta: float) -> float:
    """
    Contraction factor over time *t* with the twinned Talagrand
    coefficient::

      γ = Ĉ ((1+θ)/θ)^(1-1/q) γ1^(1/q) exp(-λ̂ t)
      γ1 = 1 + D C1(t) ∫_0^t exp(∫_s^t (D C1(r) + q λ̂) dr) ds

    with ``D = δ^q (1+θ)^(q-1)``. A time independent ``C1``
    gives ``γ1 = 1 + D C1 (exp(E t) - 1)/E``, ``E = D C1 + q λ̂``.
    """
    inputs.require("lambda_hat")
    if not (t >= 0 and theta > 0):
        raise ValueError(f"need t >= 0 and theta > 0, got t={t}, theta={theta}")
    q, lam = inputs.q, inputs.lambda_hat
    D = delta ** q * (1 + theta) ** (q - 1)

    if D == 0 or t == 0:
        gamma1 = 1.0
    elif _c1_is_constant(inputs):
        c1 = c1_thm24(inputs, t)
        E = D * c1 + q * lam
        with np.errstate(over="ignore"):
            gamma1 = 1 + D * c1 * float(np.expm1(E * t)) / E
    else:

        def exponent(s: float) -> float:
            forcing, _ = integrate.quad(
                lambda r: D * c1_thm24(inputs, r), s, t, epsrel=QUAD_TOLERANCE
            )
            return forcing + q * lam * (t - s)

        with np.errstate(over="ignore"):
            integral, _ = integrate.quad(
                lambda s: float(np.exp(exponent(s))), 0.0, t, epsrel=QUAD_TOLERANCE
            )
        gamma1 = 1 + D * c1_thm24(inputs, t) * integral

    with np.errstate(over="ignore"):
        return float(
            inputs.C_hat
            * ((1 + theta) / theta) ** (1 - 1 / q)
            * gamma1 ** (1 / q)
            * np.exp(-lam * t)
        )


def delta2_thm24(
    inputs: RateInputs,
    search_box: Tuple[Tuple[float, float], Tuple[float, float]] = DEFAULT_BOX,
    n: int = 16,
) -> RateCertificate:
    """
    ``δ2 = inf {δ > 0 : inf_{t, θ} γ(δ, t, θ) >= 1}`` with the
    infimum taken over *search_box* ``((t_min, t_max), (θ_min, θ_max))``.

    For ``inputs.delta`` the best rate ``sup t⁻¹ log(1/γ)`` over
    the box gives λ̄ and its location ``(t1, θ1)``. Exponential
    convergence additionally needs ``δ < δ0`` from
    :func:`delta0_thm22`, attached when σ0 and κ are known.
    """
    inputs.require("lambda_hat")
    (t_min, t_max), (theta_min, theta_max) = search_box
    if not (0 < t_min < t_max and 0 < theta_min < theta_max):
        raise ValueError(f"invalid search box {search_box}")
    t_axis = Axis(0.0, t_min, t_max)
    theta_axis = Axis(0.0, theta_min, theta_max)

    def inner(delta: float, points: int, stop: Optional[float] = None) -> Extremum:
        return minimize_2d(
            lambda t, theta: gamma_thm24(inputs, delta, t, theta),
            t_axis,
            theta_axis,
            points,
            stop_below=stop,
        )

    coarse = threshold_bisect(lambda d: inner(d, max(4, n // 2), 1.0).value >= 1.0)
    value = threshold_bisect(lambda d: inner(d, n, 1.0).value >= 1.0)
    crossing = inner(value, n) if math.isfinite(value) else None
    optimizers: Dict[str, float] = {}
    boundary = False
    if crossing is not None:
        optimizers = {"t": crossing.location[0], "theta": crossing.location[1]}
        boundary = crossing.boundary is not None
    if boundary:
        logger.warning("delta2 box search is dominated by the box boundary")

    extras: Dict[str, Any] = {}
    attached: Dict[str, RateCertificate] = {}
    delta0 = None
    if inputs.sigma0 is not None and inputs.kappa is not None:
        cert0 = delta0_thm22(inputs)
        attached["delta0_thm22"] = cert0
        delta0 = cert0.value

    lambda_bar = C_bar = None
    verdict: Verdict = "inconclusive"
    best = _best_rate(
        lambda t, theta: gamma_thm24(inputs, inputs.delta, t, theta), t_axis, theta_axis, n
    )
    if best is not None:
        lambda_bar, C_bar, t1, theta1 = best
        extras.update(t1=t1, theta1=theta1)
        if lambda_bar >= inputs.lambda_hat * (1 - 1e-3):
            extras["lambda_hat_limited"] = True
        if delta0 is not None and inputs.delta < delta0:
            verdict = "exponential_convergence"

    return RateCertificate(
        threshold_name="delta2_thm24",
        value=value,
        optimizers=optimizers,
        verdict=verdict,
        lambda_bar=lambda_bar,
        C_bar=C_bar,
        boundary_flag=boundary,
        refinement=(coarse, value),
        extras=extras,
        attached=attached,
        inputs_echo=inputs.echo(),
    )


def phi_cor25(u: float) -> float:
    """
    ``Φ(u) = inf {v > 0 : v^((v-1)/(v+1)) <= u}``, the root of
    ``v^((v-1)/(v+1)) = u`` in ``(0, 1]``.

    Raises:
      ValueError: ``u < 1``.
    """
    if u < 1:
        raise ValueError(f"phi_cor25 needs u >= 1, got {u}")
    if u == 1:
        return 1.0

    def h(v: float) -> float:
        return math.exp((v - 1) / (v + 1) * math.log(v))

    low = 0.5
    while h(low) <= u:
        low /= 2
    return bisect_decreasing(h, u, low, 1.0)


def kappa_t_from_constants(
    sigma_sup: float, K1: float, K3: Optional[float] = None
) -> float:
    """
    The constant twinned Talagrand coefficient
    ``‖σ‖∞² / min(K1, K3)``.
    """
    return sigma_sup ** 2 / min(K1, K3 if K3 is not None else K1)


def cor25_alpha(inputs: RateInputs) -> float:
    inputs.require("K1", "K3", "sigma0", "sigma_sup")
    ratio = inputs.sigma_sup / inputs.sigma0  # type: ignore
    return (1 + ratio * math.sqrt(inputs.K0 / min(inputs.K1, inputs.K3))) ** 2  # type: ignore


def cor25_certificate(inputs: RateInputs, n: int = 200) -> RateCertificate:
    """
    Thresholds under local dissipativity with bounded σ.

    The uniqueness threshold::

      δ0 = sup_{t > t0} σ0 (1 - Ĉ exp(-λ̂ t)) sqrt(K1)
           / sqrt(2 σ0 ‖σ‖∞ sqrt(K1 t) + K0 ‖σ‖∞² t)

    is attached to the convergence threshold
    ``δ2 = sqrt(λ̂ Φ(2Ĉ²)/α)``. Below δ2 the rate is
    ``λ̄ = -log(γ²)/(2 t̂)`` with ``t̂ = log(λ̂/(αδ²))/(αδ² + λ̂)``
    and ``γ² = 2Ĉ² (λ̂/(αδ²))^((αδ²-λ̂)/(αδ²+λ̂))``.
    """
    inputs.require("K1", "K3", "sigma0", "sigma_sup", "lambda_hat")
    if inputs.K0 < 0:
        raise ConfigError(f"K0 must be >= 0 here, got {inputs.K0}", key="rates.K0")
    s0, sup, K0, K1 = inputs.sigma0, inputs.sigma_sup, inputs.K0, inputs.K1
    lam, C, delta = inputs.lambda_hat, inputs.C_hat, inputs.delta

    def objective(t: float) -> float:
        numerator = s0 * (1 - C * math.exp(-lam * t)) * math.sqrt(K1)
        return numerator / math.sqrt(2 * s0 * sup * math.sqrt(K1 * t) + K0 * sup ** 2 * t)

    t0 = inputs.t0
    found = maximize_1d(objective, t0, t0 + T_SPAN / lam, n, limits={"lower": 0.0, "upper": 0.0})
    cert0 = _certificate(
        "delta0_cor25", found, ["t"], _uniqueness(inputs, found.value), inputs
    )

    alpha = cor25_alpha(inputs)
    phi = phi_cor25(2 * C ** 2)
    delta2 = math.sqrt(lam * phi / alpha)
    extras: Dict[str, Any] = {"alpha": alpha, "phi": phi}

    lambda_bar = C_bar = None
    optimizers: Dict[str, float] = {}
    verdict: Verdict = "inconclusive"
    if 0 < delta < delta2:
        forcing = alpha * delta ** 2
        ratio = lam / forcing
        t_hat = math.log(ratio) / (forcing + lam)
        gamma2 = 2 * C ** 2 * ratio ** ((forcing - lam) / (forcing + lam))
        extras.update(
            t_hat=t_hat,
            gamma2=gamma2,
            lambda_bar_display=((forcing + lam) / 2)
            * (math.log(2 * C ** 2) / math.log(ratio) + (forcing - lam) / (forcing + lam)),
        )
        if t_hat > 0 and gamma2 < 1:
            lambda_bar = -math.log(gamma2) / (2 * t_hat)

            def gamma(t: float) -> float:
                square = (
                    2 * C ** 2 * (lam * math.exp(-2 * lam * t) + forcing * math.exp(2 * forcing * t))
                    / (forcing + lam)
                )
                return math.sqrt(square)

            C_bar = _sup_ratio(gamma, t_hat)
            optimizers = {"t": t_hat, "theta": 1.0}
            if delta < cert0.value:
                verdict = "exponential_convergence"

    return RateCertificate(
        threshold_name="delta2_cor25",
        value=delta2,
        optimizers=optimizers,
        verdict=verdict,
        lambda_bar=lambda_bar,
        C_bar=C_bar,
        refinement=(delta2, delta2),
        extras=extras,
        attached={"delta0_cor25": cert0},
        inputs_echo=inputs.echo(),
    )


def cor26_delta0(inputs: RateInputs, n: int = 200) -> RateCertificate:
    """
    Uniqueness threshold with σ independent of x::

      δ0 = sup_{t > t0} σ0 (1 - Ĉ exp(-λ̂ t)) / sqrt(κ (2 σ0 sqrt(t) + K0 κ t))

    When ``K0 < σ0²/(2κ)`` the ``p = 2`` convergence
    certificate is attached.
    """
    inputs.require("sigma0", "kappa", "lambda_hat")
    s0, kappa, K0 = inputs.sigma0, inputs.kappa, inputs.K0
    lam, C = inputs.lambda_hat, inputs.C_hat

    def objective(t: float) -> float:
        return s0 * (1 - C * math.exp(-lam * t)) / math.sqrt(
            kappa * (2 * s0 * math.sqrt(t) + K0 * kappa * t)
        )

    t0 = inputs.t0
    found = maximize_1d(objective, t0, t0 + T_SPAN / lam, n, limits={"lower": 0.0, "upper": 0.0})
    attached = {}
    if K0 < s0 ** 2 / (2 * kappa):
        attached["delta1_thm23"] = thm23_p2_certificate(inputs.replace(p=2.0))
    return _certificate(
        "delta0_cor26",
        found,
        ["t"],
        _uniqueness(inputs, found.value),
        inputs,
        attached=attached,
    )


# exponents the threshold formulas are derived for
_P_DOMAIN: Dict[str, Tuple[Callable[[float], bool], str]] = {
    "thm23_p2": (lambda p: p == 2, "p = 2"),
    "thm23_general": (lambda p: p >= 2, "p >= 2"),
}


def _check_p(name: str, inputs: RateInputs) -> None:
    if name in _P_DOMAIN:
        accepts, domain = _P_DOMAIN[name]
        if not accepts(inputs.p):
            raise ConfigError(
                f"theorem {name!r} needs {domain}, got p={inputs.p}", key="rates.p"
            )


_THEOREMS: Dict[str, Tuple[Callable[[RateInputs], RateCertificate], Tuple[str, ...]]] = {
    "prop21": (delta0_prop21, ("lambda_hat",)),
    "thm22": (delta0_thm22, ("lambda_hat", "sigma0", "kappa")),
    "thm23_p2": (thm23_p2_certificate, ("sigma0", "kappa")),
    "thm23_general": (delta1_thm23_general, ("sigma0", "kappa")),
    "thm24": (delta2_thm24, ("lambda_hat",)),
    "cor25": (cor25_certificate, ("K1", "K3", "sigma0", "sigma_sup", "lambda_hat")),
    "cor26": (cor26_delta0, ("sigma0", "kappa", "lambda_hat")),
}


def available_theorems() -> Tuple[str, ...]:
    return tuple(_THEOREMS)


def check_theorems(theorems: Iterable[str], inputs: Optional[RateInputs] = None) -> None:
    """
    Validate a list of theorem names, and the exponent of
    *inputs* against the theorems restricted to some ``p``.

    Raises:
      ConfigError: An unknown name (key ``theorems``) or an
        exponent outside a named theorem's domain (key
        ``rates.p``).
    """
    for name in theorems:
        if name not in _THEOREMS:
            raise ConfigError(f"unknown theorem {name!r}", key="theorems")
        if inputs is not None:
            _check_p(name, inputs)


def _applicable(name: str, inputs: RateInputs) -> bool:
    _, required = _THEOREMS[name]
    if any(getattr(inputs, key) is None for key in required):
        return False
    if name in _P_DOMAIN and not _P_DOMAIN[name][0](inputs.p):
        return False
    if name == "thm24":
        return inputs.sigma0 is not None and (
            inputs.kappa is not None or inputs.kappa_t is not None
        )
    if name == "cor25":
        return inputs.K0 >= 0
    return True


def certificates(
    inputs: RateInputs, theorems: Optional[Iterable[str]] = None
) -> Dict[str, RateCertificate]:
    """
    Compute the certificates named in *theorems* (see
    :func:`available_theorems`), by default every one whose
    inputs are present.

    Raises:
      ConfigError: An unknown theorem was named, or a named
        theorem lacks a required input or does not cover the
        exponent p.
    """
    if theorems is None:
        selected = [name for name in _THEOREMS if _applicable(name, inputs)]
    else:
        selected = list(theorems)
        check_theorems(selected, inputs)
    result = {}
    for name in selected:
        function, _ = _THEOREMS[name]
        logger.info("computing %s", name)
        result[name] = function(inputs)
    return result
