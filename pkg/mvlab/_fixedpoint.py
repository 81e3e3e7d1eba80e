"""
Stationary distributions as fixed points of the invariant-law map.

For a frozen measure μ the decoupled equation is a classical
SDE; its invariant law is written T(μ). A stationary
distribution of the McKean–Vlasov equation is a fixed point of
T. This module estimates T by simulation, iterates it (Picard),
estimates its contraction ratio and the ergodicity constants
of the frozen dynamics, measures convergence of the interacting
system and scans parameters for multiple stationary states.

All Picard iterations of one solve reuse the same noise seed
and the same initial cloud, so the sampled map is deterministic
and its iterates contract like the exact map.
"""
import concurrent.futures
import dataclasses
import logging
import os
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    NamedTuple,
    Optional,
    Sequence,
    TextIO,
    Tuple,
    Union,
)

import numpy as np
from scipy import integrate, optimize, stats
from typing_extensions import Literal

from ._callback_list import CallbackList
from ._clusters import FixedPointGraph, FixedPointNode
from ._errors import ConfigError, DegenerateInputError, ModelError, MVLabError
from ._measures import EmpiricalMeasure, noise_floor, wasserstein
from ._models import ModelSpec, summarize
from ._noise import STREAM_INITIAL, NoiseStream
from ._simulate import SimConfig, Trajectory, simulate_decoupled, simulate_mv

logger = logging.getLogger(__name__)

StopReason = Literal["tol", "noise_floor", "max_iter", "non_contraction"]
IterationHook = Callable[[int, float, EmpiricalMeasure], None]

SIGMA_TOLERANCE = 1e-12
TAIL_TOLERANCE = 1e-10
FIT_THRESHOLD = 0.9
PILOT_PARTICLES = 512


@dataclasses.dataclass(frozen=True)
class FixedPointConfig:
    """
    Options of :func:`picard_solve` and :func:`phase_scan`.

    Attributes:
      tol
        Gap W_p(μ_k, μ_{k+1}) below which the iteration stops

      max_iter
        Maximal number of applications of T

      burn_in
        Time discarded by the pooled estimator; :data:`None`
        selects ``10/λ`` from a pilot ergodicity estimate

      merge_tol
        Distance below which phase-scan fixed points are merged;
        :data:`None` selects five times the noise floor

      pooled
        Estimate T(μ) from all snapshots after the burn-in
        instead of the terminal snapshot

      explosion_bound
        Snapshot moment that flags non-ergodic frozen dynamics

      floor_multiple
        Multiple of the noise floor accepted as a gap

      stall_iterations
        Number of consecutive gap ratios >= 1 that ends the
        iteration as non-contracting
    """

    tol: float = 1e-2
    max_iter: int = 20
    burn_in: Optional[float] = None
    merge_tol: Optional[float] = None
    pooled: bool = False
    explosion_bound: float = 1e6
    floor_multiple: float = 3.0
    stall_iterations: int = 3

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError(f"burn_in must be nonnegative, got {self.burn_in}")
        if self.merge_tol is not None and self.merge_tol < 0:
            raise ValueError(f"merge_tol must be nonnegative, got {self.merge_tol}")
        if not self.explosion_bound > 0:
            raise ValueError("explosion_bound must be positive")
        if self.floor_multiple < 0:
            raise ValueError("floor_multiple must be nonnegative")
        if self.stall_iterations < 1:
            raise ValueError("stall_iterations must be at least 1")

    def replace(self, **changes) -> "FixedPointConfig":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True, eq=False)
class StationaryResult:
    """
    Outcome of a Picard iteration.

    Attributes:
      measure
        The last iterate, the fixed point estimate

      iterates
        Gaps W_p(μ_k, μ_{k+1}), one per application of T

      contraction_estimate
        Median ratio of successive gaps

      converged
        Whether a stopping threshold was met

      iterations_used
        Number of applications of T

      stop_reason
        ``"tol"``, ``"noise_floor"``, ``"max_iter"`` or
        ``"non_contraction"``

      noise_floor
        Noise floor of the first iterate

      threshold
        Accepted gap, ``max(tol, floor_multiple * noise_floor)``

      iterate_means
        Means of μ_0, μ_1, ...

      burn_in
        Burn-in time used for the estimates of T
    """

    measure: EmpiricalMeasure
    iterates: np.ndarray
    contraction_estimate: float
    converged: bool
    iterations_used: int
    stop_reason: StopReason
    noise_floor: float
    threshold: float
    iterate_means: np.ndarray
    burn_in: float

    def to_dict(self, measure_file: Optional[str] = None) -> Dict[str, Any]:
        return {
            "measure_file": measure_file,
            "iterates": [float(value) for value in self.iterates],
            "contraction_estimate": self.contraction_estimate,
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "stop_reason": self.stop_reason,
            "noise_floor": self.noise_floor,
            "threshold": self.threshold,
            "iterate_means": self.iterate_means.tolist(),
            "burn_in": self.burn_in,
        }


class ExponentialFit(NamedTuple):
    """
    Least-squares fit ``w(t) ≈ C_bar w(0) exp(-lambda_bar t)``.
    """

    C_bar: float
    lambda_bar: float
    r2: float


@dataclasses.dataclass(frozen=True)
class ErgodicityEstimate:
    """
    Empirical constants of ``W_p(law_t, T(μ)) <= C exp(-λ t) W_p(ν, T(μ))``.

    Attributes:
      C_hat
        Worst case over the usable starts, at least 1

      lambda_hat
        Rate of the best supported start fit (NaN when degenerate)

      fit_quality
        R² of that fit

      usable
        ``fit_quality >= threshold`` and a positive rate

      degenerate
        No start had three points above the noise floor

      per_start
        Fit per start, :data:`None` for degenerate starts

      noise_floor
        Noise floor of the estimate of T(μ)
    """

    C_hat: float
    lambda_hat: float
    fit_quality: float
    usable: bool
    degenerate: bool
    per_start: Tuple[Optional[ExponentialFit], ...]
    noise_floor: float


class StationaryDensity(NamedTuple):
    density: np.ndarray
    mean: float


class SelfConsistencyRoot(NamedTuple):
    """
    Root of ``m - mean(ρ_m)``; *stable* when the slope of the
    self-consistency map is below one there.
    """

    m: float
    stable: bool


def spread_cloud(center: np.ndarray, n: int, seed: int) -> EmpiricalMeasure:
    """
    Unit-scale cloud of *n* points around *center*.

    In one dimension the points are the standard normal
    quantiles ``Φ⁻¹((i + 1/2)/n)`` (symmetric by construction),
    otherwise Philox normals of the initial-state stream.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape[0] == 1:
        offsets = stats.norm.ppf((np.arange(n) + 0.5) / n).reshape(-1, 1)
    else:
        rng = NoiseStream(seed, STREAM_INITIAL).generator(1, 0)
        offsets = rng.standard_normal((n, center.shape[0]))
    return EmpiricalMeasure(center + offsets)


def _pool(trajectory: Trajectory, burn_in: float) -> EmpiricalMeasure:
    kept = [
        snapshot.points
        for time, snapshot in zip(trajectory.times, trajectory.snapshots)
        if time >= burn_in
    ]
    return EmpiricalMeasure(np.concatenate(kept, axis=0))


def apply_T(
    model: ModelSpec,
    mu: EmpiricalMeasure,
    cfg: SimConfig,
    burn_in: float,
    *,
    pooled: bool = False,
    init: Optional[EmpiricalMeasure] = None,
    explosion_bound: Optional[float] = 1e6,
) -> EmpiricalMeasure:
    """
    Estimate T(μ), the invariant law of the equation with the
    measure argument frozen at *mu*.

    Args:
      model: The model

      mu: Frozen measure

      cfg: Simulation parameters; the horizon must exceed *burn_in*

      burn_in: Time discarded before pooling

      pooled: Return all snapshots at times >= *burn_in* as one
        cloud instead of the terminal snapshot

      init: Initial cloud, by default a unit spread around the
        mean of *mu*

      explosion_bound: Moment bound flagging non-ergodic dynamics

    Raises:
      ConfigError: *burn_in* lies outside ``[0, horizon)``.

      NonErgodicError: The p-th moment exceeded *explosion_bound*.
    """
    if not 0 <= burn_in < cfg.horizon:
        raise ConfigError(
            f"burn_in {burn_in} must lie in [0, horizon={cfg.horizon})",
            key="fixedpoint.burn_in",
        )
    if init is None:
        init = spread_cloud(mu.mean(), cfg.n_particles, cfg.seed)
    trajectory = simulate_decoupled(model, mu, init, cfg, explosion_bound=explosion_bound)
    if pooled:
        return _pool(trajectory, burn_in)
    return trajectory.final


def default_burn_in(model: ModelSpec, mu: EmpiricalMeasure, cfg: SimConfig) -> float:
    """
    Burn-in ``10/λ`` from a small pilot ergodicity estimate,
    capped at 90% of the horizon. Falls back to half the
    horizon when the pilot fit is unusable.
    """
    pilot = cfg.replace(
        n_particles=min(cfg.n_particles, PILOT_PARTICLES),
        record_every=max(1, cfg.n_steps // 50),
        threads=1,
    )
    start = EmpiricalMeasure.dirac(mu.mean() + 3.0)
    estimate = estimate_ergodicity(model, mu, [start], pilot, burn_in=0.5 * cfg.horizon)
    if not estimate.usable:
        logger.warning("pilot ergodicity fit unusable; burn-in set to half the horizon")
        return 0.5 * cfg.horizon
    burn_in = 10.0 / estimate.lambda_hat
    if burn_in >= 0.9 * cfg.horizon:
        logger.warning(
            "horizon %g is short for the pilot rate %.3g; burn-in capped",
            cfg.horizon,
            estimate.lambda_hat,
        )
        burn_in = 0.9 * cfg.horizon
    logger.debug("pilot rate %.4g gives burn-in %.4g", estimate.lambda_hat, burn_in)
    return burn_in


def picard_solve(
    model: ModelSpec,
    mu0: EmpiricalMeasure,
    tol: Optional[float],
    max_iter: Optional[int],
    cfg: SimConfig,
    options: Optional[FixedPointConfig] = None,
    hooks: Iterable[IterationHook] = (),
) -> StationaryResult:
    """
    Iterate ``μ_{k+1} = T(μ_k)`` from *mu0*.

    The iteration stops when the gap and the geometric estimate
    ``gap r/(1-r)`` of the remaining distance (r the last gap
    ratio) are both below ``max(tol, floor_multiple * floor)``,
    where floor is the noise floor of the first iterate. It also
    stops, unconverged, after *max_iter* steps or when the gap
    ratio stays at or above one.

    Args:
      tol, max_iter: Replace the fields of *options* when not
        :data:`None`

      options: Picard options, :class:`FixedPointConfig` defaults
        when omitted

      hooks: Callables receiving ``(iteration, gap, iterate)``
        after each step

    Raises:
      ValueError: *tol* is not positive or *max_iter* is below 1.

      NonErgodicError: An estimate of T exploded.

      SimulationDiverged: A simulation produced NaN or infinity.
    """
    if options is None:
        options = FixedPointConfig()
    overrides: Dict[str, Any] = {}
    if tol is not None:
        overrides["tol"] = tol
    if max_iter is not None:
        overrides["max_iter"] = max_iter
    options = options.replace(**overrides)
    callbacks: CallbackList[IterationHook] = CallbackList(*hooks)

    burn_in = options.burn_in
    if burn_in is None:
        burn_in = default_burn_in(model, mu0, cfg) if options.pooled else 0.0
    p = cfg.p
    init = spread_cloud(mu0.mean(), cfg.n_particles, cfg.seed)

    current = mu0
    gaps: List[float] = []
    means = [mu0.mean()]
    floor = 0.0
    threshold = options.tol
    stop_reason: StopReason = "max_iter"
    converged = False

    for iteration in range(1, options.max_iter + 1):
        following = apply_T(
            model,
            current,
            cfg,
            burn_in,
            pooled=options.pooled,
            init=init,
            explosion_bound=options.explosion_bound,
        )
        gap = wasserstein(current, following, p).value
        if iteration == 1:
            floor = noise_floor(following, p, seed=cfg.seed)
            threshold = max(options.tol, options.floor_multiple * floor)
            logger.debug("noise floor %.4g, accepted gap %.4g", floor, threshold)
        gaps.append(gap)
        means.append(following.mean())
        logger.info("Picard iteration %d: gap %.6g", iteration, gap)
        callbacks(iteration, gap, following)
        current = following

        remaining = 0.0
        if len(gaps) >= 2 and gaps[-2] > 0:
            ratio = gaps[-1] / gaps[-2]
            if ratio < 1:
                remaining = gap * ratio / (1 - ratio)
        if max(gap, remaining) <= threshold:
            converged = True
            stop_reason = "tol" if max(gap, remaining) <= options.tol else "noise_floor"
            break

        stall = options.stall_iterations
        if len(gaps) > stall and all(
            gaps[-i] >= gaps[-i - 1] for i in range(1, stall + 1)
        ):
            stop_reason = "non_contraction"
            logger.warning("Picard gaps stopped decreasing after %d iterations", iteration)
            break

    ratios = [after / before for before, after in zip(gaps, gaps[1:]) if before > 0]
    contraction = float(np.median(ratios)) if ratios else 0.0
    if not converged and stop_reason == "max_iter":
        logger.warning(
            "Picard iteration reached max_iter=%d, last gap %.4g", options.max_iter, gaps[-1]
        )

    return StationaryResult(
        measure=current,
        iterates=np.array(gaps),
        contraction_estimate=contraction,
        converged=converged,
        iterations_used=len(gaps),
        stop_reason=stop_reason,
        noise_floor=floor,
        threshold=threshold,
        iterate_means=np.array(means),
        burn_in=burn_in,
    )


def estimate_contraction(
    model: ModelSpec,
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    cfg: SimConfig,
    burn_in: float = 0.0,
) -> float:
    """
    Empirical ratio ``W_p(T(μ), T(ν)) / W_p(μ, ν)``.

    Both estimates of T share the noise seed and the initial
    cloud (common random numbers).

    Raises:
      DegenerateInputError: W_p(μ, ν) is below ten times the
        noise floor of the inputs.
    """
    p = cfg.p
    distance = wasserstein(mu, nu, p).value
    floor = max(noise_floor(mu, p, seed=cfg.seed), noise_floor(nu, p, seed=cfg.seed))
    if distance <= 0 or distance < 10 * floor:
        raise DegenerateInputError(
            "input distance is indistinguishable from sampling noise",
            distance=distance,
            noise_floor=floor,
        )
    center = 0.5 * (mu.mean() + nu.mean())
    init = spread_cloud(center, cfg.n_particles, cfg.seed)
    image_mu = apply_T(model, mu, cfg, burn_in, init=init)
    image_nu = apply_T(model, nu, cfg, burn_in, init=init)
    ratio = wasserstein(image_mu, image_nu, p).value / distance
    logger.info("contraction ratio %.4g at input distance %.4g", ratio, distance)
    return ratio


def fit_exponential_rate(
    series: Union[np.ndarray, Sequence[Tuple[float, float]]], floor: float = 0.0
) -> ExponentialFit:
    """
    Fit ``log w = log(C_bar w(0)) - lambda_bar t`` by least squares.

    Only the leading points with ``w > floor`` are used, the
    window before the series reaches the noise floor; ``w(0)``
    is the first value of *series*.

    Raises:
      DegenerateInputError: Fewer than three points lie above
        *floor*.
    """
    data = np.asarray(series, dtype=float).reshape(-1, 2)
    times, values = data[:, 0], data[:, 1]
    below = np.nonzero(~(values > floor))[0]
    stop = int(below[0]) if below.size else len(values)
    if stop < 3:
        raise DegenerateInputError(
            "fewer than three points above the noise floor", points=stop, floor=floor
        )
    fit = stats.linregress(times[:stop], np.log(values[:stop]))
    return ExponentialFit(
        C_bar=float(np.exp(fit.intercept) / values[0]),
        lambda_bar=float(-fit.slope),
        r2=float(fit.rvalue ** 2),
    )


def estimate_ergodicity(
    model: ModelSpec,
    frozen_mu: EmpiricalMeasure,
    starts: Sequence[EmpiricalMeasure],
    cfg: SimConfig,
    burn_in: float = 0.0,
    threshold: float = FIT_THRESHOLD,
) -> ErgodicityEstimate:
    """
    Estimate the constants of exponential ergodicity of the
    dynamics frozen at *frozen_mu*.

    Each start is evolved with its own noise seed; the distance
    to the estimate of T(μ) is fitted over the window above
    three noise floors.
    """
    if not starts:
        raise ValueError("at least one start is required")
    p = cfg.p
    target = apply_T(model, frozen_mu, cfg, burn_in)
    floor = noise_floor(target, p, seed=cfg.seed)

    fits: List[Optional[ExponentialFit]] = []
    for index, start in enumerate(starts):
        run_cfg = cfg.replace(seed=(cfg.seed + index + 1) % 2 ** 64)
        trajectory = simulate_decoupled(model, frozen_mu, start, run_cfg, reference=target)
        series = np.column_stack([trajectory.times, trajectory.summaries.wp_to_ref])
        try:
            fits.append(fit_exponential_rate(series, 3 * floor))
        except DegenerateInputError:
            logger.debug("start %d never left the noise floor", index)
            fits.append(None)

    valid = [fit for fit in fits if fit is not None]
    if not valid:
        return ErgodicityEstimate(
            C_hat=1.0,
            lambda_hat=float("nan"),
            fit_quality=0.0,
            usable=False,
            degenerate=True,
            per_start=tuple(fits),
            noise_floor=floor,
        )

    best = max(valid, key=lambda fit: fit.r2)
    usable_fits = [fit for fit in valid if fit.r2 >= threshold and fit.lambda_bar > 0]
    usable = best.r2 >= threshold and best.lambda_bar > 0
    C_hat = max([1.0] + [fit.C_bar for fit in (usable_fits or valid)])
    if not usable:
        logger.warning("ergodicity fit unusable: R² = %.3f", best.r2)
    return ErgodicityEstimate(
        C_hat=float(C_hat),
        lambda_hat=best.lambda_bar,
        fit_quality=best.r2,
        usable=usable,
        degenerate=False,
        per_start=tuple(fits),
        noise_floor=floor,
    )


def measure_convergence(
    model: ModelSpec,
    mu0: EmpiricalMeasure,
    mu_bar: EmpiricalMeasure,
    cfg: SimConfig,
) -> Trajectory:
    """
    Simulate the interacting system from *mu0*, recording the
    W_p distance of every snapshot to *mu_bar*.
    """
    return simulate_mv(model, mu0, cfg, reference=mu_bar)


def _cumulative(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    if len(grid) < 3:
        return integrate.cumulative_trapezoid(values, x=grid, initial=0.0)
    return integrate.cumulative_simpson(values, x=grid, initial=0.0)


def stationary_density_1d(
    model: ModelSpec, mu: EmpiricalMeasure, grid: Union[np.ndarray, Sequence[float]]
) -> StationaryDensity:
    """
    Invariant density ``ρ ∝ exp((2/σ²) ∫₀^x b(y, μ) dy)`` of a
    one dimensional diffusion with σ constant in x.

    The potential is integrated outward from the grid point
    closest to zero, so odd drifts on symmetric grids give
    exactly even densities.

    Raises:
      ModelError: The model is not one dimensional.

      DegenerateInputError: σ varies in x, vanishes, or the
        density does not decay at the ends of the grid.
    """
    if model.dim != 1:
        raise ModelError(f"stationary_density_1d needs d=1, model has d={model.dim}")
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if len(grid) < 3 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least three points")

    summary = summarize(mu, model.measure_features)
    points = grid.reshape(-1, 1)
    sigma = np.asarray(model.diffusion(points, summary), dtype=float)[:, 0, 0]
    if np.max(np.abs(sigma - sigma[0])) > SIGMA_TOLERANCE:
        raise DegenerateInputError("diffusion coefficient varies in x")
    if sigma[0] == 0:
        raise DegenerateInputError("diffusion coefficient vanishes")
    drift = np.asarray(model.drift(points, summary), dtype=float)[:, 0]

    anchor = int(np.argmin(np.abs(grid)))
    right = _cumulative(drift[anchor:], grid[anchor:])
    left = -_cumulative(drift[anchor::-1], -grid[anchor::-1])[::-1]
    potential = np.concatenate([left[:-1], right])

    exponent = 2.0 * potential / sigma[0] ** 2
    density = np.exp(exponent - exponent.max())
    if density[0] > TAIL_TOLERANCE or density[-1] > TAIL_TOLERANCE:
        raise DegenerateInputError(
            "density is not normalizable on the grid",
            left=float(density[0]),
            right=float(density[-1]),
        )
    density /= integrate.simpson(density, x=grid)
    mean = float(integrate.simpson(grid * density, x=grid))
    return StationaryDensity(density, mean)


def sample_density_1d(
    grid: Union[np.ndarray, Sequence[float]], density: np.ndarray, n: int
) -> EmpiricalMeasure:
    """
    Deterministic *n* point sample of a tabulated density:
    the inverse CDF at ``(i + 1/2)/n``.
    """
    grid = np.asarray(grid, dtype=float)
    cdf = integrate.cumulative_trapezoid(density, x=grid, initial=0.0)
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    quantiles = (np.arange(n) + 0.5) / n
    return EmpiricalMeasure(np.interp(quantiles, cdf[keep], grid[keep]))


def self_consistency_roots(
    model: ModelSpec,
    m_grid: Union[np.ndarray, Sequence[float]],
    x_grid: Union[np.ndarray, Sequence[float]],
) -> List[SelfConsistencyRoot]:
    """
    Roots of ``m - mean(ρ_m)`` for a one dimensional model whose
    measure dependence is through the mean only, ρ_m being the
    stationary density with the measure frozen at the point
    mass at m.

    Sign changes on *m_grid* are refined with Brent's method.
    """

    def residual(m: float) -> float:
        frozen = EmpiricalMeasure.dirac(m)
        return m - stationary_density_1d(model, frozen, x_grid).mean

    m_grid = np.asarray(m_grid, dtype=float)
    values = [residual(m) for m in m_grid]
    roots: List[float] = []
    for (a, fa), (b, fb) in zip(zip(m_grid, values), zip(m_grid[1:], values[1:])):
        if fa == 0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(float(optimize.brentq(residual, a, b, xtol=1e-12)))
    if values and values[-1] == 0:
        roots.append(float(m_grid[-1]))

    result = []
    for root in roots:
        step = 1e-4 * max(1.0, abs(root))
        slope = (residual(root + step) - residual(root - step)) / (2 * step)
        result.append(SelfConsistencyRoot(root, bool(slope > 0)))
    return result


@dataclasses.dataclass(frozen=True, eq=False)
class PhaseCell:
    """
    Fixed points found at one parameter value.

    Attributes:
      value
        Parameter value

      results
        Picard result per start, :data:`None` when it failed

      errors
        Error message per failed start index

      merge_tol
        Merge tolerance used for the clustering

      clusters
        Start indices per group of merged fixed points

      distances
        Pairwise W_p between the successful results
    """

    value: float
    results: Tuple[Optional[StationaryResult], ...]
    errors: Dict[int, str]
    merge_tol: float
    clusters: Tuple[Tuple[int, ...], ...]
    distances: np.ndarray

    @property
    def multiplicity(self) -> int:
        return len(self.clusters)

    @property
    def means(self) -> np.ndarray:
        return np.array(
            [result.measure.mean() for result in self.results if result is not None]
        )

    def cluster_means(self) -> np.ndarray:
        return np.array(
            [
                np.mean([self.results[index].measure.mean() for index in cluster], axis=0)
                for cluster in self.clusters
            ]
        )


@dataclasses.dataclass(frozen=True, eq=False)
class PhaseScanReport:
    """
    Multiplicity of stationary states along a parameter grid.

    Attributes:
      parameter
        Name of the scanned parameter

      parameter_grid
        Scanned values

      cells
        One :class:`PhaseCell` per value
    """

    parameter: str
    parameter_grid: np.ndarray
    cells: Tuple[PhaseCell, ...]

    @property
    def multiplicity(self) -> np.ndarray:
        return np.array([cell.multiplicity for cell in self.cells], dtype=int)

    @property
    def fixed_points_per_value(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        return [(cell.means, cell.distances) for cell in self.cells]

    def to_csv(self, file: Union[str, os.PathLike, TextIO]):
        """
        Write ``param_value, start_id, fixed_point_mean_1.., multiplicity``
        rows for every successful start.
        """
        rows = []
        dim = 1
        for cell in self.cells:
            for start_id, result in enumerate(cell.results):
                if result is None:
                    continue
                mean = result.measure.mean()
                dim = mean.shape[0]
                rows.append([cell.value, start_id, *mean, cell.multiplicity])
        header = (
            ["param_value", "start_id"]
            + [f"fixed_point_mean_{i + 1}" for i in range(dim)]
            + ["multiplicity"]
        )
        data = np.array(rows, dtype=float).reshape(-1, len(header))
        np.savetxt(
            file, data, fmt="%.17g", delimiter=",", header=",".join(header), comments=""
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parameter": self.parameter,
            "parameter_grid": self.parameter_grid.tolist(),
            "multiplicity": self.multiplicity.tolist(),
            "cells": [
                {
                    "value": cell.value,
                    "merge_tol": cell.merge_tol,
                    "clusters": [list(cluster) for cluster in cell.clusters],
                    "cluster_means": cell.cluster_means().tolist(),
                    "distances": cell.distances.tolist(),
                    "errors": {str(key): value for key, value in cell.errors.items()},
                    "results": [
                        None if result is None else result.to_dict()
                        for result in cell.results
                    ],
                }
                for cell in self.cells
            ],
        }


def _cluster_cell(
    value: float,
    results: List[Optional[StationaryResult]],
    errors: Dict[int, str],
    merge_tol: Optional[float],
    p: float,
) -> PhaseCell:
    floors = [result.noise_floor for result in results if result is not None]
    if merge_tol is None:
        merge_tol = 5.0 * max(floors, default=0.0)
    graph = FixedPointGraph(merge_tol, p)
    for start_id, result in enumerate(results):
        if result is not None:
            graph.add_fixed_point(FixedPointNode(start_id, result.measure, result.converged))
    clusters = tuple(
        tuple(node.start_id for node in cluster) for cluster in graph.clusters()
    )
    return PhaseCell(
        value=float(value),
        results=tuple(results),
        errors=errors,
        merge_tol=merge_tol,
        clusters=clusters,
        distances=graph.distance_matrix(),
    )


def _build_model(
    model_family: Callable[[float], ModelSpec], name: str, value: float
) -> Union[ModelSpec, MVLabError]:
    try:
        return model_family(value)
    except MVLabError as exc:
        error: MVLabError = exc
    except (TypeError, ValueError) as exc:
        error = ModelError(str(exc), parameter=name, value=value)
    logger.warning("phase scan: no model for %s=%g: %s", name, value, error)
    return error


def phase_scan(
    model_family: Callable[[float], ModelSpec],
    param: Tuple[str, Sequence[float]],
    starts: Sequence[EmpiricalMeasure],
    cfg: SimConfig,
    merge_tol: Optional[float] = None,
    options: Optional[FixedPointConfig] = None,
    threads: int = 1,
) -> PhaseScanReport:
    """
    Count stationary states along a parameter grid.

    For every value the Picard iteration runs from every start;
    results closer than *merge_tol* (default five noise floors)
    are merged and the number of groups is the multiplicity.
    Each run is held to one noise floor, so runs reaching the
    same state land within the merge tolerance.

    Args:
      model_family: Builds the model for a parameter value

      param: Parameter name and grid

      threads: Worker threads over (value, start) pairs; results
        do not depend on it

    Failures of individual runs are recorded in their cell.
    """
    name, grid = param
    if len(starts) < 2:
        raise ValueError("phase_scan needs at least two starts")
    if options is None:
        options = FixedPointConfig()
    options = options.replace(floor_multiple=min(options.floor_multiple, 1.0))
    if merge_tol is None:
        merge_tol = options.merge_tol
    run_cfg = cfg.replace(threads=1) if threads > 1 else cfg

    values = [float(value) for value in grid]
    models = [_build_model(model_family, name, value) for value in values]
    jobs = [(cell, start) for cell in range(len(values)) for start in range(len(starts))]

    def run(job: Tuple[int, int]) -> Union[StationaryResult, MVLabError]:
        cell, start = job
        model = models[cell]
        if isinstance(model, MVLabError):
            return model
        logger.info("phase scan: %s=%g, start %d", name, values[cell], start)
        try:
            return picard_solve(model, starts[start], None, None, run_cfg, options)
        except MVLabError as exc:
            logger.warning(
                "phase scan: %s=%g, start %d failed: %s", name, values[cell], start, exc
            )
            return exc

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
            outcomes = list(executor.map(run, jobs))
    else:
        outcomes = [run(job) for job in jobs]

    cells = []
    for cell, value in enumerate(values):
        results: List[Optional[StationaryResult]] = []
        errors: Dict[int, str] = {}
        for start in range(len(starts)):
            outcome = outcomes[cell * len(starts) + start]
            if isinstance(outcome, StationaryResult):
                results.append(outcome)
            else:
                results.append(None)
                errors[start] = f"{type(outcome).__name__}: {outcome}"
        cells.append(_cluster_cell(value, results, errors, merge_tol, cfg.p))

    return PhaseScanReport(name, np.array(values), tuple(cells))
