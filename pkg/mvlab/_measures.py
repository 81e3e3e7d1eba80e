"""
Measure types and Wasserstein distance estimators.

Three estimators of W_p are provided, ordered from exact to
approximate: the 1-D quantile coupling, optimal assignment for
uniform clouds of equal size, and debiased entropic transport.
:func:`wasserstein` picks the most accurate applicable one and
records which estimator produced the value.
"""
import dataclasses
import io
import logging
import math
import os
import warnings
from typing import Callable, List, Optional, TextIO, Union

import numpy as np
import ot
from scipy import linalg
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from typing_extensions import Literal

from ._errors import ConvergenceError, MeasureError

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-12
DEFAULT_ASSIGNMENT_CAP = 512
DEFAULT_SINKHORN_CAP = 2048
SCALING_STAGE_ITERATIONS = 100
AUTO_SINKHORN_ITERATIONS = 100_000

EstimatorName = Literal[
    "1d", "point_mass", "assignment", "sinkhorn", "sinkhorn_subsampled"
]
MethodName = Literal["auto", "1d", "assignment", "sinkhorn"]

_FLAG_WEIGHTS = 1


@dataclasses.dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """
    A weighted point cloud in R^d.

    Attributes:
      points
        Array of shape ``(N, d)``

      weights
        Array of shape ``(N,)``, nonnegative and summing to one.
        Defaults to uniform weights.
    """

    points: np.ndarray
    weights: np.ndarray = None  # type: ignore

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise MeasureError(
                f"points must have shape (N, d) with N, d >= 1, got {points.shape}"
            )
        if not np.all(np.isfinite(points)):
            raise MeasureError("points must be finite")

        n = points.shape[0]
        if self.weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.array(self.weights, dtype=float).reshape(-1)
            if weights.shape != (n,):
                raise MeasureError(
                    f"expected {n} weights, got {weights.shape[0]}", n=n
                )
            if np.any(weights < 0) or not np.all(np.isfinite(weights)):
                raise MeasureError("weights must be finite and nonnegative")
            total = float(weights.sum())
            if abs(total - 1.0) > WEIGHT_TOLERANCE:
                raise MeasureError(f"weights sum to {total!r}, not 1", total=total)

        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, point) -> "EmpiricalMeasure":
        """
        Return the point mass at *point* (a scalar is a 1-D point).
        """
        return cls(np.atleast_1d(np.asarray(point, dtype=float)).reshape(1, -1))

    @classmethod
    def sample_gaussian(
        cls, gaussian: "GaussianMeasure", n: int, seed: int = 0
    ) -> "EmpiricalMeasure":
        """
        Draw an *n* point uniform cloud from *gaussian*.
        """
        rng = np.random.Generator(np.random.Philox(seed))
        return cls(rng.multivariate_normal(gaussian.mean, gaussian.covariance, size=n))

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(np.abs(self.weights - 1.0 / self.n) <= WEIGHT_TOLERANCE))

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def covariance(self) -> np.ndarray:
        centered = self.points - self.mean()
        return (centered * self.weights[:, None]).T @ centered

    def reflect(self) -> "EmpiricalMeasure":
        """
        Push-forward by ``x -> -x``.
        """
        return EmpiricalMeasure(-self.points, self.weights)

    def resample(self, n: int, rng: np.random.Generator) -> "EmpiricalMeasure":
        """
        Draw an *n* point uniform cloud from this measure.
        """
        index = rng.choice(self.n, size=n, replace=True, p=self.weights)
        return EmpiricalMeasure(self.points[index])

    def to_csv(self, file: Union[str, os.PathLike, TextIO], weights: bool = None):
        """
        Write the measure as CSV, one point per row.

        Doubles are written with 17 significant digits so that
        reading the file back is exact.

        Args:
          file: Path or text stream

          weights: Include a weight column. Defaults to
            including it only for non-uniform measures.
        """
        if weights is None:
            weights = not self.is_uniform
        header = [f"x_{i + 1}" for i in range(self.dim)]
        data = self.points
        if weights:
            header.append("weight")
            data = np.column_stack([self.points, self.weights])
        np.savetxt(
            file, data, fmt="%.17g", delimiter=",", header=",".join(header), comments=""
        )

    @classmethod
    def from_csv(cls, file: Union[str, os.PathLike, TextIO]) -> "EmpiricalMeasure":
        """
        Read a measure written by :meth:`to_csv`.
        """
        if isinstance(file, (str, os.PathLike)):
            with open(file) as stream:
                return cls.from_csv(stream)

        header = file.readline().strip().split(",")
        data = np.loadtxt(file, delimiter=",", ndmin=2)
        if data.shape[1] != len(header):
            raise MeasureError(
                f"CSV has {data.shape[1]} columns but the header names {len(header)}"
            )
        if header[-1] == "weight":
            return cls(data[:, :-1], data[:, -1])
        return cls(data)

    def to_binary(self) -> bytes:
        """
        Serialize to the compact binary form: a little-endian
        ``uint64`` header ``(N, d, flags)`` followed by the
        points as row-major little-endian doubles and, when
        flag bit 0 is set, the weights.
        """
        flags = 0 if self.is_uniform else _FLAG_WEIGHTS
        buf = io.BytesIO()
        buf.write(np.array([self.n, self.dim, flags], dtype="<u8").tobytes())
        buf.write(np.ascontiguousarray(self.points, dtype="<f8").tobytes())
        if flags & _FLAG_WEIGHTS:
            buf.write(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_binary(cls, data: bytes) -> "EmpiricalMeasure":
        if len(data) < 24:
            raise MeasureError("truncated binary measure header")
        n, dim, flags = (int(v) for v in np.frombuffer(data, dtype="<u8", count=3))
        expected = 24 + 8 * n * dim + (8 * n if flags & _FLAG_WEIGHTS else 0)
        if len(data) != expected:
            raise MeasureError(
                f"binary measure has {len(data)} bytes, expected {expected}"
            )
        points = np.frombuffer(data, dtype="<f8", count=n * dim, offset=24)
        weights = None
        if flags & _FLAG_WEIGHTS:
            weights = np.frombuffer(data, dtype="<f8", count=n, offset=24 + 8 * n * dim)
        return cls(points.reshape(n, dim).astype(float), weights)


@dataclasses.dataclass(frozen=True, eq=False)
class GaussianMeasure:
    """
    A Gaussian measure N(mean, covariance).

    Scalars are accepted for the one dimensional case.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        covariance = np.atleast_2d(np.array(self.covariance, dtype=float))
        if mean.ndim != 1 or covariance.shape != (mean.shape[0], mean.shape[0]):
            raise MeasureError(
                f"covariance shape {covariance.shape} does not match mean "
                f"shape {mean.shape}"
            )
        if np.max(np.abs(covariance - covariance.T)) > 1e-12:
            raise MeasureError("covariance is not symmetric")
        if np.min(np.linalg.eigvalsh(covariance)) < -1e-12:
            raise MeasureError("covariance is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", covariance)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


@dataclasses.dataclass(frozen=True)
class WassersteinEstimate:
    """
    A W_p value together with the estimator that produced it.
    """

    value: float
    estimator: EstimatorName


def _check_pair(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float):
    if p < 1:
        raise MeasureError(f"Wasserstein order must be >= 1, got {p}")
    if mu.dim != nu.dim:
        raise MeasureError(f"dimension mismatch: {mu.dim} != {nu.dim}")


def wasserstein_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float) -> float:
    """
    Exact W_p between one dimensional measures using the
    quantile (monotone) coupling.

    Ties are broken by a stable sort on the input index.

    Raises:
      MeasureError: The measures are not one dimensional.
    """
    _check_pair(mu, nu, p)
    if mu.dim != 1:
        raise MeasureError(f"wasserstein_1d requires d=1, got d={mu.dim}")

    x_order = np.argsort(mu.points[:, 0], kind="stable")
    y_order = np.argsort(nu.points[:, 0], kind="stable")
    x = mu.points[x_order, 0]
    y = nu.points[y_order, 0]

    if mu.n == nu.n and mu.is_uniform and nu.is_uniform:
        cost = np.mean(np.abs(x - y) ** p)
        return float(cost ** (1.0 / p))

    cx = np.cumsum(mu.weights[x_order])
    cy = np.cumsum(nu.weights[y_order])
    cx[-1] = cy[-1] = 1.0

    levels = np.concatenate(([0.0], np.union1d(cx, cy)))
    widths = np.diff(levels)
    mids = 0.5 * (levels[:-1] + levels[1:])
    ix = np.minimum(np.searchsorted(cx, mids, side="left"), mu.n - 1)
    iy = np.minimum(np.searchsorted(cy, mids, side="left"), nu.n - 1)
    cost = np.sum(widths * np.abs(x[ix] - y[iy]) ** p)
    return float(max(cost, 0.0) ** (1.0 / p))


def wasserstein_assignment(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    p: float,
    cap: int = DEFAULT_ASSIGNMENT_CAP,
) -> float:
    """
    Exact W_p between uniform clouds of equal size, by
    optimal assignment on the cost matrix ``|x_i - y_j|^p``.

    Raises:
      MeasureError: Sizes differ, weights are not uniform
        or the cloud size exceeds *cap*.
    """
    _check_pair(mu, nu, p)
    if mu.n != nu.n:
        raise MeasureError(f"assignment requires equal sizes: {mu.n} != {nu.n}")
    if mu.n > cap:
        raise MeasureError(f"cloud size {mu.n} exceeds the assignment cap {cap}")
    if not (mu.is_uniform and nu.is_uniform):
        raise MeasureError("assignment requires uniform weights")

    cost = cdist(mu.points, nu.points) ** p
    rows, cols = linear_sum_assignment(cost)
    return float(np.mean(cost[rows, cols]) ** (1.0 / p))


def wasserstein_lp(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    p: float,
    cap: int = DEFAULT_ASSIGNMENT_CAP,
) -> float:
    """
    Exact W_p between weighted clouds of any sizes, by the
    transport linear program.

    A point mass admits only the product coupling, so when
    either measure has a single atom the value is computed in
    closed form.

    Raises:
      MeasureError: Either cloud exceeds *cap* atoms.
    """
    _check_pair(mu, nu, p)
    if mu.n == 1 or nu.n == 1:
        cost = cdist(mu.points, nu.points) ** p
        return float(np.sum(np.outer(mu.weights, nu.weights) * cost) ** (1.0 / p))
    if max(mu.n, nu.n) > cap:
        raise MeasureError(f"cloud size {max(mu.n, nu.n)} exceeds the LP cap {cap}")

    cost = cdist(mu.points, nu.points) ** p
    value = ot.emd2(mu.weights, nu.weights, cost)
    return float(max(float(value), 0.0) ** (1.0 / p))


def _regularization_ladder(cost: np.ndarray, reg: float) -> List[float]:
    # halving steps from the largest cost down to (excluding) reg
    scale = float(np.max(cost)) if cost.size else 0.0
    if not scale > 2 * reg:
        return []
    levels = int(math.ceil(math.log2(scale / reg)))
    return [reg * 2.0 ** k for k in range(levels, 0, -1)]


def _entropic_transport_cost(
    a: np.ndarray, b: np.ndarray, cost: np.ndarray, reg: float, max_iter: int, tol: float
) -> float:
    """
    Transport cost of the entropic plan, solved by epsilon scaling.

    Each rung of the regularization ladder runs a short
    stabilized Sinkhorn solve warm-started from the dual
    potentials of the previous rung; the final solve at *reg*
    gets *max_iter* iterations and must reach *tol*.
    """
    warmstart = None
    iterations = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for stage_reg in _regularization_ladder(cost, reg):
            _, log = ot.bregman.sinkhorn_stabilized(
                a,
                b,
                cost,
                stage_reg,
                numItermax=SCALING_STAGE_ITERATIONS,
                stopThr=tol,
                warmstart=warmstart,
                log=True,
                warn=False,
            )
            warmstart = log["warmstart"]
            iterations += int(log.get("n_iter", SCALING_STAGE_ITERATIONS)) + 1

        plan, log = ot.bregman.sinkhorn_stabilized(
            a,
            b,
            cost,
            reg,
            numItermax=max_iter,
            stopThr=tol,
            warmstart=warmstart,
            log=True,
            warn=False,
        )
    iterations += int(log.get("n_iter", max_iter)) + 1
    residual = float(log["err"][-1]) if log["err"] else float("inf")
    if not residual < tol or not np.all(np.isfinite(plan)):
        raise ConvergenceError(
            f"Sinkhorn did not converge: marginal violation {residual:.3g} "
            f"after {max_iter} iterations",
            residual=residual,
            iterations=iterations,
        )
    logger.debug("sinkhorn converged in %d iterations", iterations)
    return float(np.sum(plan * cost))


def wasserstein_sinkhorn(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    p: float,
    reg: float,
    max_iter: int = 10_000,
    tol: float = 1e-9,
) -> float:
    """
    Debiased entropic estimate of W_p.

    The transport cost of the entropic plan between *mu* and
    *nu* is corrected by half the self-transport costs of both
    measures. The remaining bias is of order ``reg * log(N)``
    and can have either sign; the corrected cost is clipped at
    zero before taking the p-th root.

    Args:
      reg: Entropic regularization, in units of the cost ``|x-y|^p``

      max_iter: Iteration limit at the final regularization of
        each Sinkhorn solve, after the epsilon scaling ladder

      tol: Required marginal violation

    Raises:
      ConvergenceError: A Sinkhorn solve did not reach *tol*
        within *max_iter* iterations.
    """
    _check_pair(mu, nu, p)
    if not reg > 0:
        raise MeasureError(f"regularization must be positive, got {reg}")

    def transport(first, second):
        cost = cdist(first.points, second.points) ** p
        return _entropic_transport_cost(
            first.weights, second.weights, cost, reg, max_iter, tol
        )

    cross = transport(mu, nu)
    debiased = cross - 0.5 * (transport(mu, mu) + transport(nu, nu))
    return float(max(debiased, 0.0) ** (1.0 / p))


def median_cost(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float) -> float:
    """
    Median entry of the cost matrix ``|x_i - y_j|^p``.
    """
    return float(np.median(cdist(mu.points, nu.points) ** p))


def wasserstein(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    p: float,
    method: MethodName = "auto",
    *,
    cap: int = DEFAULT_ASSIGNMENT_CAP,
    reg: Optional[float] = None,
    sinkhorn_cap: int = DEFAULT_SINKHORN_CAP,
) -> WassersteinEstimate:
    """
    Estimate W_p with the most accurate applicable estimator.

    With *method* ``"auto"`` one dimensional inputs use the
    quantile coupling, point masses the product coupling,
    uniform equal-size clouds up to *cap* points use
    assignment and everything else uses Sinkhorn
    with *reg* defaulting to ``1e-2`` times the median cost.
    The Sinkhorn solve gets :data:`AUTO_SINKHORN_ITERATIONS`
    iterations at the final regularization. Clouds larger
    than *sinkhorn_cap* are resampled (with a fixed seed)
    before the Sinkhorn solve, which is reported as estimator
    ``"sinkhorn_subsampled"``.
    """
    if method == "1d" or (method == "auto" and mu.dim == 1):
        return WassersteinEstimate(wasserstein_1d(mu, nu, p), "1d")

    if method == "auto" and min(mu.n, nu.n) == 1:
        return WassersteinEstimate(wasserstein_lp(mu, nu, p), "point_mass")

    if method == "assignment" or (
        method == "auto"
        and mu.n == nu.n
        and mu.n <= cap
        and mu.is_uniform
        and nu.is_uniform
    ):
        return WassersteinEstimate(wasserstein_assignment(mu, nu, p, cap), "assignment")

    if method not in ("auto", "sinkhorn"):
        raise MeasureError(f"unknown Wasserstein method {method!r}")

    estimator: EstimatorName = "sinkhorn"
    if max(mu.n, nu.n) > sinkhorn_cap:
        rng = np.random.Generator(np.random.Philox(0))
        mu = mu.resample(min(mu.n, sinkhorn_cap), rng)
        nu = nu.resample(min(nu.n, sinkhorn_cap), rng)
        estimator = "sinkhorn_subsampled"
    if reg is None:
        reg = 1e-2 * median_cost(mu, nu, p)
        if reg <= 0:
            return WassersteinEstimate(0.0, estimator)
    value = wasserstein_sinkhorn(mu, nu, p, reg, max_iter=AUTO_SINKHORN_ITERATIONS)
    return WassersteinEstimate(value, estimator)


def gaussian_w2(g1: GaussianMeasure, g2: GaussianMeasure) -> float:
    """
    Closed-form W_2 between Gaussian measures (Bures–Wasserstein).
    """
    if g1.dim != g2.dim:
        raise MeasureError(f"dimension mismatch: {g1.dim} != {g2.dim}")
    shift = float(np.sum((g1.mean - g2.mean) ** 2))

    if g1.dim == 1:
        s1 = np.sqrt(g1.covariance[0, 0])
        s2 = np.sqrt(g2.covariance[0, 0])
        return float(np.sqrt(shift + (s1 - s2) ** 2))

    root2 = np.real(linalg.sqrtm(g2.covariance))
    cross = np.real(linalg.sqrtm(root2 @ g1.covariance @ root2))
    trace = np.trace(g1.covariance + g2.covariance - 2 * cross)
    return float(np.sqrt(max(shift + trace, 0.0)))


def gaussian_kl(g1: GaussianMeasure, g2: GaussianMeasure) -> float:
    """
    Relative entropy H(g1 | g2) of two Gaussian measures.

    Returns ``inf`` when *g1* is degenerate and *g2* is not.

    Raises:
      MeasureError: The covariance of *g2* is singular.
    """
    if g1.dim != g2.dim:
        raise MeasureError(f"dimension mismatch: {g1.dim} != {g2.dim}")
    sign2, logdet2 = np.linalg.slogdet(g2.covariance)
    if sign2 <= 0 or not np.isfinite(logdet2):
        raise MeasureError("covariance of the reference Gaussian is singular")
    sign1, logdet1 = np.linalg.slogdet(g1.covariance)
    if sign1 <= 0:
        return float("inf")

    diff = g2.mean - g1.mean
    trace = np.trace(np.linalg.solve(g2.covariance, g1.covariance))
    quad = float(diff @ np.linalg.solve(g2.covariance, diff))
    value = 0.5 * (trace + quad - g1.dim + logdet2 - logdet1)
    return float(max(value, 0.0))


def pth_moment(mu: EmpiricalMeasure, p: float) -> float:
    """
    The moment norm ``(sum_i w_i |x_i|^p)^(1/p)``.
    """
    if p < 1:
        raise MeasureError(f"moment order must be >= 1, got {p}")
    norms = np.linalg.norm(mu.points, axis=1)
    return float((mu.weights @ norms ** p) ** (1.0 / p))


def noise_floor(
    measure: EmpiricalMeasure,
    p: float,
    n_pairs: int = 4,
    seed: int = 0,
    method: MethodName = "auto",
) -> float:
    """
    Mean W_p between independent resamples of *measure*.

    This is the resolution limit of empirical distance
    statements at the sample size of *measure*.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    values = [
        wasserstein(
            measure.resample(measure.n, rng), measure.resample(measure.n, rng), p, method
        ).value
        for _ in range(n_pairs)
    ]
    return float(np.mean(values))


def bootstrap_se(
    samples: np.ndarray,
    statistic: Callable[[np.ndarray], float] = np.mean,
    n_boot: int = 200,
    seed: int = 0,
) -> float:
    """
    Bootstrap standard error of *statistic* over the rows of *samples*.
    """
    samples = np.asarray(samples)
    rng = np.random.Generator(np.random.Philox(seed))
    replicates = [
        statistic(samples[rng.integers(0, len(samples), size=len(samples))])
        for _ in range(n_boot)
    ]
    return float(np.std(replicates, ddof=1))
