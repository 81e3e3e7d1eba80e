"""
Suprema, infima and thresholds over open, unbounded domains.

The rate formulas take sup/inf over sets such as ``t > t0`` or
``m > m0``. These helpers search log-spaced offsets from the
open end of each interval, refine the best grid point (golden
section in one dimension, bounded Nelder–Mead in two), compare
against limits supplied by the caller, and report where the
extremum sits together with the values of the last two grid
levels.
"""
import dataclasses
import logging
import math
import warnings
from typing import Callable, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

logger = logging.getLogger(__name__)

REFINEMENT_TOLERANCE = 1e-3
DEFAULT_POINTS = 200
DEFAULT_POINTS_2D = 16


@dataclasses.dataclass(frozen=True)
class Extremum:
    """
    Location and value of a numerical supremum or infimum.

    Attributes:
      value
        The extremal value, including boundary limits

      location
        Coordinates attaining *value*; ``inf`` for limits at
        infinity

      boundary
        :data:`None` for interior extrema, otherwise the side
        (``"lower"``, ``"upper"`` or ``"box"``) that dominates

      refinement
        Values found with the coarse and the fine grid
    """

    value: float
    location: Tuple[float, ...]
    boundary: Optional[str]
    refinement: Tuple[float, float]

    @property
    def certified(self) -> bool:
        coarse, fine = self.refinement
        if coarse == fine:
            return True
        scale = max(abs(coarse), abs(fine))
        return bool(abs(fine - coarse) <= REFINEMENT_TOLERANCE * scale)


class Axis(NamedTuple):
    """
    Coordinate ``x = origin + exp(s)`` with ``s`` between
    ``log(low)`` and ``log(high)``.
    """

    origin: float
    low: float
    high: float

    @property
    def bounds(self) -> Tuple[float, float]:
        return (math.log(self.low), math.log(self.high))

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(*self.bounds, n)

    def point(self, s: float) -> float:
        return self.origin + math.exp(s)


def _safe(function: Callable[..., float]) -> Callable[..., float]:
    def evaluate(*args: float) -> float:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            value = float(function(*args))
        return value if not math.isnan(value) else -math.inf

    return evaluate


def _scan_1d(
    f: Callable[[float], float], axis: Axis, n: int
) -> Tuple[float, float, int]:
    grid = axis.grid(n)
    values = np.array([f(axis.point(s)) for s in grid])
    index = int(np.argmax(values))
    best_s, best = float(grid[index]), float(values[index])
    if 0 < index < n - 1 and math.isfinite(best):
        try:
            found = optimize.minimize_scalar(
                lambda s: -f(axis.point(s)),
                bracket=(grid[index - 1], grid[index], grid[index + 1]),
                method="golden",
                options={"xtol": 1e-10},
            )
        except ValueError:
            found = None
        if found is not None and -found.fun > best:
            best_s, best = float(found.x), float(-found.fun)
    return best, axis.point(best_s), index


def maximize_1d(
    f: Callable[[float], float],
    lower: float,
    upper: float,
    n: int = DEFAULT_POINTS,
    limits: Optional[Mapping[str, float]] = None,
) -> Extremum:
    """
    Supremum of *f* over the open interval ``(lower, upper]``.

    Args:
      f: The objective, NaN is treated as ``-inf``

      lower: Open lower end

      upper: Upper end of the search, finite

      n: Points of the coarse log grid; the fine grid has ``2n``

      limits: Values of *f* in the limits ``"lower"`` (``x -> lower``)
        and ``"upper"`` (``x -> inf``), computed analytically by
        the caller
    """
    objective = _safe(f)
    span = upper - lower
    axis = Axis(lower, span * 1e-9, span)
    coarse, _, _ = _scan_1d(objective, axis, n)
    value, location, index = _scan_1d(objective, axis, 2 * n)

    boundary = None
    if index == 0:
        boundary = "lower"
    elif index == 2 * n - 1:
        boundary = "upper"
    for side, limit in (limits or {}).items():
        if limit >= value:
            value = limit
            location = lower if side == "lower" else math.inf
            boundary = side
            coarse = max(coarse, limit)
    if boundary is not None:
        logger.debug("supremum %.6g attained at the %s boundary", value, boundary)
    return Extremum(value, (location,), boundary, (coarse, value))


def minimize_1d(
    f: Callable[[float], float],
    lower: float,
    upper: float,
    n: int = DEFAULT_POINTS,
) -> Extremum:
    """
    Infimum of *f* over ``(lower, upper]``.
    """
    found = maximize_1d(lambda x: -f(x), lower, upper, n)
    coarse, fine = found.refinement
    return Extremum(-found.value, found.location, found.boundary, (-coarse, -fine))


def _search_2d(
    f: Callable[[float, float], float],
    axes: Tuple[Axis, Axis],
    n: int,
    stop_below: Optional[float],
    starts: Sequence[Tuple[float, float]],
) -> Tuple[float, Tuple[float, float]]:
    first, second = axes
    best = math.inf
    best_s = (0.0, 0.0)
    for s1 in first.grid(n):
        for s2 in second.grid(n):
            value = f(first.point(s1), second.point(s2))
            if value < best:
                best, best_s = value, (float(s1), float(s2))
    for x1, x2 in starts:
        s = (math.log(x1 - first.origin), math.log(x2 - second.origin))
        value = f(x1, x2)
        if value < best:
            best, best_s = value, s

    if stop_below is not None and best < stop_below:
        return best, best_s

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        found = optimize.minimize(
            lambda s: f(first.point(s[0]), second.point(s[1])),
            x0=np.array(best_s),
            method="Nelder-Mead",
            bounds=[first.bounds, second.bounds],
            options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 2000},
        )
    if found.fun < best:
        best, best_s = float(found.fun), (float(found.x[0]), float(found.x[1]))
    return best, best_s


def minimize_2d(
    f: Callable[[float, float], float],
    first: Axis,
    second: Axis,
    n: int = DEFAULT_POINTS_2D,
    stop_below: Optional[float] = None,
    starts: Sequence[Tuple[float, float]] = (),
) -> Extremum:
    """
    Infimum of *f* over the box spanned by two :class:`Axis`
    coordinates.

    The coarse grid has ``n x n`` points and the fine one
    ``2n x 2n``; each is followed by a bounded Nelder–Mead
    polish. With *stop_below* the search returns as soon as a
    grid value below it is found (only the fine level runs).

    Args:
      starts: Extra candidate points, for instance a known
        good choice of one coordinate
    """

    def objective(x1: float, x2: float) -> float:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            value = float(f(x1, x2))
        return math.inf if math.isnan(value) else value

    axes = (first, second)
    fine, fine_s = _search_2d(objective, axes, 2 * n, stop_below, starts)
    if stop_below is not None and fine < stop_below:
        coarse = fine
    else:
        coarse, _ = _search_2d(objective, axes, n, None, starts)

    boundary = None
    for s, axis in zip(fine_s, axes):
        low, high = axis.bounds
        if min(s - low, high - s) <= 1e-6 * max(1.0, high - low):
            boundary = "box"
    location = (first.point(fine_s[0]), second.point(fine_s[1]))
    return Extremum(fine, location, boundary, (coarse, fine))


def maximize_2d(
    f: Callable[[float, float], float],
    first: Axis,
    second: Axis,
    n: int = DEFAULT_POINTS_2D,
    starts: Sequence[Tuple[float, float]] = (),
) -> Extremum:
    """
    Supremum of *f* over the box, see :func:`minimize_2d`.
    """
    found = minimize_2d(lambda x1, x2: -f(x1, x2), first, second, n, starts=starts)
    coarse, fine = found.refinement
    return Extremum(-found.value, found.location, found.boundary, (-coarse, -fine))


def threshold_bisect(
    holds: Callable[[float], bool],
    upper: float = 1.0,
    rel_tol: float = 1e-6,
    max_doublings: int = 60,
) -> float:
    """
    Smallest ``x >= 0`` with ``holds(x)`` for a predicate that is
    monotone (false below the threshold, true above).

    The bracket ``[0, upper]`` is doubled until *holds* is true
    at its upper end. Returns the upper end of the final bracket,
    at which *holds* is true; ``inf`` when no bracket is found.
    """
    if holds(0.0):
        return 0.0
    low, high = 0.0, upper
    for _ in range(max_doublings):
        if holds(high):
            break
        low, high = high, 2 * high
    else:
        return math.inf
    while high - low > rel_tol * high:
        middle = 0.5 * (low + high)
        if holds(middle):
            high = middle
        else:
            low = middle
    return high


def bisect_decreasing(
    f: Callable[[float], float], target: float, low: float, high: float, tol: float = 1e-12
) -> float:
    """
    Point where a decreasing *f* crosses *target* on ``[low, high]``;
    the returned point satisfies ``f(x) <= target``.
    """
    if f(high) > target:
        raise ValueError("target is not reached on the interval")
    while high - low > tol:
        middle = 0.5 * (low + high)
        if f(middle) <= target:
            high = middle
        else:
            low = middle
    return high
