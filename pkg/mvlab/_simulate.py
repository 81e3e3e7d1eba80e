"""
Euler–Maruyama integrators for interacting particle systems.

Three drivers share one stepping engine:

- :func:`simulate_mv` evolves N interacting particles, the
  measure argument being the current empirical measure;
- :func:`simulate_decoupled` freezes the measure argument,
  so particles are independent copies of a classical SDE;
- :func:`simulate_synchronous_pair` evolves two interacting
  systems driven by the same increments.
"""
import concurrent.futures
import contextlib
import dataclasses
import logging
import math
import os
from typing import Iterator, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from typing_extensions import Literal

from ._errors import MeasureError, ModelError, NonErgodicError, SimulationDiverged
from ._measures import EmpiricalMeasure, pth_moment, wasserstein
from ._models import MeasureSummary, ModelSpec, summarize
from ._noise import STREAM_DYNAMICS, STREAM_INITIAL, NoiseStream, block_slices

logger = logging.getLogger(__name__)

Pairing = Literal["sorted_1d", "index"]


@dataclasses.dataclass(frozen=True)
class SimConfig:
    """
    Discretization and sampling parameters of a simulation.

    Attributes:
      n_particles
        Number of particles N

      step
        Euler step h

      horizon
        Final time T

      seed
        Unsigned 64-bit seed of the counter-based noise

      record_every
        Snapshot stride in steps

      scheme
        Integration scheme, only ``"euler_maruyama"``

      taming
        When set, the drift increment ``b h`` of a particle
        is scaled down to at most this length

      threads
        Worker threads; never changes results

      p
        Order of the moment and distance summaries
    """

    n_particles: int = 10_000
    step: float = 1e-3
    horizon: float = 10.0
    seed: int = 0
    record_every: int = 100
    scheme: Literal["euler_maruyama"] = "euler_maruyama"
    taming: Optional[float] = None
    threads: int = 1
    p: float = 2.0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be positive, got {self.n_particles}")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.step > self.horizon:
            raise ValueError(f"step {self.step} exceeds horizon {self.horizon}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be positive, got {self.record_every}")
        if self.record_every * self.step > self.horizon * (1 + 1e-9):
            raise ValueError("record_every * step exceeds the horizon")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.scheme != "euler_maruyama":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.taming is not None and not self.taming > 0:
            raise ValueError(f"taming bound must be positive, got {self.taming}")
        if self.threads < 1:
            raise ValueError(f"threads must be positive, got {self.threads}")
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.horizon / self.step - 1e-9)))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True, eq=False)
class TrajectorySummaries:
    """
    Per-snapshot summaries of a :class:`Trajectory`.

    Attributes:
      means
        Array of shape ``(T, d)``

      pmoments
        p-th moment norm per snapshot

      wp_to_ref
        W_p distance to the reference measure, or :data:`None`
        when no reference was supplied
    """

    means: np.ndarray
    pmoments: np.ndarray
    wp_to_ref: Optional[np.ndarray] = None


@dataclasses.dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Recorded evolution of a particle system.

    Attributes:
      times
        Ascending snapshot times, starting at 0

      snapshots
        Empirical measures aligned with *times*

      summaries
        Means, moments and reference distances

      p
        Order used for the summaries

      estimator
        W_p estimator used for ``summaries.wp_to_ref``

      taming_activations
        Number of particle steps where taming capped the drift
    """

    times: np.ndarray
    snapshots: Tuple[EmpiricalMeasure, ...]
    summaries: TrajectorySummaries
    p: float
    estimator: Optional[str] = None
    taming_activations: int = 0

    @property
    def final(self) -> EmpiricalMeasure:
        return self.snapshots[-1]

    def to_csv(self, file: Union[str, os.PathLike, TextIO]):
        """
        Write ``t, mean_1..mean_d, pmoment, wp_to_ref`` rows.
        """
        dim = self.summaries.means.shape[1]
        wp = self.summaries.wp_to_ref
        if wp is None:
            wp = np.full(len(self.times), np.nan)
        header = ["t"] + [f"mean_{i + 1}" for i in range(dim)] + ["pmoment", "wp_to_ref"]
        data = np.column_stack([self.times, self.summaries.means, self.summaries.pmoments, wp])
        np.savetxt(
            file, data, fmt="%.17g", delimiter=",", header=",".join(header), comments=""
        )

    def write_snapshots(self, directory: Union[str, os.PathLike]) -> List[str]:
        """
        Write every snapshot to ``snap_<index>.bin`` in *directory*.

        Returns:
          The written file names
        """
        names = []
        for index, snapshot in enumerate(self.snapshots):
            name = f"snap_{index}.bin"
            with open(os.path.join(directory, name), "wb") as fp:
                fp.write(snapshot.to_binary())
            names.append(name)
        return names


@dataclasses.dataclass(frozen=True, eq=False)
class CoupledPath:
    """
    Pathwise distance between two synchronously coupled systems.

    Attributes:
      times
        Snapshot times

      distances
        ``(mean_i |X_i - Y_i|^p)^(1/p)`` per snapshot, an upper
        bound for W_p between the two laws

      p
        Order of the distances
    """

    times: np.ndarray
    distances: np.ndarray
    p: float
    taming_activations: int = 0


@contextlib.contextmanager
def _executor(threads: int) -> Iterator[Optional[concurrent.futures.Executor]]:
    if threads <= 1:
        yield None
        return
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        yield executor


def initial_points(
    measure: EmpiricalMeasure, n: int, seed: int, order: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Return *n* particle positions representing *measure*.

    A uniform measure with exactly *n* points is used as is,
    a point mass is replicated and anything else is resampled
    with the initial-state stream of *seed*.
    """
    if measure.n == n and measure.is_uniform:
        return np.array(measure.points)
    if measure.n == 1:
        return np.repeat(measure.points, n, axis=0)
    if order is None:
        rng = NoiseStream(seed, STREAM_INITIAL).generator(0, 0)
        order = rng.choice(measure.n, size=n, replace=True, p=measure.weights)
    return np.array(measure.points[order])


class _Stepper:
    """
    One Euler–Maruyama step over the fixed particle partition.
    """

    def __init__(self, model: ModelSpec, cfg: SimConfig, executor):
        self.model = model
        self.cfg = cfg
        self.executor = executor
        self.sqrt_h = math.sqrt(cfg.step)
        self.taming_activations = 0

    def advance(
        self, points: np.ndarray, summary: MeasureSummary, noise: np.ndarray, step: int
    ) -> np.ndarray:
        model = self.model
        h = self.cfg.step
        cap = self.cfg.taming
        sigma = None
        if model.additive_noise:
            sigma = np.asarray(model.diffusion(points[:1], summary), dtype=float)[0]

        result = np.empty_like(points)
        tamed = [0] * len(block_slices(points.shape[0]))

        def run(item):
            index, rows = item
            x = points[rows]
            increment = np.asarray(model.drift(x, summary), dtype=float) * h
            if cap is not None:
                lengths = np.linalg.norm(increment, axis=1)
                over = lengths > cap
                if np.any(over):
                    increment[over] *= (cap / lengths[over])[:, None]
                    tamed[index] = int(np.count_nonzero(over))
            xi = noise[rows]
            if sigma is not None:
                diffusion = xi @ sigma.T
            else:
                matrices = np.asarray(model.diffusion(x, summary), dtype=float)
                diffusion = np.einsum("nij,nj->ni", matrices, xi)
            result[rows] = x + increment + self.sqrt_h * diffusion

        items = list(enumerate(block_slices(points.shape[0])))
        if self.executor is None or len(items) == 1:
            for item in items:
                run(item)
        else:
            list(self.executor.map(run, items))

        self.taming_activations += sum(tamed)
        finite = np.isfinite(result).all(axis=1)
        if not finite.all():
            raise SimulationDiverged(step, int(np.argmin(finite)))
        return result


def _current_summary(model: ModelSpec, points: np.ndarray) -> MeasureSummary:
    if "cloud" in model.measure_features:
        return summarize(EmpiricalMeasure(points), model.measure_features)
    return MeasureSummary(points.mean(axis=0))


def _record_steps(cfg: SimConfig) -> List[int]:
    steps = list(range(0, cfg.n_steps + 1, cfg.record_every))
    if steps[-1] != cfg.n_steps:
        steps.append(cfg.n_steps)
    return steps


def _check_dim(model: ModelSpec, *measures: EmpiricalMeasure):
    for measure in measures:
        if measure.dim != model.dim:
            raise ModelError(
                f"measure has dimension {measure.dim}, model {model.name!r} "
                f"has dimension {model.dim}"
            )


def _run(
    model: ModelSpec,
    points: np.ndarray,
    cfg: SimConfig,
    frozen: Optional[EmpiricalMeasure],
    reference: Optional[EmpiricalMeasure],
    explosion_bound: Optional[float],
) -> Trajectory:
    noise = NoiseStream(cfg.seed, STREAM_DYNAMICS)
    record = set(_record_steps(cfg))
    snapshots = []
    times = []
    frozen_summary = summarize(frozen, model.measure_features) if frozen else None

    def snapshot(step: int, state: np.ndarray):
        measure = EmpiricalMeasure(state)
        if explosion_bound is not None:
            moment = pth_moment(measure, cfg.p)
            if moment > explosion_bound:
                raise NonErgodicError(moment, explosion_bound, step * cfg.step)
        snapshots.append(measure)
        times.append(step * cfg.step)

    with _executor(cfg.threads) as executor:
        stepper = _Stepper(model, cfg, executor)
        snapshot(0, points)
        for step in range(1, cfg.n_steps + 1):
            if frozen_summary is None:
                summary = _current_summary(model, points)
            else:
                summary = frozen_summary
            xi = noise.normals(step, points.shape[0], model.dim, executor)
            points = stepper.advance(points, summary, xi, step)
            if step in record:
                snapshot(step, points)

    if stepper.taming_activations:
        logger.warning(
            "taming capped the drift in %d particle steps", stepper.taming_activations
        )
    return _trajectory(snapshots, times, cfg.p, reference, stepper.taming_activations)


def _trajectory(
    snapshots: Sequence[EmpiricalMeasure],
    times: Sequence[float],
    p: float,
    reference: Optional[EmpiricalMeasure],
    taming_activations: int,
) -> Trajectory:
    means = np.array([snapshot.mean() for snapshot in snapshots])
    moments = np.array([pth_moment(snapshot, p) for snapshot in snapshots])
    wp = None
    estimator = None
    if reference is not None:
        estimates = [wasserstein(snapshot, reference, p) for snapshot in snapshots]
        wp = np.array([estimate.value for estimate in estimates])
        estimator = estimates[-1].estimator
    return Trajectory(
        times=np.array(times),
        snapshots=tuple(snapshots),
        summaries=TrajectorySummaries(means, moments, wp),
        p=p,
        estimator=estimator,
        taming_activations=taming_activations,
    )


def simulate_mv(
    model: ModelSpec,
    init: EmpiricalMeasure,
    cfg: SimConfig,
    reference: Optional[EmpiricalMeasure] = None,
) -> Trajectory:
    """
    Simulate the interacting particle approximation.

    Each step evaluates the coefficients at the current
    empirical measure of all N particles.

    Args:
      model: The model to simulate

      init: Initial law, replicated or resampled to N particles

      cfg: Simulation parameters

      reference: Optional measure; when given every snapshot
        records its W_p distance to it

    Raises:
      SimulationDiverged: The state became NaN or infinite.
    """
    _check_dim(model, init)
    if cfg.n_particles < 2:
        raise MeasureError("interacting simulations need at least two particles")
    logger.info(
        "simulating %s with N=%d, h=%g, T=%g", model.name, cfg.n_particles, cfg.step, cfg.horizon
    )
    points = initial_points(init, cfg.n_particles, cfg.seed)
    return _run(model, points, cfg, None, reference, None)


def simulate_decoupled(
    model: ModelSpec,
    frozen_mu: EmpiricalMeasure,
    init: EmpiricalMeasure,
    cfg: SimConfig,
    reference: Optional[EmpiricalMeasure] = None,
    explosion_bound: Optional[float] = None,
) -> Trajectory:
    """
    Simulate the decoupled equation with the measure argument
    frozen at *frozen_mu*.

    Raises:
      SimulationDiverged: The state became NaN or infinite.

      NonErgodicError: A snapshot moment exceeded *explosion_bound*.
    """
    _check_dim(model, frozen_mu, init)
    points = initial_points(init, cfg.n_particles, cfg.seed)
    return _run(model, points, cfg, frozen_mu, reference, explosion_bound)


def simulate_synchronous_pair(
    model: ModelSpec,
    mu_a: EmpiricalMeasure,
    mu_b: EmpiricalMeasure,
    pairing: Optional[Pairing],
    cfg: SimConfig,
) -> CoupledPath:
    """
    Evolve two interacting systems driven by identical increments.

    Args:
      pairing: ``"sorted_1d"`` pairs order statistics (d=1 only),
        ``"index"`` pairs by position; :data:`None` selects
        ``"sorted_1d"`` in one dimension and ``"index"`` otherwise.

    Raises:
      MeasureError: Sizes differ or the pairing does not apply.
    """
    _check_dim(model, mu_a, mu_b)
    if pairing is None:
        pairing = "sorted_1d" if model.dim == 1 else "index"
    if pairing not in ("sorted_1d", "index"):
        raise MeasureError(f"unknown pairing {pairing!r}")
    if pairing == "sorted_1d" and model.dim != 1:
        raise MeasureError("sorted_1d pairing requires d=1")
    if mu_a.n != mu_b.n:
        raise MeasureError(f"paired measures differ in size: {mu_a.n} != {mu_b.n}")

    n = cfg.n_particles
    order = None
    if not (mu_a.n == n or mu_a.n == 1):
        rng = NoiseStream(cfg.seed, STREAM_INITIAL).generator(0, 0)
        order = rng.choice(mu_a.n, size=n, replace=True)
    points_a = initial_points(mu_a, n, cfg.seed, order)
    points_b = initial_points(mu_b, n, cfg.seed, order)
    if pairing == "sorted_1d":
        points_a = points_a[np.argsort(points_a[:, 0], kind="stable")]
        points_b = points_b[np.argsort(points_b[:, 0], kind="stable")]

    p = cfg.p

    def distance(a: np.ndarray, b: np.ndarray) -> float:
        gaps = np.linalg.norm(a - b, axis=1)
        return float(np.mean(gaps ** p) ** (1.0 / p))

    noise = NoiseStream(cfg.seed, STREAM_DYNAMICS)
    record = set(_record_steps(cfg))
    times = [0.0]
    distances = [distance(points_a, points_b)]
    with _executor(cfg.threads) as executor:
        stepper = _Stepper(model, cfg, executor)
        for step in range(1, cfg.n_steps + 1):
            summary_a = _current_summary(model, points_a)
            summary_b = _current_summary(model, points_b)
            xi = noise.normals(step, n, model.dim, executor)
            points_a = stepper.advance(points_a, summary_a, xi, step)
            points_b = stepper.advance(points_b, summary_b, xi, step)
            if step in record:
                times.append(step * cfg.step)
                distances.append(distance(points_a, points_b))

    return CoupledPath(
        times=np.array(times),
        distances=np.array(distances),
        p=p,
        taming_activations=stepper.taming_activations,
    )
