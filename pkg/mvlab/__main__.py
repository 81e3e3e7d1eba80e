"""
Commandline interface
"""
import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from ._artifacts import (
    prepare_output,
    write_error,
    write_json,
    write_resolved,
    write_series,
    write_text,
)
from ._config import (
    Command,
    RunConfig,
    model_family,
    read_config,
    seed_from_text,
    starts_as_measures,
)
from ._errors import ConfigError, DegenerateInputError, MVLabError
from ._fixedpoint import (
    StationaryResult,
    fit_exponential_rate,
    measure_convergence,
    phase_scan,
    picard_solve,
)
from ._measures import EmpiricalMeasure, noise_floor
from ._models import ModelSpec, builtin_model
from ._rates import RateCertificate, certificates
from ._simulate import SimConfig, simulate_mv

logger = logging.getLogger("mvlab")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INCONCLUSIVE = 2

THREADS_VARIABLE = "MVLAB_THREADS"


def parse_arguments(argv: List[str]) -> argparse.Namespace:
    """
    Parse command-line arguments for the module.

    The result namespace contains the following attributes:

      - **command (Command)**: The task to run.

      - **config (str)**: Path of the TOML run configuration.

      - **output (Optional[str])**: Output directory, overrides the configuration.

      - **seed (Optional[int])**: Noise seed, overrides the configuration.

      - **threads (Optional[int])**: Worker threads.

      - **verbose (int)**: Number of ``-v`` flags.

    Args:
      argv: The script arguments, usually ``sys.argv[1:]``

    Returns:
      The parsed options.

    Raises:
      SystemExit: On usage errors or when the user has requested help
    """
    parser = argparse.ArgumentParser(
        prog="mvlab",
        description=f"McKean-Vlasov laboratory {__version__}",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "command",
        choices=[v.value for v in Command],
        help="The task to run",
    )
    parser.add_argument(
        "-c",
        "--config",
        dest="config",
        metavar="FILE",
        required=True,
        help="TOML file describing the run",
    )
    parser.add_argument(
        "-o",
        "--output",
        dest="output",
        metavar="DIR",
        default=None,
        help="Write artifacts to DIR instead of the configured output_dir",
    )
    parser.add_argument(
        "--seed",
        dest="seed",
        metavar="U64",
        type=seed_from_text,
        default=None,
        help="Override the noise seed",
    )
    parser.add_argument(
        "-j",
        "--threads",
        dest="threads",
        metavar="N",
        type=int,
        default=None,
        help=f"Worker threads (default: ${THREADS_VARIABLE} or 1)",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        dest="verbose",
        action="count",
        default=0,
        help="Log progress to stderr, twice for debug output",
    )
    args = parser.parse_args(argv)

    args.command = Command(args.command)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be positive")

    return args


def thread_count(args: argparse.Namespace) -> int:
    """
    Worker count from ``--threads``, then the environment.
    """
    if args.threads is not None:
        return args.threads
    value = os.environ.get(THREADS_VARIABLE)
    if not value:
        return 1
    try:
        threads = int(value)
    except ValueError:
        threads = 0
    if threads < 1:
        raise ConfigError(
            f"{THREADS_VARIABLE} must be a positive integer, got {value!r}",
            key=THREADS_VARIABLE,
        )
    return threads


def configure_logging(verbose: int) -> None:
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _model(config: RunConfig) -> ModelSpec:
    assert config.model is not None
    return builtin_model(config.model.name, config.model.params)


def _log_iteration(iteration: int, gap: float, measure: EmpiricalMeasure) -> None:
    logger.info("picard iteration %d: gap %.6g, mean %s", iteration, gap, measure.mean())


def _stationary(
    config: RunConfig, model: ModelSpec, mu0: EmpiricalMeasure, sim: SimConfig
) -> StationaryResult:
    return picard_solve(model, mu0, None, None, sim, config.fixedpoint, hooks=[_log_iteration])


def run_simulate(config: RunConfig, threads: int) -> int:
    """
    Simulate the particle system and record its trajectory.
    """
    model = _model(config)
    trajectory = simulate_mv(
        model, config.init.measure(model.dim), config.sim.replace(threads=threads)
    )
    directory = config.output_dir
    if config.format.csv:
        write_text(directory, "trajectory.csv", trajectory.to_csv)
        write_text(directory, "final.csv", trajectory.final.to_csv)
    if config.format.json:
        write_json(
            directory,
            "trajectory.json",
            {
                "times": trajectory.times,
                "means": trajectory.summaries.means,
                "pmoments": trajectory.summaries.pmoments,
                "p": trajectory.p,
                "taming_activations": trajectory.taming_activations,
            },
        )
    if config.snapshots:
        trajectory.write_snapshots(directory)
    return EXIT_OK


def run_stationary(config: RunConfig, threads: int) -> int:
    """
    Picard iteration for a stationary measure; inconclusive
    when the iteration did not converge.
    """
    model = _model(config)
    result = _stationary(
        model=model,
        config=config,
        mu0=config.init.measure(model.dim),
        sim=config.sim.replace(threads=threads),
    )
    directory = config.output_dir
    measure_file = "stationary_measure.csv"
    write_text(directory, measure_file, result.measure.to_csv)
    if config.format.csv:
        write_series(
            directory,
            "picard.csv",
            np.arange(1, result.iterations_used + 1, dtype=float),
            result.iterates,
        )
    write_json(directory, "stationary.json", result.to_dict(measure_file))
    if not result.converged:
        logger.warning("no stationary measure certified: %s", result.stop_reason)
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _rate_comparison(
    config: RunConfig, fitted: Optional[float]
) -> Dict[str, Dict[str, Any]]:
    assert config.rates is not None
    result = {}
    for name, certificate in certificates(config.rates, config.theorems).items():
        bound = certificate.lambda_bar
        result[name] = {
            "verdict": certificate.verdict,
            "lambda_bar": bound,
            "fitted_at_least_certified": (
                None
                if fitted is None or bound is None or not np.isfinite(bound)
                else bool(fitted >= bound)
            ),
        }
    return result


def run_converge(config: RunConfig, threads: int) -> int:
    """
    Record ``W_p(law_t, μ̄)`` and fit an exponential rate.

    A fit without three points above the noise floor is
    reported as degenerate, which is not an error.
    """
    model = _model(config)
    sim = config.sim.replace(threads=threads)
    if config.converge.mu_bar is not None:
        mu_bar = EmpiricalMeasure.from_csv(config.converge.mu_bar)
    else:
        logger.info("computing the stationary measure first")
        mu_bar = _stationary(config, model, config.init.measure(model.dim), sim).measure

    trajectory = measure_convergence(model, config.init.measure(model.dim), mu_bar, sim)
    times = trajectory.times
    distances = trajectory.summaries.wp_to_ref
    assert distances is not None
    directory = config.output_dir
    write_series(directory, "decay.csv", times, distances)

    floor = noise_floor(mu_bar, sim.p, seed=sim.seed)
    window = times >= config.converge.fit_start
    payload: Dict[str, Any] = {
        "noise_floor": floor,
        "fit_start": config.converge.fit_start,
        "estimator": trajectory.estimator,
    }
    fitted = None
    try:
        fit = fit_exponential_rate(
            np.column_stack([times[window] - times[window][0], distances[window]]),
            3 * floor,
        )
    except (DegenerateInputError, IndexError) as exc:
        logger.warning("convergence fit is degenerate: %s", exc)
        payload.update(degenerate=True, reason=str(exc))
    else:
        fitted = fit.lambda_bar
        payload.update(degenerate=False, lambda_bar=fit.lambda_bar, C_bar=fit.C_bar, r2=fit.r2)

    if config.converge.compare_rates:
        payload["rates"] = _rate_comparison(config, fitted)
    write_json(directory, "convergence.json", payload)
    return EXIT_OK


def run_rates(config: RunConfig, threads: int) -> int:
    """
    Compute rate certificates; inconclusive when any verdict is.
    """
    assert config.rates is not None
    found: Dict[str, RateCertificate] = certificates(config.rates, config.theorems)
    write_json(
        config.output_dir,
        "rates.json",
        {
            "inputs": config.rates.echo(),
            "certificates": {name: cert.to_dict() for name, cert in found.items()},
        },
    )
    if any(cert.verdict == "inconclusive" for cert in found.values()):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def run_phase_scan(config: RunConfig, threads: int) -> int:
    """
    Count stationary states along a parameter grid.
    """
    assert config.model is not None and config.phase_scan is not None
    section = config.phase_scan
    report = phase_scan(
        model_family(config.model, section.parameter),
        (section.parameter, section.values),
        starts_as_measures(section),
        config.sim,
        merge_tol=section.merge_tol,
        options=config.fixedpoint,
        threads=threads,
    )
    if config.format.csv:
        write_text(config.output_dir, "phase_scan.csv", report.to_csv)
    if config.format.json:
        write_json(config.output_dir, "phase_scan.json", report.to_dict())
    return EXIT_OK


RUNNERS = {
    Command.SIMULATE: run_simulate,
    Command.STATIONARY: run_stationary,
    Command.CONVERGE: run_converge,
    Command.RATES: run_rates,
    Command.PHASE_SCAN: run_phase_scan,
}


def run(config: RunConfig, threads: int = 1) -> int:
    """
    Run *config* and write its artifacts.

    Returns:
      The exit status: 0, or 2 when the run finished without
      a conclusive verdict.
    """
    prepare_output(config.output_dir)
    write_resolved(config)
    return RUNNERS[config.command](config, threads)


def main(argv: List[str]) -> None:
    """
    Entry point for the module.

    Args:
      argv: Command-line arguments, should be ``sys.argv[1:]``.

    Raises:
      SystemExit: With status 1 on errors (after writing
        ``error.json`` when the output directory is known) and
        status 2 for inconclusive runs.
    """
    args = parse_arguments(argv)
    configure_logging(args.verbose)

    directory: Optional[str] = args.output
    try:
        config = read_config(
            args.config,
            command=args.command.value,
            output_dir=args.output,
            seed=args.seed,
        )
        directory = config.output_dir
        status = run(config, thread_count(args))

    except (MVLabError, OSError) as exc:
        print(exc, file=sys.stderr)
        if directory is not None:
            try:
                prepare_output(directory)
                write_error(directory, exc)
            except OSError:
                pass
        raise SystemExit(EXIT_FAILURE)

    if status != EXIT_OK:
        raise SystemExit(status)


def console_main() -> None:
    main(sys.argv[1:])


if __name__ == "__main__":  # pragma: nocover
    main(sys.argv[1:])
