"""
Run configuration of the command-line tool.

A run is described by one TOML document::

    command = "stationary"
    output_dir = "out"

    [model]
    name = "mean_field_ou"

    [model.params]
    a = 1.0
    c = 0.5

    [sim]
    n_particles = 10000
    step = 1e-3

:func:`parse_config` validates the document into a frozen
:class:`RunConfig`; :meth:`RunConfig.resolved_toml` renders the
effective configuration, defaults included, so that a run can
be reproduced from its output directory.
"""
import dataclasses
import enum
import sys
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import tomli_w

from ._errors import ConfigError, ModelError
from ._fixedpoint import FixedPointConfig
from ._measures import EmpiricalMeasure, GaussianMeasure
from ._models import ModelSpec, builtin_model
from ._rates import RateInputs, TabulatedKappa, check_theorems
from ._simulate import SimConfig

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: nocover
    import tomli as tomllib

RESOLVED_NAME = "config.resolved.toml"


@enum.unique
class Command(enum.Enum):
    """
    The tasks the command-line tool can run.
    """

    SIMULATE = "simulate"
    STATIONARY = "stationary"
    CONVERGE = "converge"
    RATES = "rates"
    PHASE_SCAN = "phase-scan"


@enum.unique
class OutputFormat(enum.Enum):
    """
    Which tabular artifacts to write.
    """

    CSV = "csv"
    JSON = "json"
    BOTH = "both"

    @property
    def csv(self) -> bool:
        return self in (OutputFormat.CSV, OutputFormat.BOTH)

    @property
    def json(self) -> bool:
        return self in (OutputFormat.JSON, OutputFormat.BOTH)


_NEEDS_MODEL = {Command.SIMULATE, Command.STATIONARY, Command.CONVERGE, Command.PHASE_SCAN}

_SIM_KEYS = {"n_particles", "step", "horizon", "seed", "record_every", "scheme", "taming", "p"}
_FIXEDPOINT_KEYS = {
    "tol",
    "max_iter",
    "burn_in",
    "merge_tol",
    "pooled",
    "explosion_bound",
    "floor_multiple",
    "stall_iterations",
}
_RATES_KEYS = {field.name for field in dataclasses.fields(RateInputs)}
_INIT_KEYS = {"kind", "point", "mean", "covariance", "n", "path", "seed"}
_CONVERGE_KEYS = {"fit_start", "compare_rates", "mu_bar"}
_PHASE_KEYS = {"parameter", "values", "starts", "merge_tol"}
_TOP_KEYS = {
    "command",
    "output_dir",
    "format",
    "theorems",
    "snapshots",
    "model",
    "sim",
    "init",
    "fixedpoint",
    "rates",
    "converge",
    "phase_scan",
}


@dataclasses.dataclass(frozen=True)
class ModelSection:
    name: str
    params: Mapping[str, Any]


@dataclasses.dataclass(frozen=True)
class InitSection:
    """
    Initial law: a point mass, a Gaussian sample or a CSV file.

    Attributes:
      kind
        ``"dirac"``, ``"gaussian"`` or ``"file"``

      point
        Location of the point mass

      mean, covariance, n, seed
        Gaussian sample parameters

      path
        CSV file written by :meth:`EmpiricalMeasure.to_csv`
    """

    kind: str = "dirac"
    point: Optional[Tuple[float, ...]] = None
    mean: Optional[Tuple[float, ...]] = None
    covariance: Optional[Any] = None
    n: int = 1000
    path: Optional[str] = None
    seed: int = 0

    def measure(self, dim: int) -> EmpiricalMeasure:
        if self.kind == "dirac":
            point = self.point if self.point is not None else (0.0,) * dim
            return EmpiricalMeasure.dirac(list(point))
        if self.kind == "gaussian":
            mean = self.mean if self.mean is not None else (0.0,) * dim
            covariance = self.covariance if self.covariance is not None else 1.0
            gaussian = GaussianMeasure(list(mean), covariance)
            return EmpiricalMeasure.sample_gaussian(gaussian, self.n, self.seed)
        assert self.path is not None
        return EmpiricalMeasure.from_csv(self.path)


@dataclasses.dataclass(frozen=True)
class ConvergeSection:
    fit_start: float = 0.0
    compare_rates: bool = False
    mu_bar: Optional[str] = None


@dataclasses.dataclass(frozen=True)
class PhaseScanSection:
    parameter: str
    values: Tuple[float, ...]
    starts: Tuple[Tuple[float, ...], ...]
    merge_tol: Optional[float] = None


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """
    A validated run description.

    Attributes:
      command
        The task to run

      output_dir
        Directory receiving the artifacts

      format
        Which tabular artifacts to write

      model
        Model name and parameters, for the commands that simulate

      sim
        Simulation parameters; the worker count is not part of
        the configuration

      init
        Initial law

      fixedpoint
        Picard and phase-scan options

      rates
        Rate inputs, when given

      theorems
        Certificates to compute, :data:`None` for all applicable

      converge, phase_scan
        Command specific options

      snapshots
        Also write binary snapshot sidecars for ``simulate``
    """

    command: Command
    output_dir: str
    format: OutputFormat
    model: Optional[ModelSection]
    sim: SimConfig
    init: InitSection
    fixedpoint: FixedPointConfig
    rates: Optional[RateInputs]
    theorems: Optional[Tuple[str, ...]]
    converge: ConvergeSection
    phase_scan: Optional[PhaseScanSection]
    snapshots: bool = False

    def __post_init__(self) -> None:
        burn_in = self.fixedpoint.burn_in
        if burn_in is not None and not burn_in < self.sim.horizon:
            raise ConfigError(
                f"fixedpoint.burn_in {burn_in} must be below sim.horizon={self.sim.horizon}",
                key="fixedpoint.burn_in",
            )

    def resolved(self) -> Dict[str, Any]:
        """
        The effective configuration as a TOML-compatible mapping.
        """
        document: Dict[str, Any] = {
            "command": self.command.value,
            "output_dir": self.output_dir,
            "format": self.format.value,
            "snapshots": self.snapshots,
        }
        if self.theorems is not None:
            document["theorems"] = list(self.theorems)
        if self.model is not None:
            document["model"] = {"name": self.model.name, "params": dict(self.model.params)}
        sim = _without_none(dataclasses.asdict(self.sim))
        del sim["threads"]
        document["sim"] = sim
        document["init"] = _without_none(dataclasses.asdict(self.init))
        document["fixedpoint"] = _without_none(dataclasses.asdict(self.fixedpoint))
        if self.rates is not None:
            rates = _without_none(dataclasses.asdict(self.rates))
            kappa_t = self.rates.kappa_t
            if isinstance(kappa_t, TabulatedKappa):
                rates["kappa_t"] = {
                    "times": kappa_t.times.tolist(),
                    "values": kappa_t.values.tolist(),
                }
            document["rates"] = rates
        document["converge"] = _without_none(dataclasses.asdict(self.converge))
        if self.phase_scan is not None:
            document["phase_scan"] = _without_none(dataclasses.asdict(self.phase_scan))
        return document

    def resolved_toml(self) -> str:
        return tomli_w.dumps(_toml_safe(self.resolved()))


def _without_none(table: Dict[str, Any]) -> Dict[str, Any]:
    return {key: value for key, value in table.items() if value is not None}


def _toml_safe(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _toml_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_toml_safe(item) for item in value]
    return value


def _table(document: Mapping[str, Any], key: str, allowed: set) -> Dict[str, Any]:
    value = document.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be a table", key=key)
    for name in value:
        if name not in allowed:
            raise ConfigError(f"unknown key {key}.{name}", key=f"{key}.{name}")
    return dict(value)


def _number(table: Mapping[str, Any], key: str, path: str) -> None:
    value = table.get(key)
    if value is not None and (
        isinstance(value, bool) or not isinstance(value, (int, float))
    ):
        raise ConfigError(f"{path}.{key} must be a number, got {value!r}", key=f"{path}.{key}")


def _floats(value: Any, key: str) -> Tuple[float, ...]:
    items = value if isinstance(value, list) else [value]
    for item in items:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigError(f"{key} must hold numbers, got {item!r}", key=key)
    return tuple(float(item) for item in items)


def _sim(table: Dict[str, Any], seed: Optional[int]) -> SimConfig:
    for key in ("n_particles", "step", "horizon", "seed", "record_every", "taming", "p"):
        _number(table, key, "sim")
    if seed is not None:
        table["seed"] = seed
    for key in ("n_particles", "seed", "record_every"):
        if key in table and not isinstance(table[key], int):
            raise ConfigError(f"sim.{key} must be an integer", key=f"sim.{key}")
    for key in ("step", "horizon", "taming", "p"):
        if key in table and not table[key] > 0:
            raise ConfigError(
                f"sim.{key} must be positive, got {table[key]!r}", key=f"sim.{key}"
            )
    try:
        return SimConfig(**table)
    except ValueError as exc:
        raise ConfigError(str(exc), key="sim") from None


def _fixedpoint(table: Dict[str, Any]) -> FixedPointConfig:
    for key in _FIXEDPOINT_KEYS - {"pooled"}:
        _number(table, key, "fixedpoint")
    try:
        return FixedPointConfig(**table)
    except ValueError as exc:
        raise ConfigError(str(exc), key="fixedpoint") from None


def _rates(table: Dict[str, Any]) -> RateInputs:
    kappa_t = table.get("kappa_t")
    if isinstance(kappa_t, dict):
        try:
            table["kappa_t"] = TabulatedKappa(kappa_t["times"], kappa_t["values"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(
                f"rates.kappa_t must have matching 'times' and 'values': {exc}",
                key="rates.kappa_t",
            ) from None
    for key in _RATES_KEYS - {"kappa_t"}:
        _number(table, key, "rates")
    return RateInputs(**table)


def _init(table: Dict[str, Any]) -> InitSection:
    kind = table.get("kind", "dirac")
    if kind not in ("dirac", "gaussian", "file"):
        raise ConfigError(f"unknown init.kind {kind!r}", key="init.kind")
    if kind == "file" and "path" not in table:
        raise ConfigError("init.path is required for kind 'file'", key="init.path")
    for key in ("point", "mean"):
        if key in table:
            table[key] = _floats(table[key], f"init.{key}")
    return InitSection(**table)


def _phase_scan(table: Dict[str, Any]) -> PhaseScanSection:
    for key in ("parameter", "values", "starts"):
        if key not in table:
            raise ConfigError(f"missing key phase_scan.{key}", key=f"phase_scan.{key}")
    if not isinstance(table["starts"], list):
        raise ConfigError("phase_scan.starts must be a list", key="phase_scan.starts")
    starts = tuple(_floats(start, "phase_scan.starts") for start in table["starts"])
    if len(starts) < 2:
        raise ConfigError("phase_scan.starts needs at least two entries", key="phase_scan.starts")
    values = _floats(table["values"], "phase_scan.values")
    if not values:
        raise ConfigError("phase_scan.values is empty", key="phase_scan.values")
    _number(table, "merge_tol", "phase_scan")
    return PhaseScanSection(
        parameter=str(table["parameter"]),
        values=values,
        starts=starts,
        merge_tol=table.get("merge_tol"),
    )


def parse_config(
    text: str,
    *,
    command: Optional[str] = None,
    output_dir: Optional[str] = None,
    seed: Optional[int] = None,
) -> RunConfig:
    """
    Parse and validate a run configuration.

    Args:
      text: The TOML document

      command: Overrides the ``command`` key

      output_dir: Overrides the ``output_dir`` key

      seed: Overrides ``sim.seed``

    Raises:
      ConfigError: Syntax errors (the message gives line and
        column), missing sections or keys and out-of-range
        values; :attr:`ConfigError.key` is the dotted key.
    """
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None

    for key in document:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown key {key}", key=key)

    name = command if command is not None else document.get("command")
    if name is None:
        raise ConfigError("missing key command", key="command")
    try:
        selected = Command(name)
    except ValueError:
        raise ConfigError(f"unknown command {name!r}", key="command") from None

    format_name = document.get("format", "csv")
    try:
        output_format = OutputFormat(format_name)
    except ValueError:
        raise ConfigError(f"unknown format {format_name!r}", key="format") from None

    model = None
    if "model" in document:
        table = _table(document, "model", {"name", "params"})
        if "name" not in table:
            raise ConfigError("missing key model.name", key="model.name")
        model = ModelSection(str(table["name"]), dict(table.get("params", {})))
    elif selected in _NEEDS_MODEL:
        raise ConfigError(f"command {selected.value!r} needs a [model] section", key="model")

    rates = None
    if "rates" in document:
        rates = _rates(_table(document, "rates", _RATES_KEYS))
    elif selected is Command.RATES:
        raise ConfigError("command 'rates' needs a [rates] section", key="rates")

    theorems = None
    if "theorems" in document:
        if not isinstance(document["theorems"], list):
            raise ConfigError("theorems must be a list", key="theorems")
        theorems = tuple(str(item) for item in document["theorems"])
        check_theorems(theorems, rates)

    converge = ConvergeSection(**_table(document, "converge", _CONVERGE_KEYS))
    if converge.compare_rates and rates is None:
        raise ConfigError("converge.compare_rates needs a [rates] section", key="rates")

    phase = None
    if "phase_scan" in document:
        phase = _phase_scan(_table(document, "phase_scan", _PHASE_KEYS))
    elif selected is Command.PHASE_SCAN:
        raise ConfigError("command 'phase-scan' needs a [phase_scan] section", key="phase_scan")

    snapshots = document.get("snapshots", False)
    if not isinstance(snapshots, bool):
        raise ConfigError("snapshots must be a boolean", key="snapshots")

    return RunConfig(
        command=selected,
        output_dir=str(output_dir or document.get("output_dir", "mvlab-output")),
        format=output_format,
        model=model,
        sim=_sim(_table(document, "sim", _SIM_KEYS), seed),
        init=_init(_table(document, "init", _INIT_KEYS)),
        fixedpoint=_fixedpoint(_table(document, "fixedpoint", _FIXEDPOINT_KEYS)),
        rates=rates,
        theorems=theorems,
        converge=converge,
        phase_scan=phase,
        snapshots=snapshots,
    )


def read_config(path: str, **overrides: Any) -> RunConfig:
    """
    Read and parse the configuration file at *path*.
    """
    with open(path, "rb") as fp:
        data = fp.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path} is not valid UTF-8: {exc}") from None
    return parse_config(text, **overrides)


def seed_from_text(text: str) -> int:
    """
    Parse a ``--seed`` argument as an unsigned 64-bit integer.
    """
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise ValueError(f"seed out of range: {text}")
    return value


def model_family(section: ModelSection, parameter: str) -> Callable[[float], ModelSpec]:
    """
    Return ``value -> ModelSpec`` varying *parameter*.

    Construction failures surface as :class:`ModelError`.
    """

    def build(value: float) -> ModelSpec:
        try:
            return builtin_model(section.name, {**section.params, parameter: value})
        except ModelError:
            raise
        except (TypeError, ValueError) as exc:
            raise ModelError(
                f"{section.name} with {parameter}={value!r}: {exc}",
                parameter=parameter,
                value=value,
            ) from exc

    return build


def starts_as_measures(section: PhaseScanSection) -> List[EmpiricalMeasure]:
    return [EmpiricalMeasure.dirac(list(start)) for start in section.starts]
