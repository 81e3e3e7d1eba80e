"""
Writers for the files of a command-line run.

Every JSON document carries a ``metadata`` block with the
package version and a creation timestamp; apart from that
block the output of a run is a function of its resolved
configuration.
"""
import datetime
import json
import math
import os
from typing import Any, Callable, Mapping, TextIO

import numpy as np

from . import __version__
from ._config import RESOLVED_NAME, RunConfig
from ._errors import MVLabError


def jsonable(value: Any) -> Any:
    """
    Convert *value* to plain JSON types; non-finite floats
    become :data:`None`.
    """
    if isinstance(value, Mapping):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if value is None or isinstance(value, str):
        return value
    return repr(value)


def metadata() -> dict:
    return {
        "mvlab_version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def prepare_output(directory: str) -> str:
    os.makedirs(directory, exist_ok=True)
    return directory


def write_json(directory: str, name: str, payload: Mapping[str, Any]) -> str:
    """
    Write *payload* plus metadata to *directory*/*name*.

    Returns:
      The path of the written file
    """
    document = dict(jsonable(payload))
    document["metadata"] = metadata()
    path = os.path.join(directory, name)
    with open(path, "w") as fp:
        json.dump(document, fp, indent=2, sort_keys=True, allow_nan=False)
        fp.write("\n")
    return path


def write_text(directory: str, name: str, writer: Callable[[TextIO], None]) -> str:
    path = os.path.join(directory, name)
    with open(path, "w") as fp:
        writer(fp)
    return path


def write_series(directory: str, name: str, times: np.ndarray, values: np.ndarray) -> str:
    """
    Write a ``t,wp`` CSV file.
    """
    data = np.column_stack([times, values])

    def writer(fp: TextIO) -> None:
        np.savetxt(fp, data, fmt="%.17g", delimiter=",", header="t,wp", comments="")

    return write_text(directory, name, writer)


def write_resolved(config: RunConfig) -> str:
    """
    Echo the effective configuration next to the results.
    """
    return write_text(
        config.output_dir, RESOLVED_NAME, lambda fp: fp.write(config.resolved_toml())
    )


def write_error(directory: str, exc: Exception) -> str:
    """
    Write ``error.json`` describing *exc*.
    """
    details = exc.details if isinstance(exc, MVLabError) else {}
    return write_json(
        directory,
        "error.json",
        {"error": type(exc).__name__, "message": str(exc), "details": details},
    )
