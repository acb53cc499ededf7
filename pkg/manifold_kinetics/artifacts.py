# pylint: disable=line-too-long, missing-module-docstring

# Every artifact written by the pipeline is either a CSV file or a JSON document. CSV files start with comment lines
# of the form "# key: value" (config hash, seed, metric, format version), followed by one header row and the data
# rows. Floats are written with 17 significant digits so that a write/read cycle is lossless and repeated runs
# produce byte-identical files.

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Any, Sequence, Union

import numpy as np
import orjson as json

from manifold_kinetics.exceptions import ConfigError
from manifold_kinetics.utilities import NUMBER_FORMAT

log = logging.getLogger(__name__)  # get a module-level logger

PathLike = Union[str, Path]


@dataclass
class CsvArtifact:
    """ The content of a CSV artifact: column names, a float matrix and the metadata comment lines. """
    columns: List[str]
    data: np.ndarray
    meta: Dict[str, str] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def write_csv(path: PathLike, columns: Sequence[str], data: np.ndarray, *, meta: Dict[str, Any] = None) -> None:
    """
    Write a float matrix as CSV with metadata comments and a header row.
    :param path: Destination file; parent directories are created.
    :param columns: One name per column of `data`.
    :param data: A two-dimensional array (possibly with zero rows).
    :param meta: Optional metadata, written as "# key: value" lines in sorted key order.
    """
    data = np.asarray(data, dtype=float).reshape(-1, len(columns))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf8", newline="\n") as handle:
        for key in sorted(meta or {}):
            handle.write(f"# {key}: {meta[key]}\n")
        handle.write(",".join(columns) + "\n")
        np.savetxt(handle, data, fmt=NUMBER_FORMAT, delimiter=",")
    log.debug("wrote %d rows to %s", data.shape[0], path)


def read_csv(path: PathLike) -> CsvArtifact:
    """
    Read a CSV artifact written by `write_csv`.
    :param path: The file to read.
    :return: The columns, data and metadata of the artifact.
    :raises:
        ConfigError: The file does not exist, has no header row, or its rows do not parse as a float matrix.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), "file does not exist")
    lines = path.read_text(encoding="utf8").splitlines()
    meta: Dict[str, str] = {}
    for number, line in enumerate(lines):
        if not line.strip():
            continue
        if not line.startswith("#"):
            break
        key, _, value = line[1:].partition(":")
        meta[key.strip()] = value.strip()
    else:
        raise ConfigError(str(path), "missing header row")
    columns = [name.strip() for name in lines[number].split(",")]
    rows = [line for line in lines[number + 1:] if line.strip()]
    if not rows:
        return CsvArtifact(columns, np.empty((0, len(columns))), meta)
    try:
        data = np.loadtxt(rows, dtype=float, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise ConfigError(str(path), "non-numeric value or ragged row", exc) from exc
    if data.shape[1] != len(columns):
        raise ConfigError(str(path), f"{data.shape[1]} values per row under {len(columns)} column names")
    return CsvArtifact(columns, data, meta)


def write_json(path: PathLike, document: Dict[str, Any]) -> None:
    """ Write a JSON document with sorted keys and numpy support. """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(json.dumps(document, option=json.OPT_INDENT_2 | json.OPT_SORT_KEYS | json.OPT_SERIALIZE_NUMPY))


def read_json(path: PathLike) -> Dict[str, Any]:
    """
    Read a JSON document.
    :raises:
        ConfigError: The file is missing or is not valid JSON.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), "file does not exist")
    try:
        return json.loads(path.read_bytes())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"malformed JSON at line {exc.lineno}, column {exc.colno}", exc) from exc
