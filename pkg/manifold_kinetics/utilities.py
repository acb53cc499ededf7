# pylint: disable=line-too-long, missing-module-docstring

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional, TypeVar, Callable, Union, Iterable, List, Any

import numpy as np
import orjson as json
import pendulum

from manifold_kinetics.exceptions import InvalidParameterError

V = TypeVar("V")
K = TypeVar("K")
T = TypeVar("T")

THREADS_VARIABLE = "MK_THREADS"  # environment variable capping worker threads
NUMBER_FORMAT = "%.17g"  # 17 significant digits: a text round trip is lossless


def optional(source: Optional[Dict[K, V]], key: K, default: V = None,
             mapping: Optional[Callable[[V], T]] = None) -> Optional[Union[V, T]]:
    """
    Safely read an entry of a metadata dictionary that may be absent or None.
    :param source: A dictionary of values, which is possibly empty or None.
    :param key: The desired key to access in the dictionary.
    :param default: The default value to return when the value associated with `key` cannot be found.
    :param mapping: An optional mapping to apply to the value or default before returning it.
    :return: The (mapped) value in the dictionary if the key exists, otherwise the (mapped) default.
             Returns None when neither exists.
    """
    if source is None:
        return default if mapping is None or default is None else mapping(default)
    try:
        element = source[key]
        return element if mapping is None else mapping(element)
    except (KeyError, IndexError):
        return default if mapping is None or default is None else mapping(default)


def thread_count() -> int:
    """
    Number of worker threads allowed for data-parallel stages.
    :return: The value of MK_THREADS when set, otherwise min(4, cpu count).
    :raises:
        InvalidParameterError: MK_THREADS is set but not a positive integer.
    """
    value = os.environ.get(THREADS_VARIABLE)
    if value is None or value.strip() == "":
        return max(1, min(4, os.cpu_count() or 1))
    if not value.strip().isdigit() or int(value) < 1:
        raise InvalidParameterError(f"{THREADS_VARIABLE} must be a positive integer, got '{value}'")
    return int(value)


def parallel_map(func: Callable[[V], T], items: Iterable[V]) -> List[T]:
    """ Map `func` over `items` on a bounded thread pool; the output order follows the input order. """
    items = list(items)
    workers = min(thread_count(), max(1, len(items)))
    if workers == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))


def format_number(value: float) -> str:
    """ Render a float with 17 significant digits so that it survives a text round trip bit for bit. """
    return NUMBER_FORMAT % float(value)


def config_hash(config: Dict[str, Any]) -> str:
    """ SHA-256 of the sorted-key JSON rendering of a configuration dictionary. """
    return hashlib.sha256(json.dumps(config, option=json.OPT_SORT_KEYS | json.OPT_SERIALIZE_NUMPY)).hexdigest()


def checksum(*arrays: np.ndarray) -> str:
    """ SHA-256 over the contiguous float64 bytes of the given arrays. """
    digest = hashlib.sha256()
    for array in arrays:
        digest.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
    return digest.hexdigest()


def timestamp() -> str:
    """ Current UTC time in ISO 8601, used for report metadata (never for CSV bodies). """
    return pendulum.now("UTC").to_iso8601_string()


class Stopwatch:
    """ Wall-clock timer based on pendulum, usable as a context manager. """

    def __init__(self):
        self.started_at: Optional[pendulum.DateTime] = None
        self.stopped_at: Optional[pendulum.DateTime] = None

    def __enter__(self) -> "Stopwatch":
        self.started_at = pendulum.now()
        return self

    def __exit__(self, *_):
        self.stopped_at = pendulum.now()

    @property
    def seconds(self) -> float:
        if self.started_at is None:
            return 0.0
        end = self.stopped_at if self.stopped_at is not None else pendulum.now()
        return (end - self.started_at).total_seconds()
