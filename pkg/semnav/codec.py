"""File-format conventions shared by every artefact semnav writes.

Floats are written at nine significant digits of their float32 value, the
precision at which a float32 round-trips through decimal text. Because the
writer controls key order and number formatting, write→read→write yields
identical bytes.
"""

from __future__ import annotations

import csv
import json
import typing as typ

import numpy as np

from .errors import OperationalError

if typ.TYPE_CHECKING:
    import collections.abc as cabc
    import pathlib

    import numpy.typing as npt

SIGNIFICANT_DIGITS: typ.Final = 9

type JsonValue = (
    str | int | float | bool | None | list[JsonValue] | dict[str, JsonValue]
)


class ArrayPayload(typ.TypedDict):
    """A numeric array flattened in row-major order."""

    shape: list[int]
    values: list[float]


def quantize(value: float) -> float:
    """Return *value* rounded to the float32 decimal the files store."""
    return float(f"{np.float32(value):.{SIGNIFICANT_DIGITS}g}")


def vector_to_list(vector: npt.ArrayLike) -> list[float]:
    """Flatten *vector* into quantized floats."""
    flat = np.asarray(vector, dtype=np.float64).ravel()
    return [quantize(float(item)) for item in flat]


def array_to_payload(array: npt.ArrayLike) -> ArrayPayload:
    """Encode *array* with its shape."""
    values = np.asarray(array, dtype=np.float64)
    return {"shape": list(values.shape), "values": vector_to_list(values)}


def payload_to_array(payload: ArrayPayload) -> np.ndarray:
    """Decode an :class:`ArrayPayload` back into a float64 array."""
    values = np.asarray(payload["values"], dtype=np.float64)
    return values.reshape(tuple(payload["shape"]))


def dumps(document: object) -> str:
    """Serialize *document* with the project-wide JSON layout."""
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def write_json(path: pathlib.Path, document: object) -> pathlib.Path:
    """Write *document* to *path*, creating parent directories."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(document), encoding="utf-8")
    except OSError as error:
        message = f"cannot write {path}: {error}"
        raise OperationalError(
            message, operation="write-json", resource=path
        ) from error
    return path


def read_json(path: pathlib.Path) -> typ.Any:  # noqa: ANN401 - decoded JSON is untyped
    """Read a JSON document, reporting the path on failure."""
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as error:
        message = f"cannot read {path}: {error}"
        raise OperationalError(
            message, operation="read-json", resource=path
        ) from error


def write_jsonl(path: pathlib.Path, records: cabc.Iterable[object]) -> pathlib.Path:
    """Write one compact JSON document per line."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record, separators=(",", ":")))
                handle.write("\n")
    except OSError as error:
        message = f"cannot write {path}: {error}"
        raise OperationalError(
            message, operation="write-jsonl", resource=path
        ) from error
    return path


def append_jsonl(path: pathlib.Path, records: cabc.Iterable[object]) -> None:
    """Append JSON lines to *path*."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record, separators=(",", ":")))
                handle.write("\n")
    except OSError as error:
        message = f"cannot append to {path}: {error}"
        raise OperationalError(
            message, operation="append-jsonl", resource=path
        ) from error


def write_csv(
    path: pathlib.Path,
    header: cabc.Sequence[str],
    rows: cabc.Iterable[cabc.Sequence[object]],
) -> pathlib.Path:
    """Write a CSV file with a fixed header row."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as error:
        message = f"cannot write {path}: {error}"
        raise OperationalError(
            message, operation="write-csv", resource=path
        ) from error
    return path


def read_csv(path: pathlib.Path) -> list[dict[str, str]]:
    """Read a CSV file into one mapping per row."""
    try:
        with path.open("r", encoding="utf-8", newline="") as handle:
            return list(csv.DictReader(handle))
    except (OSError, UnicodeDecodeError) as error:
        message = f"cannot read {path}: {error}"
        raise OperationalError(
            message, operation="read-csv", resource=path
        ) from error


def format_float(value: float, digits: int = 6) -> str:
    """Render *value* for CSV columns with a fixed number of decimals."""
    return f"{value:.{digits}f}"
