"""JSON file formats for states, operators and Kraus maps.

Complex numbers are ``[re, im]`` pairs; every float is written with 17
significant digits so files round-trip exactly.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .statecore import DensityMatrix, PureState, make_pure_state
from .symmetry import KrausMap


class FormatError(ValueError):
    """A file could not be parsed into the expected object."""


def _num(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def dumps(obj, indent: int = 0, step: int = 2) -> str:
    """Minimal JSON writer that controls float formatting."""
    pad = " " * (indent + step)
    if isinstance(obj, dict):
        items = [f'{pad}{json.dumps(str(k))}: {dumps(v, indent + step)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + " " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (list, tuple, dict)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + step) for v in obj) + "\n" + " " * indent + "]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return _num(float(obj))


def complex_to_pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [complex_to_pairs(x) for x in a]


def pairs_to_complex(data, ndim: int) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != ndim + 1 or arr.shape[-1] != 2:
        raise FormatError(f"expected a {ndim}-d array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def write_atomic(path, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path}: top level must be an object")
    return data


def state_to_dict(state) -> dict:
    if isinstance(state, PureState):
        return {"dims": list(state.dims), "amplitudes": complex_to_pairs(state.amplitudes)}
    return {"dims": list(state.dims), "matrix": complex_to_pairs(state.matrix)}


def state_from_dict(data: dict):
    """PureState for an ``amplitudes`` entry, DensityMatrix for a ``matrix`` entry."""
    try:
        dims = [int(d) for d in data["dims"]]
        if "amplitudes" in data:
            return make_pure_state(pairs_to_complex(data["amplitudes"], 1), dims)
        if "matrix" in data:
            return DensityMatrix(tuple(dims), pairs_to_complex(data["matrix"], 2))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed state: {exc}") from exc
    raise FormatError("state needs either 'amplitudes' or 'matrix'")


def load_state(path):
    return state_from_dict(_load_json(path))


def save_state(path, state) -> None:
    write_atomic(path, dumps(state_to_dict(state)) + "\n")


def operator_to_dict(op) -> dict:
    op = np.asarray(op, dtype=complex)
    return {"rows": op.shape[0], "cols": op.shape[1], "matrix": complex_to_pairs(op)}


def operator_from_dict(data: dict) -> np.ndarray:
    try:
        op = pairs_to_complex(data["matrix"], 2)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed operator: {exc}") from exc
    if ("rows" in data and data["rows"] != op.shape[0]) or ("cols" in data and data["cols"] != op.shape[1]):
        raise FormatError("operator rows/cols disagree with the matrix")
    return op


def load_operator(path) -> np.ndarray:
    return operator_from_dict(_load_json(path))


def save_operator(path, op) -> None:
    write_atomic(path, dumps(operator_to_dict(op)) + "\n")


def kraus_to_dict(kmap: KrausMap) -> dict:
    return {
        "in_dim": kmap.in_dim,
        "out_dim": kmap.out_dim,
        "ops": [complex_to_pairs(k) for k in kmap.ops],
    }


def kraus_from_dict(data: dict) -> KrausMap:
    try:
        ops = tuple(pairs_to_complex(k, 2) for k in data["ops"])
        return KrausMap(int(data["in_dim"]), int(data["out_dim"]), ops)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed Kraus map: {exc}") from exc


def load_kraus(path) -> KrausMap:
    return kraus_from_dict(_load_json(path))


def save_kraus(path, kmap: KrausMap) -> None:
    write_atomic(path, dumps(kraus_to_dict(kmap)) + "\n")
