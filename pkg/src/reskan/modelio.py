"""Model files in the ``reskan/v1`` schema.

A model file is a UTF-8 JSON document::

    {"schema": "reskan/v1", "order": I, "alpha": a,
     "input_dim": d, "output_dim": D,
     "layers": [{"d_in": m, "d_out": n,
                 "A": [[...n rows of m...]], "b": [...n...],
                 "g": [...min(m, n)...], "beta": [[...I+3 rows of n...]]}, ...],
     "head": {"A": [[...]], "b": [...]},
     "meta": {...}}

Matrices are row-major lists of rows. Floats are written with ``repr`` so
finite values round-trip bit for bit; non-finite values are refused.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .network import ResKanLayer, ResKanNetwork
from .utils import atomic_write_bytes

SCHEMA = "reskan/v1"


class ModelFormatError(ValueError):
    """Raised when a model document is malformed; ``where`` locates the problem."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


def _check_finite(arr: np.ndarray, where: str) -> None:
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        pos = "".join(f"[{int(i)}]" for i in bad[0])
        raise ModelFormatError(f"{where}{pos}", "non-finite value cannot be serialized")


def _to_doc(net: ResKanNetwork) -> dict:
    layers = []
    for li, layer in enumerate(net.layers):
        for name in ("A", "b", "g", "beta"):
            _check_finite(getattr(layer, name), f"layers[{li}].{name}")
        layers.append(
            {
                "d_in": layer.d_in,
                "d_out": layer.d_out,
                "A": layer.A.tolist(),
                "b": layer.b.tolist(),
                "g": layer.g.tolist(),
                "beta": layer.beta.tolist(),
            }
        )
    _check_finite(net.head_A, "head.A")
    _check_finite(net.head_b, "head.b")
    return {
        "schema": SCHEMA,
        "order": net.order,
        "alpha": net.alpha,
        "input_dim": net.d_in,
        "output_dim": net.d_out,
        "layers": layers,
        "head": {"A": net.head_A.tolist(), "b": net.head_b.tolist()},
        "meta": net.meta,
    }


def serialize(net: ResKanNetwork) -> bytes:
    return json.dumps(_to_doc(net), allow_nan=False, indent=1).encode("utf-8")


def _matrix(obj, where: str, shape: tuple[int, int]) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != shape[0]:
        raise ModelFormatError(where, f"expected {shape[0]} rows")
    rows = [_vector(row, f"{where}[{i}]", shape[1]) for i, row in enumerate(obj)]
    return np.array(rows, dtype=np.float64).reshape(shape)


def _vector(obj, where: str, n: int) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != n:
        raise ModelFormatError(where, f"expected a list of {n} numbers")
    for i, v in enumerate(obj):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ModelFormatError(f"{where}[{i}]", "expected a number")
    arr = np.array(obj, dtype=np.float64).reshape(n)
    _check_finite(arr, where)
    return arr


def _int(doc: dict, key: str, where: str) -> int:
    v = doc.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ModelFormatError(f"{where}{key}", "expected a non-negative integer")
    return v


def deserialize(data: bytes | str) -> ResKanNetwork:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    try:
        doc = json.loads(text, parse_constant=lambda c: float("nan"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno} column {exc.colno} (char {exc.pos})", exc.msg) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("$", "top level must be an object")
    if doc.get("schema") != SCHEMA:
        raise ModelFormatError("schema", f"expected {SCHEMA!r}, got {doc.get('schema')!r}")
    order = _int(doc, "order", "")
    alpha = doc.get("alpha")
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not math.isfinite(alpha):
        raise ModelFormatError("alpha", "expected a finite number")
    d_in = _int(doc, "input_dim", "")
    d_out = _int(doc, "output_dim", "")
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list):
        raise ModelFormatError("layers", "expected a list")
    layers = []
    prev = d_in
    for li, ld in enumerate(raw_layers):
        where = f"layers[{li}]"
        if not isinstance(ld, dict):
            raise ModelFormatError(where, "expected an object")
        m = _int(ld, "d_in", f"{where}.")
        n = _int(ld, "d_out", f"{where}.")
        if m != prev:
            raise ModelFormatError(f"{where}.d_in", f"expected {prev} to chain with the previous layer")
        layers.append(
            ResKanLayer(
                _matrix(ld.get("A"), f"{where}.A", (n, m)),
                _vector(ld.get("b"), f"{where}.b", n),
                _vector(ld.get("g"), f"{where}.g", min(m, n)),
                _matrix(ld.get("beta"), f"{where}.beta", (order + 3, n)),
            )
        )
        prev = n
    head = doc.get("head")
    if not isinstance(head, dict):
        raise ModelFormatError("head", "expected an object")
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise ModelFormatError("meta", "expected an object")
    try:
        return ResKanNetwork(
            tuple(layers),
            _matrix(head.get("A"), "head.A", (d_out, prev)),
            _vector(head.get("b"), "head.b", d_out),
            order=order,
            alpha=float(alpha),
            meta=meta,
        )
    except ModelFormatError:
        raise
    except ValueError as exc:
        raise ModelFormatError("$", str(exc)) from None


def save(net: ResKanNetwork, path) -> None:
    atomic_write_bytes(path, serialize(net))


def load(path) -> ResKanNetwork:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
