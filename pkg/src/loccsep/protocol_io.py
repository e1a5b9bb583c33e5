"""JSON serialization of protocol trees (and optionally the task they solve).

Layout::

    {
      "format": "loccsep-protocol",
      "version": 1,
      "task": {                      # optional
        "phi_alice": VEC, "phi_bob": VEC, "psi_alice": VEC, "psi_bob": VEC,
        "target_phi_alice": VEC, "target_phi_bob": VEC,
        "target_psi_alice": VEC, "target_psi_bob": VEC,
        "prior_phi": 0.5, "prior_psi": 0.5
      },
      "protocol": NODE
    }

    NODE = {"party": "A" | "B",
            "kraus": {LABEL: MATRIX, ...},
            "children": {LABEL: NODE, ...}}
         | {"verdict": "success" | "failure",
            "outputA": VEC | null, "outputB": VEC | null}

    VEC    = [[re, im], ...]
    MATRIX = [[[re, im], ...], ...]          # row-major, rows = output dim

Kraus operators are listed in outcome order.  Decoding errors raise
:class:`ProtocolParseError` addressed by a JSON path (``$.protocol.children...``);
well-formed JSON describing an invalid tree raises :class:`ProtocolStructureError`
addressed by the outcome-label path.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import LoccSepError, ProtocolParseError, ProtocolStructureError
from .locc import Leaf, LoccTask, Measurement, ProtocolNode
from .qcore import Instrument, KrausOperator, PureState

FORMAT = "loccsep-protocol"
VERSION = 1
STATE_NORM_TOL = 1e-8
TASK_FIELDS = (
    "phi_alice", "phi_bob", "psi_alice", "psi_bob",
    "target_phi_alice", "target_phi_bob", "target_psi_alice", "target_psi_bob",
)


# -- encoding -----------------------------------------------------------------

def _encode_complex_array(a: np.ndarray):
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _encode_state(state: PureState | None):
    return None if state is None else _encode_complex_array(state.amplitudes)


def node_to_dict(node: ProtocolNode) -> dict:
    if isinstance(node, Leaf):
        return {
            "verdict": node.verdict,
            "outputA": _encode_state(node.output_alice),
            "outputB": _encode_state(node.output_bob),
        }
    return {
        "party": node.party,
        "kraus": {op.label: _encode_complex_array(op.matrix) for op in node.instrument},
        "children": {label: node_to_dict(child) for label, child in node.children.items()},
    }


def task_to_dict(task: LoccTask) -> dict:
    out = {name: _encode_state(getattr(task, name)) for name in TASK_FIELDS}
    out["prior_phi"] = task.prior_phi
    out["prior_psi"] = task.prior_psi
    return out


def dumps(root: ProtocolNode, task: LoccTask | None = None) -> str:
    doc = {"format": FORMAT, "version": VERSION}
    if task is not None:
        doc["task"] = task_to_dict(task)
    doc["protocol"] = node_to_dict(root)
    return json.dumps(doc, indent=1)


def dump(path, root: ProtocolNode, task: LoccTask | None = None) -> None:
    Path(path).write_text(dumps(root, task) + "\n", encoding="utf-8")


# -- decoding -----------------------------------------------------------------

def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ProtocolParseError(where, f"expected a finite number, got {x!r}")
    return float(x)


def _complex(x, where):
    if not isinstance(x, list) or len(x) != 2:
        raise ProtocolParseError(where, f"expected a [re, im] pair, got {x!r}")
    return complex(_number(x[0], f"{where}[0]"), _number(x[1], f"{where}[1]"))


def _vector(x, where) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ProtocolParseError(where, "expected a nonempty list of [re, im] pairs")
    return np.array([_complex(v, f"{where}[{i}]") for i, v in enumerate(x)])


def _state(x, where) -> PureState:
    v = _vector(x, where)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > STATE_NORM_TOL:
        raise ProtocolParseError(where, f"state has norm {norm:.12g}, expected 1")
    return PureState(v / norm)


def _matrix(x, where) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ProtocolParseError(where, "expected a nonempty list of rows")
    rows = [_vector(r, f"{where}[{i}]") for i, r in enumerate(x)]
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ProtocolParseError(f"{where}[{i}]", f"row has length {len(r)}, expected {width}")
    return np.array(rows)


def _object(x, where, required=()):
    if not isinstance(x, dict):
        raise ProtocolParseError(where, f"expected an object, got {type(x).__name__}")
    for key in required:
        if key not in x:
            raise ProtocolParseError(where, f"missing field {key!r}")
    return x


def node_from_dict(obj, where: str = "$.protocol", path: tuple = ()) -> ProtocolNode:
    obj = _object(obj, where)
    if "verdict" in obj:
        out = {}
        for key in ("outputA", "outputB"):
            val = obj.get(key)
            out[key] = None if val is None else _state(val, f"{where}.{key}")
        try:
            return Leaf(obj["verdict"], out["outputA"], out["outputB"])
        except ProtocolStructureError as exc:
            raise ProtocolStructureError(path, exc.message) from None
    _object(obj, where, ("party", "kraus", "children"))
    kraus = _object(obj["kraus"], f"{where}.kraus")
    children = _object(obj["children"], f"{where}.children")
    if not kraus:
        raise ProtocolParseError(f"{where}.kraus", "instrument has no outcomes")
    try:
        instrument = Instrument(
            [KrausOperator(_matrix(m, f"{where}.kraus.{label}"), label) for label, m in kraus.items()]
        )
    except (ProtocolParseError, ProtocolStructureError):
        raise
    except LoccSepError as exc:
        raise ProtocolStructureError(path, f"invalid instrument: {exc}") from None
    decoded = {
        label: node_from_dict(child, f"{where}.children.{label}", path + (label,))
        for label, child in children.items()
    }
    try:
        return Measurement(obj["party"], instrument, decoded)
    except ProtocolStructureError as exc:
        raise ProtocolStructureError(path, exc.message) from None


def task_from_dict(obj, where: str = "$.task") -> LoccTask:
    obj = _object(obj, where, TASK_FIELDS)
    states = [_state(obj[name], f"{where}.{name}") for name in TASK_FIELDS]
    s = _number(obj.get("prior_phi", 0.5), f"{where}.prior_phi")
    t = _number(obj.get("prior_psi", 1.0 - s), f"{where}.prior_psi")
    try:
        return LoccTask(*states, s, t)
    except LoccSepError as exc:
        raise ProtocolParseError(where, str(exc)) from None


def loads(text: str) -> tuple[ProtocolNode, LoccTask | None]:
    """Decode a protocol document; returns the tree and the embedded task, if any."""
    if not text.strip():
        raise ProtocolParseError("$", "empty protocol file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolParseError("$", f"invalid JSON: {exc}") from None
    doc = _object(doc, "$", ("protocol",))
    if doc.get("format", FORMAT) != FORMAT:
        raise ProtocolParseError("$.format", f"unknown format {doc['format']!r}")
    if doc.get("version", VERSION) != VERSION:
        raise ProtocolParseError("$.version", f"unsupported version {doc['version']!r}")
    task = task_from_dict(doc["task"]) if doc.get("task") is not None else None
    return node_from_dict(doc["protocol"]), task


def load(path) -> tuple[ProtocolNode, LoccTask | None]:
    return loads(Path(path).read_text(encoding="utf-8"))
