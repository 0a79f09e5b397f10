"""Chain, window and result file formats.

All states are 1-based in files. Results are written as JSON (canonical) or
as a flat CSV export; NaN (flagged arbitrary entries) becomes ``null`` in
JSON and an empty field in CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .chain import ChainSpec, validate_chain
from .errors import (
    ChainValidationError,
    ClusterOutOfRange,
    EmptyCluster,
    ParseError,
    ValidationError,
    WindowError,
)
from .reversal import ArbitraryPolicy, ObservationWindow, ReversedProcess

EXAMPLES_DIR = Path(__file__).parent / "examples"


def shipped_examples() -> list[Path]:
    return sorted(EXAMPLES_DIR.glob("*.json"))


def resolve_example(name: str) -> Path:
    path = EXAMPLES_DIR / f"{name}.json"
    if not path.is_file():
        known = ", ".join(p.stem for p in shipped_examples())
        raise ParseError(f"unknown example {name!r}; shipped examples: {known}")
    return path


def load_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def parse_cluster(text: Any, num_states: int | None = None, name: str = "cluster") -> frozenset[int]:
    """Parse a 1-based cluster from "1,3" / "1 3" / a list of integers."""
    if isinstance(text, str):
        tokens = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    elif isinstance(text, (list, tuple, set, frozenset)):
        tokens = list(text)
    else:
        raise ParseError(f"{name}: expected a list of states, got {text!r}")
    if not tokens:
        raise EmptyCluster(f"{name} is empty")
    states = set()
    for tok in tokens:
        if isinstance(tok, bool):
            raise ParseError(f"{name}: {tok!r} is not a state")
        try:
            s = int(tok)
        except (TypeError, ValueError):
            raise ParseError(f"{name}: {tok!r} is not an integer state") from None
        if isinstance(tok, float) and s != tok:
            raise ParseError(f"{name}: {tok!r} is not an integer state")
        if s < 1 or (num_states is not None and s > num_states):
            hi = num_states if num_states is not None else "N"
            raise ClusterOutOfRange(f"{name}: state {s} outside 1..{hi}")
        states.add(s)
    return frozenset(states)


def parse_chain(doc: Mapping[str, Any], source: str = "<chain>") -> ChainSpec:
    if not isinstance(doc, Mapping):
        raise ParseError(f"{source}: chain document must be a JSON object")
    try:
        return validate_chain(doc)
    except ChainValidationError as exc:
        raise ValidationError(source, exc) from exc


def parse_window(doc: Mapping[str, Any], num_states: int, source: str = "<window>") -> ObservationWindow:
    if not isinstance(doc, Mapping):
        raise ParseError(f"{source}: window must be a JSON object")
    missing = [k for k in ("length", "c0", "cl") if k not in doc]
    if missing:
        raise ParseError(f"{source}: window is missing {', '.join(missing)}")
    length = doc["length"]
    if isinstance(length, bool) or not isinstance(length, int):
        raise ParseError(f"{source}: length must be an integer")
    c0 = parse_cluster(doc["c0"], num_states, "c0")
    cl = parse_cluster(doc["cl"], num_states, "cl")
    try:
        return ObservationWindow(length, c0, cl)
    except WindowError as exc:
        raise type(exc)(f"{source}: {exc}") from None


def parse_inputs(chain_path: str | Path, window_args: Mapping[str, Any] | None = None):
    """Load a chain file and assemble its observation window.

    Window fields come from, in increasing priority: a ``window`` object
    embedded in the chain file, ``window_args["window"]`` (a window file
    path) and the explicit ``length``/``c0``/``cl`` entries of
    ``window_args``. Explicit entries may be strings like ``"1,2"``.
    """
    window_args = dict(window_args or {})
    doc = load_json(chain_path)
    chain = parse_chain(doc, str(chain_path))
    fields: dict[str, Any] = {}
    if isinstance(doc, Mapping) and isinstance(doc.get("window"), Mapping):
        fields.update(doc["window"])
    if window_args.get("window"):
        wdoc = load_json(window_args["window"])
        if not isinstance(wdoc, Mapping):
            raise ParseError(f"{window_args['window']}: window must be a JSON object")
        fields.update(wdoc)
    for key in ("length", "c0", "cl"):
        if window_args.get(key) is not None:
            fields[key] = window_args[key]
    if isinstance(fields.get("length"), str):
        try:
            fields["length"] = int(fields["length"])
        except ValueError:
            raise ParseError(f"length: {fields['length']!r} is not an integer") from None
    window = parse_window(fields, chain.num_states, source="window")
    try:
        chain.require_steps(window.length)
    except ChainValidationError as exc:
        raise ValidationError(str(chain_path), exc) from exc
    return chain, window


@dataclass(frozen=True, eq=False)
class ResultFile:
    process: ReversedProcess
    window: ObservationWindow
    standard_errors: dict | None = None
    version: str = __version__


def _nan_to_none(a: np.ndarray):
    if a.ndim == 0:
        x = float(a)
        return None if math.isnan(x) else x
    return [_nan_to_none(x) for x in a]


def _none_to_nan(x) -> np.ndarray:
    def conv(v):
        if isinstance(v, list):
            return [conv(u) for u in v]
        return math.nan if v is None else float(v)

    return np.array(conv(x), dtype=float)


def result_to_dict(result: ResultFile) -> dict:
    proc, win = result.process, result.window
    ell, n = proc.length, proc.num_states
    doc = {
        "tool": "revchain",
        "version": result.version,
        "engine": proc.engine,
        "policy": proc.policy.value,
        "num_states": n,
        "window": {"length": win.length, "c0": sorted(win.c0), "cl": sorted(win.cl)},
        "e": proc.e,
        "pi": _nan_to_none(proc.pi),
        "P": _nan_to_none(proc.p_mats),
        "defined_mask": {
            "pi": proc.pi_defined.tolist(),
            "P": np.broadcast_to(proc.row_defined[:, :, None], (ell, n, n)).tolist(),
        },
    }
    if proc.meta:
        doc["run"] = dict(proc.meta)
    if result.standard_errors is not None:
        se = result.standard_errors
        doc["standard_errors"] = {
            "e": se["e"],
            "pi": _nan_to_none(np.asarray(se["pi"])),
            "P": _nan_to_none(np.asarray(se["P"])),
        }
    return doc


def emit_json(result: ResultFile) -> str:
    # repr-based float output is the shortest decimal that reads back bit-exactly
    return json.dumps(result_to_dict(result), indent=1, allow_nan=False) + "\n"


def result_from_dict(doc: Mapping[str, Any]) -> ResultFile:
    try:
        n = doc["num_states"]
        w = doc["window"]
        window = ObservationWindow(w["length"], frozenset(w["c0"]), frozenset(w["cl"]))
        ell = window.length
        pi = _none_to_nan(doc["pi"]).reshape(ell + 1, n)
        p_mats = _none_to_nan(doc["P"]).reshape(ell, n, n)
        mask = doc["defined_mask"]
        pi_defined = np.array(mask["pi"], dtype=bool).reshape(ell + 1, n)
        row_defined = np.array(mask["P"], dtype=bool).reshape(ell, n, n)[:, :, 0]
        proc = ReversedProcess(
            pi=pi,
            p_mats=p_mats,
            e=float(doc["e"]),
            row_defined=row_defined,
            pi_defined=pi_defined,
            policy=ArbitraryPolicy(doc["policy"]),
            engine=doc["engine"],
            meta=dict(doc.get("run", {})),
        )
        se = None
        if "standard_errors" in doc:
            raw = doc["standard_errors"]
            se = {"e": float(raw["e"]), "pi": _none_to_nan(raw["pi"]), "P": _none_to_nan(raw["P"])}
        return ResultFile(proc, window, se, doc.get("version", __version__))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed result document: {exc!r}") from None


def parse_json(text: str) -> ResultFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"<result>:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return result_from_dict(doc)


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else format(x, ".17g")


CSV_HEADER = ["quantity", "k", "i", "j", "value", "defined", "std_error"]


def emit_csv(result: ResultFile) -> str:
    """One row for e, one per (k, i) marginal entry and one per (k, i, j)
    transition entry."""
    proc, se = result.process, result.standard_errors
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerow(["e", "", "", "", _fmt(proc.e), "true", _fmt(se["e"]) if se else ""])
    for k in range(proc.length + 1):
        for i in range(proc.num_states):
            w.writerow([
                "pi", k, i + 1, "", _fmt(proc.pi[k, i]),
                str(bool(proc.pi_defined[k, i])).lower(),
                _fmt(se["pi"][k][i]) if se else "",
            ])
    for k in range(proc.length):
        for i in range(proc.num_states):
            for j in range(proc.num_states):
                w.writerow([
                    "P", k, i + 1, j + 1, _fmt(proc.p_mats[k, i, j]),
                    str(bool(proc.row_defined[k, i])).lower(),
                    _fmt(se["P"][k][i][j]) if se else "",
                ])
    return buf.getvalue()


def read_csv_values(text: str) -> dict:
    """Map (quantity, k, i, j) -> value from an emitted CSV (NaN for blanks)."""
    out = {}
    for row in csv.DictReader(io.StringIO(text)):
        key = tuple(int(row[c]) if row[c] else None for c in ("k", "i", "j"))
        out[(row["quantity"], *key)] = float(row["value"]) if row["value"] else math.nan
    return out


def write_result(result: ResultFile, fmt: str = "json", out: str | Path | None = None) -> str:
    text = emit_json(result) if fmt == "json" else emit_csv(result)
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text
