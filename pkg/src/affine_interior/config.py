"""System configuration files.

Schema::

    {"d": 2,
     "maps": [{"matrix": [[0.45, 0], [0, 0.45]], "translation": [0, 0]}, ...],
     "seed": 7,
     "labels": {"name": "..."}}

``matrix`` may be nested rows or a flat row-major list.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attractor import IfsInstance
from .dimension import commutator_norms, default_commutator_tol
from .linalg import MapTuple, batch_singular_values, is_invertible
from .reports import config_hash, dumps

E_JSON = "E_JSON"
E_SCHEMA = "E_SCHEMA"
E_ARITY = "E_ARITY"
E_SINGULAR = "E_SINGULAR"
E_NONFINITE = "E_NONFINITE"
E_IO = "E_IO"

SEED_MAX = 2**64 - 1


class ConfigError(ValueError):
    def __init__(self, code: str, message: str, field: str | None = None,
                 line: int | None = None):
        where = []
        if field:
            where.append(f"field {field}")
        if line:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{code}: {message}{suffix}")
        self.code = code
        self.field = field
        self.line = line


@dataclass(frozen=True, eq=False)
class SystemConfig:
    d: int
    matrices: np.ndarray
    translations: np.ndarray
    seed: int = 0
    labels: dict = field(default_factory=dict)
    gates: dict = field(default_factory=dict, repr=False)

    @property
    def m(self) -> int:
        return self.matrices.shape[0]

    def tuple(self) -> MapTuple:
        return MapTuple(self.matrices)

    def ifs(self) -> IfsInstance:
        return IfsInstance(self.tuple(), self.translations)

    def to_dict(self) -> dict:
        out = {
            "d": self.d,
            "maps": [{"matrix": T.tolist(), "translation": a.tolist()}
                     for T, a in zip(self.matrices, self.translations)],
            "seed": self.seed,
        }
        if self.labels:
            out["labels"] = dict(self.labels)
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def hash(self) -> str:
        return config_hash(self.to_dict())


def compute_gates(tup: MapTuple) -> dict:
    sv = batch_singular_values(tup.maps, np.abs(tup.dets), tup.inverses if tup.d >= 3 else None)
    ad = np.abs(tup.dets)
    worst, pair = commutator_norms(tup)
    return {
        "delta": tup.delta,
        "sum_abs_det": float(np.sum(ad)),
        "sum_det_squared": float(np.sum(ad**2)),
        "level1_t_sum": float(np.sum(sv[:, -1] ** tup.d * ad)),
        "max_commutator_norm": worst,
        "commutator_pair": None if pair is None else list(pair),
        "commutator_tol": default_commutator_tol(tup),
    }


def _line_of(text: str | None, key: str, occurrence: int) -> int | None:
    if text is None:
        return None
    hits = [m.start() for m in re.finditer(re.escape(f'"{key}"'), text)]
    if occurrence < len(hits):
        return text.count("\n", 0, hits[occurrence]) + 1
    return None


def _number_array(raw, name: str, text, key: str, idx: int) -> np.ndarray:
    line = _line_of(text, key, idx)
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(E_SCHEMA, "expected an array of numbers", name, line) from None
    if arr.dtype == object:
        raise ConfigError(E_SCHEMA, "ragged array", name, line)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(E_NONFINITE, "non-finite entry", name, line)
    return arr


def config_from_dict(doc, text: str | None = None) -> SystemConfig:
    if not isinstance(doc, dict):
        raise ConfigError(E_SCHEMA, "top level must be an object")
    d = doc.get("d")
    if isinstance(d, bool) or not isinstance(d, int) or d < 1:
        raise ConfigError(E_SCHEMA, "d must be a positive integer", "d", _line_of(text, "d", 0))
    maps = doc.get("maps")
    if not isinstance(maps, list) or not maps:
        raise ConfigError(E_SCHEMA, "maps must be a non-empty list", "maps",
                          _line_of(text, "maps", 0))
    mats, trans = [], []
    for i, entry in enumerate(maps):
        if not isinstance(entry, dict) or "matrix" not in entry or "translation" not in entry:
            raise ConfigError(E_SCHEMA, "each map needs matrix and translation", f"maps[{i}]",
                              _line_of(text, "matrix", i))
        T = _number_array(entry["matrix"], f"maps[{i}].matrix", text, "matrix", i)
        if T.size != d * d or T.ndim not in (0, 1, 2) or (T.ndim == 2 and T.shape != (d, d)):
            raise ConfigError(E_ARITY, f"map {i} matrix has {T.size} entries, need {d * d}",
                              f"maps[{i}].matrix", _line_of(text, "matrix", i))
        T = T.reshape(d, d)
        a = _number_array(entry["translation"], f"maps[{i}].translation", text,
                          "translation", i)
        if a.size != d or a.ndim > 1:
            raise ConfigError(E_ARITY, f"map {i} translation has {a.size} entries, need {d}",
                              f"maps[{i}].translation", _line_of(text, "translation", i))
        if not is_invertible(T):
            raise ConfigError(E_SINGULAR, f"map {i} matrix is singular",
                              f"maps[{i}].matrix", _line_of(text, "matrix", i))
        mats.append(T)
        trans.append(a.reshape(d))
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= SEED_MAX:
        raise ConfigError(E_SCHEMA, "seed must be an unsigned 64-bit integer", "seed",
                          _line_of(text, "seed", 0))
    labels = doc.get("labels", {})
    if not isinstance(labels, dict):
        raise ConfigError(E_SCHEMA, "labels must be an object", "labels",
                          _line_of(text, "labels", 0))
    mats = np.array(mats)
    trans = np.array(trans)
    gates = compute_gates(MapTuple(mats))
    for arr in (mats, trans):
        arr.setflags(write=False)
    return SystemConfig(d, mats, trans, seed, labels, gates)


def parse_config(source) -> SystemConfig:
    """Parse a config from a path or from JSON text."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(E_IO, f"cannot read {source}: {exc.strerror}") from None
    else:
        text = source
    try:
        # NaN / Infinity tokens parse and are caught by the finiteness check
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(E_JSON, exc.msg, line=exc.lineno) from None
    return config_from_dict(doc, text)


def make_config(maps, translations, seed: int = 0, **labels) -> SystemConfig:
    maps = np.asarray(maps, dtype=float)
    if maps.ndim == 1:
        maps = maps.reshape(-1, 1, 1)
    d = maps.shape[1]
    doc = {"d": d,
           "maps": [{"matrix": T.tolist(), "translation": np.asarray(a, dtype=float).reshape(d).tolist()}
                    for T, a in zip(maps, translations)],
           "seed": seed}
    if labels:
        doc["labels"] = labels
    return config_from_dict(doc)
