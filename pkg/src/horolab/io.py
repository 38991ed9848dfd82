"""Deterministic artifacts, experiment configuration and the golden-value registry."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from . import __version__
from .errors import ConfigurationInvalid

TOOL = "horolab"
SCHEMA_VERSION = 1


# --- canonical JSON ----------------------------------------------------------


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0.0:
        return "0.0"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (tuple, set, frozenset)):
        return list(obj) if not isinstance(obj, (set, frozenset)) else sorted(obj)
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON with sorted keys and every float printed with 17 significant digits."""
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted((str(k), v) for k, v in obj.items())
        body = ",\n".join(f"{pad}{json.dumps(k)}: {dumps(v, indent, _level + 1)}" for k, v in items)
        return "{\n" + body + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(_plain(v), (int, float, str, bool)) or v is None for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        body = ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj)
        return "[\n" + body + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(v):
    v = _plain(v)
    if isinstance(v, float):
        return _float(v).strip('"')
    return v


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_csv_cell(v) for v in r])


# --- configuration -------------------------------------------------------------


DEFAULTS = {
    "seed": 0,
    "tolerances": {"algebraic": 1e-9, "geometric": 1e-3, "class_threshold": 0.1},
    "budgets": {"B": 3.2, "M": 20, "max_len": 4, "slack_cap": 3.2, "cap": 2_000_000},
    "inputs": {"bundle": "", "graph": ""},
    "output_dir": "horolab-out",
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base:
            out[k] = copy.deepcopy(v)
        elif isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigurationInvalid(f"{where} must be a table")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def _coerce(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def load(cls, path=None, overrides=()) -> "ExperimentConfig":
        data = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                with open(path, "rb") as fh:
                    data = _merge(data, tomli.load(fh))
            except (OSError, tomli.TOMLDecodeError) as exc:
                raise ConfigurationInvalid(f"cannot read config {path}: {exc}") from exc
        cfg = cls(data)
        for item in overrides:
            cfg.set(item)
        cfg.validate()
        return cfg

    def set(self, item: str) -> None:
        """Apply a 'dotted.key=value' override; values are parsed as TOML literals."""
        if "=" not in item:
            raise ConfigurationInvalid(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = self.data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigurationInvalid(f"{key} does not name a table entry")
        node[parts[-1]] = _coerce(raw.strip())

    def validate(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigurationInvalid("seed must be an integer")
        for k, v in self.data["tolerances"].items():
            if not isinstance(v, (int, float)) or v <= 0:
                raise ConfigurationInvalid(f"tolerances.{k} must be positive")
        for k, v in self.data["budgets"].items():
            if not isinstance(v, (int, float)) or v <= 0:
                raise ConfigurationInvalid(f"budgets.{k} must be positive")

    @property
    def seed(self) -> int:
        return self.data["seed"]

    def tol(self, name: str) -> float:
        return float(self.data["tolerances"][name])

    def budget(self, name: str):
        return self.data["budgets"][name]

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output_dir"])

    def describe(self) -> dict:
        """Everything that determines results; the output location is excluded."""
        return {k: v for k, v in self.data.items() if k != "output_dir"}

    @property
    def hash(self) -> str:
        return hashlib.sha256(dumps(self.describe()).encode()).hexdigest()[:16]


def default_config_path() -> Path:
    return Path(str(resources.files("horolab") / "data" / "default.toml"))


# --- artifacts -------------------------------------------------------------------


def envelope(command: str, cfg: ExperimentConfig, result) -> dict:
    return {
        "tool": TOOL,
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_hash": cfg.hash,
        "config": cfg.describe(),
        "result": result,
    }


def write_artifacts(out_dir, name: str, command: str, cfg: ExperimentConfig, result, header=None, rows=None) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{name}.json"]
    paths[0].write_text(dumps(envelope(command, cfg, result)) + "\n")
    if header is not None:
        p = out / f"{name}.csv"
        meta = [("#tool", TOOL), ("#version", __version__), ("#config_hash", cfg.hash)]
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for m in meta:
                w.writerow(m)
        with open(p, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows or []:
                w.writerow([_csv_cell(v) for v in r])
        paths.append(p)
    return paths


def error_payload(exc: BaseException, code: int) -> dict:
    return {"tool": TOOL, "version": __version__, "error": type(exc).__name__, "message": str(exc), "exit_code": code}


# --- golden registry -------------------------------------------------------------


class GoldenRegistry:
    """Named constants pinned to the config hash that produced them."""

    def __init__(self, config_hash: str, values: dict):
        self.config_hash = config_hash
        self.values = values  # name -> {"value": ..., "tol": ..., "rel": bool}

    @classmethod
    def load(cls, path=None) -> "GoldenRegistry":
        if path is None:
            path = resources.files("horolab") / "data" / "golden.json"
        data = json.loads(Path(str(path)).read_text())
        return cls(data["config_hash"], data["values"])

    def to_json(self):
        return {"config_hash": self.config_hash, "values": self.values}

    def value(self, name: str):
        return self.values[name]["value"]

    def matches(self, name: str, observed, config_hash: Optional[str] = None) -> bool:
        """True when observed agrees with the registered value within its tolerance.

        Values pinned under a different config hash are not comparable and
        raise KeyError.
        """
        if config_hash is not None and config_hash != self.config_hash:
            raise KeyError(f"golden values were registered under {self.config_hash}, not {config_hash}")
        rec = self.values[name]
        ref, tol = rec["value"], rec["tol"]
        if isinstance(ref, list):
            obs = list(observed)
            return len(obs) == len(ref) and all(_close(o, r, tol, rec.get("rel", False)) for o, r in zip(obs, ref))
        return _close(observed, ref, tol, rec.get("rel", False))


def _close(o, r, tol, rel):
    if isinstance(r, (int,)) and not isinstance(r, bool) and tol == 0:
        return o == r
    if rel:
        return abs(o - r) <= tol * abs(r)
    return abs(o - r) <= tol
