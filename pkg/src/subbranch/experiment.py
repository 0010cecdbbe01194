"""Experiment files: a model plus optional interarrival and sojourn laws."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .arb import ARBConfig, parse_sojourn, sojourn_to_dict
from .errors import ConfigError
from .model import load_node, model_to_dict, parse_model
from .renewal import parse_interarrival, wait_to_dict

_KNOWN = {"offspring", "migration", "initial", "interarrival", "sojourn"}


@dataclass(frozen=True)
class Experiment:
    model: object
    interarrival: object = None
    sojourn: object = None
    source: str = ""

    @property
    def arb(self):
        if self.interarrival is None or self.sojourn is None:
            raise ConfigError("the alternating process needs both interarrival and sojourn laws")
        return ARBConfig(self.model, self.interarrival, self.sojourn)

    def resolved(self):
        d = model_to_dict(self.model)
        if self.interarrival is not None:
            d["interarrival"] = wait_to_dict(self.interarrival)
        if self.sojourn is not None:
            d["sojourn"] = sojourn_to_dict(self.sojourn)
        return d

    def digest(self):
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_experiment(text, source=""):
    root = load_node(text)
    for k in root.keys():
        if k not in _KNOWN:
            raise root.error(f"unknown section {k!r}; expected {sorted(_KNOWN)}", k)
    model = parse_model(root)
    wait = parse_interarrival(root.child("interarrival")) if root.has("interarrival") else None
    soj = parse_sojourn(root.child("sojourn")) if root.has("sojourn") else None
    return Experiment(model, wait, soj, source)


def load_experiment(path):
    """Read an experiment file; ``builtin:NAME`` loads a shipped config."""
    path = str(path)
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        if name not in builtin_names():
            raise ConfigError(f"no builtin config {name!r}; choose from {', '.join(builtin_names())}", field=path)
        text = resources.files("subbranch").joinpath("configs", f"{name}.yaml").read_text()
        return parse_experiment(text, path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", field=path) from None
    return parse_experiment(text, path)


def builtin_names():
    return sorted(p.name[:-5] for p in resources.files("subbranch").joinpath("configs").iterdir() if p.name.endswith(".yaml"))
