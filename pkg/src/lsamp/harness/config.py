"""Strict JSON configuration for sweeps and reconstructions."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..bigamp import BigampOptions
from ..errors import InvalidArgumentError
from ..gamp import GampOptions
from ..sensing import normalize_kind
from ..turbo import TurboConfig

ALGORITHMS = ("lsamp", "independent", "jointsparse")


@dataclass
class SweepSpec:
    ratios: list = field(default_factory=lambda: [0.2, 0.3, 0.4, 0.5])
    seeds: int = 10
    ensembles: list = field(default_factory=lambda: ["gaussian"])
    snr_db: float = 25.0
    N: int = 128
    T: int = 32
    R: int = 3
    K: int = 16
    algorithms: list = field(default_factory=lambda: ["lsamp", "independent"])
    master_seed: int = 0
    workers: int = 1
    save_reconstructions: bool = False
    turbo: TurboConfig = field(default_factory=TurboConfig)

    def __post_init__(self):
        if isinstance(self.turbo, dict):
            self.turbo = from_dict(TurboConfig, self.turbo)
        if isinstance(self.ensembles, str):
            self.ensembles = [self.ensembles]
        self.ensembles = [normalize_kind(k) for k in self.ensembles]
        self.ratios = [float(r) for r in self.ratios]
        if not self.ratios or any(not 0 < r <= 1 for r in self.ratios):
            raise InvalidArgumentError("ratios must be a non-empty list in (0, 1]")
        if self.seeds < 1 or self.workers < 1:
            raise InvalidArgumentError("seeds and workers must be >= 1")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            raise InvalidArgumentError(f"unknown algorithms {unknown}; choose from {ALGORITHMS}")
        if min(self.N, self.T, self.R, self.K) < 1 or self.K > self.N \
                or self.R > min(self.K, self.T):
            raise InvalidArgumentError("dimensions must satisfy 1 <= R <= min(K, T), K <= N")


_NESTED = {"turbo": TurboConfig, "gamp": GampOptions, "bigamp": BigampOptions}


def from_dict(cls, data):
    """Build dataclass ``cls`` from ``data``, rejecting unknown keys at every level."""
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{cls.__name__} config must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise InvalidArgumentError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get(key)
        kwargs[key] = from_dict(sub, value) if sub is not None and isinstance(value, dict) \
            else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InvalidArgumentError(str(exc)) from exc


def to_dict(obj):
    return dataclasses.asdict(obj)


def load_json(path, cls):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: invalid JSON: {exc}") from exc
    return from_dict(cls, data)
