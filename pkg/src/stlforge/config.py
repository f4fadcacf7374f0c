"""Project configuration files: training settings, output paths and the risk section."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SpecError
from .trainer import TrainConfig


@dataclass
class Paths:
    checkpoint_out: str = "checkpoint.json"
    log_out: str = "train_log.csv"
    traj_out: str = "trajectories"


@dataclass
class RiskConfig:
    N: int = 1_000_000
    betas: list[float] = field(default_factory=lambda: [0.95, 0.98, 0.99, 0.999])
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise SpecError("risk N must be positive")
        for b in self.betas:
            if not 0.0 < float(b) < 1.0:
                raise SpecError(f"risk beta must lie in (0, 1), got {b}")


@dataclass
class ProjectConfig:
    train: TrainConfig
    paths: Paths = field(default_factory=Paths)
    risk: RiskConfig = field(default_factory=RiskConfig)
    name: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectConfig":
        if not isinstance(d, dict):
            raise SpecError("config must be a JSON object")
        d = dict(d)
        paths = Paths(**d.pop("paths", {}))
        risk = RiskConfig(**d.pop("risk", {}))
        name = d.pop("name", "")
        d.pop("description", None)
        known = {f.name for f in dataclasses.fields(TrainConfig)}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        try:
            train = TrainConfig(**d)
        except TypeError as exc:
            raise SpecError(f"invalid training config: {exc}") from exc
        return cls(train, paths, risk, name)

    def to_dict(self) -> dict:
        d = {"name": self.name}
        d.update(self.train.to_dict())
        d["paths"] = dataclasses.asdict(self.paths)
        d["risk"] = dataclasses.asdict(self.risk)
        return d


def load_config(path) -> ProjectConfig:
    text = Path(path).read_text()
    if not text.strip():
        raise SpecError(f"config file {path} is empty")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"config is not valid JSON: {exc}") from exc
    return ProjectConfig.from_dict(d)
