"""Flat JSON configuration for simulations and the command line.

Every key sits at the top level of one JSON object; cell parameters are mixed
in with simulation and learning parameters. Unknown keys are rejected.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .allocator import PolicyKind, policy_from_name
from .channel import CellConfig
from .synth import APPLICATIONS, DEFAULT_DEMANDS, Persona, default_personas
from .zot import check_level


@dataclass(frozen=True)
class SimulationConfig:
    cell: CellConfig = field(default_factory=CellConfig)
    user_personas: tuple[int, ...] = (0, 1, 2)
    duration_s: float = 86400.0
    ts_len_s: float = 1.0
    s_min: int = 4
    seed: int = 0
    policy: str = "personalized"
    warmup_s: float = 600.0
    learning_rate: float = 0.1
    drift_threshold: float = 50.0
    tolerance_noise_std: float = 0.05
    min_frac: float = 0.4
    demands: dict = field(default_factory=lambda: dict(DEFAULT_DEMANDS))
    dev_users_per_persona: int = 3
    dev_duration_s: float = 86400.0
    dev_holdout: float = 0.2
    min_bucket_samples: int = 20
    withhold_personas: bool = False
    num_clusters: int = 4

    def __post_init__(self):
        object.__setattr__(self, "user_personas", tuple(int(p) for p in self.user_personas))
        if len(self.user_personas) != self.cell.num_users:
            raise ValueError(f"num_users={self.cell.num_users} but {len(self.user_personas)} user personas given")
        if self.duration_s < self.ts_len_s or self.ts_len_s <= 0:
            raise ValueError("need duration_s >= ts_len_s > 0")
        check_level(self.s_min)
        policy_from_name(self.policy, self.s_min)
        if set(self.demands) != set(APPLICATIONS) or any(v <= 0 for v in self.demands.values()):
            raise ValueError(f"demands must give a positive rate for each of {APPLICATIONS}")
        n_personas = len(self.personas())
        if any(not 0 <= p < n_personas for p in self.user_personas):
            raise ValueError(f"user personas must be in 0..{n_personas - 1}")

    @property
    def policy_kind(self) -> PolicyKind:
        return policy_from_name(self.policy, self.s_min)

    @property
    def num_slots(self) -> int:
        return int(round(self.duration_s / self.ts_len_s))

    def personas(self) -> list[Persona]:
        return default_personas(self.cell, self.tolerance_noise_std, self.min_frac)

    def with_(self, **changes) -> "SimulationConfig":
        cell_keys = {f.name for f in fields(CellConfig)}
        cell_changes = {k: changes.pop(k) for k in list(changes) if k in cell_keys}
        cell = replace(self.cell, **cell_changes) if cell_changes else self.cell
        return replace(self, cell=cell, **changes)

    def to_dict(self) -> dict:
        out = asdict(self.cell)
        for f in fields(self):
            if f.name != "cell":
                out[f.name] = getattr(self, f.name)
        out["user_personas"] = list(self.user_personas)
        out["demands"] = dict(self.demands)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        cell_keys = {f.name for f in fields(CellConfig)}
        sim_keys = {f.name for f in fields(cls)} - {"cell"}
        unknown = set(d) - cell_keys - sim_keys
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cell = CellConfig(**{k: v for k, v in d.items() if k in cell_keys})
        return cls(cell=cell, **{k: v for k, v in d.items() if k in sim_keys})

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SimulationConfig":
        d = json.loads(text)
        if not isinstance(d, dict):
            raise ValueError("config must be a JSON object")
        return cls.from_dict(d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SimulationConfig":
        return cls.loads(Path(path).read_text(encoding="utf-8"))
