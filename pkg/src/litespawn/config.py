"""Run configuration: dataclasses plus strict JSON parsing.

The file format is a JSON object. Unknown keys are rejected with the
offending key named; omitted keys take the defaults below.

.. code-block:: json

    {
      "model": {"name": "coupled_ho", "dims": [8, 8], "omegas": [1.0, 1.0], "coupling": 0.1},
      "initial_state": {"spfs": [1, 1], "displacements": [1.0, 0.0]},
      "hbar": 1.0, "dt": 0.001, "t_final": 5.0, "eps_reg": 1e-10,
      "spawn": {"enabled": true, "kind": "gamma", "tau_lite": 0.001},
      "prune": {"enabled": false},
      "oracle_compare": true,
      "output": {"dir": "out"}
    }
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .models import DEFAULT_DENSE_CAP, MODEL_PRESETS
from .spawning import KINDS


class ConfigError(Exception):
    exit_code = 2


class ConfigSchemaError(ConfigError):
    exit_code = 2


class ConfigFileError(ConfigError):
    exit_code = 4


class ConfigInvariantError(ConfigError):
    exit_code = 5


@dataclass
class ModelConfig:
    name: str = "coupled_ho"
    dims: list[int] = field(default_factory=lambda: [8, 8])
    omegas: list[float] | None = None
    coupling: float = 0.1
    dense_cap: int = DEFAULT_DENSE_CAP

    def frequencies(self) -> list[float]:
        return list(self.omegas) if self.omegas is not None else [1.0] * len(self.dims)


@dataclass
class InitialStateConfig:
    spfs: list[int] | None = None
    displacements: list[float] | None = None


@dataclass
class SpawnConfig:
    enabled: bool = False
    kind: str = "gamma"
    tau_lite: float = 0.0
    tau_gain: float = 1e-10
    k_per_event: int = 1
    max_m: list[int] | int | None = None
    cooldown_steps: int = 10
    lookahead: bool = True


@dataclass
class PruneConfig:
    enabled: bool = False
    tau_remove: float = 1e-8
    check_interval: int = 100


@dataclass
class OutputConfig:
    dir: str = "."
    trajectory: str = "trajectory.csv"
    events: str = "events.json"
    summary: str = "summary.json"


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    initial_state: InitialStateConfig = field(default_factory=InitialStateConfig)
    hbar: float = 1.0
    dt: float = 1e-3
    t_final: float = 1.0
    eps_reg: float = 1e-10
    spawn: SpawnConfig = field(default_factory=SpawnConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)
    oracle_compare: bool = True
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def ndof(self) -> int:
        return len(self.model.dims)

    @property
    def nsteps(self) -> int:
        return int(round(self.t_final / self.dt))

    def initial_spfs(self) -> list[int]:
        return list(self.initial_state.spfs) if self.initial_state.spfs is not None else [1] * self.ndof

    def initial_displacements(self) -> list[float]:
        d = self.initial_state.displacements
        return list(d) if d is not None else [0.0] * self.ndof

    def max_spfs(self) -> list[int]:
        mm = self.spawn.max_m
        if mm is None:
            return list(self.model.dims)
        if isinstance(mm, int):
            return [mm] * self.ndof
        return list(mm)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "RunConfig":
        check_invariants(self)
        return self


_SECTIONS = {
    "model": ModelConfig,
    "initial_state": InitialStateConfig,
    "spawn": SpawnConfig,
    "prune": PruneConfig,
    "output": OutputConfig,
}


def _coerce(path: str, value: Any, annotation: str) -> Any:
    ann = annotation.replace(" ", "")
    nullable = "None" in ann
    if value is None:
        if nullable:
            return None
        raise ConfigSchemaError(f"{path}: null is not allowed")
    base = ann.replace("|None", "")
    if base == "bool":
        if not isinstance(value, bool):
            raise ConfigSchemaError(f"{path}: expected a boolean")
        return value
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigSchemaError(f"{path}: expected an integer")
        return value
    if base == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigSchemaError(f"{path}: expected a number")
        return float(value)
    if base == "str":
        if not isinstance(value, str):
            raise ConfigSchemaError(f"{path}: expected a string")
        return value
    if base == "list[int]|int":
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        return _coerce(path, value, "list[int]")
    if base.startswith("list["):
        inner = base[5:-1]
        if not isinstance(value, list):
            raise ConfigSchemaError(f"{path}: expected a list")
        return [_coerce(f"{path}[{i}]", v, inner) for i, v in enumerate(value)]
    raise ConfigSchemaError(f"{path}: unsupported type {annotation}")


def _build(cls, data: Any, prefix: str):
    if not isinstance(data, dict):
        raise ConfigSchemaError(f"{prefix or 'config'}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in fields:
            raise ConfigSchemaError(f"unknown key {path!r}")
        if not prefix and key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = _coerce(path, value, fields[key].type)
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "").validate()


def check_invariants(cfg: RunConfig) -> None:
    def bad(key: str, why: str, cross_field: bool = False):
        cls = ConfigInvariantError if cross_field else ConfigSchemaError
        raise cls(f"{key}: {why}")

    if not (cfg.dt > 0 and math.isfinite(cfg.dt)):
        bad("dt", "must be a positive finite number")
    if not cfg.t_final >= 0:
        bad("t_final", "must be >= 0")
    if cfg.t_final > 0 and abs(cfg.nsteps * cfg.dt - cfg.t_final) > 1e-9 * cfg.t_final:
        bad("t_final", "must be an integer multiple of dt", cross_field=True)
    if not cfg.hbar > 0:
        bad("hbar", "must be positive")
    if not cfg.eps_reg > 0:
        bad("eps_reg", "must be positive")
    m = cfg.model
    if m.name not in MODEL_PRESETS:
        bad("model.name", f"unknown model; choose from {sorted(MODEL_PRESETS)}")
    if len(m.dims) < 2:
        bad("model.dims", "at least two DOFs are required")
    if any(n < 2 for n in m.dims):
        bad("model.dims", "each primitive dimension must be >= 2")
    if len(m.frequencies()) != len(m.dims) or any(w <= 0 for w in m.frequencies()):
        bad("model.omegas", "need one positive frequency per DOF", cross_field=True)
    if math.prod(m.dims) > m.dense_cap:
        bad("model.dims", f"dense dimension {math.prod(m.dims)} exceeds dense_cap {m.dense_cap}", cross_field=True)
    spfs = cfg.initial_spfs()
    if len(spfs) != cfg.ndof or any(not 1 <= s <= n for s, n in zip(spfs, m.dims)):
        bad("initial_state.spfs", "need one count per DOF with 1 <= m <= n", cross_field=True)
    if len(cfg.initial_displacements()) != cfg.ndof:
        bad("initial_state.displacements", "need one displacement per DOF", cross_field=True)
    s = cfg.spawn
    if s.kind not in ("delta", "gamma"):
        bad("spawn.kind", f"must be 'delta' or 'gamma' (known operators: {KINDS})")
    if not s.tau_lite >= 0:
        bad("spawn.tau_lite", "must be >= 0")
    if not s.tau_gain >= 0:
        bad("spawn.tau_gain", "must be >= 0")
    if s.k_per_event < 1:
        bad("spawn.k_per_event", "must be >= 1")
    if s.cooldown_steps < 0:
        bad("spawn.cooldown_steps", "must be >= 0")
    mx = cfg.max_spfs()
    if len(mx) != cfg.ndof or any(not 1 <= a <= n for a, n in zip(mx, m.dims)):
        bad("spawn.max_m", "must satisfy 1 <= max_m <= n for every DOF", cross_field=True)
    p = cfg.prune
    if not p.tau_remove >= 0:
        bad("prune.tau_remove", "must be >= 0")
    if p.check_interval < 1:
        bad("prune.check_interval", "must be >= 1")


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigFileError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigSchemaError(f"malformed JSON in {path}: {exc}") from None
    return config_from_dict(data)


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
