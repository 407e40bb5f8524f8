"""Run configuration file handling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

from layoutmod.errors import InvalidInputError
from layoutmod.modulation import ModulationParams
from layoutmod.sampler import Ablation, ToyModelSpec

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    params: ModulationParams = field(default_factory=ModulationParams)
    model: ToyModelSpec = field(default_factory=ToyModelSpec)
    ablation: Ablation = field(default_factory=Ablation)
    seed: int = 0
    num_seeds: int = 1

    @property
    def seeds(self) -> list[int]:
        return list(range(self.seed, self.seed + self.num_seeds))

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "num_seeds": self.num_seeds,
            "params": self.params.to_json(),
            "model": self.model.to_json(),
            "ablation": self.ablation.to_json(),
        }

    def with_overrides(self, seed: int | None = None, num_seeds: int | None = None, **flags: bool) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if num_seeds is not None:
            cfg = replace(cfg, num_seeds=num_seeds)
        set_flags = {k: True for k, v in flags.items() if v}
        if set_flags:
            cfg = replace(cfg, ablation=replace(cfg.ablation, **set_flags))
        return cfg


def parse_config(document: bytes | str | dict | None) -> RunConfig:
    if document is None:
        return RunConfig()
    if isinstance(document, dict):
        obj = document
    else:
        try:
            obj = json.loads(document)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise InvalidInputError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise InvalidInputError("config must be a JSON object")
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported config schema_version {version}")
    unknown = set(obj) - {"schema_version", "seed", "num_seeds", "params", "model", "ablation"}
    if unknown:
        raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
    try:
        ablation = obj.get("ablation", {})
        bad = set(ablation) - set(Ablation.__dataclass_fields__)
        if bad:
            raise InvalidInputError(f"unknown ablation flags: {sorted(bad)}")
        cfg = RunConfig(
            params=ModulationParams.from_json(obj.get("params", {})),
            model=ToyModelSpec.from_json(obj.get("model", {})),
            ablation=Ablation(**{k: bool(v) for k, v in ablation.items()}),
            seed=int(obj.get("seed", 0)),
            num_seeds=int(obj.get("num_seeds", 1)),
        )
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"invalid config: {exc}") from exc
    if cfg.num_seeds < 1:
        raise InvalidInputError("num_seeds must be >= 1")
    return cfg
