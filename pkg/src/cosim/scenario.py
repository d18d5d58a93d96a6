"""Scenario documents: JSON on disk, validated pydantic models in memory."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Literal

import pydantic
from pydantic import Field, model_validator

from .netsim import FlowSpec
from .radio import ChannelConfig
from .synchro import SyncPolicy
from .world import Role, WorldConfig, _Model

PRESET_PACKAGE = "cosim.presets"


class ConfigError(Exception):
    """Base class for scenario problems (CLI exit code 2)."""


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


class Scenario(_Model):
    name: str = Field(min_length=1)
    world: WorldConfig
    channel: ChannelConfig = ChannelConfig()
    flows: tuple[FlowSpec, ...] = ()
    policy: SyncPolicy = SyncPolicy()
    seed: int = Field(default=1, ge=0, lt=2**64)
    horizon_us: int = Field(default=15_000_000, ge=0)
    pair_kind: Literal["UGV-UGV", "UGV-UAV"] = "UGV-UGV"
    los_label: Literal["LOS", "NLOS"] = "LOS"

    @model_validator(mode="after")
    def _check(self) -> Scenario:
        ids = {a.id for a in self.world.agents}
        masters = [a.id for a in self.world.agents if a.role is Role.MASTER]
        if len(masters) != 1:
            raise ValueError(f"exactly one agent must have role 'master', found {masters}")
        for i, flow in enumerate(self.flows):
            for role in ("publisher", "subscriber", "master"):
                agent = getattr(flow, role)
                if agent not in ids:
                    raise ValueError(f"flows[{i}] ({flow.topic}): {role} {agent!r} is not a world agent")
            if flow.master != masters[0]:
                raise ValueError(
                    f"flows[{i}] ({flow.topic}): master {flow.master!r} is not the cluster master {masters[0]!r}"
                )
        return self

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2) + "\n"


def _describe(err: pydantic.ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<scenario>"
        msg = e["msg"].removeprefix("Value error, ")
        parts.append(f"{loc}: {msg}")
    return "; ".join(parts)


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: top level must be an object")
    try:
        return Scenario.model_validate(doc)
    except pydantic.ValidationError as exc:
        raise ValidationError(f"{source}: {_describe(exc)}") from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read: {exc.strerror}") from exc
    return parse_scenario(text, str(path))


def preset_names() -> list[str]:
    files = resources.files(PRESET_PACKAGE).iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def load_preset(name: str) -> Scenario:
    if name not in preset_names():
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}")
    text = resources.files(PRESET_PACKAGE).joinpath(f"{name}.json").read_text()
    return parse_scenario(text, f"preset:{name}")
