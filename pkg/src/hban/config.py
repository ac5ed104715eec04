"""One JSON document holding every module's configuration.

Each top-level section maps onto a config dataclass; omitted sections and
fields take their defaults, unknown sections or fields are rejected. The CLI
reads the file named by ``--config``, falling back to ``$HBAN_CONFIG``.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .anchors import AnchorConfig
from .assignment import AssignConfig
from .evaluation import SUBSETS, EvalConfig, SubsetSpec
from .fusion import FusionConfig
from .geometry import PartPool
from .losses import LossConfig
from .synth import SceneConfig, ScorerConfig

CONFIG_ENV = "HBAN_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    anchors: AnchorConfig = field(default_factory=AnchorConfig)
    assign: AssignConfig = field(default_factory=AssignConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    parts: PartPool = field(default_factory=PartPool)


_SECTIONS = {
    "anchors": AnchorConfig,
    "assign": AssignConfig,
    "loss": LossConfig,
    "fusion": FusionConfig,
    "scene": SceneConfig,
    "scorer": ScorerConfig,
}


def _build(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{section}] must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"[{section}] unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {e}") from None


def _subset(data) -> SubsetSpec:
    if isinstance(data, str):
        if data not in SUBSETS:
            raise ConfigError(f"[eval] unknown subset {data!r}")
        return SUBSETS[data]
    return _build(SubsetSpec, data, "eval.subset")


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be an object")
    unknown = set(doc) - set(_SECTIONS) - {"eval", "parts"}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    kw = {name: _build(cls, doc[name], name) for name, cls in _SECTIONS.items() if name in doc}
    if "eval" in doc:
        ev = dict(doc["eval"]) if isinstance(doc["eval"], dict) else doc["eval"]
        if isinstance(ev, dict) and "subset" in ev:
            ev["subset"] = _subset(ev["subset"])
        if isinstance(ev, dict) and "fppi_refs" in ev:
            ev["fppi_refs"] = tuple(ev["fppi_refs"])
        kw["eval"] = _build(EvalConfig, ev, "eval")
    if "parts" in doc:
        try:
            kw["parts"] = PartPool.from_dict(doc["parts"])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[parts] {e}") from None
    return RunConfig(**kw)


def config_to_dict(cfg: RunConfig) -> dict:
    out = {name: dataclasses.asdict(getattr(cfg, name)) for name in _SECTIONS}
    ev = dataclasses.asdict(cfg.eval)
    ev["fppi_refs"] = list(ev["fppi_refs"])
    subset = cfg.eval.subset
    if SUBSETS.get(subset.name) == subset:
        ev["subset"] = subset.name
    else:
        ev["subset"] = {k: (str(v) if isinstance(v, float) and math.isinf(v) else v) for k, v in ev["subset"].items()}
    out["eval"] = ev
    out["parts"] = cfg.parts.to_dict()
    for section in ("scene",):
        for k, v in out[section].items():
            if isinstance(v, tuple):
                out[section][k] = list(v)
    return out


def load_config(path: Optional[str] = None) -> RunConfig:
    """Load ``path``, else ``$HBAN_CONFIG``, else the defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed JSON: {e}") from None
    return config_from_dict(doc)
