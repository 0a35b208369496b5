"""Service configuration: one JSON file plus BLINE_-prefixed
environment overrides.

File shape (all sections and keys optional; defaults shown):

    {
      "policy":  {"min_eligible_opinions": 7, "min_agreement": 0.6,
                  "skill_threshold": 0.8, "window": 25,
                  "one_opinion_per_user": true},
      "quality": {"min_scored": 10},
      "prizes":  {"pool": 1100.0, "cap": 25.0},
      "seeds":   {"engine": 0},
      "server":  {"host": "127.0.0.1", "port": 8000,
                  "log_path": "opinions.log"}
    }

Environment overrides use ``BLINE_<SECTION>__<KEY>``, e.g.
``BLINE_POLICY__MIN_AGREEMENT=0.65`` or ``BLINE_SERVER__PORT=9001``;
values are parsed as JSON when possible, else taken as strings.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from .consensus import ConsensusPolicy

ENV_PREFIX = "BLINE_"

_SECTIONS = ("policy", "quality", "prizes", "seeds", "server")


@dataclass(frozen=True, slots=True)
class ServiceConfig:
    policy: ConsensusPolicy = ConsensusPolicy()
    min_scored: int = 10
    prize_pool: float = 1100.0
    prize_cap: float = 25.0
    engine_seed: int = 0
    host: str = "127.0.0.1"
    port: int = 8000
    log_path: str = "opinions.log"


DEFAULT_CONFIG = ServiceConfig()


def _merge_env(sections: Dict[str, Dict[str, Any]], env: Mapping[str, str]) -> None:
    for raw_key, raw_value in env.items():
        if not raw_key.startswith(ENV_PREFIX):
            continue
        rest = raw_key[len(ENV_PREFIX):]
        if "__" not in rest:
            continue
        section, key = rest.split("__", 1)
        section = section.lower()
        key = key.lower()
        if section not in _SECTIONS:
            continue
        try:
            value: Any = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        sections.setdefault(section, {})[key] = value


def load_config(
    path: Optional[Union[str, Path]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> ServiceConfig:
    """Build a config from an optional JSON file and the environment.

    Precedence: defaults < file < environment.
    """
    sections: Dict[str, Dict[str, Any]] = {}
    if path is not None:
        loaded = json.loads(Path(path).read_text())
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        for name in _SECTIONS:
            part = loaded.get(name, {})
            if not isinstance(part, dict):
                raise ValueError(f"config section {name!r} must be an object")
            sections[name] = dict(part)
    _merge_env(sections, env if env is not None else os.environ)

    policy_kwargs = sections.get("policy", {})
    policy = replace(ConsensusPolicy(), **policy_kwargs) if policy_kwargs else ConsensusPolicy()
    quality = sections.get("quality", {})
    prizes = sections.get("prizes", {})
    seeds = sections.get("seeds", {})
    server = sections.get("server", {})
    return ServiceConfig(
        policy=policy,
        min_scored=int(quality.get("min_scored", DEFAULT_CONFIG.min_scored)),
        prize_pool=float(prizes.get("pool", DEFAULT_CONFIG.prize_pool)),
        prize_cap=float(prizes.get("cap", DEFAULT_CONFIG.prize_cap)),
        engine_seed=int(seeds.get("engine", DEFAULT_CONFIG.engine_seed)),
        host=str(server.get("host", DEFAULT_CONFIG.host)),
        port=int(server.get("port", DEFAULT_CONFIG.port)),
        log_path=str(server.get("log_path", DEFAULT_CONFIG.log_path)),
    )
