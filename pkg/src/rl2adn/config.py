"""Run configuration: TOML (or JSON) with [env], [sac], [llm] and [rl2] tables."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .environment import EnvConfig, ProfileConfig
from .llm.providers import LlmProviderConfig
from .sac import SacConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Rl2Config:
    iterations: int = 6  # K
    threshold: int = 10  # violation times on the typical day
    max_attempts: int = 3  # generation attempts per round
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    early_stop: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("rl2.iterations must be >= 1")
        if self.threshold < 0:
            raise ConfigError("rl2.threshold must be >= 0")
        if self.max_attempts < 1:
            raise ConfigError("rl2.max_attempts must be >= 1")
        if not self.seeds:
            raise ConfigError("rl2.seeds must list at least one seed")
        if any(int(s) < 0 for s in self.seeds):
            raise ConfigError("seeds must be nonnegative")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))


@dataclass(frozen=True)
class RunConfig:
    case: str = "ieee33"
    fleet: str = "ieee33"
    env: EnvConfig = field(default_factory=EnvConfig)
    sac: SacConfig = field(default_factory=SacConfig)
    llm: LlmProviderConfig = field(default_factory=LlmProviderConfig)
    rl2: Rl2Config = field(default_factory=Rl2Config)
    out_dir: str = "runs/latest"
    source: str | None = None  # file the config was read from

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "fleet": self.fleet,
            "out_dir": self.out_dir,
            "env": env_to_dict(self.env),
            "sac": self.sac.to_dict(),
            "llm": self.llm.to_dict(),
            "rl2": {**asdict(self.rl2), "seeds": list(self.rl2.seeds)},
        }

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def _strict(cls, d: dict, where: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown option(s) in [{where}]: {', '.join(sorted(unknown))}")
    return d


def env_from_dict(d: dict) -> EnvConfig:
    d = dict(d)
    prof = d.pop("profile", {})
    _strict(EnvConfig, d, "env")
    _strict(ProfileConfig, prof, "env.profile")
    return EnvConfig(**d, profile=ProfileConfig(**prof))


def env_to_dict(cfg: EnvConfig) -> dict:
    d = asdict(cfg)
    return d


def _resolve(base: Path | None, value: str) -> str:
    if base is None:
        return value
    p = base / value
    return str(p) if p.exists() else value


def config_from_dict(data: dict[str, Any], base_dir: Path | None = None, source: str | None = None) -> RunConfig:
    data = dict(data)
    known = {"case", "fleet", "env", "sac", "llm", "rl2", "out_dir"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level option(s): {', '.join(sorted(unknown))}")
    try:
        env = env_from_dict(data.get("env", {}))
        sac = SacConfig(**_strict(SacConfig, dict(data.get("sac", {})), "sac"))
        llm_d = dict(data.get("llm", {}))
        if llm_d.get("fixtures_dir"):
            llm_d["fixtures_dir"] = _resolve(base_dir, llm_d["fixtures_dir"])
        llm = LlmProviderConfig(**_strict(LlmProviderConfig, llm_d, "llm"))
        rl2 = Rl2Config(**_strict(Rl2Config, dict(data.get("rl2", {})), "rl2"))
        return RunConfig(
            case=_resolve(base_dir, str(data.get("case", "ieee33"))),
            fleet=_resolve(base_dir, str(data.get("fleet", "ieee33"))),
            env=env,
            sac=sac,
            llm=llm,
            rl2=rl2,
            out_dir=str(data.get("out_dir", "runs/latest")),
            source=source,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data, path.parent, str(path))
