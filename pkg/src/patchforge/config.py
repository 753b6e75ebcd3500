"""Run configuration: TOML file sections plus flag/environment overrides.

The config file mirrors the dataclass tree section by section:

    seed = 7
    jobs = 1
    delta = 0.5

    [swarm]      population, iterations, inertia, cognitive, social,
                 r_mode, r1, r2
    [eot]        n_samples, rotation_deg, translation, scale_range,
                 brightness_delta, downsample_range
    [attack]     n_vertices, grid_k, cold_intensity, eval_n_samples,
                 stop_within_generation
    [oracle]     kind ("toy" | "remote"), endpoint, toy parameters
    [dataset]    annotations, image_root

Unknown keys are errors.  The PATCHFORGE_ENDPOINT environment variable
overrides the configured endpoint; explicit --endpoint beats both.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .attack import AttackConfig
from .pso import SwarmConfig
from .transforms import EotConfig

ENDPOINT_ENV_VAR = "PATCHFORGE_ENDPOINT"

ORACLE_TOY = "toy"
ORACLE_REMOTE = "remote"


class ConfigError(ValueError):
    pass


@dataclass
class OracleConfig:
    kind: str = ORACLE_TOY
    endpoint: str = ""
    timeout: float = 10.0
    retries: int = 2
    dark_threshold: float = 0.3
    infrared_saturation: float = 0.5
    reference_color: tuple[float, float, float] = (0.2, 0.4, 0.8)
    color_threshold: float = 0.25
    visible_saturation: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in (ORACLE_TOY, ORACLE_REMOTE):
            raise ConfigError(f"oracle kind must be 'toy' or 'remote', got {self.kind!r}")


@dataclass
class DatasetConfig:
    annotations: str = ""
    image_root: str = ""


@dataclass
class AttackParams:
    n_vertices: int = 8
    grid_k: int = 18
    cold_intensity: float = 0.1
    eval_n_samples: int = 20
    stop_within_generation: bool = True


@dataclass
class RunConfig:
    seed: int = 0
    jobs: int = 0  # 0 = one worker per logical core
    delta: float = 0.5
    out_dir: str = "runs/out"
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    eot: EotConfig = field(default_factory=EotConfig)
    attack: AttackParams = field(default_factory=AttackParams)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)

    def worker_count(self) -> int:
        if self.jobs > 0:
            return self.jobs
        return os.cpu_count() or 1

    def attack_config(self) -> AttackConfig:
        return AttackConfig(
            n_vertices=self.attack.n_vertices,
            grid_k=self.attack.grid_k,
            cold_intensity=self.attack.cold_intensity,
            eval_n_samples=self.attack.eval_n_samples,
            stop_within_generation=self.attack.stop_within_generation,
            seed=self.seed,
            swarm=self.swarm,
            eot=self.eot,
        )


_SECTION_TYPES = {
    "swarm": SwarmConfig,
    "eot": EotConfig,
    "attack": AttackParams,
    "oracle": OracleConfig,
    "dataset": DatasetConfig,
}
_TOP_LEVEL_KEYS = {"seed", "jobs", "delta", "out_dir"}


def _build_section(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    coerced = dict(data)
    for f in fields(cls):
        if f.name in coerced and isinstance(coerced[f.name], list):
            coerced[f.name] = tuple(coerced[f.name])
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [{section}] section: {exc}") from exc


def load_run_config(path: str | Path | None = None) -> RunConfig:
    """Defaults, overlaid with the TOML file when given."""
    if path is None:
        return RunConfig()
    raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    sections = {}
    top = {}
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] must be a section")
            sections[key] = _build_section(_SECTION_TYPES[key], value, key)
        elif key in _TOP_LEVEL_KEYS:
            top[key] = value
        else:
            raise ConfigError(f"unknown top-level key {key!r}")
    return RunConfig(**top, **sections)


def apply_cli_overrides(
    cfg: RunConfig,
    seed: int | None = None,
    jobs: int | None = None,
    delta: float | None = None,
    out_dir: str | None = None,
    oracle_kind: str | None = None,
    endpoint: str | None = None,
    n_vertices: int | None = None,
    grid_k: int | None = None,
) -> RunConfig:
    """Flags beat the environment, which beats the config file."""
    oracle = cfg.oracle
    env_endpoint = os.environ.get(ENDPOINT_ENV_VAR)
    if env_endpoint:
        oracle = replace(oracle, endpoint=env_endpoint)
    if endpoint is not None:
        oracle = replace(oracle, endpoint=endpoint)
    if oracle_kind is not None:
        oracle = replace(oracle, kind=oracle_kind)
    attack = cfg.attack
    if n_vertices is not None:
        attack = replace(attack, n_vertices=n_vertices)
    if grid_k is not None:
        attack = replace(attack, grid_k=grid_k)
    return replace(
        cfg,
        seed=cfg.seed if seed is None else seed,
        jobs=cfg.jobs if jobs is None else jobs,
        delta=cfg.delta if delta is None else delta,
        out_dir=cfg.out_dir if out_dir is None else out_dir,
        oracle=oracle,
        attack=attack,
    )


def config_echo(cfg: RunConfig) -> dict:
    """Fully resolved config for embedding in outputs.

    The output directory is omitted so identical runs into different
    directories produce byte-identical result files; replay supplies its
    own --out.
    """
    data = asdict(cfg)
    data.pop("out_dir", None)
    return data
