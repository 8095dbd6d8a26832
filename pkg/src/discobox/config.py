"""Flat key=value run configuration for the CLI.

Files hold one `key = value` per line with '#' comments; flags override
file values; unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .correspondence import SinkhornConfig
from .crf import TeacherConfig
from .errors import ConfigError
from .teacher import LossWeights, RefineConfig


@dataclass
class RunConfig:
    roi_size: int = 32
    w1: float = 1.0
    w2: float = 0.5
    zeta: float = 13.0
    gamma: float = 14.0
    mf_iters: int = 10
    mf_tol: float = 1e-4
    mode: str = "two_channel"
    epsilon: float = 0.05
    t_max: int = 1000
    tol: float = 1e-6
    icm_iters: int = 2
    alpha_mil: float = 10.0
    alpha_con: float = 2.0
    alpha_nce: float = 0.1
    temperature: float = 0.1
    mil_variant: str = "bce"
    seed: int = 0
    threads: int = 1

    def refine_config(self) -> RefineConfig:
        return RefineConfig(
            teacher=TeacherConfig(
                w1=self.w1,
                w2=self.w2,
                zeta=self.zeta,
                gamma=self.gamma,
                mf_iters=self.mf_iters,
                mf_tol=self.mf_tol,
                mode=self.mode,
            ),
            sinkhorn=SinkhornConfig(self.epsilon, self.t_max, self.tol),
            icm_iters=self.icm_iters,
            temperature=self.temperature,
            weights=LossWeights(self.alpha_mil, self.alpha_con, self.alpha_nce),
            mil_variant=self.mil_variant,
            seed=self.seed,
            threads=self.threads,
        )


_FIELDS = {f.name: f.type for f in fields(RunConfig)}
_STR_KEYS = {"mode", "mil_variant"}
_INT_KEYS = {"roi_size", "mf_iters", "t_max", "icm_iters", "seed", "threads"}


def _coerce(key: str, value: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    value = value.strip()
    try:
        if key in _STR_KEYS:
            return value
        if key in _INT_KEYS:
            return int(value)
        return float(value)
    except ValueError as e:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from e


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, overrides: list[str] = ()) -> RunConfig:
    """Build a RunConfig from an optional file plus key=value overrides."""
    values = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            values.update(parse_config_text(f.read()))
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override must be key=value, got {ov!r}")
        key, value = ov.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), value)
    return RunConfig(**values)
