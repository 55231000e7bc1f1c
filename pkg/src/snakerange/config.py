"""key = value configuration files with an ``include`` directive."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_config(path, _seen: tuple = ()) -> dict[str, str]:
    """Read ``key = value`` lines; ``include = other.conf`` is read in place (relative paths
    resolve against the including file).  Later keys override earlier ones; ``#`` starts a comment.
    """
    path = Path(path).resolve()
    if path in _seen:
        raise ConfigError(f"include cycle at {path}")
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{no}: empty key")
        if key == "include":
            out.update(parse_config(path.parent / value, _seen + (path,)))
        else:
            out[key] = value
    return out


def convert(value: str, like):
    """Parse ``value`` to the type of the default ``like``."""
    try:
        if isinstance(like, bool):
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        if isinstance(like, int):
            return int(float(value)) if float(value).is_integer() else int(value)
        if isinstance(like, float):
            return float(value)
        if isinstance(like, tuple):
            items = [s.strip() for s in value.split(",") if s.strip()]
            kind = type(like[0]) if like else float
            return tuple(convert(s, kind()) for s in items)
        return value
    except ValueError as exc:
        raise ConfigError(f"cannot parse {value!r} as {type(like).__name__}") from exc


GLOBAL_KEYS = {"experiment": "", "seed": 0, "workers": 1, "out_dir": "results", "deterministic": True}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    out_dir: str = "results"
    deterministic: bool = True

    @classmethod
    def build(cls, name: str, defaults: dict, overrides: dict[str, str] | None = None, **flags) -> "ExperimentConfig":
        """Merge string overrides into typed defaults; unknown keys are rejected."""
        params = dict(defaults)
        glob = dict(GLOBAL_KEYS)
        for key, value in (overrides or {}).items():
            if key in glob:
                glob[key] = convert(value, GLOBAL_KEYS[key])
            elif key in params:
                params[key] = convert(value, defaults[key])
            else:
                valid = ", ".join(sorted(set(params) | set(glob)))
                raise ConfigError(f"unknown key {key!r} for {name}; valid keys: {valid}")
        for key, value in flags.items():
            if value is not None:
                glob[key] = value
        if glob["experiment"] and glob["experiment"] != name:
            raise ConfigError(f"config is for experiment {glob['experiment']!r}, not {name!r}")
        if glob["workers"] < 1:
            raise ConfigError("workers must be >= 1")
        return cls(name, params, int(glob["seed"]), int(glob["workers"]), str(glob["out_dir"]),
                   bool(glob["deterministic"]))
