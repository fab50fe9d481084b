"""Solver configuration: dataclass, preset resolution and file parsing.

The config file is a flat key=value format with four sections, [preset],
[grid], [method] and [output].  Unknown keys are rejected with the offending
line number so typos cannot silently fall back to defaults.  A preset supplies
defaults for everything; file values override the preset and command-line
``--set section.key=value`` pairs override both.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .presets import get_preset

METHODS = ("plain", "conservative", "macro")


@dataclass
class SolverConfig:
    preset: str
    dim: str                     # "1d1v" | "2d2v"
    method: str = "macro"
    nx: int = 64
    nx2: int = 0                 # 0 means "same as nx" (2D only)
    nv: int = 128
    nv2: int = 0                 # 0 means "same as nv" (2D only)
    x_min: float = 0.0
    x_max: float = 1.0
    v_max: float = 6.0
    beta: float = 2.0
    eps: float = 1e-4
    eps_relative: bool = False
    cfl: float = 0.3
    t_end: float = 1.0
    output_every: int = 10
    poisson_sign: float = 1.0
    rank_cap: int = 60

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.dim not in ("1d1v", "2d2v"):
            raise ConfigError(f"dim must be '1d1v' or '2d2v', got {self.dim!r}")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.eps < 0:
            raise ConfigError(f"eps must be >= 0, got {self.eps}")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.output_every < 1:
            raise ConfigError(f"output_every must be >= 1, got {self.output_every}")
        if self.nx2 == 0:
            self.nx2 = self.nx
        if self.nv2 == 0:
            self.nv2 = self.nv


def from_preset(name: str, **overrides) -> SolverConfig:
    """Config with the benchmark parameters of the named preset as defaults.

    Overrides merge before construction so that the derived defaults (nx2,
    nv2 following nx, nv) resolve against the final values.
    """
    p = get_preset(name)
    values = dict(preset=p.name, dim=p.dim, nx=p.nx, nv=p.nv,
                  x_min=p.x_min, x_max=p.x_max, v_max=p.v_max,
                  beta=p.beta, eps=p.eps, t_end=p.t_end, rank_cap=p.rank_cap)
    values.update(overrides)
    return SolverConfig(**values)


# keys accepted per section, mapped to SolverConfig field and type
_SCHEMA = {
    "preset": {"name": ("preset", str)},
    "grid": {
        "nx": ("nx", int), "nx2": ("nx2", int),
        "nv": ("nv", int), "nv2": ("nv2", int),
        "xmin": ("x_min", float), "xmax": ("x_max", float),
        "vmax": ("v_max", float), "beta": ("beta", float),
    },
    "method": {
        "variant": ("method", str),
        "eps": ("eps", float),
        "eps_relative": ("eps_relative", bool),
        "cfl": ("cfl", float),
        "t_end": ("t_end", float),
        "rank_cap": ("rank_cap", int),
        "poisson_sign": ("poisson_sign", float),
    },
    "output": {"every": ("output_every", int)},
}


def _convert(raw: str, typ, where: str):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {typ.__name__}") from None


def _parse_file(path: str | Path) -> dict[str, object]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, object] = {}
    section = None
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        if section is None:
            raise ConfigError(f"{path}:{lineno}: key outside of any [section]")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in _SCHEMA[section]:
            known = ", ".join(sorted(_SCHEMA[section]))
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r} in [{section}] (known: {known})")
        field_name, typ = _SCHEMA[section][key]
        values[field_name] = _convert(raw, typ, f"{path}:{lineno}")
    return values


def parse_overrides(pairs) -> dict[str, object]:
    """Parse ``section.key=value`` strings from the command line."""
    out: dict[str, object] = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"--set expects section.key=value, got {pair!r}")
        dotted, raw = pair.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"--set expects section.key=value, got {pair!r}")
        section, key = (s.strip().lower() for s in dotted.split(".", 1))
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown --set target {dotted!r}")
        field_name, typ = _SCHEMA[section][key]
        out[field_name] = _convert(raw, typ, f"--set {pair}")
    return out


def load_config(path: str | Path | None = None, preset: str | None = None,
                overrides=()) -> SolverConfig:
    """Resolve a full configuration from file, preset name and overrides."""
    values: dict[str, object] = {}
    if path is not None:
        values.update(_parse_file(path))
    if preset is not None:
        values["preset"] = preset
    if "preset" not in values:
        required = "a [preset] section with name=<preset> (or --preset)"
        raise ConfigError(f"no preset selected; config requires {required}")
    values.update(parse_overrides(overrides))
    preset_name = str(values.pop("preset"))
    valid = {f.name for f in fields(SolverConfig)}
    unknown = set(values) - valid
    if unknown:
        raise ConfigError(f"internal schema mismatch for keys: {sorted(unknown)}")
    return from_preset(preset_name, **values)
