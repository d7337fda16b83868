"""Experiment configuration: INI files with a fixed schema, overrides and a stable hash.

Lists are comma separated; integer ranges may be written start:stop:step with an
inclusive stop, e.g. ``L = 25:50:5``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
from dataclasses import dataclass, field
from typing import Optional


class ConfigError(ValueError):
    """Invalid or unparsable configuration; carries the offending section.key."""


@dataclass(frozen=True)
class ShapeConfig:
    kind: str = "ellipse"  # ellipse | octagon | circle
    a: float = 5.0
    b: float = 1.0


@dataclass(frozen=True)
class GridConfig:
    M: int = 15  # radial count (M for the ellipse, M_q per polygon segment)
    N: int = 10  # angular density (N_base for the ellipse, N_q per polygon segment)
    naive_M: int = 64
    naive_N: int = 64


@dataclass(frozen=True)
class ReconstructionConfig:
    kappa: tuple = ()  # explicit wavenumbers
    kappa_rmax: tuple = (1.0,)  # used when kappa is empty: kappa = value / r_max
    L: tuple = (50,)
    eps_ev: float = 1e-4
    eps_ed: float = 1e-8
    source_order: int = 1
    source_factor: float = 0.95
    mu: int = -1  # -1: ceil(3 kappa r_max)
    z_nodes: int = 128
    surface_points: int = 0  # 0: per-shape default
    max_unsatisfied: int = -1  # -1: no limit


@dataclass(frozen=True)
class GpcConfig:
    order: int = 0
    basis: str = "auto"  # auto | fourier | legendre
    modulated_sources: bool = False


@dataclass(frozen=True)
class OracleConfig:
    kappa: float = 0.0  # 0: first reconstruction wavenumber
    n_samples: int = 2000
    seed: int = 20240601
    L: int = 0  # 0: largest reconstruction L
    source_order: int = -1  # -1: same as reconstruction
    surface_points: int = 0
    tolerance: float = 1e-4


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    threads: int = 1


SECTIONS = {
    "shape": ShapeConfig,
    "grid": GridConfig,
    "reconstruction": ReconstructionConfig,
    "gpc": GpcConfig,
    "oracle": OracleConfig,
    "output": OutputConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    shape: ShapeConfig = field(default_factory=ShapeConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    reconstruction: ReconstructionConfig = field(default_factory=ReconstructionConfig)
    gpc: GpcConfig = field(default_factory=GpcConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # -- serialization -------------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for name in SECTIONS:
            sec = getattr(self, name)
            cp[name] = {f.name: _emit(getattr(sec, f.name)) for f in dataclasses.fields(sec)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        """Hash of every setting that can change results; [output] is left out."""
        neutral = dataclasses.replace(self, output=OutputConfig())
        return hashlib.sha256(neutral.to_ini().encode()).hexdigest()

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Apply {"section.key": "text"} overrides."""
        new = {name: getattr(self, name) for name in SECTIONS}
        for dotted, text in overrides.items():
            sec, _, key = dotted.partition(".")
            if sec not in SECTIONS or not key:
                raise ConfigError(f"{dotted}: expected section.key with section in {sorted(SECTIONS)}")
            new[sec] = _set(new[sec], sec, key, text)
        return validate(ExperimentConfig(**new))

    @property
    def r_max(self) -> float:
        s = self.shape
        if s.kind == "octagon":
            return s.a + s.b
        if s.kind == "circle":
            return s.a
        return s.a

    def kappas(self) -> list[float]:
        r = self.reconstruction
        if r.kappa:
            return [float(k) for k in r.kappa]
        return [float(v) / self.r_max for v in r.kappa_rmax]


def _emit(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_emit(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_list(text: str, conv):
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part and conv is int:
            bits = [int(p) for p in part.split(":")]
            start, stop = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1
            if step <= 0:
                raise ValueError("range step must be positive")
            out.extend(range(start, stop + 1, step))
        else:
            out.append(conv(part))
    return tuple(out)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _set(sec_obj, sec: str, key: str, text: str):
    fields = {f.name: f for f in dataclasses.fields(sec_obj)}
    if key not in fields:
        raise ConfigError(f"{sec}.{key}: unknown key (known: {', '.join(fields)})")
    default = getattr(type(sec_obj)(), key)
    try:
        if isinstance(default, bool):
            val = _parse_bool(text)
        elif isinstance(default, int):
            val = int(text)
        elif isinstance(default, float):
            val = float(text)
        elif isinstance(default, tuple):
            conv = int if key == "L" else float
            val = _parse_list(text, conv)
        else:
            val = text.strip()
    except ValueError as exc:
        raise ConfigError(f"{sec}.{key}: cannot parse {text!r} ({exc})") from None
    return dataclasses.replace(sec_obj, **{key: val})


def parse_ini(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    overrides = {}
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, val in cp[sec].items():
            overrides[f"{sec}.{key}"] = val
    return ExperimentConfig().with_overrides(overrides)


def load(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return validate(ExperimentConfig())
    try:
        with open(path) as fh:
            return parse_ini(fh.read(), str(path))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    s, g, r, p, o, out = cfg.shape, cfg.grid, cfg.reconstruction, cfg.gpc, cfg.oracle, cfg.output
    if s.kind not in ("ellipse", "octagon", "circle"):
        raise ConfigError(f"shape.kind: expected ellipse, octagon or circle, got {s.kind!r}")
    if s.kind == "circle":
        if not s.a > 0:
            raise ConfigError("shape.a: must be positive")
    elif not s.a > s.b > 0:
        raise ConfigError(f"shape.a, shape.b: need a > b > 0, got a={s.a}, b={s.b}")
    for key in ("M", "N", "naive_M", "naive_N"):
        if getattr(g, key) < 1:
            raise ConfigError(f"grid.{key}: must be at least 1")
    if not r.eps_ev >= r.eps_ed > 0:
        raise ConfigError("reconstruction.eps_ev, eps_ed: need eps_ev >= eps_ed > 0")
    if not r.kappa and not r.kappa_rmax:
        raise ConfigError("reconstruction.kappa: give kappa or kappa_rmax")
    if any(k <= 0 for k in r.kappa + r.kappa_rmax):
        raise ConfigError("reconstruction.kappa: wavenumbers must be positive")
    if not r.L or any(v < 1 for v in r.L):
        raise ConfigError("reconstruction.L: need at least one source count >= 1")
    if r.source_order < 0:
        raise ConfigError("reconstruction.source_order: must be non-negative")
    if not 0 < r.source_factor < 1:
        raise ConfigError("reconstruction.source_factor: must lie in (0, 1)")
    if r.z_nodes < 1 or r.surface_points < 0:
        raise ConfigError("reconstruction.z_nodes / surface_points: invalid count")
    if p.order < 0:
        raise ConfigError("gpc.order: must be non-negative")
    if p.basis not in ("auto", "fourier", "legendre"):
        raise ConfigError(f"gpc.basis: expected auto, fourier or legendre, got {p.basis!r}")
    if o.kappa < 0:
        raise ConfigError("oracle.kappa: must be positive (or 0 for the first sweep wavenumber)")
    if o.n_samples < 2:
        raise ConfigError("oracle.n_samples: need at least 2")
    if o.seed < 0 or o.seed >= 2**64:
        raise ConfigError("oracle.seed: must be an unsigned 64-bit integer")
    if out.threads < 1:
        raise ConfigError("output.threads: must be at least 1")
    return cfg
