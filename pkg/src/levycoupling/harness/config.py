"""Flat ``key = value`` experiment configuration with command-line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

EXPERIMENTS = (
    "lemma1-moments",
    "matrix-identities",
    "lsigma-roundtrip",
    "smap-roundtrip",
    "expansion-moments",
    "tail-stats",
    "wasserstein-sanity",
    "coupling-rate",
    "z-fidelity",
)
COUPLING_EXPERIMENTS = ("coupling-rate", "z-fidelity")
SUBCOUPLERS = ("independent", "edgeworth", "assignment")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    experiment: str = ""
    d: int = 2
    N: tuple[int, ...] = (16,)
    M: int = 100_000
    n_sub: int = 1024
    p: float = 2.0
    subcoupler: tuple[str, ...] = ("independent", "edgeworth")
    eta: float = 0.02
    kappa: int = 4
    seed: int = 20240521
    out: str = "out"
    workers: int = 1
    trees: int = 2000
    chunk: int = 50
    g_scale: float = 4.0
    max_residual: float = 8.0
    group: int = 256
    n_boot: int = 200
    metric: str = "max_of_lp"
    orders: tuple[int, ...] = (1, 2)
    eps: tuple[float, ...] = (0.04, 0.02)
    cases: int = 100
    dyadic_sets: int = 1000
    alpha: float = -1.0  # negative: use 1/(96 d)
    slope_independent: tuple[float, ...] = (-0.6, -0.4)
    slope_edgeworth_max: float = -0.75
    slope_stderr_max: float = 0.05

    @property
    def m_values(self) -> tuple[int, ...]:
        return tuple(n.bit_length() - 1 for n in self.N)

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.d < 2:
            raise ConfigError("d must be >= 2")
        if not self.N or any(n < 1 for n in self.N):
            raise ConfigError("N values must be positive")
        if self.experiment in COUPLING_EXPERIMENTS and any(n & (n - 1) for n in self.N):
            raise ConfigError("coupling experiments need N values that are powers of two")
        if not 0 < self.eta < 1 / 44:
            raise ConfigError("eta must lie in (0, 1/44)")
        if self.kappa < 4 or self.kappa % 2:
            raise ConfigError("kappa must be an even integer >= 4")
        if self.kappa >= 6 and self.d != 2 and "edgeworth" in self.subcoupler:
            raise ConfigError("kappa = 6 Edgeworth transport is implemented for d = 2 only")
        if self.p < 1:
            raise ConfigError("p must be >= 1")
        if self.M < 1 or self.trees < 1 or self.chunk < 1 or self.workers < 1:
            raise ConfigError("M, trees, chunk and workers must be positive")
        if self.n_sub < 2:
            raise ConfigError("n_sub must be >= 2")
        bad = [s for s in self.subcoupler if s not in SUBCOUPLERS]
        if bad:
            raise ConfigError(f"unknown sub-coupler(s) {bad}; choose from {', '.join(SUBCOUPLERS)}")
        if self.metric not in ("max_of_lp", "lp_of_max"):
            raise ConfigError("metric must be max_of_lp or lp_of_max")
        return self

    def echo(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.replace(";", ",").split(",") if v.strip()]


def _parse_range(value: str) -> list[int]:
    """``4..9`` (inclusive) or a comma list."""
    if ".." in value:
        lo, hi = value.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in _split(value)]


def _coerce(name: str, ftype, value: str):
    ftype = str(ftype)
    try:
        if ftype.startswith("tuple[int"):
            return tuple(int(float(v)) for v in _split(value))
        if ftype.startswith("tuple[float"):
            return tuple(float(v) for v in _split(value))
        if ftype.startswith("tuple[str"):
            return tuple(v.lower() for v in _split(value))
        if ftype == "int":
            return int(float(value))
        if ftype == "float":
            return float(value)
        return value.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {value!r}") from exc


_ALIASES = {"n": "N", "subcouplers": "subcoupler", "seed_master": "seed", "master_seed": "seed", "output": "out"}


def apply_pairs(cfg: ExperimentConfig, pairs: list[tuple[str, str]]) -> ExperimentConfig:
    fields = {f.name: f for f in dataclasses.fields(cfg)}
    for key, value in pairs:
        key = key.strip()
        key = _ALIASES.get(key, key)
        if key in ("m", "m_range"):
            try:
                ms = _parse_range(value)
            except ValueError as exc:
                raise ConfigError(f"bad m range {value!r}") from exc
            if any(m < 0 or m > 20 for m in ms):
                raise ConfigError("m values must lie in 0..20")
            cfg.N = tuple(2**m for m in ms)
            continue
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, fields[key].type, value))
    return cfg


def parse_lines(lines) -> list[tuple[str, str]]:
    pairs = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        if not key.strip():
            raise ConfigError(f"line {lineno}: empty key")
        pairs.append((key.strip(), value.strip()))
    return pairs


def load_config(path: str | Path | None = None, overrides: list[str] | None = None, **explicit) -> ExperimentConfig:
    """Defaults, then the file, then ``key=value`` overrides, then keyword values."""
    cfg = ExperimentConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        apply_pairs(cfg, parse_lines(text.splitlines()))
    pairs = []
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        pairs.append((k, v))
    apply_pairs(cfg, pairs)
    apply_pairs(cfg, [(k, str(v)) for k, v in explicit.items() if v is not None])
    return cfg.validate()
