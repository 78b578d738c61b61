"""JSON configuration: schema, strict validation, defaults.

The defaults describe the reference system: 500 MHz modulation (2 ns
slots), avalanche detectors with 20% efficiency and 4 us dead time,
1% modulator extinction, a 40 km standard-fiber link at 0.2 dB/km, a
10% monitor tap, 99% visibility, and a per-wrong-slot error rate of
0.4%.  ``hdcow rates`` with no arguments therefore reproduces the model
rate curves out of the box.  Unknown keys anywhere in the file are
rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .channel import PhysicalParams
from .errors import InvalidArgumentError
from .protocol import ProtocolParams
from .rates import LinearNoise, TableNoise, THRESHOLD_CONVENTION

__all__ = ["Config", "load_config", "default_config"]

REFERENCE_T_CH = 10 ** (-0.8)  # 40 km at 0.2 dB/km


@dataclass(frozen=True)
class ProtocolSection:
    dimensions: tuple = (2, 4, 8, 16, 32)
    n: int = 64
    tau: float = 2e-9


@dataclass(frozen=True)
class PhysicalSection:
    mu: float = 0.05
    t_ch: float = REFERENCE_T_CH
    xi: float = 0.2
    t_dead: float = 4e-6
    p_dc: float = 0.0
    r_ext: float = 0.01
    f_mon: float = 0.1
    visibility: float = 0.99


@dataclass(frozen=True)
class NoiseSection:
    model: str = "linear"  # "linear" | "table"
    q_slot: float = 0.004
    table: tuple = ()  # entries {"d": int, "q": float, "v": float}


@dataclass(frozen=True)
class SweepSection:
    mu_min: float = 0.005
    mu_max: float = 0.3
    mu_steps: int = 120


@dataclass(frozen=True)
class ThresholdSection:
    mu: float = THRESHOLD_CONVENTION["mu"]
    visibility: float = THRESHOLD_CONVENTION["visibility"]
    axis: str = THRESHOLD_CONVENTION["axis"]  # "per_slot" | "total"
    dimensions: tuple = (2, 4, 8, 16)


@dataclass(frozen=True)
class SessionSection:
    d: int = 8
    n: int = 64
    blocks: int = 100
    sample_fraction: float = 1.0


@dataclass(frozen=True)
class Config:
    seed: int = 1
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    physical: PhysicalSection = field(default_factory=PhysicalSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    threshold: ThresholdSection = field(default_factory=ThresholdSection)
    session: SessionSection = field(default_factory=SessionSection)

    def physical_params(self, mu: float | None = None) -> PhysicalParams:
        p = self.physical
        return PhysicalParams(
            mu=p.mu if mu is None else mu,
            t_ch=p.t_ch,
            xi=p.xi,
            t_dead=p.t_dead,
            tau=self.protocol.tau,
            p_dc=p.p_dc,
            r_ext=p.r_ext,
            f_mon=p.f_mon,
            v_true=p.visibility,
        )

    def session_protocol(self) -> ProtocolParams:
        return ProtocolParams(
            d=self.session.d, n=self.session.n, tau=self.protocol.tau
        )

    def noise_model(self):
        if self.noise.model == "linear":
            return LinearNoise(
                q_slot=self.noise.q_slot, visibility=self.physical.visibility
            )
        if self.noise.model == "table":
            table = {
                int(row["d"]): (float(row["q"]), float(row["v"]))
                for row in self.noise.table
            }
            missing = [d for d in self.protocol.dimensions if d not in table]
            if missing:
                raise InvalidArgumentError(
                    f"noise table lacks entries for dimensions {missing}"
                )
            return TableNoise(table=table)
        raise InvalidArgumentError(f"unknown noise model {self.noise.model!r}")

    def mu_grid(self) -> list[float]:
        s = self.sweep
        if s.mu_steps < 1 or not 0.0 < s.mu_min <= s.mu_max:
            raise InvalidArgumentError("invalid sweep grid")
        if s.mu_steps == 1:
            return [s.mu_min]
        step = (s.mu_max - s.mu_min) / (s.mu_steps - 1)
        return [s.mu_min + k * step for k in range(s.mu_steps)]


_SECTION_TYPES = {
    "protocol": ProtocolSection,
    "physical": PhysicalSection,
    "noise": NoiseSection,
    "sweep": SweepSection,
    "threshold": ThresholdSection,
    "session": SessionSection,
}

_LIST_FIELDS = {"dimensions", "table"}


def _build_section(cls, raw: dict, path: str):
    if not isinstance(raw, dict):
        raise InvalidArgumentError(f"{path}: expected an object")
    defaults = cls()
    known = set(cls.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise InvalidArgumentError(
            f"{path}: unknown keys {sorted(unknown)}; known keys {sorted(known)}"
        )
    values = {}
    for name in known & set(raw):
        val = raw[name]
        if name in _LIST_FIELDS:
            if not isinstance(val, list):
                raise InvalidArgumentError(f"{path}.{name}: expected a list")
            values[name] = tuple(val)
        else:
            current = getattr(defaults, name)
            if isinstance(current, bool) or not isinstance(val, (int, float, str)):
                if not isinstance(val, type(current)):
                    raise InvalidArgumentError(f"{path}.{name}: bad type")
            values[name] = type(current)(val) if not isinstance(val, str) else val
    return cls(**values)


def default_config() -> Config:
    return Config()


def parse_config(raw: dict) -> Config:
    if not isinstance(raw, dict):
        raise InvalidArgumentError("config root must be an object")
    unknown = set(raw) - ({"seed"} | set(_SECTION_TYPES))
    if unknown:
        raise InvalidArgumentError(f"config: unknown top-level keys {sorted(unknown)}")
    sections = {
        key: _build_section(cls, raw[key], key)
        for key, cls in _SECTION_TYPES.items()
        if key in raw
    }
    seed = raw.get("seed", Config().seed)
    if not isinstance(seed, int):
        raise InvalidArgumentError("config.seed must be an integer")
    config = Config(seed=seed, **sections)
    _validate(config)
    return config


def _validate(config: Config) -> None:
    for d in config.protocol.dimensions:
        if not (isinstance(d, int) and d >= 2):
            raise InvalidArgumentError(f"protocol.dimensions entry {d!r} must be int >= 2")
    if not config.protocol.dimensions:
        raise InvalidArgumentError("protocol.dimensions must be non-empty")
    config.session_protocol()
    config.physical_params()
    config.mu_grid()
    if config.threshold.axis not in ("per_slot", "total"):
        raise InvalidArgumentError(
            f"threshold.axis {config.threshold.axis!r} not in ('per_slot', 'total')"
        )
    if not 0.0 <= config.noise.q_slot < 1.0:
        raise InvalidArgumentError("noise.q_slot outside [0, 1)")
    config.noise_model()


def load_config(path: str | None) -> Config:
    """Load and validate a JSON config; None gives the defaults."""
    if path is None:
        return default_config()
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(raw)
