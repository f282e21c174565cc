"""Experiment configuration: ``key = value`` text format, defaults, validation.

Times (``dt``, ``t_max``) are given in units of T1 = 1/gamma.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

from .errors import BadParam, ParseError, RangeError
from .model import KdParity, StateLabel, build_model, parse_label, parse_parity


class Mode(enum.Enum):
    LINDBLAD = "lindblad"
    JUMP = "jump"
    HOMODYNE = "homodyne"
    ORACLE_CHECK = "oracle_check"


class Scheme(enum.Enum):
    KRAUS = "kraus"
    EULER = "euler"


MAX_DT = 0.01  # T1 / 100
MAX_SEED = (1 << 64) - 1

_DEFAULT_T_MAX = {Mode.JUMP: 6.0, Mode.HOMODYNE: 15.0, Mode.LINDBLAD: 15.0, Mode.ORACLE_CHECK: 3.0}
_DEFAULT_N_TRAJ = {Mode.JUMP: 12, Mode.HOMODYNE: 2000, Mode.LINDBLAD: 1, Mode.ORACLE_CHECK: 2000}


@dataclass(frozen=True)
class SimConfig:
    mode: Mode = Mode.JUMP
    gamma: float = 1.0
    omega_tilde: float = 0.0
    kd_parity: KdParity = KdParity.EVEN
    eta_l: float = 1.0
    eta_r: float = 1.0
    dt: float = 1 / 200
    t_max: float = 6.0
    initial: StateLabel = StateLabel.GG
    n_traj: int = 12
    master_seed: int = 1
    output_dir: str = "out"
    store_states: bool = True
    record_every: int = 1
    n_save: int = 12
    classify_threshold: float = 0.98
    separable_threshold: float = 0.02
    homodyne_scheme: Scheme = Scheme.KRAUS

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @property
    def dt_phys(self) -> float:
        return self.dt / self.gamma

    @property
    def t_max_phys(self) -> float:
        return self.t_max / self.gamma

    def model(self):
        return build_model(self.gamma, self.omega_tilde, self.kd_parity, self.eta_l, self.eta_r)

    def replace(self, **changes) -> "SimConfig":
        return validate(dataclasses.replace(self, **changes))


KEYS = tuple(f.name for f in dataclasses.fields(SimConfig))


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= MAX_SEED:
        raise OverflowError
    return value


def _parse_enum(kind):
    def parse(text: str):
        try:
            return kind(text.lower().replace("-", "_").replace("oraclecheck", "oracle_check"))
        except ValueError:
            choices = ", ".join(m.value for m in kind)
            raise ValueError(f"expected one of {choices}") from None

    return parse


_PARSERS = {
    "mode": _parse_enum(Mode),
    "gamma": float,
    "omega_tilde": float,
    "kd_parity": parse_parity,
    "eta_l": float,
    "eta_r": float,
    "dt": float,
    "t_max": float,
    "initial": parse_label,
    "n_traj": int,
    "master_seed": _parse_seed,
    "output_dir": str,
    "store_states": _parse_bool,
    "record_every": int,
    "n_save": int,
    "classify_threshold": float,
    "separable_threshold": float,
    "homodyne_scheme": _parse_enum(Scheme),
}


def validate(cfg: SimConfig) -> SimConfig:
    def check(key: str, ok: bool, message: str) -> None:
        if not ok:
            raise RangeError(key, message)

    check("gamma", math.isfinite(cfg.gamma) and cfg.gamma > 0, "must be > 0")
    check("omega_tilde", math.isfinite(cfg.omega_tilde), "must be finite")
    check("eta_l", 0.0 <= cfg.eta_l <= 1.0, "must lie in [0, 1]")
    check("eta_r", 0.0 <= cfg.eta_r <= 1.0, "must lie in [0, 1]")
    check("dt", math.isfinite(cfg.dt) and 0 < cfg.dt <= MAX_DT * (1 + 1e-12), "must lie in (0, T1/100]")
    check("t_max", math.isfinite(cfg.t_max) and cfg.t_max > 0, "must be > 0")
    n = cfg.n_steps
    check("t_max", n >= 1 and abs(n * cfg.dt - cfg.t_max) <= 1e-9 * cfg.t_max, "must be a whole number of dt steps")
    check("n_traj", cfg.n_traj >= 1, "must be >= 1")
    check("master_seed", 0 <= cfg.master_seed <= MAX_SEED, "must be an unsigned 64-bit integer")
    check("record_every", cfg.record_every >= 1 and n % cfg.record_every == 0, "must divide the number of steps")
    check("n_save", cfg.n_save >= 0, "must be >= 0")
    check("classify_threshold", 0 < cfg.classify_threshold <= 1, "must lie in (0, 1]")
    check("separable_threshold", 0 <= cfg.separable_threshold < 1, "must lie in [0, 1)")
    return cfg


def from_mapping(values: dict) -> SimConfig:
    """Apply mode-dependent defaults to explicitly given values, then validate."""
    values = dict(values)
    for key, value in values.items():
        if key not in _PARSERS:
            raise BadParam(f"unknown key {key!r}")
        if isinstance(value, str) and key != "output_dir":
            values[key] = _PARSERS[key](value)
    mode = values.get("mode", Mode.JUMP)
    values.setdefault("t_max", _DEFAULT_T_MAX[mode])
    values.setdefault("n_traj", _DEFAULT_N_TRAJ[mode])
    if mode in (Mode.HOMODYNE, Mode.ORACLE_CHECK):
        # only the right output is homodyned unless stated otherwise
        values.setdefault("eta_l", 0.0)
    return validate(SimConfig(**values))


def parse_config(text: str) -> SimConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Raises:
        ParseError: malformed line, unknown or repeated key, unparsable value.
        RangeError: a value outside its allowed range.
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _PARSERS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _PARSERS[key](value)
        except OverflowError:
            raise RangeError(key, f"value {value!r} out of range") from None
        except (ValueError, BadParam) as exc:
            raise ParseError(f"bad value for {key}: {exc}", lineno) from None
    return from_mapping(values)


def _format_value(value) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: SimConfig) -> str:
    """Inverse of :func:`parse_config` (round-trips exactly)."""
    return "".join(f"{key} = {_format_value(getattr(cfg, key))}\n" for key in KEYS)
