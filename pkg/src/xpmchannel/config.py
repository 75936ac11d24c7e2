"""Physical parameters, unit conventions and simulation grids.

Canonical internal units are ps (time), km (distance), GHz (frequency) and
W (power).  Dispersion ``beta2`` is in ps^2/km, ``gamma`` in 1/(W km), loss
``alpha`` in 1/km and the group velocity in km/s.

The config file is a flat TOML table whose keys are exactly the field names of
:class:`LinkConfig` plus, optionally, the independent fields of
:class:`SimGrid` (``t_window``, ``n_time``, ``n_zsteps``).
"""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "LinkConfig",
    "SimGrid",
    "UnitConvention",
    "UNITS",
    "nominal_config",
    "is_nominal",
    "validate",
    "dump_config",
    "load_config",
    "config_to_text",
]


class ConfigError(ValueError):
    """Raised when a config or grid violates one or more invariants.

    ``errors`` maps each offending field name to its message.
    """

    def __init__(self, errors: dict[str, str]):
        self.errors = dict(errors)
        msg = "; ".join(f"{k}: {v}" for k, v in self.errors.items())
        super().__init__(msg)


class UnitConvention:
    """Scale factors between user units and the canonical ps/km/GHz/W set.

    >>> UNITS.to_canonical(1.0, "ns")
    1000.0
    """

    canonical = {"time": "ps", "distance": "km", "frequency": "GHz", "power": "W"}

    scales = {
        # time, relative to ps
        "fs": 1e-3, "ps": 1.0, "ns": 1e3, "us": 1e6, "ms": 1e9, "s": 1e12,
        # distance, relative to km
        "m": 1e-3, "km": 1.0,
        # frequency, relative to GHz
        "Hz": 1e-9, "kHz": 1e-6, "MHz": 1e-3, "GHz": 1.0, "THz": 1e3,
        # power, relative to W
        "uW": 1e-6, "mW": 1e-3, "W": 1.0,
    }

    # ps * GHz is dimensionless: 1e-12 s * 1e9 /s
    PS_GHZ = 1e-3

    def to_canonical(self, value, unit: str):
        return value * self.scales[unit]

    def from_canonical(self, value, unit: str):
        return value / self.scales[unit]

    def dispersion_spacing_product(self, beta2: float, spacing: float) -> float:
        """beta2 [ps^2/km] times spacing^2 [GHz^2], returned in 1/km."""
        return beta2 * spacing**2 * self.PS_GHZ**2

    def angular_frequency(self, spacing: float) -> float:
        """Angular frequency in rad/ps for a frequency given in GHz."""
        return 2.0 * math.pi * spacing * self.PS_GHZ


UNITS = UnitConvention()


@dataclass(frozen=True)
class LinkConfig:
    """Fiber and WDM parameters in canonical units.

    Channels are indexed ``k = -N/2 ... N/2`` so a link with ``n_channels=N``
    carries ``N + 1`` envelopes, the central one being ``k = 0``.

    ``beta1_slope`` is the group-delay offset per km between neighbouring
    channels (ps/km per channel index).  When left as ``None`` it is derived
    from the dispersion as ``beta2 * 2*pi*channel_spacing``.
    """

    beta2: float
    gamma: float
    alpha: float
    length_L: float
    group_velocity: float
    n_channels: int
    channel_spacing: float
    channel_power: float
    beta1_slope: float | None = None

    def __post_init__(self):
        if self.beta1_slope is None:
            slope = self.beta2 * UNITS.angular_frequency(self.channel_spacing)
            object.__setattr__(self, "beta1_slope", float(slope))

    @property
    def channel_indices(self) -> range:
        half = self.n_channels // 2
        return range(-half, half + 1)

    def replace(self, **changes) -> "LinkConfig":
        # the walk-off slope is re-derived unless given explicitly
        if "beta1_slope" not in changes and (
            "beta2" in changes or "channel_spacing" in changes
        ):
            changes["beta1_slope"] = None
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SimGrid:
    """Uniform time lattice plus the number of fiber steps ``M``.

    Time samples sit at ``(j - n_time/2) * dt`` for ``j = 0 .. n_time-1`` and
    the window is treated as periodic.
    """

    t_window: float
    n_time: int
    n_zsteps: int

    @property
    def dt(self) -> float:
        return self.t_window / self.n_time

    def dz(self, length_L: float) -> float:
        return length_L / self.n_zsteps

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.n_time) - self.n_time // 2) * self.dt

    @property
    def omega(self) -> np.ndarray:
        """Angular frequencies (rad/ps) in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_time, d=self.dt)

    def index_of(self, t: float) -> int:
        """Lattice index of time ``t``; ``t`` must lie on the lattice."""
        j = t / self.dt + self.n_time // 2
        jr = int(round(j))
        if abs(j - jr) > 1e-6 or not 0 <= jr < self.n_time:
            raise ValueError(f"time {t!r} is not a lattice point of the grid")
        return jr

    def same_lattice(self, other: "SimGrid") -> bool:
        return self.n_time == other.n_time and self.t_window == other.t_window


def nominal_config(**overrides) -> LinkConfig:
    """Typical WDM link: 20 ps^2/km, 1.2 /(W km), 50 GHz, 200000 km/s, 50 km, N=100.

    Loss and launch power are not part of that parameter set; they default to
    a lossless fiber carrying 1 mW per channel.
    """
    values = dict(
        beta2=20.0,
        gamma=1.2,
        alpha=0.0,
        length_L=50.0,
        group_velocity=200000.0,
        n_channels=100,
        channel_spacing=50.0,
        channel_power=1e-3,
    )
    values.update(overrides)
    return LinkConfig(**values)


_NOMINAL_KEYS = ("beta2", "gamma", "length_L", "group_velocity", "n_channels", "channel_spacing")


def is_nominal(config: LinkConfig) -> bool:
    ref = nominal_config()
    return all(
        math.isclose(getattr(config, k), getattr(ref, k), rel_tol=1e-12) for k in _NOMINAL_KEYS
    )


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def validate(config: LinkConfig, grid: SimGrid | None = None):
    """Check every invariant and return ``(config, grid)`` unchanged.

    Raises
    ------
    ConfigError
        Listing every violated invariant by field name.
    """
    errors: dict[str, str] = {}
    positive = ("beta2", "length_L", "group_velocity", "channel_spacing", "channel_power")
    for name in positive:
        value = getattr(config, name)
        if not (math.isfinite(value) and value > 0):
            errors[name] = f"{name} must be > 0 (got {value!r})"
    for name in ("gamma", "alpha"):
        value = getattr(config, name)
        if not (math.isfinite(value) and value >= 0):
            errors[name] = f"{name} must be >= 0 (got {value!r})"
    n = config.n_channels
    if not isinstance(n, int) or isinstance(n, bool):
        errors["n_channels"] = f"n_channels must be an integer (got {n!r})"
    elif n % 2:
        errors["n_channels"] = "n_channels must be even"
    elif n < 2:
        errors["n_channels"] = "n_channels must be >= 2"
    if not math.isfinite(config.beta1_slope):
        errors["beta1_slope"] = "beta1_slope must be finite"

    if grid is not None:
        if not isinstance(grid.n_time, int) or grid.n_time < 8:
            errors["n_time"] = "n_time must be an integer >= 8"
        elif not _is_pow2(grid.n_time):
            errors["n_time"] = "n_time must be a power of two"
        if not (math.isfinite(grid.t_window) and grid.t_window > 0):
            errors["t_window"] = "t_window must be > 0"
        if not isinstance(grid.n_zsteps, int) or grid.n_zsteps < 1:
            errors["n_zsteps"] = "n_zsteps must be an integer >= 1"
        elif "length_L" not in errors and grid.dz(config.length_L) * grid.n_zsteps != config.length_L:
            errors["n_zsteps"] = (
                "n_zsteps must split length_L exactly in floating point; "
                "powers of two always do"
            )
    if errors:
        raise ConfigError(errors)
    return config, grid


_LINK_FIELDS = tuple(f.name for f in dataclasses.fields(LinkConfig))
_GRID_FIELDS = ("t_window", "n_time", "n_zsteps")
_INT_FIELDS = {"n_channels", "n_time", "n_zsteps"}


def _format_value(key: str, value: Any) -> str:
    if key in _INT_FIELDS:
        return str(int(value))
    return repr(float(value))


def config_to_text(config: LinkConfig, grid: SimGrid | None = None) -> str:
    lines = [f"{k} = {_format_value(k, getattr(config, k))}" for k in _LINK_FIELDS]
    if grid is not None:
        lines += [f"{k} = {_format_value(k, getattr(grid, k))}" for k in _GRID_FIELDS]
    return "\n".join(lines) + "\n"


def dump_config(path, config: LinkConfig, grid: SimGrid | None = None) -> None:
    Path(path).write_text(config_to_text(config, grid))


def parse_config(text: str) -> tuple[LinkConfig, SimGrid | None]:
    data = tomllib.loads(text)
    unknown = sorted(set(data) - set(_LINK_FIELDS) - set(_GRID_FIELDS))
    if unknown:
        raise ConfigError({k: "unknown key" for k in unknown})
    nested = [k for k, v in data.items() if isinstance(v, (dict, list))]
    if nested:
        raise ConfigError({k: "config must be a flat key-value table" for k in nested})
    missing = [
        f.name
        for f in dataclasses.fields(LinkConfig)
        if f.name not in data and f.default is dataclasses.MISSING
    ]
    if missing:
        raise ConfigError({k: "missing key" for k in missing})
    link = {k: data[k] for k in _LINK_FIELDS if k in data}
    for k, v in link.items():
        if k != "n_channels":
            link[k] = float(v)
    config = LinkConfig(**link)
    grid = None
    present = [k for k in _GRID_FIELDS if k in data]
    if present:
        if len(present) != len(_GRID_FIELDS):
            absent = [k for k in _GRID_FIELDS if k not in data]
            raise ConfigError({k: "grid keys must be given together" for k in absent})
        grid = SimGrid(float(data["t_window"]), data["n_time"], data["n_zsteps"])
    return config, grid


def load_config(path) -> tuple[LinkConfig, SimGrid | None]:
    """Read a config file; returns the link config and the grid if present."""
    return parse_config(Path(path).read_text())
