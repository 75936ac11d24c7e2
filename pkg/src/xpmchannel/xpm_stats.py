"""XPM potential statistics and the Gaussian surrogate potential.

Discretisation convention ("white-discrete"): the surrogate potential is white
in time with spectral density ``sigma_nu_sq``, so each lattice sample is drawn
with variance ``sigma_nu_sq / dt``.  A sum ``sum_j nu_j dt`` over an interval
of length ``T`` then has variance ``sigma_nu_sq * T``.  Along the fiber the
field is either white at lattice resolution (independent z-slices) or frozen
(``z_invariant=True``, one time series shared by every slice).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import UNITS, LinkConfig, SimGrid
from .signals import SignalGrid, check_same_grid, read_binary, write_binary

__all__ = [
    "PotentialField",
    "PotentialMoments",
    "harmonic_number",
    "xpm_potential_from_signals",
    "sigma_nu_sq_value",
    "sigma_nu_sq",
    "sample_surrogate_potential",
    "empirical_potential_moments",
    "save_potential",
    "load_potential",
]

CONVENTIONS = ("white-discrete", "empirical")


@dataclass
class PotentialField:
    """Real potential nu(z, t) in 1/km on a (z-step, t-sample) lattice.

    Row ``k`` holds the potential at the midpoint of fiber step ``k``.
    """

    values: np.ndarray
    grid: SimGrid
    correlation_convention: str = "white-discrete"
    spectral_density: float | None = None
    seed: int | None = None
    z_invariant: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n_time:
            raise ValueError(
                f"potential must have shape (n_zsteps, {self.grid.n_time}), got {self.values.shape}"
            )
        if self.correlation_convention not in CONVENTIONS:
            raise ValueError(f"unknown correlation convention {self.correlation_convention!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential values must be finite")

    @property
    def n_zsteps(self) -> int:
        return self.values.shape[0]

    def scaled(self, factor: float) -> "PotentialField":
        density = None if self.spectral_density is None else self.spectral_density * factor**2
        return PotentialField(self.values * factor, self.grid, self.correlation_convention,
                              density, self.seed, self.z_invariant)

    def at_z(self, z: float, length_L: float) -> np.ndarray:
        """Time slice at position ``z``, linearly interpolated between step midpoints."""
        m = self.n_zsteps
        if self.z_invariant or m == 1:
            return self.values[0]
        pos = z / length_L * m - 0.5
        lo = int(np.clip(np.floor(pos), 0, m - 1))
        hi = min(lo + 1, m - 1)
        frac = float(np.clip(pos - lo, 0.0, 1.0))
        return (1.0 - frac) * self.values[lo] + frac * self.values[hi]

    def slices_for(self, m: int, length_L: float) -> np.ndarray:
        """Potential at the midpoints of ``m`` equal steps, shape ``(m, n_time)``."""
        if m == self.n_zsteps:
            return self.values
        if self.z_invariant:
            return np.broadcast_to(self.values[0], (m, self.grid.n_time))
        h = length_L / m
        return np.stack([self.at_z((k + 0.5) * h, length_L) for k in range(m)])


def harmonic_number(m: int) -> float:
    """H_m = sum_{n=1}^m 1/n, summed smallest terms first."""
    if m < 0:
        raise ValueError("m must be >= 0")
    return math.fsum(1.0 / n for n in range(m, 0, -1))


def xpm_potential_from_signals(neighbor_signals: Sequence[SignalGrid], config: LinkConfig,
                               z: float) -> np.ndarray:
    """XPM potential seen by the central channel at distance ``z``.

    Returns ``2*gamma*sum_l |x_l|^2 * exp(-alpha*z)`` over the time grid, where
    the sum runs over every supplied neighbour (``channel_index != 0``).
    """
    if not neighbor_signals:
        raise ValueError("need at least one neighbour signal to fix the time grid")
    check_same_grid(neighbor_signals)
    if any(s.channel_index == 0 for s in neighbor_signals):
        raise ValueError("the central channel (k=0) is not its own neighbour")
    power = np.sum([np.abs(s.samples) ** 2 for s in neighbor_signals], axis=0)
    return 2.0 * config.gamma * power * math.exp(-config.alpha * z)


def sigma_nu_sq_value(power: float, beta2: float, spacing: float, n_channels: int,
                      approx: bool = False) -> float:
    """Variance of the XPM potential, ``2 P^2 / (beta2 spacing^2) * H_{N/2}``.

    Units are whatever the caller supplies.  With ``approx=True`` the harmonic
    number is replaced by ``ln(N/2)``.
    """
    m = n_channels // 2
    weight = math.log(m) if approx else harmonic_number(m)
    return 2.0 * power**2 / (beta2 * spacing**2) * weight


def sigma_nu_sq(config: LinkConfig, approx: bool = False) -> float:
    """Same as :func:`sigma_nu_sq_value` with the dispersion-spacing product in 1/km."""
    bdv = UNITS.dispersion_spacing_product(config.beta2, config.channel_spacing)
    return sigma_nu_sq_value(config.channel_power, bdv, 1.0, config.n_channels, approx=approx)


def sample_surrogate_potential(grid: SimGrid, sigma_nu_sq: float, seed,
                               z_invariant: bool = False) -> PotentialField:
    """Zero-mean white Gaussian potential with per-sample variance ``sigma_nu_sq/dt``.

    The draw depends only on ``(grid, sigma_nu_sq, seed, z_invariant)``.
    """
    if not sigma_nu_sq >= 0:
        raise ValueError(f"sigma_nu_sq must be >= 0 (got {sigma_nu_sq!r})")
    rng = np.random.default_rng(seed)
    rows = 1 if z_invariant else grid.n_zsteps
    values = rng.standard_normal((rows, grid.n_time)) * math.sqrt(sigma_nu_sq / grid.dt)
    if z_invariant:
        values = np.repeat(values, grid.n_zsteps, axis=0)
    seed_tag = int(seed) if isinstance(seed, (int, np.integer)) else None
    return PotentialField(values, grid, "white-discrete", sigma_nu_sq, seed_tag, z_invariant)


@dataclass
class PotentialMoments:
    mean: np.ndarray
    variance: np.ndarray
    mean_variance: float
    lag1_correlation: float
    n_fields: int
    extra: dict = field(default_factory=dict)


def empirical_potential_moments(fields) -> PotentialMoments:
    """Ensemble mean and second moments of potential slices.

    ``fields`` is a 2-d array (ensemble, t) or a sequence of 1-d slices.
    Variances are second moments about the sample mean (no Bessel correction).
    """
    data = np.asarray(fields, dtype=np.float64)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape[0] < 2:
        raise ValueError("need an ensemble of at least two slices")
    mean = data.mean(axis=0)
    centred = data - mean
    variance = np.mean(centred**2, axis=0)
    mean_var = float(variance.mean())
    if data.shape[1] > 1 and mean_var > 0:
        lag1 = float(np.mean(centred[:, :-1] * centred[:, 1:]) / mean_var)
    else:
        lag1 = 0.0
    return PotentialMoments(mean, variance, mean_var, lag1, data.shape[0])


def save_potential(path, potential: PotentialField) -> None:
    g = potential.grid
    header = {
        "kind": "potential_field",
        "grid": {"t_window": g.t_window, "n_time": g.n_time, "n_zsteps": g.n_zsteps},
        "seed": potential.seed,
        "correlation_convention": potential.correlation_convention,
        "spectral_density": potential.spectral_density,
        "z_invariant": potential.z_invariant,
    }
    write_binary(path, potential.values, header)


def load_potential(path) -> PotentialField:
    values, header = read_binary(path)
    if header.get("kind") != "potential_field":
        raise ValueError(f"{path}: not a potential field")
    g = header["grid"]
    grid = SimGrid(float(g["t_window"]), int(g["n_time"]), int(g["n_zsteps"]))
    return PotentialField(values, grid, header["correlation_convention"],
                          header["spectral_density"], header["seed"], header["z_invariant"])
