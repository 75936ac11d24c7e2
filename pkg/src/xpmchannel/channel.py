"""Lumped multiplicative phase-noise channel.

The continuously injected XPM phase is lumped into a single Gaussian phase
``U(L)`` at the fiber output, with variance ``sigma_nu_sq * (L / v_g) * L^2``.
Two sampling modes are provided: one phase per waveform block
(:func:`apply_lumped_channel`) and an i.i.d. phase per symbol
(:func:`discrete_channel`, the model used by the capacity bound).
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .config import LinkConfig
from .signals import SignalGrid
from .xpm_stats import sigma_nu_sq as _sigma_nu_sq

__all__ = [
    "PhaseNoiseChannelSpec",
    "sigma_U_sq_lumped",
    "lumped_channel_spec",
    "apply_lumped_channel",
    "discrete_channel",
    "write_symbols",
]


@dataclass(frozen=True)
class PhaseNoiseChannelSpec:
    sigma_U_sq: float
    sigma_N_sq: float
    seed: object = None

    def __post_init__(self):
        if not self.sigma_U_sq >= 0:
            raise ValueError(f"sigma_U_sq must be >= 0 (got {self.sigma_U_sq!r})")
        if not self.sigma_N_sq >= 0:
            raise ValueError(f"sigma_N_sq must be >= 0 (got {self.sigma_N_sq!r})")


def sigma_U_sq_lumped(sigma_nu_sq: float, config: LinkConfig) -> float:
    """Variance of the lumped phase, using t - t' ~ L / v_g."""
    L = config.length_L
    return sigma_nu_sq * (L / config.group_velocity) * L**2


def lumped_channel_spec(config: LinkConfig, sigma_N_sq: float, seed=None,
                        approx: bool = True) -> PhaseNoiseChannelSpec:
    """Channel spec whose phase variance follows from the link parameters.

    ``approx`` selects ``ln(N/2)`` instead of the harmonic number, matching the
    parametric form of the capacity bound.
    """
    var = sigma_U_sq_lumped(_sigma_nu_sq(config, approx=approx), config)
    return PhaseNoiseChannelSpec(var, sigma_N_sq, seed)


def _circular_noise(rng, n, sigma_sq):
    scale = np.sqrt(sigma_sq / 2.0)
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * scale


def apply_lumped_channel(x_tilde: SignalGrid, spec: PhaseNoiseChannelSpec) -> SignalGrid:
    """``y = exp(-i U) x_tilde + n`` with a single phase draw for the whole block."""
    rng = np.random.default_rng(spec.seed)
    u = rng.normal(0.0, np.sqrt(spec.sigma_U_sq))
    y = np.exp(-1j * u) * x_tilde.samples
    if spec.sigma_N_sq > 0:
        y = y + _circular_noise(rng, y.size, spec.sigma_N_sq)
    return x_tilde.with_samples(y)


def discrete_channel(x_seq, spec: PhaseNoiseChannelSpec, power: float | None = None) -> np.ndarray:
    """``y_k = exp(-i u_k) x_k + n_k`` with i.i.d. ``u_k`` and circular Gaussian ``n_k``.

    If ``power`` is given the sequence must satisfy ``mean |x_k|^2 <= power``.
    """
    x = np.asarray(x_seq, dtype=np.complex128)
    if not np.all(np.isfinite(x)):
        raise ValueError("input symbols must be finite")
    if power is not None and x.size and np.mean(np.abs(x) ** 2) > power * (1 + 1e-12):
        raise ValueError(
            f"average input power {np.mean(np.abs(x) ** 2):.6g} exceeds the constraint {power:.6g}"
        )
    rng = np.random.default_rng(spec.seed)
    u = rng.normal(0.0, np.sqrt(spec.sigma_U_sq), x.size)
    y = np.exp(-1j * u) * x
    if spec.sigma_N_sq > 0:
        y = y + _circular_noise(rng, x.size, spec.sigma_N_sq)
    return y


def write_symbols(path, x, y, meta: dict | None = None) -> None:
    """Columnar text: index, Re_in, Im_in, Re_out, Im_out."""
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {v}\n")
    buf.write("# index Re_in Im_in Re_out Im_out\n")
    for k in range(x.size):
        buf.write(f"{k} {x[k].real:.17g} {x[k].imag:.17g} {y[k].real:.17g} {y[k].imag:.17g}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
