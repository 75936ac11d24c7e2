"""Split-step integration of the equations of motion.

Sign conventions.  The central-channel equation is taken as

    i dx/dz - (beta2/2) d^2x/dt^2 = nu(z, t) x,

so in the frequency domain (numpy FFT order, d/dt -> i omega) the linear step
over a length ``h`` multiplies by ``exp(+i beta2/2 omega^2 h)`` and the
potential step by ``exp(-i nu h)``.  The impulse response of the linear step is
then exactly the Fresnel kernel

    K_L(tau) = exp(i pi/4) / sqrt(2 pi beta2 L) * exp(-i tau^2 / (2 beta2 L)),

which is unitary as an integral operator.

The coupled solver evolves loss-normalised envelopes ``x_k``; the physical
field is ``x_k exp(-alpha z / 2)`` and the loss enters the nonlinear phase as
``exp(-alpha z)``.  Channel ``k`` walks off with group delay
``beta1_slope * k`` ps/km relative to the frame of the central channel.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import kernels
from .config import LinkConfig, SimGrid
from .signals import GridMismatchError, SignalGrid, check_same_grid
from .xpm_stats import PotentialField

__all__ = [
    "PowerConstraintError",
    "GuardBandError",
    "linear_transfer",
    "free_propagator",
    "fresnel_matched_grid",
    "delta_signal",
    "propagate_linear",
    "chirp_transform",
    "inverse_chirp_transform",
    "propagate_coupled",
    "coupled_xpm_potential",
    "propagate_surrogate",
    "physical_envelope",
    "rms_width",
    "dispersion_spread",
    "check_guard_band",
]

POWER_RTOL = 1e-9


class PowerConstraintError(ValueError):
    pass


class GuardBandError(ValueError):
    pass


def linear_transfer(grid: SimGrid, beta2: float, h: float, delay: float = 0.0) -> np.ndarray:
    """Frequency response of dispersion over ``h`` km plus a group delay ``delay`` ps."""
    w = grid.omega
    return np.exp(1j * (0.5 * beta2 * h) * w**2 - 1j * delay * w)


def free_propagator(t, t_prime, config: LinkConfig, length: float | None = None):
    """Unitary Fresnel kernel K_L(t - t') of the dispersive fiber."""
    L = config.length_L if length is None else length
    b = config.beta2 * L
    if b == 0:
        raise ValueError("free propagator is degenerate for beta2 * L = 0")
    tau = np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float)
    norm = np.exp(1j * math.pi / 4) / np.sqrt(2 * math.pi * b + 0j)
    return norm * np.exp(-1j * tau**2 / (2.0 * b))


def fresnel_matched_grid(config: LinkConfig, n_time: int, n_zsteps: int,
                         length: float | None = None) -> SimGrid:
    """Grid with ``dt^2 = 2 pi beta2 L / n_time``.

    On this lattice the periodic discrete propagator of a sampled delta
    reproduces the sampled Fresnel kernel exactly (a quadratic Gauss sum).
    """
    L = config.length_L if length is None else length
    dt = math.sqrt(2 * math.pi * config.beta2 * L / n_time)
    return SimGrid(dt * n_time, n_time, n_zsteps)


def delta_signal(grid: SimGrid, t0: float, channel_index: int = 0) -> SignalGrid:
    """Discrete unit-area impulse at lattice time ``t0``."""
    samples = np.zeros(grid.n_time, dtype=np.complex128)
    samples[grid.index_of(t0)] = 1.0 / grid.dt
    return SignalGrid(samples, grid, channel_index)


def propagate_linear(x: SignalGrid, config: LinkConfig, length: float | None = None,
                     delay: float = 0.0) -> SignalGrid:
    L = config.length_L if length is None else length
    H = linear_transfer(x.grid, config.beta2, L, delay)
    return x.with_samples(np.fft.ifft(np.fft.fft(x.samples) * H))


def chirp_transform(x: SignalGrid, config: LinkConfig) -> SignalGrid:
    """Convolution of ``x`` with the Fresnel kernel K_L (identity when beta2*L = 0)."""
    if config.beta2 * config.length_L == 0:
        return x.with_samples(x.samples.copy())
    return propagate_linear(x, config)


def inverse_chirp_transform(x: SignalGrid, config: LinkConfig) -> SignalGrid:
    """Convolution with the conjugate kernel; undoes :func:`chirp_transform`."""
    if config.beta2 * config.length_L == 0:
        return x.with_samples(x.samples.copy())
    return propagate_linear(x, config, length=-config.length_L)


def physical_envelope(x: SignalGrid, config: LinkConfig, z: float | None = None) -> SignalGrid:
    """Attach the fiber loss ``exp(-alpha z / 2)`` to a loss-normalised envelope."""
    z = config.length_L if z is None else z
    return x.with_samples(x.samples * math.exp(-0.5 * config.alpha * z))


def _effective_length(alpha: float, z0: float, h: float) -> float:
    if alpha == 0:
        return h
    return math.exp(-alpha * z0) * -math.expm1(-alpha * h) / alpha


def _check_power(signals: Sequence[SignalGrid], power: float) -> None:
    for s in signals:
        if s.mean_power > power * (1 + POWER_RTOL):
            raise PowerConstraintError(
                f"channel {s.channel_index}: mean power {s.mean_power:.6g} W exceeds "
                f"the per-channel limit {power:.6g} W"
            )


def _prepare_inputs(inputs, config: LinkConfig, grid: SimGrid):
    check_same_grid(inputs, grid)
    indices = [s.channel_index for s in inputs]
    expected = list(config.channel_indices)
    if sorted(indices) != expected:
        raise ValueError(
            f"need exactly one input per channel k = {expected[0]}..{expected[-1]}, "
            f"got indices {sorted(indices)}"
        )
    _check_power(inputs, config.channel_power)
    order = np.argsort(indices)
    ks = np.asarray(indices)[order]
    fields = np.ascontiguousarray(np.stack([inputs[i].samples for i in order]))
    return ks, fields


def _coupled_run(inputs, config, grid, include_spm, record):
    ks, fields = _prepare_inputs(inputs, config, grid)
    m = grid.n_zsteps
    h = grid.dz(config.length_L)
    delays = config.beta1_slope * ks
    w = grid.omega
    disp = 0.5 * config.beta2 * w**2
    half = np.exp(1j * (h / 2) * (disp[None, :] - delays[:, None] * w[None, :]))
    full = half * half
    centre = int(np.flatnonzero(ks == 0)[0])
    trace = np.empty((m, grid.n_time)) if record else None

    spec = np.fft.fft(fields, axis=1) * half
    for step in range(m):
        fields = np.ascontiguousarray(np.fft.ifft(spec, axis=1))
        if record:
            power = np.abs(fields) ** 2
            neighbours = power.sum(axis=0) - power[centre]
            trace[step] = 2.0 * config.gamma * neighbours * math.exp(-config.alpha * (step + 0.5) * h)
        coeff = config.gamma * _effective_length(config.alpha, step * h, h)
        if coeff != 0.0:
            kernels.xpm_phase_rotate(fields, coeff, include_spm)
        spec = np.fft.fft(fields, axis=1) * (full if step < m - 1 else half)
    out = np.fft.ifft(spec, axis=1)
    outputs = [SignalGrid(row, grid, int(k)) for row, k in zip(out, ks)]
    return outputs, trace


def propagate_coupled(inputs: Sequence[SignalGrid], config: LinkConfig, grid: SimGrid,
                      include_spm: bool = True) -> list[SignalGrid]:
    """Integrate the N+1 coupled XPM equations with symmetric split-step Fourier.

    Each of the ``grid.n_zsteps`` steps applies a linear half-step (dispersion
    and walk-off), the full nonlinear phase
    ``gamma * (|x_k|^2 + 2 sum_{l != k} |x_l|^2) * int exp(-alpha z) dz``, and a
    second linear half-step.  The time window is periodic.

    Parameters
    ----------
    inputs : sequence of SignalGrid
        One envelope per channel index ``-N/2 .. N/2``, all on the same lattice,
        each with mean power at most ``config.channel_power``.
    include_spm : bool
        Keep the self-phase term ``|x_k|^2``; set False for XPM only.

    Returns
    -------
    list of SignalGrid
        Loss-normalised envelopes at z = L, sorted by channel index.
    """
    outputs, _ = _coupled_run(inputs, config, grid, include_spm, record=False)
    return outputs


def coupled_xpm_potential(inputs: Sequence[SignalGrid], config: LinkConfig, grid: SimGrid,
                          include_spm: bool = True):
    """Run the coupled solver and record the central channel's XPM potential.

    Returns the outputs and a :class:`PotentialField` (convention
    ``"empirical"``) holding ``V0`` at every step midpoint.
    """
    outputs, trace = _coupled_run(inputs, config, grid, include_spm, record=True)
    return outputs, PotentialField(trace, grid, "empirical")


def propagate_surrogate(x0: SignalGrid, potential: PotentialField,
                        config: LinkConfig) -> SignalGrid:
    """Integrate the linear central-channel equation with a frozen potential.

    One symmetric split step per row of ``potential``; the row is applied as
    ``exp(-i nu h)``.
    """
    if not x0.grid.same_lattice(potential.grid):
        raise GridMismatchError("signal and potential live on different time grids")
    m = potential.n_zsteps
    h = config.length_L / m
    half = linear_transfer(x0.grid, config.beta2, h / 2)
    full = half * half
    spec = np.fft.fft(x0.samples) * half
    for step in range(m):
        x = np.fft.ifft(spec) * np.exp(-1j * h * potential.values[step])
        spec = np.fft.fft(x) * (full if step < m - 1 else half)
    return x0.with_samples(np.fft.ifft(spec))


def rms_width(x: SignalGrid) -> float:
    """RMS width of |x|^2 about its centroid (no wrap-around handling)."""
    p = np.abs(x.samples) ** 2
    t = x.times
    total = p.sum()
    mean = (p * t).sum() / total
    return float(np.sqrt((p * (t - mean) ** 2).sum() / total))


def dispersion_spread(x: SignalGrid, config: LinkConfig) -> float:
    """Full dispersive spread ``2 beta2 L omega_rms`` of a signal over the link."""
    spec = np.abs(np.fft.fft(x.samples)) ** 2
    total = spec.sum()
    if total == 0:
        return 0.0
    w = x.grid.omega
    mean = (spec * w).sum() / total
    w_rms = math.sqrt((spec * (w - mean) ** 2).sum() / total)
    return 2.0 * abs(config.beta2) * config.length_L * w_rms


def check_guard_band(signals: Sequence[SignalGrid], config: LinkConfig, factor: float = 4.0) -> None:
    """Require the periodic window to be at least ``factor`` times every signal's spread."""
    for s in signals:
        spread = dispersion_spread(s, config)
        if s.grid.t_window < factor * spread:
            raise GuardBandError(
                f"channel {s.channel_index}: time window {s.grid.t_window:.6g} ps is shorter "
                f"than {factor:g}x the dispersive spread {spread:.6g} ps"
            )
