"""Discretised path-integral Green's function and the phase process U.

``green_discrete`` evaluates the M-step path integral by kernel composition:
a dense circulant transfer matrix per fiber step, alternated with the
potential phase ``exp(-i nu h)``.  The kernel matrices are built from an
explicit DFT sum, so this route shares no FFT code with
:func:`xpmchannel.propagator.propagate_surrogate`.

``compute_U`` evaluates the weighted potential integral

    U = exp(-i D^2/(2 b)) int_0^1 da int_{t'}^{t} exp(-i (s - s_a)^2 / (2 b a (1-a))) nu(z_a, s) ds

with ``b = beta2 L``, ``D = t - t'``, ``s_a = (1-a) t + a t'`` and scattering
position ``z_a = (1-a) L``; the chirp weights have unit modulus and ``nu`` is
windowed to ``[t', t]``.  Quadrature is the midpoint rule in ``a`` (the chirp
rate diverges at both ends) and the trapezoid rule on the time lattice.

``first_order_U`` is the Born term of the discrete cascade divided by
``-i L G0``; it is the quantity that ``green_resummed`` exponentiates.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .config import LinkConfig, SimGrid
from .propagator import free_propagator
from .xpm_stats import PotentialField, sample_surrogate_potential, sigma_nu_sq as _sigma_nu_sq

__all__ = [
    "GreenEvaluation",
    "UStatistics",
    "step_kernel_matrix",
    "green_discrete",
    "u_weights",
    "compute_U",
    "first_order_U",
    "green_resummed",
    "validate_U_distribution",
    "worker_count",
]

WORKERS_ENV = "XPMCHANNEL_WORKERS"
TRIAL_CHUNK = 500
MIN_TRIALS = 100


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


@dataclass
class GreenEvaluation:
    value: complex
    t: float
    t_prime: float
    m_steps: int
    potential_ref: dict


@dataclass
class UStatistics:
    sample_mean: complex
    sample_variance: float
    n_trials: int
    target_variance: float
    gaussianity_pvalue: float
    seed: int | None = None
    z_correlation: str = "frozen"

    @property
    def variance_ratio(self) -> float:
        if self.target_variance == 0:
            return 1.0 if self.sample_variance == 0 else math.inf
        return self.sample_variance / self.target_variance

    @property
    def mean_stderr(self) -> float:
        return math.sqrt(self.sample_variance / self.n_trials)

    def passes(self, var_tol: float = 0.05, alpha: float = 0.01) -> bool:
        mean_ok = abs(self.sample_mean) <= 3 * self.mean_stderr
        return bool(abs(self.variance_ratio - 1.0) <= var_tol and mean_ok
                    and self.gaussianity_pvalue >= alpha)

    def as_record(self) -> dict:
        rec = asdict(self)
        mean = rec.pop("sample_mean")
        rec["mean_re"], rec["mean_im"] = float(mean.real), float(mean.imag)
        rec["variance_ratio"] = self.variance_ratio
        rec["mean_stderr"] = self.mean_stderr
        return rec


def step_kernel_matrix(grid: SimGrid, beta2: float, h: float) -> np.ndarray:
    """Dense periodic transfer matrix of the linear step over ``h`` km.

    ``K[a, b] = (1/n) sum_k exp(i beta2/2 w_k^2 h) exp(2 pi i (a-b) k / n)``.
    """
    n = grid.n_time
    k = np.arange(n)
    w = 2 * np.pi * np.where(k < (n + 1) // 2, k, k - n) / (n * grid.dt)
    H = np.exp(1j * (0.5 * beta2 * h) * w**2)
    phase = np.exp(2j * np.pi * (np.outer(k, k) % n) / n)
    column = phase @ H / n
    return column[(k[:, None] - k[None, :]) % n]


def _potential_ref(potential: PotentialField) -> dict:
    return {"seed": potential.seed, "convention": potential.correlation_convention,
            "z_invariant": potential.z_invariant, "id": id(potential)}


def _cascade_matrices(grid, config, m):
    h = config.length_L / m
    half = step_kernel_matrix(grid, config.beta2, h / 2)
    return h, half, half @ half


def green_discrete(t: float, t_prime: float, potential: PotentialField, config: LinkConfig,
                   m: int | None = None) -> GreenEvaluation:
    """M-step discretised path integral G(L; t, t').

    The cascade is seeded with a unit-area delta at ``t'`` and read out at
    ``t``; both must be lattice points of ``potential.grid``.  When ``m``
    differs from the number of potential rows, the potential is interpolated
    linearly in z at the step midpoints.
    """
    grid = potential.grid
    m = potential.n_zsteps if m is None else int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    j_in, j_out = grid.index_of(t_prime), grid.index_of(t)
    h, half, full = _cascade_matrices(grid, config, m)
    slices = potential.slices_for(m, config.length_L)
    v = half[:, j_in] / grid.dt
    for step in range(m):
        v = v * np.exp(-1j * h * slices[step])
        v = (full if step < m - 1 else half) @ v
    return GreenEvaluation(complex(v[j_out]), t, t_prime, m, _potential_ref(potential))


def first_order_U(potential: PotentialField, t: float, t_prime: float, config: LinkConfig,
                  m: int | None = None) -> complex:
    """Born term of the discrete cascade, normalised as ``G1 / (-i L G0)``."""
    grid = potential.grid
    m = potential.n_zsteps if m is None else int(m)
    j_in, j_out = grid.index_of(t_prime), grid.index_of(t)
    h, half, full = _cascade_matrices(grid, config, m)
    slices = potential.slices_for(m, config.length_L)
    forward = [half[:, j_in] / grid.dt]
    for _ in range(m - 1):
        forward.append(full @ forward[-1])
    backward = [half[j_out, :]]
    for _ in range(m - 1):
        backward.append(backward[-1] @ full)
    backward.reverse()
    g1 = -1j * h * sum(np.sum(backward[s] * slices[s] * forward[s]) for s in range(m))
    g0 = half[j_out, :] @ forward[-1]
    return complex(g1 / (-1j * config.length_L * g0))


def u_weights(grid: SimGrid, t: float, t_prime: float, config: LinkConfig,
              n_alpha: int | None = None):
    """Quadrature weights for :func:`compute_U`.

    Returns ``(z_nodes, index, W)`` such that
    ``U = sum_a sum_j W[a, j] * nu(z_nodes[a], t_index[j])``.
    """
    n_alpha = grid.n_zsteps if n_alpha is None else int(n_alpha)
    j0, j1 = sorted((grid.index_of(t_prime), grid.index_of(t)))
    index = np.arange(j0, j1 + 1)
    s = grid.times[index]
    lattice_w = np.full(index.size, grid.dt)
    lattice_w[[0, -1]] *= 0.5
    b = config.beta2 * config.length_L
    alpha = (np.arange(n_alpha) + 0.5) / n_alpha
    centre = (1 - alpha) * t + alpha * t_prime
    chirp = np.exp(-1j * (s[None, :] - centre[:, None]) ** 2
                   / (2 * b * (alpha * (1 - alpha))[:, None]))
    overall = np.exp(-1j * (t - t_prime) ** 2 / (2 * b))
    W = overall * chirp * lattice_w[None, :] / n_alpha
    z_nodes = (1 - alpha) * config.length_L
    return z_nodes, index, W


def compute_U(potential: PotentialField, t: float, t_prime: float, config: LinkConfig,
              refine: int = 1) -> complex:
    """Fresnel-weighted potential integral U(L; t', t); zero when ``t == t'``.

    ``refine`` multiplies the number of midpoint nodes in ``a`` relative to
    the number of potential rows.
    """
    if t == t_prime:
        return 0j
    grid = potential.grid
    z_nodes, index, W = u_weights(grid, t, t_prime, config, potential.n_zsteps * refine)
    if potential.z_invariant or potential.n_zsteps == 1:
        return complex(W.sum(axis=0) @ potential.values[0, index])
    slices = np.stack([potential.at_z(z, config.length_L)[index] for z in z_nodes])
    return complex(np.sum(W * slices))


def green_resummed(t: float, t_prime: float, u_value: complex, config: LinkConfig) -> complex:
    """Free kernel times the lumped phase factor ``exp(-i L U)``."""
    return complex(free_propagator(t, t_prime, config) * np.exp(-1j * config.length_L * u_value))


def _normality_pvalue(values: np.ndarray) -> float:
    pvals = []
    for part in (values.real, values.imag):
        if np.ptp(part) <= 1e-300 or np.std(part) <= 1e-12 * max(1e-300, np.abs(values).max()):
            continue
        pvals.append(stats.normaltest(part).pvalue)
    if not pvals:
        return 1.0
    return float(min(1.0, len(pvals) * min(pvals)))


def _u_chunk(children, grid, sigma, weights, index, frozen):
    out = np.empty(len(children), dtype=np.complex128)
    for i, child in enumerate(children):
        field = sample_surrogate_potential(grid, sigma, child, z_invariant=frozen)
        if frozen:
            out[i] = weights @ field.values[0, index]
        else:
            out[i] = np.sum(weights * field.values[:, index])
    return out


def validate_U_distribution(config: LinkConfig, grid: SimGrid, t: float, t_prime: float,
                            n_trials: int, seed: int, sigma_nu_sq: float | None = None,
                            z_correlation: str = "frozen",
                            workers: int | None = None) -> UStatistics:
    """Monte Carlo check of U's mean, variance and Gaussianity.

    Each trial draws an independent white-discrete surrogate potential (trial
    ``i`` uses the ``i``-th child of ``SeedSequence(seed)``) and evaluates
    :func:`compute_U`.  The target variance is ``sigma_nu_sq * |t - t'|``.

    ``z_correlation="frozen"`` shares one time series across the fiber, which
    is the setting in which the target applies; ``"white"`` draws independent
    z-slices, for which the variance falls roughly as ``1/n_zsteps``.
    """
    if n_trials < MIN_TRIALS:
        raise ValueError(f"n_trials must be >= {MIN_TRIALS} (got {n_trials})")
    if z_correlation not in ("frozen", "white"):
        raise ValueError("z_correlation must be 'frozen' or 'white'")
    sigma = _sigma_nu_sq(config) if sigma_nu_sq is None else float(sigma_nu_sq)
    frozen = z_correlation == "frozen"
    children = np.random.SeedSequence(seed).spawn(n_trials)
    if t == t_prime:
        values = np.zeros(n_trials, dtype=np.complex128)
    else:
        _, index, W = u_weights(grid, t, t_prime, config)
        if frozen:
            W = W.sum(axis=0)
        else:
            W = W[::-1]  # node a <-> slice n_zsteps-1-a
        chunks = [children[i:i + TRIAL_CHUNK] for i in range(0, n_trials, TRIAL_CHUNK)]
        with ThreadPoolExecutor(max_workers=worker_count(workers)) as pool:
            parts = list(pool.map(lambda c: _u_chunk(c, grid, sigma, W, index, frozen), chunks))
        values = np.concatenate(parts)
    mean = complex(values.mean())
    var = float(np.mean(np.abs(values - mean) ** 2))
    return UStatistics(mean, var, n_trials, sigma * abs(t - t_prime),
                       _normality_pvalue(values), int(seed), z_correlation)
