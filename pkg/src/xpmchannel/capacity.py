"""High-SNR capacity upper bound for the lumped phase-noise channel.

Both printed forms of the bound are evaluated with the ``o(1)`` term omitted,
so every value here is a high-SNR asymptotic.  Logarithms are natural inside;
``base="bits"`` converts the result.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .channel import PhaseNoiseChannelSpec, sigma_U_sq_lumped
from .config import UNITS, ConfigError, LinkConfig, validate
from .reports import write_table
from .xpm_stats import harmonic_number, sigma_nu_sq

__all__ = [
    "SweepError",
    "CapacityRow",
    "CapacityReport",
    "gaussian_differential_entropy",
    "capacity_bound_entropy_form",
    "bound_coefficient",
    "capacity_bound_param_form",
    "capacity_bound_via_entropy",
    "capacity_sweep",
    "ring_constellation",
    "psk_constellation",
    "phase_quadrature",
    "mi_monte_carlo",
    "REPORT_COLUMNS",
]

LN2 = math.log(2.0)
MIN_MI_SAMPLES = 1000
MAX_PHASE_NODES = 1 << 16


class SweepError(ValueError):
    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"sweep point {index}: {message}")


def _in_base(value_nats: float, base: str) -> float:
    if base == "nats":
        return value_nats
    if base == "bits":
        return value_nats / LN2
    raise ValueError(f"unknown log base {base!r}; use 'nats' or 'bits'")


def gaussian_differential_entropy(sigma_sq: float) -> float:
    """Differential entropy of N(0, sigma_sq) in nats."""
    if not sigma_sq > 0:
        raise ValueError(f"variance must be > 0 (got {sigma_sq!r})")
    return 0.5 * math.log(2 * math.pi * math.e * sigma_sq)


def capacity_bound_entropy_form(P: float, sigma_N_sq: float, h_u: float,
                                base: str = "nats") -> float:
    """``1/2 log(1 + 2 pi^2 exp(-2 h_u) P / sigma_N_sq)``."""
    if not (P > 0 and sigma_N_sq > 0):
        raise ValueError("P and sigma_N_sq must be > 0")
    snr_term = 2 * math.pi**2 * math.exp(-2.0 * h_u) * P / sigma_N_sq
    return _in_base(0.5 * math.log1p(snr_term), base)


def bound_coefficient(config: LinkConfig, exact_harmonic: bool = False) -> float:
    """Scalar multiplying ``1/(P sigma_N^2)`` inside the log of the parametric form.

    ``(pi/e) * beta2 dnu^2 / (2 ln(N/2)) * v_g / L^3`` with ``beta2 dnu^2`` in 1/km.
    """
    m = config.n_channels // 2
    if m < 2:
        raise ValueError("the parametric bound needs n_channels >= 4 (ln(N/2) > 0)")
    weight = sigma_nu_sq_weight(m, exact_harmonic)
    bdv = UNITS.dispersion_spacing_product(config.beta2, config.channel_spacing)
    return (math.pi / math.e) * bdv / (2 * weight) * config.group_velocity / config.length_L**3


def sigma_nu_sq_weight(m: int, exact_harmonic: bool) -> float:
    return harmonic_number(m) if exact_harmonic else math.log(m)


def capacity_bound_param_form(config: LinkConfig, P: float | None = None,
                              sigma_N_sq: float = 1.0, base: str = "nats",
                              exact_harmonic: bool = False) -> float:
    """Parametric bound ``1/2 log(1 + coefficient / (P sigma_N_sq))``."""
    P = config.channel_power if P is None else P
    if not (P > 0 and sigma_N_sq > 0):
        raise ValueError("P and sigma_N_sq must be > 0")
    coeff = bound_coefficient(config, exact_harmonic)
    return _in_base(0.5 * math.log1p(coeff / (P * sigma_N_sq)), base)


def capacity_bound_via_entropy(config: LinkConfig, P: float | None = None,
                               sigma_N_sq: float = 1.0, base: str = "nats",
                               exact_harmonic: bool = False) -> float:
    """Entropy form fed by the link chain: potential variance, lumped phase, h(u)."""
    P = config.channel_power if P is None else P
    cfg = config if P == config.channel_power else config.replace(channel_power=P)
    var_u = sigma_U_sq_lumped(sigma_nu_sq(cfg, approx=not exact_harmonic), cfg)
    return capacity_bound_entropy_form(P, sigma_N_sq, gaussian_differential_entropy(var_u), base)


def ring_constellation(n_rings: int, power: float, points_per_ring: int = 1) -> np.ndarray:
    """Equally spaced radii (``r, 2r, ...``) scaled to average power ``power``.

    With ``points_per_ring > 1`` each ring carries a PSK set, offset by half a
    step on alternate rings.
    """
    radii = np.arange(1, n_rings + 1, dtype=float)
    radii *= math.sqrt(power / np.mean(radii**2))
    angles = 2 * np.pi * np.arange(points_per_ring) / points_per_ring
    pts = [r * np.exp(1j * (angles + (np.pi / points_per_ring) * (i % 2)))
           for i, r in enumerate(radii)]
    return np.concatenate(pts)


def psk_constellation(m: int, power: float) -> np.ndarray:
    return math.sqrt(power) * np.exp(2j * np.pi * np.arange(m) / m)


def phase_quadrature(sigma_U_sq: float, n_nodes: int):
    """Trapezoid nodes and log-weights for integrating over the phase noise.

    Narrow phase noise (8 sigma < pi) is integrated on ``[-8 sigma, 8 sigma]``;
    wider noise on one period with the wrapped normal density.
    """
    if sigma_U_sq == 0:
        return np.zeros(1), np.zeros(1)
    sd = math.sqrt(sigma_U_sq)
    with np.errstate(divide="ignore"):
        if 8 * sd < math.pi:
            u = np.linspace(-8 * sd, 8 * sd, n_nodes)
            du = u[1] - u[0]
            logw = -0.5 * (u / sd) ** 2 - math.log(sd * math.sqrt(2 * math.pi)) + math.log(du)
            logw[[0, -1]] += math.log(0.5)
            return u, logw
        u = -math.pi + 2 * math.pi * np.arange(n_nodes) / n_nodes
        wraps = int(math.ceil(8 * sd / (2 * math.pi))) + 1
        shifts = 2 * math.pi * np.arange(-wraps, wraps + 1)
        terms = -0.5 * ((u[:, None] + shifts[None, :]) / sd) ** 2
        logw = logsumexp(terms, axis=1) - math.log(sd * math.sqrt(2 * math.pi))
        return u, logw + math.log(2 * math.pi / n_nodes)


def _information_terms(y, idx, points, log_probs, nodes, logw, sigma_N_sq):
    ll = kernels.mixture_loglik(y, points, nodes, logw, sigma_N_sq)
    with np.errstate(divide="ignore"):
        log_py = logsumexp(ll + log_probs[None, :], axis=1)
    return ll[np.arange(y.size), idx], log_py


def _adaptive_nodes(y, idx, points, log_probs, spec, tol=1e-6):
    """Double the node count until log p(y|x) and log p(y) are stable on a pilot batch."""
    if spec.sigma_U_sq == 0:
        return phase_quadrature(0.0, 1)
    n = 64
    nodes, logw = phase_quadrature(spec.sigma_U_sq, n)
    prev = np.concatenate(_information_terms(y, idx, points, log_probs, nodes, logw, spec.sigma_N_sq))
    while n < MAX_PHASE_NODES:
        n *= 2
        nodes, logw = phase_quadrature(spec.sigma_U_sq, n)
        cur = np.concatenate(_information_terms(y, idx, points, log_probs, nodes, logw, spec.sigma_N_sq))
        if np.max(np.abs(cur - prev) / np.maximum(1.0, np.abs(cur))) <= tol:
            break
        prev = cur
    return nodes, logw


def mi_monte_carlo(constellation, spec: PhaseNoiseChannelSpec, n_samples: int, seed=None,
                   probabilities=None, power: float | None = None):
    """Monte Carlo estimate of I(X;Y) in nats for the i.i.d. phase-noise channel.

    The conditional density ``p(y|x)`` integrates the circular Gaussian over
    the phase noise numerically; the node count doubles until the
    log-likelihoods of a pilot batch are stable to 1e-6 relative.

    Returns
    -------
    (estimate, standard_error)
    """
    points = np.asarray(constellation, dtype=np.complex128).ravel()
    if probabilities is None:
        probs = np.full(points.size, 1.0 / points.size)
    else:
        probs = np.asarray(probabilities, dtype=float)
    if probs.shape != points.shape or np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, rel_tol=1e-9):
        raise ValueError("probabilities must be non-negative, one per point, and sum to 1")
    if n_samples < MIN_MI_SAMPLES:
        raise ValueError(f"n_samples must be >= {MIN_MI_SAMPLES}")
    if not spec.sigma_N_sq > 0:
        raise ValueError("mutual information needs sigma_N_sq > 0")
    avg_power = float(np.sum(probs * np.abs(points) ** 2))
    if power is not None and avg_power > power * (1 + 1e-12):
        raise ValueError(f"constellation power {avg_power:.6g} exceeds the constraint {power:.6g}")

    rng = np.random.default_rng(spec.seed if seed is None else seed)
    idx = rng.choice(points.size, size=n_samples, p=probs)
    u = rng.normal(0.0, math.sqrt(spec.sigma_U_sq), n_samples)
    noise = (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)) * math.sqrt(spec.sigma_N_sq / 2)
    y = np.exp(-1j * u) * points[idx] + noise

    with np.errstate(divide="ignore"):
        log_probs = np.log(probs)
    pilot = min(256, n_samples)
    nodes, logw = _adaptive_nodes(y[:pilot], idx[:pilot], points, log_probs, spec)
    ll_sent, log_py = _information_terms(y, idx, points, log_probs, nodes, logw, spec.sigma_N_sq)
    info = ll_sent - log_py
    return float(info.mean()), float(info.std(ddof=1) / math.sqrt(n_samples))


REPORT_COLUMNS = ("sweep_value", "bound_nats", "bound_bits", "coefficient", "mi_estimate",
                  "mi_stderr", "seed", "bound_entropy_nats", "form_rel_diff")

SWEEP_ALIASES = {"P": "channel_power", "L": "length_L", "N": "n_channels",
                 "delta_nu": "channel_spacing", "v_g": "group_velocity"}


@dataclass
class CapacityRow:
    sweep_value: float
    bound_nats: float
    bound_entropy_nats: float
    coefficient: float
    mi_estimate: float = math.nan
    mi_stderr: float = math.nan
    seed: int | None = None

    @property
    def bound_bits(self) -> float:
        return self.bound_nats / LN2

    @property
    def form_rel_diff(self) -> float:
        return abs(self.bound_nats - self.bound_entropy_nats) / abs(self.bound_nats)

    def as_tuple(self):
        return (self.sweep_value, self.bound_nats, self.bound_bits, self.coefficient,
                self.mi_estimate, self.mi_stderr, self.seed, self.bound_entropy_nats,
                self.form_rel_diff)


@dataclass
class CapacityReport:
    sweep_variable: str
    sigma_N_sq: float
    rows: list[CapacityRow] = field(default_factory=list)
    exact_harmonic: bool = False
    label: str = "high-SNR asymptotic upper bound (o(1) omitted)"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def write(self, path, meta: dict | None = None) -> None:
        header = {"bound": self.label, "sweep_variable": self.sweep_variable,
                  "sigma_N_sq": self.sigma_N_sq, "exact_harmonic": self.exact_harmonic}
        header.update(meta or {})
        write_table(path, REPORT_COLUMNS, [r.as_tuple() for r in self.rows], header)


def _four_rings(power):
    return ring_constellation(4, power)


def capacity_sweep(config: LinkConfig, variable: str, values, sigma_N_sq: float,
                   exact_harmonic: bool = False, with_mi: bool = False, seed: int = 0,
                   mi_samples: int = 2000, constellation=None) -> CapacityReport:
    """Evaluate both bound forms over a one-parameter sweep of the link config.

    ``variable`` is a :class:`LinkConfig` field name (or one of the short
    aliases ``P, L, N, delta_nu, v_g``).  With ``with_mi`` each row also gets a
    Monte Carlo mutual-information estimate; ``constellation(power)`` builds
    the input set (default: four rings).
    """
    name = SWEEP_ALIASES.get(variable, variable)
    if name not in LinkConfig.__dataclass_fields__:
        raise ValueError(f"unknown sweep variable {variable!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep grid is empty")
    if constellation is None:
        constellation = _four_rings
    children = np.random.SeedSequence(seed).spawn(len(values))
    report = CapacityReport(name, sigma_N_sq, exact_harmonic=exact_harmonic)
    for i, value in enumerate(values):
        value = int(value) if name == "n_channels" else float(value)
        try:
            cfg = config.replace(**{name: value})
            validate(cfg)
            bound = capacity_bound_param_form(cfg, None, sigma_N_sq, exact_harmonic=exact_harmonic)
            alt = capacity_bound_via_entropy(cfg, None, sigma_N_sq, exact_harmonic=exact_harmonic)
            coeff = bound_coefficient(cfg, exact_harmonic)
        except (ConfigError, ValueError) as exc:
            raise SweepError(i, str(exc)) from exc
        row_seed = int(children[i].generate_state(1)[0])
        row = CapacityRow(value, bound, alt, coeff, seed=row_seed)
        if with_mi:
            var_u = sigma_U_sq_lumped(sigma_nu_sq(cfg, approx=not exact_harmonic), cfg)
            spec = PhaseNoiseChannelSpec(var_u, sigma_N_sq, row_seed)
            pts = constellation(cfg.channel_power)
            row.mi_estimate, row.mi_stderr = mi_monte_carlo(pts, spec, mi_samples,
                                                            power=cfg.channel_power)
        report.rows.append(row)
    return report
