"""Acceptance gate: one PASS/FAIL line per criterion, printed to the terminal.

Tolerances are fixed here and never loosened to make a run pass.
"""
import math

import numpy as np
import pytest

from xpmchannel.capacity import (
    bound_coefficient,
    capacity_bound_param_form,
    capacity_bound_via_entropy,
    mi_monte_carlo,
    ring_constellation,
)
from xpmchannel.channel import PhaseNoiseChannelSpec, discrete_channel, sigma_U_sq_lumped
from xpmchannel.config import SimGrid, nominal_config
from xpmchannel.pathint import green_discrete, validate_U_distribution
from xpmchannel.propagator import (
    delta_signal,
    fresnel_matched_grid,
    propagate_coupled,
    propagate_linear,
    propagate_surrogate,
    rms_width,
)
from xpmchannel.signals import SignalGrid
from xpmchannel.xpm_stats import sample_surrogate_potential, sigma_nu_sq


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        return ok
    return emit


def test_criterion_1_nominal_coefficient(report):
    c = bound_coefficient(nominal_config())
    ok = float(f"{c:.3g}") == 0.0118
    assert report("1 nominal coefficient (3 s.f.)", ok, f"{c:.6f} -> {c:.3g}, expected 0.0118")


def test_criterion_2_bound_forms_agree(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        cfg = nominal_config(
            beta2=10 ** rng.uniform(-1, 2),
            channel_spacing=10 ** rng.uniform(0, 2.7),
            group_velocity=10 ** rng.uniform(4, 6),
            length_L=10 ** rng.uniform(0, 3),
            n_channels=2 * int(rng.integers(2, 500)),
        )
        P, noise = 10 ** rng.uniform(-6, 0), 10 ** rng.uniform(-9, 0)
        a = capacity_bound_param_form(cfg, P, noise)
        b = capacity_bound_via_entropy(cfg, P, noise)
        worst = max(worst, abs(a - b) / abs(a))
    assert report("2 entropy vs parametric form, 1000 draws", worst <= 1e-12,
                  f"max relative difference {worst:.2e} (tol 1e-12)")


@pytest.mark.parametrize("interval", [0.5, 1.0])
def test_criterion_3_U_is_gaussian_with_linear_variance(report, interval):
    cfg = nominal_config()
    grid = SimGrid(2.56, 256, 64)
    s = validate_U_distribution(cfg, grid, interval / 2, -interval / 2, 10_000, seed=7)
    z = abs(s.sample_mean) / s.mean_stderr
    ok = 0.95 <= s.variance_ratio <= 1.05 and z < 3 and s.gaussianity_pvalue >= 0.01
    assert report(f"3 U statistics, t - t' = {interval} ps, 1e4 trials", ok,
                  f"Var ratio {s.variance_ratio:.4f} (tol [0.95, 1.05]), |mean|/SE {z:.2f} (< 3), "
                  f"normality p {s.gaussianity_pvalue:.3f} (>= 0.01)")


def test_criterion_4_path_integral_equals_split_step(report):
    cfg = nominal_config()
    grid = fresnel_matched_grid(cfg, 64, 8)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(25):
        seed = int(rng.integers(2**32))
        i, j = rng.integers(0, grid.n_time, 2)
        pot = sample_surrogate_potential(grid, 1e-2, seed)
        t, tp = grid.times[i], grid.times[j]
        g = green_discrete(t, tp, pot, cfg).value
        y = propagate_surrogate(delta_signal(grid, tp), pot, cfg).samples[i]
        worst = max(worst, abs(g - y) / abs(y))
    assert report("4 green_discrete vs surrogate on delta, 25 triples", worst <= 1e-6,
                  f"max relative difference {worst:.2e} (tol 1e-6)")


def _pulses(cfg, grid, seed):
    rng = np.random.default_rng(seed)
    out = []
    for k in cfg.channel_indices:
        x = sum(np.exp(-(grid.times - c) ** 2 / 18.0) * np.exp(2j * np.pi * rng.random())
                for c in rng.uniform(-40, 40, 4))
        out.append(SignalGrid(x * math.sqrt(cfg.channel_power / np.mean(np.abs(x) ** 2)), grid, k))
    return out


def test_criterion_5a_gaussian_broadening(report):
    cfg = nominal_config(gamma=0.0, length_L=10.0)
    grid = SimGrid(1024.0, 4096, 16)
    x0 = SignalGrid(np.exp(-grid.times**2 / 200.0) + 0j, grid)
    got = rms_width(propagate_linear(x0, cfg)) / rms_width(x0)
    want = math.sqrt(1 + (cfg.beta2 * cfg.length_L / 100.0) ** 2)
    rel = abs(got / want - 1)
    assert report("5a Gaussian broadening", rel <= 5e-3,
                  f"width factor {got:.6f} vs closed form {want:.6f}, rel {rel:.1e} (tol 5e-3)")


def test_criterion_5b_energy_conservation(report):
    cfg = nominal_config(n_channels=4, length_L=1.0, channel_power=0.2)
    grid = SimGrid(160.0, 512, 32)
    inp = _pulses(cfg, grid, 3)
    out = propagate_coupled(inp, cfg, grid)
    e_in = sum(s.energy for s in inp)
    rel = abs(sum(s.energy for s in out) - e_in) / e_in
    assert report("5b lossless energy conservation", rel <= 1e-8, f"rel change {rel:.1e} (tol 1e-8)")


def test_criterion_5c_xpm_only_phase(report):
    cfg = nominal_config(beta2=0.0, n_channels=4, length_L=7.0, channel_power=5e-3)
    grid = SimGrid(32.0, 64, 8)
    powers = [1e-3, 2e-3, 5e-3, 3e-3, 4e-3]
    inp = [SignalGrid(np.full(64, math.sqrt(p) + 0j), grid, k)
           for k, p in zip(cfg.channel_indices, powers)]
    centre = [s for s in propagate_coupled(inp, cfg, grid, include_spm=False) if s.channel_index == 0][0]
    want = cfg.gamma * 2 * (sum(powers) - 5e-3) * cfg.length_L
    err = float(np.max(np.abs(np.angle(centre.samples) - want)))
    assert report("5c XPM-only constant phase", err <= 1e-8 * max(1.0, want),
                  f"phase {want:.6f} rad, max error {err:.1e} (tol 1e-8)")


def test_criterion_5d_second_order_splitting(report):
    cfg = nominal_config(n_channels=4, length_L=1.0, channel_power=0.2)
    runs = {}
    for m in (32, 64, 128, 2048):
        grid = SimGrid(160.0, 512, m)
        runs[m] = np.array([s.samples for s in propagate_coupled(_pulses(cfg, grid, 1), cfg, grid)])
    err = [np.linalg.norm(runs[m] - runs[2048]) for m in (32, 64, 128)]
    ratios = [err[0] / err[1], err[1] / err[2]]
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    assert report("5d halving dz shrinks error ~4x", ok,
                  f"ratios {ratios[0]:.2f}, {ratios[1]:.2f} (tol [3.5, 4.5])")


def test_criterion_6_channel_statistics(report):
    n = 100_000
    x = np.full(n, 1.0 + 1.0j)
    var_u = 0.5
    y = discrete_channel(x, PhaseNoiseChannelSpec(var_u, 0.01, seed=61))
    mean_rel = abs(np.mean(y) / (x[0] * math.exp(-var_u / 2)) - 1)

    small_u, small_n = 0.01, 1e-6
    y = discrete_channel(x, PhaseNoiseChannelSpec(small_u, small_n, seed=62))
    est = np.var(np.angle(y / x)) - small_n / (2 * abs(x[0]) ** 2)
    var_rel = abs(est / small_u - 1)

    rng = np.random.default_rng(63)
    xs = np.exp(2j * np.pi * rng.random(n))
    noise = discrete_channel(xs, PhaseNoiseChannelSpec(0.0, 0.2, seed=64)) - xs
    awgn_rel = max(abs(np.var(noise.real) / 0.1 - 1), abs(np.var(noise.imag) / 0.1 - 1),
                   abs(np.mean(np.abs(noise) ** 2) / 0.2 - 1))
    ok = mean_rel <= 0.02 and var_rel <= 0.03 and awgn_rel <= 0.02
    assert report("6 channel statistics, 1e5 symbols", ok,
                  f"E[y|x] rel {mean_rel:.1e} (tol 0.02), phase var rel {var_rel:.1e} (tol 0.03), "
                  f"AWGN moments rel {awgn_rel:.1e} (tol 0.02)")


def test_criterion_7_monotonicity(report):
    cfg = nominal_config()
    fails = []
    for field, sign in (("channel_power", -1), ("length_L", -1), ("n_channels", -1),
                        ("beta2", 1), ("channel_spacing", 1), ("group_velocity", 1)):
        base = getattr(cfg, field)
        if field == "n_channels":
            values = list(range(10, 1001, 10))  # 100 / 10 .. 100 * 10
        else:
            values = base * np.geomspace(0.1, 10, 41)
        bounds = [capacity_bound_param_form(cfg.replace(**{field: v}), sigma_N_sq=1e-3) for v in values]
        if not np.all(sign * np.diff(bounds) > 0):
            fails.append(field)
    assert report("7 bound monotone in P, L, N (down) and beta2, dnu, v_g (up)", not fails,
                  "all six sweeps strictly monotone" if not fails else f"not monotone: {fails}")


def _mi_excess(power, snr, constellations, samples=4000):
    """Largest (MI - bound) over the constellations, in standard errors and in nats."""
    cfg = nominal_config(channel_power=power)
    noise = power / snr
    var_u = sigma_U_sq_lumped(sigma_nu_sq(cfg, approx=True), cfg)
    bound = capacity_bound_param_form(cfg, power, noise)
    z_worst, gap_worst = -math.inf, -math.inf
    for j, pts in enumerate(constellations):
        mi, se = mi_monte_carlo(pts, PhaseNoiseChannelSpec(var_u, noise, seed=800 + j), samples)
        gap = mi - bound
        z = gap / se if se > 0 else math.copysign(math.inf, gap)
        if z > z_worst:
            z_worst, se_worst = z, se
        gap_worst = max(gap_worst, gap)
    return z_worst, gap_worst, se_worst, var_u, bound


def test_criterion_8_mi_below_bound(report):
    z_worst, gap_worst = -math.inf, -math.inf
    for power in (1e-4, 1e-3, 1e-2, 3e-2, 0.1, 0.3):
        for snr in (1e3, 1e4):
            rings = [ring_constellation(4, power), ring_constellation(4, power, 4),
                     ring_constellation(8, power)]
            z, gap, _, _, _ = _mi_excess(power, snr, rings)
            z_worst, gap_worst = max(z_worst, z), max(gap_worst, gap)
    ok = z_worst <= 3
    assert report("8 MI <= bound + 3 SE, rings, P in [0.1 mW, 0.3 W], P/sN^2 in {1e3, 1e4}", ok,
                  f"closest approach MI - bound = {gap_worst:.3f} nats")


@pytest.mark.xfail(strict=True, reason="Gaussian phase entropy exceeds ln(2 pi) once sigma_U^2 >> 1; "
                                       "amplitude-only rings then beat the parametric bound")
def test_criterion_8_extended_high_power(report):
    power, snr = 1.0, 1e3
    z, gap, se, var_u, bound = _mi_excess(power, snr, [ring_constellation(4, power)])
    ok = z <= 3
    report("8 (extended) P = 1 W, P/sN^2 = 1e3, 4-ring", ok,
           f"bound {bound:.3f} nats, MI - bound = {gap:.3f} nats with SE {se:.1e}, "
           f"sigma_U^2 = {var_u:.1f}")
    assert ok
