import math

import pytest
from hypothesis import given, settings, strategies as st

from xpmchannel.config import (
    UNITS,
    ConfigError,
    LinkConfig,
    SimGrid,
    config_to_text,
    dump_config,
    is_nominal,
    load_config,
    validate,
)
from xpmchannel.config import parse_config


def test_nominal_values(nominal):
    assert (nominal.beta2, nominal.gamma, nominal.channel_spacing) == (20.0, 1.2, 50.0)
    assert (nominal.group_velocity, nominal.length_L, nominal.n_channels) == (2e5, 50.0, 100)
    assert is_nominal(nominal)
    assert not is_nominal(nominal.replace(length_L=40.0))


def test_unit_products():
    # 20 ps^2/km * (50 GHz)^2 = 5e4 ps^2 GHz^2/km = 0.05 /km
    assert UNITS.dispersion_spacing_product(20.0, 50.0) == pytest.approx(0.05, rel=1e-15)
    assert UNITS.angular_frequency(50.0) == pytest.approx(2 * math.pi * 0.05)
    assert UNITS.to_canonical(1.0, "ns") == pytest.approx(1e3)
    assert UNITS.from_canonical(1e3, "m") == pytest.approx(1e6)
    assert UNITS.to_canonical(3.0, "mW") == pytest.approx(3e-3)


def test_walkoff_slope_is_derived_and_tracks_replace(nominal):
    assert nominal.beta1_slope == pytest.approx(20.0 * 2 * math.pi * 50.0 * 1e-3)
    c = nominal.replace(beta2=10.0)
    assert c.beta1_slope == pytest.approx(nominal.beta1_slope / 2)
    explicit = nominal.replace(beta1_slope=1.5)
    assert explicit.beta1_slope == 1.5


def test_channel_indices(small_link):
    assert list(small_link.channel_indices) == [-2, -1, 0, 1, 2]


def test_validate_collects_every_error():
    bad = LinkConfig(beta2=-1.0, gamma=-0.1, alpha=0.0, length_L=0.0, group_velocity=2e5,
                     n_channels=7, channel_spacing=50.0, channel_power=1e-3)
    with pytest.raises(ConfigError) as exc:
        validate(bad, SimGrid(10.0, 100, 8))
    assert set(exc.value.errors) == {"beta2", "gamma", "length_L", "n_channels", "n_time"}


def test_validate_rejects_inexact_step(nominal):
    with pytest.raises(ConfigError) as exc:
        validate(nominal, SimGrid(10.0, 64, 11))
    assert "n_zsteps" in exc.value.errors
    validate(nominal, SimGrid(10.0, 64, 64))


def test_grid_lattice():
    g = SimGrid(8.0, 16, 4)
    assert g.dt == 0.5
    assert g.times[8] == 0.0 and g.times[0] == -4.0
    assert g.index_of(1.5) == 11
    with pytest.raises(ValueError):
        g.index_of(1.25)
    assert g.dz(2.0) == 0.5


def test_roundtrip_file(tmp_path, nominal):
    grid = SimGrid(12.8, 128, 16)
    dump_config(tmp_path / "c.toml", nominal, grid)
    c2, g2 = load_config(tmp_path / "c.toml")
    assert c2 == nominal and g2 == grid


def test_unknown_key_is_an_error(nominal):
    text = config_to_text(nominal) + "colour = 3\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert "colour" in exc.value.errors


positive = st.floats(1e-3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(beta2=positive, gamma=st.floats(0, 10), alpha=st.floats(0, 1), L=positive,
       vg=positive, half_n=st.integers(1, 200), dnu=positive, P=positive)
def test_text_roundtrip_is_exact(beta2, gamma, alpha, L, vg, half_n, dnu, P):
    c = LinkConfig(beta2, gamma, alpha, L, vg, 2 * half_n, dnu, P)
    c2, g2 = parse_config(config_to_text(c))
    assert c2 == c and g2 is None
