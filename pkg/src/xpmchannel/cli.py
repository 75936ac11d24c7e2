"""Command-line front end.

Subcommands: ``make-inputs``, ``propagate``, ``validate-u`` and ``capacity``.
Every run writes its data files plus ``manifest.json`` into ``--out``.  Data
files embed the manifest without its timestamp, so repeated runs with the same
arguments produce byte-identical data.  Failures print one JSON error record
on stderr and exit with status 1 (2 for usage errors).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import bound_coefficient, capacity_sweep
from .config import ConfigError, SimGrid, is_nominal, load_config, validate
from .pathint import validate_U_distribution
from .propagator import check_guard_band, propagate_coupled, propagate_surrogate, physical_envelope
from .reports import write_table
from .signals import SignalGrid, load_signals, save_bundle, write_signal_text
from .xpm_stats import sample_surrogate_potential, save_potential, sigma_nu_sq

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

ENERGY_RTOL = 1e-8


class CommandError(RuntimeError):
    def __init__(self, kind: str, message: str, **details):
        self.kind = kind
        self.details = details
        super().__init__(message)


@dataclass
class ExperimentManifest:
    command: str
    config_path: str
    config_sha256: str
    seed: int
    out_dir: str
    tool_version: str
    timestamp: str
    arguments: dict

    def embedded(self) -> dict:
        """Manifest fields that are stable across replays (no timestamp or output path)."""
        rec = asdict(self)
        rec.pop("timestamp")
        rec.pop("out_dir")
        rec["arguments"] = {k: v for k, v in rec["arguments"].items() if k != "out"}
        return rec


def _manifest(args, command: str) -> ExperimentManifest:
    cfg_path = Path(args.config)
    digest = hashlib.sha256(cfg_path.read_bytes()).hexdigest()
    arguments = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return ExperimentManifest(
        command=command,
        config_path=str(args.config),
        config_sha256=digest,
        seed=int(args.seed),
        out_dir=str(args.out),
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        arguments=arguments,
    )


def _write_manifest(out: Path, manifest: ExperimentManifest, extra: dict | None = None) -> None:
    rec = asdict(manifest) | (extra or {})
    (out / "manifest.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")


def _load(path):
    try:
        config, grid = load_config(path)
    except FileNotFoundError:
        raise CommandError("io", f"config file not found: {path}") from None
    validate(config, grid)
    return config, grid


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- make-inputs -------------------------------------------------------------

def cmd_make_inputs(args) -> int:
    """Random QPSK Gaussian-pulse trains for every channel, at the power limit."""
    config, grid = _load(args.config)
    if grid is None:
        period = 1000.0 / config.channel_spacing
        grid = SimGrid(64 * period, 1024, 64)
    rng = np.random.default_rng(args.seed)
    period = 1000.0 / config.channel_spacing
    n_sym = max(1, int(grid.t_window // period))
    centres = (np.arange(n_sym) - n_sym // 2) * period
    t = grid.times
    width = period / 4
    signals = []
    for k in config.channel_indices:
        symbols = np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, n_sym)))
        # periodic distance to each pulse centre
        d = (t[:, None] - centres[None, :] + grid.t_window / 2) % grid.t_window - grid.t_window / 2
        x = (np.exp(-d**2 / (2 * width**2)) * symbols[None, :]).sum(axis=1)
        x *= math.sqrt(args.power_fraction * config.channel_power / np.mean(np.abs(x) ** 2))
        signals.append(SignalGrid(x, grid, k))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_bundle(out, signals, {"seed": int(args.seed), "generator": "qpsk-gaussian"})
    print(f"wrote {len(signals)} channels to {out}")
    return 0


# -- propagate ---------------------------------------------------------------

def cmd_propagate(args) -> int:
    config, cfg_grid = _load(args.config)
    try:
        inputs = load_signals(args.inputs)
    except FileNotFoundError:
        raise CommandError("io", f"inputs file not found: {args.inputs}") from None
    grid = inputs[0].grid
    if cfg_grid is not None:
        if not cfg_grid.same_lattice(grid):
            raise CommandError("grid_mismatch", "config grid and input grid differ")
        grid = cfg_grid
    validate(config, grid)
    inputs = [SignalGrid(s.samples, grid, s.channel_index) for s in inputs]
    check_guard_band(inputs, config)

    out = _out_dir(args.out)
    manifest = _manifest(args, "propagate")
    meta = manifest.embedded()

    if args.mode == "coupled":
        outputs = propagate_coupled(inputs, config, grid, include_spm=not args.no_spm)
        used = sorted(inputs, key=lambda s: s.channel_index)
    else:
        central = [s for s in inputs if s.channel_index == 0]
        if not central:
            raise CommandError("validation", "surrogate mode needs the central channel (k=0)")
        var = sigma_nu_sq(config) if args.sigma_nu_sq is None else args.sigma_nu_sq
        potential = sample_surrogate_potential(grid, var, args.seed)
        save_potential(out / "potential.bin", potential)
        outputs = [propagate_surrogate(central[0], potential, config)]
        used = central

    save_bundle(out / "outputs.bin", outputs, meta)
    centre = [s for s in outputs if s.channel_index == 0][0]
    write_signal_text(out / "channel_0.txt", centre, {"manifest": meta})

    rows = []
    e_in_total = e_out_total = 0.0
    for s_in, s_out in zip(used, outputs):
        e_in, e_out = s_in.energy, s_out.energy
        e_in_total += e_in
        e_out_total += e_out
        e_phys = physical_envelope(s_out, config).energy
        rel = abs(e_out - e_in) / e_in if e_in > 0 else abs(e_out)
        rows.append((s_in.channel_index, e_in, e_out, e_phys, rel))
    total_rel = abs(e_out_total - e_in_total) / e_in_total if e_in_total > 0 else abs(e_out_total)
    passed = total_rel <= ENERGY_RTOL
    write_table(out / "energy_audit.txt",
                ("channel", "input_energy", "output_energy", "physical_output_energy", "rel_change"),
                rows, {"manifest": meta, "total_rel_change": total_rel, "passed": passed,
                       "loss_factor": math.exp(-config.alpha * config.length_L)})
    _write_manifest(out, manifest, {"energy_total_rel_change": total_rel})
    print(f"{args.mode}: {len(outputs)} channel(s) propagated, energy change {total_rel:.3e}")
    if not passed:
        raise CommandError("validation", "envelope energy not conserved", total_rel_change=total_rel)
    return 0


# -- validate-u --------------------------------------------------------------

def _u_grid(interval: float, cfg_grid: SimGrid | None) -> SimGrid:
    if cfg_grid is not None:
        return cfg_grid
    return SimGrid(2.56 * interval, 256, 64)


def cmd_validate_u(args) -> int:
    if args.trials < 100:
        raise CommandError("usage", f"--trials must be >= 100 (got {args.trials})", exit_code=2)
    if not args.t_interval > 0:
        raise CommandError("usage", "--t-interval must be > 0", exit_code=2)
    config, cfg_grid = _load(args.config)
    grid = _u_grid(args.t_interval, cfg_grid)
    half = int(round(args.t_interval / 2 / grid.dt))
    if half < 1 or 2 * half >= grid.n_time:
        raise CommandError("validation", "t-interval does not fit the time grid")
    t_prime, t = grid.times[grid.n_time // 2 - half], grid.times[grid.n_time // 2 + half]
    stats_ = validate_U_distribution(config, grid, t, t_prime, args.trials, args.seed,
                                     sigma_nu_sq=args.sigma_nu_sq, z_correlation=args.z_correlation)
    out = _out_dir(args.out)
    manifest = _manifest(args, "validate-u")
    rec = stats_.as_record()
    passed = stats_.passes()
    columns = ("mean_re", "mean_im", "sample_variance", "target_variance", "variance_ratio",
               "mean_stderr", "gaussianity_pvalue", "n_trials", "seed")
    write_table(out / "u_statistics.txt", columns, [tuple(rec[c] for c in columns)],
                {"manifest": manifest.embedded(), "t": float(t), "t_prime": float(t_prime),
                 "z_correlation": stats_.z_correlation, "passed": passed,
                 "variance_tolerance": 0.05, "normality_level": 0.01})
    _write_manifest(out, manifest, {"passed": passed})
    print(f"variance ratio {stats_.variance_ratio:.4f} (target {stats_.target_variance:.6g}), "
          f"|mean|/stderr {abs(stats_.sample_mean) / stats_.mean_stderr if stats_.mean_stderr else 0:.2f}, "
          f"normality p = {stats_.gaussianity_pvalue:.3g}: {'PASS' if passed else 'FAIL'}")
    if not passed:
        raise CommandError("validation", "U statistics outside tolerance",
                           variance_ratio=stats_.variance_ratio,
                           gaussianity_pvalue=stats_.gaussianity_pvalue)
    return 0


# -- capacity ----------------------------------------------------------------

def parse_sweep(spec: str | None, config):
    """``NAME=v1,v2,...`` or a TOML file with ``variable`` and ``values``."""
    if spec is None:
        return "channel_power", [config.channel_power]
    path = Path(spec)
    if "=" not in spec and path.exists():
        data = tomllib.loads(path.read_text())
        try:
            return str(data["variable"]), [float(v) for v in data["values"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise CommandError("usage", f"bad sweep file {spec}: {exc}", exit_code=2) from None
    name, sep, values = spec.partition("=")
    if not sep:
        raise CommandError("usage", f"sweep spec must look like NAME=v1,v2 (got {spec!r})", exit_code=2)
    try:
        return name.strip(), [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise CommandError("usage", f"non-numeric sweep value in {spec!r}", exit_code=2) from None


def cmd_capacity(args) -> int:
    config, _ = _load(args.config)
    variable, values = parse_sweep(args.sweep, config)
    sigma_N_sq = args.sigma_n**2
    report = capacity_sweep(config, variable, values, sigma_N_sq, exact_harmonic=args.exact_harmonic,
                            with_mi=args.with_mi, seed=args.seed, mi_samples=args.mi_samples)
    out = _out_dir(args.out)
    manifest = _manifest(args, "capacity")
    report.write(out / "capacity_report.txt", {"manifest": manifest.embedded(), "units_printed": args.units})
    _write_manifest(out, manifest)
    if is_nominal(config):
        print(f"nominal coefficient: {bound_coefficient(config):.3g}")
    col = "bound_nats" if args.units == "nats" else "bound_bits"
    print(f"{report.sweep_variable:>16} {col:>22} {'mi_estimate':>14} {'mi_stderr':>12}")
    for row in report.rows:
        bound = row.bound_nats if args.units == "nats" else row.bound_bits
        scale = 1.0 if args.units == "nats" else 1 / math.log(2)
        print(f"{row.sweep_value:>16.6g} {bound:>22.12g} {row.mi_estimate * scale:>14.6g} "
              f"{row.mi_stderr * scale:>12.3g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xpmchannel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", required=True, help="flat TOML config file")
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--out", required=out_required, help="output directory")

    p = sub.add_parser("make-inputs", help="generate random input signals for every channel")
    common(p)
    p.add_argument("--power-fraction", type=float, default=1.0,
                   help="mean power as a fraction of channel_power")
    p.set_defaults(func=cmd_make_inputs)

    p = sub.add_parser("propagate", help="propagate signals through the link")
    common(p)
    p.add_argument("--inputs", required=True, help="signal bundle (.bin) or single-channel text file")
    p.add_argument("--mode", choices=("coupled", "surrogate"), default="coupled")
    p.add_argument("--sigma-nu-sq", type=float, default=None,
                   help="override the surrogate potential variance")
    p.add_argument("--no-spm", action="store_true", help="drop self-phase modulation (coupled mode)")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("validate-u", help="Monte Carlo check of the phase process U")
    common(p)
    p.add_argument("--t-interval", type=float, required=True, help="t - t' in ps")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--sigma-nu-sq", type=float, default=None,
                   help="override the potential variance derived from the config")
    p.add_argument("--z-correlation", choices=("frozen", "white"), default="frozen")
    p.set_defaults(func=cmd_validate_u)

    p = sub.add_parser("capacity", help="evaluate the high-SNR capacity bound")
    common(p)
    p.add_argument("--sweep", default=None, help="NAME=v1,v2,... or a TOML sweep file")
    p.add_argument("--sigma-n", type=float, default=1.0,
                   help="additive noise standard deviation per symbol (sqrt(W))")
    p.add_argument("--with-mi", action="store_true", help="add Monte Carlo MI for a 4-ring input")
    p.add_argument("--mi-samples", type=int, default=2000)
    p.add_argument("--units", choices=("nats", "bits"), default="nats")
    p.add_argument("--exact-harmonic", action="store_true",
                   help="use H_{N/2} instead of ln(N/2)")
    p.set_defaults(func=cmd_capacity)
    return parser


def _error(kind: str, message: str, **details) -> None:
    rec = {"status": "error", "kind": kind, "message": message}
    rec.update({k: (v if not isinstance(v, float) or math.isfinite(v) else str(v))
                for k, v in details.items()})
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        code = exc.details.pop("exit_code", 1)
        _error(exc.kind, str(exc), **exc.details)
        return code
    except (ValueError, OSError) as exc:
        details = {"fields": exc.errors} if isinstance(exc, ConfigError) else {}
        _error(type(exc).__name__, str(exc), **details)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
