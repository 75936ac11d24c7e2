"""Sampled channel envelopes and their on-disk formats.

Two formats are supported for :class:`SignalGrid`:

* columnar text, one channel per file: ``# key = value`` header lines followed
  by ``t Re Im`` rows;
* a binary dump: a magic line, one JSON header line and the raw little-endian
  array bytes.  Several channels can share one binary file (a bundle).

Both writers are byte-deterministic for identical inputs.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SimGrid

__all__ = [
    "SignalGrid",
    "GridMismatchError",
    "check_same_grid",
    "write_signal_text",
    "read_signal_text",
    "write_binary",
    "read_binary",
    "save_bundle",
    "load_bundle",
    "load_signals",
]

MAGIC = b"XPMCHANNEL-BIN 1\n"


class GridMismatchError(ValueError):
    pass


@dataclass
class SignalGrid:
    """Complex envelope of one WDM channel on a time lattice (units sqrt(W))."""

    samples: np.ndarray
    grid: SimGrid
    channel_index: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.shape != (self.grid.n_time,):
            raise ValueError(
                f"samples has shape {self.samples.shape}, expected ({self.grid.n_time},)"
            )

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    def with_samples(self, samples) -> "SignalGrid":
        return SignalGrid(samples, self.grid, self.channel_index)


def check_same_grid(signals, grid: SimGrid | None = None) -> SimGrid:
    """Return the common lattice of ``signals`` or raise :class:`GridMismatchError`."""
    ref = grid if grid is not None else signals[0].grid
    for s in signals:
        if not s.grid.same_lattice(ref):
            raise GridMismatchError(
                f"channel {s.channel_index} lives on a different time grid "
                f"({s.grid.n_time} samples over {s.grid.t_window} ps, expected "
                f"{ref.n_time} over {ref.t_window})"
            )
    return ref


def _grid_header(grid: SimGrid) -> dict:
    return {"t_window": grid.t_window, "n_time": grid.n_time, "n_zsteps": grid.n_zsteps}


def write_signal_text(path, signal: SignalGrid, meta: dict | None = None) -> None:
    lines = [f"# {k} = {json.dumps(v)}" for k, v in (meta or {}).items()]
    header = _grid_header(signal.grid) | {"channel_index": signal.channel_index}
    lines += [f"# {k} = {json.dumps(v)}" for k, v in header.items()]
    lines.append("# t Re Im")
    buf = io.StringIO()
    buf.write("\n".join(lines) + "\n")
    data = np.column_stack([signal.times, signal.samples.real, signal.samples.imag])
    np.savetxt(buf, data, fmt="%.17g")
    Path(path).write_text(buf.getvalue())


def read_signal_text(path) -> SignalGrid:
    header = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                header[key.strip()] = json.loads(value)
        elif line.strip():
            rows.append([float(v) for v in line.split()])
    try:
        grid = SimGrid(float(header["t_window"]), int(header["n_time"]), int(header["n_zsteps"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing grid header key {exc}") from None
    data = np.asarray(rows, dtype=float).reshape(-1, 3)
    return SignalGrid(data[:, 1] + 1j * data[:, 2], grid, int(header.get("channel_index", 0)))


def write_binary(path, array: np.ndarray, header: dict) -> None:
    """Write ``array`` with a JSON ``header``; dtype and shape are recorded."""
    array = np.ascontiguousarray(array)
    dtype = array.dtype.newbyteorder("<")
    full = dict(header) | {"dtype": dtype.str, "shape": list(array.shape)}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(full, sort_keys=True).encode() + b"\n")
        fh.write(array.astype(dtype, copy=False).tobytes())


def read_binary(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ValueError(f"{path}: not an xpmchannel binary file")
        header = json.loads(fh.readline())
        raw = fh.read()
    array = np.frombuffer(raw, dtype=np.dtype(header.pop("dtype")))
    return array.reshape(header.pop("shape")).copy(), header


def save_bundle(path, signals, meta: dict | None = None) -> None:
    grid = check_same_grid(signals)
    header = {"kind": "signal_bundle", "grid": _grid_header(grid),
              "channel_indices": [int(s.channel_index) for s in signals]}
    if meta:
        header["meta"] = meta
    write_binary(path, np.stack([s.samples for s in signals]), header)


def load_bundle(path) -> list[SignalGrid]:
    data, header = read_binary(path)
    if header.get("kind") != "signal_bundle":
        raise ValueError(f"{path}: not a signal bundle")
    g = header["grid"]
    grid = SimGrid(float(g["t_window"]), int(g["n_time"]), int(g["n_zsteps"]))
    return [SignalGrid(row, grid, k) for row, k in zip(data, header["channel_indices"])]


def load_signals(path) -> list[SignalGrid]:
    """Load a binary bundle or a single-channel text file."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        return load_bundle(path)
    return [read_signal_text(path)]
