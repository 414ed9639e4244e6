"""Plain-text nodal field files.

The first line describes the grid::

    grid dim=1 extent=1.0 nodes=17 boundary=neumann

and every following line holds one nodal value (C order) written with
``repr`` so that reading back reproduces the field bit for bit. Multi-axis
extents and node counts are comma separated.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import GridSpec, ScalarField


def format_grid(grid) -> str:
    extent = ",".join(repr(e) for e in grid.extent)
    nodes = ",".join(str(n) for n in grid.nodes)
    return f"grid dim={grid.dim} extent={extent} nodes={nodes} boundary={grid.boundary}"


def parse_grid(line) -> GridSpec:
    parts = line.split()
    if not parts or parts[0] != "grid":
        raise ConfigError(f"field file must start with a 'grid' header, got {line!r}")
    try:
        kv = dict(item.split("=", 1) for item in parts[1:])
        return GridSpec(
            int(kv["dim"]),
            tuple(float(e) for e in kv["extent"].split(",")),
            tuple(int(n) for n in kv["nodes"].split(",")),
            kv["boundary"],
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed grid header {line!r}: {exc}") from exc


def dumps_field(field) -> str:
    return format_grid(field.grid) + "\n" + "".join(repr(float(v)) + "\n" for v in field.values)


def loads_field(text) -> ScalarField:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("empty field file")
    grid = parse_grid(lines[0])
    try:
        values = np.array([float(ln) for ln in lines[1:]])
        return ScalarField(grid, values)
    except ValueError as exc:
        raise ConfigError(f"bad field values: {exc}") from exc


def write_field(path, field):
    Path(path).write_text(dumps_field(field))


def read_field(path) -> ScalarField:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read field file {path}: {exc}") from exc
    return loads_field(text)
