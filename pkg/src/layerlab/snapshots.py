"""Plain-text snapshot files for fields and reports.

Field format: header lines ``# key=value`` carrying at least L, eps, nx,
ny and quantity, then one ``x y value`` triple per line in row-major
(x-outer) order.  Reports are bare ``key=value`` lines.
"""

from __future__ import annotations

import numpy as np

from .grid import ChannelGrid, GridError, ScalarField


def write_field(path, field, extra=None):
    g = field.grid
    header = {"L": g.L, "eps": g.eps, "nx": g.nx, "ny": g.ny,
              "quantity": field.label or "field"}
    if extra:
        header.update(extra)
    with open(path, "w") as fh:
        for k, v in header.items():
            if isinstance(v, float):
                fh.write(f"# {k}={v:.17g}\n")
            else:
                fh.write(f"# {k}={v}\n")
        for i, xv in enumerate(g.x):
            for j, yv in enumerate(g.y):
                fh.write(f"{xv:.17g} {yv:.17g} {field.values[i, j]:.17g}\n")


def read_field(path):
    header = {}
    xs, ys, vs = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                header[k.strip()] = v.strip()
                continue
            a, b, c = line.split()
            xs.append(float(a))
            ys.append(float(b))
            vs.append(float(c))
    try:
        nx, ny = int(header["nx"]), int(header["ny"])
        L, eps = float(header["L"]), float(header["eps"])
    except KeyError as e:
        raise GridError(f"snapshot missing header key {e}") from e
    if len(vs) != nx * ny:
        raise GridError(f"snapshot has {len(vs)} samples, expected {nx * ny}")
    x = np.array(xs).reshape(nx, ny)[:, 0]
    y = np.array(ys).reshape(nx, ny)[0, :]
    grid = ChannelGrid(L, eps, x, y)
    field = ScalarField(grid, np.array(vs).reshape(nx, ny),
                        label=header.get("quantity", ""))
    return field, header


def write_report(path, items):
    """Write key=value lines; ``items`` is a dict or an iterable of lines."""
    with open(path, "w") as fh:
        if isinstance(items, dict):
            for k in items:
                v = items[k]
                if isinstance(v, float):
                    fh.write(f"{k}={v:.17g}\n")
                else:
                    fh.write(f"{k}={v}\n")
        else:
            for line in items:
                fh.write(line.rstrip("\n") + "\n")


def read_report(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out
