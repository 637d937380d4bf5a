"""File outputs: design tables, grayscale images, VTK meshes and histories.

Every writer produces byte-identical files for identical inputs; floating
point values are written with ``repr`` so that CSV round trips are lossless.
"""

import csv
from pathlib import Path

import numpy as np

__all__ = [
    "write_design_csv",
    "read_design_csv",
    "write_pgm",
    "read_pgm",
    "density_image",
    "write_vtk",
    "write_history_csv",
    "write_rows_csv",
    "write_eigenmodes",
    "export_design",
]


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_rows_csv(path, columns, rows):
    """Write dict rows with a fixed column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) if not isinstance(row[c], str) else row[c] for c in columns])
    return path


def write_history_csv(path, history):
    from .optimize import HISTORY_COLUMNS

    return write_rows_csv(path, HISTORY_COLUMNS, history)


def write_design_csv(path, x, rho_hat, rho_bar):
    """Element table ``element, x, rho_hat, rho_bar``."""
    rows = [{"element": e, "x": x[e], "rho_hat": rho_hat[e], "rho_bar": rho_bar[e]}
            for e in range(len(x))]
    return write_rows_csv(path, ["element", "x", "rho_hat", "rho_bar"], rows)


def read_design_csv(path):
    """Design vector ``x`` from a design CSV."""
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    x = np.empty(len(rows))
    for r in rows:
        x[int(r["element"])] = float(r["x"])
    return x


def density_image(mesh, values):
    """8-bit image of element values in [0, 1], top row first."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0).reshape(mesh.ny, mesh.nx)
    return np.rint(255.0 * v[::-1]).astype(np.uint8)


def write_pgm(path, image):
    """Binary (P5) 8-bit PGM."""
    image = np.asarray(image, dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = image.shape
    with path.open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image).tobytes())
    return path


def read_pgm(path):
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def write_vtk(path, mesh, cell_data):
    """Legacy ASCII VTK unstructured grid with quad cells and cell data."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, nn = mesh.n_ele, mesh.coords.shape[0]
    lines = ["# vtk DataFile Version 3.0", "rto2d design", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nn} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0.0" for x, y in mesh.coords]
    lines.append(f"CELLS {n} {5 * n}")
    lines += ["4 " + " ".join(str(int(i)) for i in c) for c in mesh.conn]
    lines.append(f"CELL_TYPES {n}")
    lines += ["9"] * n
    lines.append(f"CELL_DATA {n}")
    for name, vals in cell_data.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_fmt(v) for v in vals]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_eigenmodes(directory, mesh, kl, prefix):
    """KL modes as one CSV (column per mode) and one PGM per mode.

    Each image is scaled so that the mode's largest magnitude maps to 0 or
    255 and zero maps to mid-gray.
    """
    directory = Path(directory)
    cols = ["element"] + [f"mode_{k + 1}" for k in range(kl.m)]
    rows = [{"element": e, **{f"mode_{k + 1}": kl.modes[e, k] for k in range(kl.m)}}
            for e in range(mesh.n_ele)]
    write_rows_csv(directory / f"{prefix}_modes.csv", cols, rows)
    for k in range(kl.m):
        v = kl.modes[:, k]
        s = np.max(np.abs(v)) or 1.0
        write_pgm(directory / f"{prefix}_mode_{k + 1}.pgm", density_image(mesh, 0.5 + 0.5 * v / s))


def export_design(directory, mesh, x, rho_hat, rho_bar, stem="design"):
    """Design CSV, PGM of ``rho_bar`` and a VTK file."""
    directory = Path(directory)
    write_design_csv(directory / f"{stem}.csv", x, rho_hat, rho_bar)
    write_pgm(directory / f"{stem}.pgm", density_image(mesh, rho_bar))
    write_vtk(directory / "mesh.vtk" if stem == "design" else directory / f"{stem}.vtk", mesh,
              {"x": x, "rho_hat": rho_hat, "rho_bar": rho_bar})
