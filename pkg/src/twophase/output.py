"""CSV tables and legacy ASCII VTK files."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import TriMesh

CSV_COLUMNS = (
    "level",
    "num_nodes",
    "J_primal",
    "I_dual",
    "gap",
    "majorant_total",
    "m1",
    "m2",
    "m3",
    "beta",
    "energy_lower",
)

VTK_TRIANGLE = 5


def _sci(x) -> str:
    return f"{float(x):.5e}"


def write_csv(records, path) -> Path:
    """One row per record; integers as is, everything else with 6 significant digits.

    ``records`` are mappings or objects carrying the ``CSV_COLUMNS`` names.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            get = rec.get if isinstance(rec, dict) else lambda k: getattr(rec, k)
            row = [str(int(get("level"))), str(int(get("num_nodes")))]
            row += [_sci(get(k)) for k in CSV_COLUMNS[2:]]
            w.writerow(row)
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {k: float(v) for k, v in r.items()}
        d["level"] = int(d["level"])
        d["num_nodes"] = int(d["num_nodes"])
        out.append(d)
    return out


def _scalars(fh, name, values):
    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
    for x in np.asarray(values, dtype=float):
        fh.write(f"{x:.17g}\n")


def write_vtk(mesh: TriMesh, path, point_data=None, cell_data=None, title="twophase") -> Path:
    """Write an unstructured triangle grid in the legacy ASCII format (version 3.0)."""
    point_data = dict(point_data or {})
    cell_data = dict(cell_data or {})
    for name, vals in point_data.items():
        if np.shape(vals) != (mesh.num_nodes,):
            raise ValueError(f"point field {name!r} has shape {np.shape(vals)}")
    for name, vals in cell_data.items():
        if np.shape(vals) != (mesh.num_triangles,):
            raise ValueError(f"cell field {name!r} has shape {np.shape(vals)}")
    path = Path(path)
    n, nt = mesh.num_nodes, mesh.num_triangles
    with path.open("w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write(f"{VTK_TRIANGLE}\n" * nt)
        if point_data:
            fh.write(f"POINT_DATA {n}\n")
            for name, vals in point_data.items():
                _scalars(fh, name, vals)
        if cell_data:
            fh.write(f"CELL_DATA {nt}\n")
            for name, vals in cell_data.items():
                _scalars(fh, name, vals)
    return path


def read_vtk(path) -> dict:
    """Parse files produced by ``write_vtk``.

    Returns a dict with ``points`` (n, 3), ``cells`` (nt, 3), ``cell_types``,
    ``point_data`` and ``cell_data``.
    """
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile Version 3.0"):
        raise ValueError("not a legacy VTK 3.0 file")
    if tokens[2].strip() != "ASCII":
        raise ValueError("only ASCII files are supported")
    words = " ".join(tokens[3:]).split()
    pos = 0

    def take(k):
        nonlocal pos
        out = words[pos : pos + k]
        pos += k
        return out

    out = {"point_data": {}, "cell_data": {}}
    target = None
    while pos < len(words):
        key = take(1)[0]
        if key == "DATASET":
            take(1)
        elif key == "POINTS":
            n, _ = take(2)
            out["points"] = np.array(take(3 * int(n)), dtype=float).reshape(-1, 3)
        elif key == "CELLS":
            nt, size = take(2)
            raw = np.array(take(int(size)), dtype=np.int64).reshape(int(nt), -1)
            if np.any(raw[:, 0] != 3):
                raise ValueError("only triangles are supported")
            out["cells"] = raw[:, 1:]
        elif key == "CELL_TYPES":
            nt = int(take(1)[0])
            out["cell_types"] = np.array(take(nt), dtype=np.int64)
        elif key == "POINT_DATA":
            count = int(take(1)[0])
            target = out["point_data"]
        elif key == "CELL_DATA":
            count = int(take(1)[0])
            target = out["cell_data"]
        elif key == "SCALARS":
            name = take(3)[0]
            if take(2) != ["LOOKUP_TABLE", "default"]:
                raise ValueError("expected a default lookup table")
            target[name] = np.array(take(count), dtype=float)
        else:
            raise ValueError(f"unexpected keyword {key!r}")
    return out
