"""Legacy-VTK snapshots of DG fields.

Every element is written with its own copies of its sub-triangle vertices,
so discontinuities across faces survive in the file.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import PolyFKError


def snapshot_geometry(space):
    """Per-element vertex copies and triangles.

    Returns ``points (N, 2)``, ``owner (N,)`` and ``triangles (T, 3)``.
    """
    st = space.mesh.sub_triangulation
    pts, owner, tris = [], [], []
    base = 0
    for e, T in enumerate(st.triangles):
        flat = T.reshape(-1, 2)
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        pts.append(uniq)
        owner.append(np.full(len(uniq), e))
        tris.append(inv.reshape(-1, 3) + base)
        base += len(uniq)
    return np.concatenate(pts), np.concatenate(owner), np.concatenate(tris)


def write_snapshot(space, C, t, path):
    """Write ``c_h`` as an ASCII legacy unstructured grid with point data ``c``."""
    path = Path(path)
    pts, owner, tris = snapshot_geometry(space)
    vals = space.point_values(C, pts, elements=owner)
    lines = [
        "# vtk DataFile Version 3.0",
        f"polyfk c_h t={float(t)!r}",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        "FIELD FieldData 1",
        "TIME 1 1 double",
        repr(float(t)),
        f"POINTS {len(pts)} double",
    ]
    lines += [f"{x!r} {y!r} 0.0" for x, y in pts.tolist()]
    lines.append(f"CELLS {len(tris)} {4 * len(tris)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris.tolist()]
    lines.append(f"CELL_TYPES {len(tris)}")
    lines += ["5"] * len(tris)
    lines.append(f"CELL_DATA {len(tris)}")
    lines += ["SCALARS element_id int 1", "LOOKUP_TABLE default"]
    lines += [str(int(owner[a])) for a in tris[:, 0]]
    lines.append(f"POINT_DATA {len(pts)}")
    lines += ["SCALARS c double 1", "LOOKUP_TABLE default"]
    lines += [repr(v) for v in vals.tolist()]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise PolyFKError(f"{path}: cannot write snapshot ({exc.strerror})") from None
    return path


def read_snapshot(path):
    """Parse a file written by :func:`write_snapshot`.

    Returns a dict with ``t``, ``points``, ``triangles``, ``element_id`` and ``c``.
    """
    tok = Path(path).read_text().split("\n")
    out = {}
    i = 0
    while i < len(tok):
        line = tok[i].strip()
        if line.startswith("TIME"):
            out["t"] = float(tok[i + 1])
            i += 2
            continue
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            out["points"] = np.array([[float(v) for v in tok[i + 1 + k].split()[:2]] for k in range(n)])
            i += n + 1
            continue
        if line.startswith("CELLS"):
            n = int(line.split()[1])
            out["triangles"] = np.array([[int(v) for v in tok[i + 1 + k].split()[1:]] for k in range(n)])
            i += n + 1
            continue
        if line.startswith("SCALARS"):
            name = line.split()[1]
            count = len(out["triangles"]) if name == "element_id" else len(out["points"])
            out[name] = np.array([float(v) for v in tok[i + 2 : i + 2 + count]])
            i += count + 2
            continue
        i += 1
    return out
