"""Plain-text artifacts: meshes, sparse matrices, trajectories, CSV tables, manifests."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .geometry import Shape
from .mesh import Mesh, mesh_from_arrays

_FMT = "{:.17g}"


class NonFiniteOutput(ArithmeticError):
    """A NaN or Inf was about to be written to an output table."""


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not np.isfinite(x):
            raise NonFiniteOutput(f"non-finite value {x!r}")
        return _FMT.format(float(x))
    return str(x)


# -- mesh -----------------------------------------------------------------------

def mesh_to_text(mesh: Mesh, masks=None) -> str:
    """``vertices N / triangles M`` header, then ``x y flag`` and ``i j k bitmask`` lines."""
    masks = np.zeros(mesh.n_elements, dtype=np.int64) if masks is None else np.asarray(masks)
    out = [f"vertices {mesh.n_nodes} / triangles {mesh.n_elements}"]
    for (x, y), b in zip(mesh.vertices, mesh.boundary):
        out.append(f"{_FMT.format(x)} {_FMT.format(y)} {int(b)}")
    for (i, j, k), m in zip(mesh.triangles, masks):
        out.append(f"{i} {j} {k} {int(m)}")
    return "\n".join(out) + "\n"


def mesh_from_text(text: str, domain: Shape | None = None):
    """Inverse of :func:`mesh_to_text`; returns ``(mesh, bitmasks)``.

    Boundary flags are recomputed from the triangulation and must agree with
    the stored ones.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 5 or head[0] != "vertices" or head[2] != "/" or head[3] != "triangles":
        raise ValueError(f"bad mesh header {lines[0]!r}")
    n, m = int(head[1]), int(head[4])
    if len(lines) != 1 + n + m:
        raise ValueError(f"expected {n} vertex and {m} triangle lines, got {len(lines) - 1}")
    vdat = np.array([ln.split() for ln in lines[1:1 + n]], dtype=float).reshape(n, 3)
    tdat = np.array([ln.split() for ln in lines[1 + n:]], dtype=np.int64).reshape(m, 4)
    mesh = mesh_from_arrays(vdat[:, :2], tdat[:, :3], domain)
    if not np.array_equal(mesh.boundary, vdat[:, 2].astype(bool)):
        raise ValueError("stored boundary flags disagree with the triangulation")
    return mesh, tdat[:, 3]


def write_mesh(path, mesh: Mesh, masks=None):
    Path(path).write_text(mesh_to_text(mesh, masks))


def read_mesh(path, domain: Shape | None = None):
    return mesh_from_text(Path(path).read_text(), domain)


# -- matrices -------------------------------------------------------------------

def write_coo(path, form, reduced=True):
    """Sorted ``row col value`` lines of a :class:`DiscreteForm`."""
    Path(path).write_text("\n".join(form.to_coo_lines(reduced)) + "\n")


def read_coo(path, shape=None):
    import scipy.sparse as sp

    dat = np.loadtxt(path, ndmin=2)
    rows, cols = dat[:, 0].astype(np.int64), dat[:, 1].astype(np.int64)
    if shape is None:
        n = int(max(rows.max(), cols.max())) + 1
        shape = (n, n)
    return sp.coo_matrix((dat[:, 2], (rows, cols)), shape=shape).tocsr()


# -- trajectories -----------------------------------------------------------------

def trajectory_to_text(values, dt: float) -> str:
    """Header ``nodes N steps S dt DT`` then one line of nodal values per step."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(values)):
        raise NonFiniteOutput("trajectory contains non-finite values")
    out = [f"nodes {values.shape[1]} steps {values.shape[0]} dt {_FMT.format(dt)}"]
    out.extend(" ".join(_FMT.format(v) for v in row) for row in values)
    return "\n".join(out) + "\n"


def trajectory_from_text(text: str):
    lines = text.splitlines()
    head = lines[0].split()
    if head[0::2] != ["nodes", "steps", "dt"]:
        raise ValueError(f"bad trajectory header {lines[0]!r}")
    n, s, dt = int(head[1]), int(head[3]), float(head[5])
    vals = np.array([ln.split() for ln in lines[1:1 + s]], dtype=float).reshape(s, n)
    return vals, dt


def write_trajectory(path, values, dt):
    Path(path).write_text(trajectory_to_text(values, dt))


def read_trajectory(path):
    return trajectory_from_text(Path(path).read_text())


# -- tables -----------------------------------------------------------------------

NORM_COLUMNS = ("t", "l2_norm", "weighted_h1_norm")
SWEEP_COLUMNS = ("case", "s", "lambda", "eps", "delta", "lhs", "rhs", "ratio", "run_id")
# wall time goes to the manifest so that table bodies are reproducible byte for byte
CONTROL_COLUMNS = ("case", "penalty", "cg_iters", "terminal_norm", "control_cost")


def table_to_text(columns, rows) -> str:
    buf = _io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        wr.writerow([_num(v) for v in row])
    return buf.getvalue()


def write_table(path, columns, rows):
    Path(path).write_text(table_to_text(columns, rows))


def read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sweep_rows(rows):
    return [(r.case, r.s, r.lam, r.eps, r.delta, r.lhs, r.rhs, r.ratio, r.run_id) for r in rows]


# -- manifest -------------------------------------------------------------------

def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, files, extra=None):
    """``manifest.json`` listing every artifact with its sha256; the timestamp lives only here."""
    out_dir = Path(out_dir)
    entries = {str(Path(f).relative_to(out_dir)): sha256(f) for f in sorted(map(Path, files))}
    doc = {"created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
           "files": entries}
    if extra:
        doc.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
