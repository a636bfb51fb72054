"""File formats: field snapshots, state snapshots, CSV time series.

Snapshot layout (documented contract, see README): a UTF-8 text header of
``key: value`` lines, the separator line ``---``, then the raw float64
little-endian C-order payload.  The header is self-describing enough to
reconstruct the backend.

CSV series use the fixed monitoring column set of the flow module; floats
are serialized with 17 significant digits so reruns are byte-identical.
"""

from __future__ import annotations

import os

import numpy as np

from .backends import FrameAlgebra, PatchChart, TorusChart
from .fields import Metric, TensorField
from . import complexgeo as cg
from .flows import RESIDUAL_COLUMNS

MAGIC = "gkflow-field-snapshot v1"


def _fmt(x):
    return "%.17g" % float(x)


def _fmt_list(xs):
    return " ".join(_fmt(x) for x in np.asarray(xs, dtype=float).reshape(-1))


def write_field(path, field: TensorField, name="field"):
    backend = field.backend
    lines = [MAGIC, "name: %s" % name]
    if isinstance(backend, FrameAlgebra):
        lines.append("backend: frame")
        lines.append("dim: %d" % backend.dim)
        lines.append("structure_constants: %s" % _fmt_list(backend.structure_constants))
        lines.append("frame_metric: %s" % _fmt_list(backend.frame_metric))
    elif isinstance(backend, PatchChart):
        lines.append("backend: patch")
        lines.append("dim: %d" % backend.dim)
        lines.append("resolution: %s" % " ".join(str(n) for n in backend.resolution))
        lines.append("spacing: %s" % _fmt(backend.spacing[0]))
        lines.append("center: %s" % _fmt_list(backend.center))
        lines.append("stencil_order: %d" % backend.stencil_order)
    else:
        lines.append("backend: torus")
        lines.append("dim: %d" % backend.dim)
        lines.append("resolution: %s" % " ".join(str(n) for n in backend.resolution))
        lines.append("periods: %s" % _fmt_list(backend.periods))
        lines.append("stencil_order: %d" % backend.stencil_order)
    lines.append("valence: %s" % (field.slots or "-"))
    lines.append("symmetry: %s" % (field.sym or "none"))
    lines.append("shape: %s" % " ".join(str(n) for n in field.data.shape))
    lines.append("dtype: float64")
    lines.append("payload: binary")
    header = "\n".join(lines) + "\n---\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(np.ascontiguousarray(field.data, dtype="<f8").tobytes())


def read_field(path, backend=None):
    """Read a snapshot; reconstructs the backend unless one is supplied."""
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = raw.index(b"\n---\n")
    header = raw[:sep].decode("utf-8").splitlines()
    payload = raw[sep + 5:]
    if header[0] != MAGIC:
        raise ValueError("not a field snapshot: %s" % path)
    meta = {}
    for line in header[1:]:
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    dim = int(meta["dim"])
    if backend is None:
        kind = meta["backend"]
        if kind == "frame":
            c = np.array([float(x) for x in meta["structure_constants"].split()])
            fm = np.array([float(x) for x in meta["frame_metric"].split()])
            backend = FrameAlgebra(c.reshape(dim, dim, dim), fm.reshape(dim, dim))
        elif kind == "patch":
            res = tuple(int(x) for x in meta["resolution"].split())
            backend = PatchChart(
                dim, res, float(meta["spacing"]),
                np.array([float(x) for x in meta["center"].split()]),
                int(meta["stencil_order"]),
            )
        else:
            res = tuple(int(x) for x in meta["resolution"].split())
            periods = tuple(float(x) for x in meta["periods"].split())
            backend = TorusChart(dim, res, periods, int(meta["stencil_order"]))
    shape = tuple(int(x) for x in meta["shape"].split())
    data = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    slots = meta["valence"].replace("-", "")
    sym = None if meta["symmetry"] == "none" else meta["symmetry"]
    return TensorField(backend, data, slots, sym, enforce=False), meta


def save_gk_state(dirpath, state: cg.GKState):
    """State snapshot: one field file per structure plus a manifest with the
    residuals at save time."""
    os.makedirs(dirpath, exist_ok=True)
    write_field(os.path.join(dirpath, "metric.snap"), state.g.field, "g")
    write_field(os.path.join(dirpath, "torsion.snap"), state.H, "H")
    write_field(os.path.join(dirpath, "jplus.snap"), state.Jplus.field, "Jplus")
    write_field(os.path.join(dirpath, "jminus.snap"), state.Jminus.field, "Jminus")
    res = state.residuals().as_dict()
    with open(os.path.join(dirpath, "manifest.txt"), "w") as fh:
        fh.write("gkflow-state-snapshot v1\n")
        for key in sorted(res):
            fh.write("%s: %s\n" % (key, _fmt(res[key])))


def load_gk_state(dirpath):
    gfield, _ = read_field(os.path.join(dirpath, "metric.snap"))
    backend = gfield.backend
    h, _ = read_field(os.path.join(dirpath, "torsion.snap"), backend=backend)
    jp, _ = read_field(os.path.join(dirpath, "jplus.snap"), backend=backend)
    from .backends import minus_side

    jm, _ = read_field(os.path.join(dirpath, "jminus.snap"),
                       backend=minus_side(backend))
    return cg.GKState(
        g=Metric(gfield),
        H=TensorField(backend, h.data, "ddd", "alt", enforce=False),
        Jplus=cg.AlmostComplexStructure(jp, project=False, tol=1e-9),
        Jminus=cg.AlmostComplexStructure(jm, project=False, tol=1e-9),
    )


def write_series_csv(path, rows, columns=None):
    """Monitoring time series with 17-significant-digit floats."""
    columns = columns or RESIDUAL_COLUMNS
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c, float("nan"))) for c in columns) + "\n")


def write_table_csv(path, header, rows):
    """Generic small table (convergence studies, reports)."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [_fmt(c) if isinstance(c, (int, float, np.floating)) else str(c)
                     for c in row]
            fh.write(",".join(cells) + "\n")
