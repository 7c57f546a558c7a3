"""CSV and JSON serialization of vectors, datasets, bases, reports and models.

Matrices are plain CSV with a header row and '.' decimals; floats are
written with ``repr`` so they round-trip exactly and byte-identically.
"""
import csv
import json
from pathlib import Path

import numpy as np

from .basis.solver import Basis, VectorDiagnostics
from .errors import ParseError
from .multifidelity import PipelineModel
from .samples import FieldSamples
from .weights import WeightVector


def _fmt(x):
    return repr(float(x))


def _open_w(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def _read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ParseError(f"{path}: empty CSV", path=str(path))
    return rows[0], rows[1:]


def _floats(rows, path, start=0):
    try:
        return np.array([[float(v) for v in r[start:]] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}", path=str(path)) from None


def write_json(obj, path):
    with _open_w(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}", path=str(path), line=exc.lineno) from None


def write_matrix(path, header, rows):
    with _open_w(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def write_column(path, name, values):
    write_matrix(path, [name], ([_fmt(v)] for v in values))


def read_column(path, name=None):
    header, rows = _read_rows(path)
    if name is not None and header != [name]:
        raise ParseError(f"{path}: expected header '{name}', found {header}", path=str(path))
    return _floats(rows, path)[:, 0] if rows else np.empty(0)


def write_weights(w, path):
    write_column(path, "weight", w.values)


def read_weights(path):
    return WeightVector(read_column(path, "weight"))


def write_samples(s, path):
    header = ["sample_id"] + [str(j) for j in range(s.m)]
    write_matrix(path, header, ([sid] + [_fmt(v) for v in row] for sid, row in zip(s.sample_ids, s.values)))


def read_samples(path, label=""):
    header, rows = _read_rows(path)
    if not header or header[0] != "sample_id":
        raise ParseError(f"{path}: first column must be sample_id", path=str(path))
    for k, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise ParseError(f"{path}:{k}: expected {len(header)} fields, found {len(r)}", path=str(path), line=k)
    values = _floats(rows, path, start=1).reshape(len(rows), len(header) - 1)
    return FieldSamples(values, tuple(r[0] for r in rows), label=label or Path(path).stem)


def write_basis(basis, path, meta=None):
    """``path`` gets the CSV; the JSON sidecar sits next to it."""
    header = [f"b{k + 1}" for k in range(basis.p)]
    write_matrix(path, header, ([_fmt(v) for v in row] for row in basis.vectors))
    side = {
        "m": basis.m,
        "p": basis.p,
        "weights_fingerprint": basis.weights_fingerprint,
        "diagnostics": basis.diagnostics_dicts(),
    }
    side.update(meta or {})
    write_json(side, sidecar(path))


def sidecar(path):
    return Path(path).with_suffix(".json")


def read_basis(path):
    header, rows = _read_rows(path)
    V = _floats(rows, path).reshape(len(rows), len(header))
    diag, fp = [], ""
    sc = sidecar(path)
    if sc.exists():
        meta = read_json(sc)
        fp = meta.get("weights_fingerprint", "")
        diag = [VectorDiagnostics(**d) for d in meta.get("diagnostics", [])]
    return Basis(V, diag, fp)


def write_report(report, path, zero_fill=False):
    per = report.zero_filled() if zero_fill else report.per_node
    rows = (
        [str(i), str(int(c)), "" if np.isnan(v) else _fmt(v)]
        for i, (c, v) in enumerate(zip(report.exceedance_counts, per))
    )
    write_matrix(path, ["node", "count", "mse"], rows)


def report_summary(report):
    return {
        "aggregate": report.aggregate,
        "threshold": report.threshold,
        "nodes_defined": int(report.defined.sum()),
        "exceedances": int(report.exceedance_counts.sum()),
        "sample_set": report.sample_set,
    }


def write_pairs(pairs, path):
    write_matrix(path, ["observed", "predicted"], ([_fmt(a), _fmt(b)] for a, b in pairs))


def write_model(model, directory, meta=None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_basis(model.low_basis, d / "low_basis.csv")
    write_basis(model.high_basis, d / "high_basis.csv")
    px = model.coef.shape[1]
    write_matrix(d / "coef_map.csv", [f"x{k + 1}" for k in range(px)], ([_fmt(v) for v in r] for r in model.coef))
    write_column(d / "intercept.csv", "intercept", model.intercept)
    write_column(d / "means_x.csv", "mean", model.mean_x)
    write_column(d / "means_y.csv", "mean", model.mean_y)
    info = {
        "m_x": model.low_basis.m,
        "m_y": model.high_basis.m,
        "p_x": model.low_basis.p,
        "p_y": model.high_basis.p,
        "ridge_penalty": model.ridge_penalty,
        "gcv_scores": {repr(float(k)): v for k, v in model.gcv_scores.items()},
        "low_weights_fingerprint": model.low_basis.weights_fingerprint,
        "high_weights_fingerprint": model.high_basis.weights_fingerprint,
    }
    info.update(meta or {})
    write_json(info, d / "model.json")


def read_model(directory):
    d = Path(directory)
    info = read_json(d / "model.json")
    header, rows = _read_rows(d / "coef_map.csv")
    coef = _floats(rows, d / "coef_map.csv").reshape(len(rows), len(header))
    return PipelineModel(
        low_basis=read_basis(d / "low_basis.csv"),
        high_basis=read_basis(d / "high_basis.csv"),
        coef=coef,
        intercept=read_column(d / "intercept.csv", "intercept"),
        ridge_penalty=float(info["ridge_penalty"]),
        mean_x=read_column(d / "means_x.csv", "mean"),
        mean_y=read_column(d / "means_y.csv", "mean"),
        gcv_scores={float(k): v for k, v in info.get("gcv_scores", {}).items()},
    )


def write_precision(q, path):
    """Upper-triangle entries ``i,j,value`` with ``i <= j``."""
    U = q.upper.tocoo()
    order = np.lexsort((U.row, U.col))
    rows = ([str(U.row[k]), str(U.col[k]), _fmt(U.data[k])] for k in order)
    write_matrix(path, ["i", "j", "value"], rows)


def read_precision(path):
    from scipy import sparse

    from .mesh import SparseSpdMatrix

    header, rows = _read_rows(path)
    if header != ["i", "j", "value"]:
        raise ParseError(f"{path}: expected header i,j,value", path=str(path))
    i = np.array([int(r[0]) for r in rows])
    j = np.array([int(r[1]) for r in rows])
    v = _floats([[r[2]] for r in rows], path)[:, 0]
    if np.any(i > j):
        raise ParseError(f"{path}: entries must satisfy i <= j", path=str(path))
    m = int(max(i.max(), j.max())) + 1
    return SparseSpdMatrix(sparse.csc_matrix((v, (i, j)), shape=(m, m)))
