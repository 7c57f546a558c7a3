"""Command-line front end: ``wgmrf <subcommand> ...``.

Every subcommand writes its primary results as CSV and its metadata
(including wall-clock timings) as JSON.  Errors go to stderr as a single
JSON object carrying an error ``code``; the exit status is 0 only on
success.
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io as wio
from ._accel import backend_name
from .basis import Basis, SolverOptions, compute_basis
from .errors import ConfigError, DimensionError, WgmrfError
from .evaluation import (
    compression_error,
    exceedance_scatter,
    prediction_error,
    theoretical_error_rate,
)
from .mesh import build_precision, load_mesh, write_edge_list
from .multifidelity import eigen_basis, fit_pipeline, predict
from .sparse_la import GmrfCovariance, factorize
from .synthetic import SyntheticSpec, coupled_fidelity, simulation_weights
from .weights import DEFAULT_SIGMA_GRID, QUANTILE_PRESETS, WeightVector, estimate_weights, pooled_quantile

CONFIG_SCHEMA_VERSION = 1
EIGEN_CHECK_MAX_M = 1000
_UNSET = object()

log = logging.getLogger("wgmrf")


class UsageError(WgmrfError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _ridge(text):
    if str(text).lower() == "gcv":
        return "gcv"
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("ridge must be 'gcv' or a nonnegative number") from None
    if v < 0:
        raise argparse.ArgumentTypeError("ridge must be nonnegative")
    return v


def _add(p, *flags, default=None, required_=False, **kw):
    """Register a flag whose default is applied only after config merging.

    ``required_`` flags may be satisfied by the config file instead of the
    command line, which argparse's own ``required`` cannot express.
    """
    p.add_argument(*flags, default=_UNSET, **kw)
    dest = _dest(flags, kw)
    p.set_defaults(**{"_default_" + dest: default, "_required_" + dest: required_})


def _dest(flags, kw):
    return kw.get("dest") or flags[0].lstrip("-").replace("-", "_")


def _common(p):
    p.add_argument("--config", default=None, help="JSON file with default values for this subcommand's flags")
    p.add_argument("-v", "--verbose", action="store_true")


def _solver_flags(p):
    d = SolverOptions()
    _add(p, "--start-scale", type=float, default=d.start_scale, help="length of the eigenvector starting point")
    _add(p, "--grad-tol", type=float, default=d.grad_tol, help="final gradient tolerance, relative to max(1, |risk|)")
    _add(p, "--descent-tol", type=float, default=d.descent_tol, help="gradient tolerance of the first descent when polishing")
    _add(p, "--max-iter", type=int, default=d.max_iter, help="L-BFGS iteration cap per stage")
    _add(p, "--memory", type=int, default=d.memory, help="L-BFGS history length")
    _add(p, "--no-polish", action="store_const", const=True, default=False, help="skip the unit-sphere refinement")
    _add(p, "--no-precondition", action="store_const", const=True, default=False, help="polish without the curvature preconditioner")
    _add(p, "--restarts", type=int, default=d.restarts, help="extra random starts for the polish (unused with equal weights)")
    _add(p, "--seed", type=int, default=d.seed, help="seed for eigen-iteration and restart start vectors")


def build_parser():
    parser = _Parser(prog="wgmrf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="store_true", help="print version and backend, then exit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("precision", help="build and factorize the regularised GMRF precision")
    _common(p)
    _add(p, "--mesh", required_=True, help="edge-list or element-list mesh file")
    _add(p, "--format", choices=("edge_list", "element_list"), default="edge_list")
    _add(p, "--coords", default=None)
    _add(p, "--epsilon", type=float, default=1e-4, help="diagonal shift added to the graph Laplacian")
    _add(p, "--ordering", choices=("mindegree", "natural"), default="mindegree")
    _add(p, "--out", required_=True)
    p.set_defaults(func=cmd_precision)

    p = sub.add_parser("weights", help="estimate node weights from training samples")
    _common(p)
    _add(p, "--mesh", required_=True, help="edge-list or element-list mesh file")
    _add(p, "--format", choices=("edge_list", "element_list"), default="edge_list")
    _add(p, "--train", required_=True)
    _add(p, "--quantile", type=float, default=0.005, help="upper tail fraction defining exceedances")
    _add(p, "--sigma-grid", type=_floats, default=list(DEFAULT_SIGMA_GRID), help="comma-separated smoother bandwidths for GCV")
    _add(p, "--out", required_=True)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("basis", help="compute a weighted basis")
    _common(p)
    _add(p, "--precision", required_=True)
    _add(p, "--weights", default=None)
    _add(p, "--equal-weights", action="store_const", const=True, default=False, help="use uniform weights (eigenbasis)")
    _add(p, "--p", type=int, required_=True, help="number of basis vectors")
    _add(p, "--resume", action="store_const", const=True, default=False, help="extend an existing basis.csv in --out")
    _add(p, "--out", required_=True)
    _solver_flags(p)
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("evaluate", help="compression error and error rate of one or more bases")
    _common(p)
    _add(p, "--basis", nargs="+", required_=True)
    _add(p, "--test", required_=True)
    _add(p, "--train", required_=True)
    _add(p, "--quantile", type=float, default=0.005, help="upper tail fraction defining exceedances")
    _add(p, "--p", type=_ints, default=None, help="comma-separated basis lengths to evaluate (default: full basis)")
    _add(p, "--weights", default=None)
    _add(p, "--precision", default=None)
    _add(p, "--zero-fill", action="store_const", const=True, default=False, help="write 0 instead of blank for nodes without exceedances")
    _add(p, "--out", required_=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline-fit", help="fit the low-to-high fidelity coefficient map")
    _common(p)
    _add(p, "--train-low", required_=True)
    _add(p, "--train-high", required_=True)
    _add(p, "--low-precision", required_=True)
    _add(p, "--low-basis-p", type=int, default=100)
    _add(p, "--high-basis", required_=True)
    _add(p, "--high-basis-p", type=int, default=None)
    _add(p, "--ridge", type=_ridge, default="gcv", help="ridge penalty, or 'gcv' to choose it")
    _add(p, "--seed", type=int, default=0)
    _add(p, "--model-dir", required_=True)
    p.set_defaults(func=cmd_pipeline_fit)

    p = sub.add_parser("pipeline-predict", help="predict high-fidelity fields from low-fidelity samples")
    _common(p)
    _add(p, "--model-dir", required_=True)
    _add(p, "--low", required_=True)
    _add(p, "--test-high", default=None)
    _add(p, "--quantile", type=float, default=0.005, help="upper tail fraction defining exceedances")
    _add(p, "--threshold", type=float, default=None, help="exceedance threshold; default is the stored training quantile")
    _add(p, "--zero-fill", action="store_const", const=True, default=False, help="write 0 instead of blank for nodes without exceedances")
    _add(p, "--out", required_=True)
    p.set_defaults(func=cmd_pipeline_predict)

    p = sub.add_parser("synth", help="generate a synthetic coupled-fidelity dataset")
    _common(p)
    _add(p, "--spec", default=None, help="SyntheticSpec JSON; defaults are used when omitted")
    _add(p, "--centers", type=_ints, default=None, help="simulation-weight center counts, e.g. 1,3,9,15")
    _add(p, "--out-dir", required_=True)
    p.set_defaults(func=cmd_synth)
    return parser


def load_config(path, allowed):
    cfg = wio.read_json(path)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", path=str(path))
    version = cfg.pop("schema_version", None)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"config schema_version must be {CONFIG_SCHEMA_VERSION}, got {version!r}", path=str(path))
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}", path=str(path), keys=unknown)
    return cfg


def _convert(action, value):
    if value is None or action.type is None:
        return value
    if isinstance(value, list) and action.type in (_floats, _ints):
        return [action.type(str(v))[0] for v in value]
    if action.nargs == "+" and isinstance(value, list):
        return [action.type(v) for v in value]
    return action.type(str(value)) if action.type in (_floats, _ints, _ridge) else action.type(value)


def resolve(parser, argv):
    """Parse ``argv`` and merge config-file values under explicit flags."""
    args = parser.parse_args(argv)
    if args.command is None:
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.default is _UNSET}
    cfg = load_config(args.config, set(actions)) if args.config else {}
    ns = vars(args)
    for dest, action in actions.items():
        if ns[dest] is _UNSET:
            if dest in cfg:
                try:
                    ns[dest] = _convert(action, cfg[dest])
                except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                    raise ConfigError(f"config key {dest!r}: {exc}", key=dest) from None
            else:
                ns[dest] = ns.get("_default_" + dest)
        if ns.get("_required_" + dest) and ns[dest] is None:
            raise UsageError(f"--{dest.replace('_', '-')} is required (flag or config key)")
    return args


def _solver_options(a):
    return SolverOptions(
        start_scale=a.start_scale,
        grad_tol=a.grad_tol,
        descent_tol=a.descent_tol,
        max_iter=a.max_iter,
        memory=a.memory,
        polish=not a.no_polish,
        precondition=not a.no_precondition,
        restarts=a.restarts,
        seed=a.seed,
    )


def _out_dir(path):
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_precision(a):
    t0 = time.perf_counter()
    g = load_mesh(a.mesh, a.format, coords_path=a.coords)
    q = build_precision(g, a.epsilon)
    f = factorize(q, ordering=a.ordering)
    out = _out_dir(a.out)
    wio.write_precision(q, out / "precision.csv")
    nnz_lower = (q.nnz + q.dimension) // 2
    wio.write_json(
        {
            "m": g.node_count,
            "edges": int(g.indices.size // 2),
            "epsilon": a.epsilon,
            "nnz": q.nnz,
            "nnz_factor": f.nnz,
            "fill_ratio": f.nnz / nnz_lower,
            "ordering": a.ordering,
            "mesh_fingerprint": g.fingerprint(),
            "factor_fingerprint": f.fingerprint(),
            "backend": backend_name(),
            "timing": {"total_seconds": time.perf_counter() - t0},
        },
        out / "precision.json",
    )


def cmd_weights(a):
    t0 = time.perf_counter()
    g = load_mesh(a.mesh, a.format)
    train = wio.read_samples(a.train)
    if train.m != g.node_count:
        raise DimensionError(f"training samples have {train.m} nodes, mesh has {g.node_count}")
    w, f, scores = estimate_weights(g, train, a.quantile, a.sigma_grid)
    out = _out_dir(a.out)
    wio.write_column(out / "frequency.csv", "frequency", f)
    wio.write_weights(w, out / "weights.csv")
    wio.write_matrix(out / "gcv.csv", ["sigma", "score"],
                     ([repr(float(s)), repr(float(v))] for s, v in zip(a.sigma_grid, scores)))
    wio.write_json(
        {
            "quantile": a.quantile,
            "threshold": w.threshold,
            "sigma": w.bandwidth,
            "sigma_grid": list(a.sigma_grid),
            "weights_fingerprint": w.fingerprint(),
            "nodes_with_exceedance": int(np.count_nonzero(f)),
            "timing": {"total_seconds": time.perf_counter() - t0},
        },
        out / "weights.json",
    )


def eigen_check(cov, basis, gap_tol=1e-6):
    """Compare an equal-weights basis against the dense eigendecomposition."""
    S = cov.todense()
    lam, V = np.linalg.eigh(S)
    lam, V = lam[::-1], V[:, ::-1]
    scale = max(abs(lam[0]), 1e-300)
    overlaps = []
    for k in range(basis.p):
        cluster = np.abs(lam - lam[k]) <= gap_tol * scale
        overlaps.append(float(np.linalg.norm(V[:, cluster].T @ basis.vectors[:, k])))
    dev = max((1.0 - o for o in overlaps), default=0.0)
    return {"overlaps": overlaps, "max_deviation": dev, "matches": bool(dev <= 1e-6)}


def cmd_basis(a):
    t0 = time.perf_counter()
    q = wio.read_precision(a.precision)
    m = q.dimension
    if a.equal_weights == bool(a.weights):
        raise UsageError("give exactly one of --weights or --equal-weights")
    w = WeightVector.equal(m) if a.equal_weights else wio.read_weights(a.weights)
    if len(w) != m:
        raise DimensionError(f"weights have length {len(w)}, precision dimension is {m}")
    if a.p < 0 or a.p > m:
        raise DimensionError(f"p must lie in [0, {m}], got {a.p}", p=a.p, m=m)
    out = _out_dir(a.out)
    path = out / "basis.csv"
    initial = None
    if a.resume and path.exists():
        initial = wio.read_basis(path)
        if initial.m != m or initial.weights_fingerprint not in ("", w.fingerprint()):
            raise ConfigError("existing basis was built for different weights or dimension", path=str(path))
        if initial.p >= a.p:
            initial = Basis(initial.vectors[:, : a.p], list(initial.diagnostics[: a.p]), w.fingerprint())
    cov = GmrfCovariance(factorize(q))
    basis = compute_basis(cov, w, a.p, _solver_options(a), initial=initial)
    meta = {
        "equal_weights": bool(a.equal_weights),
        "resumed_from": 0 if initial is None else initial.p,
        "solver": vars(_solver_options(a)),
        "backend": backend_name(),
        "timing": {
            "total_seconds": time.perf_counter() - t0,
            "per_vector_seconds": [d.wall_time for d in basis.diagnostics],
        },
    }
    if a.equal_weights and m <= EIGEN_CHECK_MAX_M and basis.p:
        meta["eigen_check"] = eigen_check(cov, basis)
    wio.write_basis(basis, path, meta)


def cmd_evaluate(a):
    t0 = time.perf_counter()
    train = wio.read_samples(a.train)
    test = wio.read_samples(a.test, label="test")
    if set(train.sample_ids) & set(test.sample_ids):
        raise ConfigError("training and test sets share sample ids")
    mean = train.column_mean()
    q = pooled_quantile(train, a.quantile)
    cov = w = None
    if a.precision:
        cov = GmrfCovariance(factorize(wio.read_precision(a.precision)))
        w = wio.read_weights(a.weights) if a.weights else WeightVector.equal(cov.dimension)
    out = _out_dir(a.out)
    rows, meta = [], {"threshold": q, "quantile": a.quantile, "reports": {}}
    for bpath in a.basis:
        basis = wio.read_basis(bpath)
        name = Path(bpath).parent.name if Path(bpath).stem == "basis" else Path(bpath).stem
        levels = sorted(set(a.p)) if a.p else [basis.p]
        for p in levels:
            if p > basis.p:
                raise DimensionError(f"{bpath} has only {basis.p} vectors, asked for {p}")
            head = basis.head(p)
            rep = compression_error(test, head, q, mean)
            tag = f"{name}_p{p}"
            wio.write_report(rep, out / f"errors_{tag}.csv", zero_fill=a.zero_fill)
            r = theoretical_error_rate(cov, w, head) if cov is not None else None
            rows.append([name, str(p), repr(rep.aggregate), str(int(rep.defined.sum())),
                         "" if r is None else repr(r), "" if r is None else repr(1.0 - r)])
            meta["reports"][tag] = wio.report_summary(rep)
    wio.write_matrix(out / "summary.csv",
                     ["basis", "p", "aggregate", "nodes_defined", "r_comp", "contained_information"], rows)
    meta["timing"] = {"total_seconds": time.perf_counter() - t0}
    wio.write_json(meta, out / "evaluate.json")


def cmd_pipeline_fit(a):
    t0 = time.perf_counter()
    train_low = wio.read_samples(a.train_low)
    train_high = wio.read_samples(a.train_high)
    q_low = wio.read_precision(a.low_precision)
    if q_low.dimension != train_low.m:
        raise DimensionError("low-fidelity precision and samples disagree on node count")
    p_x = min(a.low_basis_p, q_low.dimension)
    low_basis = eigen_basis(GmrfCovariance(factorize(q_low)), p_x, seed=a.seed)
    high_basis = wio.read_basis(a.high_basis)
    if a.high_basis_p is not None:
        high_basis = high_basis.head(min(a.high_basis_p, high_basis.p))
    if high_basis.m != train_high.m:
        raise DimensionError("high-fidelity basis and samples disagree on node count")
    model = fit_pipeline(train_low, train_high, low_basis, high_basis, a.ridge)
    thresholds = {repr(u): pooled_quantile(train_high, u) for u in QUANTILE_PRESETS}
    wio.write_model(model, a.model_dir, {
        "thresholds": thresholds,
        "n_train": train_low.n,
        "timing": {"total_seconds": time.perf_counter() - t0},
    })


def cmd_pipeline_predict(a):
    t0 = time.perf_counter()
    model = wio.read_model(a.model_dir)
    low = wio.read_samples(a.low)
    pred = predict(model, low)
    out = _out_dir(a.out)
    wio.write_samples(pred, out / "predicted.csv")
    meta = {"n": pred.n}
    if a.test_high:
        test = wio.read_samples(a.test_high).take(low.sample_ids)
        q = a.threshold
        if q is None:
            info = wio.read_json(Path(a.model_dir) / "model.json")
            try:
                q = info["thresholds"][repr(float(a.quantile))]
            except KeyError:
                raise ConfigError(f"model has no stored threshold for quantile {a.quantile}; pass --threshold") from None
        rep = prediction_error(test, pred, q)
        pairs, r = exceedance_scatter(test, pred, q)
        wio.write_report(rep, out / "prediction_errors.csv", zero_fill=a.zero_fill)
        wio.write_pairs(pairs, out / "scatter.csv")
        meta.update(threshold=q, correlation=r, prediction=wio.report_summary(rep))
    meta["timing"] = {"total_seconds": time.perf_counter() - t0}
    wio.write_json(meta, out / "predict.json")


def cmd_synth(a):
    t0 = time.perf_counter()
    spec = SyntheticSpec.from_json(a.spec) if a.spec else SyntheticSpec()
    data = coupled_fidelity(spec)
    out = _out_dir(a.out_dir)
    for key in ("train_low", "train_high", "test_low", "test_high"):
        wio.write_samples(data[key], out / f"{key}.csv")
    meshes = {}
    for key in ("high_mesh", "low_mesh"):
        g = data[key]
        write_edge_list(g, out / f"{key}.txt")
        wio.write_precision(build_precision(g, spec.epsilon), out / f"{key.split('_')[0]}_precision.csv")
        meshes[key] = g.fingerprint()
    centers = a.centers if a.centers is not None else [spec.weight_centers]
    sim = {}
    if centers:
        g = data["high_mesh"]
        cov = GmrfCovariance(factorize(build_precision(g, spec.epsilon)))
        S = cov.todense()
        lam, V = np.linalg.eigh(S)
        V = V[:, ::-1]
        L = min(spec.weight_basis_len, g.node_count)
        for c in centers:
            w = simulation_weights(g, cov, c, L, spec.seed, eigvecs=V[:, :L])
            wio.write_weights(w, out / f"sim_weights_c{c}.csv")
            sim[str(c)] = {"fingerprint": w.fingerprint(), "basis_len": L, "negatives_clamped": True}
    wio.write_json(
        {
            "synthetic": True,
            "spec": spec.to_dict(),
            "seed": spec.seed,
            "mesh_fingerprints": meshes,
            "simulation_weights": sim,
            "timing": {"total_seconds": time.perf_counter() - t0},
        },
        out / "manifest.json",
    )


def _emit_error(exc):
    payload = exc.to_dict() if isinstance(exc, WgmrfError) else {"code": "internal", "message": str(exc)}
    sys.stderr.write(json.dumps(payload, sort_keys=True, default=str) + "\n")


def main(argv=None):
    parser = build_parser()
    try:
        args = resolve(parser, argv)
        if args.version:
            from . import __version__

            print(f"wgmrf {__version__} ({backend_name()})")
            return 0
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
        return 0
    except UsageError as exc:
        _emit_error(exc)
        return 2
    except WgmrfError as exc:
        _emit_error(exc)
        return 1
    except (OSError, ValueError) as exc:
        _emit_error(WgmrfError(str(exc)))
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
