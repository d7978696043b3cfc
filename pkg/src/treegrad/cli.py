"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error. Models are fit on
features normalized to the unit cube; gradients are reported per unit of
normalized feature, while points and references are read and written in
the original units.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, integrodiff, rotation
from .data import DataError, Normalizer, load_csv, normalize_unit_cube
from .ensemble import BootstrapConfig, Forest, fit_forest, forest_tbas, forest_tbig, load_model
from .gradfield import extract
from .integrodiff import OUTER, SubspaceResult
from .measure import Empirical, UniformCube
from .tree import FitConfig, RegressionTree, fit

MODEL_FORMAT = "treegrad-model"
MODEL_VERSION = 1
EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1], got {v}")
    return v


def _list_of(kind):
    def parse(text: str):
        try:
            return tuple(kind(t) for t in text.split(",") if t.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a comma-separated list") from None
    return parse


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a comma-separated vector") from None


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v: float) -> str:
    return repr(float(v))


class Model:
    """A fitted tree or forest plus what is needed to map user inputs onto it."""

    def __init__(self, est, normalizer: Normalizer, feature_names, target, feature_mean, train_unit):
        self.est = est
        self.train_unit = np.asarray(train_unit, dtype=float)  # normalized training features
        self.normalizer = normalizer
        self.feature_names = tuple(feature_names)
        self.target = target
        self.feature_mean = np.asarray(feature_mean, dtype=float)

    @property
    def p(self) -> int:
        return len(self.feature_names)

    @property
    def is_forest(self) -> bool:
        return isinstance(self.est, Forest)

    def to_unit(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.p:
            raise DataError(f"points have {X.shape[-1]} features, the model expects {self.p}")
        return np.clip(self.normalizer.transform(X), 0.0, 1.0)

    def field(self):
        return self.est if self.is_forest else extract(self.est)

    def trees(self) -> list[RegressionTree]:
        return self.est.trees if self.is_forest else [self.est]

    def to_dict(self) -> dict:
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "target": self.target,
                "feature_names": list(self.feature_names), "normalizer": self.normalizer.to_dict(),
                "feature_mean": self.feature_mean.tolist(), "train_features": self.train_unit.tolist(),
                "model": self.est.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> Model:
        if d.get("format") != MODEL_FORMAT:
            raise DataError("not a model file")
        if d.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model file version {d.get('version')}")
        return cls(load_model(d["model"]), Normalizer.from_dict(d["normalizer"]), d["feature_names"],
                   d["target"], d["feature_mean"], d["train_features"])


def _load_model(path) -> Model:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return Model.from_dict(d)
    except FileNotFoundError:
        raise DataError(f"no such model file: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DataError(f"{path}: unreadable model file ({e})") from None


def _read_points(path, names) -> np.ndarray:
    """Rows of a headered CSV restricted to ``names``, in that order."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        missing = [n for n in names if n not in header]
        if missing:
            raise DataError(f"{path}: missing feature columns {missing}")
        idx = [header.index(n) for n in names]
        out = []
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
            vals = []
            for j in idx:
                try:
                    v = float(row[j])
                except ValueError:
                    raise DataError(f"{path}: row {r}, column {header[j]!r}: cannot parse {row[j]!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {r}, column {header[j]!r}: non-finite value")
                vals.append(v)
            out.append(vals)
    if not out:
        raise DataError(f"{path}: no data rows")
    return np.array(out, dtype=float)


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    raw = load_csv(args.input, args.target)
    d, norm = normalize_unit_cube(raw)
    mode = "cyclic-median" if args.mode == "cyclic" else "cart"
    depth = args.max_depth
    if depth is None and mode == "cart":
        depth = 8
    try:
        cfg = FitConfig(mode, depth, args.min_leaf, args.schedule_scale, args.seed)
        if args.trees > 1:
            bs = BootstrapConfig(args.sample_fraction, not args.no_replace, args.feature_fraction, args.seed)
            est = fit_forest(d, cfg, args.trees, bs, n_jobs=args.jobs)
        else:
            est = fit(d, cfg, args.feature_fraction)
    except ValueError as e:
        raise DataError(str(e)) from None
    model = Model(est, norm, raw.feature_names, args.target, raw.features.mean(axis=0), d.features)
    Path(args.output).write_text(json.dumps(model.to_dict(), indent=1) + "\n", encoding="utf-8")
    trees = model.trees()
    rmse = float(np.sqrt(np.mean((est.predict(d.features) - d.response) ** 2)))
    print(f"trees={len(trees)} depth={max(t.max_depth for t in trees)} "
          f"leaves={sum(len(t.leaves) for t in trees)} train_rmse={rmse:.6g}")
    return 0


def cmd_grad(args) -> int:
    model = _load_model(args.model)
    Z = model.to_unit(_read_points(args.points, model.feature_names))
    G = model.field().grad_dataset(Z)
    header = [f"d_{n}" for n in model.feature_names]
    _emit(_csv_text(header, [[_fmt(v) for v in g] for g in G]), args.output)
    return 0


def _measure(args, model: Model):
    if args.measure == "uniform":
        return UniformCube(model.p), None
    if not args.input:
        return Empirical(model.train_unit), None
    X = _read_points(args.input, model.feature_names)
    return Empirical(model.to_unit(X)), X


def cmd_tbas(args) -> int:
    model = _load_model(args.model)
    if args.rotate and not args.input:
        raise UsageError("--rotate needs --input with the features to rotate")
    m, X = _measure(args, model)
    info = {"model": "forest" if model.is_forest else "tree"}
    if args.samples:
        rng = np.random.default_rng(args.seed)
        if model.is_forest:
            C = np.mean([integrodiff.mce(gf, OUTER, m, args.samples, rng) for gf in model.est.fields], axis=0)
        else:
            C = integrodiff.mce(model.field(), OUTER, m, args.samples, rng)
        res = SubspaceResult.from_matrix(C, measure=m.describe(), model={**info, "estimator": "monte-carlo"},
                                         seed=args.seed)
    elif model.is_forest:
        res = forest_tbas(model.est, m)
    else:
        res = integrodiff.tbas(model.field(), m)
        res = SubspaceResult(res.matrix, res.eigenvalues, res.eigenvectors, res.measure,
                             {**info, "estimator": "partition"})
    out = res.to_dict()
    out["feature_names"] = list(model.feature_names)
    _emit(_json(out), args.output)
    if args.rotate:
        if X is None:
            X = _read_points(args.input, model.feature_names)
        k = rotation.n_components(model.p)
        L = rotation.tbas_map(res.matrix, k)
        extra = model.to_unit(X) @ L
        header = list(model.feature_names) + [f"tbas{j + 1}" for j in range(k)]
        rows = [[_fmt(v) for v in row] for row in np.hstack([X, extra])]
        Path(args.rotate).write_text(_csv_text(header, rows), encoding="utf-8")
    return 0


def _point(model: Model, inline, row, what: str):
    if inline is not None and row is not None:
        raise UsageError(f"give {what} inline or by row, not both")
    if inline is not None:
        if inline.shape[0] != model.p:
            raise DataError(f"{what} has {inline.shape[0]} entries, the model expects {model.p}")
        return inline, "given"
    if row is not None:
        return row, "row"
    return None, None


def cmd_tbig(args) -> int:
    model = _load_model(args.model)
    x, how = _point(model, args.x, args.row, "x")
    x_ref, ref_how = _point(model, args.x_ref, args.ref_row, "x_ref")
    if x is None:
        raise UsageError("tbig needs --x or --row")
    if "row" in (how, ref_how):
        if not args.input:
            raise UsageError("--row and --ref-row need --input")
        P = _read_points(args.input, model.feature_names)
        for r in (v for v, h in ((x, how), (x_ref, ref_how)) if h == "row"):
            if not 0 <= r < len(P):
                raise DataError(f"row {r} is outside the {len(P)} data rows")
        if how == "row":
            x = P[x]
        if ref_how == "row":
            x_ref = P[x_ref]
    if x_ref is None:
        x_ref, ref_how = model.feature_mean, "training-mean"
    z, z_ref = model.to_unit(x), model.to_unit(x_ref)
    if args.exact:
        if model.is_forest:
            raise UsageError("--exact supports single trees only")
        res = integrodiff.tbig_exact(model.field(), z, z_ref)
    elif model.is_forest:
        res = forest_tbig(model.est, z, z_ref, args.samples, args.seed)
    else:
        res = integrodiff.tbig(model.field(), z, z_ref, args.samples, args.seed)
    out = {"feature_names": list(model.feature_names), "x": np.asarray(x, float).tolist(),
           "x_ref": np.asarray(x_ref, float).tolist(), "reference": ref_how, "ig": res.ig.tolist(),
           "m": "exact" if res.samples is None else res.samples, "seed": res.seed,
           "model": "forest" if model.is_forest else "tree"}
    if model.is_forest and not args.exact:
        out["aggregation"] = "mean-field"
    _emit(_json(out), args.output)
    return 0


def cmd_rotate(args) -> int:
    d = load_csv(args.input, args.target)
    rots = args.rotation or rotation.ROTATIONS
    rows = []
    for rot in rots:
        errs = experiments.rotation_cv_rmse(d, rot, args.folds, args.max_depth, args.seed, args.min_leaf)
        rows.extend([rot, f, _fmt(e)] for f, e in enumerate(errs))
        print(f"{rot}: median fold rmse {float(np.median(errs)):.6g}", file=sys.stderr)
    _emit(_csv_text(["rotation", "fold", "rmse"], rows), args.output)
    return 0


def cmd_experiment(args) -> int:
    try:
        spec = experiments.default_spec(
            args.experiment, dims=args.dims, sizes=args.sizes, depths=args.depths, replicates=args.replicates,
            noise=args.noise, rhos=args.rhos, densities=args.densities, sparsity=args.sparsity,
            min_leaf=args.min_leaf, schedule_scale=args.schedule_scale, folds=args.folds,
            probes=args.probes, ackley_halfwidth=args.ackley_halfwidth, function=args.function,
            seed=args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    rows = experiments.run_experiment(spec, jobs=args.jobs, timing=args.timing == "wall")
    out = Path(args.output)
    if args.output.endswith(("/", os.sep)):  # trailing separator names a directory
        out.mkdir(parents=True, exist_ok=True)
    if out.is_dir():
        out = out / f"{spec.experiment}.csv"
    experiments.write_results(rows, out)
    print(f"{len(rows)} rows -> {out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treegrad", description="Gradient estimates from regression trees.")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a tree or forest to a CSV and save it")
    f.add_argument("--input", required=True)
    f.add_argument("--target", required=True)
    f.add_argument("--mode", choices=("cart", "cyclic"), default="cart")
    f.add_argument("--max-depth", type=_positive_int, default=None,
                   help="default 8 for cart; cyclic mode falls back to the depth schedule")
    f.add_argument("--min-leaf", type=_positive_int, default=1)
    f.add_argument("--schedule-scale", type=float, default=1.0)
    f.add_argument("--trees", type=_positive_int, default=1)
    f.add_argument("--sample-fraction", type=_fraction, default=1.0)
    f.add_argument("--feature-fraction", type=_fraction, default=1.0)
    f.add_argument("--no-replace", action="store_true", help="subsample without replacement")
    f.add_argument("--jobs", type=_positive_int, default=1)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--output", required=True)
    f.set_defaults(run=cmd_fit)

    g = sub.add_parser("grad", help="gradient estimates at the rows of a CSV")
    g.add_argument("--model", required=True)
    g.add_argument("--points", required=True)
    g.add_argument("--output")
    g.set_defaults(run=cmd_grad)

    t = sub.add_parser("tbas", help="active-subspace matrix and its eigendecomposition")
    t.add_argument("--model", required=True)
    t.add_argument("--measure", choices=("uniform", "empirical"), default="empirical",
                   help="empirical uses the training points unless --input is given")
    t.add_argument("--input", help="CSV of points for the empirical measure and for --rotate")
    t.add_argument("--samples", type=_positive_int, help="Monte Carlo estimate instead of the exact sum")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--rotate", metavar="CSV", help="write the features with the leading rotated columns appended")
    t.add_argument("--output")
    t.set_defaults(run=cmd_tbas)

    i = sub.add_parser("tbig", help="integrated-gradient attribution of one point")
    i.add_argument("--model", required=True)
    i.add_argument("--x", type=_vector)
    i.add_argument("--row", type=int, help="0-based data row of --input to explain")
    i.add_argument("--x-ref", type=_vector)
    i.add_argument("--ref-row", type=int)
    i.add_argument("--input")
    i.add_argument("--samples", type=_positive_int, default=integrodiff.DEFAULT_IG_SAMPLES)
    i.add_argument("--exact", action="store_true")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--output")
    i.set_defaults(run=cmd_tbig)

    r = sub.add_parser("rotate", help="cross-validated RMSE of a tree on rotated features")
    r.add_argument("--input", required=True)
    r.add_argument("--target", required=True)
    r.add_argument("--rotation", type=_list_of(str))
    r.add_argument("--folds", type=int, default=10)
    r.add_argument("--max-depth", type=_positive_int, default=4)
    r.add_argument("--min-leaf", type=_positive_int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--output")
    r.set_defaults(run=cmd_rotate)

    e = sub.add_parser("experiment", help="run a synthetic study and write a results CSV")
    e.add_argument("experiment", choices=experiments.EXPERIMENTS)
    e.add_argument("--dims", type=_list_of(int))
    e.add_argument("--sizes", type=_list_of(int))
    e.add_argument("--depths", type=_list_of(int))
    e.add_argument("--replicates", type=int)
    e.add_argument("--noise", type=float)
    e.add_argument("--rhos", type=_list_of(float))
    e.add_argument("--densities", type=_list_of(float))
    e.add_argument("--sparsity", type=int)
    e.add_argument("--min-leaf", type=int)
    e.add_argument("--schedule-scale", type=float)
    e.add_argument("--folds", type=int)
    e.add_argument("--probes", type=int)
    e.add_argument("--ackley-halfwidth", type=float)
    e.add_argument("--function", choices=("log-ridge", "ridge-cosine"), help="ridge profile for rotation-cv")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--jobs", type=_positive_int, default=1)
    e.add_argument("--timing", choices=("off", "wall"), default="off",
                   help="'wall' records per-task seconds; 'off' writes zeros so reruns are byte-identical")
    e.add_argument("--output", required=True, help="CSV path, or a directory (existing, or given with a trailing slash)")
    e.set_defaults(run=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "command", None) == "rotate":
        bad = [r for r in (args.rotation or ()) if r not in rotation.ROTATIONS]
        if bad:
            ap.error(f"unknown rotation {bad}; expected some of {rotation.ROTATIONS}")
        if args.folds < 2:
            ap.error("--folds must be >= 2")
    try:
        return args.run(args)
    except UsageError as e:
        print(f"treegrad {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        print(f"treegrad {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
