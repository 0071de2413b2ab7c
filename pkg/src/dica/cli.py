"""Command line experiment harness.

Usage::

    dica toy --seed 0 --out-dir runs/toy
    dica classify --reps 30 --out-dir runs/classify
    dica classify --grid m=1,2,5 --grid lambda=0.01,0.1 --reps 5 --out-dir runs/cv
    dica regress --dataset parkinsons_updrs.data --out-dir runs/updrs
    dica variance --dataset data.csv --out-dir runs/var
    dica gen toy --seed 3 --out-dir data/

Every command writes ``manifest.json`` (resolved configuration, seeds,
library versions, output files) next to its outputs. On failure the exit
status is 1 and stderr carries one JSON line ``{"error": <code>, ...}``.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .domains import (
    DomainDataset,
    distributional_variance,
    coefficient_matrix,
    domain_gram,
    read_dataset_csv,
    write_dataset_csv,
)
from .errors import ConfigError, DicaError, ParseError
from .downstream import (
    METHODS,
    PipelineConfig,
    cross_validate,
    evaluate_pipeline,
    expand_grid,
    fit_method,
    heldout_dispersion,
    linear_least_squares,
    metrics,
    run_pipeline,
)
from .kernels import KernelSpec, pooled_gram
from .synthdata import SynthClassConfig, SynthToyConfig, make_classification, make_rng, make_toy
from .transform import MODES, FitConfig, bound_terms, fit

KERNELS = ("pooling", "distributional")
GRID_AXES = {
    "m": ("m", int),
    "epsilon": ("epsilon", float),
    "lambda": ("lam", float),
    "sigma2": ("sigma_x", float),
    "sigma-x": ("sigma_x", float),
    "sigma_x": ("sigma_x", float),
    "sigma1": ("sigma1", float),
    "eta": ("eta", float),
}
UCI_SUBJECT = "subject#"
UCI_TARGETS = ("motor_UPDRS", "total_UPDRS")
UCI_EXCLUDED = ("age", "sex", "test_time")


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_rows(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _versions():
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "artifact": own}


def _summary(values) -> dict:
    v = np.asarray(values, dtype=float)
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "std": std, "n": int(v.size)}


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, args, seeds, outputs, started, extra=None) -> Path:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    body = {
        "command": args.command,
        "argv": sys.argv[1:],
        "config": config,
        "seeds": list(seeds),
        "rng": "numpy.random.Generator(PCG64(seed))",
        "versions": _versions(),
        "outputs": [p.name for p in outputs],
        "wall_clock_s": time.time() - started,
    }
    if extra:
        body.update(extra)
    return write_json(out / "manifest.json", body)


def parse_grid(items):
    """``["m=1,2", "lambda=0.1"]`` -> ``{"m": [1, 2], "lam": [0.1]}`` (PipelineConfig field names)."""
    axes = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"grid axis {item!r} must look like name=v1,v2,...")
        name, values = item.split("=", 1)
        name = name.strip()
        if name not in GRID_AXES:
            raise ConfigError(f"unknown grid axis {name!r}; expected one of {sorted(GRID_AXES)}")
        field_name, conv = GRID_AXES[name]
        try:
            vals = [conv(v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"grid axis {name}: {exc}") from None
        if not vals:
            raise ConfigError(f"grid axis {name} has no values")
        axes[field_name] = vals
    return axes


def _methods(arg, allowed):
    if arg is None:
        return list(allowed)
    out = [m.strip() for m in arg.split(",") if m.strip()]
    bad = [m for m in out if m not in allowed]
    if bad or not out:
        raise ConfigError(f"unknown method(s) {bad}; expected a comma list from {allowed}")
    return out


# ---------------------------------------------------------------------------
# toy
# ---------------------------------------------------------------------------

def cmd_toy(args) -> int:
    started = time.time()
    if args.n_test_domains < 3:
        raise ConfigError("the toy command needs at least 3 held-out domains")
    modes = _methods(args.mode, MODES)
    out = _out_dir(args)
    cfg = SynthToyConfig(n_domains=args.n_domains + args.n_test_domains, seed=args.seed)
    data = make_toy(cfg)
    train = data.subset(range(args.n_domains))
    test = data.subset(range(args.n_domains, data.n_domains))
    kx = KernelSpec("gaussian-rbf", args.sigma_x)
    ky = KernelSpec("gaussian-rbf", args.sigma_y)
    outputs = [write_dataset_csv(train, out / "toy_train.csv"), write_dataset_csv(test, out / "toy_test.csv")]
    report = {"methods": {}, "n_train": train.n, "train_sizes": list(train.sizes), "test_sizes": list(test.sizes)}
    for mode in modes:
        t = fit(train, kx, ky, FitConfig(mode=mode, m=args.m, epsilon=args.epsilon, lam=args.lam))
        rows = []
        f_tr = t.train_features()
        _, ytr, ids = train.flatten()
        for a in range(train.n):
            rows.append(["train", train.ids[ids[a]], *f_tr[a], ytr[a]])
        for did, dom in zip(test.ids, test.domains):
            f_te = t.features(dom.inputs)
            for a in range(dom.n):
                rows.append(["test", did, *f_te[a], dom.outputs[a]])
        header = ["split", "domain_id"] + [f"e{j + 1}" for j in range(t.m)] + ["y"]
        outputs.append(write_rows(out / f"toy_{mode}.csv", header, rows))
        dist, comp = bound_terms(t)
        report["methods"][mode] = {
            "gamma": t.gamma,
            "effective_rank": t.effective_rank,
            "max_imag": t.max_imag,
            "bound": {"dist_term": dist, "complexity_term": comp},
            "heldout_dispersion": heldout_dispersion(t, test, dims=min(2, t.m)),
        }
    report["wall_clock_s"] = time.time() - started
    outputs.append(write_json(out / "toy_report.json", report))
    _manifest(out, args, [args.seed], outputs, started)
    print(json.dumps({m: round(r["heldout_dispersion"], 6) for m, r in report["methods"].items()}))
    return 0


# ---------------------------------------------------------------------------
# classify / regress shared machinery
# ---------------------------------------------------------------------------

def _base_config(args, **extra) -> PipelineConfig:
    return PipelineConfig(
        m=args.m,
        epsilon=args.epsilon,
        lam=args.lam,
        sigma_x=args.sigma_x,
        sigma1=args.sigma1,
        eta=args.eta,
        **extra,
    )


def _evaluate_methods(train, test, base, methods, task, axes, n_folds):
    """Scores, predictions, chosen configs and bound terms for every method x kernel.

    With a grid, each (method, kernel) pair is tuned by domain-wise CV on
    ``train`` only; the held-out domains are touched after tuning.
    """
    _, yte, _ = test.flatten()
    maximize = task != "regression"
    results = {}
    for method in methods:
        shared = None
        for kernel in KERNELS:
            cfg = replace(base, method=method, kernel=kernel)
            cv = None
            if axes:
                grid = expand_grid(cfg, axes)
                cv = cross_validate(train, grid, lambda tr, va, c: evaluate_pipeline(tr, va, c, task), n_folds, maximize)
                cfg = cv.best
                t = None
            else:
                if shared is None:
                    shared = fit_method(train, cfg, task)
                t = shared
            res = run_pipeline(train, test, cfg, task, transform=t)
            results[(method, kernel)] = {
                "score": metrics(yte, res.predictions, task),
                "predictions": res.predictions,
                "scores": res.scores,
                "config": cfg.to_dict(),
                "sigma1": res.sigma1,
                "bound": None if res.bound is None else {"dist_term": res.bound[0], "complexity_term": res.bound[1]},
                "cv_mean_scores": None if cv is None else cv.mean_scores,
            }
    return results


def _aggregate(per_rep, methods, key="score"):
    table = {}
    for kernel in KERNELS:
        table[kernel] = {}
        for method in methods:
            vals = [r[(method, kernel)][key] for r in per_rep]
            table[kernel][method] = _summary(vals)
    return table


def _bounds(per_rep, methods):
    out = {}
    for method in methods:
        b = [r[(method, "pooling")]["bound"] for r in per_rep if r[(method, "pooling")]["bound"] is not None]
        if b:
            out[method] = {
                "dist_term": _summary([x["dist_term"] for x in b]),
                "complexity_term": _summary([x["complexity_term"] for x in b]),
            }
    return out


def _split_domains(data: DomainDataset, n_test: int, rng):
    if n_test < 1 or n_test > data.n_domains - 2:
        raise ConfigError(f"need 1 <= test domains <= N - 2, got {n_test} of {data.n_domains}")
    perm = rng.permutation(data.n_domains)
    train_idx = sorted(perm[: data.n_domains - n_test].tolist())
    test_idx = sorted(perm[data.n_domains - n_test:].tolist())
    return data.subset(train_idx), data.subset(test_idx)


def _subsample(data: DomainDataset, per_domain, rng) -> DomainDataset:
    if per_domain is None:
        return data
    doms = []
    for d in data.domains:
        if d.n > per_domain:
            idx = np.sort(rng.choice(d.n, size=per_domain, replace=False))
            doms.append((d.inputs[idx], None if d.outputs is None else d.outputs[idx]))
        else:
            doms.append((d.inputs, d.outputs))
    return DomainDataset(tuple(doms), data.ids)


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def _classification_split(args, rep_seed):
    if args.dataset:
        data = read_dataset_csv(args.dataset)
        if not data.has_outputs:
            raise ConfigError(f"{args.dataset}: classification needs a y column")
        rng = make_rng(rep_seed)
        train, test = _split_domains(data, args.n_test_domains, rng)
        return _subsample(train, args.per_domain_n, rng), _subsample(test, args.per_domain_n, rng)
    cfg = SynthClassConfig(
        n_domains=args.n_domains,
        n_test_domains=args.n_test_domains,
        per_domain_n=args.per_domain_n,
        class_separation=args.class_separation,
        domain_shift_scale=args.shift_scale,
        nuisance_ratio=args.nuisance_ratio,
        seed=rep_seed,
    )
    return make_classification(cfg)


def cmd_classify(args) -> int:
    started = time.time()
    methods = _methods(args.mode, METHODS)
    axes = parse_grid(args.grid)
    out = _out_dir(args)
    base = _base_config(args)
    seeds = [args.seed + r for r in range(args.reps)]
    per_rep, pred_rows, hyper = [], [], []
    for rep, seed in enumerate(seeds):
        train, test = _classification_split(args, seed)
        if train.n_domains < 2:
            raise ConfigError("classification needs at least 2 training domains")
        labels = np.unique(np.concatenate([d.outputs for d in train.domains]))
        if labels.size != 2:
            raise ConfigError(f"binary labels required, training domains carry {labels.size} classes")
        res = _evaluate_methods(train, test, base, methods, "binary-classification", axes, args.folds)
        per_rep.append(res)
        _, yte, ids = test.flatten()
        for (method, kernel), r in res.items():
            hyper.append({"rep": rep, "seed": seed, "method": method, "kernel": kernel, "config": r["config"], "sigma1": r["sigma1"]})
            for a in range(yte.size):
                pred_rows.append([rep, seed, method, kernel, test.ids[ids[a]], yte[a], r["predictions"][a], r["scores"][a]])
    outputs = [
        write_rows(out / "predictions.csv", ["rep", "seed", "method", "kernel", "domain_id", "y_true", "y_pred", "score"], pred_rows)
    ]
    report = {
        "task": "binary-classification",
        "metric": "accuracy",
        "table": _aggregate(per_rep, methods),
        "bound": _bounds(per_rep, methods),
        "hyperparameters": hyper,
        "seeds": seeds,
        "wall_clock_s": time.time() - started,
    }
    outputs.append(write_json(out / "classify_report.json", report))
    _manifest(out, args, seeds, outputs, started)
    _print_table(report["table"], methods, "accuracy")
    return 0


def _print_table(table, methods, label):
    print(f"{'method':<8} " + " ".join(f"{k:>22}" for k in KERNELS) + f"   ({label}, mean +- std)")
    for m in methods:
        cells = [f"{table[k][m]['mean']:.4f} +- {table[k][m]['std']:.4f}".rjust(22) for k in KERNELS]
        print(f"{m:<8} " + " ".join(cells))


# ---------------------------------------------------------------------------
# regress
# ---------------------------------------------------------------------------

def read_uci_telemonitoring(path):
    """Parse the UCI Parkinson's telemonitoring CSV, grouped by subject.

    Features are every column except the subject id, the two targets, age,
    sex and test_time. Returns ``(inputs, targets, subject_ids,
    feature_names)`` with one ``(n_i, d)`` input and one ``(n_i, 2)`` target
    array (motor, total) per subject, subjects in ascending id order.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file", row=1) from None
        missing = [c for c in (UCI_SUBJECT,) + UCI_TARGETS if c not in header]
        if missing:
            raise ParseError(f"{path}: missing column(s) {missing}", row=1)
        subj = header.index(UCI_SUBJECT)
        tcols = [header.index(t) for t in UCI_TARGETS]
        skip = {subj, *tcols} | {header.index(c) for c in UCI_EXCLUDED if c in header}
        fcols = [i for i in range(len(header)) if i not in skip]
        groups = {}
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}", row=rownum)
            try:
                sid = int(float(row[subj]))
                feats = [float(row[i]) for i in fcols]
                targets = [float(row[i]) for i in tcols]
            except ValueError as exc:
                raise ParseError(f"{path}: row {rownum}: {exc}", row=rownum) from None
            groups.setdefault(sid, ([], []))
            groups[sid][0].append(feats)
            groups[sid][1].append(targets)
    if not groups:
        raise ParseError(f"{path}: no data rows", row=2)
    ids = sorted(groups)
    xs = [np.array(groups[i][0]) for i in ids]
    ys = [np.array(groups[i][1]) for i in ids]
    return xs, ys, ids, [header[i] for i in fcols]


def _regression_data(args, rep_seed):
    """``(per_target_train, per_target_test, target_names)`` for one repetition."""
    if args.dataset:
        xs, ys, ids, _ = read_uci_telemonitoring(args.dataset)
        full = DomainDataset.from_arrays(xs, [np.arange(x.shape[0], dtype=float) for x in xs], ids)
        rng = make_rng(rep_seed)
        n_test = len(ids) - args.n_train_domains
        tr_rows, te_rows = _split_domains(full, n_test, rng)
        tr_rows = _subsample(tr_rows, args.per_domain_n, rng)
        te_rows = _subsample(te_rows, args.per_domain_n, rng)
        pos = {sid: k for k, sid in enumerate(ids)}

        def pick(rows, j):
            return DomainDataset.from_arrays(
                [d.inputs for d in rows.domains],
                [ys[pos[sid]][d.outputs.astype(int), j] for sid, d in zip(rows.ids, rows.domains)],
                rows.ids,
            )

        names = list(UCI_TARGETS)
        return [pick(tr_rows, j) for j in range(2)], [pick(te_rows, j) for j in range(2)], names
    cfg = SynthToyConfig(n_domains=args.n_domains + args.n_test_domains, seed=rep_seed, poisson_mean=args.poisson_mean)
    data = make_toy(cfg)
    train = data.subset(range(args.n_domains))
    test = data.subset(range(args.n_domains, data.n_domains))
    return [train], [test], ["y"]


def median_target_bandwidth(trains) -> float:
    """Median of the pooled training target values; falls back to the median of ``|y|``."""
    y = np.concatenate([d.outputs for t in trains for d in t.domains])
    med = float(np.median(y))
    if med > 0:
        return med
    med = float(np.median(np.abs(y)))
    return med if med > 0 else 1.0


def cmd_regress(args) -> int:
    started = time.time()
    methods = _methods(args.mode, METHODS)
    axes = parse_grid(args.grid)
    out = _out_dir(args)
    seeds = [args.seed + r for r in range(args.reps)]
    per_target = {}
    lls = {}
    pred_rows, hyper, sigma3s = [], [], []
    names = None
    for rep, seed in enumerate(seeds):
        trains, tests, names = _regression_data(args, seed)
        if trains[0].n_domains < 2:
            raise ConfigError("regression needs at least 2 training domains")
        sigma3 = args.sigma3 if args.sigma3 is not None else median_target_bandwidth(trains)
        sigma3s.append(sigma3)
        base = _base_config(args, sigma_y=sigma3)
        for name, train, test in zip(names, trains, tests):
            _, yte, ids = test.flatten()
            res = _evaluate_methods(train, test, base, methods, "regression", axes, args.folds)
            per_target.setdefault(name, []).append(res)
            lls_pred = linear_least_squares(train, test)
            lls.setdefault(name, []).append(metrics(yte, lls_pred, "regression"))
            for a in range(yte.size):
                pred_rows.append([rep, seed, name, "lls", "none", test.ids[ids[a]], yte[a], lls_pred[a]])
            for (method, kernel), r in res.items():
                hyper.append({"rep": rep, "seed": seed, "target": name, "method": method, "kernel": kernel, "config": r["config"], "sigma1": r["sigma1"]})
                for a in range(yte.size):
                    pred_rows.append([rep, seed, name, method, kernel, test.ids[ids[a]], yte[a], r["predictions"][a]])
    outputs = [
        write_rows(out / "predictions.csv", ["rep", "seed", "target", "method", "kernel", "domain_id", "y_true", "y_pred"], pred_rows)
    ]
    table = {}
    for kernel in KERNELS:
        table[kernel] = {}
        for method in methods:
            table[kernel][method] = {n: _summary([r[(method, kernel)]["score"] for r in per_target[n]]) for n in names}
    report = {
        "task": "regression",
        "metric": "rmse",
        "targets": names,
        "lls": {n: _summary(lls[n]) for n in names},
        "table": table,
        "bound": {n: _bounds(per_target[n], methods) for n in names},
        "sigma3": sigma3s,
        "hyperparameters": hyper,
        "seeds": seeds,
        "wall_clock_s": time.time() - started,
    }
    outputs.append(write_json(out / "regress_report.json", report))
    _manifest(out, args, seeds, outputs, started)
    print("RMSE, mean +- std over repetitions")
    print(f"{'':<14}" + "".join(f"{n:>24}" for n in names))
    print(f"{'LLS':<14}" + "".join(f"{report['lls'][n]['mean']:.4f} +- {report['lls'][n]['std']:.4f}".rjust(24) for n in names))
    for kernel in KERNELS:
        for method in methods:
            cells = [f"{table[kernel][method][n]['mean']:.4f} +- {table[kernel][method][n]['std']:.4f}".rjust(24) for n in names]
            print(f"{method + '/' + kernel[:4]:<14}" + "".join(cells))
    return 0


# ---------------------------------------------------------------------------
# variance and gen
# ---------------------------------------------------------------------------

def cmd_variance(args) -> int:
    started = time.time()
    out = _out_dir(args)
    data = read_dataset_csv(args.dataset)
    x, _, _ = data.flatten()
    kernel = KernelSpec(args.kernel, args.sigma_x if args.kernel == "gaussian-rbf" else None).resolve(x)
    g = pooled_gram(kernel, data)
    value = distributional_variance(g, coefficient_matrix(data.sizes))
    dg = domain_gram(g).values
    outputs = [
        write_rows(out / "domain_gram.csv", ["domain_id"] + [str(i) for i in data.ids], [[i, *row] for i, row in zip(data.ids, dg)]),
        write_json(out / "variance.json", {"variance": value, "kernel": kernel.to_dict(), "domain_ids": list(data.ids), "sizes": list(data.sizes)}),
    ]
    _manifest(out, args, [args.seed], outputs, started)
    print(f"{value:.17g}")
    return 0


def cmd_gen(args) -> int:
    started = time.time()
    out = _out_dir(args)
    if args.kind == "toy":
        data = make_toy(SynthToyConfig(n_domains=args.n_domains, seed=args.seed))
        outputs = [write_dataset_csv(data, out / "toy.csv")]
    else:
        train, test = make_classification(
            SynthClassConfig(
                n_domains=args.n_domains,
                n_test_domains=args.n_test_domains,
                per_domain_n=args.per_domain_n,
                domain_shift_scale=args.shift_scale,
                seed=args.seed,
            )
        )
        data = train.concat(test) if test is not None else train
        outputs = [write_dataset_csv(data, out / "classification.csv")]
    _manifest(out, args, [args.seed], outputs, started)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p, reps=True):
    p.add_argument("--seed", type=int, default=0, help="base seed; repetition r uses seed + r")
    p.add_argument("--out-dir", default="runs", help="directory for CSV/JSON outputs")
    if reps:
        p.add_argument("--reps", type=int, default=30, help="number of seeded repetitions")


def _fit_flags(p, lam, sigma_default=None):
    p.add_argument("--mode", default=None, help="comma list of methods (default: all)")
    p.add_argument("--m", type=int, default=2, help="subspace dimension")
    p.add_argument("--epsilon", type=float, default=None, help="output-kernel regularizer (default by output kernel)")
    p.add_argument("--lambda", dest="lam", type=float, default=lam, help="eigenproblem stabilizer")
    p.add_argument("--sigma-x", type=float, default=sigma_default, help="input RBF bandwidth (default: median heuristic)")


def _downstream_flags(p):
    p.add_argument("--sigma1", type=float, default=None, help="distribution-kernel bandwidth (default: median MMD)")
    p.add_argument("--eta", type=float, default=0.1, help="ridge regularizer")
    p.add_argument("--grid", action="append", default=None, metavar="AXIS=V1,V2", help="CV grid axis (repeatable)")
    p.add_argument("--folds", type=int, default=10, help="domain-wise CV folds")
    p.add_argument("--dataset", default=None, help="input CSV instead of the synthetic generator")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dica", description="Domain-invariant component analysis experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", help="fit all four modes on the synthetic toy domains and write 2-D projections")
    _common(p, reps=False)
    _fit_flags(p, lam=0.1, sigma_default=1.0)
    p.set_defaults(epsilon=1e-4)
    p.add_argument("--sigma-y", type=float, default=1.0, help="output RBF bandwidth")
    p.add_argument("--n-domains", type=int, default=10, help="training domains")
    p.add_argument("--n-test-domains", type=int, default=5, help="held-out domains (>= 3)")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("classify", help="pooling vs distributional ridge classification")
    _common(p)
    _fit_flags(p, lam=0.1)
    _downstream_flags(p)
    p.add_argument("--n-domains", type=int, default=10, help="synthetic training domains")
    p.add_argument("--n-test-domains", type=int, default=20, help="held-out domains")
    p.add_argument("--per-domain-n", type=int, default=100, help="points per domain (subsample size for CSV input)")
    p.add_argument("--class-separation", type=float, default=3.0)
    p.add_argument("--shift-scale", type=float, default=1.0, help="per-domain shift scale")
    p.add_argument("--nuisance-ratio", type=float, default=3.0, help="off-class-axis shift relative to the class axis")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("regress", help="pooling vs distributional ridge regression (UCI telemonitoring layout or toy)")
    _common(p)
    _fit_flags(p, lam=0.1)
    _downstream_flags(p)
    p.add_argument("--sigma3", type=float, default=None, help="output RBF bandwidth (default: median of training targets)")
    p.add_argument("--n-train-domains", type=int, default=30, help="training subjects for CSV input")
    p.add_argument("--per-domain-n", type=int, default=50, help="points per subject for CSV input")
    p.add_argument("--n-domains", type=int, default=10, help="synthetic training domains")
    p.add_argument("--n-test-domains", type=int, default=5, help="synthetic held-out domains")
    p.add_argument("--poisson-mean", type=float, default=50.0, help="synthetic mean domain size")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("variance", help="empirical distributional variance of a dataset CSV")
    _common(p, reps=False)
    p.add_argument("--dataset", required=True)
    p.add_argument("--kernel", default="gaussian-rbf", choices=("gaussian-rbf", "linear"))
    p.add_argument("--sigma-x", type=float, default=None)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("gen", help="write a synthetic dataset CSV")
    _common(p, reps=False)
    p.add_argument("kind", choices=("toy", "classify"))
    p.add_argument("--n-domains", type=int, default=10)
    p.add_argument("--n-test-domains", type=int, default=5)
    p.add_argument("--per-domain-n", type=int, default=200)
    p.add_argument("--shift-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DicaError as exc:
        info = {"error": exc.code, "message": str(exc)}
        if getattr(exc, "row", None) is not None:
            info["row"] = exc.row
        print(json.dumps(info), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io_error", "message": str(exc), "path": getattr(exc, "filename", None)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
