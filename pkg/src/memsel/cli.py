"""Command-line entry point: ``memsel <verb> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 grid finished
with failed cells.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .dataset import DatasetError, Schema, Task, load_csv, make_task_view
from .evalkit import FoldError, Selection, cross_validate, default_selection_params
from .featsel import METHODS, rank_and_select, score_features
from .models import DEFAULT_CLASSIFIERS, ClassifierSpec, load_model, save_model, train
from .runner import ExperimentConfig, load_bundle, render_table, run_experiments

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CELLS = 0, 2, 3, 4


class ConfigError(Exception):
    pass


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _names(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _schema(args) -> Schema:
    if getattr(args, "schema", None):
        try:
            return Schema.from_file(args.schema)
        except (OSError, json.JSONDecodeError, DatasetError, TypeError) as exc:
            raise ConfigError(f"bad schema file {args.schema}: {exc}") from exc
    return Schema()


def _load(args):
    return load_csv(args.data, _schema(args))


def _view(args):
    try:
        task = Task.parse(args.task)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return make_task_view(_load(args), task, allow_any_k=getattr(args, "allow_any_k", False))


def _selection(args):
    if args.select in (None, "none"):
        if args.fraction not in (None, 1.0):
            raise ConfigError("--fraction needs --select chi2|anova|mi")
        return None
    frac = 0.5 if args.fraction is None else args.fraction
    try:
        return Selection(args.select, frac, _method_params(args, args.select))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _method_params(args, method):
    return {"min_shift": True} if method == "chi2" and getattr(args, "min_shift", False) else {}


def _scores(args, method, view):
    params = {**default_selection_params(method, args.seed), **_method_params(args, method)}
    try:
        return score_features(method, view.X, view.labels, **params)
    except ValueError as exc:
        raise DatasetError(str(exc)) from exc


def _spec(args):
    try:
        return ClassifierSpec(args.classifier, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_load_check(args):
    ds = _load(args)
    out = {
        "rows": ds.n_rows,
        "features": ds.n_features,
        "feature_names": list(ds.feature_names),
        "class_counts": ds.counts("class"),
        "type_counts": ds.counts("type"),
        "family_counts": ds.family_counts_by_type(),
        "sha256": ds.source_hash,
    }
    print(json.dumps(out, indent=1))
    return EXIT_OK


def cmd_score(args):
    view = _view(args)
    if args.select not in METHODS:
        raise ConfigError("--select must be chi2, anova or mi")
    scores = _scores(args, args.select, view)
    if args.out:
        scores.to_csv(args.out, view.feature_names)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["feature_name", "method", "score"])
        for name, s in zip(view.feature_names, scores.scores):
            w.writerow([name, scores.method, repr(float(s))])
    return EXIT_OK


def cmd_select(args):
    view = _view(args)
    sel = _selection(args)
    if sel is None:
        raise ConfigError("select needs --select chi2|anova|mi")
    prof = rank_and_select(_scores(args, sel.method, view), sel.fraction)
    out = {
        "method": sel.method,
        "fraction": sel.fraction,
        "k": prof.k,
        "kept_indices": prof.kept_indices.tolist(),
        "kept_features": [view.feature_names[i] for i in prof.kept_indices],
        "ranking": [view.feature_names[i] for i in prof.ranking],
    }
    text = json.dumps(out, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_train(args):
    if not args.out:
        raise ConfigError("train needs --out <model.npz>")
    view = _view(args)
    spec = _spec(args)
    sel = _selection(args)
    cols = np.arange(len(view.feature_names))
    if sel is not None:
        cols = rank_and_select(_scores(args, sel.method, view), sel.fraction).kept_indices
    model = train(spec, view.X[:, cols], view.labels, n_classes=view.n_classes)
    save_model(model, args.out, extra={
        "task": str(view.task),
        "class_names": list(view.class_names),
        "feature_names": [view.feature_names[i] for i in cols],
        "selection": None if sel is None else {"method": sel.method, "fraction": sel.fraction},
    })
    print(f"saved {spec.canonical()} on {view.n_rows} rows x {len(cols)} features to {args.out}")
    return EXIT_OK


def cmd_predict(args):
    if not args.model:
        raise ConfigError("predict needs --model")
    try:
        model, extra = load_model(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read model {args.model}: {exc}") from exc
    ds = _load(args)
    index = {n: i for i, n in enumerate(ds.feature_names)}
    missing = [n for n in extra["feature_names"] if n not in index]
    if missing:
        raise DatasetError(f"dataset lacks feature(s) the model needs: {missing}")
    X = ds.features[:, [index[n] for n in extra["feature_names"]]]
    pred = model.predict(X)
    names = extra["class_names"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "predicted"])
        for i, p in enumerate(pred):
            w.writerow([i, names[p]])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_cv(args):
    view = _view(args)
    report = cross_validate(view, _spec(args), _selection(args), k=args.folds, seed=args.seed, mode=args.mode)
    if args.out:
        Path(args.out).write_text(report.to_json(timings=True) + "\n")
    print(f"{view.task}  {report.provenance['classifier']}  selection={report.provenance['selection']}")
    for f in report.folds:
        print(f"  fold {f.fold}: macro-F1 {f.macro_f1:.4f}  acc {f.accuracy:.4f}")
    print(f"  mean : macro-F1 {report.macro_f1_mean:.4f} ± {report.macro_f1_std:.4f}  "
          f"acc {report.accuracy_mean:.4f} ± {report.accuracy_std:.4f}")
    return EXIT_OK


def cmd_grid(args):
    try:
        methods = _names(args.select) if args.select else ("chi2", "anova", "mi")
        methods = tuple(m for m in methods if m != "none")
        cfg = ExperimentConfig(
            data=args.data,
            schema=_schema(args),
            tasks=_names(args.task) if args.task else ExperimentConfig.tasks,
            classifiers=_names(args.classifier) if args.classifier else DEFAULT_CLASSIFIERS,
            methods=methods,
            fractions=_floats(args.fraction) if args.fraction else (0.25, 0.5, 1.0),
            k=args.folds,
            seed=args.seed,
            mode=args.mode,
            chi2_min_shift=args.min_shift,
            out=args.out or "results",
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    bundle = run_experiments(cfg)
    for task in cfg.tasks:
        print(render_table(bundle, task))
    failed = bundle.failures()
    print(f"bundle {bundle.bundle_hash[:16]}  cells: {len(bundle.manifest['cells'])}  failed: {len(failed)}")
    return EXIT_CELLS if failed else EXIT_OK


def cmd_render(args):
    try:
        bundle = load_bundle(args.out or "results")
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    tasks = _names(args.task) if args.task else bundle.tasks()
    for task in tasks:
        print(render_table(bundle, task, args.format, args.aggregate))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memsel", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, task=True, min_shift=True):
        sp.add_argument("--data", required=True, help="features CSV")
        sp.add_argument("--schema", help="JSON schema file (column names, delimiter, aliases)")
        if task:
            sp.add_argument("--task", default="binary", help="binary | type3 | family5:<Trojan|Spyware|Ransomware>")
            sp.add_argument("--allow-any-k", action="store_true", help="accept a family view without exactly 5 classes")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")
        if min_shift:
            sp.add_argument("--min-shift", action="store_true",
                            help="chi2: subtract each column's minimum first (for negative features)")

    sp = sub.add_parser("load-check", help="validate a CSV and print counts")
    common(sp, task=False, min_shift=False)
    sp.set_defaults(func=cmd_load_check)

    sp = sub.add_parser("score", help="per-feature filter scores")
    common(sp)
    sp.add_argument("--select", choices=METHODS, default="mi")
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("select", help="top-fraction feature subset")
    common(sp)
    sp.add_argument("--select", choices=METHODS, default="mi")
    sp.add_argument("--fraction", type=float, default=0.5)
    sp.set_defaults(func=cmd_select)

    for verb, func in (("train", cmd_train), ("cv", cmd_cv)):
        sp = sub.add_parser(verb, help="fit a model on the whole view" if verb == "train" else "cross-validate")
        common(sp)
        sp.add_argument("--classifier", default="rf")
        sp.add_argument("--select", choices=METHODS + ("none",), default="none")
        sp.add_argument("--fraction", type=float)
        if verb == "cv":
            sp.add_argument("--folds", type=int, default=5)
            sp.add_argument("--mode", choices=("perfold", "global"), default="perfold")
        sp.set_defaults(func=func)

    sp = sub.add_parser("predict", help="apply a saved model")
    common(sp, task=False, min_shift=False)
    sp.add_argument("--model", required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("grid", help="run the task x classifier x selection grid")
    common(sp, task=False)
    sp.add_argument("--task", help="comma-separated tasks (default: all five)")
    sp.add_argument("--classifier", help="comma-separated classifiers (default: the six)")
    sp.add_argument("--select", help="comma-separated methods (default: chi2,anova,mi)")
    sp.add_argument("--fraction", help="comma-separated fractions (default: 0.25,0.5,1.0)")
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--mode", choices=("perfold", "global"), default="perfold")
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("render", help="print tables of a finished grid")
    sp.add_argument("--out", help="bundle directory (default: results)")
    sp.add_argument("--task", help="comma-separated tasks (default: all in the bundle)")
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp.add_argument("--aggregate", choices=("mean", "pooled"), default="mean")
    sp.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FoldError, ValueError) as exc:
        # the data cannot be fed to the requested pipeline (e.g. negative values for MNB)
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
