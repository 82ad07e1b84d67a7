"""Command-line pipeline from an event export to scored portfolios.

Subcommands run one stage each and write their outputs next to a
resolved-config snapshot.

Errors print a single JSON line to stderr, ``{"error": kind, "message": ...}``,
and exit with 1 (usage), 2 (data) or 3 (internal).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from datetime import date

import numpy as np

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

logger = logging.getLogger("startup_success")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# helpers


def _config(args) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if getattr(args, "config", None):
        if not os.path.isfile(args.config):
            raise UsageError(f"config file not found: {args.config}")
        cp.read(args.config, encoding="utf-8")
    return cp


def _section(cp, name) -> dict:
    return dict(cp[name]) if cp.has_section(name) else {}


def _literal(text):
    try:
        return json.loads(text)
    except (json.JSONDecodeError, TypeError):
        return text


def _model_params(args, cp, family) -> dict:
    params = {k: _literal(v) for k, v in _section(cp, "params").items()}
    params.update({k: _literal(v) for k, v in _section(cp, f"params.{family}").items()})
    for item in args.param or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = _literal(v.strip())
    return params


def _fresh(path, force):
    if os.path.exists(path) and not force:
        raise UsageError(f"refusing to overwrite existing output {path} (pass --force)")
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return path


def _fresh_dir(path, force, names=()):
    os.makedirs(path, exist_ok=True)
    for n in names:
        _fresh(os.path.join(path, n), force)
    return path


def _snapshot(path, args, extra=None):
    d = {"command": args.command, "version": __version__}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "force"):
            continue
        d[k] = v
    if extra:
        d.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(d, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _stem(path, suffix):
    base = path[:-len(".csv")] if path.endswith(".csv") else path
    base = base[:-len(".json")] if base.endswith(".json") else base
    return base + suffix


def _load_store(path):
    from .ingest import filter_companies, load_export

    if not os.path.isdir(path):
        raise FileNotFoundError(f"data directory not found: {path}")
    return filter_companies(load_export(path))


def _date(text) -> date:
    from .ingest import parse_date

    try:
        d = parse_date(text)
    except ValueError as exc:
        raise UsageError(f"bad date {text!r}: {exc}") from None
    if d is None:
        raise UsageError("empty date")
    return d


def _window_selection(text, available=None):
    """'0-11', '3', '0,2,5' -> sorted list of ints."""
    if text is None:
        return None
    out = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                a, b = part.split("-", 1)
                out.update(range(int(a), int(b) + 1))
            else:
                out.add(int(part))
        except ValueError:
            raise UsageError(f"bad window selection {text!r}") from None
    return sorted(out)


def _features_for(args, seed_split=None):
    from .features import read_feature_csv

    if not os.path.isfile(args.features):
        raise FileNotFoundError(f"feature file not found: {args.features}")
    ds = read_feature_csv(args.features)
    sel = _window_selection(getattr(args, "windows", None))
    if sel is not None:
        ds = ds.subset(np.isin(ds.window_index, sel))
    split = getattr(args, "split", "all")
    if split != "all":
        from .models import split_rows

        tr, te = split_rows(len(ds), args.ratio, args.split_seed)
        ds = ds.subset(tr if split == "train" else te)
    if len(ds) == 0:
        raise ValueError("no rows selected from the feature file")
    return ds


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    from .synth import SynthConfig, emit_export, generate

    cp = _config(args)
    items = _section(cp, "synth")
    if args.seed is not None:
        items["seed"] = str(args.seed)
    if args.n_companies is not None:
        items["n_companies"] = str(args.n_companies)
    if args.informative:
        items["informative_missingness"] = "true"
    cfg = SynthConfig.from_flat(items)
    _fresh_dir(args.out, args.force, ["organizations.csv"])
    store = generate(cfg)
    emit_export(store, args.out)
    _snapshot(os.path.join(args.out, "run.json"), args, {"synth": cfg.to_dict()})
    print(json.dumps({"out": args.out, **store.counts()}, sort_keys=True))


def cmd_ingest(args):
    from .ingest import interval_table_csv, round_interval_stats

    store = _load_store(args.data)
    intervals = args.intervals or _stem(args.report, ".intervals.csv")
    _fresh(args.report, args.force)
    _fresh(intervals, args.force)
    rows = round_interval_stats(store, args.horizon)
    interval_table_csv(rows, intervals)
    report = {"load": store.report.get("load"), "filter": store.report.get("filter"),
              "counts": store.counts()}
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _snapshot(_stem(args.report, ".run.json"), args)
    print(json.dumps(store.counts(), sort_keys=True))


def cmd_windows(args):
    from .features import write_samples_csv
    from .windows import (build_samples, label_distribution, window_schedule,
                          write_label_distribution)

    store = _load_store(args.data)
    schedule = window_schedule()
    sel = _window_selection(args.windows)
    if sel is not None:
        bad = [w for w in sel if not 0 <= w < len(schedule)]
        if bad:
            raise UsageError(f"window indices out of range: {bad}")
        schedule = [schedule[i] for i in sel]
    dist = args.distribution or _stem(args.out, ".distribution.csv")
    _fresh(args.out, args.force)
    _fresh(dist, args.force)
    samples = build_samples(store, schedule)
    write_samples_csv(samples, args.out)
    write_label_distribution(label_distribution(samples, schedule), dist)
    _snapshot(_stem(args.out, ".run.json"), args)
    print(json.dumps({"samples": len(samples), "positive": sum(s.label for s in samples)}))


def cmd_features(args):
    from .features import feature_matrix, read_samples_csv, write_feature_csv

    store = _load_store(args.data)
    if not os.path.isfile(args.samples):
        raise FileNotFoundError(f"sample file not found: {args.samples}")
    samples = read_samples_csv(args.samples)
    unknown = [s.company_id for s in samples if s.company_id not in store.companies]
    if unknown:
        raise ValueError(f"{len(unknown)} samples reference unknown companies, e.g. {unknown[0]}")
    _fresh(args.out, args.force)
    ds = feature_matrix(store, samples, args.basis)
    write_feature_csv(ds, args.out)
    _snapshot(_stem(args.out, ".run.json"), args)
    print(json.dumps({"rows": len(ds), "missing_cells": int(np.isnan(ds.X).sum())}))


def cmd_train(args):
    from .models import train_model

    cp = _config(args)
    params = _model_params(args, cp, args.model)
    ds = _features_for(args)
    _fresh(args.out, args.force)
    model = train_model(args.model, args.strategy, ds, params, seed=args.seed,
                        n_threads=args.threads)
    model.save(args.out)
    log = {"rows": len(ds), "positives": int(ds.y.sum()), "family": args.model,
           "strategy": args.strategy, "params": model.params,
           "trained_through": None if model.trained_through is None
           else model.trained_through.isoformat(),
           "history": list(getattr(model.estimator, "history", []) or [])}
    with open(_stem(args.out, ".log.json"), "w", encoding="utf-8") as fh:
        json.dump(log, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _snapshot(_stem(args.out, ".run.json"), args, {"resolved_params": model.params})
    print(json.dumps({"model": args.out, "rows": len(ds)}))


def cmd_eval(args):
    from .evaluate import metrics, roc, write_metrics_json, write_results_table, write_roc_csv
    from .learners import random_baseline
    from .models import TrainedModel

    ds = _features_for(args)
    _fresh_dir(args.out, args.force, ["results.csv"])
    table = []
    seen = set()
    for path in args.model:
        if not os.path.isfile(path):
            raise FileNotFoundError(f"model file not found: {path}")
        model = TrainedModel.load(path)
        stem = os.path.splitext(os.path.basename(path))[0]
        if stem in seen:
            raise UsageError(f"two models share the file name {stem}")
        seen.add(stem)
        p = model.predict_proba(ds.X)
        m = metrics(p, ds.y, args.threshold)
        extra = {"family": model.family, "strategy": model.strategy, "n": len(ds)}
        if 0 < ds.y.sum() < len(ds):
            curve = roc(p, ds.y)
            extra["auc"] = curve.auc
            write_roc_csv(curve, os.path.join(args.out, f"{stem}.roc.csv"))
        write_metrics_json(m, os.path.join(args.out, f"{stem}.metrics.json"), extra)
        table.append((model.name, model.strategy, m))
    if args.baseline:
        table.append(("Random Selection", "none", random_baseline(ds.y, args.seed).empirical))
    write_results_table(table, os.path.join(args.out, "results.csv"))
    _snapshot(os.path.join(args.out, "run.json"), args)
    print(json.dumps({"models": len(args.model), "rows": len(ds)}))


def cmd_windows_study(args):
    from .models import windows_study

    cp = _config(args)
    params = _model_params(args, cp, args.model)
    ds = _features_for(args)
    _fresh(args.out, args.force)
    rows = windows_study(ds, args.mode, args.model, args.strategy, params, args.seed,
                         args.ratio, args.threshold, args.threads)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_index", "t_s", "n_single", "n_multiple", "n_test", "f1_single",
                    "f1_multiple"])
        for r in rows:
            w.writerow([r["window_index"], r["t_s"], r["n_single"], r["n_multiple"], r["n_test"],
                        f"{r['f1_single']:.6f}", f"{r['f1_multiple']:.6f}"])
    _snapshot(_stem(args.out, ".run.json"), args)
    wins = sum(r["f1_multiple"] >= r["f1_single"] for r in rows)
    print(json.dumps({"windows": len(rows), "multiple_at_least_single": wins}))


def cmd_explain(args):
    from .explain import explain_report
    from .models import TrainedModel

    store = _load_store(args.data)
    if args.company not in store.companies:
        raise ValueError(f"unknown company {args.company}")
    model = TrainedModel.load(args.model)
    as_of = _date(args.asof)
    c = store.companies[args.company]
    if c.founded is None or c.founded >= as_of:
        raise ValueError(f"company {args.company} was not founded before {as_of.isoformat()}")
    _fresh_dir(args.out, args.force, ["attribution.csv"])
    try:
        rep = explain_report(store, args.company, as_of, model, args.basis)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    rep.write_csv(os.path.join(args.out, "attribution.csv"))
    rep.write_summary(os.path.join(args.out, "summary.json"))
    text = rep.text()
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    _snapshot(os.path.join(args.out, "run.json"), args)
    print(text)


def cmd_portfolio(args):
    from .models import TrainedModel
    from .portfolio import (LeakageError, STAGES, backtest, parse_stage_map,
                            write_portfolio_csv)
    from .windows import make_window

    cp = _config(args)
    stage_map = None
    if cp.has_section("stages"):
        stage_map = parse_stage_map(_section(cp, "stages"))
    store = _load_store(args.data)
    model = TrainedModel.load(args.model)
    as_of = _date(args.asof)
    window = make_window(-1, as_of)
    if args.k < 0:
        raise UsageError("--k must be non-negative")
    stages = [args.stage] if args.stage else []
    if args.stage and args.stage not in STAGES:
        raise UsageError(f"unknown stage {args.stage}")
    _fresh_dir(args.out, args.force, ["portfolio.csv"])
    try:
        res = backtest(store, model, window, args.k, stages=stages, stage_map=stage_map,
                       basis=args.basis)
    except LeakageError as exc:
        raise UsageError(str(exc)) from None
    if args.stage:
        port, curve = res.stages[args.stage]
    else:
        port, curve = res.portfolio, res.curve
    write_portfolio_csv(store, port, window, res.realized, os.path.join(args.out, "portfolio.csv"))
    curve.write_csv(os.path.join(args.out, "success_curve.csv"))
    _snapshot(os.path.join(args.out, "run.json"), args)
    hits = sum(res.realized[cid] for cid in port.company_ids)
    print(json.dumps({"k": port.k, "successes": int(hits), "pool": len(res.scored),
                      "base_rate": res.base_rate}))


def cmd_tune(args):
    from .models import SEARCH_SPACES, split_rows, tune_model

    cp = _config(args)
    if args.budget < 1:
        raise UsageError("--budget must be at least 1")
    ds = _features_for(args)
    tr, va = split_rows(len(ds), 1.0 - args.valid_ratio, args.seed)
    space = dict(SEARCH_SPACES[args.model])
    for k, v in _section(cp, f"space.{args.model}").items():
        space[k] = tuple(_literal(v))
    _fresh_dir(args.out, args.force, ["best_params.json", "trials.csv"])
    res = tune_model(args.model, args.strategy, ds.subset(tr), ds.subset(va), args.budget,
                     args.seed, space, th=args.threshold, n_threads=args.threads)
    with open(os.path.join(args.out, "best_params.json"), "w", encoding="utf-8") as fh:
        json.dump({"family": args.model, "strategy": args.strategy, "params": res.best_params,
                   "validation_f1": res.best_score}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    res.write_log(os.path.join(args.out, "trials.csv"))
    _snapshot(os.path.join(args.out, "run.json"), args, {"space": space})
    print(json.dumps({"best_f1": res.best_score, "params": res.best_params}, sort_keys=True))


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .models import FAMILIES, STRATEGIES

    p = _Parser(prog="startup-success", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")
        sp.add_argument("-v", "--verbose", action="store_true")
        return sp

    def feature_input(sp, split_default="all"):
        sp.add_argument("--features", required=True, help="feature CSV")
        sp.add_argument("--windows", help="window indices to keep, e.g. 0-11")
        sp.add_argument("--split", choices=("all", "train", "test"), default=split_default)
        sp.add_argument("--ratio", type=float, default=0.9, help="training share of the split")
        sp.add_argument("--split-seed", type=int, default=0)

    sp = add("synth", cmd_synth, "generate a synthetic export")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-companies", type=int)
    sp.add_argument("--informative", action="store_true", help="informative missingness")
    sp.set_defaults(seed=None)

    sp = add("ingest", cmd_ingest, "load/filter report and round-interval table")
    sp.add_argument("--data", required=True)
    sp.add_argument("--report", required=True)
    sp.add_argument("--intervals")
    sp.add_argument("--horizon", type=int, default=18)

    sp = add("windows", cmd_windows, "sample events and label distribution")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--distribution")
    sp.add_argument("--windows")

    sp = add("features", cmd_features, "factor matrix for a sample file")
    sp.add_argument("--data", required=True)
    sp.add_argument("--samples", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--basis", choices=("company", "deal"), default="company")

    sp = add("train", cmd_train, "train one model")
    sp.add_argument("--model", required=True, choices=FAMILIES)
    sp.add_argument("--strategy", choices=STRATEGIES, default="none")
    sp.add_argument("--out", required=True)
    sp.add_argument("--param", action="append", help="key=value parameter override")
    feature_input(sp, "train")

    sp = add("eval", cmd_eval, "metrics, ROC and comparison table")
    sp.add_argument("--model", required=True, action="append")
    sp.add_argument("--out", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--baseline", action="store_true", help="add the random-selection row")
    sp.add_argument("--test", dest="features", required=True, help="feature CSV")
    sp.add_argument("--windows")
    sp.add_argument("--split", choices=("all", "train", "test"), default="test")
    sp.add_argument("--ratio", type=float, default=0.9)
    sp.add_argument("--split-seed", type=int, default=0)

    sp = add("windows-study", cmd_windows_study, "single vs multiple window F1 per window")
    sp.add_argument("--mode", required=True, choices=("in-sample", "out-of-sample"))
    sp.add_argument("--out", required=True)
    sp.add_argument("--model", choices=FAMILIES, default="gbdt-lgbm")
    sp.add_argument("--strategy", choices=STRATEGIES, default="weight")
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--param", action="append")
    feature_input(sp)

    sp = add("explain", cmd_explain, "Shapley attribution report for one company")
    sp.add_argument("--model", required=True)
    sp.add_argument("--company", required=True)
    sp.add_argument("--asof", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--basis", choices=("company", "deal"), default="company")

    sp = add("portfolio", cmd_portfolio, "top-k portfolio and success curve")
    sp.add_argument("--model", required=True)
    sp.add_argument("--asof", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--stage", choices=("BeforeSeriesA", "SeriesA", "SeriesB"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--basis", choices=("company", "deal"), default="company")

    sp = add("tune", cmd_tune, "random-search hyperparameters")
    sp.add_argument("--model", required=True, choices=FAMILIES)
    sp.add_argument("--strategy", choices=STRATEGIES, default="none")
    sp.add_argument("--budget", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--valid-ratio", type=float, default=0.2)
    feature_input(sp, "train")
    return p


def _fail(kind, message, code):
    print(json.dumps({"error": kind, "message": " ".join(str(message).split())}),
          file=sys.stderr)
    return code


def main(argv=None) -> int:
    from .ingest import DataError
    from .learners import DivergenceError
    from .models import UnsupportedCombination
    from .synth import SynthConfigError

    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        return _fail("usage", "--threads must be at least 1", EXIT_USAGE)
    try:
        args.func(args)
    except (UsageError, UnsupportedCombination, SynthConfigError) as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except (DataError, FileNotFoundError, ValueError, KeyError, csv.Error,
            UnicodeDecodeError, json.JSONDecodeError, DivergenceError) as exc:
        return _fail("data", exc, EXIT_DATA)
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        return _fail("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
