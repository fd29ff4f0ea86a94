"""Command-line interface: ``treeattr <command> [options]``.

Data goes to stdout (or ``--out``); diagnostics go to stderr. Exit codes are
0 on success, 1 when a check fails and 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, baselines, bench, clustering, fixtures, oracle, plot_export
from .model import Dataset, ModelError, DimensionMismatch, load_ensemble, predict_batch, read_dataset, write_dataset
from .treeshap import BACKENDS, batch_explain, shap_matrix
from .verify import run_verify

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, default=_json_default) + "\n"


def _csv(header, rows) -> str:
    return plot_export.records_to_csv(header, rows)


def _load(args):
    ens = load_ensemble(args.model)
    data = read_dataset(args.data) if getattr(args, "data", None) else None
    if data is not None:
        data.check_width(ens)
    return ens, data


def _feature(ens, spec: str) -> int:
    names = ens.names()
    if spec in names:
        return names.index(spec)
    try:
        i = int(spec)
    except ValueError:
        raise DimensionMismatch(f"unknown feature {spec!r}") from None
    if not 0 <= i < ens.num_features:
        raise DimensionMismatch(f"feature index {i} outside [0, {ens.num_features})")
    return i


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_explain(args) -> int:
    ens, data = _load(args)
    if args.method == "treeshap":
        res = batch_explain(ens, data, "shap", backend=args.backend, threads=args.threads)
    elif args.method == "saabas":
        res = [baselines.saabas(ens, x) for x in data.rows]
    else:
        res = [oracle.brute_shap(ens, x, cap=args.cap) for x in data.rows]
    if args.format == "json":
        text = _dumps({"features": ens.names(), "method": args.method, "rows": [r.to_dict() for r in res]})
    else:
        rows = [(i, r.phi0, *r.phi, r.output) for i, r in enumerate(res)]
        text = _csv(("row", "phi0", *ens.names(), "output"), rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_interactions(args) -> int:
    ens, data = _load(args)
    if args.method == "treeshap":
        res = batch_explain(ens, data, "interactions", backend=args.backend, threads=args.threads)
    else:
        res = [oracle.brute_interactions(ens, x, cap=args.cap) for x in data.rows]
    if args.format == "json":
        text = _dumps({"features": ens.names(), "rows": [r.to_dict() for r in res]})
    else:
        names = ens.names()
        rows = [(r, names[i], names[j], float(m.values[i, j]))
                for r, m in enumerate(res) for i in range(len(names)) for j in range(len(names))]
        text = _csv(("row", "feature_i", "feature_j", "value"), rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_global_importance(args) -> int:
    ens, data = _load(args)
    labels = None
    if args.labels:
        lab = read_dataset(args.labels)
        if lab.width != 1:
            raise DimensionMismatch(f"{args.labels}: labels file must have exactly one column")
        labels = lab.rows[:, 0]
    imp = baselines.global_importance(ens, args.method, data, labels, seed=args.seed, n_repeats=args.repeats)
    ranks = baselines.rank(imp)
    rows = [(name, float(v), int(r)) for name, v, r in zip(ens.names(), imp, ranks)]
    if args.format == "json":
        text = _dumps({"method": args.method, "importance": [dict(zip(("feature", "value", "rank"), r)) for r in rows]})
    else:
        text = _csv(("feature", "value", "rank"), rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_perturb(args) -> int:
    ens, data = _load(args)
    background = read_dataset(args.background) if args.background else None
    curve = baselines.perturbation_experiment(ens, data, args.method, seed=args.seed, background=background)
    if args.format == "json":
        text = _dumps({"method": args.method, "seed": args.seed, "curve": curve})
    else:
        text = _csv(("row", "cumulative_change"), [(i, float(v)) for i, v in enumerate(curve)])
    _emit(text, args.out)
    return EXIT_OK


def cmd_cluster(args) -> int:
    ens, data = _load(args)
    outputs = predict_batch(ens, data.rows)
    result = {}
    for method in args.methods.split(","):
        if method == "treeshap":
            A = shap_matrix(ens, data, backend=args.backend, threads=args.threads)
        elif method == "saabas":
            A = baselines.saabas_matrix(ens, data)
        else:
            raise ValueError(f"unknown attribution method {method!r}")
        tree = clustering.cluster_attributions(A, args.linkage)
        curve = clustering.r2_curve(tree, outputs)
        if curve.flagged:
            print(f"warning: model output is constant over the data; {method} R^2 curve is degenerate",
                  file=sys.stderr)
        result[method] = {"groups": curve.groups, "r2": curve.r2, "area": curve.area(),
                          "flagged": curve.flagged, "leaf_order": clustering.leaf_order(tree),
                          "merges": tree.as_array()}
    if args.format == "json":
        text = _dumps({"linkage": args.linkage, "curves": result})
    else:
        rows = [(m, int(g), float(r)) for m, c in result.items() for g, r in zip(c["groups"], c["r2"])]
        text = _csv(("method", "groups", "r2"), rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_summary(args) -> int:
    ens, data = _load(args)
    A = shap_matrix(ens, data, backend=args.backend, threads=args.threads)
    recs = plot_export.summary_plot_data(A, data, ens.names(), drop_unused=args.drop_unused)
    _emit(_csv(plot_export.SUMMARY_HEADER, recs), args.out)
    return EXIT_OK


def cmd_dependence(args) -> int:
    ens, data = _load(args)
    i = _feature(ens, args.feature)
    A = shap_matrix(ens, data, backend=args.backend, threads=args.threads)
    k = _feature(ens, args.color) if args.color else None
    inter = None
    if k is None:
        n = min(len(data), plot_export.AUTO_COLOR_ROWS)
        res = batch_explain(ens, data.rows[:n], "interactions", backend=args.backend, threads=args.threads)
        inter = np.array([r.values for r in res]) if res else None
    recs, k = plot_export.dependence_plot_data(i, A, data, k, inter)
    if k is not None:
        print(f"color feature: {ens.names()[k]}", file=sys.stderr)
    _emit(_csv(plot_export.DEPENDENCE_HEADER, recs), args.out)
    return EXIT_OK


def cmd_interaction_dependence(args) -> int:
    ens, data = _load(args)
    i, j = _feature(ens, args.feature), _feature(ens, args.other)
    res = batch_explain(ens, data, "interactions", backend=args.backend, threads=args.threads)
    inter = np.array([r.values for r in res]).reshape(len(res), ens.num_features, ens.num_features)
    main, pair = plot_export.interaction_dependence_data(i, j, data, inter)
    main_csv = _csv(plot_export.MAIN_HEADER, main)
    pair_csv = _csv(plot_export.INTERACTION_HEADER, pair)
    if args.out_main or args.out_interaction:
        if not (args.out_main and args.out_interaction):
            raise ValueError("give both --out-main and --out-interaction, or neither")
        _emit(main_csv, args.out_main)
        _emit(pair_csv, args.out_interaction)
    else:
        sys.stdout.write(main_csv + "\n" + pair_csv)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials == 0:
        print("warning: no trials requested; nothing was checked", file=sys.stderr)
    report = run_verify(args.seed, args.trials, args.max_features, args.max_depth, args.max_trees,
                        inject_error=args.inject_error, backend=args.backend)
    for name, err in report.errors().items():
        print(f"max abs error {name}: {err:.3e}", file=sys.stderr)
    _emit(_dumps(report.to_dict()), args.out)
    if not report.passed:
        print(f"verify FAILED: worst trial {report.worst_trial}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.repeats < 1:
        raise ValueError("--repeats must be >= 1")
    if args.mode == "sweep":
        rows = bench.bench_sweep(args.trees, args.depths, args.features, args.repeats, args.seed,
                                 args.backend, paired=args.paired, brute_limit=args.brute_limit)
        header = bench.BENCH_HEADER
    elif args.mode == "work":
        rows = bench.work_count_sweep(args.depths, args.trees[0], args.features[0], args.seed, args.backend)
        header = ("D", "work", "work_bound", "work_ratio")
    else:
        rows = bench.brute_scaling(args.features, args.seed, pairs=args.repeats)
        header = ("M", "seconds", "walks", "repeats", "ratio")
    _emit(_csv(header, [tuple(r[h] for h in header) for r in rows]), args.out)
    return EXIT_OK


def cmd_fixtures(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model_a.json").write_text(fixtures.model_a().to_json(), encoding="utf-8")
    (out / "model_b.json").write_text(fixtures.model_b().to_json(), encoding="utf-8")
    write_dataset(out / "data.csv", fixtures.cover_faithful_data())
    write_dataset(out / "yes_yes.csv", Dataset(fixtures.YES_YES[None, :], fixtures.NAMES))
    (out / "labels_a.csv").write_text(_labels_csv(fixtures.model_a()), encoding="utf-8")
    (out / "labels_b.csv").write_text(_labels_csv(fixtures.model_b()), encoding="utf-8")
    (out / "expectations.json").write_text(fixtures.expectations_json() + "\n", encoding="utf-8")
    print(f"wrote fixtures to {out}", file=sys.stderr)
    return EXIT_OK


def _labels_csv(ens) -> str:
    y = predict_batch(ens, fixtures.cover_faithful_data().rows)
    return _csv(("label",), [(float(v),) for v in y])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treeattr", description="Exact additive attributions for tree ensembles.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data_required=True, fmt=True):
        sp.add_argument("--model", required=True, help="model JSON file")
        sp.add_argument("--data", required=data_required, help="CSV with a header row")
        sp.add_argument("--out", help="output file (default: stdout)")
        if fmt:
            sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--backend", choices=sorted(BACKENDS), default=None)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("explain", help="per-row attributions")
    common(sp)
    sp.add_argument("--method", choices=("treeshap", "saabas", "brute"), default="treeshap")
    sp.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP, help="brute-force feature cap")
    sp.set_defaults(func=cmd_explain)

    sp = sub.add_parser("interactions", help="per-row interaction matrices")
    common(sp)
    sp.add_argument("--method", choices=("treeshap", "brute"), default="treeshap")
    sp.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP)
    sp.set_defaults(func=cmd_interactions)

    sp = sub.add_parser("global-importance", help="one importance value per feature")
    common(sp, data_required=False)
    sp.add_argument("--method", choices=baselines.GLOBAL_METHODS, required=True)
    sp.add_argument("--labels", help="one-column CSV of labels (permutation; default: model output)")
    sp.add_argument("--repeats", type=int, default=10, help="shuffles per feature (permutation)")
    sp.set_defaults(func=cmd_global_importance)

    sp = sub.add_parser("perturb", help="cumulative change from replacing each row's most negative feature")
    common(sp)
    sp.add_argument("--method", choices=baselines.INDIVIDUAL_METHODS + baselines.GLOBAL_METHODS, required=True)
    sp.add_argument("--background", help="CSV of replacement rows (default: --data)")
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("cluster", help="supervised clustering R^2 curves")
    common(sp)
    sp.add_argument("--methods", default="treeshap,saabas")
    sp.add_argument("--linkage", choices=clustering.LINKAGES, default="ward")
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("summary", help="summary plot data (CSV)")
    common(sp, fmt=False)
    sp.add_argument("--drop-unused", action="store_true")
    sp.set_defaults(func=cmd_summary)

    sp = sub.add_parser("dependence", help="dependence plot data (CSV)")
    common(sp, fmt=False)
    sp.add_argument("--feature", required=True, help="name or index")
    sp.add_argument("--color", help="color feature (default: strongest interaction)")
    sp.set_defaults(func=cmd_dependence)

    sp = sub.add_parser("interaction-dependence", help="main-effect and interaction plot data (CSV)")
    common(sp, fmt=False)
    sp.add_argument("--feature", required=True)
    sp.add_argument("--other", required=True)
    sp.add_argument("--out-main")
    sp.add_argument("--out-interaction")
    sp.set_defaults(func=cmd_interaction_dependence)

    sp = sub.add_parser("verify", help="compare fast results with brute force on random models")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--max-features", type=int, default=12)
    sp.add_argument("--max-depth", type=int, default=6)
    sp.add_argument("--max-trees", type=int, default=10)
    sp.add_argument("--backend", choices=sorted(BACKENDS), default=None)
    sp.add_argument("--inject-error", type=float, default=0.0, help=argparse.SUPPRESS)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bench", help="timing report (CSV)")
    sp.add_argument("--mode", choices=("sweep", "work", "brute-scaling"), default="sweep")
    sp.add_argument("--trees", type=_int_list, default=[50])
    sp.add_argument("--depths", type=_int_list, default=list(range(2, 11)))
    sp.add_argument("--features", type=_int_list, default=[10])
    sp.add_argument("--paired", action="store_true", help="zip --depths with --features")
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--brute-limit", type=int, default=bench.BRUTE_LIMIT)
    sp.add_argument("--backend", choices=sorted(BACKENDS), default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("fixtures", help="write the two-feature example models and expectations")
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_fixtures)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: file not found: {e.filename}", file=sys.stderr)
    except oracle.TooManyFeatures as e:
        print(f"error: {e}", file=sys.stderr)
    except (ModelError, DimensionMismatch, ValueError, OSError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
