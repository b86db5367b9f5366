"""Command-line front end.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import ModelBundle
from .config import RunConfig
from .dataset import clean, copy_rows, dump_schema, load_csv, write_csv
from .errors import ConfigError, DataError, PreconditionError, TrainingError
from .evaluate import ANN, FOREST
from .pipeline import evaluate, run_crossval, run_training
from .report import REPORTS_FILE, RunReports, build_table, collect, render, render_rows
from .synth import make_blobs

logger = logging.getLogger("blendids")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_TRAINING = 0, 1, 2, 3
BUNDLE_FILE = "bundle.json"
TEST_SLICE_FILE = "test.csv"
FORMATS = ("table", "csv", "json")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(text: str, out: str | None = None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_config(args) -> RunConfig:
    config = RunConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
        config.validate()
    if args.out is not None:
        config.out = args.out
    config.check_paths()
    return config


def cmd_train(args) -> int:
    config = _load_config(args)
    result = run_training(config)
    out = config.resolve(config.out) if args.out is None else Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ModelBundle(result.schema, config.snapshot(), result.model)
    digest = bundle.save(out / BUNDLE_FILE)
    copy_rows(config.resolve(config.data), out / TEST_SLICE_FILE, result.test.row_ids)
    run = RunReports(
        run=out.name,
        dataset=result.schema.name,
        chosen=result.model.final.chosen,
        reports=result.reports,
        meta={
            "bundle_digest": digest,
            "seed": config.seed,
            "split_ratio": list(config.split_ratio),
            "validation_correct": result.model.final.validation_correct,
            "gate": result.model.final.gate.to_dict(),
        },
    )
    run.save(out / REPORTS_FILE)
    _emit(render(build_table([run]), args.format))
    logger.info("bundle %s (sha256 %s) written to %s", BUNDLE_FILE, digest, out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    bundle = ModelBundle.load(args.bundle)
    d = clean(load_csv(args.data, bundle.schema), deduplicate=False)
    if d.n_samples == 0:
        raise PreconditionError(f"{args.data}: no labelled rows to evaluate")
    reports = evaluate(bundle.model, d, bundle.schema.name, {"bundle_digest": bundle.digest, "source": str(args.data)})
    run = RunReports(Path(args.data).stem, bundle.schema.name, bundle.model.final.chosen, reports,
                     {"bundle_digest": bundle.digest})
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        run.save(out / REPORTS_FILE)
    _emit(render(build_table([run]), args.format))
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = ModelBundle.load(args.bundle)
    d = load_csv(args.data, bundle.schema, label_optional=True)
    if not np.all(np.isfinite(d.features)):
        bad = d.row_ids[~np.all(np.isfinite(d.features), axis=1)][0]
        raise DataError(f"{args.data}: data row {bad + 1} has missing feature values")
    C = bundle.schema.n_classes
    header = ["row", "prediction", "chosen", "forest_class",
              *(f"forest_p{k}" for k in range(C)), "ann_class", *(f"ann_p{k}" for k in range(C))]
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        if d.n_samples:
            model = bundle.model
            preds = model.all_predictions(d.features)
            probs = model.candidate_probabilities(d.features)
            for i in range(d.n_samples):
                w.writerow([
                    int(d.row_ids[i]), int(preds["final"][i]), model.final.chosen,
                    int(preds[FOREST][i]), *(repr(float(p)) for p in probs[FOREST][i]),
                    int(preds[ANN][i]), *(repr(float(p)) for p in probs[ANN][i]),
                ])
    logger.info("%d prediction(s) written to %s", d.n_samples, args.out)
    return EXIT_OK


def cmd_crossval(args) -> int:
    config = _load_config(args)
    result = run_crossval(config, sweep_ratios=args.sweep_ratios)
    cols = ["run", "chosen", "accuracy", "precision", "recall", "f1",
            "accuracy_std", "precision_std", "recall_std", "f1_std"]
    if args.format == "json":
        text = json.dumps(result, indent=1, sort_keys=True) + "\n"
    else:
        text = render_rows(result["folds"] + [result["summary"]], args.format, cols)
        if "ratio_sweep" in result:
            text += "\n" + render_rows(result["ratio_sweep"], args.format, ["run", "chosen", *cols[2:6], "total"])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "crossval.json").write_text(json.dumps(result, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    _emit(text)
    return EXIT_OK


def cmd_report(args) -> int:
    runs = collect(args.reports_dir)
    if not runs:
        raise DataError(f"no {REPORTS_FILE} found under {args.reports_dir}")
    _emit(render(build_table(runs), args.format), args.output)
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    d = make_blobs(args.n, args.features, args.separation, args.minority, args.noise, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(d, out / "data.csv")
    dump_schema(d.schema, out / "schema.yaml")
    RunConfig(schema="schema.yaml", data="data.csv", seed=args.seed, out="run").dump(out / "config.yaml")
    logger.info("wrote %d rows, schema and demo config to %s", d.n_samples, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="blendids", description="Two-phase blended-ensemble intrusion detection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fmt(sp):
        sp.add_argument("--format", choices=FORMATS, default="table")

    sp = sub.add_parser("train", help="train the full model and write bundle + reports")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output directory (default: the config's `out`)")
    fmt(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="evaluate a bundle on a labelled CSV")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", help="directory to write reports.json into")
    fmt(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("predict", help="write per-row predictions for a CSV")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="predictions CSV path")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("crossval", help="k-fold evaluation of the whole pipeline")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="directory to write crossval.json into")
    sp.add_argument("--sweep-ratios", action="store_true", help="also compare 60:40, 70:30 and 80:20 splits")
    fmt(sp)
    sp.set_defaults(func=cmd_crossval)

    sp = sub.add_parser("report", help="compare the reports.json files under a directory")
    sp.add_argument("reports_dir")
    sp.add_argument("--output", help="write to this file instead of stdout")
    fmt(sp)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("gen-synth", help="write a synthetic two-Gaussian dataset, schema and config")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--features", type=int, default=6)
    sp.add_argument("--separation", type=float, default=2.0)
    sp.add_argument("--minority", type=float, default=0.06, help="share of attack rows")
    sp.add_argument("--noise", type=float, default=0.0, help="label-flip rate")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_gen_synth)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    where = f" (config {args.config})" if getattr(args, "config", None) else ""
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        code = EXIT_DATA if isinstance(exc, DataError) else EXIT_CONFIG
        _report_error(exc, where)
        return code
    except TrainingError as exc:
        _report_error(exc, where)
        return EXIT_TRAINING
    except OSError as exc:
        _report_error(exc, where)
        return EXIT_DATA


def _report_error(exc, where):
    st = getattr(exc, "stage", None)
    prefix = f"error in stage '{st}'{where}" if st else f"error{where}"
    print(f"{prefix}: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
