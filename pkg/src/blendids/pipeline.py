"""End-to-end two-phase training and evaluation.

Order of work: load -> clean -> outer train/test split -> scaling fitted on
the training side -> validation slice -> blend (base models, meta-dataset,
forest) -> network -> selection -> evaluation on the test side.
"""

from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .blend import BlendedEnsemble, blend_pipeline
from .config import RunConfig
from .dataset import Dataset, FeatureSchema, Preprocessor, SplitPlan, clean, kfold, load_csv, split
from .errors import BlendIDSError, BlendSplitError, PreconditionError, StratificationError
from .evaluate import ANN, FOREST, EvaluationReport, FinalModel, select_final
from .net import train_net

logger = logging.getLogger(__name__)

FIRST_LEVEL = ("svm", "naive_bayes", "decision_tree")
SECOND_LEVEL = (FOREST, ANN)
FINAL = "final"
RATIO_SWEEP = ((60.0, 40.0), (70.0, 30.0), (80.0, 20.0))


@contextlib.contextmanager
def stage(name: str):
    """Tag any package error raised inside with the pipeline stage it came from."""
    try:
        yield
    except BlendIDSError as exc:
        if getattr(exc, "stage", None) is None:
            exc.stage = name
        raise


@dataclass(eq=False)
class TwoPhaseModel:
    """Scaling plus the selected two-phase model; predicts from unscaled rows."""

    preprocessor: Preprocessor
    final: FinalModel
    plans: dict[str, SplitPlan] = field(default_factory=dict)

    def transform(self, X) -> np.ndarray:
        return self.preprocessor.transform(X)

    def predict(self, X) -> np.ndarray:
        return self.final.predict(self.transform(X))

    def all_predictions(self, X) -> dict[str, np.ndarray]:
        """Class ids from every model in the stack, keyed by report name."""
        Z = self.transform(X)
        blend = self.final.blend
        out = {m.kind: m.predict(Z) for m in blend.base_models}
        out.update(self.final.candidate_predictions(Z))
        out[FINAL] = out[self.final.chosen]
        return out

    def candidate_probabilities(self, X) -> dict[str, np.ndarray]:
        """Forest vote shares and network output probabilities, one row per input row."""
        Z = self.transform(X)
        final = self.final
        meta = final.blend.meta_features(Z)
        net_X = meta if final.net_input == "meta" else Z
        return {FOREST: final.blend.forest.predict_proba(meta), ANN: final.net.predict_proba(net_X)}


def load_dataset(config: RunConfig) -> Dataset:
    with stage("load"):
        schema = config.load_schema()
        d = load_csv(config.resolve(config.data), schema)
    with stage("clean"):
        d = clean(d)
        if d.n_samples == 0:
            raise PreconditionError(f"no usable rows left in {config.data} after cleaning")
    return d


def fit_two_phase(train: Dataset, config: RunConfig) -> TwoPhaseModel:
    """Fit scaling, blend, network and selection on ``train`` (unscaled, cleaned)."""
    with stage("scale"):
        pre, scaled = Preprocessor.fit(train, config.minmax, config.standard)
    with stage("validation-split"):
        vplan = split(scaled, config.validation_ratio, config.seed_for("validation"), config.stratify)
        fit_part, validation = scaled.subset(vplan.train_indices), scaled.subset(vplan.test_indices)
    with stage("blend"):
        blend = blend_pipeline(fit_part, config.blend_config())
    with stage("net"):
        if config.net_input == "meta":
            net_train, d_in = blend.meta, blend.meta.n_columns
        else:
            net_train, d_in = fit_part, fit_part.n_features
        net = train_net(net_train, config.train_spec(), [d_in, *config.net_hidden, train.n_classes])
    with stage("select"):
        final = select_final(blend, net, validation, config.net_input, config.beta)
    logger.info("selected %s (validation correct: %s)", final.chosen, final.validation_correct)
    return TwoPhaseModel(pre, final, {"validation": vplan, "blend": blend.base_plan})


def evaluate(model: TwoPhaseModel, test: Dataset, dataset_name: str, provenance=None) -> list[EvaluationReport]:
    """Reports for the three base models, forest, network and the final choice."""
    with stage("evaluate"):
        if test.n_samples == 0:
            raise PreconditionError("evaluation set is empty")
        test.check_clean()
        preds = model.all_predictions(test.features)
        C = test.n_classes
        base = dict(provenance or {})
        reports = []
        for name in (*FIRST_LEVEL, *SECOND_LEVEL, FINAL):
            prov = dict(base, level="first" if name in FIRST_LEVEL else ("second" if name != FINAL else "final"))
            if name == FINAL:
                prov["chosen"] = model.final.chosen
            reports.append(EvaluationReport.build(name, dataset_name, test.labels, preds[name], C, prov))
        return reports


@dataclass(eq=False)
class TrainResult:
    config: RunConfig
    schema: FeatureSchema
    model: TwoPhaseModel
    outer_plan: SplitPlan
    test: Dataset
    reports: list[EvaluationReport]


def run_training(config: RunConfig, dataset: Dataset | None = None) -> TrainResult:
    d = load_dataset(config) if dataset is None else dataset
    with stage("split"):
        plan = split(d, config.split_ratio, config.seed_for("split"), config.stratify)
    train, test = d.subset(plan.train_indices), d.subset(plan.test_indices)
    model = fit_two_phase(train, config)
    provenance = {"seed": config.seed, "split_ratio": list(config.split_ratio), "source": d.provenance}
    reports = evaluate(model, test, d.schema.name, provenance)
    return TrainResult(config, d.schema, model, plan, test, reports)


def _final_row(label: str, reports: list[EvaluationReport]) -> dict:
    final = next(r for r in reports if r.model == FINAL)
    return {
        "run": label,
        "chosen": final.provenance.get("chosen"),
        "accuracy": final.accuracy,
        "precision": final.precision,
        "recall": final.recall,
        "f1": final.f1,
        "total": final.confusion.total,
    }


def _summary(rows: list[dict]) -> dict:
    out = {"run": "mean±std"}
    for key in ("accuracy", "precision", "recall", "f1"):
        vals = np.array([r[key] for r in rows])
        out[key] = float(vals.mean())
        out[f"{key}_std"] = float(vals.std())
    return out


def run_crossval(config: RunConfig, dataset: Dataset | None = None, sweep_ratios: bool = False) -> dict:
    """k-fold run of the whole pipeline; optionally the 60:40 / 70:30 / 80:20 sweep too.

    Folds are stratified when ``config.stratify`` is on.
    """
    d = load_dataset(config) if dataset is None else dataset
    with stage("folds"):
        plan = kfold(d, config.folds, config.seed_for("folds"), stratify=config.stratify)
    rows = []
    for i in range(plan.k):
        tr, te = plan.train_test(i)
        try:
            model = fit_two_phase(d.subset(tr), config)
        except (BlendSplitError, StratificationError) as exc:
            raise BlendSplitError(
                f"fold {i}: {exc}. Use fewer folds, a larger blend holdout share, or disable stratification"
            ) from exc
        reports = evaluate(model, d.subset(te), d.schema.name, {"fold": i})
        rows.append(_final_row(f"fold {i}", reports))
    result = {"dataset": d.schema.name, "k": plan.k, "folds": rows, "summary": _summary(rows)}
    if sweep_ratios:
        sweep = []
        for ratio in RATIO_SWEEP:
            with stage("split"):
                sp = split(d, ratio, config.seed_for("split"), config.stratify)
            model = fit_two_phase(d.subset(sp.train_indices), config)
            reports = evaluate(model, d.subset(sp.test_indices), d.schema.name, {"split_ratio": list(ratio)})
            sweep.append(_final_row(f"{ratio[0]:g}:{ratio[1]:g}", reports))
        result["ratio_sweep"] = sweep
    return result
