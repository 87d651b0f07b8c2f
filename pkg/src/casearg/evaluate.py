"""Metrics, random-search tuning and ablation runs."""
from __future__ import annotations

import dataclasses
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .features import AttributeVocabulary, SelectionSpec
from .multiclass import (
    KINDS,
    REST,
    BinaryModelConfig,
    TournamentConfig,
    TrainedTournament,
    predict_batch,
    train_tournament,
)
from .reduction import ClusteringConfig

log = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")
TOGGLES = ("feature_combination", "thresholding", "supports")


class EvaluationError(ValueError):
    pass


def _pct(q: Fraction) -> float:
    return round(float(q * 100), 2)


@dataclass(frozen=True)
class Metrics:
    """Confusion matrix (rows = true class, columns = predicted) and the
    exact-rational scores derived from it.

    A class nobody predicted has precision 0; F1 is 0 when P + R = 0.
    """

    labels: tuple
    confusion: tuple

    @classmethod
    def from_predictions(cls, labels: Sequence, y_true: Sequence, y_pred: Sequence) -> "Metrics":
        labels = tuple(labels)
        index = {lab: i for i, lab in enumerate(labels)}
        if len(y_true) != len(y_pred):
            raise EvaluationError("y_true and y_pred differ in length")
        if not y_true:
            raise EvaluationError("cannot score an empty scene sequence")
        m = [[0] * len(labels) for _ in labels]
        for t, p in zip(y_true, y_pred):
            if t not in index:
                raise EvaluationError(f"true label {t!r} not among {labels}")
            if p not in index:
                raise EvaluationError(f"predicted label {p!r} not among {labels}")
            m[index[t]][index[p]] += 1
        return cls(labels, tuple(tuple(r) for r in m))

    @property
    def total(self) -> int:
        return sum(map(sum, self.confusion))

    def support(self, i: int) -> int:
        return sum(self.confusion[i])

    def precision_of(self, i: int) -> Fraction:
        predicted = sum(row[i] for row in self.confusion)
        return Fraction(self.confusion[i][i], predicted) if predicted else Fraction(0)

    def recall_of(self, i: int) -> Fraction:
        s = self.support(i)
        return Fraction(self.confusion[i][i], s) if s else Fraction(0)

    def f1_of(self, i: int) -> Fraction:
        p, r = self.precision_of(i), self.recall_of(i)
        return 2 * p * r / (p + r) if p + r else Fraction(0)

    def _macro(self, fn) -> Fraction:
        n = len(self.labels)
        return sum((fn(i) for i in range(n)), Fraction(0)) / n

    @property
    def accuracy(self) -> Fraction:
        return Fraction(sum(self.confusion[i][i] for i in range(len(self.labels))), self.total)

    @property
    def precision(self) -> Fraction:
        return self._macro(self.precision_of)

    @property
    def recall(self) -> Fraction:
        return self._macro(self.recall_of)

    @property
    def f1(self) -> Fraction:
        return self._macro(self.f1_of)

    def percent(self, name: str) -> float:
        return _pct(getattr(self, name))

    def as_dict(self) -> dict:
        out = {name: self.percent(name) for name in METRIC_NAMES}
        out["labels"] = list(self.labels)
        out["confusion"] = [list(r) for r in self.confusion]
        return out

    def table(self) -> str:
        width = max(8, *(len(str(lab)) + 2 for lab in self.labels))
        lines = [
            "  ".join(f"{h}: {self.percent(n):.2f}" for h, n in
                      zip(("Accuracy", "Precision", "Recall", "F1"), METRIC_NAMES)),
            "",
            "true \\ pred".ljust(width + 4) + "".join(str(lab).rjust(width) for lab in self.labels),
        ]
        for lab, row in zip(self.labels, self.confusion):
            lines.append(str(lab).ljust(width + 4) + "".join(str(v).rjust(width) for v in row))
        return "\n".join(lines) + "\n"


def evaluate(tournament: TrainedTournament, scenes: Sequence, threads: int = 1) -> Metrics:
    if not scenes:
        raise EvaluationError("cannot evaluate on an empty scene sequence")
    unlabelled = [s.image_id for s in scenes if s.class_label is None]
    if unlabelled:
        raise EvaluationError(f"scene {unlabelled[0]} has no class label")
    preds = predict_batch(tournament, scenes, threads)
    return Metrics.from_predictions(tournament.labels, [s.class_label for s in scenes], preds)


# --------------------------------------------------------------------------
# random search

DEFAULT_SELECTIONS = (
    SelectionSpec("mi", max_slots=3, top_k=6, tolerance=0.1),
    SelectionSpec("mi", max_slots=3, top_k=8, tolerance=0.3),
    SelectionSpec("mi", max_slots=2, top_k=6, tolerance=0.1),
    SelectionSpec("slots", slots=("size",)),
    SelectionSpec("slots", slots=("color",)),
    SelectionSpec("slots", slots=("size", "material")),
    SelectionSpec("slots", slots=("size", "color")),
)


@dataclass(frozen=True)
class SearchSpace:
    """Per-model candidate sets; every binary model draws independently.

    ``orderings`` of ``None`` means every permutation of ``labels``.
    """

    labels: tuple
    kinds: tuple = KINDS
    defaults: tuple = ("focus", "opponent")
    centroids: tuple = (300, 500, 900)
    thresholds: tuple = (None, 0.7, 0.75, 0.8, 0.85, 0.9)
    supports: tuple = (False, True)
    orderings: tuple | None = None
    selections: tuple = DEFAULT_SELECTIONS

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) < 2:
            raise EvaluationError("a search space needs at least two labels")
        for name in ("kinds", "defaults", "centroids", "thresholds", "supports", "selections"):
            value = tuple(getattr(self, name))
            object.__setattr__(self, name, value)
            if not value:
                raise EvaluationError(f"search space candidate set {name!r} is empty")
        if self.orderings is not None:
            orderings = tuple(tuple(o) for o in self.orderings)
            if not orderings:
                raise EvaluationError("search space candidate set 'orderings' is empty")
            for o in orderings:
                if sorted(o, key=str) != sorted(self.labels, key=str):
                    raise EvaluationError(f"ordering {o} is not a permutation of {self.labels}")
            object.__setattr__(self, "orderings", orderings)
        bad = set(self.kinds) - set(KINDS)
        if bad:
            raise EvaluationError(f"unknown kinds {sorted(bad)}")

    def sample(self, rng: np.random.Generator) -> TournamentConfig:
        def pick(options):
            return options[int(rng.integers(len(options)))]

        if self.orderings is None:
            order = tuple(self.labels[i] for i in rng.permutation(len(self.labels)))
        else:
            order = pick(self.orderings)
        models = []
        for i, focus in enumerate(order[:-1]):
            last = i == len(order) - 2
            models.append(BinaryModelConfig(
                focus=focus,
                opponent=order[-1] if last else REST,
                default=pick(self.defaults),
                kind=pick(self.kinds),
                selection=pick(self.selections),
                clustering=ClusteringConfig(k=pick(self.centroids), threshold=pick(self.thresholds)),
                use_supports=pick(self.supports),
            ))
        return TournamentConfig(self.labels, tuple(models))

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "kinds": list(self.kinds),
            "defaults": list(self.defaults),
            "centroids": list(self.centroids),
            "thresholds": list(self.thresholds),
            "supports": list(self.supports),
            "orderings": None if self.orderings is None else [list(o) for o in self.orderings],
            "selections": [s.to_dict() for s in self.selections],
        }

    @classmethod
    def from_dict(cls, d) -> "SearchSpace":
        d = dict(d)
        if "selections" in d:
            d["selections"] = tuple(SelectionSpec.from_dict(s) for s in d["selections"])
        return cls(**d)


@dataclass(frozen=True)
class TrialRecord:
    index: int
    config: TournamentConfig
    metrics: Metrics | None
    error: str | None
    seconds: float

    def as_dict(self) -> dict:
        return {
            "trial": self.index,
            "config": self.config.to_dict(),
            "metrics": None if self.metrics is None else self.metrics.as_dict(),
            "error": self.error,
            "seconds": round(self.seconds, 3),
        }


@dataclass(frozen=True)
class SearchResult:
    config: TournamentConfig
    metrics: Metrics
    trials: tuple


class SearchError(RuntimeError):
    pass


def _run_trial(index, config, train, validation, vocabulary) -> TrialRecord:
    start = time.perf_counter()
    try:
        t = train_tournament(config, train, vocabulary)
        metrics = evaluate(t, validation)
        error = None
    except (ValueError, ArithmeticError) as exc:
        log.warning("trial %d failed: %s", index, exc)
        metrics, error = None, f"{type(exc).__name__}: {exc}"
    return TrialRecord(index, config, metrics, error, time.perf_counter() - start)


def random_search(
    space: SearchSpace,
    budget: int,
    seed: int,
    train: Sequence,
    validation: Sequence,
    vocabulary: AttributeVocabulary | None = None,
    threads: int = 1,
) -> SearchResult:
    """Sample ``budget`` configurations, train each, keep the best on validation.

    Ranking is by macro F1, then accuracy, then the earlier trial. All
    configurations are drawn before any training, so the trial sequence
    depends only on ``seed`` and the space.
    """
    if budget < 1:
        raise EvaluationError("budget must be >= 1")
    if not validation:
        raise EvaluationError("validation split is empty")
    rng = np.random.default_rng(seed)
    configs = [space.sample(rng).with_seed(seed) for _ in range(budget)]
    args = [(i, c, train, validation, vocabulary) for i, c in enumerate(configs)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(lambda a: _run_trial(*a), args))
    else:
        trials = [_run_trial(*a) for a in args]
    scored = [t for t in trials if t.metrics is not None]
    if not scored:
        raise SearchError(f"all {budget} trials failed; first error: {trials[0].error}")
    best = max(scored, key=lambda t: (t.metrics.f1, t.metrics.accuracy, -t.index))
    return SearchResult(best.config, best.metrics, tuple(trials))


# --------------------------------------------------------------------------
# ablation


def apply_toggles(config: TournamentConfig, toggles) -> TournamentConfig:
    """Switch off the named components in every model."""
    toggles = set(toggles)
    unknown = toggles - set(TOGGLES)
    if unknown:
        raise EvaluationError(f"unknown toggles {sorted(unknown)}; choose from {TOGGLES}")
    models = []
    for m in config.models:
        if "feature_combination" in toggles:
            m = dataclasses.replace(m, selection=SelectionSpec("single"))
        if "thresholding" in toggles:
            m = dataclasses.replace(m, clustering=dataclasses.replace(m.clustering, threshold=None))
        if "supports" in toggles:
            m = dataclasses.replace(m, use_supports=False)
        models.append(m)
    return dataclasses.replace(config, models=tuple(models))


def variant_name(toggles) -> str:
    toggles = [t for t in TOGGLES if t in set(toggles)]
    if not toggles:
        return "full"
    return "w/o " + " + ".join(t.replace("_", " ") for t in toggles)


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float

    def __str__(self):
        return f"{self.mean:.2f} ± {self.std:.2f}"


def summarise(runs: Sequence[Metrics]) -> dict:
    """Mean and sample standard deviation (n - 1) of each metric, in percent."""
    out = {}
    for name in METRIC_NAMES:
        values = [float(getattr(m, name) * 100) for m in runs]
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        out[name] = Summary(round(statistics.fmean(values), 2), round(std, 2))
    return out


@dataclass(frozen=True)
class AblationReport:
    variants: tuple  # (name, toggles, [Metrics per seed])
    seeds: tuple

    def summary(self) -> dict:
        return {name: summarise(runs) for name, _, runs in self.variants}

    def runs(self, name: str) -> list:
        for n, _, runs in self.variants:
            if n == name:
                return runs
        raise KeyError(name)

    def table(self) -> str:
        rows = [(name, summarise(runs)) for name, _, runs in self.variants]
        width = max(len("Method"), *(len(n) for n, _ in rows))
        head = ["Method".ljust(width)] + [h.rjust(15) for h in ("Accuracy", "Precision", "Recall", "F1")]
        lines = [" | ".join(head)]
        lines.append("-+-".join("-" * len(h) for h in head))
        for name, s in rows:
            lines.append(" | ".join([name.ljust(width)] + [str(s[m]).rjust(15) for m in METRIC_NAMES]))
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "variants": [
                {"name": name, "toggles": list(toggles),
                 "runs": [m.as_dict() for m in runs],
                 "summary": {k: {"mean": v.mean, "std": v.std} for k, v in summarise(runs).items()}}
                for name, toggles, runs in self.variants
            ],
        }


def ablate(
    base: TournamentConfig,
    toggles,
    train: Sequence,
    test: Sequence,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    vocabulary: AttributeVocabulary | None = None,
    threads: int = 1,
) -> AblationReport:
    """Run the full configuration and one variant per toggle (plus all
    toggles together when more than one is given) over ``seeds``."""
    apply_toggles(base, toggles)  # validates names
    toggles = tuple(t for t in TOGGLES if t in set(toggles))
    plans = [()] + [(t,) for t in toggles]
    if len(toggles) > 1:
        plans.append(toggles)
    variants = []
    for plan in plans:
        runs = []
        for seed in seeds:
            config = apply_toggles(base, plan).with_seed(seed)
            t = train_tournament(config, train, vocabulary)
            runs.append(evaluate(t, test, threads))
        variants.append((variant_name(plan), plan, runs))
    return AblationReport(tuple(variants), tuple(seeds))
