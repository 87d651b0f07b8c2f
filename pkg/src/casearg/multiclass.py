"""One-Vs-Rest tournaments: an ordered chain of binary AA-CBR models."""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .aacbr import Casebase, Prediction, predict
from .features import (
    AttributeVocabulary,
    Case,
    FeatureSelection,
    Kind,
    SelectionSpec,
    characterise,
)
from .reduction import ClusteringConfig, reduce_casebase

log = logging.getLogger(__name__)

REST = "rest"
KINDS = ("set", "count", "position_count")


class TournamentError(ValueError):
    pass


@dataclass(frozen=True)
class BinaryModelConfig:
    focus: int
    opponent: int | str = REST
    default: str = "opponent"  # which side is the default outcome: "focus" | "opponent"
    kind: str = "count"
    selection: SelectionSpec = field(default_factory=SelectionSpec)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    use_supports: bool = False

    def __post_init__(self):
        if self.default not in ("focus", "opponent"):
            raise TournamentError(f"default must be 'focus' or 'opponent', got {self.default!r}")
        if self.kind not in KINDS:
            raise TournamentError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.opponent == self.focus:
            raise TournamentError("a model cannot oppose its own focus class")

    @property
    def characterisation_kind(self) -> Kind:
        return Kind.SET if self.kind == "set" else Kind.COUNT

    @property
    def use_position(self) -> bool:
        return self.kind == "position_count"

    @property
    def default_outcome(self):
        return self.focus if self.default == "focus" else self.opponent

    @property
    def other_outcome(self):
        return self.opponent if self.default == "focus" else self.focus

    def to_dict(self) -> dict:
        return {
            "focus": self.focus,
            "opponent": self.opponent,
            "default": self.default,
            "kind": self.kind,
            "selection": self.selection.to_dict(),
            "clustering": self.clustering.to_dict(),
            "use_supports": self.use_supports,
        }

    @classmethod
    def from_dict(cls, d) -> "BinaryModelConfig":
        d = dict(d)
        d["selection"] = SelectionSpec.from_dict(d.get("selection", {}))
        d["clustering"] = ClusteringConfig.from_dict(d.get("clustering", {}))
        return cls(**d)


@dataclass(frozen=True)
class TournamentConfig:
    labels: tuple
    models: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "models", tuple(self.models))
        if len(set(self.labels)) != len(self.labels) or len(self.labels) < 2:
            raise TournamentError("need at least two distinct class labels")
        if len(self.models) != len(self.labels) - 1:
            raise TournamentError(
                f"{len(self.labels)} labels need {len(self.labels) - 1} models, "
                f"got {len(self.models)}"
            )
        focuses = [m.focus for m in self.models]
        if len(set(focuses)) != len(focuses):
            raise TournamentError("focus classes must be distinct")
        for i, m in enumerate(self.models):
            last = i == len(self.models) - 1
            if last and m.opponent == REST:
                raise TournamentError("the final model needs a specific opponent class")
            if not last and m.opponent != REST:
                raise TournamentError(f"model {i + 1} must oppose the rest")
        covered = set(focuses) | {self.models[-1].opponent}
        if covered != set(self.labels):
            raise TournamentError(
                f"models cover {sorted(covered, key=str)}, labels are {sorted(self.labels, key=str)}"
            )

    def with_seed(self, seed: int) -> "TournamentConfig":
        models = tuple(
            dataclasses.replace(m, clustering=dataclasses.replace(m.clustering, seed=seed + 1000 * i))
            for i, m in enumerate(self.models)
        )
        return dataclasses.replace(self, models=models)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "models": [m.to_dict() for m in self.models]}

    @classmethod
    def from_dict(cls, d) -> "TournamentConfig":
        return cls(tuple(d["labels"]), tuple(BinaryModelConfig.from_dict(m) for m in d["models"]))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    config: BinaryModelConfig
    selection: FeatureSelection
    casebase: Casebase

    def characterise(self, scene, vocabulary: AttributeVocabulary):
        return characterise(
            scene, self.selection, self.config.characterisation_kind,
            self.config.use_position, vocabulary,
        )

    def predict(self, scene, vocabulary: AttributeVocabulary) -> Prediction:
        return predict(self.casebase, self.characterise(scene, vocabulary), self.config.use_supports)

    def warm(self) -> None:
        self.casebase.compiled.resolved(self.config.use_supports)


@dataclass(frozen=True, eq=False)
class TrainedTournament:
    labels: tuple
    models: tuple
    vocabulary: AttributeVocabulary

    @property
    def config(self) -> TournamentConfig:
        return TournamentConfig(self.labels, tuple(m.config for m in self.models))


def scene_confidence(scene) -> float:
    if not scene.objects:
        return 1.0
    return float(sum(o.confidence for o in scene.objects) / len(scene.objects))


def train_model(
    config: BinaryModelConfig,
    pool: Sequence,
    vocabulary: AttributeVocabulary,
    name: str = "model",
) -> TrainedModel:
    outcomes = [
        config.focus if s.class_label == config.focus else config.opponent for s in pool
    ]
    if config.opponent != REST:
        stray = {s.class_label for s in pool} - {config.focus, config.opponent}
        if stray:
            raise TournamentError(f"{name}: unexpected labels {sorted(stray)} in training pool")
    sides = set(outcomes)
    if len(sides) < 2:
        missing = {config.focus, config.opponent} - sides
        raise TournamentError(f"{name}: training pool has no {missing.pop()!r} scenes")
    positive = [o == config.focus for o in outcomes]
    selection = config.selection.resolve(vocabulary, config.use_position, pool, positive)
    kind = config.characterisation_kind
    cases = [
        Case(
            characterise(s, selection, kind, config.use_position, vocabulary),
            outcome,
            scene_confidence(s),
            str(s.image_id),
        )
        for s, outcome in zip(pool, outcomes)
    ]
    reduced = reduce_casebase(cases, config.clustering, [config.focus, config.opponent])
    casebase = Casebase(tuple(reduced), config.default_outcome, config.other_outcome, kind)
    log.info("%s: %d cases reduced to %d", name, len(cases), len(reduced))
    return TrainedModel(config, selection, casebase)


def train_tournament(
    config: TournamentConfig,
    scenes: Sequence,
    vocabulary: AttributeVocabulary | None = None,
) -> TrainedTournament:
    vocabulary = vocabulary or AttributeVocabulary.clevr()
    labels = set(config.labels)
    for s in scenes:
        if s.class_label is None:
            raise TournamentError(f"scene {s.image_id} is unlabelled")
        if s.class_label not in labels:
            raise TournamentError(f"scene {s.image_id} has label {s.class_label!r} outside {config.labels}")
    trained = []
    done: set = set()
    for i, mc in enumerate(config.models):
        pool = [s for s in scenes if s.class_label not in done]
        trained.append(train_model(mc, pool, vocabulary, name=f"model {i + 1} (focus {mc.focus})"))
        done.add(mc.focus)
    return TrainedTournament(config.labels, tuple(trained), vocabulary)


def predict_trace(tournament: TrainedTournament, scene) -> tuple[Hashable, list[tuple[int, Prediction]]]:
    """Predicted label plus the (model index, prediction) of every model consulted."""
    consulted = []
    for i, model in enumerate(tournament.models):
        pred = model.predict(scene, tournament.vocabulary)
        consulted.append((i, pred))
        if pred.outcome == model.config.focus:
            return model.config.focus, consulted
    return pred.outcome, consulted


def predict_class(tournament: TrainedTournament, scene) -> Hashable:
    return predict_trace(tournament, scene)[0]


def predict_batch(tournament: TrainedTournament, scenes: Sequence, threads: int = 1) -> list:
    for m in tournament.models:
        m.warm()
    if threads <= 1:
        return [predict_class(tournament, s) for s in scenes]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: predict_class(tournament, s), scenes))
