"""Symbolic characterisations of scenes and the exceptionality orders over them.

A scene's objects are mapped onto *super-features* (partial attribute
assignments such as ``sm_m_cu``), then collected either as a set or as a
feature -> count mapping. Both kinds are compared by componentwise count
dominance; for sets the counts are 0/1, which makes dominance coincide with
proper superset.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

SLOTS = ("size", "color", "material", "shape", "side")
SIDE_VALUES = ("left", "right")


class CharacterisationError(ValueError):
    """Invalid characterisation input or mixed characterisation kinds."""


class Kind(str, Enum):
    SET = "set"
    COUNT = "count"


@dataclass(frozen=True)
class AttributeVocabulary:
    """Value codes for each object attribute slot, in canonical slot order.

    Codes must be unique across slots and free of underscores so that a
    super-feature name parses back unambiguously.
    """

    values: tuple  # ((slot, (code, ...)), ...)
    midpoint: float = 0.0

    def __post_init__(self):
        slots = [s for s, _ in self.values]
        if "shape" not in slots:
            raise CharacterisationError("vocabulary must contain the shape slot")
        if "side" in slots:
            raise CharacterisationError("side is derived from x; do not list it")
        if slots != sorted(slots, key=SLOTS.index):
            raise CharacterisationError(f"slots {slots} not in canonical order {SLOTS}")
        seen: dict[str, str] = {}
        for slot, codes in self.values + (("side", SIDE_VALUES),):
            for code in codes:
                if "_" in code or not code:
                    raise CharacterisationError(f"bad value code {code!r} in slot {slot}")
                if code in seen:
                    raise CharacterisationError(
                        f"value code {code!r} appears in slots {seen[code]} and {slot}"
                    )
                seen[code] = slot

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Sequence[str]], midpoint: float = 0.0):
        ordered = tuple(
            (slot, tuple(mapping[slot])) for slot in SLOTS if slot in mapping and slot != "side"
        )
        return cls(ordered, float(midpoint))

    @classmethod
    def clevr(cls) -> "AttributeVocabulary":
        return cls.from_mapping(CLEVR_VALUES)

    def as_mapping(self) -> dict[str, list[str]]:
        return {slot: list(codes) for slot, codes in self.values}

    def slot_names(self, positional: bool = False) -> tuple[str, ...]:
        names = tuple(s for s, _ in self.values)
        return names + ("side",) if positional else names

    def codes(self, slot: str) -> tuple[str, ...]:
        if slot == "side":
            return SIDE_VALUES
        return dict(self.values)[slot]

    @cached_property
    def slot_of_code(self) -> dict[str, str]:
        out = {code: slot for slot, codes in self.values for code in codes}
        out.update({code: "side" for code in SIDE_VALUES})
        return out

    @cached_property
    def _code_sets(self) -> dict[str, frozenset]:
        return {slot: frozenset(codes) for slot, codes in self.values}

    def object_values(self, obj, use_position: bool, where: str = "object") -> dict[str, str]:
        """Attribute values of ``obj`` keyed by slot, validated."""
        out = {}
        for slot, allowed in self._code_sets.items():
            value = getattr(obj, slot)
            if value not in allowed:
                raise CharacterisationError(
                    f"{where}: value {value!r} for slot {slot!r} is not in the vocabulary"
                )
            out[slot] = value
        if use_position:
            out["side"] = "left" if obj.x < self.midpoint else "right"
        return out


CLEVR_VALUES = {
    "size": ("sm", "l"),
    "color": ("gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow"),
    "material": ("m", "ru"),
    "shape": ("cu", "sp", "cy"),
}


@dataclass(frozen=True, order=True)
class SuperFeature:
    """A partial attribute assignment, e.g. ``(("size","sm"),("shape","sp"))``."""

    assignment: tuple

    def __post_init__(self):
        if not self.assignment:
            raise CharacterisationError("a super-feature assigns at least one slot")
        slots = [s for s, _ in self.assignment]
        if slots != sorted(slots, key=SLOTS.index) or len(set(slots)) != len(slots):
            raise CharacterisationError(f"assignment {self.assignment} not canonical")

    @classmethod
    def of(cls, **values: str) -> "SuperFeature":
        return cls(tuple((s, values[s]) for s in SLOTS if s in values))

    @classmethod
    def parse(cls, name: str, vocabulary: AttributeVocabulary) -> "SuperFeature":
        pairs = []
        for code in name.split("_"):
            slot = vocabulary.slot_of_code.get(code)
            if slot is None:
                raise CharacterisationError(f"unknown value code {code!r} in feature {name!r}")
            pairs.append((slot, code))
        pairs.sort(key=lambda p: SLOTS.index(p[0]))
        return cls(tuple(pairs))

    @property
    def name(self) -> str:
        return "_".join(code for _, code in self.assignment)

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.assignment)

    def matches(self, values: Mapping[str, str]) -> bool:
        return all(values.get(slot) == code for slot, code in self.assignment)

    def generalises(self, other: "SuperFeature") -> bool:
        """True when ``self`` is a strictly smaller partial assignment of ``other``."""
        return len(self.assignment) < len(other.assignment) and set(self.assignment) <= set(
            other.assignment
        )

    def __str__(self):
        return self.name


def enumerate_superfeatures(
    vocabulary: AttributeVocabulary, max_slots: int, positional: bool = False
) -> list[SuperFeature]:
    """All super-features with the shape slot plus up to ``max_slots - 1`` others."""
    if max_slots < 1:
        raise ValueError("max_slots must be >= 1")
    others = [s for s in vocabulary.slot_names(positional) if s != "shape"]
    out = []
    for r in range(0, max_slots):
        for combo in itertools.combinations(others, r):
            slots = sorted(combo + ("shape",), key=SLOTS.index)
            for codes in itertools.product(*(vocabulary.codes(s) for s in slots)):
                out.append(SuperFeature(tuple(zip(slots, codes))))
    out.sort(key=lambda f: (len(f.assignment), [SLOTS.index(s) for s in f.slots], f.name))
    return out


@dataclass(frozen=True)
class FeatureSelection:
    """Active super-features for one model.

    With ``combine=False`` each object contributes every matching feature
    (used with single-attribute features when feature combination is
    switched off); otherwise it contributes only its most specific match.
    """

    features: frozenset
    combine: bool = True

    @classmethod
    def from_names(cls, names: Iterable[str], vocabulary: AttributeVocabulary, combine=True):
        return cls(frozenset(SuperFeature.parse(n, vocabulary) for n in names), combine)

    @classmethod
    def single_attribute(cls, vocabulary: AttributeVocabulary, positional: bool = False):
        feats = frozenset(
            SuperFeature(((slot, code),))
            for slot in vocabulary.slot_names(positional)
            for code in vocabulary.codes(slot)
        )
        return cls(feats, combine=False)

    @property
    def names(self) -> list[str]:
        return sorted(f.name for f in self.features)

    @cached_property
    def _lookup(self):
        # masks ordered most specific first; equal sizes by canonical slot order
        by_mask: dict[tuple, dict[tuple, str]] = {}
        for f in self.features:
            by_mask.setdefault(f.slots, {})[tuple(c for _, c in f.assignment)] = f.name
        masks = sorted(by_mask, key=lambda m: (-len(m), [SLOTS.index(s) for s in m]))
        return [(m, by_mask[m]) for m in masks]

    def match(self, values: Mapping[str, str]) -> list[str]:
        hits = []
        for mask, table in self._lookup:
            key = tuple(values.get(s) for s in mask)
            name = table.get(key)
            if name is not None:
                if self.combine:
                    return [name]
                hits.append(name)
        return hits


@dataclass(frozen=True)
class Characterisation:
    """A set of feature names, or a feature -> positive count mapping."""

    kind: Kind
    items: tuple = ()  # sorted ((name, count), ...), counts >= 1

    def __post_init__(self):
        for name, count in self.items:
            if not isinstance(count, (int, np.integer)) or count < 1:
                raise CharacterisationError(f"count for {name!r} must be a positive integer")
            if self.kind is Kind.SET and count != 1:
                raise CharacterisationError("set characterisations have unit counts")
        names = [n for n, _ in self.items]
        if names != sorted(set(names)):
            raise CharacterisationError("characterisation items must be sorted and unique")

    @classmethod
    def of_set(cls, names: Iterable[str]) -> "Characterisation":
        return cls(Kind.SET, tuple((n, 1) for n in sorted(set(names))))

    @classmethod
    def of_counts(cls, counts: Mapping[str, int]) -> "Characterisation":
        return cls(Kind.COUNT, tuple(sorted((n, int(c)) for n, c in counts.items() if c)))

    @property
    def features(self) -> frozenset:
        return frozenset(n for n, _ in self.items)

    def count(self, name: str) -> int:
        return dict(self.items).get(name, 0)

    def as_dict(self) -> dict[str, int]:
        return dict(self.items)

    def __len__(self):
        return len(self.items)

    def __str__(self):
        if not self.items:
            return "∅"
        if self.kind is Kind.SET:
            return "{" + ", ".join(n for n, _ in self.items) + "}"
        return "(" + ", ".join(f"{n}:{c}" for n, c in self.items) + ")"


@dataclass(frozen=True)
class Case:
    characterisation: Characterisation
    outcome: Hashable
    confidence: float = 1.0
    provenance: str = ""

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise CharacterisationError(f"confidence {self.confidence} outside [0, 1]")


def default_characterisation(kind: Kind) -> Characterisation:
    return Characterisation(Kind(kind), ())


def _check_kinds(a: Characterisation, b: Characterisation) -> None:
    if a.kind is not b.kind:
        raise CharacterisationError(f"cannot compare {a.kind.value} with {b.kind.value}")


def at_least_as_exceptional(a: Characterisation, b: Characterisation) -> bool:
    _check_kinds(a, b)
    mine = dict(a.items)
    return all(mine.get(n, 0) >= c for n, c in b.items)


def more_exceptional(a: Characterisation, b: Characterisation) -> bool:
    """Strict order: ``a`` dominates ``b`` featurewise and differs from it."""
    return at_least_as_exceptional(a, b) and a.items != b.items


def irrelevant(x_new: Characterisation, x_case: Characterisation) -> bool:
    return not at_least_as_exceptional(x_new, x_case)


def characterise(
    scene,
    selection: FeatureSelection,
    kind: Kind,
    use_position: bool = False,
    vocabulary: AttributeVocabulary | None = None,
) -> Characterisation:
    vocabulary = vocabulary or AttributeVocabulary.clevr()
    tally: dict[str, int] = {}
    for i, obj in enumerate(scene.objects):
        where = f"scene {getattr(scene, 'image_id', '?')} object {i}"
        values = vocabulary.object_values(obj, use_position, where)
        names = selection.match(values)
        if not names:
            log.debug("%s matches no active super-feature", where)
        for name in names:
            tally[name] = tally.get(name, 0) + 1
    if Kind(kind) is Kind.SET:
        return Characterisation.of_set(tally)
    return Characterisation.of_counts(tally)


# --------------------------------------------------------------------------
# feature selection


def _entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def presence_scores(
    scenes: Sequence,
    positive: Sequence[bool],
    candidates: Sequence[SuperFeature],
    vocabulary: AttributeVocabulary,
    use_position: bool = False,
) -> dict[SuperFeature, float]:
    """Mutual information (bits) between feature presence and a binary label."""
    positive = np.asarray(positive, dtype=bool)
    n = len(scenes)
    if n == 0:
        return {f: 0.0 for f in candidates}
    by_mask: dict[tuple, list[SuperFeature]] = {}
    for f in candidates:
        by_mask.setdefault(f.slots, []).append(f)
    present: dict[SuperFeature, np.ndarray] = {}
    object_values = [
        [vocabulary.object_values(o, use_position) for o in s.objects] for s in scenes
    ]
    for mask, feats in by_mask.items():
        seen: dict[tuple, set] = {}
        for i, objs in enumerate(object_values):
            for values in objs:
                seen.setdefault(tuple(values.get(s) for s in mask), set()).add(i)
        for f in feats:
            idx = seen.get(tuple(c for _, c in f.assignment), ())
            row = np.zeros(n, dtype=bool)
            row[list(idx)] = True
            present[f] = row
    h_y = _entropy(positive.mean())
    scores = {}
    for f, row in present.items():
        k = row.sum()
        cond = 0.0
        if k:
            cond += k / n * _entropy(positive[row].mean())
        if n - k:
            cond += (n - k) / n * _entropy(positive[~row].mean())
        scores[f] = max(h_y - cond, 0.0)
    return scores


def _compete(a: SuperFeature, b: SuperFeature) -> bool:
    """True when both fix the same number of slots and some object matches both,
    so most-specific matching would hand that object to only one of them."""
    if a == b or len(a.assignment) != len(b.assignment):
        return False
    av, bv = dict(a.assignment), dict(b.assignment)
    return all(av[s] == bv[s] for s in av.keys() & bv.keys())


def select_by_information(
    scores: Mapping[SuperFeature, float], top_k: int, tolerance: float
) -> list[SuperFeature]:
    """Top-scoring features, preferring a more general feature whenever it
    scores within ``tolerance`` (relative) of a more specific one.

    A feature that would tie with an already chosen one on some object is
    skipped, since it could never fire there. A specialisation held back only
    by such a skipped generalisation becomes eligible again.
    """
    ranked = sorted(
        (f for f, s in scores.items() if s > 1e-12),
        key=lambda f: (-scores[f], len(f.assignment), f.name),
    )
    generals = {
        f: [
            g
            for r in range(1, len(f.assignment))
            for sub in itertools.combinations(f.assignment, r)
            if scores.get(g := SuperFeature(sub), -1.0) >= (1.0 - tolerance) * scores[f]
        ]
        for f in ranked
    }
    shadowed: set[SuperFeature] = set()
    while True:
        chosen: list[SuperFeature] = []
        skipped: set[SuperFeature] = set()
        for f in ranked:
            if len(chosen) == top_k:
                break
            if any(g not in shadowed for g in generals[f]):
                continue
            if any(_compete(f, g) for g in chosen):
                skipped.add(f)
                continue
            chosen.append(f)
        if skipped <= shadowed:
            return chosen
        shadowed |= skipped


@dataclass(frozen=True)
class SelectionSpec:
    """How a model's :class:`FeatureSelection` is obtained.

    ``mode`` is one of:
      * ``"mi"``: rank super-features of up to ``max_slots`` slots by mutual
        information with the model's binary label, keep ``top_k``;
      * ``"slots"``: every super-feature over exactly shape + ``slots``;
      * ``"explicit"``: the listed ``names``;
      * ``"single"``: single-attribute features, no combination.
    """

    mode: str = "mi"
    max_slots: int = 3
    top_k: int = 6
    tolerance: float = 0.1
    slots: tuple = ()
    names: tuple = ()

    def __post_init__(self):
        if self.mode not in ("mi", "slots", "explicit", "single"):
            raise ValueError(f"unknown selection mode {self.mode!r}")
        if self.mode == "explicit" and not self.names:
            raise ValueError("explicit selection needs feature names")

    def resolve(
        self,
        vocabulary: AttributeVocabulary,
        use_position: bool = False,
        scenes: Sequence = (),
        positive: Sequence[bool] = (),
    ) -> FeatureSelection:
        if self.mode == "single":
            return FeatureSelection.single_attribute(vocabulary, use_position)
        if self.mode == "explicit":
            return FeatureSelection.from_names(self.names, vocabulary)
        if self.mode == "slots":
            slots = sorted(set(self.slots) | {"shape"}, key=SLOTS.index)
            for s in slots:
                if s not in vocabulary.slot_names(True):
                    raise CharacterisationError(f"unknown slot {s!r}")
            feats = frozenset(
                SuperFeature(tuple(zip(slots, codes)))
                for codes in itertools.product(*(vocabulary.codes(s) for s in slots))
            )
            return FeatureSelection(feats)
        candidates = enumerate_superfeatures(vocabulary, self.max_slots, use_position)
        scores = presence_scores(scenes, positive, candidates, vocabulary, use_position)
        chosen = select_by_information(scores, self.top_k, self.tolerance)
        if not chosen:
            # nothing informative: fall back to plain shapes
            chosen = [f for f in candidates if f.slots == ("shape",)]
        return FeatureSelection(frozenset(chosen))

    def to_dict(self) -> dict:
        if self.mode == "mi":
            return {"mode": "mi", "max_slots": self.max_slots, "top_k": self.top_k,
                    "tolerance": self.tolerance}
        if self.mode == "slots":
            return {"mode": "slots", "slots": list(self.slots)}
        if self.mode == "explicit":
            return {"mode": "explicit", "names": list(self.names)}
        return {"mode": "single"}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SelectionSpec":
        d = dict(d)
        for key in ("slots", "names"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)
