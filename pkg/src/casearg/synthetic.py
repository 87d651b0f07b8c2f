"""Seeded CLEVR-Hans-style scene generator with planted class rules.

A class rule is a conjunction of requirements "at least ``count`` objects
match this partial assignment" (the assignment may include ``side``). A rule
with no requirements is a catch-all: it holds when no other rule does.
Every generated scene satisfies exactly its own class rule before noise is
applied.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .features import SLOTS, AttributeVocabulary
from .io import MAX_OBJECTS, ObjectRecord, SceneRecord

X_RANGE = (-3.0, 3.0)
ATTRIBUTES = ("size", "color", "material", "shape")


class RuleError(ValueError):
    pass


def _pattern(d: Mapping[str, str]) -> tuple:
    return tuple((s, d[s]) for s in SLOTS if s in d)


@dataclass(frozen=True)
class Requirement:
    pattern: tuple  # ((slot, code), ...)
    count: int = 1


@dataclass(frozen=True)
class ClassRule:
    label: int
    requires: tuple = ()

    @property
    def catch_all(self) -> bool:
        return not self.requires


@dataclass(frozen=True)
class Confounder:
    """In confounded splits, objects of ``label`` scenes matching ``pattern``
    get ``slot`` forced to ``value``."""

    label: int
    pattern: tuple
    slot: str
    value: str


@dataclass(frozen=True)
class RuleSet:
    rules: tuple
    confounders: tuple = ()
    distractors: tuple = (0, 3)
    vocabulary: AttributeVocabulary = field(default_factory=AttributeVocabulary.clevr)

    @classmethod
    def from_dict(cls, d) -> "RuleSet":
        vocab = AttributeVocabulary.clevr()
        if d.get("vocabulary"):
            vocab = AttributeVocabulary.from_mapping(d["vocabulary"]["slots"],
                                                     d["vocabulary"].get("midpoint", 0.0))
        rules = tuple(
            ClassRule(r["label"], tuple(
                Requirement(_pattern(q["pattern"]), int(q.get("count", 1))) for q in r.get("requires", ())
            ))
            for r in d["classes"]
        )
        confounders = tuple(
            Confounder(c["label"], _pattern(c["pattern"]), c["slot"], c["value"])
            for c in d.get("confounders", ())
        )
        return cls(rules, confounders, tuple(d.get("distractors", (0, 3))), vocab)

    def to_dict(self) -> dict:
        return {
            "classes": [
                {"label": r.label,
                 "requires": [{"pattern": dict(q.pattern), "count": q.count} for q in r.requires]}
                for r in self.rules
            ],
            "confounders": [
                {"label": c.label, "pattern": dict(c.pattern), "slot": c.slot, "value": c.value}
                for c in self.confounders
            ],
            "distractors": list(self.distractors),
        }

    @property
    def labels(self) -> list[int]:
        return [r.label for r in self.rules]


def object_side(obj, vocabulary: AttributeVocabulary) -> str:
    return "left" if obj.x < vocabulary.midpoint else "right"


def object_matches(obj, pattern, vocabulary: AttributeVocabulary) -> bool:
    for slot, code in pattern:
        value = object_side(obj, vocabulary) if slot == "side" else getattr(obj, slot)
        if value != code:
            return False
    return True


def rule_holds(rule: ClassRule, objects: Sequence, vocabulary: AttributeVocabulary) -> bool:
    return all(
        sum(object_matches(o, q.pattern, vocabulary) for o in objects) >= q.count
        for q in rule.requires
    )


def satisfied_labels(rules: RuleSet, objects: Sequence) -> list[int]:
    """Labels whose rule holds for ``objects`` (catch-all only if nothing else does)."""
    hits = [r.label for r in rules.rules if not r.catch_all and rule_holds(r, objects, rules.vocabulary)]
    if not hits:
        hits = [r.label for r in rules.rules if r.catch_all]
    return hits


def _validate(rules: RuleSet) -> None:
    vocab = rules.vocabulary
    labels = rules.labels
    if len(set(labels)) != len(labels):
        raise RuleError("duplicate class labels in rule set")
    if sum(r.catch_all for r in rules.rules) > 1:
        raise RuleError("at most one catch-all class")
    lo, hi = rules.distractors
    if lo < 0 or hi < lo:
        raise RuleError(f"bad distractor range {rules.distractors}")
    for r in rules.rules:
        total = 0
        for q in r.requires:
            if q.count < 1:
                raise RuleError(f"class {r.label}: requirement counts must be >= 1")
            total += q.count
            for slot, code in q.pattern:
                if slot not in vocab.slot_names(True) or code not in vocab.codes(slot):
                    raise RuleError(f"class {r.label}: {slot}={code!r} not in the vocabulary")
        if total > MAX_OBJECTS:
            raise RuleError(f"class {r.label} needs {total} objects, more than {MAX_OBJECTS}")
    for c in rules.confounders:
        if c.label not in labels:
            raise RuleError(f"confounder for unknown class {c.label}")
        if c.slot not in ATTRIBUTES or c.value not in vocab.codes(c.slot):
            raise RuleError(f"confounder value {c.slot}={c.value!r} not in the vocabulary")


def _random_object(rng, vocab: AttributeVocabulary, pattern=()) -> dict:
    fixed = dict(pattern)
    obj = {s: fixed.get(s) or vocab.codes(s)[rng.integers(len(vocab.codes(s)))] for s in ATTRIBUTES}
    side = fixed.get("side")
    lo, hi = X_RANGE
    if side == "left":
        hi = vocab.midpoint - 1e-3
    elif side == "right":
        lo = vocab.midpoint
    obj["x"] = float(rng.uniform(lo, hi))
    return obj


def _flip(rng, vocab, obj: dict, noise: float) -> bool:
    flipped = False
    for s in ATTRIBUTES:
        if noise > 0 and rng.random() < noise:
            others = [c for c in vocab.codes(s) if c != obj[s]]
            obj[s] = others[rng.integers(len(others))]
            flipped = True
    return flipped


def generate_synthetic(
    rules: RuleSet,
    scenes_per_class: int,
    noise: float = 0.0,
    seed: int = 0,
    confound: bool = False,
    id_prefix: str = "s",
    max_attempts: int = 2000,
) -> list[SceneRecord]:
    """Labelled scenes, ``scenes_per_class`` per rule, in shuffled order.

    Objects get confidence in [0.9, 1] unless one of their attributes was
    flipped by noise, in which case it drops to [0.3, 0.7].
    """
    _validate(rules)
    if not 0.0 <= noise <= 1.0:
        raise RuleError("noise must lie in [0, 1]")
    vocab = rules.vocabulary
    rng = np.random.default_rng(seed)
    confounders = {}
    for c in rules.confounders:
        confounders.setdefault(c.label, []).append(c)
    lo, hi = rules.distractors
    drafts = []
    for rule in rules.rules:
        for _ in range(scenes_per_class):
            for _attempt in range(max_attempts):
                objs = [_random_object(rng, vocab, q.pattern) for q in rule.requires for _ in range(q.count)]
                room = MAX_OBJECTS - len(objs)
                n_extra = int(rng.integers(min(lo, room), min(hi, room) + 1))
                objs += [_random_object(rng, vocab) for _ in range(n_extra)]
                if confound:
                    for c in confounders.get(rule.label, ()):
                        for o in objs:
                            if object_matches(_Obj(o), c.pattern, vocab):
                                o[c.slot] = c.value
                records = [_Obj(o) for o in objs]
                if satisfied_labels(rules, records) == [rule.label]:
                    break
            else:
                raise RuleError(
                    f"class {rule.label}: no scene satisfying only this rule after {max_attempts} tries"
                )
            drafts.append((rule.label, objs))
    order = rng.permutation(len(drafts))
    scenes = []
    for n, i in enumerate(order):
        label, objs = drafts[i]
        perm = rng.permutation(len(objs))
        records = []
        for j in perm:
            o = dict(objs[j])
            flipped = _flip(rng, vocab, o, noise)
            conf = rng.uniform(0.3, 0.7) if flipped else rng.uniform(0.9, 1.0)
            records.append(ObjectRecord(o["size"], o["color"], o["material"], o["shape"],
                                        round(o["x"], 4), round(float(conf), 4)))
        scenes.append(SceneRecord(f"{id_prefix}{n:06d}", label, tuple(records)))
    return scenes


class _Obj:
    __slots__ = ("size", "color", "material", "shape", "x")

    def __init__(self, d):
        self.size, self.color, self.material, self.shape, self.x = (
            d["size"], d["color"], d["material"], d["shape"], d["x"]
        )


def _req(count=1, **pattern) -> Requirement:
    return Requirement(_pattern(pattern), count)


def hans3_rules(distractors=(0, 3)) -> RuleSet:
    """Three classes in the spirit of CLEVR-Hans3, grey-cube confounder on class 0."""
    return RuleSet(
        (
            ClassRule(0, (_req(size="l", shape="cu"), _req(size="l", shape="cy"))),
            ClassRule(1, (_req(size="sm", material="m", shape="cu"), _req(size="sm", shape="sp"))),
            ClassRule(2, (_req(size="l", color="blue", shape="sp"),
                          _req(size="sm", color="yellow", shape="sp"))),
        ),
        (Confounder(0, _pattern({"size": "l", "shape": "cu"}), "color", "gray"),),
        tuple(distractors),
    )


def hans7_rules(distractors=(0, 3)) -> RuleSet:
    """Six classes shaped like the modified CLEVR-Hans7 (labels 0, 1, 3, 4, 5, 6);
    classes 4 and 5 differ only by which side two small cylinders sit on."""
    base = hans3_rules(distractors)
    r0, r1, r3 = base.rules[0], base.rules[1], ClassRule(3, base.rules[2].requires)
    return RuleSet(
        (
            r0,
            r1,
            r3,
            ClassRule(4, (_req(2, size="sm", shape="cy", side="right"),)),
            ClassRule(5, (_req(2, size="sm", shape="cy", side="left"),)),
            ClassRule(6, (_req(3, shape="cu"),)),
        ),
        base.confounders,
        tuple(distractors),
    )


RULE_PRESETS = {"hans3": hans3_rules, "hans7": hans7_rules}
