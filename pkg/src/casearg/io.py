"""Scene-annotation ingestion, config files and trained-model bundles.

Scene files are line-delimited JSON, one scene per line::

    {"image_id": "img0", "class_label": 1,
     "objects": [{"size": "sm", "color": "gray", "material": "m",
                  "shape": "cu", "x": -1.2, "confidence": 0.97}]}
"""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from importlib import resources
from typing import IO, Iterable, Iterator

from .aacbr import Casebase
from .features import (
    AttributeVocabulary,
    Case,
    Characterisation,
    FeatureSelection,
    Kind,
)
from .multiclass import (
    BinaryModelConfig,
    TournamentConfig,
    TrainedModel,
    TrainedTournament,
)

MAX_OBJECTS = 10
OBJECT_FIELDS = ("size", "color", "material", "shape", "x", "confidence")
SCENE_FIELDS = ("image_id", "class_label", "objects")


@dataclass(frozen=True)
class ObjectRecord:
    size: str
    color: str
    material: str
    shape: str
    x: float
    confidence: float = 1.0


@dataclass(frozen=True)
class SceneRecord:
    image_id: str
    class_label: int | None
    objects: tuple = ()


class SceneFormatError(ValueError):
    """Base class for scene-file violations; carries line number and field path."""

    def __init__(self, message: str, line: int, path: str = ""):
        self.line = line
        self.path = path
        where = f"line {line}" + (f", {path}" if path else "")
        super().__init__(f"{where}: {message}")


class MalformedSceneError(SceneFormatError):
    pass


class UnknownValueError(SceneFormatError):
    pass


class ConfidenceRangeError(SceneFormatError):
    pass


class DuplicateImageError(SceneFormatError):
    pass


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _parse_object(raw, lineno: int, path: str, vocabulary: AttributeVocabulary) -> ObjectRecord:
    if not isinstance(raw, dict):
        raise MalformedSceneError("object must be a JSON object", lineno, path)
    extra = set(raw) - set(OBJECT_FIELDS)
    if extra:
        raise MalformedSceneError(f"unexpected fields {sorted(extra)}", lineno, path)
    for name in OBJECT_FIELDS:
        if name not in raw:
            raise MalformedSceneError("missing field", lineno, f"{path}.{name}")
    slots = dict(vocabulary.values)
    for slot in ("size", "color", "material", "shape"):
        value = raw[slot]
        if not isinstance(value, str):
            raise MalformedSceneError("expected a string", lineno, f"{path}.{slot}")
        if slot in slots and value not in slots[slot]:
            raise UnknownValueError(f"unknown {slot} code {value!r}", lineno, f"{path}.{slot}")
    if not _is_number(raw["x"]):
        raise MalformedSceneError("expected a number", lineno, f"{path}.x")
    conf = raw["confidence"]
    if not _is_number(conf):
        raise MalformedSceneError("expected a number", lineno, f"{path}.confidence")
    if not 0.0 <= conf <= 1.0:
        raise ConfidenceRangeError(f"confidence {conf} outside [0, 1]", lineno, f"{path}.confidence")
    return ObjectRecord(raw["size"], raw["color"], raw["material"], raw["shape"],
                        float(raw["x"]), float(conf))


def iter_scenes(
    source: IO | Iterable,
    vocabulary: AttributeVocabulary | None = None,
    max_objects: int = MAX_OBJECTS,
) -> Iterator[SceneRecord]:
    """Stream scenes from line-delimited JSON (text or bytes lines); fail fast."""
    vocabulary = vocabulary or AttributeVocabulary.clevr()
    seen: set = set()
    for lineno, line in enumerate(source, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedSceneError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(raw, dict):
            raise MalformedSceneError("scene must be a JSON object", lineno)
        extra = set(raw) - set(SCENE_FIELDS)
        if extra:
            raise MalformedSceneError(f"unexpected fields {sorted(extra)}", lineno)
        if "image_id" not in raw or not isinstance(raw["image_id"], str):
            raise MalformedSceneError("image_id must be a string", lineno, "image_id")
        label = raw.get("class_label")
        if label is not None and (not isinstance(label, int) or isinstance(label, bool)):
            raise MalformedSceneError("class_label must be an integer or null", lineno, "class_label")
        objs = raw.get("objects")
        if not isinstance(objs, list):
            raise MalformedSceneError("objects must be a list", lineno, "objects")
        if len(objs) > max_objects:
            raise MalformedSceneError(
                f"{len(objs)} objects exceed the maximum of {max_objects}", lineno, "objects"
            )
        if raw["image_id"] in seen:
            raise DuplicateImageError(f"duplicate image_id {raw['image_id']!r}", lineno, "image_id")
        seen.add(raw["image_id"])
        objects = tuple(
            _parse_object(o, lineno, f"objects[{i}]", vocabulary) for i, o in enumerate(objs)
        )
        yield SceneRecord(raw["image_id"], label, objects)


def parse_scenes(source, vocabulary=None, max_objects: int = MAX_OBJECTS) -> list[SceneRecord]:
    if isinstance(source, (bytes, str)):
        source = io.StringIO(source.decode("utf-8") if isinstance(source, bytes) else source)
    return list(iter_scenes(source, vocabulary, max_objects))


def scene_to_dict(scene: SceneRecord) -> dict:
    return {
        "image_id": scene.image_id,
        "class_label": scene.class_label,
        "objects": [
            {"size": o.size, "color": o.color, "material": o.material, "shape": o.shape,
             "x": o.x, "confidence": o.confidence}
            for o in scene.objects
        ],
    }


def emit_scenes(scenes: Iterable[SceneRecord]) -> str:
    return "".join(json.dumps(scene_to_dict(s)) + "\n" for s in scenes)


def read_scene_file(path, vocabulary=None) -> list[SceneRecord]:
    with open(path, "rb") as fh:
        return list(iter_scenes(fh, vocabulary))


def write_scene_file(path, scenes) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_scenes(scenes))


# --------------------------------------------------------------------------
# configs and presets


def vocabulary_to_dict(v: AttributeVocabulary) -> dict:
    return {"slots": v.as_mapping(), "midpoint": v.midpoint}


def vocabulary_from_dict(d) -> AttributeVocabulary:
    if d is None or d == "clevr":
        return AttributeVocabulary.clevr()
    return AttributeVocabulary.from_mapping(d["slots"], d.get("midpoint", 0.0))


def load_config(path) -> tuple[TournamentConfig, AttributeVocabulary]:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def config_from_dict(d) -> tuple[TournamentConfig, AttributeVocabulary]:
    return TournamentConfig.from_dict(d), vocabulary_from_dict(d.get("vocabulary"))


def config_to_dict(config: TournamentConfig, vocabulary: AttributeVocabulary | None = None) -> dict:
    out = config.to_dict()
    if vocabulary is not None:
        out["vocabulary"] = vocabulary_to_dict(vocabulary)
    return out


PRESETS = ("hans3", "hans7")


def load_preset(name: str) -> TournamentConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("casearg").joinpath(f"presets/{name}.json").read_text("utf-8")
    return config_from_dict(json.loads(text))[0]


# --------------------------------------------------------------------------
# bundles

BUNDLE_FORMAT = "casearg-bundle"
BUNDLE_VERSION = 1


class BundleError(ValueError):
    pass


class BundleVersionError(BundleError):
    pass


class BundleChecksumError(BundleError):
    pass


def _characterisation_to_json(ch: Characterisation):
    if ch.kind is Kind.SET:
        return [n for n, _ in ch.items]
    return {n: c for n, c in ch.items}


def _characterisation_from_json(kind: Kind, raw) -> Characterisation:
    if kind is Kind.SET:
        return Characterisation.of_set(raw)
    return Characterisation.of_counts(raw)


def tournament_to_dict(t: TrainedTournament) -> dict:
    models = []
    for m in t.models:
        cb = m.casebase
        models.append({
            "config": m.config.to_dict(),
            "selection": {"features": m.selection.names, "combine": m.selection.combine},
            "casebase": {
                "kind": cb.kind.value,
                "default_outcome": cb.default_outcome,
                "other_outcome": cb.other_outcome,
                "cases": [
                    {"x": _characterisation_to_json(c.characterisation), "y": c.outcome,
                     "confidence": c.confidence, "provenance": c.provenance}
                    for c in cb.cases
                ],
            },
        })
    return {"labels": list(t.labels), "vocabulary": vocabulary_to_dict(t.vocabulary), "models": models}


def tournament_from_dict(d) -> TrainedTournament:
    vocabulary = vocabulary_from_dict(d["vocabulary"])
    models = []
    for raw in d["models"]:
        config = BinaryModelConfig.from_dict(raw["config"])
        sel = raw["selection"]
        selection = FeatureSelection.from_names(sel["features"], vocabulary, sel["combine"])
        cbd = raw["casebase"]
        kind = Kind(cbd["kind"])
        cases = tuple(
            Case(_characterisation_from_json(kind, c["x"]), c["y"], c["confidence"], c["provenance"])
            for c in cbd["cases"]
        )
        models.append(TrainedModel(
            config, selection, Casebase(cases, cbd["default_outcome"], cbd["other_outcome"], kind)
        ))
    return TrainedTournament(tuple(d["labels"]), tuple(models), vocabulary)


def save_bundle(t: TrainedTournament) -> bytes:
    """Header line (format, version, length, sha256) followed by the JSON payload."""
    payload = json.dumps(tournament_to_dict(t), sort_keys=True).encode("utf-8")
    header = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "length": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + payload


def load_bundle(data: bytes) -> TrainedTournament:
    head, sep, payload = data.partition(b"\n")
    try:
        header = json.loads(head)
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise BundleChecksumError("bundle header unreadable") from None
    if not isinstance(header, dict) or header.get("format") != BUNDLE_FORMAT:
        raise BundleError("not a casearg bundle")
    if header.get("version") != BUNDLE_VERSION:
        raise BundleVersionError(
            f"bundle version {header.get('version')!r} unsupported (expected {BUNDLE_VERSION})"
        )
    if not sep or len(payload) != header.get("length") or (
        hashlib.sha256(payload).hexdigest() != header.get("sha256")
    ):
        raise BundleChecksumError("bundle payload failed its checksum (truncated or corrupted)")
    return tournament_from_dict(json.loads(payload))


def write_bundle(path, t: TrainedTournament) -> None:
    with open(path, "wb") as fh:
        fh.write(save_bundle(t))


def read_bundle(path) -> TrainedTournament:
    with open(path, "rb") as fh:
        return load_bundle(fh.read())
