"""Rebuild the worked example: a four-case Set casebase over a
two-size vocabulary and one new scene.

    python fixtures/make_worked_example.py   # writes worked_example.bundle, worked_example_scene.jsonl
"""
from pathlib import Path

from casearg.aacbr import Casebase
from casearg.features import AttributeVocabulary, Case, Characterisation, FeatureSelection, Kind, SelectionSpec
from casearg.io import ObjectRecord, SceneRecord, write_bundle, write_scene_file
from casearg.multiclass import BinaryModelConfig, TrainedModel, TrainedTournament

HERE = Path(__file__).resolve().parent

VOCABULARY = AttributeVocabulary.from_mapping({
    "size": ["s", "l"],
    "color": ["gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow"],
    "material": ["m", "ru"],
    "shape": ["cu", "sp", "cy"],
})
FEATURES = ("l_cy", "l_cu", "s_sp", "cu")
CASES = (  # C1..C4
    ({"l_cy"}, 1),
    ({"l_cy", "l_cu", "s_sp"}, 1),
    ({"l_cy", "l_cu"}, 0),
    ({"s_sp"}, 1),
)


def build() -> TrainedTournament:
    config = BinaryModelConfig(
        focus=1, opponent=0, default="opponent", kind="set",
        selection=SelectionSpec("explicit", names=FEATURES),
    )
    cases = tuple(
        Case(Characterisation.of_set(x), y, 1.0, f"worked_example:C{i + 1}") for i, (x, y) in enumerate(CASES)
    )
    model = TrainedModel(
        config, FeatureSelection.from_names(FEATURES, VOCABULARY), Casebase(cases, 0, 1, Kind.SET)
    )
    return TrainedTournament((0, 1), (model,), VOCABULARY)


# a large cylinder, a large cube and a small cube, no small sphere
SCENE = SceneRecord("worked_example", 0, (
    ObjectRecord("l", "gray", "m", "cy", -1.0, 1.0),
    ObjectRecord("l", "red", "ru", "cu", 1.0, 1.0),
    ObjectRecord("s", "blue", "m", "cu", 2.0, 1.0),
))

if __name__ == "__main__":
    write_bundle(HERE / "worked_example.bundle", build())
    write_scene_file(HERE / "worked_example_scene.jsonl", [SCENE])
