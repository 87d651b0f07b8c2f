import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casearg.features import (
    AttributeVocabulary,
    Characterisation,
    CharacterisationError,
    FeatureSelection,
    Kind,
    SelectionSpec,
    SuperFeature,
    at_least_as_exceptional,
    characterise,
    default_characterisation,
    enumerate_superfeatures,
    irrelevant,
    more_exceptional,
    presence_scores,
    select_by_information,
)
from casearg.io import ObjectRecord, SceneRecord
from oracles import counter_gt, gt

CLEVR = AttributeVocabulary.clevr()


def obj(size, color, material, shape, x=0.0, confidence=1.0):
    return ObjectRecord(size, color, material, shape, x, confidence)


def scene(*objects):
    return SceneRecord("t", None, tuple(objects))


S = Characterisation.of_set
C = Characterisation.of_counts


# ---------------------------------------------------------------- vocabulary


def test_vocabulary_requires_shape():
    with pytest.raises(CharacterisationError):
        AttributeVocabulary.from_mapping({"size": ["sm", "l"]})


def test_vocabulary_codes_must_be_unique_and_underscore_free():
    with pytest.raises(CharacterisationError):
        AttributeVocabulary.from_mapping({"size": ["a"], "shape": ["a"]})
    with pytest.raises(CharacterisationError):
        AttributeVocabulary.from_mapping({"shape": ["c_u"]})


def test_out_of_vocabulary_value_names_object_and_slot():
    s = scene(obj("huge", "red", "m", "cu"))
    with pytest.raises(CharacterisationError, match="size"):
        characterise(s, FeatureSelection.from_names(["cu"], CLEVR), Kind.SET)


def test_side_is_derived_from_midpoint():
    vals = CLEVR.object_values(obj("sm", "red", "m", "cu", x=-0.01), True)
    assert vals["side"] == "left"
    assert CLEVR.object_values(obj("sm", "red", "m", "cu", x=0.0), True)["side"] == "right"


# ---------------------------------------------------------------- super-features


def test_superfeature_name_roundtrip():
    f = SuperFeature.of(size="sm", material="m", shape="cu")
    assert f.name == "sm_m_cu"
    assert SuperFeature.parse("sm_m_cu", CLEVR) == f
    assert SuperFeature.parse("m_sm_cu", CLEVR) == f


def test_superfeature_unknown_code():
    with pytest.raises(CharacterisationError):
        SuperFeature.parse("sm_xx", CLEVR)


def test_enumerate_small_vocabulary():
    v = AttributeVocabulary.from_mapping({"size": ["sm", "l"], "shape": ["cu", "sp"]})
    names = {f.name for f in enumerate_superfeatures(v, 2)}
    assert names == {"cu", "sp", "sm_cu", "sm_sp", "l_cu", "l_sp"}


def test_enumerate_shape_only():
    assert [f.name for f in enumerate_superfeatures(CLEVR, 1)] == ["cu", "cy", "sp"]


def test_enumerate_full_clevr_count():
    # 3 shapes x (1+2 sizes)(1+8 colours)(1+2 materials) assignments
    feats = enumerate_superfeatures(CLEVR, 4)
    assert len(feats) == 3 * 3 * 9 * 3 == 243
    assert len(set(feats)) == len(feats)
    assert enumerate_superfeatures(CLEVR, 4) == feats


# ---------------------------------------------------------------- characterise


def test_characterise_set_combined_features():
    s = scene(obj("sm", "gray", "m", "cu"), obj("sm", "red", "ru", "sp"))
    sel = FeatureSelection.from_names(["sm_m_cu", "sm_sp"], CLEVR)
    assert characterise(s, sel, Kind.SET) == S(["sm_m_cu", "sm_sp"])


def test_characterise_counts():
    s = scene(obj("sm", "gray", "m", "cu"), obj("l", "red", "ru", "cu"), obj("l", "blue", "m", "cy"))
    sel = FeatureSelection.from_names(["cu", "l_cy"], CLEVR)
    assert characterise(s, sel, Kind.COUNT) == C({"cu": 2, "l_cy": 1})
    assert str(characterise(s, sel, Kind.COUNT)) == "(cu:2, l_cy:1)"


def test_characterise_empty_scene():
    sel = FeatureSelection.from_names(["cu"], CLEVR)
    assert characterise(scene(), sel, Kind.SET) == default_characterisation(Kind.SET)
    assert characterise(scene(), sel, Kind.COUNT) == default_characterisation(Kind.COUNT)


def test_most_specific_match_wins():
    sel = FeatureSelection.from_names(["cu", "sm_cu", "sm_m_cu"], CLEVR)
    s = scene(obj("sm", "gray", "m", "cu"), obj("sm", "gray", "ru", "cu"), obj("l", "gray", "ru", "cu"))
    assert characterise(s, sel, Kind.COUNT) == C({"sm_m_cu": 1, "sm_cu": 1, "cu": 1})


def test_equal_specificity_tie_break_uses_slot_order():
    # size_shape beats color_shape: size precedes colour in slot order
    sel = FeatureSelection.from_names(["sm_cu", "red_cu"], CLEVR)
    s = scene(obj("sm", "red", "m", "cu"))
    assert characterise(s, sel, Kind.SET) == S(["sm_cu"])


def test_unmatched_objects_are_dropped():
    sel = FeatureSelection.from_names(["sp"], CLEVR)
    assert characterise(scene(obj("sm", "red", "m", "cu")), sel, Kind.SET) == S([])


def test_position_features():
    sel = FeatureSelection.from_names(["sm_cy_left", "sm_cy_right"], CLEVR)
    s = scene(obj("sm", "red", "m", "cy", -2), obj("sm", "red", "m", "cy", 1), obj("sm", "red", "m", "cy", -1))
    assert characterise(s, sel, Kind.COUNT, use_position=True) == C({"sm_cy_left": 2, "sm_cy_right": 1})


def test_single_attribute_selection_emits_every_attribute():
    sel = FeatureSelection.single_attribute(CLEVR)
    got = characterise(scene(obj("sm", "red", "m", "cu")), sel, Kind.SET)
    assert got == S(["sm", "red", "m", "cu"])


objects_st = st.builds(
    obj,
    st.sampled_from(["sm", "l"]),
    st.sampled_from(["gray", "red", "blue"]),
    st.sampled_from(["m", "ru"]),
    st.sampled_from(["cu", "sp", "cy"]),
    st.floats(-3, 3),
)


@given(st.lists(objects_st, max_size=8), st.randoms())
@settings(max_examples=150, deadline=None)
def test_characterise_ignores_object_order(objs, rnd):
    sel = FeatureSelection.from_names(["cu", "l_cu", "sm_m_cu", "red_sp", "sp", "cy_left"], CLEVR)
    shuffled = list(objs)
    rnd.shuffle(shuffled)
    for kind in Kind:
        for pos in (False, True):
            assert characterise(scene(*objs), sel, kind, pos) == characterise(scene(*shuffled), sel, kind, pos)


# ---------------------------------------------------------------- orders


def test_set_order_examples():
    assert more_exceptional(S(["cu", "l_cy"]), S(["cu"]))
    assert not more_exceptional(S(["cu"]), S(["cu"]))
    assert not more_exceptional(S(["cu"]), S(["cu", "l_cy"]))


def test_count_order_examples():
    assert more_exceptional(C({"cu": 2, "l_cy": 1}), C({"cu": 2}))
    assert not more_exceptional(C({"cu": 1}), C({"sp": 1}))
    assert not more_exceptional(C({"sp": 1}), C({"cu": 1}))


def test_irrelevance_examples():
    assert irrelevant(S(["l_cy", "l_cu", "cu"]), S(["l_cy", "l_cu", "s_sp"]))
    assert not irrelevant(S(["cu"]), S(["cu"]))
    assert irrelevant(C({"cu": 1}), C({"cu": 2}))


def test_default_is_least():
    for kind in Kind:
        d = default_characterisation(kind)
        assert not more_exceptional(d, d)
    assert more_exceptional(C({"cu": 1}), default_characterisation(Kind.COUNT))
    assert str(default_characterisation(Kind.SET)) == "∅"


def test_mixed_kinds_raise():
    with pytest.raises(CharacterisationError):
        more_exceptional(S(["cu"]), C({"cu": 1}))
    with pytest.raises(CharacterisationError):
        irrelevant(S(["cu"]), C({"cu": 1}))


def test_count_order_exhaustive_against_multiset_oracle():
    names = ("a", "b", "c")
    vecs = list(itertools.product(range(3), repeat=3))
    chars = [C(dict(zip(names, v))) for v in vecs]
    bags = [dict(zip(names, v)) for v in vecs]
    for i, j in itertools.product(range(len(vecs)), repeat=2):
        assert more_exceptional(chars[i], chars[j]) == gt(bags[i], bags[j])


def test_set_order_is_proper_superset():
    universe = ["a", "b", "c", "d"]
    subsets = [frozenset(c) for r in range(5) for c in itertools.combinations(universe, r)]
    for x, y in itertools.product(subsets, repeat=2):
        assert more_exceptional(S(x), S(y)) == (x > y)


count_st = st.dictionaries(st.sampled_from("abcd"), st.integers(0, 3)).map(C)
set_st = st.sets(st.sampled_from("abcde")).map(S)


@pytest.mark.parametrize("strategy", [count_st, set_st], ids=["count", "set"])
def test_partial_order_laws(strategy):
    @given(strategy, strategy, strategy)
    @settings(max_examples=300, deadline=None)
    def laws(a, b, c):
        assert not more_exceptional(a, a)
        assert not (more_exceptional(a, b) and more_exceptional(b, a))
        if more_exceptional(a, b) and more_exceptional(b, c):
            assert more_exceptional(a, c)
        d = default_characterisation(a.kind)
        assert at_least_as_exceptional(a, d)
        assert not irrelevant(a, d)
        assert more_exceptional(a, d) == (len(a) > 0)

    laws()


@given(st.dictionaries(st.sampled_from("abc"), st.integers(0, 2)),
       st.dictionaries(st.sampled_from("abc"), st.integers(0, 2)))
def test_counter_formulation_agrees(a, b):
    assert more_exceptional(C(a), C(b)) == counter_gt(a, b)


# ---------------------------------------------------------------- selection


def _scenes_for_selection():
    rng = random.Random(0)
    scenes, positive = [], []
    for i in range(80):
        pos = i % 2 == 0
        objs = [obj("l", rng.choice(["red", "blue"]), "m", "cu")] if pos else []
        objs.append(obj("sm", rng.choice(["red", "blue"]), rng.choice(["m", "ru"]), "sp"))
        scenes.append(scene(*objs))
        positive.append(pos)
    return scenes, positive


def test_information_ranks_the_planted_feature_first():
    scenes, positive = _scenes_for_selection()
    cands = enumerate_superfeatures(CLEVR, 2)
    scores = presence_scores(scenes, positive, cands, CLEVR)
    best = max(scores, key=scores.get)
    assert best.name in {"cu", "l_cu"}
    chosen = select_by_information(scores, 3, 0.1)
    # the specialisation l_cu carries no more information than cu, so only cu stays
    assert [f.name for f in chosen][0] == "cu"
    assert "l_cu" not in [f.name for f in chosen]


def test_selection_skips_tied_rivals_and_revives_specialisation():
    vocab = CLEVR
    f = lambda name: next(iter(FeatureSelection.from_names([name], vocab).features))
    scores = {f("sm_sp"): 0.9, f("yellow_sp"): 0.85, f("l_yellow_sp"): 0.88, f("l_sp"): 0.5}
    names = [x.name for x in select_by_information(scores, 6, 0.1)]
    # a small yellow sphere would match sm_sp and yellow_sp equally, so the
    # weaker rival goes and its held-back specialisation takes its place
    assert names == ["sm_sp", "l_yellow_sp", "l_sp"]
    assert [x.name for x in select_by_information(dict(scores), 1, 0.1)] == ["sm_sp"]


def test_selection_spec_modes():
    scenes, positive = _scenes_for_selection()
    assert SelectionSpec("slots", slots=("size",)).resolve(CLEVR).names == sorted(
        ["sm_cu", "l_cu", "sm_sp", "l_sp", "sm_cy", "l_cy"]
    )
    assert SelectionSpec("explicit", names=("cu",)).resolve(CLEVR).names == ["cu"]
    assert not SelectionSpec("single").resolve(CLEVR).combine
    mi = SelectionSpec("mi", max_slots=2, top_k=2).resolve(CLEVR, False, scenes, positive)
    assert "cu" in mi.names
    for spec in (SelectionSpec(), SelectionSpec("slots", slots=("color",)), SelectionSpec("single")):
        assert SelectionSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        SelectionSpec("bogus")
