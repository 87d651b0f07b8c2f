"""Acceptance suite. Each test prints one PASS/FAIL line for its criterion."""

import itertools
import random
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from casearg import io as cio
from casearg.aacbr import Casebase, explanation_moves, mine_attacks, mine_supports, predict
from casearg.af import ArgumentationFramework, grounded
from casearg.evaluate import TOGGLES, SearchSpace, ablate, evaluate, random_search, variant_name
from casearg.features import (
    Case,
    Characterisation,
    Kind,
    at_least_as_exceptional,
    default_characterisation,
    more_exceptional,
)
from casearg.multiclass import predict_batch, predict_trace, train_tournament
from casearg.reduction import ClusteringConfig, reduce_casebase
from casearg.synthetic import generate_synthetic, hans3_rules, hans7_rules
from oracles import grounded_fixpoint, mine, proper_sub_multiset

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def report(number: int, title: str):
        start = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            with capsys.disabled():
                status = "PASS" if ok else "FAIL"
                print(f"\n[criterion {number:2d}] {status} {title} ({time.perf_counter() - start:.2f}s)")

    return report


def _timed(limit: float):
    start = time.perf_counter()
    return lambda: time.perf_counter() - start < limit


# ---------------------------------------------------------------- 1


def test_c01_worked_example_end_to_end(criterion):
    with criterion(1, "worked example: attacks, extension, prediction, explanation"):
        in_time = _timed(1.0)
        t = cio.read_bundle(FIXTURES / "worked_example.bundle")
        (scene,) = cio.read_scene_file(FIXTURES / "worked_example_scene.jsonl", t.vocabulary)
        label, consulted = predict_trace(t, scene)
        (_, pred), = consulted
        n = pred.framework.new_case_id
        assert pred.framework.framework.attacks == {(1, 0), (3, 1), (2, 3), (4, 0), (n, 2), (n, 4)}
        assert pred.grounded.extension == {n, 3, 0}
        assert label == 0
        dismissed = {m.target for m in explanation_moves(pred) if m.move == "dismiss"}
        assert dismissed == {"C2", "C4"}
        assert in_time()


# ---------------------------------------------------------------- 2


def test_c02_grounded_matches_oracle(criterion):
    with criterion(2, "grounded extension equals fixpoint oracle on 1000 random frameworks"):
        in_time = _timed(10.0)
        rng = random.Random(2)
        mismatches = 0
        for _ in range(1000):
            n = rng.randint(0, 12)
            attacks = {(a, b) for a in range(n) for b in range(n) if rng.random() < 0.3}
            res = grounded(ArgumentationFramework([f"a{i}" for i in range(n)], attacks))
            mismatches += res.extension != grounded_fixpoint(n, attacks)
        assert mismatches == 0
        assert in_time()


# ---------------------------------------------------------------- 3


def test_c03_mining_matches_oracle(criterion):
    with criterion(3, "mined attacks, supports and predictions equal triple-loop oracle"):
        in_time = _timed(30.0)
        rng = random.Random(3)
        feats = ("f", "g", "h")
        mismatches = 0
        for i in range(500):
            kind = (Kind.SET, Kind.COUNT)[i % 2]
            use_supports = (i // 2) % 2 == 1

            def draw():
                if kind is Kind.SET:
                    return {f: 1 for f in feats if rng.random() < 0.5}
                return {f: rng.randint(1, 2) for f in feats if rng.random() < 0.6}

            make = Characterisation.of_set if kind is Kind.SET else Characterisation.of_counts
            pairs = [(draw(), rng.randint(0, 1)) for _ in range(rng.randint(0, 8))]
            x = draw()
            cb = Casebase(tuple(Case(make(c), y) for c, y in pairs), 0, 1, kind)
            attacks, supports, effective, outcome = mine(pairs, 0, 1, x, use_supports)
            pred = predict(cb, make(x), use_supports)
            mismatches += (
                mine_attacks(cb, make(x)).framework.attacks != attacks
                or (use_supports and mine_supports(cb) != supports)
                or pred.framework.effective.attacks != effective
                or pred.outcome != outcome
            )
        assert mismatches == 0
        assert in_time()


# ---------------------------------------------------------------- 4


def test_c04_count_order_exhaustive(criterion):
    with criterion(4, "count order equals proper sub-multiset over all 729^2 pairs"):
        names = ("a", "b", "c")
        vectors = list(itertools.product(range(3), repeat=3))
        chars = [Characterisation.of_counts(dict(zip(names, v))) for v in vectors]
        multisets = [[n for n, c in zip(names, v) for _ in range(c)] for v in vectors]
        mismatches = sum(
            more_exceptional(chars[i], chars[j]) != proper_sub_multiset(multisets[j], multisets[i])
            for i in range(len(vectors))
            for j in range(len(vectors))
        )
        assert mismatches == 0


# ---------------------------------------------------------------- 5


def test_c05_partial_order_laws(criterion):
    with criterion(5, "strict orders are partial orders with the default as least element"):
        rng = random.Random(5)
        names = ("a", "b", "c", "d")
        violations = 0
        for kind in (Kind.SET, Kind.COUNT):
            bottom = default_characterisation(kind)

            def draw():
                if kind is Kind.SET:
                    return Characterisation.of_set(n for n in names if rng.random() < 0.5)
                return Characterisation.of_counts({n: rng.randint(0, 2) for n in names})

            for _ in range(10_000):
                a, b, c = draw(), draw(), draw()
                gt = more_exceptional
                violations += gt(a, a)
                violations += gt(a, b) and gt(b, a)
                violations += gt(a, b) and gt(b, c) and not gt(a, c)
                violations += not at_least_as_exceptional(a, bottom)
                violations += gt(bottom, a)
                violations += (a != bottom) and not gt(a, bottom)
        assert violations == 0


# ---------------------------------------------------------------- 6


def test_c06_prediction_invariances(criterion):
    with criterion(6, "permutation and duplication leave predictions unchanged"):
        rng = random.Random(6)
        names = ("a", "b", "c")
        violations = 0
        for i in range(200):
            kind = (Kind.SET, Kind.COUNT)[i % 2]
            make = Characterisation.of_set if kind is Kind.SET else Characterisation.of_counts

            def draw():
                if kind is Kind.SET:
                    return make({n for n in names if rng.random() < 0.5})
                return make({n: rng.randint(0, 2) for n in names})

            cases = [Case(draw(), rng.randint(0, 1)) for _ in range(rng.randint(1, 8))]
            x = draw()
            shuffled = list(cases)
            rng.shuffle(shuffled)
            duplicated = cases + [cases[rng.randrange(len(cases))]]
            for use_supports in (False, True):
                base = predict(Casebase(tuple(cases), 0, 1, kind), x, use_supports).outcome
                for variant in (shuffled, duplicated):
                    violations += predict(Casebase(tuple(variant), 0, 1, kind), x, use_supports).outcome != base
        assert violations == 0


# ---------------------------------------------------------------- 7


def test_c07_reduction_identity_and_monotonicity(criterion):
    with criterion(7, "reduction reproduces distinct casebase and thresholds only prune"):
        rng = random.Random(7)
        names = ("a", "b", "c", "d")
        violations = 0
        for trial in range(30):
            cases = [
                Case(
                    Characterisation.of_counts({n: rng.randint(0, 2) for n in names}),
                    rng.randint(0, 1),
                    rng.random(),
                )
                for _ in range(rng.randint(2, 40))
            ]
            if len({c.outcome for c in cases}) < 2:
                continue
            distinct = {(c.characterisation, c.outcome) for c in cases}
            identity = reduce_casebase(cases, ClusteringConfig(k=len(cases), seed=trial))
            violations += {(c.characterisation, c.outcome) for c in identity} != distinct
            violations += len(identity) != len(distinct)
            sizes = [
                len(reduce_casebase(cases, ClusteringConfig(k=6, threshold=t, seed=trial)))
                for t in (0.0, 0.5, 0.7, 0.9, 1.0)
            ]
            violations += any(b > a for a, b in zip(sizes, sizes[1:]))
        assert violations == 0


# ---------------------------------------------------------------- 8 and 9


@pytest.fixture(scope="module")
def confounded():
    rules = hans3_rules()
    return (
        generate_synthetic(rules, 200, seed=80, confound=True, id_prefix="tr"),
        generate_synthetic(rules, 50, seed=81, id_prefix="va"),
        generate_synthetic(rules, 50, seed=82, id_prefix="te"),
    )


@pytest.fixture(scope="module")
def tuned(confounded):
    train, validation, _ = confounded
    start = time.perf_counter()
    result = random_search(SearchSpace((0, 1, 2)), 50, 0, train, validation, threads=4)
    return result, time.perf_counter() - start


def test_c08_synthetic_rule_recovery(criterion, confounded, tuned):
    with criterion(8, "tuned tournament recovers planted rules and generalises past confounder"):
        start = time.perf_counter()
        train, validation, test = confounded
        result, search_seconds = tuned
        assert len(train) == 600 and len(test) == 150
        assert len(result.trials) <= 50
        t = train_tournament(result.config, train)
        val = evaluate(t, validation).percent("accuracy")
        acc = evaluate(t, test).percent("accuracy")
        total = search_seconds + time.perf_counter() - start
        print(f"validation {val:.2f}  test {acc:.2f}  search + fit + evaluate {total:.1f}s")
        assert acc >= 95.0
        assert abs(acc - val) <= 5.0
        assert total < 300.0


def test_c09_ablation_direction(criterion, confounded, tuned):
    with criterion(9, "full configuration F1 no worse than any single ablation minus 2"):
        train, _, test = confounded
        report = ablate(tuned[0].config, TOGGLES, train, test, seeds=range(5), threads=4)
        print(report.table())
        summary = report.summary()
        full = summary["full"]["f1"].mean
        for toggle in TOGGLES:
            assert full >= summary[variant_name((toggle,))]["f1"].mean - 2.0, toggle


# ---------------------------------------------------------------- 10


def test_c10_performance_and_parallel_equality(criterion):
    with criterion(10, "1000-case mining and prediction under 60s; threaded batch equals serial"):
        rng = np.random.default_rng(10)
        names = [f"f{i}" for i in range(12)]
        seen, cases = set(), []
        while len(cases) < 1000:
            counts = tuple(int(v) for v in rng.integers(0, 3, size=len(names)))
            if counts in seen or not any(counts):
                continue
            seen.add(counts)
            cases.append(Case(Characterisation.of_counts(dict(zip(names, counts))), int(rng.integers(0, 2))))
        start = time.perf_counter()
        cb = Casebase(tuple(cases), 0, 1, Kind.COUNT)
        for use_supports in (False, True):
            for _ in range(5):
                x = Characterisation.of_counts(dict(zip(names, (int(v) for v in rng.integers(0, 3, len(names))))))
                predict(cb, x, use_supports)
        elapsed = time.perf_counter() - start
        print(f"mining + 10 predictions on 1000 cases: {elapsed:.2f}s")
        assert elapsed < 60.0

        rules = hans3_rules()
        t = train_tournament(cio.load_preset("hans3"), generate_synthetic(rules, 60, seed=10))
        scenes = generate_synthetic(rules, 334, seed=11)[:1000]
        assert len(scenes) == 1000
        assert predict_batch(t, scenes, threads=8) == predict_batch(t, scenes)


# ---------------------------------------------------------------- 11


@pytest.mark.parametrize("preset, rules, n_classes", [("hans3", hans3_rules, 3), ("hans7", hans7_rules, 6)])
def test_c11_presets_train_end_to_end(criterion, preset, rules, n_classes):
    with criterion(11, f"{preset} preset trains and predicts end to end"):
        cfg = cio.load_preset(preset)
        kinds = {m.kind for m in cfg.models}
        if preset == "hans3":
            assert {"set", "count"} <= {str(getattr(k, "value", k)) for k in kinds}
            assert cfg.models[1].use_supports
        else:
            assert "position_count" in {str(getattr(k, "value", k)) for k in kinds}
        ruleset = rules()
        assert len(ruleset.labels) == n_classes
        train = generate_synthetic(ruleset, 60, seed=11, confound=True)
        test = generate_synthetic(ruleset, 20, seed=12)
        t = train_tournament(cfg, train)
        assert len(t.models) == n_classes - 1
        predictions = predict_batch(t, test)
        assert set(predictions) <= set(ruleset.labels)
        print(evaluate(t, test).table())
