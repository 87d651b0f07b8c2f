"""Mining argumentation frameworks from a casebase and predicting by
grounded acceptance of the default case.

Argument ids: 0 is the default case, ``i + 1`` is ``casebase.cases[i]`` and
``len(cases) + 1`` is the new case. Everything that does not depend on the
new case (the order among cases, attacks, supports, their resolution) is
computed once per casebase and cached.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Hashable

import numpy as np

from . import _kernels
from .af import (
    ArgumentationFramework,
    GroundedResult,
    Label,
    _csr,
    effective_attacks,
    grounded_from_csr,
)
from .features import (
    Case,
    Characterisation,
    CharacterisationError,
    Kind,
    default_characterisation,
)

DEFAULT_NAME = "C0"
NEW_NAME = "CN"


@dataclass(frozen=True)
class NewCase:
    characterisation: Characterisation


@dataclass(frozen=True, eq=False)
class Casebase:
    """Binary-outcome casebase; the default case is implicit."""

    cases: tuple
    default_outcome: Hashable
    other_outcome: Hashable
    kind: Kind

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases))
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.default_outcome == self.other_outcome:
            raise ValueError("default and non-default outcomes must differ")
        allowed = (self.default_outcome, self.other_outcome)
        for i, case in enumerate(self.cases):
            if case.outcome not in allowed:
                raise ValueError(f"case {i} has outcome {case.outcome!r}, expected one of {allowed}")
            if case.characterisation.kind is not self.kind:
                raise CharacterisationError(
                    f"case {i} is a {case.characterisation.kind.value} characterisation "
                    f"in a {self.kind.value} casebase"
                )

    def __len__(self):
        return len(self.cases)

    @property
    def default_case(self) -> Case:
        return Case(default_characterisation(self.kind), self.default_outcome, 1.0, "default")

    @property
    def names(self) -> tuple[str, ...]:
        return (DEFAULT_NAME,) + tuple(f"C{i + 1}" for i in range(len(self.cases))) + (NEW_NAME,)

    @cached_property
    def compiled(self) -> "_Compiled":
        return _Compiled(self)


class _Compiled:
    """Dense count matrix and the new-case-independent part of the framework."""

    def __init__(self, cb: Casebase):
        self.features = tuple(sorted({n for c in cb.cases for n in c.characterisation.features}))
        self.column = {f: j for j, f in enumerate(self.features)}
        n = len(cb.cases) + 1
        counts = np.zeros((n, len(self.features)), dtype=np.int64)
        for i, case in enumerate(cb.cases, start=1):
            for name, c in case.characterisation.items:
                counts[i, self.column[name]] = c
        self.counts = counts
        self.outcomes = np.array(
            [0] + [0 if c.outcome == cb.default_outcome else 1 for c in cb.cases], dtype=np.int64
        )
        self.dominance = _kernels.dominance(counts)
        self.attacks = np.argwhere(_kernels.minimal_pairs(self.dominance, self.outcomes, False))
        self.supports = np.argwhere(_kernels.minimal_pairs(self.dominance, self.outcomes, True))
        # the least element never supports anything
        assert not len(self.supports) or (self.supports[:, 0] != 0).all()
        self.n_total = n + 1
        self._resolved: dict[bool, tuple] = {}

    def vector(self, x: Characterisation) -> np.ndarray:
        v = np.zeros(len(self.features), dtype=np.int64)
        for name, c in x.items:
            j = self.column.get(name)
            if j is not None:
                v[j] = c
        return v

    def resolved(self, use_supports: bool):
        """(attack edges, support edges, indirect edges, csr) among casebase + default."""
        if use_supports not in self._resolved:
            names = [""] * self.n_total
            if use_supports and len(self.supports):
                eff = effective_attacks(
                    ArgumentationFramework.from_arrays(names, self.attacks, self.supports)
                )
                edges, indirect = eff.attack_array, eff._indirect
                supports = self.supports
            else:
                edges = self.attacks
                supports = indirect = np.zeros((0, 2), dtype=np.int64)
            csr = _csr(self.n_total, edges)
            self._resolved[use_supports] = (edges, supports, indirect, csr)
        return self._resolved[use_supports]


@dataclass(frozen=True, eq=False)
class MinedFramework:
    """The framework mined for one new case.

    ``framework`` holds direct attacks (and supports, if mined);
    ``effective`` is the same framework with supports resolved into
    indirect attacks, which is what prediction evaluates.
    """

    framework: ArgumentationFramework
    effective: ArgumentationFramework
    casebase: Casebase
    x_new: Characterisation

    default_id = 0

    @property
    def new_case_id(self) -> int:
        return len(self.casebase.cases) + 1

    @cached_property
    def case_of(self) -> dict:
        out = {0: self.casebase.default_case}
        out.update({i + 1: c for i, c in enumerate(self.casebase.cases)})
        out[self.new_case_id] = NewCase(self.x_new)
        return out

    def display_framework(self) -> ArgumentationFramework:
        """Effective attacks plus the original supports, for rendering."""
        return ArgumentationFramework.from_arrays(
            self.effective.names,
            self.effective.attack_array,
            self.framework.support_array,
            self.effective._indirect,
        )


@dataclass(frozen=True, eq=False)
class Prediction:
    outcome: Hashable
    grounded: GroundedResult
    framework: MinedFramework

    @property
    def default_accepted(self) -> bool:
        return self.grounded.accepted(self.framework.default_id)


def _check_query(casebase: Casebase, x_new: Characterisation) -> None:
    if x_new.kind is not casebase.kind:
        raise CharacterisationError(
            f"new case is a {x_new.kind.value} characterisation, casebase is {casebase.kind.value}"
        )


def _new_case_edges(compiled: _Compiled, x_new: Characterisation) -> np.ndarray:
    targets = np.flatnonzero(_kernels.irrelevant(compiled.counts, compiled.vector(x_new)))
    return np.column_stack([np.full(len(targets), compiled.n_total - 1), targets]).astype(np.int64)


def _mine(casebase: Casebase, x_new: Characterisation, use_supports: bool):
    _check_query(casebase, x_new)
    comp = casebase.compiled
    edges, supports, indirect, (indptr, indices, indeg) = comp.resolved(use_supports)
    new_edges = _new_case_edges(comp, x_new)
    names = casebase.names
    direct = np.vstack([comp.attacks, new_edges])
    framework = ArgumentationFramework.from_arrays(names, direct, supports)
    if use_supports:
        effective = ArgumentationFramework.from_arrays(
            names, np.vstack([edges, new_edges]), np.zeros((0, 2), dtype=np.int64), indirect
        )
    else:
        effective = ArgumentationFramework.from_arrays(names, direct)
    mined = MinedFramework(framework, effective, casebase, x_new)
    targets = new_edges[:, 1]
    full_indptr = indptr.copy()
    full_indptr[-1] += len(targets)
    full_indices = np.concatenate([indices, targets])
    full_indeg = indeg + np.bincount(targets, minlength=comp.n_total)
    return mined, (full_indptr, full_indices, full_indeg)


def mine_attacks(casebase: Casebase, x_new: Characterisation) -> MinedFramework:
    """Framework with direct attacks only (no supports)."""
    return _mine(casebase, x_new, False)[0]


def mine_supports(casebase: Casebase) -> frozenset:
    """Minimal same-outcome pairs ``(a, b)`` with ``a`` more exceptional than ``b``."""
    return frozenset((int(a), int(b)) for a, b in casebase.compiled.supports)


def predict(casebase: Casebase, x_new: Characterisation, use_supports: bool = False) -> Prediction:
    mined, (indptr, indices, indeg) = _mine(casebase, x_new, use_supports)
    result = grounded_from_csr(len(mined.effective), indptr, indices, indeg)
    outcome = casebase.default_outcome if result.accepted(0) else casebase.other_outcome
    return Prediction(outcome, result, mined)


# --------------------------------------------------------------------------
# explanations


@dataclass(frozen=True)
class Move:
    speaker: str
    move: str  # challenge | defeat | dismiss | stand
    target: str


def _tag(name: str, label: Label) -> str:
    return f"{name} [{label.value}]"


def _excess(case_x: Characterisation, new_x: Characterisation) -> str:
    new = new_x.as_dict()
    if case_x.kind is Kind.SET:
        missing = [n for n in case_x.features if n not in new]
        return "the new case lacks " + ", ".join(sorted(missing))
    parts = [f"{n} ({new.get(n, 0)} < {c})" for n, c in case_x.items if c > new.get(n, 0)]
    return "the new case has fewer " + ", ".join(parts)


def _walk(prediction: Prediction):
    mined = prediction.framework
    eff = mined.effective
    res = prediction.grounded
    names = eff.names
    new_id = mined.new_case_id
    attacked_by_new = {b for a, b in eff.attacks if a == new_id}
    attackers: dict[int, list[int]] = {}
    for a, b in sorted(eff.attacks):
        if a != new_id:
            attackers.setdefault(b, []).append(a)
    max_depth = len(res.layers)
    steps = []
    expanded = set()

    def visit(node: int, depth: int):
        if node in expanded or depth >= max_depth:
            return
        expanded.add(node)
        for a in attackers.get(node, ()):
            if a in attacked_by_new:
                steps.append(("dismiss", a, node))
                continue
            if res.label_of(a) is Label.IN:
                kind = "stand" if node == mined.default_id else "defeat"
            else:
                kind = "challenge"
            steps.append((kind, a, node))
            visit(a, depth + 1)

    visit(mined.default_id, 0)
    return steps, names, new_id


def explanation_moves(prediction: Prediction) -> list[Move]:
    """Structured debate: one record per move, in narrative order."""
    steps, names, new_id = _walk(prediction)
    out = []
    for kind, a, b in steps:
        if kind == "dismiss":
            out.append(Move(names[new_id], "dismiss", names[a]))
        else:
            out.append(Move(names[a], kind, names[b]))
    return out


def explain(prediction: Prediction) -> str:
    mined = prediction.framework
    res = prediction.grounded
    cb = mined.casebase
    names = mined.effective.names
    new_id = mined.new_case_id
    x_new = mined.x_new
    steps, _, _ = _walk(prediction)

    def describe(i: int) -> str:
        case = mined.case_of[i]
        return f"{_tag(names[i], res.label_of(i))} {case.characterisation} (outcome {case.outcome})"

    default_tag = _tag(names[0], res.label_of(0))
    if not steps:
        return (
            f"{default_tag}, the default case {cb.default_case.characterisation} for outcome "
            f"{cb.default_outcome}, stands unchallenged, so {names[new_id]} {x_new} is "
            f"predicted outcome {prediction.outcome}.\n"
        )
    lines = [
        f"The debate starts with {default_tag}, the default case "
        f"{cb.default_case.characterisation} arguing for outcome {cb.default_outcome}."
    ]
    for kind, a, b in steps:
        target = _tag(names[b], res.label_of(b))
        if kind == "dismiss":
            why = _excess(mined.case_of[a].characterisation, x_new)
            lines.append(
                f"{describe(a)} challenges {target} but is dismissed as irrelevant: {why}."
            )
        elif kind == "challenge":
            lines.append(f"{describe(a)} challenges {target}.")
        elif kind == "defeat":
            lines.append(f"{describe(a)} defeats {target}.")
        else:
            lines.append(f"{describe(a)} challenges {target} and stands.")
    verdict = "is accepted" if res.accepted(0) else "is defeated"
    lines.append(
        f"{default_tag} {verdict}, so {names[new_id]} {x_new} is predicted outcome "
        f"{prediction.outcome}."
    )
    return "\n".join(lines) + "\n"
