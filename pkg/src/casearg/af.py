"""Abstract argumentation frameworks with optional supports.

Arguments are dense integer ids ``0..n-1`` with a side table of display
names. Edge sets are stored as sorted, duplicate-free ``(e, 2)`` int arrays
so that the mining path can build frameworks without materialising Python
tuples; the set views (``attacks``, ``supports``) are computed on demand.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels


class FrameworkError(ValueError):
    """An argumentation framework violates its structural invariants."""


class SupportCycleError(FrameworkError):
    """The support relation contains a cycle."""


class Label(str, Enum):
    IN = "IN"
    OUT = "OUT"
    UNDEC = "UNDEC"


_EMPTY = np.zeros((0, 2), dtype=np.int64)


def _edge_array(edges, n: int, what: str) -> np.ndarray:
    if isinstance(edges, np.ndarray):
        arr = edges.astype(np.int64, copy=False).reshape(-1, 2)
    else:
        arr = np.array(sorted(set(map(tuple, edges))), dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        bad = arr[(arr < 0).any(axis=1) | (arr >= n).any(axis=1)][0]
        raise FrameworkError(f"{what} ({bad[0]}, {bad[1]}) references an unknown argument")
    arr = np.unique(arr, axis=0) if len(arr) else _EMPTY
    arr.setflags(write=False)
    return arr


def _pairs(arr: np.ndarray) -> frozenset:
    return frozenset((int(a), int(b)) for a, b in arr)


class ArgumentationFramework:
    """Immutable framework ``<arguments, attacks>`` plus a support relation.

    ``indirect`` marks which attacks were derived from supports by
    :func:`effective_attacks`; it only affects rendering.
    """

    def __init__(
        self,
        names: Sequence[str],
        attacks: Iterable = (),
        supports: Iterable = (),
        indirect: Iterable = (),
    ):
        self.names = tuple(str(x) for x in names)
        n = len(self.names)
        self._attacks = _edge_array(attacks, n, "attack")
        self._supports = _edge_array(supports, n, "support")
        self._indirect = _edge_array(indirect, n, "indirect attack")
        if len(self._supports):
            if (self._supports[:, 0] == self._supports[:, 1]).any():
                raise FrameworkError("an argument cannot support itself")
            if _pairs(self._supports) & _pairs(self._attacks):
                raise FrameworkError("a pair cannot be both a support and an attack")
        if len(self._indirect) and not _pairs(self._indirect) <= _pairs(self._attacks):
            raise FrameworkError("indirect attacks must be a subset of attacks")

    @classmethod
    def from_arrays(cls, names, attacks, supports=_EMPTY, indirect=_EMPTY):
        """Trusted constructor for already sorted, deduplicated arrays."""
        self = cls.__new__(cls)
        self.names = tuple(names)
        for attr, arr in (("_attacks", attacks), ("_supports", supports), ("_indirect", indirect)):
            arr = np.asarray(arr, dtype=np.int64).reshape(-1, 2)
            arr.setflags(write=False)
            setattr(self, attr, arr)
        return self

    def __len__(self) -> int:
        return len(self.names)

    @property
    def arguments(self) -> range:
        return range(len(self.names))

    @property
    def attack_array(self) -> np.ndarray:
        return self._attacks

    @property
    def support_array(self) -> np.ndarray:
        return self._supports

    @cached_property
    def attacks(self) -> frozenset:
        return _pairs(self._attacks)

    @cached_property
    def supports(self) -> frozenset:
        return _pairs(self._supports)

    @cached_property
    def indirect_attacks(self) -> frozenset:
        return _pairs(self._indirect)

    def attackers_of(self, arg: int) -> list[int]:
        return [int(a) for a in self._attacks[self._attacks[:, 1] == arg, 0]]

    def __eq__(self, other):
        if not isinstance(other, ArgumentationFramework):
            return NotImplemented
        return (
            self.names == other.names
            and np.array_equal(self._attacks, other._attacks)
            and np.array_equal(self._supports, other._supports)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"ArgumentationFramework({len(self.names)} arguments, "
            f"{len(self._attacks)} attacks, {len(self._supports)} supports)"
        )


class GroundedResult:
    """Grounded extension with its cumulative construction layers.

    ``layer[v]`` is the round in which ``v`` entered the extension, or -1.
    """

    def __init__(self, label: np.ndarray, layer: np.ndarray):
        self._label = label
        self._layer = layer

    @property
    def label_array(self) -> np.ndarray:
        return self._label

    @cached_property
    def extension(self) -> frozenset:
        return frozenset(int(v) for v in np.flatnonzero(self._label == _kernels.IN))

    @cached_property
    def layers(self) -> tuple:
        depth = int(self._layer.max()) + 1 if len(self._layer) else 0
        if depth == 0:
            return (frozenset(),)
        return tuple(
            frozenset(int(v) for v in np.flatnonzero((self._layer >= 0) & (self._layer <= i)))
            for i in range(depth)
        )

    @cached_property
    def labelling(self) -> dict:
        names = {_kernels.IN: Label.IN, _kernels.OUT: Label.OUT, _kernels.UNDEC: Label.UNDEC}
        return {v: names[int(x)] for v, x in enumerate(self._label)}

    def label_of(self, arg: int) -> Label:
        return self.labelling[arg]

    def accepted(self, arg: int) -> bool:
        return bool(self._label[arg] == _kernels.IN)


def _csr(n: int, edges: np.ndarray):
    if len(edges):
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        src = edges[order, 0]
        indices = np.ascontiguousarray(edges[order, 1], dtype=np.int64)
    else:
        src = indices = np.zeros(0, dtype=np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    indeg = np.bincount(indices, minlength=n).astype(np.int64)
    return indptr, indices, indeg


def grounded(framework: ArgumentationFramework) -> GroundedResult:
    """Grounded extension of ``framework``. Supports are ignored."""
    n = len(framework)
    indptr, indices, indeg = _csr(n, framework.attack_array)
    label, layer = _kernels.grounded_labels(n, indptr, indices, indeg)
    return GroundedResult(label, layer)


def grounded_from_csr(n, indptr, indices, indeg) -> GroundedResult:
    label, layer = _kernels.grounded_labels(n, indptr, indices, indeg)
    return GroundedResult(label, layer)


def support_closure(n: int, supports: np.ndarray) -> np.ndarray:
    """Boolean reachability matrix over one or more support edges.

    Raises :class:`SupportCycleError` if the support graph is cyclic.
    """
    reach = np.zeros((n, n), dtype=np.bool_)
    if not len(supports):
        return reach
    succ: dict[int, list[int]] = {}
    indeg = np.zeros(n, dtype=np.int64)
    for a, b in supports:
        succ.setdefault(int(a), []).append(int(b))
        indeg[b] += 1
    # Kahn's algorithm; reverse topological order fills reach bottom-up
    order = []
    stack = [v for v in range(n) if indeg[v] == 0]
    while stack:
        v = stack.pop()
        order.append(v)
        for w in succ.get(v, ()):
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    if len(order) < n:
        raise SupportCycleError("support relation contains a cycle")
    for v in reversed(order):
        for w in succ.get(v, ()):
            reach[v, w] = True
            reach[v] |= reach[w]
    return reach


def effective_attacks(framework: ArgumentationFramework) -> ArgumentationFramework:
    """Resolve supports into indirect attacks.

    ``a`` indirectly attacks ``c`` when a chain of supports leads from ``a``
    to some ``b`` that directly attacks ``c``. The result has no supports.
    """
    n = len(framework)
    supports = framework.support_array
    if not len(supports):
        return ArgumentationFramework.from_arrays(
            framework.names, framework.attack_array, _EMPTY, framework._indirect
        )
    reach = support_closure(n, supports)
    direct = np.zeros((n, n), dtype=np.bool_)
    attacks = framework.attack_array
    if len(attacks):
        direct[attacks[:, 0], attacks[:, 1]] = True
    derived = (reach.astype(np.float64) @ direct.astype(np.float64)) > 0.5
    indirect = derived & ~direct
    combined = direct | derived
    all_edges = np.argwhere(combined).astype(np.int64)
    new_edges = np.argwhere(indirect).astype(np.int64)
    if len(framework._indirect):
        new_edges = np.unique(np.vstack([new_edges, framework._indirect]), axis=0)
    return ArgumentationFramework.from_arrays(framework.names, all_edges, _EMPTY, new_edges)


_FILL = {Label.IN: "palegreen", Label.OUT: "mistyrose", Label.UNDEC: "lightgrey"}


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(framework: ArgumentationFramework, result: GroundedResult, name: str = "AF") -> str:
    """Graphviz rendering: direct attacks solid, indirect dashed, supports dotted."""
    lines = [f"digraph {_dot_quote(name)} {{", "  rankdir=BT;",
             '  node [shape=box, style="rounded,filled"];']
    for v, display in enumerate(framework.names):
        lab = result.label_of(v)
        extra = ", penwidth=2" if lab is Label.IN else ""
        lines.append(
            f"  a{v} [label={_dot_quote(display)}, fillcolor={_FILL[lab]}, "
            f"comment={lab.value}{extra}];"
        )
    indirect = framework.indirect_attacks
    for a, b in sorted(framework.attacks):
        style = "dashed" if (a, b) in indirect else "solid"
        lines.append(f"  a{a} -> a{b} [style={style}];")
    for a, b in sorted(framework.supports):
        lines.append(f"  a{a} -> a{b} [style=dotted, arrowhead=empty];")
    lines.append("}")
    return "\n".join(lines) + "\n"


_EDGE_RE = re.compile(r"^\s*a(\d+)\s*->\s*a(\d+)\s*\[style=(solid|dashed|dotted)")


def parse_dot_edges(text: str) -> dict[str, set]:
    """Recover edge sets (keyed by style) from :func:`to_dot` output."""
    edges: dict[str, set] = {"solid": set(), "dashed": set(), "dotted": set()}
    for line in text.splitlines():
        m = _EDGE_RE.match(line)
        if m:
            edges[m.group(3)].add((int(m.group(1)), int(m.group(2))))
    return edges
