"""Numeric inner loops: order comparison, minimal-pair mining, grounded
labelling and nearest-centroid assignment.

Each kernel has a numba implementation and a pure-numpy one. The numba path
is used when numba imports and ``CASEARG_DISABLE_NUMBA`` is unset (or "0").
Callers go through the module attributes (``_kernels.dominance(...)``) so
that :func:`use_backend` can switch implementations at runtime.
"""
from __future__ import annotations

import contextlib
import os

import numpy as np

IN, OUT, UNDEC = 1, -1, 0

try:
    import numba
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False


def _numba_requested() -> bool:
    flag = os.environ.get("CASEARG_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


# --------------------------------------------------------------------------
# numpy implementations

_ROW_BLOCK = 256


def _dominance_numpy(counts):
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    n = counts.shape[0]
    out = np.zeros((n, n), dtype=np.bool_)
    for start in range(0, n, _ROW_BLOCK):
        block = counts[start:start + _ROW_BLOCK, None, :]
        geq = (block >= counts[None, :, :]).all(axis=2)
        gt = (block > counts[None, :, :]).any(axis=2)
        out[start:start + _ROW_BLOCK] = geq & gt
    return out


def _minimal_pairs_numpy(dom, outcomes, same):
    outcomes = np.asarray(outcomes)
    same_outcome = outcomes[:, None] == outcomes[None, :]
    candidates = dom & (same_outcome if same else ~same_outcome)
    # interposer k: same outcome as the source, src > k > dst
    through = (dom & same_outcome).astype(np.float64)
    blocked = (through @ dom.astype(np.float64)) > 0.5
    return candidates & ~blocked


def _irrelevant_numpy(counts, x):
    return (np.asarray(counts) > np.asarray(x)[None, :]).any(axis=1)


def _grounded_numpy(n, indptr, indices, indeg):
    label = np.zeros(n, dtype=np.int8)
    layer = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return label, layer
    src = np.repeat(np.arange(n), np.diff(indptr))
    remaining = np.asarray(indeg, dtype=np.int64).copy()
    frontier = remaining == 0
    rnd = 0
    while frontier.any():
        label[frontier] = IN
        layer[frontier] = rnd
        hit = indices[frontier[src]]
        newly_out = np.zeros(n, dtype=np.bool_)
        newly_out[hit] = True
        newly_out &= label == UNDEC
        label[newly_out] = OUT
        dropped = indices[newly_out[src]]
        remaining -= np.bincount(dropped, minlength=n)
        frontier = (remaining == 0) & (label == UNDEC)
        rnd += 1
    return label, layer


def _assign_numpy(points, centroids):
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    for start in range(0, n, _ROW_BLOCK):
        diff = points[start:start + _ROW_BLOCK, None, :] - centroids[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        labels[start:start + _ROW_BLOCK] = d2.argmin(axis=1)
        dist[start:start + _ROW_BLOCK] = d2.min(axis=1)
    return labels, dist


# --------------------------------------------------------------------------
# numba implementations

if HAS_NUMBA:

    @njit(cache=True, nogil=True)
    def _dominance_numba(counts):
        n, m = counts.shape
        out = np.zeros((n, n), dtype=np.bool_)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                strict = False
                ok = True
                for f in range(m):
                    a = counts[i, f]
                    b = counts[j, f]
                    if a < b:
                        ok = False
                        break
                    if a > b:
                        strict = True
                out[i, j] = ok and strict
        return out

    @njit(cache=True, nogil=True)
    def _minimal_pairs_numba(dom, outcomes, same):
        n = dom.shape[0]
        out = np.zeros((n, n), dtype=np.bool_)
        for i in range(n):
            yi = outcomes[i]
            for j in range(n):
                if not dom[i, j]:
                    continue
                if (outcomes[j] == yi) != same:
                    continue
                blocked = False
                for k in range(n):
                    if outcomes[k] == yi and dom[i, k] and dom[k, j]:
                        blocked = True
                        break
                out[i, j] = not blocked
        return out

    @njit(cache=True, nogil=True)
    def _irrelevant_numba(counts, x):
        n, m = counts.shape
        out = np.zeros(n, dtype=np.bool_)
        for i in range(n):
            for f in range(m):
                if counts[i, f] > x[f]:
                    out[i] = True
                    break
        return out

    @njit(cache=True, nogil=True)
    def _grounded_numba(n, indptr, indices, indeg):
        label = np.zeros(n, dtype=np.int8)
        layer = np.full(n, -1, dtype=np.int64)
        remaining = indeg.astype(np.int64).copy()
        frontier = np.empty(n, dtype=np.int64)
        size = 0
        for v in range(n):
            if remaining[v] == 0:
                frontier[size] = v
                size += 1
        newly_out = np.empty(n, dtype=np.int64)
        nxt = np.empty(n, dtype=np.int64)
        rnd = 0
        while size > 0:
            for t in range(size):
                v = frontier[t]
                label[v] = 1
                layer[v] = rnd
            n_out = 0
            for t in range(size):
                v = frontier[t]
                for e in range(indptr[v], indptr[v + 1]):
                    w = indices[e]
                    if label[w] == 0:
                        label[w] = -1
                        newly_out[n_out] = w
                        n_out += 1
            n_next = 0
            for t in range(n_out):
                v = newly_out[t]
                for e in range(indptr[v], indptr[v + 1]):
                    w = indices[e]
                    remaining[w] -= 1
                    if remaining[w] == 0 and label[w] == 0:
                        nxt[n_next] = w
                        n_next += 1
            # sorted frontier keeps round contents independent of edge order
            frontier[:n_next] = np.sort(nxt[:n_next])
            size = n_next
            rnd += 1
        return label, layer

    @njit(cache=True, nogil=True)
    def _assign_numba(points, centroids):
        n, m = points.shape
        k = centroids.shape[0]
        labels = np.empty(n, dtype=np.int64)
        dist = np.empty(n, dtype=np.float64)
        for i in range(n):
            best = np.inf
            arg = 0
            for c in range(k):
                d = 0.0
                for f in range(m):
                    t = points[i, f] - centroids[c, f]
                    d += t * t
                if d < best:
                    best = d
                    arg = c
            labels[i] = arg
            dist[i] = best
        return labels, dist


_IMPLS = {
    "numpy": {
        "dominance": _dominance_numpy,
        "minimal_pairs": _minimal_pairs_numpy,
        "irrelevant": _irrelevant_numpy,
        "grounded_labels": _grounded_numpy,
        "assign_nearest": _assign_numpy,
    },
}
if HAS_NUMBA:
    _IMPLS["numba"] = {
        "dominance": _dominance_numba,
        "minimal_pairs": _minimal_pairs_numba,
        "irrelevant": _irrelevant_numba,
        "grounded_labels": _grounded_numba,
        "assign_nearest": _assign_numba,
    }

BACKEND = ""


def set_backend(name: str) -> None:
    """Rebind the public kernels to ``name`` ("numba" or "numpy")."""
    global BACKEND, dominance, minimal_pairs, irrelevant, grounded_labels, assign_nearest
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(_IMPLS)}")
    impl = _IMPLS[name]
    dominance = impl["dominance"]
    minimal_pairs = impl["minimal_pairs"]
    irrelevant = impl["irrelevant"]
    grounded_labels = impl["grounded_labels"]
    assign_nearest = impl["assign_nearest"]
    BACKEND = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def available_backends() -> list[str]:
    return sorted(_IMPLS)


set_backend("numba" if HAS_NUMBA and _numba_requested() else "numpy")
