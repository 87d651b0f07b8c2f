import os
import subprocess
import sys

import numpy as np
import pytest

from casearg import _kernels
from casearg.af import _csr

BACKENDS = _kernels.available_backends()


def _inputs(seed, n=40, f=4):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 3, size=(n, f)).astype(np.int64)
    counts[0] = 0
    outcomes = rng.integers(0, 2, size=n).astype(np.int64)
    outcomes[0] = 0
    return counts, outcomes, rng.integers(0, 3, size=f).astype(np.int64)


def _run(backend, seed):
    counts, outcomes, x = _inputs(seed)
    with _kernels.use_backend(backend):
        dom = _kernels.dominance(counts)
        att = _kernels.minimal_pairs(dom, outcomes, False)
        sup = _kernels.minimal_pairs(dom, outcomes, True)
        irr = _kernels.irrelevant(counts, x)
        n = len(counts)
        edges = np.argwhere(att)
        lab, layer = _kernels.grounded_labels(n, *_csr(n, edges))
        pts = counts.astype(np.float64)
        assign, d2 = _kernels.assign_nearest(pts, pts[:5])
    return dom, att, sup, irr, lab, layer, assign, d2


@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    results = [_run(b, seed) for b in BACKENDS]
    for other in results[1:]:
        for a, b in zip(results[0], other):
            assert np.array_equal(a, b)


def test_dominance_definition():
    counts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [1, 1]])
    dom = _kernels.dominance(counts)
    assert dom[2, 1] and dom[2, 0] and dom[1, 0]
    assert not dom[1, 3] and not dom[3, 1]
    assert not dom[2, 4] and not dom[4, 2]
    assert not dom.diagonal().any()


def test_use_backend_restores():
    before = _kernels.BACKEND
    with _kernels.use_backend("numpy"):
        assert _kernels.BACKEND == "numpy"
    assert _kernels.BACKEND == before


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.set_backend("cuda")


def test_env_flag_selects_numpy():
    env = dict(os.environ, CASEARG_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from casearg import _kernels; print(_kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
