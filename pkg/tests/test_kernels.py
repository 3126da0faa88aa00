import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cpcsim import _kernels_py, kernels
from conftest import _kernels_c

needs_c = pytest.mark.skipif(_kernels_c is None, reason="compiled backend not built")


def _cdf_from_probs(p):
    p = np.asarray(p, dtype=float)
    return np.cumsum(p / p.sum(axis=-1, keepdims=True), axis=-1)


probs = hnp.arrays(
    np.float64, st.tuples(st.integers(1, 8), st.integers(1, 6)),
    elements=st.sampled_from([0.0, 0.0, 1e-300, 0.1, 0.25, 1.0, 3.0]),
).filter(lambda a: np.all(a.sum(axis=1) > 0))


class TestSampleRows:
    def test_inverse_cdf(self, backend):
        cdf = np.array([[0.2, 0.5, 1.0]] * 4)
        u = np.array([0.0, 0.2, 0.49, 0.999])
        assert list(backend.sample_rows(cdf, u)) == [0, 1, 1, 2]

    def test_skips_zero_mass(self, backend):
        cdf = _cdf_from_probs([[0.0, 1.0, 0.0, 0.0]])
        for u in (0.0, 0.5, 1.0 - 1e-16):
            assert backend.sample_rows(cdf, np.array([u]))[0] == 1

    def test_unnormalized_total(self, backend):
        cdf = np.array([[1.0, 1.0, 4.0]])
        assert backend.sample_rows(cdf, np.array([0.3]))[0] == 2


@needs_c
class TestBackendEquivalence:
    @settings(max_examples=200, deadline=None)
    @given(probs, st.integers(0, 2**32 - 1))
    def test_sample_rows(self, p, seed):
        cdf = _cdf_from_probs(p)
        u = np.random.default_rng(seed).random(p.shape[0])
        u[0] = 0.0
        a = _kernels_py.sample_rows(cdf, u)
        b = _kernels_c.sample_rows(cdf, u)
        assert np.array_equal(a, b)
        assert np.all(p[np.arange(len(a)), a] > 0)

    @settings(max_examples=100, deadline=None)
    @given(probs, st.integers(0, 2**32 - 1), st.sampled_from([kernels.MH, kernels.ALWAYS, kernels.NEVER]))
    def test_naming_sweep(self, p, seed, variant):
        rng = np.random.default_rng(seed)
        d, w = p.shape
        cdf = _cdf_from_probs(p)
        acc = rng.random((d, w, w)) if variant == kernels.MH else np.ones((d, 1, 1))
        signs = rng.integers(w, size=d)
        u = rng.random((d, 2))
        out_py = _kernels_py.naming_sweep(cdf, acc, signs, u, variant)
        out_c = _kernels_c.naming_sweep(cdf, acc, signs, u, variant)
        for x, y in zip(out_py, out_c):
            assert np.array_equal(x, y)
            assert x.dtype == y.dtype

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 60), st.integers(0, 2**32 - 1))
    def test_mh_chain(self, d, w, rounds, seed):
        rng = np.random.default_rng(seed)
        p = rng.random((2, d, w)) * (rng.random((2, d, w)) > 0.3)
        p[..., 0] += 1e-3
        cdf = _cdf_from_probs(p)
        acc = rng.random((2, d, w, w))
        signs0 = rng.integers(w, size=d)
        u = rng.random((rounds, d, 2))
        sp = (np.arange(rounds) % 2).astype(np.int64)
        a = _kernels_py.mh_chain(cdf, acc, signs0, u, sp, 1 - sp)
        b = _kernels_c.mh_chain(cdf, acc, signs0, u, sp, 1 - sp)
        assert np.array_equal(a[0], b[0])
        assert a[1] == b[1]

    def test_chain_matches_repeated_sweeps(self, backend):
        rng = np.random.default_rng(5)
        d, w, rounds = 3, 3, 40
        cdf = _cdf_from_probs(rng.random((2, d, w)))
        acc = rng.random((2, d, w, w))
        u = rng.random((rounds, d, 2))
        sp = (np.arange(rounds) % 2).astype(np.int64)
        chain, n = backend.mh_chain(cdf, acc, np.zeros(d, np.int64), u, sp, 1 - sp)
        signs, total = np.zeros(d, np.int64), 0
        for r in range(rounds):
            signs, _, accd = backend.naming_sweep(cdf[sp[r]], acc[1 - sp[r]], signs, u[r], kernels.MH)
            total += int(accd.sum())
            assert np.array_equal(chain[r], signs)
        assert n == total


def test_backend_selection_env():
    code = "from cpcsim import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, CPCSIM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    if _kernels_c is not None:
        env.pop("CPCSIM_PURE_PYTHON")
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert out.stdout.strip() == "cython"
