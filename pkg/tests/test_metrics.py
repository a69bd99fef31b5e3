import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectralclone import metrics as M
from spectralclone.metrics import (
    NGRAM_DIM, BaselineFeatures, SpectralSignature, ascg, b_size, d_size, fnv1a_32,
    function_set_sim, mutantxs_embed, mutantxs_sim, ngram_bucket, pss, shape, sim_cfg, sim_cg,
    spectral_distance, string_set_sim,
)
from spectralclone.spectral import Spectrum

SQRT2 = math.sqrt(2)
V_K2 = np.array([1.0, 0.0])
V_P3 = np.array([3, 1, 0]) / math.sqrt(10)


def hand_truncated_distance(a, b):
    m = min(len(a), len(b))
    return math.sqrt(sum((float(a[i]) - float(b[i])) ** 2 for i in range(m)))


def base(**kw):
    defaults = dict(file_size_bytes=0, disasm_size_bytes=0, cg_n_vertices=0, cg_n_edges=0,
                    ngram_vector=np.zeros(NGRAM_DIM), string_set=frozenset(), external_name_set=frozenset())
    defaults.update(kw)
    return BaselineFeatures(**defaults)


def test_sim_cg_identical():
    assert sim_cg(V_K2, V_K2) == SQRT2


def test_sim_cg_k2_vs_p3():
    expected = SQRT2 - hand_truncated_distance(V_K2, V_P3)
    assert sim_cg(V_K2, V_P3) == pytest.approx(expected, abs=1e-12)
    assert sim_cg(V_K2, [0.948683, 0.316228, 0]) == pytest.approx(1.093850, abs=1e-5)


def test_sim_cg_orthogonal():
    assert sim_cg([1, 0, 0], [0, 0, 1]) == 0.0


def test_sim_cfg_examples():
    w = np.array([2.0, 1.0]) / math.sqrt(5)
    assert sim_cfg(w, w) == SQRT2
    assert sim_cfg([1.0], [0.6, 0.8]) == pytest.approx(SQRT2 - 0.4, abs=1e-12)
    assert sim_cfg([1.0], [0.6, 0.8]) == pytest.approx(1.014214, abs=1e-6)
    assert sim_cfg([], [0.6, 0.8]) == SQRT2
    assert sim_cfg([1.0], []) == SQRT2


def test_pss_examples():
    s = SpectralSignature(V_P3, np.array([1.0]))
    assert pss(s, s) == 1.0
    a = SpectralSignature(V_K2, np.array([1.0]))
    expected = (SQRT2 - hand_truncated_distance(V_K2, V_P3) + SQRT2) / (2 * SQRT2)
    assert pss(a, s) == pytest.approx(expected, abs=1e-12)
    assert pss(a, s) == pytest.approx(0.886725, abs=1e-5)
    o1 = SpectralSignature(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    o2 = SpectralSignature(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    assert pss(o1, o2) == 0.0


def test_spectral_distance():
    k2, p3 = Spectrum(np.array([2.0, 0.0])), Spectrum(np.array([3.0, 1.0, 0.0]))
    assert spectral_distance(k2, k2) == 0
    assert spectral_distance(k2, p3) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert spectral_distance(p3, Spectrum(np.empty(0))) == 0


def test_sizes():
    assert b_size(base(file_size_bytes=100), base(file_size_bytes=120)) == -20
    assert b_size(base(file_size_bytes=55), base(file_size_bytes=55)) == 0
    assert b_size(base(file_size_bytes=0), base(file_size_bytes=7)) == -7
    assert d_size(base(disasm_size_bytes=100), base(disasm_size_bytes=120)) == -20
    assert d_size(base(disasm_size_bytes=9), base(disasm_size_bytes=9)) == 0
    assert d_size(base(disasm_size_bytes=5), base(disasm_size_bytes=0)) == -5


def test_shape():
    assert shape(base(cg_n_vertices=10, cg_n_edges=20), base(cg_n_vertices=5, cg_n_edges=10)) == 0.25
    assert shape(base(cg_n_vertices=7, cg_n_edges=9), base(cg_n_vertices=7, cg_n_edges=9)) == 1.0
    assert shape(base(cg_n_vertices=3, cg_n_edges=0), base(cg_n_vertices=3, cg_n_edges=0)) == 1.0
    assert shape(base(cg_n_vertices=3, cg_n_edges=0), base(cg_n_vertices=3, cg_n_edges=4)) == 0.0


def test_ascg():
    k2, p3 = np.array([2.0, 0.0]), np.array([3.0, 1.0, 0.0])
    assert ascg(p3, p3) == 0
    assert ascg(k2, p3) == pytest.approx(-1 / 3, abs=1e-12)
    assert ascg(Spectrum(k2), Spectrum(p3)) == pytest.approx(-0.333333, abs=1e-6)
    assert ascg(p3, np.empty(0)) == 0
    # invariant to positive rescaling, so normalized spectra work too
    assert ascg(k2 / 2, p3 / np.linalg.norm(p3)) == pytest.approx(ascg(k2, p3), abs=1e-15)
    # edgeless graph: all-zero normalization
    assert ascg(np.zeros(3), p3) == pytest.approx(-(1 + 1 / 3), abs=1e-15)


def test_fnv1a_reference_vectors():
    assert fnv1a_32(b"") == 0x811C9DC5
    assert fnv1a_32(b"a") == 0xE40C292C
    assert fnv1a_32(b"foobar") == 0xBF9CF968


def test_mutantxs_two_grams():
    vec = mutantxs_embed(["mov", "add", "mov", "add", "mov"])
    g1, g2 = ("mov", "add", "mov", "add"), ("add", "mov", "add", "mov")
    assert vec.shape == (NGRAM_DIM,)
    assert np.count_nonzero(vec) <= 2
    assert vec.sum() == pytest.approx(1.0, abs=1e-12)
    expected = np.zeros(NGRAM_DIM)
    expected[ngram_bucket(g1)] += 0.5
    expected[ngram_bucket(g2)] += 0.5
    assert np.array_equal(vec, expected)


def test_mutantxs_short_and_single():
    assert not mutantxs_embed([]).any()
    assert not mutantxs_embed(["a", "b", "c"]).any()
    vec = mutantxs_embed(["a", "b", "c", "d"])
    assert np.count_nonzero(vec) == 1 and vec.max() == 1.0


def test_mutantxs_sim():
    x = mutantxs_embed(list("abcdefg"))
    assert mutantxs_sim(x, x) == 0
    one_hot = np.zeros(NGRAM_DIM)
    one_hot[17] = 1.0
    assert mutantxs_sim(np.zeros(NGRAM_DIM), one_hot) == -1.0
    a, b = np.zeros(NGRAM_DIM), np.zeros(NGRAM_DIM)
    a[[1, 2]] = 0.5
    b[[3, 4]] = 0.5
    assert mutantxs_sim(a, b) == pytest.approx(-1.0, abs=1e-15)


def test_jaccard_sets():
    assert string_set_sim({"x", "y"}, {"x", "z"}) == pytest.approx(1 / 3)
    assert string_set_sim({"x"}, {"x"}) == 1.0
    assert string_set_sim({"x"}, {"y"}) == 0.0
    assert string_set_sim(set(), set()) == 1.0
    assert function_set_sim({"printf", "malloc"}, {"printf", "free"}) == pytest.approx(1 / 3)
    assert function_set_sim({"a", "b"}, {"b", "a"}) == 1.0
    assert function_set_sim({"a"}, {"b"}) == 0.0


def _descending_unit(xs):
    x = np.sort(np.asarray(xs, dtype=float))[::-1]
    norm = np.linalg.norm(x)
    return x / norm if norm > 0 else x


unit_vectors = st.lists(st.floats(0, 100, allow_nan=False), max_size=30).map(_descending_unit)


@settings(max_examples=200, deadline=None)
@given(v0=unit_vectors, w0=unit_vectors, v1=unit_vectors, w1=unit_vectors)
def test_pss_laws(v0, w0, v1, w1):
    a, b = SpectralSignature(v0, w0), SpectralSignature(v1, w1)
    assert pss(a, b) == pss(b, a)
    assert 0.0 <= pss(a, b) <= 1.0
    assert pss(a, a) == pytest.approx(1.0, abs=1e-12)


def test_registry_covers_metric_ids():
    assert set(M.METRIC_IDS) == {
        "pss", "psso", "simcg", "simcfg", "bsize", "dsize", "shape", "ascg", "mutantxs", "stringset", "functionset",
    }
