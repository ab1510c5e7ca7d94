import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swvp import _kernels
from swvp.features import FeatureIndex, StructureError, phi
from swvp.inference import (
    EnumerationCapError,
    LabelSpace,
    decode_many,
    enumerate_argmax,
    score,
    sequence_scores,
    viterbi_argmax,
)

from _helpers import brute_argmax, brute_score


def test_zero_weights_give_all_ones():
    index = FeatureIndex(3, 3)
    w = np.zeros(index.size)
    assert viterbi_argmax([1, 2, 3, 1], w, index).tolist() == [1, 1, 1, 1]
    assert enumerate_argmax([1, 2, 3, 1], w, index).tolist() == [1, 1, 1, 1]


def test_single_position_prefers_heavy_label():
    index = FeatureIndex(2, 3)
    w = np.zeros(index.size)
    w[index.encode("y", (2,))] = 1.0
    assert viterbi_argmax([1], w, index).tolist() == [2]
    assert enumerate_argmax([1], w, index).tolist() == [2]


def test_label_space_order():
    Z = LabelSpace(2, 3).array()
    assert Z.shape == (8, 3)
    assert Z[0].tolist() == [1, 1, 1]
    assert Z[1].tolist() == [1, 1, 2]
    assert Z[-1].tolist() == [2, 2, 2]
    assert [z.tolist() for z in LabelSpace(2, 3)] == Z.tolist()


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        enumerate_argmax([1] * 11, np.zeros(FeatureIndex(1, 3).size), FeatureIndex(1, 3))


def test_score_equals_dot_product():
    index = FeatureIndex(3, 2)
    w = np.arange(index.size, dtype=float) - 20
    x, y = [1, 3, 2, 2], [2, 1, 1, 2]
    assert score(x, y, w, index) == phi(x, y, index).dot(w)


def test_small_integer_weights_match_template_oracle():
    # C_y=2, L=3: eight labelings scored through the independent template oracle
    rng = np.random.default_rng(11)
    index = FeatureIndex(3, 2)
    for _ in range(50):
        w = rng.integers(-3, 4, size=index.size).astype(float)
        x = rng.integers(1, 4, size=3)
        assert viterbi_argmax(x, w, index).tolist() == brute_argmax(x, w, index).tolist()


def test_length_eight_three_labels():
    rng = np.random.default_rng(5)
    index = FeatureIndex(4, 3)
    for _ in range(100):
        w = rng.normal(size=index.size)
        x = rng.integers(1, 5, size=8)
        assert np.array_equal(viterbi_argmax(x, w, index), enumerate_argmax(x, w, index))


def test_invalid_input():
    index = FeatureIndex(2, 2)
    with pytest.raises(StructureError):
        viterbi_argmax([], np.zeros(index.size), index)
    with pytest.raises(StructureError):
        viterbi_argmax([3], np.zeros(index.size), index)
    with pytest.raises(StructureError):
        viterbi_argmax([1], np.zeros(5), index)


@settings(max_examples=150, deadline=None)
@given(
    st.integers(1, 4),
    st.integers(1, 3),
    st.integers(1, 6),
    st.integers(0, 2**32 - 1),
    st.sampled_from(["normal", "ints"]),
)
def test_viterbi_equals_enumeration(cx, cy, L, seed, kind):
    # integer weights produce many exact ties, exercising the tie-break
    rng = np.random.default_rng(seed)
    index = FeatureIndex(cx, cy)
    w = rng.normal(size=index.size) if kind == "normal" else rng.integers(-2, 3, size=index.size) * 1.0
    x = rng.integers(1, cx + 1, size=L)
    v = viterbi_argmax(x, w, index)
    e = enumerate_argmax(x, w, index)
    assert np.array_equal(v, e)
    # the returned labeling is a true maximizer under the independent scorer
    Z = LabelSpace(cy, L).array()
    assert score(x, v, w, index) == sequence_scores(x, Z, w, index).max()
    if kind == "ints":
        assert brute_score(x, v, w, index) == max(brute_score(x, z, w, index) for z in Z)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_numpy_backend_matches_compiled(seed):
    rng = np.random.default_rng(seed)
    index = FeatureIndex(3, 3)
    w = rng.integers(-2, 3, size=index.size) * 0.5
    X = rng.integers(1, 4, size=(20, 6))
    ref = np.stack([_kernels.decode_np(w, x, index.offsets, index.n_labels) for x in X])
    assert np.array_equal(_kernels.decode_batch_np(w, X, index.offsets, index.n_labels), ref)
    if _kernels.NUMBA_AVAILABLE:
        assert np.array_equal(_kernels.decode_batch_nb(w, X, index.offsets, index.n_labels), ref)
    assert np.array_equal(decode_many(X, w, index), ref)
