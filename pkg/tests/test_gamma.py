import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swvp.core import MixedAssignment, ViolationPartition
from swvp.features import SparseVector
from swvp.gamma import (
    GammaScheme,
    NoGammaAvailable,
    entropy,
    margin_ranks,
    raw_weights,
    set_gamma,
)


def part_of(margins):
    return ViolationPartition(
        tuple(
            MixedAssignment((k,), np.array([1]), float(m), SparseVector.from_dict({k: 1.0}))
            for k, m in enumerate(margins)
        )
    )


def test_wm_aggressive_example():
    g = set_gamma(GammaScheme.parse("A-WM", 1.0), part_of([-2.0, -1.0, -1.0]))
    assert g.tolist() == [0.5, 0.25, 0.25]


@pytest.mark.parametrize("beta", [0.5, 1.0, 3.0])
def test_wm_all_zero_margins_is_uniform(beta):
    g = set_gamma(GammaScheme.parse("A-WM", beta), part_of([0.0, 0.0, 0.0, 0.0]))
    assert g.tolist() == [0.25] * 4


def test_wmr_beta2_example():
    raw = np.array([1.0, 0.5625, 0.25, 0.0625])
    g = set_gamma(GammaScheme.parse("A-WMR", 2.0), part_of([-4.0, -3.0, -2.0, -1.0]))
    np.testing.assert_allclose(g, raw / raw.sum(), rtol=0, atol=1e-15)
    # rank follows |margin| in descending order, not position
    g2 = set_gamma(GammaScheme.parse("A-WMR", 2.0), part_of([-1.0, -4.0, -2.0, -3.0]))
    np.testing.assert_allclose(g2, np.array([0.0625, 1.0, 0.25, 0.5625]) / 1.875, atol=1e-15)


def test_margin_rank_ties_go_by_position():
    assert margin_ranks([1.0, 3.0, 3.0, 0.5]).tolist() == [2, 0, 1, 3]


def test_aggressive_support_is_violating_only():
    g = set_gamma(GammaScheme.parse("A-WM", 1.0), part_of([-1.0, 2.0, -3.0]))
    assert g.tolist() == [0.25, 0.0, 0.75]


def test_balanced_support_covers_all():
    g = set_gamma(GammaScheme.parse("B-WM", 1.0), part_of([-1.0, 2.0, -1.0]))
    assert g.tolist() == [0.25, 0.5, 0.25]


def test_empty_support_signals():
    with pytest.raises(NoGammaAvailable):
        set_gamma(GammaScheme.parse("A-WMR", 1.0), part_of([1.0, 2.0]))


def test_enforce_condition2_drops_largest_positive():
    scheme = GammaScheme.parse("B-WM", 1.0, enforce_condition2=True)
    part = part_of([-1.0, 2.0, 0.5])
    g = set_gamma(scheme, part)
    assert g[1] == 0.0
    assert float(np.dot(g, part.margins)) <= 0.0
    assert g.sum() == pytest.approx(1.0)


def test_csp_scheme_is_uniform():
    g = set_gamma(GammaScheme.csp(), part_of([-5.0]))
    assert g.tolist() == [1.0]


def test_parse_tokens():
    s = GammaScheme.parse("b-wmr,beta=2.5")
    assert (s.token, s.beta) == ("B-WMR", 2.5)
    assert GammaScheme.parse("CSP").is_csp
    with pytest.raises(ValueError):
        GammaScheme.parse("C-WM")
    with pytest.raises(ValueError):
        GammaScheme.parse("A-WM", beta=0.0)


def test_entropy():
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.5, 0.5]) == pytest.approx(np.log(2))


margin_lists = st.lists(st.floats(-10, 10, allow_nan=False, allow_subnormal=False), min_size=1, max_size=8)


@given(margin_lists, st.sampled_from(["A-WM", "B-WM", "A-WMR", "B-WMR"]), st.floats(0.1, 5.0))
def test_condition1_always_holds(margins, token, beta):
    scheme = GammaScheme.parse(token, beta)
    part = part_of(margins)
    try:
        g = set_gamma(scheme, part)
    except NoGammaAvailable:
        assert scheme.mode.value == "A" and all(m > 0 for m in margins)
        return
    assert np.all(g >= 0.0)
    assert abs(g.sum() - 1.0) <= 1e-9
    if scheme.mode.value == "A":
        assert np.all(g[part.margins > 0] == 0.0)
        assert float(np.dot(g, part.margins)) <= 0.0


@given(margin_lists, st.floats(0.1, 5.0))
def test_enforce_condition2_property(margins, beta):
    scheme = GammaScheme.parse("B-WMR", beta, enforce_condition2=True)
    part = part_of(margins)
    try:
        g = set_gamma(scheme, part)
    except NoGammaAvailable:
        assert all(m > 0 for m in margins)
        return
    weighted = 0.0
    for gk, m in zip(g, margins):
        weighted += gk * m
    assert weighted <= 0.0


@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=8), st.floats(0.1, 5.0))
def test_wmr_raw_weights_are_rank_powers(a, beta):
    raw = raw_weights(GammaScheme.parse("A-WMR", beta), a)
    n = len(a)
    assert sorted(raw.tolist(), reverse=True) == pytest.approx([((n - r) / n) ** beta for r in range(n)])
