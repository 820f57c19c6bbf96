"""Capped-sum gadget: products approximating min(1, t1 + t2)."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phiregret import gadget_min_sum
from phiregret.gadget import gadget_iteration_cap


def test_grid_within_eps():
    for eps in (0.1, 0.01):
        worst = 0.0
        for i in range(21):
            for j in range(21):
                t1, t2 = i / 20, j / 20
                got = gadget_min_sum(t1, t2, eps)
                worst = max(worst, abs(got - min(1.0, t1 + t2)))
        assert worst <= eps + 1e-12


def test_exact_on_easy_points():
    assert gadget_min_sum(0.0, 0.0, 0.01) == 0.0
    assert gadget_min_sum(1.0, 1.0, 0.01) == 1.0
    assert gadget_min_sum(0.3, 0.0, 0.01) == pytest.approx(0.3, abs=0.01)
    # sum preserved and t2 drained means t1 lands on the exact sum
    assert gadget_min_sum(0.25, 0.5, 1e-6) == pytest.approx(0.75, abs=1e-6)


def test_iteration_cap_grows_slowly():
    # the cap is what bounds the loop, so it must stay modest
    assert gadget_iteration_cap(0.1) == math.ceil(math.log(10) / math.log(1 / 0.9)) + 1
    assert gadget_iteration_cap(0.01) < 500
    assert gadget_iteration_cap(0.001) < 8000


def test_domain_validation():
    with pytest.raises(ValueError, match="lie in"):
        gadget_min_sum(-0.1, 0.5, 0.01)
    with pytest.raises(ValueError, match="lie in"):
        gadget_min_sum(0.5, 1.5, 0.01)
    with pytest.raises(ValueError, match="eps"):
        gadget_min_sum(0.5, 0.5, 0.0)
    with pytest.raises(ValueError, match="eps"):
        gadget_min_sum(0.5, 0.5, 0.5)


@settings(max_examples=200, deadline=None)
@given(
    t1=st.floats(0.0, 1.0),
    t2=st.floats(0.0, 1.0),
    eps=st.sampled_from([0.2, 0.05, 0.01]),
)
def test_random_points_within_eps(t1, t2, eps):
    got = gadget_min_sum(t1, t2, eps)
    assert 0.0 <= got <= 1.0
    assert abs(got - min(1.0, t1 + t2)) <= eps + 1e-12
