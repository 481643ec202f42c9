"""Counter-based random stream tests: reproducibility, derivation, and shape."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentwalk import ContractViolation, Rng


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**63 - 1))
def test_equal_seeds_equal_streams(seed):
    a = Rng(seed)
    b = Rng(seed)
    assert np.array_equal(a.uniform((100,)), b.uniform((100,)))
    assert np.array_equal(a.normal((100,)), b.normal((100,)))
    assert np.array_equal(a.integers(0, 50, (100,)), b.integers(0, 50, (100,)))


def test_different_seeds_differ():
    assert not np.array_equal(Rng(0).uniform((64,)), Rng(1).uniform((64,)))


def test_draw_order_advances_state():
    r = Rng(5)
    first = r.uniform((10,))
    second = r.uniform((10,))
    assert not np.array_equal(first, second)


def test_derive_is_deterministic_and_distinct():
    base = Rng(42)
    assert np.array_equal(Rng(42).derive("a").uniform((32,)),
                          Rng(42).derive("a").uniform((32,)))
    assert not np.array_equal(Rng(42).derive("a").uniform((32,)),
                              Rng(42).derive("b").uniform((32,)))
    # deriving does not disturb the parent stream
    underived = Rng(42).uniform((32,))
    base.derive("anything")
    assert np.array_equal(base.uniform((32,)), underived)


def test_uniform_range_and_normal_moments():
    u = Rng(9).uniform((100_000,))
    assert np.all(u >= 0.0) and np.all(u < 1.0)
    z = Rng(9).normal((100_000,))
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1.0) < 0.02


def test_integers_cover_range():
    draws = Rng(3).integers(0, 8, (10_000,))
    assert set(np.unique(draws)) == set(range(8))
    with pytest.raises(ContractViolation):
        Rng(3).integers(5, 5, (1,))


def test_permutation_is_a_permutation():
    perm = Rng(11).permutation(257)
    assert sorted(perm.tolist()) == list(range(257))


def test_permutation_repeatable():
    assert np.array_equal(Rng(11).permutation(100), Rng(11).permutation(100))


def test_shapes_respected():
    assert Rng(0).normal((3, 4)).shape == (3, 4)
    assert Rng(0).uniform((2, 2, 2)).shape == (2, 2, 2)
