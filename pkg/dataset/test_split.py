import pytest
from hypothesis import given
from hypothesis import strategies as st

from dataset.split import BadFraction, EmptyList, split_dataset


def test_sixteen_to_two_thousand():
    split = split_dataset(list(range(18000)), 16000 / 18000, seed=3)
    assert len(split.train) == 16000
    assert len(split.val) == 2000


def test_fraction_one_puts_everything_in_train():
    split = split_dataset(["a", "b", "c"], 1.0, seed=0)
    assert split.train == ["a", "b", "c"]
    assert split.val == []


def test_eighty_twenty_floors():
    split = split_dataset(list(range(7)), 0.8, seed=1)
    assert len(split.train) == 5
    assert len(split.val) == 2


def test_same_seed_same_assignment():
    ids = list(range(100))
    assert split_dataset(ids, 0.5, 9).labels == split_dataset(ids, 0.5, 9).labels
    assert split_dataset(ids, 0.5, 9).labels != split_dataset(ids, 0.5, 10).labels


@given(st.integers(1, 300), st.floats(0.01, 1.0), st.integers(0, 1000))
def test_partition_is_disjoint_and_exhaustive(n, fraction, seed):
    split = split_dataset(list(range(n)), fraction, seed)
    assert set(split.train).isdisjoint(split.val)
    assert sorted(split.train + split.val) == list(range(n))


def test_empty_list():
    with pytest.raises(EmptyList):
        split_dataset([], 0.8, 0)


@pytest.mark.parametrize("fraction", [0.0, -0.1, 1.5])
def test_bad_fraction(fraction):
    with pytest.raises(BadFraction):
        split_dataset([1, 2, 3], fraction, 0)
