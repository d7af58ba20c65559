import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leakforge.errors import ConfigurationError
from leakforge.partition import Partition, seed_size, select_seed, split_corpus, subsample_client


def ids(n):
    return [f"d{i:04d}" for i in range(n)]


def test_ten_docs_deterministic():
    p = split_corpus(ids(10), 42)
    assert len(p.client_ids) == 5 and len(p.attacker_pool_ids) == 5
    assert split_corpus(ids(10), 42) == p


def test_odd_count_favours_client():
    p = split_corpus(ids(11), 0)
    assert (len(p.client_ids), len(p.attacker_pool_ids)) == (6, 5)


def test_different_seeds_differ():
    assert split_corpus(ids(1000), 1).client_ids != split_corpus(ids(1000), 2).client_ids


def test_input_order_irrelevant():
    a = ids(50)
    assert split_corpus(a, 5) == split_corpus(list(reversed(a)), 5)


@pytest.mark.parametrize("n", [0, 1])
def test_too_small(n):
    with pytest.raises(ConfigurationError):
        split_corpus(ids(n), 0)


def test_duplicate_ids():
    with pytest.raises(ConfigurationError):
        split_corpus(["a", "a", "b"], 0)


@pytest.mark.parametrize("pool, fraction, expected", [
    (1000, 0.2, 200), (250, 0.2, 50), (5, 0.5, 3), (5, 0.1, 1), (7, 1.0, 7), (3, 0.1, 0),
])
def test_seed_size(pool, fraction, expected):
    assert seed_size(pool, fraction) == expected


def test_select_seed_counts():
    p = select_seed(split_corpus(ids(2000), 3), 0.2)
    assert len(p.seed_ids) == 200
    p.check(ids(2000))


def test_fraction_one_takes_pool():
    p = select_seed(split_corpus(ids(40), 3), 1.0)
    assert p.seed_ids == p.attacker_pool_ids


@pytest.mark.parametrize("fraction", [0.0, -0.1, 1.5])
def test_bad_fraction(fraction):
    with pytest.raises(ConfigurationError):
        select_seed(split_corpus(ids(40), 3), fraction)


def test_empty_seed_is_fatal():
    with pytest.raises(ConfigurationError):
        select_seed(split_corpus(ids(6), 3), 0.1)


def test_explicit_seed_count():
    p = select_seed(split_corpus(ids(100), 3), 0.2, n_seed=7)
    assert len(p.seed_ids) == 7
    with pytest.raises(ConfigurationError):
        select_seed(split_corpus(ids(100), 3), 0.2, n_seed=51)


def test_subsample_client():
    p = split_corpus(ids(100), 9)
    sub = subsample_client(p, 20)
    assert len(sub.client_ids) == 20 and sub.client_ids <= p.client_ids
    assert sub.attacker_pool_ids == p.attacker_pool_ids
    assert subsample_client(p, None) == p
    with pytest.raises(ConfigurationError):
        subsample_client(p, 51)


def test_json_round_trip():
    p = select_seed(split_corpus(ids(30), 4), 0.4)
    assert Partition.from_json(p.to_json()) == p


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 500), st.integers(0, 2**32), st.floats(0.05, 1.0))
def test_partition_invariants(n, seed, fraction):
    all_ids = ids(n)
    p = split_corpus(all_ids, seed)
    assert len(p.client_ids) - len(p.attacker_pool_ids) in (0, 1)
    if seed_size(len(p.attacker_pool_ids), fraction) == 0:
        return
    p = select_seed(p, fraction)
    p.check(all_ids)
