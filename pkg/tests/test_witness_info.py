import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mi_entropy_oracle
from semsphere.errors import BothEmpty, EmptySet
from semsphere.witness_info import (
    capacity_experiment,
    default_bit_grid,
    estimate_overlap,
    jaccard,
    mutual_information,
    mutual_information_from_counts,
    plant_sets,
    scaling_constants,
    sketch,
    write_capacity_csv,
)

id_sets = st.frozensets(st.integers(0, 200), min_size=1, max_size=64)


def test_jaccard_known_values():
    assert jaccard({1, 2, 3}, {2, 3, 4}) == 0.5
    assert jaccard({1}, {1}) == 1.0
    assert jaccard({1}, set()) == 0.0
    with pytest.raises(BothEmpty):
        jaccard(set(), set())


def test_mutual_information_known_values():
    assert mutual_information({1, 2}, {1, 2}) == pytest.approx(math.log(2))
    # disjoint sets of size 4: log(16 / 8)
    assert mutual_information(range(4), range(4, 8)) == pytest.approx(math.log(2))
    with pytest.raises(EmptySet):
        mutual_information(set(), {1})
    with pytest.raises(ValueError):
        mutual_information_from_counts(3, 3, 4)


@given(id_sets, id_sets)
def test_mi_matches_entropy_oracle(A, B):
    n, m, k = len(A), len(B), len(A & B)
    assert mutual_information(A, B) == pytest.approx(mi_entropy_oracle(n, m, k), abs=1e-12)


@given(id_sets, id_sets)
def test_mi_is_symmetric_and_bounded(A, B):
    I = mutual_information(A, B)
    assert I == pytest.approx(mutual_information(B, A), abs=1e-15)
    assert I <= math.log(min(len(A), len(B))) + 1e-12


@given(st.integers(1, 64), st.integers(1, 64))
def test_mi_increases_with_overlap_for_fixed_sizes(n, m):
    vals = [mutual_information_from_counts(n, m, k) for k in range(min(n, m) + 1)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_sketch_is_deterministic_and_prefix_consistent():
    A = set(range(100))
    s = sketch(A, 512, seed=7)
    assert s == sketch(A, 512, seed=7)
    assert s.prefix(64) == sketch(A, 64, seed=7)
    assert s != sketch(A, 512, seed=8)
    # input order and container type do not matter
    assert sketch(list(reversed(range(100))), 512, seed=7) == s
    assert sketch(np.arange(100), 512, seed=7) == s


def test_sketch_validation():
    with pytest.raises(ValueError):
        sketch({1}, 4)
    with pytest.raises(EmptySet):
        sketch(set(), 16)
    with pytest.raises(ValueError):
        estimate_overlap(sketch({1}, 16, 0), sketch({1}, 16, 1))


def test_sketch_hashes_non_integer_ids():
    a = sketch({"alpha", "beta", "gamma"}, 256, seed=1)
    b = sketch({"alpha", "beta", "gamma"}, 256, seed=1)
    assert a == b
    assert estimate_overlap(a, b) == 1.0


@pytest.mark.parametrize("overlap", [0, 16, 32, 48, 64])
def test_overlap_estimate_is_unbiased(overlap):
    A = set(range(64))
    B = set(range(64 - overlap, 128 - overlap))
    true = jaccard(A, B)
    ests = [estimate_overlap(sketch(A, 256, s), sketch(B, 256, s)) for s in range(200)]
    # each estimate has variance (1 - J^2) / m; the mean of 200 is tight
    se = math.sqrt((1 - true**2) / 256 / 200) + 1e-9
    assert abs(np.mean(ests) - true) < 4 * se + 1e-12


def test_default_bit_grid_covers_target():
    g = default_bit_grid(64, 0.2)
    assert g[0] == 8 and g == sorted(set(g))
    assert g[-1] >= 12 * math.log(64) / 0.04


def test_plant_sets_realizes_the_gap():
    rng = np.random.default_rng(0)
    q, sets, gap = plant_sets(32, 0.2, rng, 32, 0.1)
    Q = set(q.tolist())
    js = [jaccard(Q, set(s.tolist())) for s in sets]
    assert js[0] - max(js[1:]) == pytest.approx(gap)
    assert all(len(s) == 32 for s in sets)


def test_capacity_experiment_small_and_csv(tmp_path):
    r = capacity_experiment(16, 0.4, trials=20, seed=1, ms=[8, 32, 128, 512])
    assert r.ms == [8, 32, 128, 512]
    assert r.accuracy[-1] >= 0.95
    assert r.m_star in r.ms
    assert r.accuracy == capacity_experiment(16, 0.4, trials=20, seed=1, ms=[8, 32, 128, 512]).accuracy
    path = tmp_path / "cap.csv"
    write_capacity_csv([r], path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["N", "delta_gap", "m", "accuracy", "m_star_flag"]
    assert sum(int(row[4]) for row in rows[1:]) == 1
    assert scaling_constants([r])[(16, 0.4)] == pytest.approx(r.m_star * 0.16 / math.log(16))


def test_capacity_preconditions():
    with pytest.raises(ValueError):
        capacity_experiment(8, 0.2)
    with pytest.raises(ValueError):
        capacity_experiment(64, 0.6)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 300), st.integers(0, 2**40))
def test_sketch_bits_are_balanced_on_average(size, seed):
    s = sketch(set(range(size)), 4096, seed)
    assert 0.4 < s.bits.mean() < 0.6
