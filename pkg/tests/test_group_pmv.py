import math
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import weighted_average_oracle
from gappycomfort.group_pmv import (
    GroupMethod,
    aggregate,
    discomfort_weight,
    group_mad,
    group_median,
    group_weighted_average,
    load_tsv_log,
    satisfaction_ratios,
)

pmv_lists = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=12)


def test_median_examples():
    assert group_median([1, 2, 3]).value == 2
    assert group_median([0, 1]).value == 0.5
    assert group_median([-1.44, 0.31, -1.37, -0.11]).value == pytest.approx(-0.74)


def test_weighted_average_examples():
    assert group_weighted_average([0.5]).value == 0.5
    assert group_weighted_average([-2, 0, 0.5]).value == pytest.approx(-1.25)
    assert group_weighted_average([-1.0, 1.0]).value == 0.0
    assert [discomfort_weight(p) for p in (-2, -1.0, 1.0, 1.5)] == [4, 1, 1, 2.25]


def test_mad_examples():
    assert group_mad([0.3, 0.3, 0.3]).value == 0.3
    r = group_mad([-1, -0.5, 0, 0.5])
    assert r.value == pytest.approx(0.25)
    assert r.method is GroupMethod.MAD and r.n == 4


@pytest.mark.parametrize("fn", [group_median, group_weighted_average, group_mad])
def test_empty_rejected(fn):
    with pytest.raises(ValueError):
        fn([])
    with pytest.raises(ValueError):
        fn([None, math.nan])


def test_dropouts_excluded():
    assert group_median([0.2, None, -0.4, math.nan]).individual == (0.2, -0.4)


def test_aggregate_dispatch():
    assert aggregate([1, 2, 3], "median").value == 2
    assert aggregate([1, 2, 3], GroupMethod.WA).value == pytest.approx(weighted_average_oracle([1, 2, 3]))
    with pytest.raises(ValueError):
        aggregate([1], "MEAN")


@settings(max_examples=500)
@given(pmv_lists, st.randoms())
def test_permutation_invariance(vals, rnd):
    shuffled = list(vals)
    rnd.shuffle(shuffled)
    for m in GroupMethod:
        assert aggregate(shuffled, m).value == pytest.approx(aggregate(vals, m).value, abs=1e-12)


@settings(max_examples=500)
@given(pmv_lists)
def test_bounds_and_oracles(vals):
    lo, hi = min(vals), max(vals)
    med = group_median(vals).value
    assert med == pytest.approx(statistics.median(vals), abs=1e-12)
    assert lo <= med <= hi
    wa = group_weighted_average(vals).value
    assert wa == pytest.approx(weighted_average_oracle(vals), abs=1e-12)
    assert lo - 1e-12 <= wa <= hi + 1e-12
    mad = group_mad(vals).value
    assert med - 1e-12 <= mad <= med + (hi - lo) + 1e-12
    assert mad >= med


@given(st.floats(-1, 1))
def test_consensus(c):
    for m in GroupMethod:
        assert aggregate([c] * 5, m).value == c


@settings(max_examples=200)
@given(st.lists(st.floats(-0.9, 0.9), min_size=4, max_size=4), st.sampled_from([3.0, -3.0]))
def test_outlier_dominance(vals, v):
    base = {m: aggregate(vals, m).value for m in GroupMethod}
    grown = {m: aggregate(vals + [v], m).value for m in GroupMethod}
    s = sorted(vals)
    # the median moves to a neighbouring order statistic at most
    steps = max(b - a for a, b in zip(s, s[1:]))
    assert abs(grown[GroupMethod.MEDIAN] - base[GroupMethod.MEDIAN]) <= steps + 1e-12
    assert abs(grown[GroupMethod.WA] - base[GroupMethod.WA]) > abs(grown[GroupMethod.MEDIAN] - base[GroupMethod.MEDIAN])
    assert (grown[GroupMethod.WA] - base[GroupMethod.WA]) * v > 0


def test_satisfaction_examples():
    assert satisfaction_ratios([0, 0, 0]) == (100.0, 100.0)
    assert satisfaction_ratios([0, 1, -1, 2]) == (25.0, 75.0)
    with pytest.raises(ValueError):
        satisfaction_ratios([0, 4])
    with pytest.raises(ValueError):
        satisfaction_ratios([0.5])
    with pytest.raises(ValueError):
        satisfaction_ratios([])


def test_tsv_log(tmp_path):
    p = tmp_path / "tsv.csv"
    p.write_text("timestamp,subject_id,tsv\n10:00,S1,0\n10:01,S2,-1\n10:02,S1,2\n")
    recs = load_tsv_log(p)
    assert [r.tsv for r in recs] == [0, -1, 2]
    assert satisfaction_ratios([r.tsv for r in recs]) == pytest.approx((100 / 3, 200 / 3))
    p.write_text("timestamp,subject_id,tsv\n10:00,S1,5\n")
    with pytest.raises(ValueError, match="line 2"):
        load_tsv_log(p)
    p.write_text("time,id,vote\n")
    with pytest.raises(ValueError):
        load_tsv_log(p)
