"""Group-level PMV aggregation and thermal-sensation-vote analytics."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


class GroupMethod(str, enum.Enum):
    MEDIAN = "MEDIAN"
    WA = "WA"
    MAD = "MAD"

    @classmethod
    def parse(cls, text: str) -> "GroupMethod":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown group method {text!r}; choose from MEDIAN, WA, MAD") from None


@dataclass(frozen=True)
class GroupPmv:
    value: float
    method: GroupMethod
    individual: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.individual)


def _clean(pmvs: Iterable[float | None]) -> tuple[float, ...]:
    # dropouts arrive as None/NaN and are left out, not imputed
    vals = tuple(float(p) for p in pmvs if p is not None and not math.isnan(p))
    if not vals:
        raise ValueError("group PMV needs at least one individual value")
    return vals


def _median(vals: Sequence[float]) -> float:
    s = sorted(vals)
    n = len(s)
    mid = n // 2
    return s[mid] if n % 2 else (s[mid - 1] + s[mid]) / 2.0


def discomfort_weight(p: float) -> float:
    """1 inside the closed band [-1, 1], the squared PMV outside it."""
    return 1.0 if -1.0 <= p <= 1.0 else p * p


def group_median(pmvs: Iterable[float]) -> GroupPmv:
    vals = _clean(pmvs)
    return GroupPmv(_median(vals), GroupMethod.MEDIAN, vals)


def group_weighted_average(pmvs: Iterable[float]) -> GroupPmv:
    vals = _clean(pmvs)
    w = [discomfort_weight(p) for p in vals]
    # offsets from an anchor: same value as sum(w p) / sum(w), but exact on consensus
    anchor = _median(vals)
    value = anchor + math.fsum(wi * (p - anchor) for wi, p in zip(w, vals)) / math.fsum(w)
    return GroupPmv(value, GroupMethod.WA, vals)


def mean_abs_deviation_from_median(vals: Sequence[float]) -> float:
    med = _median(vals)
    return math.fsum(abs(p - med) for p in vals) / len(vals)


def group_mad(pmvs: Iterable[float]) -> GroupPmv:
    """Median plus the mean absolute deviation from the median."""
    vals = _clean(pmvs)
    return GroupPmv(_median(vals) + mean_abs_deviation_from_median(vals), GroupMethod.MAD, vals)


AGGREGATORS = {
    GroupMethod.MEDIAN: group_median,
    GroupMethod.WA: group_weighted_average,
    GroupMethod.MAD: group_mad,
}


def aggregate(pmvs: Iterable[float], method: GroupMethod | str) -> GroupPmv:
    if isinstance(method, str) and not isinstance(method, GroupMethod):
        method = GroupMethod.parse(method)
    return AGGREGATORS[method](pmvs)


def satisfaction_ratios(tsv: Sequence[int]) -> tuple[float, float]:
    """Percent of votes at exactly 0 and percent within [-1, +1]."""
    votes = list(tsv)
    if not votes:
        raise ValueError("no votes")
    for v in votes:
        if int(v) != v or not -3 <= v <= 3:
            raise ValueError(f"vote {v!r} is not an integer on the -3..+3 scale")
    n = len(votes)
    neutral = sum(1 for v in votes if v == 0)
    comfort = sum(1 for v in votes if -1 <= v <= 1)
    return 100.0 * neutral / n, 100.0 * comfort / n


@dataclass(frozen=True)
class TsvRecord:
    timestamp: str
    subject_id: str
    tsv: int


def load_tsv_log(path: str | Path) -> list[TsvRecord]:
    """Read a ``timestamp,subject_id,tsv`` log."""
    out = []
    with Path(path).open(newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ["timestamp", "subject_id", "tsv"]:
            raise ValueError(f"{path}: header must be timestamp,subject_id,tsv")
        for lineno, row in enumerate(reader, start=2):
            try:
                vote = int(row["tsv"])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-integer vote {row['tsv']!r}") from None
            if not -3 <= vote <= 3:
                raise ValueError(f"{path}: line {lineno}: vote {vote} outside -3..+3")
            out.append(TsvRecord(row["timestamp"], row["subject_id"], vote))
    return out
