"""Post-hoc aggregation of migration records into per-antigen verdicts.

Every antigen copy inside every migration record counts as one
presentation under that record's context. The mean context value of a
label is its fraction of mature presentations, in [0, 1]; labels are
classified anomalous when that fraction strictly exceeds a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, TextIO

from scipy import stats

from .core import Context
from .tissue import MigrationRecord


class TruthMismatch(Exception):
    """A verdict label is missing from the ground-truth map."""


@dataclass
class AntigenVerdict:
    label: str
    presented_mature: int = 0
    presented_semi: int = 0
    decided_class: Optional[int] = None

    @property
    def total(self) -> int:
        return self.presented_mature + self.presented_semi

    @property
    def mean_context(self) -> Optional[float]:
        """Fraction of mature presentations; None if never presented."""
        if self.total == 0:
            return None
        return self.presented_mature / self.total


@dataclass
class RunSummary:
    verdicts: dict[str, AntigenVerdict]
    errors: Optional[int] = None
    unseen: int = 0
    per_process_mag: dict[str, float] = field(default_factory=dict)


def aggregate(records: Iterable[MigrationRecord]) -> dict[str, AntigenVerdict]:
    """Count presentations per label across all records (multiplicity counts)."""
    verdicts: dict[str, AntigenVerdict] = {}
    for rec in records:
        mature = rec.context is Context.MATURE
        for label in rec.antigens:
            v = verdicts.setdefault(label, AntigenVerdict(label))
            if mature:
                v.presented_mature += 1
            else:
                v.presented_semi += 1
    return verdicts


def classify(verdicts: Mapping[str, AntigenVerdict], threshold: float) -> None:
    """Decide each presented label's class in place.

    mean_context strictly over the threshold means class 1 (anomalous);
    never-presented labels keep decided_class None.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    for v in verdicts.values():
        mc = v.mean_context
        if mc is None:
            v.decided_class = None
        else:
            v.decided_class = 1 if mc > threshold else 0


def count_errors(verdicts: Mapping[str, AntigenVerdict],
                 truth: Mapping[str, int]) -> tuple[int, int]:
    """Errors against ground truth, plus the never-presented count.

    Never-presented labels count as errors and are reported separately
    as the second element. A verdict label absent from the truth map is
    a dataset defect and aborts.
    """
    errors = 0
    unseen = 0
    for label, v in verdicts.items():
        if label not in truth:
            raise TruthMismatch(f"label {label!r} missing from ground truth")
        if v.decided_class is None:
            unseen += 1
            errors += 1
        elif v.decided_class != truth[label]:
            errors += 1
    # labels in truth that never produced a verdict at all
    for label in truth:
        if label not in verdicts:
            unseen += 1
            errors += 1
    return errors, unseen


def process_mag(verdicts: Mapping[str, AntigenVerdict],
                process_groups: Mapping[str, set[str]]) -> dict[str, Optional[float]]:
    """Per-group fraction of mature presentations over all member labels.

    Groups with zero presentations map to None (undefined).
    """
    if not process_groups:
        raise ValueError("process groups must be non-empty")
    out: dict[str, Optional[float]] = {}
    for name, labels in process_groups.items():
        mature = sum(verdicts[l].presented_mature for l in labels if l in verdicts)
        total = sum(verdicts[l].total for l in labels if l in verdicts)
        out[name] = mature / total if total > 0 else None
    return out


@dataclass(frozen=True)
class PairedTTestResult:
    mean_difference: float
    p_value: float
    exact_tie: bool = False


def paired_t_test(xs: Sequence[float], ys: Sequence[float]) -> PairedTTestResult:
    """Two-tailed paired t-test on the differences xs - ys.

    Zero-variance differences are degenerate: a zero mean difference is
    an exact tie (p = 1); a constant nonzero shift is flagged exact_tie
    with p = 0 since no sampling variation exists to test against.
    """
    if len(xs) != len(ys):
        raise ValueError("paired samples must have equal length")
    if len(xs) < 2:
        raise ValueError("need at least two pairs")
    diffs = [x - y for x, y in zip(xs, ys)]
    mean_diff = sum(diffs) / len(diffs)
    var = sum((d - mean_diff) ** 2 for d in diffs)
    if var == 0.0:
        if mean_diff == 0.0:
            return PairedTTestResult(0.0, 1.0, exact_tie=True)
        return PairedTTestResult(mean_diff, 0.0, exact_tie=True)
    t_stat, p_value = stats.ttest_rel(xs, ys)
    return PairedTTestResult(mean_diff, float(p_value))


def mean_and_std(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and standard deviation (ddof=1; std 0 for n=1)."""
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    return mean, math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))


def write_verdict_table(verdicts: Mapping[str, AntigenVerdict], fh: TextIO,
                        machine: bool = False) -> None:
    """One row per antigen: label, presentations, mean context, class."""
    rows = sorted(verdicts.values(), key=lambda v: v.label)
    if machine:
        fh.write("label\tpresentations\tmean_context\tclass\n")
        for v in rows:
            mc = "" if v.mean_context is None else repr(v.mean_context)
            cls = "" if v.decided_class is None else str(v.decided_class)
            fh.write(f"{v.label}\t{v.total}\t{mc}\t{cls}\n")
        return
    fh.write(f"{'label':<24}{'presented':>10}{'mean_ctx':>10}{'class':>7}\n")
    for v in rows:
        mc = "unseen" if v.mean_context is None else f"{v.mean_context:.3f}"
        cls = "-" if v.decided_class is None else str(v.decided_class)
        fh.write(f"{v.label:<24}{v.total:>10}{mc:>10}{cls:>7}\n")


def write_process_table(rows: Mapping[str, tuple[float, float, float]], fh: TextIO,
                        machine: bool = False) -> None:
    """One row per process group: name, antigen count, mean %mAg, std dev.

    `rows` maps group name to (num_antigen, mean_mag, std_mag).
    """
    if machine:
        fh.write("process\tnum_antigen\tmean_mag\tstd_mag\n")
        for name, (num, mean, std) in rows.items():
            fh.write(f"{name}\t{repr(num)}\t{repr(mean)}\t{repr(std)}\n")
        return
    fh.write(f"{'process':<20}{'antigen':>10}{'mean %mAg':>12}{'std dev':>10}\n")
    for name, (num, mean, std) in rows.items():
        fh.write(f"{name:<20}{num:>10.1f}{mean:>12.3f}{std:>10.3f}\n")
