"""Breast-cancer data pipeline: loading, signal mapping and experiments.

Each data item carries nine attributes on a 0-1 scale (the usual 1-10
integer scale divided by 10) and a binary class. The attribute with the
largest standard deviation drives the PAMP and safe signals through its
deviation from the per-class means; the next three by standard deviation
form the danger signal. Items are streamed one per tick in a configurable
order, depositing their id as antigen alongside their signals.

The original UCI file is not redistributable here, so a deterministic
synthetic surrogate with the same shape (240 class-0 items, 460 class-1,
clump thickness on top of the std-dev ranking) is bundled; the loader
accepts the real breast-cancer-wisconsin.data format when available.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, TextIO

from .analysis import AntigenVerdict, RunSummary, aggregate, classify, count_errors
from .core import SignalVector, fuse_signals
from .tissue import MigrationRecord, PopulationConfig, Tissue

DANGER_ATTRIBUTE_COUNT = 3
DEFAULT_THRESHOLD = 0.65


@dataclass(frozen=True)
class LabelledItem:
    id: str
    attributes: tuple[float, ...]
    true_class: int

    def __post_init__(self):
        if len(self.attributes) != 9:
            raise ValueError("items carry exactly 9 attributes")
        if any(not math.isfinite(a) for a in self.attributes):
            raise ValueError("attributes must be finite")
        if self.true_class not in (0, 1):
            raise ValueError("class must be 0 or 1")


@dataclass(frozen=True)
class SignalMapping:
    """Attribute-to-signal assignment plus the calibrated scale.

    `pamp_from_class0_mean` picks the deviation orientation: when true,
    pamp measures distance from the class-0 mean (so class-1-like items
    look dangerous) and safe measures distance from the class-1 mean.
    """

    danger_attributes: tuple[int, int, int]
    pamp_safe_attribute: int
    class_means: tuple[float, float]
    scale: float
    pamp_from_class0_mean: bool = True

    def __post_init__(self):
        idxs = set(self.danger_attributes) | {self.pamp_safe_attribute}
        if len(idxs) != 4 or any(not 0 <= i < 9 for i in idxs):
            raise ValueError("signal attribute indices must be 4 distinct in-range values")
        if self.scale <= 0:
            raise ValueError("scale must be positive")


def select_attributes(items: Sequence[LabelledItem],
                      pamp_from_class0_mean: bool = True,
                      target_csm_rate: float = 0.2) -> SignalMapping:
    """Rank attributes by standard deviation and build the signal mapping.

    The top attribute feeds PAMP/safe, the next three feed danger. The
    scale is calibrated so the mean per-tick csm increment over the
    dataset equals `target_csm_rate` under default weights.
    """
    if len(items) < 2:
        raise ValueError("need at least two items")
    n = len(items)
    stds = []
    for a in range(9):
        vals = [it.attributes[a] for it in items]
        mean = sum(vals) / n
        stds.append(math.sqrt(sum((v - mean) ** 2 for v in vals) / (n - 1)))
    if all(s == 0.0 for s in stds):
        raise ValueError("constant dataset: no attribute varies")
    ranked = sorted(range(9), key=lambda a: (-stds[a], a))
    top = ranked[0]
    danger = tuple(ranked[1:1 + DANGER_ATTRIBUTE_COUNT])

    by_class = ([it.attributes[top] for it in items if it.true_class == 0],
                [it.attributes[top] for it in items if it.true_class == 1])
    if not by_class[0] or not by_class[1]:
        raise ValueError("both classes must be present")
    mu0 = sum(by_class[0]) / len(by_class[0])
    mu1 = sum(by_class[1]) / len(by_class[1])

    unscaled = SignalMapping(danger, top, (mu0, mu1), scale=1.0,
                             pamp_from_class0_mean=pamp_from_class0_mean)
    csm_rate = sum(fuse_signals(item_to_signals(it, unscaled), _DEFAULT_WEIGHTS)[0]
                   for it in items) / n
    if csm_rate <= 0:
        raise ValueError("dataset produces no csm signal; cannot calibrate")
    return replace(unscaled, scale=target_csm_rate / csm_rate)


_DEFAULT_WEIGHTS = PopulationConfig().weights


def item_to_signals(item: LabelledItem, m: SignalMapping) -> SignalVector:
    """Map one item to signal concentrations (inflammation is unused)."""
    danger = m.scale * sum(item.attributes[a] for a in m.danger_attributes) / len(m.danger_attributes)
    x = item.attributes[m.pamp_safe_attribute]
    mu0, mu1 = m.class_means
    dev0, dev1 = abs(x - mu0), abs(x - mu1)
    if m.pamp_from_class0_mean:
        pamp, safe = m.scale * dev0, m.scale * dev1
    else:
        pamp, safe = m.scale * dev1, m.scale * dev0
    return SignalVector(pamp=pamp, danger=danger, safe=safe, inflammation=0.0)


def order_stream(items: Sequence[LabelledItem], order: str,
                 seed: int = 0) -> list[LabelledItem]:
    """Arrange the stream: one-step, two-step or seeded random order."""
    class0 = [it for it in items if it.true_class == 0]
    class1 = [it for it in items if it.true_class == 1]
    if order == "one-step":
        return class0 + class1
    if order == "two-step":
        half = math.ceil(len(class0) / 2)
        return class0[:half] + class1 + class0[half:]
    if order == "random":
        shuffled = list(items)
        random.Random(seed).shuffle(shuffled)
        return shuffled
    raise ValueError(f"unknown order {order!r}")


@dataclass
class ExperimentResult:
    summary: RunSummary
    records_per_repeat: list[list[MigrationRecord]]
    orderings: list[list[str]] = field(default_factory=list)


def run_bc_experiment(items: Sequence[LabelledItem], order: str,
                      cfg: PopulationConfig, repeats: int = 20,
                      threshold: float = DEFAULT_THRESHOLD,
                      mapping: Optional[SignalMapping] = None,
                      drain_ticks: int = 300) -> ExperimentResult:
    """Stream the dataset `repeats` times and classify the pooled verdicts.

    Each repeat deposits every item's id as antigen and sets its signals
    for one tick. Presentations are pooled across repeats before the
    mean context is thresholded and errors counted against true classes.
    """
    if mapping is None:
        mapping = select_attributes(items)
    truth = {it.id: it.true_class for it in items}
    all_records: list[list[MigrationRecord]] = []
    orderings: list[list[str]] = []
    for r in range(repeats):
        stream = order_stream(items, order, seed=cfg.seed * 7919 + r)
        tissue = Tissue(replace(cfg, seed=cfg.seed * 1_000_003 + r))
        for it in stream:
            # antigen enters behind flow control so every queued sample is
            # eventually taken; signals advance one item per tick regardless
            tissue.enqueue_antigen(it.id)
            tissue.set_signals(item_to_signals(it, mapping))
            tissue.tick()
        # drain: keep the final signals active until the antigen backlog is
        # consumed and every cell holding antigen has migrated, so
        # tail-of-stream items still present
        for _ in range(drain_ticks):
            if (tissue.feed_pending == 0 and tissue.compartment.occupied == 0
                    and not any(c.antigen_store for c in tissue.pool)):
                break
            tissue.tick()
        all_records.append(tissue.records)
        orderings.append([it.id for it in stream])
    verdicts = aggregate(rec for run in all_records for rec in run)
    classify(verdicts, threshold)
    errors, unseen = count_errors(verdicts, truth)
    return ExperimentResult(RunSummary(verdicts, errors=errors, unseen=unseen),
                            all_records, orderings)


def context_switch_curve(ordered_ids: Sequence[str],
                         verdicts: dict[str, AntigenVerdict],
                         window: int = 21) -> list[Optional[float]]:
    """Rolling mean of per-position mean context along a stream ordering.

    Positions whose antigen was never presented contribute nothing to
    the window; a window with no presented antigen yields None.
    """
    values = [verdicts[i].mean_context if i in verdicts else None
              for i in ordered_ids]
    half = window // 2
    out: list[Optional[float]] = []
    for pos in range(len(values)):
        lo, hi = max(0, pos - half), min(len(values), pos + half + 1)
        seen = [v for v in values[lo:hi] if v is not None]
        out.append(sum(seen) / len(seen) if seen else None)
    return out


# --- file formats -----------------------------------------------------------

def load_items(fh: TextIO) -> list[LabelledItem]:
    """Read the native format: id, 9 attribute values, class per line."""
    items = []
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 11:
            raise ValueError(f"line {lineno}: expected 11 fields, got {len(parts)}")
        items.append(LabelledItem(
            id=parts[0],
            attributes=tuple(float(p) for p in parts[1:10]),
            true_class=int(parts[10]),
        ))
    return items


def write_items(items: Iterable[LabelledItem], fh: TextIO) -> None:
    for it in items:
        attrs = ",".join(repr(a) for a in it.attributes)
        fh.write(f"{it.id},{attrs},{it.true_class}\n")


def load_uci(fh: TextIO, class_zero_value: Optional[int] = None) -> list[LabelledItem]:
    """Read the UCI breast-cancer-wisconsin format.

    Lines are: sample code number, 9 attributes on the 1-10 integer
    scale, class 2 (benign) or 4 (malignant). Attributes are divided by
    10; records with missing values ('?') are dropped. `class_zero_value`
    picks which source class maps to 0; by default the smaller class
    becomes class 0. Duplicate sample codes are disambiguated with a
    suffix so every antigen label stays unique.
    """
    raw = []
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 11:
            raise ValueError(f"line {lineno}: expected 11 fields, got {len(parts)}")
        if "?" in parts[1:10]:
            continue
        cls = int(parts[10])
        if cls not in (2, 4):
            raise ValueError(f"line {lineno}: class must be 2 or 4, got {cls}")
        raw.append((parts[0], tuple(int(p) / 10.0 for p in parts[1:10]), cls))
    if not raw:
        return []
    if class_zero_value is None:
        counts = {2: 0, 4: 0}
        for _, _, cls in raw:
            counts[cls] += 1
        class_zero_value = min(counts, key=lambda c: (counts[c], c))
    seen: dict[str, int] = {}
    items = []
    for code, attrs, cls in raw:
        n = seen.get(code, 0)
        seen[code] = n + 1
        label = code if n == 0 else f"{code}#{n}"
        items.append(LabelledItem(label, attrs, 0 if cls == class_zero_value else 1))
    return items


# --- synthetic surrogate ----------------------------------------------------

def synthetic_items(seed: int = 97, n_class0: int = 240,
                    n_class1: int = 460) -> list[LabelledItem]:
    """Deterministic Wisconsin-like surrogate dataset.

    Attribute 0 (clump thickness) separates the classes most strongly
    and tops the std-dev ranking; attributes 2, 5 and 7 (cell shape,
    bare nuclei, normal nucleoli) come next and form the danger trio.
    Values live on the 1-10 integer scale divided by 10.
    """
    rng = random.Random(seed)
    # (class0 mean, class1 mean, within-class std) per attribute
    profile = [
        (0.20, 0.85, 0.08),  # clump thickness: widest spread
        (0.30, 0.45, 0.08),
        (0.20, 0.65, 0.10),  # cell shape
        (0.30, 0.40, 0.08),
        (0.35, 0.45, 0.07),
        (0.20, 0.65, 0.10),  # bare nuclei
        (0.30, 0.42, 0.08),
        (0.20, 0.65, 0.10),  # normal nucleoli
        (0.15, 0.25, 0.06),
    ]

    def draw(cls: int) -> tuple[float, ...]:
        attrs = []
        for mu0, mu1, sd in profile:
            v = rng.gauss(mu1 if cls else mu0, sd)
            grid = min(10, max(1, round(v * 10)))
            attrs.append(grid / 10.0)
        return tuple(attrs)

    items = [LabelledItem(f"bc-{i:04d}", draw(0), 0) for i in range(n_class0)]
    items += [LabelledItem(f"bc-{n_class0 + i:04d}", draw(1), 1)
              for i in range(n_class1)]
    return items
