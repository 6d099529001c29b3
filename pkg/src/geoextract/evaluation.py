"""Accuracy and fairness metrics for tagging and geocoding.

Span matching comes in two strictnesses: exact (identical byte boundaries)
and partial (one-to-one pairing of predictions with golds they overlap, so
a single prediction can never satisfy two gold mentions).  Error rates are
micro-averaged within each geographic or socioeconomic group, and group
disparity is summarized as the gap between the highest and lowest rate.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .corpus import GoldGeocode, SelectionRecord, TagSpan
from .gazetteer import GazetteerIndex, haversine_km

KM161 = 161.0
UNKNOWN_GROUP = "Unknown"
# groups outside the reported four stay out of disparity gaps
EXCLUDED_GROUPS = frozenset({UNKNOWN_GROUP, "Other"})


class RateMetric(Enum):
    FNR = "fnr"
    FDR = "fdr"
    ERROR_161 = "error_161km"


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class SegmentedRates:
    metric: RateMetric
    rates: dict[str, float]
    delta: float

    @staticmethod
    def from_rates(metric: RateMetric, rates: dict[str, float]) -> "SegmentedRates":
        considered = [r for g, r in rates.items() if g not in EXCLUDED_GROUPS]
        delta = (max(considered) - min(considered)) if considered else 0.0
        return SegmentedRates(metric=metric, rates=dict(rates), delta=delta)


@dataclass(frozen=True)
class GeoAccuracy:
    exact_precision: float
    exact_recall: float
    km161_precision: float
    km161_recall: float
    country_precision: float
    country_recall: float

    def to_dict(self) -> dict:
        return {
            "exact": {"precision": self.exact_precision, "recall": self.exact_recall},
            "km161": {"precision": self.km161_precision, "recall": self.km161_recall},
            "country": {"precision": self.country_precision, "recall": self.country_recall},
        }


# ── span matching ────────────────────────────────────────────────────────

def _check_disjoint(spans: Sequence[TagSpan], label: str) -> None:
    for a, b in zip(spans, spans[1:]):
        if a.overlaps(b):
            raise ValueError(f"{label} spans overlap: {a} / {b}")


def match_exact(pred_spans: Sequence[TagSpan], gold_spans: Sequence[TagSpan]) -> MatchCounts:
    """Strict boundary matching: a prediction scores only if some gold span
    has identical (start, end)."""
    preds = sorted(pred_spans, key=lambda s: (s.start, s.end))
    golds = sorted(gold_spans, key=lambda s: (s.start, s.end))
    _check_disjoint(preds, "pred")
    _check_disjoint(golds, "gold")
    pred_keys = {(s.start, s.end) for s in preds}
    gold_keys = {(s.start, s.end) for s in golds}
    tp = len(pred_keys & gold_keys)
    return MatchCounts(tp=tp, fp=len(pred_keys) - tp, fn=len(gold_keys) - tp)


def partial_pairs(
    pred_spans: Sequence[TagSpan], gold_spans: Sequence[TagSpan]
) -> list[tuple[int, int]]:
    """Maximum one-to-one pairing of overlapping (pred, gold) indices.

    Both lists must be internally non-overlapping; the two-pointer sweep is
    then a maximum matching.  Each gold needs its own overlapping
    prediction, so one wide prediction cannot cover two gold mentions.
    """
    preds = sorted(range(len(pred_spans)), key=lambda i: (pred_spans[i].start, pred_spans[i].end))
    golds = sorted(range(len(gold_spans)), key=lambda j: (gold_spans[j].start, gold_spans[j].end))
    _check_disjoint([pred_spans[i] for i in preds], "pred")
    _check_disjoint([gold_spans[j] for j in golds], "gold")
    pairs: list[tuple[int, int]] = []
    i = j = 0
    while i < len(preds) and j < len(golds):
        p = pred_spans[preds[i]]
        g = gold_spans[golds[j]]
        if p.overlaps(g):
            pairs.append((preds[i], golds[j]))
            i += 1
            j += 1
        elif p.end <= g.start:
            i += 1
        else:
            j += 1
    return pairs


def match_partial(pred_spans: Sequence[TagSpan], gold_spans: Sequence[TagSpan]) -> MatchCounts:
    tp = len(partial_pairs(pred_spans, gold_spans))
    return MatchCounts(tp=tp, fp=len(pred_spans) - tp, fn=len(gold_spans) - tp)


def prf(counts: MatchCounts) -> tuple[float, float, float]:
    """(precision, recall, f1); empty denominators score 1.0 by convention."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 1.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def add_counts(counts: Iterable[MatchCounts]) -> MatchCounts:
    tp = fp = fn = 0
    for c in counts:
        tp += c.tp
        fp += c.fp
        fn += c.fn
    return MatchCounts(tp=tp, fp=fp, fn=fn)


# ── segmented error rates ────────────────────────────────────────────────

def segment_rates(
    pred_spans_by_doc: dict[str, list[TagSpan]],
    gold_spans_by_doc: dict[str, list[TagSpan]],
    segment_of_gold: Callable[[str, TagSpan], str],
    segment_of_pred: Callable[[str, TagSpan], str],
    metric: RateMetric,
) -> SegmentedRates:
    """Per-group FNR or FDR under partial matching, micro-averaged.

    FNR groups by the gold mention's segment; FDR groups by the
    prediction's.  Groups with an empty denominator stay out of the rates
    map (and hence out of the gap).
    """
    if metric not in (RateMetric.FNR, RateMetric.FDR):
        raise ValueError("segment_rates computes FNR or FDR")
    hits: dict[str, int] = defaultdict(int)
    misses: dict[str, int] = defaultdict(int)

    doc_ids = set(pred_spans_by_doc) | set(gold_spans_by_doc)
    for doc_id in sorted(doc_ids):
        preds = pred_spans_by_doc.get(doc_id, [])
        golds = gold_spans_by_doc.get(doc_id, [])
        pairs = partial_pairs(preds, golds)
        if metric is RateMetric.FNR:
            matched = {j for _, j in pairs}
            for j, g in enumerate(golds):
                group = segment_of_gold(doc_id, g)
                if j in matched:
                    hits[group] += 1
                else:
                    misses[group] += 1
        else:
            matched = {i for i, _ in pairs}
            for i, p in enumerate(preds):
                group = segment_of_pred(doc_id, p)
                if i in matched:
                    hits[group] += 1
                else:
                    misses[group] += 1

    rates = {}
    for group in set(hits) | set(misses):
        denom = hits[group] + misses[group]
        if denom:
            rates[group] = misses[group] / denom
    return SegmentedRates.from_rates(metric, rates)


# ── geocoding accuracy ───────────────────────────────────────────────────

def _ratio(num: int, denom: int) -> float:
    return num / denom if denom else 1.0


def gold_anchor_id(gold: GoldGeocode) -> int:
    """Deterministic representative id of a gold id set."""
    return min(gold.geoname_ids)


@dataclass(frozen=True)
class GeocodeOutcome:
    """Per-item correctness used by accuracy, fairness and the error map."""

    pred_flags: list[tuple[SelectionRecord, bool, bool, bool]]  # exact/km161/country
    gold_flags: list[tuple[str, GoldGeocode, bool, bool, bool, float | None]]


def evaluate_geocodes(
    pred_selections: Sequence[SelectionRecord],
    gold_by_doc: dict[str, list[GoldGeocode]],
    index: GazetteerIndex,
) -> GeocodeOutcome:
    """Judge every prediction and every gold toponym.

    Predictions pair with gold toponyms by document and exact span; a
    prediction without a gold counterpart is wrong at every level, and the
    -1 sentinel never scores.  A gold is satisfied at a level when any of
    its paired predictions is correct at that level; its error distance is
    the smallest one among resolvable paired predictions.
    """
    gold_lookup: dict[tuple[str, int, int], GoldGeocode] = {}
    for doc_id, golds in gold_by_doc.items():
        for g in golds:
            gold_lookup[(doc_id, g.span.start, g.span.end)] = g

    def judge(sel: SelectionRecord, gold: GoldGeocode | None):
        if gold is None or sel.geonameid <= 0:
            return False, False, False, None
        entry = index.get(sel.geonameid)
        if entry is None:
            return False, False, False, None
        exact = sel.geonameid in gold.geoname_ids
        distance = min(
            haversine_km(entry.lat, entry.lon, ge.lat, ge.lon)
            for ge in (index.get(g) for g in gold.geoname_ids)
            if ge is not None
        )
        km161 = distance <= KM161
        gold_countries = {
            ge.country_code
            for ge in (index.get(g) for g in gold.geoname_ids)
            if ge is not None
        }
        country = entry.country_code in gold_countries
        return exact, km161, country, distance

    pred_flags = []
    best_for_gold: dict[tuple[str, int, int], list] = defaultdict(list)
    for sel in pred_selections:
        key = (sel.doc_id, sel.span.start, sel.span.end)
        gold = gold_lookup.get(key)
        exact, km161, country, distance = judge(sel, gold)
        pred_flags.append((sel, exact, km161, country))
        if gold is not None:
            best_for_gold[key].append((exact, km161, country, distance))

    gold_flags = []
    for doc_id, golds in sorted(gold_by_doc.items()):
        for g in golds:
            outcomes = best_for_gold.get((doc_id, g.span.start, g.span.end), [])
            exact = any(o[0] for o in outcomes)
            km161 = any(o[1] for o in outcomes)
            country = any(o[2] for o in outcomes)
            distances = [o[3] for o in outcomes if o[3] is not None]
            gold_flags.append(
                (doc_id, g, exact, km161, country, min(distances) if distances else None)
            )
    return GeocodeOutcome(pred_flags=pred_flags, gold_flags=gold_flags)


def geocode_accuracy(
    pred_selections: Sequence[SelectionRecord],
    gold_by_doc: dict[str, list[GoldGeocode]],
    index: GazetteerIndex,
    segment_of_gold: Callable[[str, GoldGeocode], str] | None = None,
) -> tuple[GeoAccuracy, SegmentedRates | None]:
    """Precision/recall at exact-id, 161 km and country level, plus the
    per-segment classification error at 161 km when a segmenter is given."""
    outcome = evaluate_geocodes(pred_selections, gold_by_doc, index)

    n_pred = len(outcome.pred_flags)
    n_gold = len(outcome.gold_flags)
    accuracy = GeoAccuracy(
        exact_precision=_ratio(sum(1 for f in outcome.pred_flags if f[1]), n_pred),
        exact_recall=_ratio(sum(1 for f in outcome.gold_flags if f[2]), n_gold),
        km161_precision=_ratio(sum(1 for f in outcome.pred_flags if f[2]), n_pred),
        km161_recall=_ratio(sum(1 for f in outcome.gold_flags if f[3]), n_gold),
        country_precision=_ratio(sum(1 for f in outcome.pred_flags if f[3]), n_pred),
        country_recall=_ratio(sum(1 for f in outcome.gold_flags if f[4]), n_gold),
    )

    segmented = None
    if segment_of_gold is not None:
        correct: dict[str, int] = defaultdict(int)
        total: dict[str, int] = defaultdict(int)
        for doc_id, gold, _, km161, _, _ in outcome.gold_flags:
            group = segment_of_gold(doc_id, gold)
            total[group] += 1
            if km161:
                correct[group] += 1
        rates = {g: 1.0 - correct[g] / total[g] for g in total if total[g]}
        segmented = SegmentedRates.from_rates(RateMetric.ERROR_161, rates)
    return accuracy, segmented


def export_error_map(
    pred_selections: Sequence[SelectionRecord],
    gold_by_doc: dict[str, list[GoldGeocode]],
    index: GazetteerIndex,
    path: str | Path,
) -> int:
    """Plot-ready CSV: one row per gold toponym at its gold coordinates,
    carrying the prediction's error distance (empty when unresolved)."""
    outcome = evaluate_geocodes(pred_selections, gold_by_doc, index)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "surface", "gold_lat", "gold_lon", "error_km"])
        for doc_id, gold, _, _, _, distance in outcome.gold_flags:
            anchor = index.get(gold_anchor_id(gold))
            lat = f"{anchor.lat:.5f}" if anchor else ""
            lon = f"{anchor.lon:.5f}" if anchor else ""
            err = f"{distance:.3f}" if distance is not None else ""
            writer.writerow([doc_id, gold.span.surface, lat, lon, err])
            count += 1
    return count
