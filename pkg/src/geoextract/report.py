"""Metric report assembly, JSON export and optional figure rendering.

The evaluator itself only computes numbers; this module arranges them into
the report.json tree, and can render quick-look figures (per-group rate
bars, an error-distance histogram) next to the delimited outputs when the
caller asks for them.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Callable

from .corpus import GoldGeocode, SelectionRecord, TagSpan
from .evaluation import (
    RateMetric,
    SegmentedRates,
    add_counts,
    export_error_map,
    geocode_accuracy,
    gold_anchor_id,
    match_exact,
    match_partial,
    prf,
    segment_rates,
)
from .gazetteer import GazetteerIndex


def _prf_block(counts) -> dict:
    precision, recall, f1 = prf(counts)
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "tp": counts.tp,
        "fp": counts.fp,
        "fn": counts.fn,
    }


def _rates_block(segmented: SegmentedRates) -> dict:
    return {"rates": dict(sorted(segmented.rates.items())), "delta": segmented.delta}


def make_segmenters(
    gold_by_doc: dict[str, list[GoldGeocode]],
    pred_selections: list[SelectionRecord],
    index: GazetteerIndex,
    group_of_country: dict[str, str],
) -> tuple[Callable[[str, TagSpan], str], Callable[[str, TagSpan], str]]:
    """Group lookups for gold mentions and predictions.

    A gold mention takes the group of its first gold geoname id's country; a
    prediction takes the group of its selected geocode when one resolves,
    and Unknown otherwise.
    """

    def country_group(country_code: str | None) -> str:
        if not country_code:
            return "Unknown"
        return group_of_country.get(country_code.upper(), "Unknown")

    gold_group: dict[tuple[str, int, int], str] = {}
    for doc_id, golds in gold_by_doc.items():
        for g in golds:
            entry = index.get(gold_anchor_id(g))
            gold_group[(doc_id, g.span.start, g.span.end)] = country_group(
                entry.country_code if entry else None
            )

    pred_group: dict[tuple[str, int, int], str] = {}
    for sel in pred_selections:
        key = (sel.doc_id, sel.span.start, sel.span.end)
        if key in pred_group and pred_group[key] != "Unknown":
            continue
        entry = index.get(sel.geonameid) if sel.geonameid > 0 else None
        pred_group[key] = country_group(entry.country_code if entry else None)

    def segment_of_gold(doc_id: str, span: TagSpan) -> str:
        return gold_group.get((doc_id, span.start, span.end), "Unknown")

    def segment_of_pred(doc_id: str, span: TagSpan) -> str:
        return pred_group.get((doc_id, span.start, span.end), "Unknown")

    return segment_of_gold, segment_of_pred


def build_report(
    pred_spans: dict[str, list[TagSpan]],
    gold_spans: dict[str, list[TagSpan]],
    pred_selections: list[SelectionRecord] | None = None,
    gold_geocodes: dict[str, list[GoldGeocode]] | None = None,
    index: GazetteerIndex | None = None,
    continent_of_country: dict[str, str] | None = None,
    income_of_country: dict[str, str] | None = None,
) -> dict:
    """The full metric tree: NER accuracy always, fairness and geocoding
    blocks when geocode inputs are supplied."""
    doc_ids = sorted(set(pred_spans) | set(gold_spans))
    exact = add_counts(
        match_exact(pred_spans.get(d, []), gold_spans.get(d, [])) for d in doc_ids
    )
    partial = add_counts(
        match_partial(pred_spans.get(d, []), gold_spans.get(d, [])) for d in doc_ids
    )
    report: dict = {
        "ner": {"exact": _prf_block(exact), "partial": _prf_block(partial)},
    }

    has_geo = gold_geocodes is not None and index is not None
    if has_geo:
        fairness: dict = {}
        tables = []
        if continent_of_country is not None:
            tables.append(("continent", continent_of_country))
        if income_of_country is not None:
            tables.append(("income", income_of_country))
        for name, table in tables:
            seg_gold, seg_pred = make_segmenters(
                gold_geocodes, pred_selections or [], index, table
            )
            fairness[f"fnr_{name}"] = _rates_block(segment_rates(
                pred_spans, gold_spans, seg_gold, seg_pred, RateMetric.FNR
            ))
            fairness[f"fdr_{name}"] = _rates_block(segment_rates(
                pred_spans, gold_spans, seg_gold, seg_pred, RateMetric.FDR
            ))
        if fairness:
            report["fairness"] = fairness

        if pred_selections is not None:
            accuracy, _ = geocode_accuracy(pred_selections, gold_geocodes, index)
            report["geocoding"] = accuracy.to_dict()
            error_block: dict = {}
            for name, table in tables:
                def seg(doc_id: str, gold: GoldGeocode, table=table) -> str:
                    entry = index.get(gold_anchor_id(gold))
                    if entry is None:
                        return "Unknown"
                    return table.get(entry.country_code.upper(), "Unknown")

                _, segmented = geocode_accuracy(
                    pred_selections, gold_geocodes, index, segment_of_gold=seg
                )
                if segmented is not None:
                    error_block[name] = _rates_block(segmented)
            if error_block:
                report["error_161km"] = error_block
    return report


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def write_error_map(
    pred_selections: list[SelectionRecord],
    gold_geocodes: dict[str, list[GoldGeocode]],
    index: GazetteerIndex,
    path: str | Path,
) -> int:
    return export_error_map(pred_selections, gold_geocodes, index, path)


# ── figures ──────────────────────────────────────────────────────────────

def render_figures(report: dict, out_dir: str | Path,
                   error_map_path: str | Path | None = None) -> list[Path]:
    """Render quick-look PNGs for the report; returns the files written."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    bars = []
    for section in ("fairness", "error_161km"):
        for key, block in report.get(section, {}).items():
            if isinstance(block, dict) and "rates" in block:
                bars.append((f"{section}.{key}" if section != "fairness" else key, block))
    if bars:
        fig, axes = plt.subplots(1, len(bars), figsize=(4 * len(bars), 3.2),
                                 squeeze=False)
        for ax, (title, block) in zip(axes[0], bars):
            groups = list(block["rates"])
            ax.bar(range(len(groups)), [block["rates"][g] for g in groups],
                   color="#31688e")
            ax.set_xticks(range(len(groups)))
            ax.set_xticklabels(groups, rotation=30, ha="right", fontsize=7)
            ax.set_ylim(0, 1)
            ax.set_title(f"{title} (gap {block['delta']:.2f})", fontsize=9)
        fig.tight_layout()
        path = out / "group_rates.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if error_map_path is not None and Path(error_map_path).exists():
        distances = []
        with open(error_map_path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                if row.get("error_km"):
                    distances.append(float(row["error_km"]))
        if distances:
            fig, ax = plt.subplots(figsize=(5, 3.2))
            ax.hist(distances, bins=30, color="#35b779")
            ax.axvline(161.0, color="#d62728", linestyle="--", linewidth=1)
            ax.set_xlabel("error (km)")
            ax.set_ylabel("toponyms")
            ax.set_title("geocoding error distances")
            fig.tight_layout()
            path = out / "error_distances.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)
    return written
