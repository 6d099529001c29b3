"""Command-line entry point.

Every pipeline stage is a subcommand and every artifact is a file:

    geoextract ingest   --geonames allCountries.txt --out index.jsonl.gz
    geoextract extract  --docs docs.jsonl --format json --out spans.jsonl
    geoextract geocode  --docs docs.jsonl --spans spans.jsonl --index ... --out selections.jsonl
    geoextract eval     --pred spans.jsonl --gold gold.jsonl --out report.json
    geoextract serve    --port 8080 --data-dir sessions/

Configuration precedence is flags > environment > config file; --record and
--replay switch the gateway between capturing live transcripts and
deterministic offline replay.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus, gazetteer
from .agent import Budgets
from .gateway import (
    Gateway,
    HttpTransport,
    ModelConfig,
    RecordingTransport,
    ScriptedTransport,
    load_transcript,
    record_transcript,
)
from .pipeline import extract_corpus, geocode_corpus
from .prompts import OutputFormat
from .report import build_report, render_figures, write_error_map, write_report

log = logging.getLogger(__name__)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _model_config(args) -> ModelConfig:
    file_cfg = _load_config_file(getattr(args, "config", None))
    cfg = ModelConfig.from_env()
    for key in ("endpoint_url", "model_id", "max_retries", "max_in_flight"):
        if key in file_cfg and not getattr(cfg, key, None):
            setattr(cfg, key, file_cfg[key])
    if getattr(args, "endpoint", None):
        cfg.endpoint_url = args.endpoint
    if getattr(args, "model", None):
        cfg.model_id = args.model
    return cfg


def _gateway(args) -> tuple[Gateway, RecordingTransport | None]:
    cfg = _model_config(args)
    recorder = None
    if getattr(args, "replay", None):
        transport = ScriptedTransport(load_transcript(args.replay))
    else:
        transport = HttpTransport()
        if getattr(args, "record", None):
            transport = recorder = RecordingTransport(transport)
    return Gateway(cfg, transport), recorder


def _save_run_snapshot(args, report: dict) -> None:
    run_dir = getattr(args, "run_dir", None)
    if not run_dir:
        return
    path = Path(run_dir)
    path.mkdir(parents=True, exist_ok=True)
    snapshot = {k: v for k, v in vars(args).items() if k != "func"}
    (path / "config.json").write_text(
        json.dumps(snapshot, indent=2, default=str) + "\n", encoding="utf-8"
    )
    (path / "run_report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )


# ── subcommands ──────────────────────────────────────────────────────────

def cmd_ingest(args) -> int:
    index = gazetteer.ingest_geonames(args.geonames)
    gazetteer.save_index(index, args.out)
    print(f"ingested {len(index)} entries "
          f"({index.skipped_rows} rows skipped) -> {args.out}")
    return 0


def cmd_extract(args) -> int:
    docs = corpus.load_documents(args.docs)
    gateway, recorder = _gateway(args)
    spans_by_doc, report = extract_corpus(
        docs,
        OutputFormat(args.format),
        gateway,
        min_len=args.min_chunk,
        max_len=args.max_chunk,
        jobs=args.jobs,
    )
    corpus.save_spans(args.out, spans_by_doc)
    if recorder is not None:
        record_transcript(recorder.exchanges, args.record)
    _save_run_snapshot(args, report.to_dict())
    print(f"extracted {report.tags} tags from {report.documents} documents "
          f"({report.chunks} chunks) -> {args.out}")
    if report.failures:
        print(f"{len(report.failures)} chunk failures; see run report", file=sys.stderr)
        return 1
    return 0


def cmd_geocode(args) -> int:
    docs = corpus.load_documents(args.docs)
    docs_by_id = {d.id: d for d in docs}
    spans_by_doc = corpus.load_spans(args.spans, docs_by_id)
    index = gazetteer.load_index(args.index)
    gateway, recorder = _gateway(args)
    budgets = Budgets(action_budget=args.budget,
                      searches_per_place=args.searches_per_place)
    run = geocode_corpus(docs, spans_by_doc, gateway, index,
                         budgets=budgets, jobs=args.jobs)
    corpus.save_selections(args.out, run.selections)
    if recorder is not None:
        record_transcript(recorder.exchanges, args.record)
    if args.transcripts:
        tdir = Path(args.transcripts)
        tdir.mkdir(parents=True, exist_ok=True)
        for i, (doc_id, span, session) in enumerate(run.sessions):
            payload = {
                "doc_id": doc_id,
                "span": [span.start, span.end],
                "surface": span.surface,
                "finished": session.finished,
                "finish_reason": session.finish_reason,
                "failed": session.failed,
                "transcript": session.transcript,
            }
            (tdir / f"session_{i:05d}.json").write_text(
                json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8"
            )
    _save_run_snapshot(args, run.report.to_dict())
    print(f"geocoded {run.report.tags} tags -> {len(run.selections)} selections "
          f"-> {args.out}")
    if run.report.failures:
        print(f"{len(run.report.failures)} failed sessions", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args) -> int:
    documents = None
    if args.docs:
        documents = {d.id: d for d in corpus.load_documents(args.docs)}
    pred = corpus.load_spans(args.pred, documents)
    gold = corpus.load_spans(args.gold, documents)

    pred_geo = gold_geo = index = None
    continent_table = income_table = None
    if args.pred_geo or args.gold_geo:
        if not (args.pred_geo and args.gold_geo and args.index):
            print("--pred-geo, --gold-geo and --index must be given together",
                  file=sys.stderr)
            return 2
        pred_geo = corpus.load_selections(args.pred_geo)
        gold_geo = corpus.load_gold_geocodes(args.gold_geo)
        index = gazetteer.load_index(args.index)
        continent_table = gazetteer.load_continent_table(args.continents)
        if args.income:
            income_table = gazetteer.load_income_table(args.income)

    report = build_report(
        pred, gold,
        pred_selections=pred_geo,
        gold_geocodes=gold_geo,
        index=index,
        continent_of_country=continent_table,
        income_of_country=income_table,
    )
    write_report(report, args.out)
    print(f"report -> {args.out}")

    error_map_path = None
    if pred_geo is not None and index is not None and gold_geo is not None:
        error_map_path = args.error_map or str(Path(args.out).with_name("error_map.csv"))
        rows = write_error_map(pred_geo, gold_geo, index, error_map_path)
        print(f"error map ({rows} rows) -> {error_map_path}")
    if args.figures:
        written = render_figures(report, args.figures, error_map_path)
        for p in written:
            print(f"figure -> {p}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ── parser ───────────────────────────────────────────────────────────────

def _add_gateway_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--endpoint", help="chat-completions endpoint URL")
    p.add_argument("--model", help="model id sent to the endpoint")
    p.add_argument("--config", help="JSON config file (lowest precedence)")
    p.add_argument("--record", metavar="TRANSCRIPT",
                   help="capture exchanges to a transcript file")
    p.add_argument("--replay", metavar="TRANSCRIPT",
                   help="replay a recorded transcript instead of calling out")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel documents (default 1)")
    p.add_argument("--run-dir", help="directory for config/run-report snapshots")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoextract",
        description="LLM toponym extraction, geocoding and evaluation pipeline",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a gazetteer index from a GeoNames dump")
    p.add_argument("--geonames", required=True, help="GeoNames dump TSV")
    p.add_argument("--out", required=True, help="index file (.jsonl or .jsonl.gz)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="tag literal toponyms in documents")
    p.add_argument("--docs", required=True, help="documents.jsonl")
    p.add_argument("--format", choices=["json", "markdown"], default="json")
    p.add_argument("--min-chunk", type=int, default=None)
    p.add_argument("--max-chunk", type=int, default=None)
    p.add_argument("--out", required=True, help="spans.jsonl to write")
    _add_gateway_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("geocode", help="resolve extracted tags with the agent")
    p.add_argument("--docs", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--out", required=True, help="selections.jsonl to write")
    p.add_argument("--budget", type=int, default=15, help="actions per session")
    p.add_argument("--searches-per-place", type=int, default=2)
    p.add_argument("--transcripts", help="directory for per-session transcripts")
    _add_gateway_flags(p)
    p.set_defaults(func=cmd_geocode)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--pred", required=True, help="predicted spans.jsonl")
    p.add_argument("--gold", required=True, help="gold spans.jsonl")
    p.add_argument("--docs", help="documents.jsonl (enables span verification)")
    p.add_argument("--pred-geo", help="predicted selections.jsonl")
    p.add_argument("--gold-geo", help="gold_geocodes.jsonl")
    p.add_argument("--index", help="gazetteer index file")
    p.add_argument("--continents", help="country->continent CSV (bundled default)")
    p.add_argument("--income", help="country->income-level CSV")
    p.add_argument("--out", required=True, help="report.json to write")
    p.add_argument("--error-map", help="error map CSV path (default: next to report)")
    p.add_argument("--figures", help="directory for rendered figures")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the annotation reconciliation service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:  # stage errors become non-zero exits
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
