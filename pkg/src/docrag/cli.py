"""Command-line interface: serve the API, evaluate an answer endpoint,
report dataset category distributions, compare saved reports.

Report-emitting commands write delimited CSV output and render a PNG
figure next to it.
"""

import json
import logging
from pathlib import Path

import click
import requests
import yaml

from . import evalkit, report as reporting
from .corpus import category_distribution, parse_discussion_jsonl
from .evalkit import LexicalJudge, MetricsReport, load_qa_jsonl, run_eval
from .llm import ProviderConfig, build_provider
from .service import build_engine, load_config, serve as serve_app

logger = logging.getLogger(__name__)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Service config YAML.")
def serve(config_path):
    """Build indexes and serve the HTTP API."""
    serve_app(load_config(config_path))


@main.command("build-index")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def build_index(config_path):
    """Build knowledge-base snapshots without serving."""
    config = load_config(config_path)
    engine, manifest = build_engine(config)
    names = engine.registry.names()
    click.echo(f"corpus {manifest.version_tag}: built {len(names)} knowledge base(s)")
    for name in names:
        click.echo(f"  {name}: {len(engine.registry.get(name).kb)} chunks")


def _make_endpoint(endpoint: str):
    """Answer callable from an endpoint spec: a service base URL or
    `builtin:<config.yaml>` for an in-process engine."""
    if endpoint.startswith("builtin:"):
        config = load_config(endpoint.split(":", 1)[1])
        engine, _ = build_engine(config)

        def ask(question: str) -> str:
            thread = engine.create_thread("eval")
            return engine.answer(thread.thread_id, question).answer

        return ask
    if endpoint.startswith("http://") or endpoint.startswith("https://"):
        base = endpoint.rstrip("/")

        def ask(question: str) -> str:
            tid = requests.post(f"{base}/threads", json={"title": "eval"}, timeout=120).json()["thread_id"]
            r = requests.post(f"{base}/threads/{tid}/messages", json={"question": question}, timeout=120)
            r.raise_for_status()
            return r.json()["answer"]

        return ask
    raise click.BadParameter(f"endpoint must be a URL or builtin:<config>, got {endpoint!r}")


def _make_judge(judge_spec: str):
    if judge_spec == "lexical":
        return LexicalJudge()
    spec_path = Path(judge_spec)
    if spec_path.exists():
        spec = yaml.safe_load(spec_path.read_text(encoding="utf-8"))
        return build_provider(ProviderConfig(
            name=spec.get("name", "judge"),
            kind=spec["kind"],
            endpoint=spec.get("endpoint", ""),
            model=spec.get("model", ""),
            credential_env=spec.get("credential_env", ""),
        ))
    raise click.BadParameter(f"judge must be 'lexical' or a provider YAML, got {judge_spec!r}")


@main.command("eval")
@click.option("--dataset", required=True, type=click.Path(exists=True), help="QA JSONL file.")
@click.option("--endpoint", required=True, help="Service URL or builtin:<config.yaml>.")
@click.option("--judge", "judge_spec", default="lexical", show_default=True,
              help="'lexical' or a provider spec YAML.")
@click.option("--runs", default=5, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--field-map", default=None, help='JSON field mapping, e.g. {"question":"prompt"}.')
def eval_command(dataset, endpoint, judge_spec, runs, out_dir, field_map):
    """Run the judge-based evaluation protocol against an answer endpoint."""
    mapping = json.loads(field_map) if field_map else None
    qa_pairs = load_qa_jsonl(dataset, field_map=mapping)
    answer_fn = _make_endpoint(endpoint)
    judge_llm = _make_judge(judge_spec)
    rep, _records = run_eval(qa_pairs, answer_fn, judge_llm, runs=runs, out_dir=out_dir)
    out = Path(out_dir)
    reporting.write_metrics_csv({"run": rep}, out / "report.csv")
    reporting.render_metrics_figure({"run": rep}, out / "metrics.png")
    click.echo(evalkit.format_report(rep))
    click.echo(f"wrote verdicts.jsonl, report.{{json,txt,csv}} and metrics.png to {out}")


@main.command()
@click.option("--jsonl", "jsonl_path", required=True, type=click.Path(exists=True),
              help="Tagged discussion JSONL file.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def distribution(jsonl_path, out_dir):
    """Category distribution of tagged issues/discussions."""
    records = parse_discussion_jsonl(jsonl_path)
    table = category_distribution(records)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reporting.write_distribution_csv(table, out / "distribution.csv")
    (out / "distribution.txt").write_text(reporting.format_distribution(table), encoding="utf-8")
    reporting.render_distribution_figure(table, out / "distribution.png")
    click.echo(reporting.format_distribution(table))
    click.echo(f"wrote distribution.{{csv,txt,png}} to {out}")


@main.command()
@click.argument("reports", nargs=-1, required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def compare(reports, out_dir):
    """Compare named eval reports: NAME=report.json pairs."""
    named: dict[str, MetricsReport] = {}
    for item in reports:
        if "=" not in item:
            raise click.BadParameter(f"expected NAME=report.json, got {item!r}")
        name, path = item.split("=", 1)
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        named[name] = MetricsReport(
            counts=data["counts"],
            accuracy=data["accuracy"],
            precision=data["precision"],
            recall=data["recall"],
            f1=data["f1"],
            mean_llm_score=data["mean_llm_score"],
            runs=data.get("runs", 1),
            mean_latency=data.get("mean_latency", 0.0),
        )
    rows, text = evalkit.compare(named)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.json").write_text(json.dumps(rows, indent=2), encoding="utf-8")
    (out / "comparison.txt").write_text(text, encoding="utf-8")
    reporting.write_metrics_csv(named, out / "comparison.csv")
    reporting.render_metrics_figure(named, out / "comparison.png")
    click.echo(text)


if __name__ == "__main__":
    main()
