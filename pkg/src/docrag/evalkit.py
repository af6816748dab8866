"""LLM-judge evaluation harness: per-response four-way classification plus
a [0,1] quality score, aggregated into accuracy/precision/recall/F1 with
multi-run averaging.

Metrics are pooled over all runs by default; a per-run macro breakdown is
emitted alongside so both readings are available.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import llm, prompts
from .index import tokenize

logger = logging.getLogger(__name__)

VERDICT_CATEGORIES = ("TP", "TN", "FP", "FN")


class EvalError(Exception):
    pass


@dataclass(frozen=True)
class QaPair:
    id: str
    question: str
    ground_truth: str
    dataset: str = "default"

    def __post_init__(self):
        if not (self.id and self.question and self.ground_truth):
            raise ValueError("QaPair requires id, question and ground_truth")


@dataclass
class JudgeVerdict:
    category: str
    llm_score: float
    justification: str = ""

    def __post_init__(self):
        if self.category not in VERDICT_CATEGORIES:
            raise ValueError(f"category must be one of {VERDICT_CATEGORIES}")
        if not 0.0 <= self.llm_score <= 1.0:
            raise ValueError("llm_score must be in [0, 1]")


@dataclass
class MetricsReport:
    counts: dict[str, int]
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    mean_llm_score: float | None
    runs: int = 1
    mean_latency: float = 0.0

    METRIC_FIELDS = ("accuracy", "precision", "recall", "f1", "mean_llm_score")

    def as_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mean_llm_score": self.mean_llm_score,
            "runs": self.runs,
            "mean_latency": self.mean_latency,
        }


def f1_from_precision_recall(precision: float, recall: float) -> float | None:
    """Harmonic mean, on the same percentage scale as its inputs."""
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2.0 * precision * recall / (precision + recall)


def build_judge_prompt(qa: QaPair, response: str) -> str:
    """Pure function of (qa, response); the rubric lives in the system
    prompt asset, this is the user message."""
    return (
        f"Question:\n{qa.question}\n\n"
        f"Ground truth answer:\n{qa.ground_truth}\n\n"
        f"Model response:\n{response}"
    )


def _parse_verdict(reply: str) -> JudgeVerdict:
    line = reply.strip().splitlines()[0] if reply.strip() else ""
    parts = [p.strip() for p in line.split("|")]
    if len(parts) < 2:
        raise ValueError(f"unparseable judge reply: {reply!r}")
    category = parts[0].upper()
    score = float(parts[1])
    justification = parts[2] if len(parts) > 2 else ""
    return JudgeVerdict(category=category, llm_score=score, justification=justification)


def judge(qa: QaPair, response: str, judge_llm, retries: int = 2) -> JudgeVerdict:
    """Classify one response against its ground truth via the judge prompt.

    An unparseable or out-of-enum reply after retries is a hard error: the
    run is marked invalid rather than guessed.
    """
    system = prompts.load("judge")
    last_exc: Exception | None = None
    for _ in range(retries + 1):
        resp = llm.complete(judge_llm, llm.user_request(system, build_judge_prompt(qa, response)))
        try:
            return _parse_verdict(resp.content)
        except ValueError as exc:
            last_exc = exc
    raise EvalError(f"judge produced no valid verdict for {qa.id!r}: {last_exc}")


def compute_metrics(
    verdicts: list[JudgeVerdict],
    latencies: list[float] | None = None,
    runs: int = 1,
) -> MetricsReport:
    """Aggregate verdicts into percentage metrics.

    accuracy = (TP+TN)/total, precision = TP/(TP+FP), recall = TP/(TP+FN),
    F1 = harmonic mean. A metric whose denominator is zero is reported as
    None (absent), never silently as 0.
    """
    if not verdicts:
        raise EvalError("no verdicts to aggregate")
    counts = {c: 0 for c in VERDICT_CATEGORIES}
    for v in verdicts:
        counts[v.category] += 1
    total = len(verdicts)
    tp, tn, fp, fn = counts["TP"], counts["TN"], counts["FP"], counts["FN"]
    accuracy = 100.0 * (tp + tn) / total
    precision = 100.0 * tp / (tp + fp) if tp + fp else None
    recall = 100.0 * tp / (tp + fn) if tp + fn else None
    f1 = (
        f1_from_precision_recall(precision, recall)
        if precision is not None and recall is not None
        else None
    )
    mean_score = 100.0 * sum(v.llm_score for v in verdicts) / total
    mean_latency = sum(latencies) / len(latencies) if latencies else 0.0
    return MetricsReport(
        counts=counts,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        mean_llm_score=mean_score,
        runs=runs,
        mean_latency=mean_latency,
    )


@dataclass
class EvalRecord:
    run: int
    qa_id: str
    question: str
    response: str
    verdict: JudgeVerdict
    latency: float
    endpoint_error: str = ""


def run_eval(
    dataset: list[QaPair],
    answer_fn,
    judge_llm,
    runs: int = 1,
    out_dir=None,
    endpoint_retries: int = 2,
) -> tuple[MetricsReport, list[EvalRecord]]:
    """Evaluate `answer_fn(question) -> str` over the dataset, `runs`
    independent passes per question.

    Endpoint failures after retries are recorded as FN with an error
    annotation. When out_dir is given, verdicts.jsonl, report.json and
    report.txt are written there.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if not dataset:
        raise EvalError("empty dataset")
    records: list[EvalRecord] = []
    for run_idx in range(1, runs + 1):
        for qa in dataset:
            response, latency, error = None, 0.0, ""
            for attempt in range(endpoint_retries + 1):
                start = time.perf_counter()
                try:
                    response = answer_fn(qa.question)
                    latency = time.perf_counter() - start
                    break
                except Exception as exc:  # endpoint misbehavior must not abort the run
                    latency = time.perf_counter() - start
                    error = str(exc)
                    logger.warning("endpoint failed on %s (attempt %d): %s", qa.id, attempt + 1, exc)
            if response is None:
                verdict = JudgeVerdict("FN", 0.0, f"endpoint error: {error}")
            else:
                verdict = judge(qa, response, judge_llm)
                error = ""
            records.append(EvalRecord(run_idx, qa.id, qa.question, response or "", verdict, latency, error))
    report = compute_metrics(
        [r.verdict for r in records], [r.latency for r in records], runs=runs
    )
    if out_dir is not None:
        write_eval_outputs(report, records, out_dir, runs)
    return report, records


def per_run_reports(records: list[EvalRecord], runs: int) -> list[MetricsReport]:
    reports = []
    for run_idx in range(1, runs + 1):
        subset = [r for r in records if r.run == run_idx]
        reports.append(
            compute_metrics([r.verdict for r in subset], [r.latency for r in subset], runs=1)
        )
    return reports


def write_eval_outputs(report: MetricsReport, records: list[EvalRecord], out_dir, runs: int) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "verdicts.jsonl").open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({
                "run": r.run,
                "qa_id": r.qa_id,
                "question": r.question,
                "response": r.response,
                "category": r.verdict.category,
                "llm_score": r.verdict.llm_score,
                "justification": r.verdict.justification,
                "latency": r.latency,
                "endpoint_error": r.endpoint_error,
            }, ensure_ascii=False) + "\n")
    payload = report.as_dict()
    payload["per_run"] = [rep.as_dict() for rep in per_run_reports(records, runs)]
    (out / "report.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    (out / "report.txt").write_text(format_report(report), encoding="utf-8")


def _fmt(value) -> str:
    return f"{value:.1f}" if value is not None else "n/a"


def format_report(report: MetricsReport, name: str = "run") -> str:
    lines = [
        f"Evaluation report ({name}): {sum(report.counts.values())} verdicts over {report.runs} run(s)",
        f"  counts    TP={report.counts['TP']} TN={report.counts['TN']} "
        f"FP={report.counts['FP']} FN={report.counts['FN']}",
        f"  accuracy  {_fmt(report.accuracy)}",
        f"  precision {_fmt(report.precision)}",
        f"  recall    {_fmt(report.recall)}",
        f"  f1        {_fmt(report.f1)}",
        f"  llm_score {_fmt(report.mean_llm_score)}",
        f"  latency   {report.mean_latency:.3f}s mean",
    ]
    return "\n".join(lines) + "\n"


def compare(reports: dict[str, MetricsReport]) -> tuple[list[dict], str]:
    """Side-by-side comparison of named reports.

    Returns (rows, text_table); each row carries a `best` list naming the
    metric columns where that report leads.
    """
    if len(reports) < 2:
        raise EvalError("need >= 2 reports to compare")
    rows = []
    for name, rep in reports.items():
        row = {"name": name, "mean_latency": rep.mean_latency}
        for metric in MetricsReport.METRIC_FIELDS:
            row[metric] = getattr(rep, metric)
        row["best"] = []
        rows.append(row)
    for metric in MetricsReport.METRIC_FIELDS:
        values = [r[metric] for r in rows if r[metric] is not None]
        if not values:
            continue
        best = max(values)
        for row in rows:
            if row[metric] is not None and row[metric] == best:
                row["best"].append(metric)
    header = f"{'name':<20} {'acc':>7} {'prec':>7} {'rec':>7} {'f1':>7} {'score':>7} {'lat(s)':>8}"
    lines = [header, "-" * len(header)]
    for row in rows:
        cells = []
        for metric in MetricsReport.METRIC_FIELDS:
            mark = "*" if metric in row["best"] else ""
            cells.append(f"{_fmt(row[metric])}{mark:>1}".rjust(7))
        lines.append(f"{row['name']:<20} " + " ".join(cells) + f" {row['mean_latency']:>8.3f}")
    lines.append("(* best value in column)")
    return rows, "\n".join(lines) + "\n"


def load_qa_jsonl(path, field_map: dict[str, str] | None = None, dataset: str | None = None) -> list[QaPair]:
    """Load QA pairs from JSONL; field_map adapts other column names, e.g.
    {"question": "prompt", "ground_truth": "answer"} for two-column shapes."""
    field_map = field_map or {}
    q_key = field_map.get("question", "question")
    gt_key = field_map.get("ground_truth", "ground_truth")
    id_key = field_map.get("id", "id")
    path = Path(path)
    pairs = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise EvalError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            pairs.append(QaPair(
                id=str(obj.get(id_key, f"q{lineno}")),
                question=obj[q_key],
                ground_truth=obj[gt_key],
                dataset=dataset or path.stem,
            ))
    return pairs


class LexicalJudge:
    """Offline heuristic judge provider for provider-free runs.

    Classifies by token overlap between response and ground truth; a
    response that declines ("cannot", "can't", "don't know") counts as a
    refusal. It speaks the same one-line reply protocol as a real judge.
    """

    REFUSAL_MARKERS = ("cannot", "can't", "unable", "don't know", "no information", "not find")
    OUT_OF_SCOPE_MARKER = "[out-of-scope]"

    def __init__(self, threshold: float = 0.35):
        self.threshold = threshold

    def complete(self, req: llm.ChatRequest) -> llm.ChatResponse:
        text = req.messages[-1].content
        try:
            gt = text.split("Ground truth answer:\n", 1)[1].split("\n\nModel response:\n", 1)[0]
            response = text.split("\n\nModel response:\n", 1)[1]
        except IndexError:
            return llm.ChatResponse(content="FP | 0.0 | malformed judge input")
        refused = any(m in response.lower() for m in self.REFUSAL_MARKERS)
        out_of_scope = self.OUT_OF_SCOPE_MARKER in gt
        gt_terms = set(tokenize(gt))
        resp_terms = set(tokenize(response))
        overlap = len(gt_terms & resp_terms) / len(gt_terms) if gt_terms else 0.0
        if out_of_scope:
            category = "TN" if refused else "FP"
            score = 1.0 if refused else 0.0
        elif refused:
            category, score = "FN", 0.0
        elif overlap >= self.threshold:
            category, score = "TP", round(min(1.0, overlap), 3)
        else:
            category, score = "FP", round(overlap, 3)
        return llm.ChatResponse(content=f"{category} | {score} | lexical overlap {overlap:.2f}")
