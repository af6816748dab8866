import itertools
import json

import pytest

from docrag.evalkit import (
    EvalError,
    JudgeVerdict,
    LexicalJudge,
    MetricsReport,
    QaPair,
    build_judge_prompt,
    compare,
    compute_metrics,
    f1_from_precision_recall,
    judge,
    load_qa_jsonl,
    run_eval,
)
from docrag.llm import ScriptedChatProvider, user_request


QA = QaPair(id="q1", question="What does CTS stand for?",
            ground_truth="Clock Tree Synthesis, the stage that balances clock skew.")


class TestJudge:
    def test_scripted_tp(self):
        provider = ScriptedChatProvider(["TP | 0.95 | detailed, accurate and relevant"])
        verdict = judge(QA, "CTS stands for Clock Tree Synthesis. It is a stage...", provider)
        assert verdict.category == "TP"
        assert verdict.llm_score == 0.95

    def test_scripted_tn_out_of_scope(self):
        qa = QaPair(id="q2", question="What is the latest movie released?",
                    ground_truth="[out-of-scope] The assistant should decline.")
        provider = ScriptedChatProvider(["TN | 1.0 | correctly identified out of scope"])
        verdict = judge(qa, "I can't provide information on movies...", provider)
        assert verdict.category == "TN"

    def test_scripted_fp(self):
        provider = ScriptedChatProvider(["FP | 0.0 | incorrect and irrelevant"])
        verdict = judge(QA, "CTS stands for Central Time Scheduling...", provider)
        assert verdict.category == "FP"

    def test_scripted_fn(self):
        provider = ScriptedChatProvider(["FN | 0.0 | failed to answer when expected"])
        verdict = judge(QA, "I cannot provide an answer...", provider)
        assert verdict.category == "FN"

    def test_prompt_contains_all_parts(self):
        prompt = build_judge_prompt(QA, "some response")
        assert QA.question in prompt
        assert QA.ground_truth in prompt
        assert "some response" in prompt

    def test_prompt_is_pure_function(self):
        assert build_judge_prompt(QA, "r") == build_judge_prompt(QA, "r")

    def test_unparseable_after_retries_is_hard_error(self):
        provider = ScriptedChatProvider(["garbage", "more garbage", "still garbage"])
        with pytest.raises(EvalError):
            judge(QA, "response", provider)
        assert provider.call_count == 3

    def test_out_of_enum_category_rejected(self):
        provider = ScriptedChatProvider(["MAYBE | 0.5 | shrug"] * 3)
        with pytest.raises(EvalError):
            judge(QA, "response", provider)

    def test_retry_then_parse(self):
        provider = ScriptedChatProvider(["hmm", "TP | 0.8 | ok"])
        assert judge(QA, "response", provider).category == "TP"


def verdicts(tp=0, tn=0, fp=0, fn=0, score=1.0):
    out = []
    for cat, n in (("TP", tp), ("TN", tn), ("FP", fp), ("FN", fn)):
        out.extend(JudgeVerdict(cat, score if cat in ("TP", "TN") else 0.0) for _ in range(n))
    return out


class TestComputeMetrics:
    def test_all_correct(self):
        rep = compute_metrics(verdicts(tp=1, tn=1))
        assert rep.accuracy == 100.0
        assert rep.precision == 100.0
        assert rep.recall == 100.0

    def test_known_counts(self):
        rep = compute_metrics(verdicts(tp=6, tn=2, fp=1, fn=1))
        assert rep.accuracy == pytest.approx(80.0)
        assert rep.precision == pytest.approx(600 / 7)
        assert rep.recall == pytest.approx(600 / 7)

    def test_undefined_denominators_absent(self):
        rep = compute_metrics(verdicts(tn=3))
        assert rep.precision is None
        assert rep.recall is None
        assert rep.f1 is None
        assert rep.accuracy == 100.0

    def test_counts_conserved(self):
        vs = verdicts(tp=3, tn=2, fp=4, fn=1)
        rep = compute_metrics(vs)
        assert sum(rep.counts.values()) == len(vs)

    def test_permutation_invariant(self):
        vs = verdicts(tp=2, tn=1, fp=1, fn=1)
        reports = [compute_metrics(list(p)) for p in itertools.islice(itertools.permutations(vs), 20)]
        assert all(r.as_dict() == reports[0].as_dict() for r in reports)

    def test_empty_rejected(self):
        with pytest.raises(EvalError):
            compute_metrics([])

    @pytest.mark.parametrize("precision,recall,expected", [
        (94.8, 95.2, 95.0),
        (48.4, 100.0, 65.2),
    ])
    def test_f1_harmonic_mean(self, precision, recall, expected):
        assert f1_from_precision_recall(precision, recall) == pytest.approx(expected, abs=0.05)


class TestRunEval:
    def two_pairs(self):
        return [
            QA,
            QaPair(id="q2", question="What is global routing?",
                   ground_truth="Assigning nets to routing regions."),
        ]

    def test_five_runs_ten_verdicts(self, tmp_path):
        provider = ScriptedChatProvider(["TP | 1.0 | good"] * 10)
        report, records = run_eval(
            self.two_pairs(), lambda q: "scripted answer", provider, runs=5,
            out_dir=tmp_path / "out")
        assert len(records) == 10
        assert sum(report.counts.values()) == 10
        assert report.runs == 5
        lines = (tmp_path / "out" / "verdicts.jsonl").read_text().splitlines()
        assert len(lines) == 10
        payload = json.loads((tmp_path / "out" / "report.json").read_text())
        assert len(payload["per_run"]) == 5

    def test_single_run_all_tp(self):
        provider = ScriptedChatProvider(["TP | 1.0 | good"] * 2)
        report, _ = run_eval(self.two_pairs(), lambda q: "answer", provider, runs=1)
        assert report.accuracy == 100.0

    def test_deterministic_across_invocations(self):
        def make():
            provider = ScriptedChatProvider(["TP | 0.9 | a", "FP | 0.1 | b"] * 3)
            report, _ = run_eval(self.two_pairs(), lambda q: f"echo {q}", provider, runs=3)
            d = report.as_dict()
            d["mean_latency"] = 0  # latency is wall-clock, everything else fixed
            return d

        assert make() == make()

    def test_endpoint_failure_recorded_as_fn(self):
        provider = ScriptedChatProvider(["TP | 1.0 | fine"])

        def flaky(question):
            if question == QA.question:
                raise RuntimeError("endpoint exploded")
            return "ok"

        report, records = run_eval(self.two_pairs(), flaky, provider, runs=1)
        failed = next(r for r in records if r.qa_id == "q1")
        assert failed.verdict.category == "FN"
        assert "endpoint error" in failed.verdict.justification
        assert failed.endpoint_error
        assert report.counts["FN"] == 1

    def test_runs_must_be_positive(self):
        with pytest.raises(ValueError):
            run_eval(self.two_pairs(), lambda q: "x", ScriptedChatProvider([]), runs=0)


class TestCompare:
    def reports(self):
        a = compute_metrics(verdicts(tp=9, tn=1), runs=1)
        b = compute_metrics(verdicts(tp=5, fp=5), runs=1)
        return {"system_a": a, "system_b": b}

    def test_two_rows_with_metrics(self):
        rows, text = compare(self.reports())
        assert len(rows) == 2
        assert {"accuracy", "precision", "recall", "f1", "mean_llm_score"} <= set(rows[0])
        assert "system_a" in text and "system_b" in text

    def test_best_marking(self):
        rows, _ = compare(self.reports())
        by_name = {r["name"]: r for r in rows}
        assert "accuracy" in by_name["system_a"]["best"]
        assert "precision" in by_name["system_a"]["best"]

    def test_single_report_rejected(self):
        with pytest.raises(EvalError, match="2"):
            compare({"only": compute_metrics(verdicts(tp=1))})


class TestLoaders:
    def test_jsonl_load(self, tmp_path):
        p = tmp_path / "qa.jsonl"
        p.write_text(json.dumps({"id": "a", "question": "q?", "ground_truth": "g"}) + "\n")
        pairs = load_qa_jsonl(p)
        assert pairs[0].id == "a"
        assert pairs[0].dataset == "qa"

    def test_field_mapping_two_column_shape(self, tmp_path):
        p = tmp_path / "corpus.jsonl"
        p.write_text(json.dumps({"prompt": "q?", "answer": "g"}) + "\n")
        pairs = load_qa_jsonl(p, field_map={"question": "prompt", "ground_truth": "answer"})
        assert pairs[0].question == "q?"
        assert pairs[0].ground_truth == "g"


class TestLexicalJudge:
    def run(self, qa, response):
        return judge(qa, response, LexicalJudge())

    def test_overlapping_answer_is_tp(self):
        assert self.run(QA, "CTS is Clock Tree Synthesis, it balances clock skew").category == "TP"

    def test_refusal_on_in_scope_is_fn(self):
        assert self.run(QA, "I cannot provide an answer.").category == "FN"

    def test_refusal_on_out_of_scope_is_tn(self):
        qa = QaPair(id="m", question="Latest movie?", ground_truth="[out-of-scope] decline")
        assert self.run(qa, "I can't provide information on movies").category == "TN"

    def test_wrong_answer_is_fp(self):
        assert self.run(QA, "Central Time Scheduling obviously").category == "FP"
