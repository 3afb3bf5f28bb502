import json
import sys
import textwrap

import numpy as np
import pytest

from suppresskit.predictor import (
    PredictionRecord,
    PredictorError,
    PredictorHandle,
    coverage_check,
    load_predictions,
    run_subprocess_predictor,
    softmax,
)

PY = sys.executable


class TestSoftmax:
    def test_equal_logits_uniform(self):
        assert softmax(np.array([0.0, 0.0])).tolist() == [0.5, 0.5]

    def test_shift_invariance(self, rng):
        z = rng.standard_normal(10)
        assert np.allclose(softmax(z), softmax(z + 123.456), atol=1e-12)

    def test_sums_to_one(self, rng):
        for _ in range(5):
            z = rng.standard_normal(7) * 50
            assert softmax(z).sum() == pytest.approx(1.0, abs=1e-6)

    def test_overflow_safe(self):
        probs = softmax(np.array([1e8, 0.0]))
        assert np.isfinite(probs).all()


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


class TestLoadPredictions:
    def test_logits_become_probabilities(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [{"id": "a", "scores": [0, 0], "prob": False}])
        records = load_predictions(path)
        assert records[0].scores.tolist() == [0.5, 0.5]
        assert records[0].is_probability

    def test_duplicate_id_names_offender(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [
            {"id": "a", "scores": [1, 0], "prob": True},
            {"id": "a", "scores": [0, 1], "prob": True},
        ])
        with pytest.raises(PredictorError, match="'a'"):
            load_predictions(path)

    def test_probability_sum_checked(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [{"id": "a", "scores": [0.7, 0.4], "prob": True}])
        with pytest.raises(PredictorError, match="sum"):
            load_predictions(path)

    def test_multilabel_waives_sum_constraint(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [{"id": "a", "scores": [0.7, 0.4], "prob": True}])
        records = load_predictions(path, multi_label=True)
        assert records[0].scores.tolist() == [0.7, 0.4]

    def test_ragged_lengths_rejected(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [
            {"id": "a", "scores": [0.5, 0.5], "prob": True},
            {"id": "b", "scores": [0.2, 0.3, 0.5], "prob": True},
        ])
        with pytest.raises(PredictorError, match="expected 2"):
            load_predictions(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [{"id": "a", "scores": [1.0, None], "prob": True}])
        with pytest.raises(PredictorError):
            load_predictions(path)

    def test_malformed_line_number(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text('{"id": "a", "scores": [1, 0], "prob": true}\nnot json\n')
        with pytest.raises(PredictorError, match="line 2"):
            load_predictions(path)


def stub_command(body: str) -> str:
    """Build a python -c one-liner implementing a protocol child."""
    script = textwrap.dedent(body)
    return f'{PY} -c "import sys, json\n{script}"'


ECHO_CHILD = """
for line in sys.stdin:
    line = line.strip()
    if not line:
        break
    req = json.loads(line)
    print(json.dumps({'id': req['id'], 'scores': [0.25, 0.25, 0.25, 0.25], 'prob': True}), flush=True)
"""

REVERSED_CHILD = """
reqs = []
for line in sys.stdin:
    line = line.strip()
    if not line:
        break
    reqs.append(json.loads(line))
    if len(reqs) == 3:
        for req in reversed(reqs):
            print(json.dumps({'id': req['id'], 'scores': [1.0, 0.0], 'prob': True}), flush=True)
        reqs = []
"""

OMITTING_CHILD = """
for line in sys.stdin:
    line = line.strip()
    if not line:
        break
    req = json.loads(line)
    if req['id'] != 'skip_me':
        print(json.dumps({'id': req['id'], 'scores': [1.0, 0.0], 'prob': True}), flush=True)
"""

ERROR_OBJECT_CHILD = """
for line in sys.stdin:
    line = line.strip()
    if not line:
        break
    req = json.loads(line)
    if req['id'] == 'broken':
        print(json.dumps({'id': req['id'], 'error': 'unreadable image'}), flush=True)
    else:
        print(json.dumps({'id': req['id'], 'scores': [1.0, 0.0], 'prob': True}), flush=True)
"""

MALFORMED_CHILD = """
sys.stdin.readline()
print('this is not json', flush=True)
"""


class TestSubprocessProtocol:
    def requests(self, n):
        return [(f"img_{i}", f"/fake/img_{i}.png") for i in range(n)]

    def test_echo_stub_uniform_scores(self):
        handle = PredictorHandle("subprocess", stub_command(ECHO_CHILD), 4)
        records = run_subprocess_predictor(handle, self.requests(5))
        assert [r.image_id for r in records] == [f"img_{i}" for i in range(5)]
        assert all(r.scores.tolist() == [0.25] * 4 for r in records)

    def test_out_of_order_responses_keyed_by_id(self):
        handle = PredictorHandle("subprocess", stub_command(REVERSED_CHILD), 2)
        records = run_subprocess_predictor(handle, self.requests(6), window=3)
        assert [r.image_id for r in records] == [f"img_{i}" for i in range(6)]

    def test_missing_id_reported(self, monkeypatch):
        monkeypatch.setenv("SUPPRESSKIT_PREDICTOR_TIMEOUT_MS", "3000")
        handle = PredictorHandle("subprocess", stub_command(OMITTING_CHILD), 2)
        requests = [("img_0", "x"), ("skip_me", "y"), ("img_2", "z")]
        with pytest.raises(PredictorError, match="skip_me"):
            run_subprocess_predictor(handle, requests)

    def test_error_objects_collected(self):
        handle = PredictorHandle("subprocess", stub_command(ERROR_OBJECT_CHILD), 2)
        requests = [("img_0", "x"), ("broken", "y"), ("img_2", "z")]
        with pytest.raises(PredictorError, match="unreadable image"):
            run_subprocess_predictor(handle, requests)

    def test_malformed_line_includes_line_number(self):
        handle = PredictorHandle("subprocess", stub_command(MALFORMED_CHILD), 2)
        with pytest.raises(PredictorError, match="line 1"):
            run_subprocess_predictor(handle, self.requests(1))

    def test_premature_exit(self):
        handle = PredictorHandle("subprocess", f"{PY} -c \"pass\"", 2)
        with pytest.raises(PredictorError, match="exited"):
            run_subprocess_predictor(handle, self.requests(2))

    def test_timeout(self, monkeypatch):
        monkeypatch.setenv("SUPPRESSKIT_PREDICTOR_TIMEOUT_MS", "300")
        handle = PredictorHandle(
            "subprocess", f"{PY} -c \"import time; time.sleep(30)\"", 2
        )
        with pytest.raises(PredictorError, match="timeout"):
            run_subprocess_predictor(handle, self.requests(1))

    def test_duplicate_request_ids_rejected(self):
        handle = PredictorHandle("subprocess", stub_command(ECHO_CHILD), 4)
        with pytest.raises(PredictorError, match="duplicate"):
            run_subprocess_predictor(handle, [("a", "x"), ("a", "y")])


class TestCoverage:
    def record(self, image_id):
        return PredictionRecord(image_id, np.array([1.0, 0.0]), True)

    def test_exactly_once(self):
        by_id = coverage_check([self.record("a"), self.record("b")], ["a", "b"])
        assert set(by_id) == {"a", "b"}

    def test_missing(self):
        with pytest.raises(PredictorError, match="missing"):
            coverage_check([self.record("a")], ["a", "b"])

    def test_duplicate(self):
        with pytest.raises(PredictorError, match="duplicate"):
            coverage_check([self.record("a"), self.record("a")], ["a"])

    def test_unknown(self):
        with pytest.raises(PredictorError, match="unknown"):
            coverage_check([self.record("a"), self.record("x")], ["a"])


class TestHandle:
    def test_mode_validation(self):
        with pytest.raises(ValueError):
            PredictorHandle("http", "x", 10)

    def test_class_count_validation(self):
        with pytest.raises(ValueError):
            PredictorHandle("file", "x", 1)
