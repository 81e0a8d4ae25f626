"""Evaluation tests, including cross-component metric agreement."""

import pytest

from drowsewatch.metrics import confusion as pipeline_confusion

from trainkit.dataset import CLASSES, IMAGE_SUFFIXES, DatasetError
from trainkit.evaluate import EvalReport, evaluate_model, predict_probability
from trainkit.model import load_checkpoint


class TestEvaluateModel:
    def test_cells_sum_to_validation_count(self, toy_head_run, toy_root):
        report = evaluate_model(toy_head_run.checkpoint_path, toy_root / "validation")
        assert report.total == 4
        assert 0.0 <= report.accuracy <= 1.0

    def test_agrees_with_pipeline_confusion_on_same_data(self, toy_head_run, toy_root):
        model = load_checkpoint(toy_head_run.checkpoint_path)
        preds, truth = [], []
        for cls in CLASSES:
            for path in sorted((toy_root / "validation" / cls).iterdir()):
                if path.suffix.lower() not in IMAGE_SUFFIXES:
                    continue
                prob = predict_probability(model, path)
                preds.append("sleepy" if prob >= 0.5 else "awake")
                truth.append(cls)
        want = pipeline_confusion(preds, truth)
        got = evaluate_model(toy_head_run.checkpoint_path, toy_root / "validation")
        assert (got.tp, got.fp, got.fn, got.tn) == (want.tp, want.fp, want.fn, want.tn)

    def test_accuracy_arithmetic_matches_pipeline(self):
        from drowsewatch.metrics import ConfusionMatrix, accuracy as pipeline_accuracy

        report = EvalReport(tp=481, fp=15, fn=18, tn=498)
        assert report.total == 1012
        assert report.accuracy == pipeline_accuracy(ConfusionMatrix(481, 15, 18, 498))

    def test_missing_class_dirs_rejected(self, toy_head_run, tmp_path):
        with pytest.raises(DatasetError, match="class directories"):
            evaluate_model(toy_head_run.checkpoint_path, tmp_path)
