"""Metric arithmetic, report serialization, and pipeline evaluation wiring."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scale_sense.corpus import build_instances, generate_synthetic_corpus, demo_config
from scale_sense.encoder import EncoderConfig
from scale_sense.metrics import (
    EmptyInput,
    MetricsReport,
    NonPositiveValue,
    classification_metrics,
    floor_log10,
    regression_metrics,
)
from scale_sense.pipeline import (
    EvalMode,
    ModelPredictors,
    VocabMismatch,
    evaluate_pipeline,
)
from scale_sense.query import Task
from scale_sense.train import TaskModel, TrainConfig, Vocabulary, type_label, unit_label

# fixed 10-pair oracle fixture; expectations computed by hand
TEN_PAIRS = [
    (1.0, 1.0), (10.0, 1.0), (100.0, 10.0), (2.0, 3.0), (5.0, 5.0),
    (0.5, 0.05), (1000.0, 100.0), (4.0, 4.0), (8.0, 80.0), (250.0, 25.0),
]
HAND_COMPUTED = {
    "mae": 129.745,
    "mse": 87399.12025,
    "mape": 1.4,
    "lmae": (6.0 + math.log10(1.5)) / 10.0,
    "e_acc": 0.4,
}


class TestClassificationMetrics:
    def test_all_correct(self):
        assert classification_metrics([(1, 1), (0, 0)]) == 1.0

    def test_three_of_four(self):
        assert classification_metrics([(1, 1), (0, 0), (1, 1), (0, 1)]) == 0.75

    def test_empty(self):
        with pytest.raises(EmptyInput):
            classification_metrics([])

    def test_report_format_accepts_typical_accuracy_values(self):
        report = MetricsReport(task="type", count=9868, accuracy=0.9233)
        assert "accuracy=0.9233" in report.to_kv_text()


class TestRegressionMetrics:
    def test_perfect_predictions(self):
        m = regression_metrics([(3.0, 3.0), (42.0, 42.0)])
        assert m["lmae"] == 0.0
        assert m["e_acc"] == 1.0
        assert m["mae"] == 0.0

    def test_hundred_vs_ten(self):
        m = regression_metrics([(100.0, 10.0)])
        assert m["lmae"] == pytest.approx(1.0, abs=1e-12)
        assert m["e_acc"] == 0.0
        assert m["mape"] == pytest.approx(0.9, abs=1e-12)

    def test_two_vs_three_same_magnitude(self):
        assert regression_metrics([(2.0, 3.0)])["e_acc"] == 1.0

    def test_hand_computed_fixture(self):
        m = regression_metrics(TEN_PAIRS)
        for key, expected in HAND_COMPUTED.items():
            assert m[key] == pytest.approx(expected, abs=1e-9), key

    def test_non_positive_rejected(self):
        with pytest.raises(NonPositiveValue):
            regression_metrics([(1.0, 0.0)])
        with pytest.raises(NonPositiveValue):
            regression_metrics([(-1.0, 1.0)])

    def test_empty(self):
        with pytest.raises(EmptyInput):
            regression_metrics([])


mantissas = st.floats(min_value=1.05, max_value=9.5)
decades = st.integers(min_value=-3, max_value=4)


class TestMetricProperties:
    @given(m1=mantissas, d1=decades, m2=mantissas, d2=decades, k=st.integers(-3, 3))
    @settings(max_examples=200)
    def test_power_of_ten_scaling_preserves_log_metrics(self, m1, d1, m2, d2, k):
        y, y_hat = m1 * 10.0**d1, m2 * 10.0**d2
        base = regression_metrics([(y, y_hat)])
        scaled = regression_metrics([(y * 10.0**k, y_hat * 10.0**k)])
        assert scaled["lmae"] == pytest.approx(base["lmae"], abs=1e-9)
        assert scaled["e_acc"] == base["e_acc"]

    @given(m1=mantissas, d1=decades, m2=mantissas, d2=decades,
           scale=st.floats(min_value=0.01, max_value=1000))
    @settings(max_examples=200)
    def test_mape_invariant_under_any_scaling(self, m1, d1, m2, d2, scale):
        y, y_hat = m1 * 10.0**d1, m2 * 10.0**d2
        base = regression_metrics([(y, y_hat)])
        scaled = regression_metrics([(y * scale, y_hat * scale)])
        assert scaled["mape"] == pytest.approx(base["mape"], rel=1e-9)

    @given(values=st.lists(st.floats(min_value=0.01, max_value=1e4), min_size=1, max_size=8))
    def test_e_acc_is_one_when_lmae_zero(self, values):
        m = regression_metrics([(v, v) for v in values])
        assert m["lmae"] == 0.0
        assert m["e_acc"] == 1.0


class TestFloorLog10:
    @pytest.mark.parametrize(
        "value,expected",
        [(1.0, 0), (9.99, 0), (10.0, 1), (0.1, -1), (0.0999, -2), (100.0, 2), (0.05, -2)],
    )
    def test_boundaries(self, value, expected):
        assert floor_log10(value) == expected

    def test_rejects_non_positive(self):
        with pytest.raises(NonPositiveValue):
            floor_log10(0.0)


class TestMetricsReport:
    def test_kv_text_key_order_classification(self):
        text = MetricsReport(task="unit", count=4, mode="ground_truth_type", accuracy=0.75).to_kv_text()
        assert text.splitlines() == [
            "task=unit",
            "mode=ground_truth_type",
            "count=4",
            "accuracy=0.75",
        ]

    def test_kv_text_key_order_regression(self):
        m = regression_metrics([(100.0, 10.0)])
        text = MetricsReport(task="quantity", count=1, regression=m).to_kv_text()
        keys = [line.split("=")[0] for line in text.splitlines()]
        assert keys == ["task", "count", "mse", "mae", "mape", "lmae", "e_acc"]

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            MetricsReport(task="type", count=1, accuracy=1.5)
        with pytest.raises(ValueError):
            MetricsReport(task="quantity", count=1, regression={"mse": 1.0})


class OraclePredictors:
    """Hard-wired correct outputs read from the instance labels."""

    def predict_type(self, instances):
        return [type_label(i.mtype) for i in instances]

    def predict_unit(self, instances, mtype_words):
        return [unit_label(i.unit) for i in instances]

    def predict_quantity(self, instances, mtype_words):
        return [i.quantity_base for i in instances]


class TypeSensitiveUnitPredictors(OraclePredictors):
    """Unit head that is only right when given the true measurement type;
    type head deliberately degraded by label flips."""

    def __init__(self, instances, wrong_every=3):
        self._flip = {id(inst): (k % wrong_every == 0) for k, inst in enumerate(instances)}

    def predict_type(self, instances):
        return [
            (1 - type_label(i.mtype)) if self._flip[id(i)] else type_label(i.mtype)
            for i in instances
        ]

    def predict_unit(self, instances, mtype_words):
        preds = []
        for inst, word in zip(instances, mtype_words):
            if word == inst.mtype.value:
                preds.append(unit_label(inst.unit))
            else:
                preds.append((unit_label(inst.unit) + 1) % 14)
        return preds


@pytest.fixture(scope="module")
def eval_instances():
    records, _ = generate_synthetic_corpus(demo_config(60), seed=2)
    instances, _ = build_instances(records, seed=2)
    return instances


class TestEvaluatePipeline:
    def test_oracle_heads_perfect(self, eval_instances):
        from scale_sense.units import format_quantity

        report = evaluate_pipeline(OraclePredictors(), eval_instances)
        assert report.type_report.accuracy == 1.0
        assert report.unit_report.accuracy == 1.0
        assert report.quantity_report.regression["lmae"] == 0.0
        assert report.quantity_report.regression["e_acc"] == 1.0
        assert len(report.end_to_end) == len(eval_instances)
        for inst, entry in zip(eval_instances, report.end_to_end):
            assert entry["formatted"] == str(format_quantity(inst.quantity_base, inst.unit))

    def test_predicted_type_mode_feeds_predictions_through(self, eval_instances):
        predictors = TypeSensitiveUnitPredictors(eval_instances)
        gt = evaluate_pipeline(predictors, eval_instances, EvalMode.GROUND_TRUTH_TYPE)
        pt = evaluate_pipeline(predictors, eval_instances, EvalMode.PREDICTED_TYPE)
        assert gt.unit_report.accuracy == 1.0
        assert pt.unit_report.accuracy < gt.unit_report.accuracy
        assert pt.type_report.accuracy < 1.0

    def test_deterministic(self, eval_instances):
        a = evaluate_pipeline(OraclePredictors(), eval_instances)
        b = evaluate_pipeline(OraclePredictors(), eval_instances)
        assert a.to_kv_text() == b.to_kv_text()
        assert a.end_to_end == b.end_to_end

    def test_vocab_mismatch(self):
        config = TrainConfig(task=Task.TYPE, encoder=EncoderConfig(dim=16, layers=1, heads=2, max_len=32))
        config_u = TrainConfig(task=Task.UNIT, encoder=EncoderConfig(dim=16, layers=1, heads=2, max_len=32))
        config_q = TrainConfig(task=Task.QUANTITY, encoder=EncoderConfig(dim=16, layers=1, heads=2, max_len=32))
        vocab_a = Vocabulary(["alpha", "beta"])
        vocab_b = Vocabulary(["gamma"])
        with pytest.raises(VocabMismatch):
            ModelPredictors(
                TaskModel(config, vocab_a),
                TaskModel(config_u, vocab_b),
                TaskModel(config_q, vocab_a),
            )
