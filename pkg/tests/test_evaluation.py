import pytest

from ontrack.core.exceptions import DatasetError
from ontrack.models.boxes import BBox
from ontrack.services.evaluation import center_error, evaluate, success_curve, vot_failures

GT = [BBox.from_xywh(10 + i, 10, 20, 20) for i in range(12)]
FAR = BBox.from_xywh(200, 200, 20, 20)


def test_ground_truth_is_a_fixed_point():
    report = evaluate(GT, GT, "vot")
    assert report.auc == 1.0
    assert report.ao == 1.0
    assert report.accuracy == 1.0
    assert report.failures == 0
    assert report.precision_20 == 1.0
    assert report.sr_50 == report.sr_75 == 1.0


def test_disjoint_predictions_score_zero():
    report = evaluate([FAR] * len(GT), GT, "vot")
    assert report.auc == 0.0
    assert report.ao == 0.0
    assert report.accuracy == 0.0
    assert report.failures == 2


def test_length_mismatch_names_both_counts():
    with pytest.raises(DatasetError, match="11 predictions but 12 ground-truth"):
        evaluate(GT[:11], GT)


def test_success_curve_counts_thresholds():
    curve = success_curve([0.5])
    assert curve[:11] == [1.0] * 11
    assert curve[11:] == [0.0] * 10
    assert success_curve([0.0]) == [0.0] * 21


def test_auc_is_mean_of_the_curve():
    predictions = [GT[0].translate(10, 0)] + GT[1:]
    report = evaluate(predictions, GT)
    assert report.auc == pytest.approx(sum(report.success_curve) / 21)


def test_vot_walk_skips_and_excludes():
    overlaps = [1.0, 1.0, 0.0] + [1.0] * 16
    failures, excluded = vot_failures(overlaps)
    assert failures == [2]
    assert excluded == set(range(2, 17))


def test_vot_accuracy_ignores_burn_in_frames():
    predictions = list(GT)
    predictions[1] = GT[1].translate(10, 0)
    predictions[2] = FAR
    report = evaluate(predictions, GT, "vot")
    assert report.failures == 1
    assert report.accuracy == pytest.approx((1 / 3 + 1.0) / 2)


def test_otb_accuracy_averages_overlapping_frames():
    predictions = [FAR] + GT[1:]
    report = evaluate(predictions, GT, "otb")
    assert report.failures == 0
    assert report.accuracy == 1.0
    assert report.ao == pytest.approx(11 / 12)


def test_center_error_and_precision():
    assert center_error(BBox.from_xywh(0, 0, 2, 2), BBox.from_xywh(3, 4, 2, 2)) == 5.0
    predictions = [g.translate(20, 0) for g in GT[:6]] + [g.translate(21, 0) for g in GT[6:]]
    assert evaluate(predictions, GT).precision_20 == 0.5
