import logging

import numpy as np
import pytest

from polsar_gan.data import CoherencyRaster, PatchSet, extract_patches, generate_scene
from polsar_gan.errors import EmptySampleError, LabelRangeError, UndefinedMetricError
from polsar_gan.metrics import (
    ConfusionMatrix,
    aa,
    classification_summary,
    confusion,
    histogram_compare,
    kappa,
    ks_statistic,
    oa,
    pcolor_export,
    per_class_accuracy,
    write_confusion_csv,
    write_histogram_csv,
    write_ppm,
)


# ==============================================================================
# CLASSIFICATION
# ==============================================================================

def test_confusion_hand_count():
    cm = confusion([1, 2, 2, 2], [1, 1, 2, 2], 2)
    np.testing.assert_array_equal(cm.counts, [[1, 1], [0, 2]])


def test_confusion_diagonal_and_empty():
    cm = confusion([1, 2, 3, 3], [1, 2, 3, 3], 3)
    np.testing.assert_array_equal(cm.counts, np.diag([1, 1, 2]))
    assert confusion([], [], 4).total == 0


def test_confusion_range_error():
    with pytest.raises(LabelRangeError):
        confusion([1, 4], [1, 2], 3)
    with pytest.raises(LabelRangeError):
        confusion([1, 1], [0, 2], 3)


def test_hand_computed_scores():
    cm = ConfusionMatrix(np.array([[45, 5], [10, 40]]))
    assert oa(cm) == pytest.approx(0.85, abs=1e-12)
    assert aa(cm) == pytest.approx(0.85, abs=1e-12)
    assert kappa(cm) == pytest.approx(0.70, abs=1e-12)


def test_perfect_diagonal():
    cm = ConfusionMatrix(np.diag([3, 7, 5]))
    assert oa(cm) == aa(cm) == pytest.approx(1.0)
    assert kappa(cm) == pytest.approx(1.0)


def test_kappa_near_zero_for_independent_predictions(rng):
    labels = rng.integers(1, 5, 200_000)
    preds  = rng.integers(1, 5, 200_000)
    assert abs(kappa(confusion(preds, labels, 4))) < 0.05


def test_kappa_invariant_under_class_permutation(rng):
    counts = rng.integers(0, 30, size=(4, 4))
    perm   = rng.permutation(4)
    permuted = counts[perm][:, perm]
    assert kappa(ConfusionMatrix(counts)) == pytest.approx(kappa(ConfusionMatrix(permuted)), abs=1e-12)


def test_undefined_metrics():
    empty = ConfusionMatrix(np.zeros((2, 2), dtype=int))
    for metric in (oa, aa, kappa):
        with pytest.raises(UndefinedMetricError):
            metric(empty)
    with pytest.raises(UndefinedMetricError):
        kappa(ConfusionMatrix(np.array([[5, 0], [0, 0]])))


def test_aa_excludes_zero_support(caplog):
    cm = ConfusionMatrix(np.array([[4, 0, 0], [0, 0, 0], [1, 0, 3]]))
    with caplog.at_level(logging.WARNING):
        assert aa(cm) == pytest.approx((1.0 + 0.75) / 2)
    assert "[2]" in caplog.text
    summary = classification_summary(cm)
    assert summary["excluded"] == [2]


def test_summary_reports_undefined_kappa_as_nan():
    summary = classification_summary(ConfusionMatrix(np.array([[5, 0], [0, 0]])))
    assert summary["oa"] == 1.0 and np.isnan(summary["kappa"])


def test_per_class_table():
    table = per_class_accuracy(ConfusionMatrix(np.array([[45, 5], [10, 40]])))
    assert list(table.columns) == ["class", "support", "correct", "accuracy"]
    np.testing.assert_allclose(table["accuracy"], [0.9, 0.8])


def test_confusion_csv(tmp_path):
    write_confusion_csv(ConfusionMatrix(np.array([[1, 2], [3, 4]])), tmp_path / "cm.csv")
    lines = (tmp_path / "cm.csv").read_text().splitlines()
    assert lines[0] == "class,pred_1,pred_2"
    assert lines[2] == "true_2,3,4"


# ==============================================================================
# DISTRIBUTIONS
# ==============================================================================

def test_ks_identical_and_separated(rng):
    a = rng.normal(size=1000)
    assert ks_statistic(a, a.copy()) == 0.0
    assert ks_statistic(a, rng.normal(10, 1, 1000)) > 0.9


def test_ks_symmetric_and_monotone_invariant(rng):
    a, b = rng.normal(size=300), rng.normal(0.3, 1.2, size=400)
    d = ks_statistic(a, b)
    assert 0.0 <= d <= 1.0
    assert ks_statistic(b, a) == pytest.approx(d, abs=1e-12)
    assert ks_statistic(np.exp(a), np.exp(b)) == pytest.approx(d, abs=1e-12)


def test_ks_empty_sample():
    with pytest.raises(EmptySampleError):
        ks_statistic([], [1.0])


def test_histogram_compare(rng):
    a, g = rng.normal(size=500), rng.normal(1, 1, size=700)
    report = histogram_compare(a, g, bins=32, channel="T11", plane="re")
    assert report.count_actual.sum() == 500 and report.count_generated.sum() == 700
    assert np.all(np.diff(report.edges) > 0) and len(report.edges) == 33
    assert report.edges[0] == min(a.min(), g.min())
    assert report.ks == pytest.approx(ks_statistic(a, g))


def test_histogram_degenerate_range():
    report = histogram_compare(np.zeros(10), np.zeros(5), bins=4)
    assert report.edges[0] == -0.5 and report.edges[-1] == 0.5
    assert report.ks == 0.0
    with pytest.raises(EmptySampleError):
        histogram_compare([], [1.0])


def test_histogram_csv_format(tmp_path, rng):
    reports = [histogram_compare(rng.normal(size=50), rng.normal(size=50), bins=3,
                                 channel="T11", plane=p) for p in ("re", "im")]
    write_histogram_csv(reports, tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "channel,plane,bin_left,bin_right,count_actual,count_generated"
    assert len(lines) == 1 + 2 * (3 + 1)
    assert lines[4].startswith("# ks=") and lines[8].startswith("# ks=")
    assert lines[1].startswith("T11,re,")
    assert float(lines[4].split("=")[1]) == reports[0].ks


# ==============================================================================
# PCOLOR
# ==============================================================================

def test_pcolor_constant_is_gray():
    rgb = pcolor_export(CoherencyRaster(np.ones((5, 7, 9))))
    assert rgb.shape == (5, 7, 3)
    assert (rgb == 128).all()


def test_pcolor_extremes_map_to_full_range():
    pixels = np.ones((2, 1, 9))
    pixels[0, 0, 0], pixels[1, 0, 0] = 0.0, 10.0
    rgb = pcolor_export(pixels)
    assert rgb[0, 0, 0] == 0 and rgb[1, 0, 0] == 255


def test_pcolor_of_patches_is_tiled():
    raster = generate_scene(2, seed=0, height=16, width=16)
    patches = extract_patches(raster, 8)
    assert isinstance(patches, PatchSet)
    assert pcolor_export(patches).shape == (8, 32, 3)


def test_write_ppm(tmp_path):
    rgb = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    write_ppm(rgb, tmp_path / "x.ppm")
    raw = (tmp_path / "x.ppm").read_bytes()
    assert raw.startswith(b"P6\n3 2\n255\n")
    assert raw[len(b"P6\n3 2\n255\n"):] == rgb.tobytes()
