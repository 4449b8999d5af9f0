import os

import pytest

from clLearn.clMetrics import clMetrics

def filled():
    metrics = clMetrics()
    metrics.set(0, 0, 0.9)
    metrics.set(0, 1, 0.7)
    metrics.set(1, 1, 0.8)
    return metrics

class TestMetrics:
    """Accuracy matrix and forgetting."""

    def test_summary_numbers(self):
        metrics = filled()
        assert metrics.avg_accuracy == pytest.approx(0.75)
        assert metrics.forgetting == {0: pytest.approx(0.2)}
        assert metrics.average_forgetting == pytest.approx(0.2)
        assert metrics.backward_transfer == pytest.approx(-0.2)
        assert metrics.summary() == ['avg_accuracy,0.750000', 'forgetting_0,0.200000', 'avg_forgetting,0.200000']

    def test_single_task_has_no_forgetting(self):
        metrics = clMetrics()
        metrics.set(0, 0, 0.5)
        assert not metrics.forgetting
        assert metrics.average_forgetting == 0.0
        assert metrics.last_stage == 0

    def test_empty_matrix(self):
        metrics = clMetrics()
        assert metrics.avg_accuracy is None
        assert metrics.last_stage is None
        assert metrics.tasks == []

    def test_rejects_undefined_entries(self):
        metrics = filled()
        with pytest.raises(ValueError):
            metrics.set(1, 0, 0.5)
        with pytest.raises(ValueError):
            metrics.set(0, 2, 1.5)
        with pytest.raises(ValueError):
            metrics.get(1, 0)

    def test_csv_round_trip(self, tmp_path):
        path = os.path.join(str(tmp_path), 'metrics.csv')
        filled().toCsv(path)
        with open(path) as stream:
            assert stream.read() == 'task,stage,accuracy\n0,0,0.900000\n0,1,0.700000\n1,1,0.800000\n'
        again = clMetrics.fromCsv(path)
        assert again.entries == filled().entries

    def test_rejects_foreign_csv(self, tmp_path):
        path = os.path.join(str(tmp_path), 'other.csv')
        with open(path, 'w') as stream: stream.write('step,phase\n')
        with pytest.raises(ValueError):
            clMetrics.fromCsv(path)

    def test_csv_round_trip_of_repeating_fractions(self, tmp_path):
        path = os.path.join(str(tmp_path), 'metrics.csv')
        metrics = clMetrics()
        metrics.set(0, 0, 1.0 / 3.0)
        metrics.set(0, 1, 2.0 / 7.0)
        metrics.set(1, 1, 0.5)
        assert metrics.get(0, 0) == 0.333333
        metrics.toCsv(path)
        again = clMetrics.fromCsv(path)
        assert again.entries == metrics.entries
        assert again.summary() == metrics.summary()
