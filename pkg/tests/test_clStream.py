import os

import numpy
import pytest

from clLearn.clData import clData
from clLearn.clNetwork import clNetwork
from clLearn.clStream import clOnlineLearner, clStream, streamConfig
from conftest import linearNet

data = clData()
runner = clStream()

def sphereNet(seed = 1):
    return clNetwork.build([4, 8], 'relu', {0: 2}, seed = seed)

def sphereStream(batches = 6, size = 10, seed = 0):
    return data.makeStream([clData.phase('q1', batches, size), clData.phase('q2', batches, size)], seed = seed)

def sphereTests(seed = 0):
    return [data.sphereQuadrant(quadrant, 50, seed = seed + 7919 + index) for index, quadrant in enumerate(clData.quadrants)]

class TestOnlineLearner:
    """One arrival of the online protocol."""

    def test_first_arrival_is_plain_sgd(self):
        net = sphereNet()
        reference = net.copy()
        batch = sphereStream().batches[0]
        learner = clOnlineLearner(net, streamConfig(steps = 3))
        loss = learner.step(batch)
        first = None
        for _ in range(3):
            value, grads = reference.lossAndBackward(0, batch.inputs, batch.labels)
            if first is None: first = value
            reference.sgdStep(grads, 0.01)
        assert loss == first
        for name, value in reference.parameters([0]).items():
            numpy.testing.assert_array_equal(net.parameters([0])[name], value)

    def test_no_hard_buffer_is_pure_sgd(self):
        net = sphereNet()
        reference = net.copy()
        stream = sphereStream()
        learner = clOnlineLearner(net, streamConfig(variant = 'online_no_hard', steps = 2, delta_mu = 100.0,
                                                    delta_sigma = 100.0, window = 2))
        for batch in stream.batches:
            learner.step(batch)
            for _ in range(2):
                _, grads = reference.lossAndBackward(0, batch.inputs, batch.labels)
                reference.sgdStep(grads, 0.01)
        assert learner.buffer.size == 0 and learner.omega_updates == 0
        for name, value in reference.parameters([0]).items():
            numpy.testing.assert_array_equal(net.parameters([0])[name], value)

    def test_variants_resolve(self):
        assert clOnlineLearner(sphereNet(), streamConfig(variant = 'online')).config.lam == 0.0
        joint = clOnlineLearner(sphereNet(), streamConfig(variant = 'online_joint'))
        assert joint.config.lam == 0.0 and not joint.consolidates
        hard = clOnlineLearner(sphereNet(), streamConfig(variant = 'online_no_hard'))
        assert hard.config.capacity == 0
        with pytest.raises(ValueError):
            clOnlineLearner(sphereNet(), streamConfig(variant = 'replay'))
        with pytest.raises(ValueError):
            clOnlineLearner(sphereNet(), streamConfig(omega_estimator = 'si'))

    @pytest.mark.parametrize('estimator', ['mas', 'ewc'])
    def test_plateau_updates_omega(self, estimator):
        net = sphereNet()
        config = streamConfig(delta_mu = 100.0, delta_sigma = 100.0, window = 2, omega_estimator = estimator)
        learner = clOnlineLearner(net, config)
        batches = sphereStream().batches
        learner.step(batches[0])
        assert learner.omega_updates == 0 and len(learner.window) == 1
        learner.step(batches[1])
        assert learner.omega_updates == 1
        assert learner.omega.count == 1
        assert 'head.0.weights' in learner.omega.names
        assert len(learner.window) == 0 and not learner.plateau.armed
        assert learner.loss_mean is not None
        for name, value in learner.snapshot.items():
            assert value.shape == net.parameters([0])[name].shape

    def test_online_variant_never_consolidates(self):
        learner = clOnlineLearner(sphereNet(), streamConfig(variant = 'online', delta_mu = 100.0, delta_sigma = 100.0,
                                                            window = 2))
        for batch in sphereStream().batches: learner.step(batch)
        assert learner.omega_updates == 0
        assert learner.omega.count == 0

    def test_a_peak_separates_omega_updates(self):
        learner = clOnlineLearner(sphereNet(2), streamConfig(delta_mu = 0.8, delta_sigma = 0.2, window = 3, lr = 0.05))
        updates, peaks = 0, 0
        for batch in sphereStream(30, 10, seed = 4).batches:
            learner.step(batch)
            if learner.omega_updates > updates:
                if updates > 0: assert learner.peak_events > peaks
                updates, peaks = learner.omega_updates, learner.peak_events
            assert learner.buffer.size <= 30
        assert learner.arrivals == 60

    def test_huge_penalty_holds_important_weights(self):
        net = sphereNet()
        config = streamConfig(lam = 1e9, delta_mu = 100.0, delta_sigma = 100.0, window = 2, steps = 2, lr = 0.05)
        learner = clOnlineLearner(net, config)
        for batch in sphereStream(10, 10, seed = 2).batches:
            learner.step(batch)
            live = net.parameters([0])
            for name, weight in learner.omega.values.items():
                important = weight > 1e-3
                numpy.testing.assert_allclose(live[name][important], learner.snapshot[name][important], atol = 1e-4)
        assert learner.omega_updates >= 1

    def test_invariants_over_random_arrivals(self):
        rng = numpy.random.default_rng(77)
        config = streamConfig(capacity = 8, lam = 1.0, delta_mu = 0.8, delta_sigma = 0.2, window = 3, steps = 1, lr = 0.05)
        learner = clOnlineLearner(sphereNet(5), config)
        updates, peaks = 0, 0
        snapshot = {name: value.copy() for name, value in learner.snapshot.items()}
        for arrival in range(1000):
            quadrant = clData.quadrants[int(rng.integers(0, 2))]
            batch = data.sphereQuadrant(quadrant, int(rng.integers(1, 13)), seed = arrival)
            loss = learner.step(batch)
            assert numpy.isfinite(loss)
            assert learner.buffer.size <= 8
            assert len(learner.window) <= 3
            assert learner.omega.count == learner.omega_updates
            assert learner.omega_updates in (updates, updates + 1)
            if learner.omega_updates == updates:
                for name, value in learner.snapshot.items():
                    numpy.testing.assert_array_equal(value, snapshot[name])
            else:
                if updates > 0: assert learner.peak_events > peaks
                updates, peaks = learner.omega_updates, learner.peak_events
                snapshot = {name: value.copy() for name, value in learner.snapshot.items()}
        assert learner.arrivals == 1000

class TestStream:
    """Stream runs and traces."""

    def test_empty_stream(self):
        rows = runner.runStream(clData.stream([], []), sphereNet(), streamConfig(), sphereTests())
        assert rows == []
        assert runner.finalAccuracy(rows) == {}

    def test_evaluation_schedule(self):
        rows = runner.runStream(sphereStream(6), sphereNet(), streamConfig(eval_every = 5), sphereTests())
        assert sorted(set(row.step for row in rows)) == [4, 9, 11]
        assert len(rows) == 6
        assert all(0.0 <= row.phase_accuracy <= 1.0 for row in rows)
        assert list(runner.finalAccuracy(rows)) == [0, 1]

    def test_joint_variant_is_deterministic(self):
        config = streamConfig(variant = 'online_joint', eval_every = 4, seed = 3)
        first = runner.runStream(sphereStream(), sphereNet(), config, sphereTests())
        second = runner.runStream(sphereStream(), sphereNet(), config, sphereTests())
        assert first == second

    def test_trace_round_trip(self, tmp_path):
        rows = runner.runStream(sphereStream(3), sphereNet(), streamConfig(eval_every = 2), sphereTests())
        path = os.path.join(str(tmp_path), 'trace.csv')
        runner.writeTrace(rows, path)
        with open(path) as stream:
            assert stream.readline() == 'step,phase,phase_accuracy,loss_mean,omega_updates\n'
        again = runner.readTrace(path)
        assert [(row.step, row.phase, row.omega_updates) for row in again] == \
               [(row.step, row.phase, row.omega_updates) for row in rows]
        for row, other in zip(again, rows):
            assert row.phase_accuracy == pytest.approx(other.phase_accuracy, abs = 1e-6)

    def test_accuracy(self):
        net = sphereNet()
        test = clData.labeledBatch(numpy.zeros((0, 4)), numpy.zeros(0, dtype = numpy.int64))
        with pytest.raises(ValueError):
            runner.accuracy(net, 0, test)
        with pytest.raises(ValueError):
            runner.runStream(sphereStream(), sphereNet(), streamConfig(eval_every = 0), sphereTests())
        identity = linearNet(numpy.eye(2))
        assert runner.accuracy(identity, 0, clData.labeledBatch(numpy.eye(2), numpy.array([0, 0]))) == 0.5
