import numpy
import pytest

from clLearn.clData import clData
from clLearn.clDistill import clDistill
from clLearn.clNetwork import clNetwork
from clLearn.clSequence import clSequence, methodConfig
from clLearn.clSparse import clSparse
from conftest import linearNet

data = clData()

def sphereTasks(count = 2, seed = 0):
    return [data.sphereTask(index, clData.quadrants[index % 2], 60, 40, seed = seed + index) for index in range(count)]

def sphereNet(seed = 0):
    return clNetwork.build([4, 8], 'relu', {0: 2}, seed = seed)

def quick(**changes):
    return methodConfig(epochs = 2, batch_size = 20, lr = 0.05)._replace(**changes)

class TestEvaluate:
    """Held-out accuracy."""

    def test_all_correct(self):
        test = clData.labeledBatch(numpy.eye(3), numpy.arange(3))
        assert clSequence().evaluate(linearNet(numpy.eye(3)), 0, test, chunk = 2) == 1.0

    def test_empty_test_set(self):
        with pytest.raises(ValueError):
            clSequence().evaluate(linearNet(numpy.eye(3)), 0, clData.labeledBatch(numpy.zeros((0, 3)), numpy.zeros(0, dtype = int)))

class TestValidate:
    """Method consistency."""

    def test_rejects_inconsistent_methods(self):
        sequence = clSequence()
        with pytest.raises(ValueError):
            sequence.validate(methodConfig(importance = 'si'))
        with pytest.raises(ValueError):
            sequence.validate(methodConfig(lam = -1.0))
        with pytest.raises(ValueError):
            sequence.validate(methodConfig(omega_rule = 'max'))
        with pytest.raises(ValueError):
            sequence.validate(methodConfig(distill = clDistill().config('lwf'), shared_head = True))
        assert sequence.validate(methodConfig()) == methodConfig()

class TestRunSequence:
    """Task-incremental training."""

    def test_single_task(self):
        metrics = clSequence().runSequence(sphereTasks(1), sphereNet(), quick())
        assert list(metrics.entries) == [(0, 0)]
        assert not metrics.forgetting

    def test_zero_epochs_leave_the_trunk(self):
        net = sphereNet()
        before = net.snapshot()
        metrics = clSequence().runSequence(sphereTasks(), net, quick(epochs = 0))
        for name, value in net.snapshot().items():
            numpy.testing.assert_array_equal(value, before[name])
        assert sorted(metrics.entries) == [(0, 0), (0, 1), (1, 1)]

    def test_heads_are_added(self):
        net = sphereNet()
        clSequence().runSequence(sphereTasks(3), net, quick())
        assert sorted(net.heads) == [0, 1, 2]

    def test_same_seed_same_matrix(self):
        first = clSequence().runSequence(sphereTasks(), sphereNet(), quick(importance = 'mas', lam = 1.0))
        second = clSequence().runSequence(sphereTasks(), sphereNet(), quick(importance = 'mas', lam = 1.0))
        assert first.entries == second.entries

    @pytest.mark.parametrize('importance', ['mas', 'ewc'])
    def test_importance_accumulates_per_boundary(self, importance):
        sequence = clSequence()
        sequence.runSequence(sphereTasks(3), sphereNet(), quick(importance = importance, lam = 0.5))
        assert sequence.omega.count == 3
        assert all(name.startswith('trunk.') for name in sequence.omega.names)
        assert set(sequence.snapshot) == set(sequence.omega.names)
        assert 0.0 <= sequence.analysis['free_capacity'] <= 1.0
        assert 'sparsity_layer_0' in sequence.analysis

    def test_shared_head_is_consolidated(self):
        sequence = clSequence()
        net = sphereNet()
        sequence.runSequence(sphereTasks(), net, quick(importance = 'mas', lam = 0.5, shared_head = True))
        assert 'head.0.weights' in sequence.omega.names
        assert sorted(net.heads) == [0]

    def test_discounted_inhibition_tracks_neurons(self):
        sequence = clSequence()
        reg = clSparse().config('slnid', 1e-3, 0.5)
        sequence.runSequence(sphereTasks(), sphereNet(), quick(importance = 'mas', lam = 0.5, rep_reg = reg))
        assert len(sequence.alpha.layers) == 1
        assert numpy.all(sequence.alpha.layers[0] >= 0)

    @pytest.mark.parametrize('kind', ['sni', 'decov', 'l1_rep', 'l1_param', 'l2_wd'])
    def test_regularizers_train(self, kind):
        reg = clSparse().config(kind, 1e-3)
        metrics = clSequence().runSequence(sphereTasks(), sphereNet(), quick(rep_reg = reg))
        assert all(0.0 <= value <= 1.0 for value in metrics.entries.values())

    def test_ebll_trains_an_autoencoder_per_task(self):
        distill = clDistill().config('ebll', 2.0, 1.0, 1e-3, 3, 2, 0.01)
        sequence = clSequence()
        metrics = sequence.runSequence(sphereTasks(), sphereNet(), quick(distill = distill))
        assert sorted(sequence.autoencoders) == [0, 1]
        assert sequence.autoencoders[0].code_size == 3
        assert len(metrics.entries) == 3

    def test_lwf_trains_no_autoencoder(self):
        sequence = clSequence()
        sequence.runSequence(sphereTasks(), sphereNet(), quick(distill = clDistill().config('lwf')))
        assert not sequence.autoencoders

    def test_old_autoencoders_stay_frozen(self, monkeypatch):
        trained = {}
        original = clDistill.trainAutoencoder
        def recording(self, *args, **kwargs):
            autoencoder = original(self, *args, **kwargs)
            trained[autoencoder.task] = [layer.copy() for layer in (autoencoder.encoder.weights, autoencoder.encoder.bias,
                                                                     autoencoder.decoder.weights, autoencoder.decoder.bias)]
            return autoencoder
        monkeypatch.setattr(clDistill, 'trainAutoencoder', recording)
        sequence = clSequence()
        distill = clDistill().config('ebll', 2.0, 1.0, 1e-3, 3, 2, 0.01)
        sequence.runSequence(sphereTasks(3), sphereNet(), quick(distill = distill))
        assert sorted(trained) == [0, 1, 2]
        for task, arrays in trained.items():
            autoencoder = sequence.autoencoders[task]
            final = [autoencoder.encoder.weights, autoencoder.encoder.bias, autoencoder.decoder.weights, autoencoder.decoder.bias]
            for before, after in zip(arrays, final):
                numpy.testing.assert_array_equal(after, before)

    @pytest.mark.parametrize('lam', [1e6, 1e10])
    def test_huge_penalty_freezes_the_first_task(self, lam):
        first = data.sphereTask(0, 'q1', 60, 40, seed = 5)
        tasks = [first, first._replace(task_id = 1)]
        net = sphereNet()
        metrics = clSequence().runSequence(tasks, net, quick(importance = 'mas', lam = lam, epochs = 5))
        assert abs(metrics.get(0, 1) - metrics.get(0, 0)) <= 0.005
        assert all(numpy.all(numpy.isfinite(value)) for value in net.parameters([0, 1]).values())

class TestJointTrain:
    """Multitask reference."""

    def test_one_task(self):
        metrics = clSequence().jointTrain(sphereTasks(1), sphereNet(), quick())
        assert list(metrics.entries) == [(0, 0)]

    def test_every_task_at_the_last_stage(self):
        metrics = clSequence().jointTrain(sphereTasks(3), sphereNet(), quick())
        assert sorted(metrics.entries) == [(0, 2), (1, 2), (2, 2)]
        assert not metrics.forgetting

    def test_rejects_distillation(self):
        with pytest.raises(ValueError):
            clSequence().jointTrain(sphereTasks(), sphereNet(), quick(distill = clDistill().config('lwf')))
